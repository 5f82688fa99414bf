#include <cmath>
#include <cstdio>
#include <random>

#include "semhash/cli.hpp"
#include "semhash/error.hpp"

namespace semhash::cli {

namespace {

std::vector<std::string> concept_names(std::size_t m) {
  const int width = static_cast<int>(std::to_string(m - 1).size());
  std::vector<std::string> names;
  for (std::size_t j = 0; j < m; ++j) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "concept_%0*zu", width, j);
    names.emplace_back(buf);
  }
  return names;
}

SynthSplit empty_split(std::size_t rows, const SynthOptions& o) {
  SynthSplit s;
  s.scores.concept_names = concept_names(o.concepts);
  s.scores.scores = Matrix(rows, o.concepts);
  s.features.features = Matrix(rows, o.dim);
  s.labels.labels.reserve(rows);
  return s;
}

}  // namespace

SynthData generate_synthetic(const SynthOptions& o) {
  if (o.clusters < 2) throw UsageError("synth: need at least 2 clusters");
  if (o.concepts < o.clusters) throw UsageError("synth: need at least as many concepts as clusters");
  if (o.per_cluster < 1 || o.dim < 1) throw UsageError("synth: per-cluster count and dim must be >= 1");
  if (!(o.noise >= 0.0) || !std::isfinite(o.noise)) throw UsageError("synth: noise must be >= 0");
  if (o.queries_per_cluster >= o.per_cluster) {
    throw UsageError("synth: queries per cluster must leave database points in every cluster");
  }

  std::mt19937_64 rng(o.seed);
  std::normal_distribution<double> unit_normal(0.0, 1.0);
  auto noise = [&] { return o.noise > 0.0 ? o.noise * unit_normal(rng) : 0.0; };

  Matrix centers(o.clusters, o.dim);
  for (std::size_t c = 0; c < o.clusters; ++c) {
    auto row = centers.row(c);
    double n2 = 0.0;
    do {
      n2 = 0.0;
      for (double& v : row) {
        v = unit_normal(rng);
        n2 += v * v;
      }
    } while (n2 == 0.0);
    const double inv = 1.0 / std::sqrt(n2);
    for (double& v : row) v *= inv;
  }

  const std::size_t q_per = o.queries_per_cluster;
  SynthData data;
  data.db = empty_split(o.clusters * (o.per_cluster - q_per), o);
  if (q_per > 0) data.queries = empty_split(o.clusters * q_per, o);

  std::size_t db_row = 0;
  std::size_t q_row = 0;
  for (std::size_t c = 0; c < o.clusters; ++c) {
    for (std::size_t p = 0; p < o.per_cluster; ++p) {
      const bool is_query = p < q_per;
      SynthSplit& split = is_query ? *data.queries : data.db;
      const std::size_t row = is_query ? q_row++ : db_row++;
      auto f = split.features.features.row(row);
      const auto center = centers.row(c);
      for (std::size_t x = 0; x < o.dim; ++x) f[x] = center[x] + noise();
      auto s = split.scores.scores.row(row);
      for (std::size_t j = 0; j < o.concepts; ++j) s[j] = (j == c ? 1.0 : 0.0) + noise();
      split.labels.labels.push_back({static_cast<std::uint32_t>(c)});
    }
  }
  return data;
}

void write_synthetic(const std::filesystem::path& dir, const SynthData& data) {
  std::filesystem::create_directories(dir);
  write_score_matrix(dir / "scores.uhsm", data.db.scores);
  write_feature_matrix(dir / "features.uhsf", data.db.features);
  write_labels(dir / "labels.tsv", data.db.labels);
  if (data.queries) {
    write_score_matrix(dir / "query_scores.uhsm", data.queries->scores);
    write_feature_matrix(dir / "query_features.uhsf", data.queries->features);
    write_labels(dir / "query_labels.tsv", data.queries->labels);
  }
}

}  // namespace semhash::cli
