#include "semhash/conceptsim.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "semhash/error.hpp"

namespace semhash::conceptsim {

namespace {

void softmax_row(std::span<const double> scores, double tau, std::span<double> out) {
  const double peak = *std::max_element(scores.begin(), scores.end());
  double sum = 0.0;
  for (std::size_t j = 0; j < scores.size(); ++j) {
    out[j] = std::exp(tau * (scores[j] - peak));
    sum += out[j];
  }
  for (double& v : out) v /= sum;
}

std::size_t argmax_first(std::span<const double> row) {
  std::size_t best = 0;
  for (std::size_t j = 1; j < row.size(); ++j) {
    if (row[j] > row[best]) best = j;
  }
  return best;
}

std::string format_real(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

Matrix unit_rows(const Matrix& m, const char* what) {
  Matrix out(m.rows(), m.cols());
  for (std::size_t i = 0; i < m.rows(); ++i) {
    const auto src = m.row(i);
    double norm2 = 0.0;
    for (double v : src) norm2 += v * v;
    const double norm = std::sqrt(norm2);
    if (!(norm > 0.0) || !std::isfinite(norm)) {
      throw DataError(std::string(what) + ": row " + std::to_string(i) +
                      " has zero or non-finite norm; cosine similarity undefined");
    }
    auto dst = out.row(i);
    for (std::size_t j = 0; j < src.size(); ++j) dst[j] = src[j] / norm;
  }
  return out;
}

void check_tau(double tau) {
  if (!(tau > 0.0) || !std::isfinite(tau)) {
    throw UsageError("temperature must be a positive finite number, got " + format_real(tau));
  }
}

double second_pass_tau(double tau, std::size_t m, std::size_t kept, SecondPassTemperature rule) {
  return rule == SecondPassTemperature::kScaled
             ? tau / static_cast<double>(m) * static_cast<double>(kept)
             : tau;
}

std::vector<std::size_t> kept_indices(const std::vector<bool>& keep) {
  std::vector<std::size_t> kept;
  for (std::size_t c = 0; c < keep.size(); ++c) {
    if (keep[c]) kept.push_back(c);
  }
  return kept;
}

void require_enough_kept(const DenoiseReport& report) {
  if (report.kept.size() >= 2) return;
  throw DataError("concept denoising kept " + std::to_string(report.kept.size()) + " of " +
                  std::to_string(report.concept_names.size()) +
                  " concepts (need at least 2); enlarge or change the concept set so that "
                  "concepts are the top-scoring concept for between " +
                  format_real(report.lower_threshold) + " and " +
                  format_real(report.upper_threshold) + " images");
}

}  // namespace

DistributionMatrix concept_distributions(const ScoreMatrix& s, double tau) {
  check_tau(tau);
  for (double v : s.scores.values()) {
    if (!std::isfinite(v)) throw DataError("concept scores contain a non-finite value");
  }
  DistributionMatrix d{s.concept_names, Matrix(s.n(), s.m())};
  for (std::size_t i = 0; i < s.n(); ++i) softmax_row(s.scores.row(i), tau, d.dist.row(i));
  return d;
}

std::vector<std::size_t> concept_frequencies(const DistributionMatrix& d) {
  std::vector<std::size_t> f(d.m(), 0);
  for (std::size_t i = 0; i < d.n(); ++i) ++f[argmax_first(d.dist.row(i))];
  return f;
}

std::vector<bool> keep_mask(std::span<const std::size_t> frequencies, std::size_t n, std::size_t m) {
  const double lower = 0.5 * static_cast<double>(n) / static_cast<double>(m);
  const double upper = 0.5 * static_cast<double>(n);
  std::vector<bool> keep(frequencies.size());
  for (std::size_t c = 0; c < frequencies.size(); ++c) {
    const auto f = static_cast<double>(frequencies[c]);
    keep[c] = lower <= f && f <= upper;
  }
  return keep;
}

ScoreMatrix select_concepts(const ScoreMatrix& s, std::span<const std::size_t> columns) {
  ScoreMatrix out;
  out.concept_names.reserve(columns.size());
  for (auto c : columns) {
    if (c >= s.m()) throw UsageError("concept index out of range");
    out.concept_names.push_back(s.concept_names[c]);
  }
  out.scores = Matrix(s.n(), columns.size());
  for (std::size_t i = 0; i < s.n(); ++i) {
    for (std::size_t j = 0; j < columns.size(); ++j) out.scores(i, j) = s.scores(i, columns[j]);
  }
  return out;
}

DenoiseResult denoise(const ScoreMatrix& s, double tau, SecondPassTemperature rule) {
  std::vector<ScoreMatrix> single{s};
  return std::move(denoise_templates(single, tau, rule).front());
}

std::vector<DenoiseResult> denoise_templates(std::span<const ScoreMatrix> templates, double tau,
                                             SecondPassTemperature rule) {
  check_tau(tau);
  if (templates.empty()) throw UsageError("denoise: no score matrices given");
  const auto& first = templates.front();
  first.validate();
  for (const auto& t : templates) {
    t.validate();
    if (t.n() != first.n() || t.concept_names != first.concept_names) {
      throw DataError("denoise: template score matrices disagree on images or concepts");
    }
  }
  const std::size_t n = first.n();
  const std::size_t m = first.m();

  DistributionMatrix pooled = concept_distributions(first, tau);
  for (std::size_t t = 1; t < templates.size(); ++t) {
    const auto d = concept_distributions(templates[t], tau);
    auto acc = pooled.dist.values();
    const auto add = d.dist.values();
    for (std::size_t x = 0; x < acc.size(); ++x) acc[x] += add[x];
  }
  if (templates.size() > 1) {
    for (double& v : pooled.dist.values()) v /= static_cast<double>(templates.size());
  }

  DenoiseReport report;
  report.concept_names = first.concept_names;
  report.n = n;
  report.frequencies = concept_frequencies(pooled);
  report.kept = kept_indices(keep_mask(report.frequencies, n, m));
  report.lower_threshold = 0.5 * static_cast<double>(n) / static_cast<double>(m);
  report.upper_threshold = 0.5 * static_cast<double>(n);
  report.tau = tau;
  report.second_pass_tau = second_pass_tau(tau, m, report.kept.size(), rule);
  require_enough_kept(report);

  std::vector<DenoiseResult> out;
  out.reserve(templates.size());
  for (const auto& t : templates) {
    auto reduced = select_concepts(t, report.kept);
    out.push_back({report, concept_distributions(reduced, report.second_pass_tau)});
  }
  return out;
}

std::string DenoiseReport::to_text() const {
  std::ostringstream out;
  out << "# concept denoising report\n";
  out << "images: " << n << '\n';
  out << "concepts: " << concept_names.size() << '\n';
  out << "tau: " << format_real(tau) << '\n';
  out << "lower_threshold: " << format_real(lower_threshold) << '\n';
  out << "upper_threshold: " << format_real(upper_threshold) << '\n';
  out << "kept: " << kept.size() << '\n';
  out << "second_pass_tau: " << format_real(second_pass_tau) << '\n';
  out << "concept\tfrequency\tstatus\n";
  std::vector<bool> is_kept(concept_names.size(), false);
  for (auto c : kept) is_kept[c] = true;
  for (std::size_t c = 0; c < concept_names.size(); ++c) {
    out << concept_names[c] << '\t' << frequencies[c] << '\t'
        << (is_kept[c] ? "kept" : "discarded") << '\n';
  }
  return out.str();
}

SimilaritySource::SimilaritySource(SimilarityMode mode, std::vector<DistributionMatrix> distributions)
    : mode_(mode) {
  if (mode == SimilarityMode::kFeatureCosine) {
    throw UsageError("feature-cosine similarity needs a feature matrix");
  }
  if (distributions.empty()) throw UsageError("similarity source: no distribution matrices");
  n_ = distributions.front().n();
  const auto m = distributions.front().m();
  for (const auto& d : distributions) {
    if (d.n() != n_) throw DataError("similarity source: payloads disagree on image count");
    if (d.m() != m) throw DataError("similarity source: payloads disagree on concept count");
    unit_rows_.push_back(unit_rows(d.dist, "distribution matrix"));
  }
}

SimilaritySource::SimilaritySource(const FeatureMatrix& features)
    : mode_(SimilarityMode::kFeatureCosine), n_(features.n()) {
  unit_rows_.push_back(unit_rows(features.features, "feature matrix"));
}

Matrix SimilaritySource::block(std::span<const std::size_t> rows,
                               std::span<const std::size_t> cols) const {
  for (auto i : rows) {
    if (i >= n_) throw UsageError("similarity block: row index out of range");
  }
  for (auto j : cols) {
    if (j >= n_) throw UsageError("similarity block: column index out of range");
  }
  const double lo = mode_ == SimilarityMode::kFeatureCosine ? -1.0 : 0.0;
  const double inv_payloads = 1.0 / static_cast<double>(unit_rows_.size());
  Matrix out(rows.size(), cols.size());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    for (std::size_t c = 0; c < cols.size(); ++c) {
      if (rows[r] == cols[c]) {
        out(r, c) = 1.0;
        continue;
      }
      double acc = 0.0;
      for (const auto& u : unit_rows_) {
        const auto a = u.row(rows[r]);
        const auto b = u.row(cols[c]);
        double dot = 0.0;
        for (std::size_t x = 0; x < a.size(); ++x) dot += a[x] * b[x];
        acc += dot;
      }
      out(r, c) = std::clamp(acc * inv_payloads, lo, 1.0);
    }
  }
  return out;
}

const char* to_string(SimilarityMode mode) noexcept {
  switch (mode) {
    case SimilarityMode::kConcept:
      return "concept";
    case SimilarityMode::kConceptNoDenoise:
      return "concept-no-denoise";
    case SimilarityMode::kFeatureCosine:
      return "feature-cosine";
  }
  return "?";
}

SimilarityMode parse_similarity_mode(const std::string& text) {
  if (text == "concept") return SimilarityMode::kConcept;
  if (text == "concept-no-denoise") return SimilarityMode::kConceptNoDenoise;
  if (text == "feature-cosine") return SimilarityMode::kFeatureCosine;
  throw UsageError("unknown similarity mode '" + text +
                   "' (expected concept, concept-no-denoise or feature-cosine)");
}

}  // namespace semhash::conceptsim
