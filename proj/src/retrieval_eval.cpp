#include "semhash/retrieval_eval.hpp"

#include <algorithm>
#include <cstdio>
#include <exception>
#include <fstream>
#include <string>
#include <thread>

#include "semhash/error.hpp"
#include "semhash/hamming.hpp"

namespace semhash::eval {

namespace {

void check_inputs(const EvalInputs& in) {
  if (in.queries.n() != in.query_labels.n()) {
    throw UsageError("query codes (" + std::to_string(in.queries.n()) + ") and query labels (" +
                     std::to_string(in.query_labels.n()) + ") disagree in count");
  }
  if (in.db.n() != in.db_labels.n()) {
    throw UsageError("database codes (" + std::to_string(in.db.n()) + ") and database labels (" +
                     std::to_string(in.db_labels.n()) + ") disagree in count");
  }
  if (in.queries.k() != in.db.k()) throw UsageError("query and database code lengths differ");
  if (in.queries.n() == 0) throw UsageError("no queries");
  if (in.db.n() == 0) throw UsageError("empty database");
}

std::vector<std::uint8_t> relevance_row(const EvalInputs& in, std::size_t q) {
  std::vector<std::uint8_t> rel(in.db.n());
  for (std::size_t j = 0; j < rel.size(); ++j) {
    rel[j] = relevant(in.query_labels.labels[q], in.db_labels.labels[j]) ? 1 : 0;
  }
  return rel;
}

/// Runs fn(q) for every query, spreading contiguous query ranges over threads.
/// Each fn writes only to its own output slot, so the result is independent
/// of scheduling.
template <typename Fn>
void for_each_query(std::size_t queries, std::size_t threads, Fn&& fn) {
  threads = std::max<std::size_t>(1, std::min(threads, queries));
  if (threads == 1) {
    for (std::size_t q = 0; q < queries; ++q) fn(q);
    return;
  }
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(threads);
  const std::size_t per = (queries + threads - 1) / threads;
  for (std::size_t t = 0; t < threads; ++t) {
    pool.emplace_back([&, t] {
      try {
        const std::size_t end = std::min(queries, (t + 1) * per);
        for (std::size_t q = t * per; q < end; ++q) fn(q);
      } catch (...) {
        errors[t] = std::current_exception();
      }
    });
  }
  for (auto& th : pool) th.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

double ordered_mean(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

std::string fmt9(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out << text;
  if (!out) throw IoError("write to '" + path.string() + "' failed");
}

}  // namespace

bool relevant(std::span<const std::uint32_t> a, std::span<const std::uint32_t> b) {
  auto ia = a.begin();
  auto ib = b.begin();
  while (ia != a.end() && ib != b.end()) {
    if (*ia == *ib) return true;
    if (*ia < *ib) {
      ++ia;
    } else {
      ++ib;
    }
  }
  return false;
}

double average_precision(std::span<const std::uint8_t> rel) {
  std::size_t hits = 0;
  double sum = 0.0;
  for (std::size_t i = 0; i < rel.size(); ++i) {
    if (!rel[i]) continue;
    ++hits;
    sum += static_cast<double>(hits) / static_cast<double>(i + 1);
  }
  return hits == 0 ? 0.0 : sum / static_cast<double>(hits);
}

double map_at_n(const EvalInputs& in, std::size_t n, const EvalOptions& opts) {
  check_inputs(in);
  if (n == 0 || n > in.db.n()) {
    throw UsageError("top-n of " + std::to_string(n) + " is outside 1.." + std::to_string(in.db.n()) +
                     " (database size)");
  }
  std::vector<double> ap(in.queries.n());
  for_each_query(in.queries.n(), opts.threads, [&](std::size_t q) {
    const auto ranked = hamming::rank_topn(in.queries.code(q), in.db, n);
    std::vector<std::uint8_t> rel(ranked.size());
    for (std::size_t r = 0; r < ranked.size(); ++r) {
      rel[r] = relevant(in.query_labels.labels[q], in.db_labels.labels[ranked[r]]) ? 1 : 0;
    }
    ap[q] = average_precision(rel);
  });
  return ordered_mean(ap);
}

std::vector<PrecisionPoint> precision_at_n_curve(const EvalInputs& in,
                                                 std::span<const std::size_t> points,
                                                 const EvalOptions& opts) {
  check_inputs(in);
  std::size_t deepest = 0;
  for (auto p : points) {
    if (p == 0 || p > in.db.n()) {
      throw UsageError("precision@N point " + std::to_string(p) + " is outside 1.." +
                       std::to_string(in.db.n()));
    }
    deepest = std::max(deepest, p);
  }
  // hits[q][x] = relevant items among the top points[x] for query q
  std::vector<std::vector<std::size_t>> hits(in.queries.n(), std::vector<std::size_t>(points.size()));
  for_each_query(in.queries.n(), opts.threads, [&](std::size_t q) {
    const auto ranked = hamming::rank_topn(in.queries.code(q), in.db, deepest);
    std::vector<std::size_t> prefix(ranked.size() + 1, 0);
    for (std::size_t r = 0; r < ranked.size(); ++r) {
      prefix[r + 1] = prefix[r] +
                      (relevant(in.query_labels.labels[q], in.db_labels.labels[ranked[r]]) ? 1 : 0);
    }
    for (std::size_t x = 0; x < points.size(); ++x) hits[q][x] = prefix[points[x]];
  });
  std::vector<PrecisionPoint> out;
  for (std::size_t x = 0; x < points.size(); ++x) {
    double sum = 0.0;
    for (std::size_t q = 0; q < hits.size(); ++q) {
      sum += static_cast<double>(hits[q][x]) / static_cast<double>(points[x]);
    }
    out.push_back({points[x], sum / static_cast<double>(hits.size())});
  }
  return out;
}

PrCurve pr_curve_hamming(const EvalInputs& in, const EvalOptions& opts) {
  check_inputs(in);
  const std::size_t k = in.db.k();
  std::vector<std::vector<hamming::RadiusBucket>> per_query(in.queries.n());
  for_each_query(in.queries.n(), opts.threads, [&](std::size_t q) {
    const auto rel = relevance_row(in, q);
    per_query[q] = hamming::radius_histogram(in.queries.code(q), in.db, rel);
  });

  PrCurve curve;
  std::vector<std::size_t> total_relevant(per_query.size(), 0);
  std::size_t pooled_relevant = 0;
  for (std::size_t q = 0; q < per_query.size(); ++q) {
    for (const auto& b : per_query[q]) total_relevant[q] += b.relevant;
    if (total_relevant[q] == 0) {
      ++curve.queries_without_relevant;
    } else {
      pooled_relevant += total_relevant[q];
    }
  }

  std::vector<std::size_t> cum_retrieved(per_query.size(), 0);
  std::vector<std::size_t> cum_relevant(per_query.size(), 0);
  for (std::size_t r = 0; r <= k; ++r) {
    std::size_t retrieved = 0;
    std::size_t hit = 0;
    std::size_t hit_recall = 0;  // only over queries with relevant items
    double macro_p = 0.0;
    double macro_r = 0.0;
    std::size_t macro_count = 0;
    for (std::size_t q = 0; q < per_query.size(); ++q) {
      cum_retrieved[q] += per_query[q][r].retrieved;
      cum_relevant[q] += per_query[q][r].relevant;
      retrieved += cum_retrieved[q];
      hit += cum_relevant[q];
      if (total_relevant[q] > 0) {
        hit_recall += cum_relevant[q];
        macro_p += cum_retrieved[q] == 0
                       ? 1.0
                       : static_cast<double>(cum_relevant[q]) / static_cast<double>(cum_retrieved[q]);
        macro_r += static_cast<double>(cum_relevant[q]) / static_cast<double>(total_relevant[q]);
        ++macro_count;
      }
    }
    PrPoint pt;
    pt.radius = r;
    if (opts.pr_averaging == PrAveraging::kMicro) {
      pt.precision = retrieved == 0 ? 1.0 : static_cast<double>(hit) / static_cast<double>(retrieved);
      pt.recall = pooled_relevant == 0
                      ? 0.0
                      : static_cast<double>(hit_recall) / static_cast<double>(pooled_relevant);
    } else {
      pt.precision = macro_count == 0 ? 1.0 : macro_p / static_cast<double>(macro_count);
      pt.recall = macro_count == 0 ? 0.0 : macro_r / static_cast<double>(macro_count);
    }
    curve.points.push_back(pt);
  }
  return curve;
}

RetrievalReport evaluate(const EvalInputs& in, std::size_t map_n,
                         std::span<const std::size_t> p_at_n_points, const EvalOptions& opts) {
  RetrievalReport report;
  report.map_n = map_n;
  report.map = map_at_n(in, map_n, opts);
  report.p_at_n = precision_at_n_curve(in, p_at_n_points, opts);
  report.pr = pr_curve_hamming(in, opts);
  return report;
}

void write_report(const std::filesystem::path& dir, const RetrievalReport& report) {
  std::filesystem::create_directories(dir);
  write_text(dir / "map.csv", "map_n,map\n" + std::to_string(report.map_n) + "," + fmt9(report.map) + "\n");

  std::string pn = "n,precision\n";
  for (const auto& p : report.p_at_n) pn += std::to_string(p.n) + "," + fmt9(p.precision) + "\n";
  write_text(dir / "p_at_n.csv", pn);

  std::string pr = "radius,precision,recall\n";
  for (const auto& p : report.pr.points) {
    pr += std::to_string(p.radius) + "," + fmt9(p.precision) + "," + fmt9(p.recall) + "\n";
  }
  write_text(dir / "pr.csv", pr);
}

}  // namespace semhash::eval
