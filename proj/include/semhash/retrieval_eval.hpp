#pragma once

// Retrieval metrics under Hamming ranking (MAP@n, precision@N) and hash lookup
// (precision/recall as the Hamming radius sweeps 0..k). Two items are relevant
// to each other when their label sets intersect.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "semhash/datastore.hpp"

namespace semhash::eval {

bool relevant(std::span<const std::uint32_t> a, std::span<const std::uint32_t> b);

/// Average precision of a ranked relevance list (nonzero = relevant); 0 when
/// nothing in the list is relevant.
double average_precision(std::span<const std::uint8_t> rel);

enum class PrAveraging {
  kMicro,  ///< pool counts over queries, then divide
  kMacro,  ///< per-query precision/recall, then average
};

struct EvalInputs {
  const PackedCodeSet& queries;
  const LabelTable& query_labels;
  const PackedCodeSet& db;
  const LabelTable& db_labels;
};

struct PrecisionPoint {
  std::size_t n = 0;
  double precision = 0.0;
};

struct PrPoint {
  std::size_t radius = 0;
  double precision = 0.0;
  double recall = 0.0;
};

struct PrCurve {
  std::vector<PrPoint> points;               ///< radius 0..k
  std::size_t queries_without_relevant = 0;  ///< excluded from the recall denominator
};

struct RetrievalReport {
  double map = 0.0;
  std::size_t map_n = 0;
  std::vector<PrecisionPoint> p_at_n;
  PrCurve pr;
};

struct EvalOptions {
  std::size_t threads = 1;
  PrAveraging pr_averaging = PrAveraging::kMicro;
};

/// Throws UsageError when shapes disagree or n exceeds the database size.
double map_at_n(const EvalInputs& in, std::size_t n, const EvalOptions& opts = {});
std::vector<PrecisionPoint> precision_at_n_curve(const EvalInputs& in,
                                                 std::span<const std::size_t> points,
                                                 const EvalOptions& opts = {});
PrCurve pr_curve_hamming(const EvalInputs& in, const EvalOptions& opts = {});

RetrievalReport evaluate(const EvalInputs& in, std::size_t map_n,
                         std::span<const std::size_t> p_at_n_points, const EvalOptions& opts = {});

/// Writes map.csv, p_at_n.csv and pr.csv (headers, 9 significant digits).
void write_report(const std::filesystem::path& dir, const RetrievalReport& report);

}  // namespace semhash::eval
