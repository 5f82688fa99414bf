#include "semhash/hamming.hpp"

#include <cmath>
#include <string>

#include "semhash/error.hpp"

namespace semhash::hamming {

namespace {

void check_query(std::span<const std::uint64_t> query, const PackedCodeSet& db) {
  if (query.size() != db.words_per_code() || db.k() == 0) {
    throw UsageError("query code length does not match the database");
  }
}

}  // namespace

PackedCodeSet binarize(const Matrix& z) {
  if (z.cols() == 0) throw UsageError("binarize: zero-length codes");
  PackedCodeSet codes(z.rows(), z.cols());
  for (std::size_t i = 0; i < z.rows(); ++i) {
    const auto row = z.row(i);
    for (std::size_t j = 0; j < row.size(); ++j) {
      if (!std::isfinite(row[j])) {
        throw DataError("binarize: non-finite value at row " + std::to_string(i));
      }
      if (row[j] > 0.0) codes.set_bit(i, j, true);
    }
  }
  return codes;
}

std::size_t hamming_distance(const PackedCodeSet& codes, std::size_t i, std::size_t j) {
  if (i >= codes.n() || j >= codes.n()) throw UsageError("hamming_distance: index out of range");
  return distance(codes.code(i), codes.code(j), codes.tail_mask());
}

std::vector<std::uint32_t> distances_to(std::span<const std::uint64_t> query, const PackedCodeSet& db) {
  check_query(query, db);
  std::vector<std::uint32_t> out(db.n());
  const auto mask = db.tail_mask();
  for (std::size_t j = 0; j < db.n(); ++j) {
    out[j] = static_cast<std::uint32_t>(distance(query, db.code(j), mask));
  }
  return out;
}

std::vector<std::size_t> rank_topn(std::span<const std::uint64_t> query, const PackedCodeSet& db,
                                   std::size_t count) {
  if (count > db.n()) {
    throw UsageError("rank_topn: requested " + std::to_string(count) + " results from a database of " +
                     std::to_string(db.n()));
  }
  const auto dist = distances_to(query, db);
  std::vector<std::size_t> offset(db.k() + 2, 0);
  for (auto d : dist) ++offset[d + 1];
  // offset[d] = number of items closer than d; cutoff = smallest radius covering `count`
  std::size_t cutoff = 0;
  for (std::size_t d = 1; d < offset.size(); ++d) {
    offset[d] += offset[d - 1];
    if (offset[d] < count) cutoff = d;
  }
  std::vector<std::size_t> out(count);
  for (std::size_t j = 0; j < dist.size(); ++j) {
    const auto d = dist[j];
    if (d > cutoff) continue;
    const auto slot = offset[d]++;
    if (slot < count) out[slot] = j;
  }
  return out;
}

std::vector<RadiusBucket> radius_histogram(std::span<const std::uint64_t> query,
                                           const PackedCodeSet& db,
                                           std::span<const std::uint8_t> relevance) {
  if (relevance.size() != db.n()) throw UsageError("radius_histogram: relevance length mismatch");
  const auto dist = distances_to(query, db);
  std::vector<RadiusBucket> buckets(db.k() + 1);
  for (std::size_t j = 0; j < dist.size(); ++j) {
    ++buckets[dist[j]].retrieved;
    if (relevance[j]) ++buckets[dist[j]].relevant;
  }
  return buckets;
}

}  // namespace semhash::hamming
