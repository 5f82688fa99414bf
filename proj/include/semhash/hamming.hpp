#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "semhash/datastore.hpp"
#include "semhash/matrix.hpp"

namespace semhash::hamming {

/// bit = 1 iff z > 0 (sgn(0) = -1). Throws DataError on non-finite input.
PackedCodeSet binarize(const Matrix& z);

/// Popcount of XOR over the live bits of two packed codes of length k.
inline std::size_t distance(std::span<const std::uint64_t> a, std::span<const std::uint64_t> b,
                            std::uint64_t tail_mask) noexcept {
  std::size_t d = 0;
  const std::size_t last = a.size() - 1;
  for (std::size_t w = 0; w < last; ++w) d += static_cast<std::size_t>(__builtin_popcountll(a[w] ^ b[w]));
  d += static_cast<std::size_t>(__builtin_popcountll((a[last] ^ b[last]) & tail_mask));
  return d;
}

/// Distance between codes i and j of one set. Throws UsageError on a bad index.
std::size_t hamming_distance(const PackedCodeSet& codes, std::size_t i, std::size_t j);

/// Distances from `query` to every code in `db`.
std::vector<std::uint32_t> distances_to(std::span<const std::uint64_t> query, const PackedCodeSet& db);

/// First `count` db indices by ascending (distance, index). Counting-sort
/// selection over the k+1 possible distances; no comparison sort.
std::vector<std::size_t> rank_topn(std::span<const std::uint64_t> query, const PackedCodeSet& db,
                                   std::size_t count);

struct RadiusBucket {
  std::size_t retrieved = 0;  ///< db items at exactly this distance
  std::size_t relevant = 0;   ///< of which relevant
};

/// Buckets for distances 0..k. `relevance[j]` is nonzero when db item j is relevant.
std::vector<RadiusBucket> radius_histogram(std::span<const std::uint64_t> query,
                                           const PackedCodeSet& db,
                                           std::span<const std::uint8_t> relevance);

}  // namespace semhash::hamming
