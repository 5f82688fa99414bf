#pragma once

// Containers and on-disk formats shared by every stage of the pipeline.
//
// Binary layouts (all integers little-endian, payload floats IEEE-754 binary32):
//   "UHSM" scores        : magic, u32 version=1, u64 n, u64 m, m x (u32 len, utf-8 bytes), n*m f32
//   "UHSD" distributions : identical to "UHSM" with a different magic
//   "UHSF" features      : magic, u32 version=1, u64 n, u64 d, n*d f32
//   "UHSB" codes         : magic, u32 version=1, u64 k, u64 n, n*ceil(k/64) u64
// Labels are text: "<index>\t<id>,<id>,...\n", one line per item.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "semhash/matrix.hpp"

namespace semhash {

/// n x m image-concept similarity scores; row i is the score vector of image i.
struct ScoreMatrix {
  std::vector<std::string> concept_names;
  Matrix scores;

  std::size_t n() const noexcept { return scores.rows(); }
  std::size_t m() const noexcept { return scores.cols(); }

  /// Throws DataError unless n >= 1, m >= 2, names are non-empty and distinct,
  /// and every score is finite.
  void validate() const;
};

/// n x d embedding coordinates standing in for images.
struct FeatureMatrix {
  Matrix features;

  std::size_t n() const noexcept { return features.rows(); }
  std::size_t d() const noexcept { return features.cols(); }

  void validate() const;
};

/// n x m row-stochastic concept distributions.
struct DistributionMatrix {
  std::vector<std::string> concept_names;
  Matrix dist;

  std::size_t n() const noexcept { return dist.rows(); }
  std::size_t m() const noexcept { return dist.cols(); }

  /// Entries in [0, 1] and every row sums to 1 within `row_sum_tol`.
  void validate(double row_sum_tol = 1e-9) const;
};

/// Per-item label sets. Each set is sorted, duplicate-free and non-empty.
struct LabelTable {
  std::vector<std::vector<std::uint32_t>> labels;

  std::size_t n() const noexcept { return labels.size(); }
};

/// n binary codes of k bits, packed into 64-bit words.
/// Bit j of code i is word j/64, bit j%64; a set bit means +1. Padding bits are zero.
class PackedCodeSet {
 public:
  PackedCodeSet() = default;
  /// All-zero (all -1) codes.
  PackedCodeSet(std::size_t n, std::size_t k);
  /// Adopts `words`; throws FormatError on a size mismatch or nonzero padding.
  PackedCodeSet(std::size_t n, std::size_t k, std::vector<std::uint64_t> words);

  std::size_t n() const noexcept { return n_; }
  std::size_t k() const noexcept { return k_; }
  std::size_t words_per_code() const noexcept { return words_per_code_; }

  std::span<const std::uint64_t> code(std::size_t i) const noexcept {
    return {words_.data() + i * words_per_code_, words_per_code_};
  }
  std::span<const std::uint64_t> words() const noexcept { return words_; }

  bool bit(std::size_t i, std::size_t j) const noexcept {
    return (words_[i * words_per_code_ + j / 64] >> (j % 64)) & 1U;
  }
  void set_bit(std::size_t i, std::size_t j, bool value) noexcept;

  /// Mask of live bits in the last word of each code.
  std::uint64_t tail_mask() const noexcept;

  /// Throws FormatError if any padding bit (position >= k) is set.
  void check_padding() const;

  bool operator==(const PackedCodeSet&) const = default;

 private:
  std::size_t n_ = 0;
  std::size_t k_ = 0;
  std::size_t words_per_code_ = 0;
  std::vector<std::uint64_t> words_;
};

inline constexpr std::size_t words_for_bits(std::size_t k) noexcept { return (k + 63) / 64; }

void write_score_matrix(const std::filesystem::path& path, const ScoreMatrix& s);
ScoreMatrix read_score_matrix(const std::filesystem::path& path);

void write_feature_matrix(const std::filesystem::path& path, const FeatureMatrix& f);
FeatureMatrix read_feature_matrix(const std::filesystem::path& path);

/// Payload is stored at float32 precision; the reader accepts rows summing to 1
/// within float32 rounding and renormalizes them in double precision.
void write_distribution_matrix(const std::filesystem::path& path, const DistributionMatrix& d);
DistributionMatrix read_distribution_matrix(const std::filesystem::path& path);

LabelTable read_labels(const std::filesystem::path& path);
void write_labels(const std::filesystem::path& path, const LabelTable& labels);
/// Parses label TSV text. Exposed for tests and in-memory use.
LabelTable parse_labels(const std::string& text);

void write_codes(const std::filesystem::path& path, const PackedCodeSet& codes);
PackedCodeSet read_codes(const std::filesystem::path& path);

}  // namespace semhash
