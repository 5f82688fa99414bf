#pragma once

// Concept-based semantic similarity: temperature softmax over concept scores,
// argmax frequency counting, the frequency discard rule, and pairwise
// similarity blocks computed on demand (the full n x n matrix is never built).

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "semhash/datastore.hpp"
#include "semhash/matrix.hpp"

namespace semhash::conceptsim {

/// Row i = softmax(tau * s_i), max-subtracted so any finite score is safe.
/// Throws UsageError for tau <= 0 (or non-finite), DataError for non-finite scores.
DistributionMatrix concept_distributions(const ScoreMatrix& s, double tau);

/// f[c] = number of rows whose argmax is c; ties go to the smallest index.
std::vector<std::size_t> concept_frequencies(const DistributionMatrix& d);

/// keep[c] = (0.5 n/m <= f[c] <= 0.5 n), both bounds inclusive.
std::vector<bool> keep_mask(std::span<const std::size_t> frequencies, std::size_t n, std::size_t m);

/// How the temperature of the second (post-denoise) softmax pass is chosen.
enum class SecondPassTemperature {
  kScaled,  ///< tau' = tau * m' / m  (keeps the per-concept scale, e.g. 3m -> 3m')
  kSame,    ///< tau' = tau
};

struct DenoiseReport {
  std::vector<std::string> concept_names;  ///< all original concepts
  std::vector<std::size_t> kept;           ///< indices into the original concepts
  std::vector<std::size_t> frequencies;    ///< per original concept
  std::size_t n = 0;
  double lower_threshold = 0.0;            ///< 0.5 n / m
  double upper_threshold = 0.0;            ///< 0.5 n
  double tau = 0.0;
  double second_pass_tau = 0.0;

  /// Plain-text report: header lines, then one "name<TAB>frequency<TAB>kept|discarded" row
  /// per concept.
  std::string to_text() const;
};

struct DenoiseResult {
  DenoiseReport report;
  DistributionMatrix distributions;  ///< over the kept concepts only
};

/// Drops concepts outside the frequency bounds and re-softmaxes the kept score
/// columns. Throws DataError when fewer than two concepts survive.
DenoiseResult denoise(const ScoreMatrix& s, double tau,
                      SecondPassTemperature rule = SecondPassTemperature::kScaled);

/// Template-averaged variant: the keep-mask is computed from the mean of the
/// per-template distributions, then applied to every template.
std::vector<DenoiseResult> denoise_templates(std::span<const ScoreMatrix> templates, double tau,
                                             SecondPassTemperature rule =
                                                 SecondPassTemperature::kScaled);

/// Restricts `s` to the given columns (in order).
ScoreMatrix select_concepts(const ScoreMatrix& s, std::span<const std::size_t> columns);

enum class SimilarityMode {
  kConcept,           ///< cosine of denoised concept distributions
  kConceptNoDenoise,  ///< cosine of distributions over the full concept set
  kFeatureCosine,     ///< cosine of raw feature rows
};

/// The source of pairwise similarities for training. Rows are pre-normalized
/// on construction, so block queries are pure dot products.
class SimilaritySource {
 public:
  /// Concept modes. Several matrices = template-averaged similarity.
  SimilaritySource(SimilarityMode mode, std::vector<DistributionMatrix> distributions);
  /// Feature mode. Throws DataError on a zero-norm row.
  explicit SimilaritySource(const FeatureMatrix& features);

  SimilarityMode mode() const noexcept { return mode_; }
  std::size_t n() const noexcept { return n_; }
  std::size_t payload_count() const noexcept { return unit_rows_.size(); }

  /// Block[r][c] = q(rows[r], cols[c]); mean cosine over payloads.
  Matrix block(std::span<const std::size_t> rows, std::span<const std::size_t> cols) const;

 private:
  SimilarityMode mode_;
  std::size_t n_ = 0;
  std::vector<Matrix> unit_rows_;
};

/// Free-function form of SimilaritySource::block.
inline Matrix similarity_block(const SimilaritySource& src, std::span<const std::size_t> rows,
                               std::span<const std::size_t> cols) {
  return src.block(rows, cols);
}

const char* to_string(SimilarityMode mode) noexcept;
/// Accepts "concept", "concept-no-denoise", "feature-cosine".
SimilarityMode parse_similarity_mode(const std::string& text);

}  // namespace semhash::conceptsim
