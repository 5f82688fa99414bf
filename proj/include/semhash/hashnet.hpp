#pragma once

// Trainable hashing head and its similarity-preserving loss.
//
// Head: x (d) -> relu(W1 x + b1) (hidden) -> tanh(W2 h + b2) (k), giving relaxed
// codes z in (-1, 1)^k. Loss over a mini-batch of t codes with similarity block Q:
//
//   total = l2 + alpha * contrastive + beta * quant
//   l2          = 1/t^2 sum_ij (cos(z_i, z_j) - q_ij)^2
//   contrastive = 1/t sum_i 1/|P_i| sum_{j in P_i} -log( e^{h_ij/g} / (e^{h_ij/g} + sum_{l in N_i} e^{h_il/g}) )
//   quant       = 1/t sum_i ||z_i - sgn(z_i)||^2
//
// with P_i = {j != i : q_ij >= lambda}, N_i = {j != i : q_ij < lambda}, g = gamma,
// sgn(0) = -1. Rows with empty P_i contribute nothing to the contrastive term.

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "semhash/conceptsim.hpp"
#include "semhash/datastore.hpp"
#include "semhash/matrix.hpp"

namespace semhash::hashnet {

struct TrainConfig {
  std::size_t bits = 64;
  double alpha = 0.2;
  double beta = 0.001;
  double gamma = 0.2;
  double lambda = 0.8;
  double lr = 0.006;
  double momentum = 0.9;
  double weight_decay = 1e-5;
  std::size_t batch = 128;
  std::size_t epochs = 30;
  std::uint64_t seed = 1;
  std::size_t hidden = 256;

  /// Throws UsageError on an out-of-range field.
  void validate() const;
};

/// Overwrites alpha, lambda, gamma, beta with a named dataset preset:
/// "cifar10" (0.2, 0.8, 0.2, 0.001), "nuswide" (0.1, 0.5, 0.2, 0.001),
/// "mirflickr" (0.3, 0.6, 0.5, 0.001).
void apply_preset(TrainConfig& cfg, const std::string& name);

/// Weights of the two-layer head. Also used as the gradient / velocity container.
struct HashHeadParams {
  std::size_t input_dim = 0;
  std::size_t hidden = 0;
  std::size_t bits = 0;
  Matrix w1;               ///< hidden x input_dim
  std::vector<double> b1;  ///< hidden
  Matrix w2;               ///< bits x hidden
  std::vector<double> b2;  ///< bits

  /// Zero-valued parameters of the given shape.
  static HashHeadParams zeros(std::size_t input_dim, std::size_t hidden, std::size_t bits);

  /// Parameter blocks in layer order: w1, b1, w2, b2.
  std::array<std::span<double>, 4> blocks();
  std::array<std::span<const double>, 4> blocks() const;

  bool operator==(const HashHeadParams&) const = default;
};

/// Xavier-uniform weights (bound sqrt(6 / (fan_in + fan_out))), zero biases.
HashHeadParams init_params(std::size_t input_dim, std::size_t hidden, std::size_t bits,
                           std::uint64_t seed);

struct ForwardCache {
  Matrix pre_hidden;  ///< t x hidden, before relu
  Matrix hidden;      ///< t x hidden, after relu
  Matrix z;           ///< t x bits
};

ForwardCache forward_cached(const HashHeadParams& p, const Matrix& x);
/// Relaxed codes for a t x input_dim batch.
Matrix forward(const HashHeadParams& p, const Matrix& x);

struct LossBreakdown {
  double l2_term = 0.0;
  double contrastive_term = 0.0;
  double quant_term = 0.0;
  double total = 0.0;
};

/// Positive (q_ij >= lambda) and negative index sets per row, self excluded.
struct PairSets {
  std::vector<std::vector<std::size_t>> positives;
  std::vector<std::vector<std::size_t>> negatives;
};
PairSets partition_pairs(const Matrix& q_block, double lambda);

LossBreakdown loss(const Matrix& z, const Matrix& q_block, const TrainConfig& cfg);
/// d(total)/dZ, t x bits.
Matrix loss_grad(const Matrix& z, const Matrix& q_block, const TrainConfig& cfg);
/// Both at once; `grad` may be null.
LossBreakdown loss_and_grad(const Matrix& z, const Matrix& q_block, const TrainConfig& cfg,
                            Matrix* grad);

/// Backpropagates dZ through the head.
HashHeadParams backward(const HashHeadParams& p, const Matrix& x, const ForwardCache& cache,
                        const Matrix& dz);

struct MomentumState {
  HashHeadParams velocity;
};
MomentumState make_momentum_state(const HashHeadParams& p);

/// v <- momentum * v + g + weight_decay * w;  w <- w - lr * v.
void sgd_step(HashHeadParams& p, const HashHeadParams& grads, MomentumState& state,
              const TrainConfig& cfg);

struct EpochStats {
  std::size_t epoch = 0;  ///< 1-based
  std::size_t batches = 0;
  LossBreakdown mean;
};

struct TrainResult {
  HashHeadParams params;
  std::vector<EpochStats> history;
};

using EpochObserver = std::function<void(const EpochStats&)>;

/// Mini-batch SGD: each epoch shuffles with the seeded generator and runs
/// floor(n / batch) batches; leftovers are dropped. Throws NumericalError on a
/// non-finite loss.
TrainResult train(const FeatureMatrix& features, const conceptsim::SimilaritySource& src,
                  const TrainConfig& cfg, const EpochObserver& observer = {});

/// "UHSW": magic, u32 version=1, u64 input_dim, u64 hidden, u64 bits, then
/// float32 w1, b1, w2, b2 (row-major, little-endian).
void save_params(const std::filesystem::path& path, const HashHeadParams& p);
HashHeadParams load_params(const std::filesystem::path& path);

/// Runs the head over all rows in chunks of `chunk` rows.
Matrix encode_relaxed(const HashHeadParams& p, const Matrix& features, std::size_t chunk = 1024);

}  // namespace semhash::hashnet
