#include "semhash/hashnet.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include "semhash/error.hpp"

namespace semhash::hashnet {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double sign_pm1(double v) noexcept { return v > 0.0 ? 1.0 : -1.0; }

double log_add_exp(double a, double b) noexcept {
  if (a == kNegInf) return b;
  if (b == kNegInf) return a;
  const double hi = std::max(a, b);
  return hi + std::log1p(std::exp(std::min(a, b) - hi));
}

void check_shapes(const Matrix& z, const Matrix& q) {
  if (z.rows() < 1 || z.cols() < 1) throw UsageError("loss: empty code batch");
  if (q.rows() != z.rows() || q.cols() != z.rows()) {
    throw UsageError("loss: similarity block must be t x t for t = " + std::to_string(z.rows()));
  }
}

// out(i, j) = sum_c a(i, c) * b(j, c)   (a * b^T)
void multiply_transposed(const Matrix& a, const Matrix& b, Matrix& out) {
  for (std::size_t i = 0; i < a.rows(); ++i) {
    const auto ar = a.row(i);
    for (std::size_t j = 0; j < b.rows(); ++j) {
      const auto br = b.row(j);
      double acc = 0.0;
      for (std::size_t c = 0; c < ar.size(); ++c) acc += ar[c] * br[c];
      out(i, j) = acc;
    }
  }
}

// out(r, c) = sum_i a(i, r) * b(i, c)   (a^T * b)
Matrix transposed_multiply(const Matrix& a, const Matrix& b) {
  Matrix out(a.cols(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    const auto ar = a.row(i);
    const auto br = b.row(i);
    for (std::size_t r = 0; r < ar.size(); ++r) {
      const double s = ar[r];
      if (s == 0.0) continue;
      auto orow = out.row(r);
      for (std::size_t c = 0; c < br.size(); ++c) orow[c] += s * br[c];
    }
  }
  return out;
}

// out = a * b
Matrix multiply(const Matrix& a, const Matrix& b) {
  Matrix out(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    const auto ar = a.row(i);
    auto orow = out.row(i);
    for (std::size_t c = 0; c < ar.size(); ++c) {
      const double s = ar[c];
      if (s == 0.0) continue;
      const auto br = b.row(c);
      for (std::size_t j = 0; j < br.size(); ++j) orow[j] += s * br[j];
    }
  }
  return out;
}

void add_column_sums(const Matrix& m, std::vector<double>& out) {
  for (std::size_t i = 0; i < m.rows(); ++i) {
    const auto r = m.row(i);
    for (std::size_t c = 0; c < r.size(); ++c) out[c] += r[c];
  }
}

}  // namespace

void TrainConfig::validate() const {
  if (bits < 1) throw UsageError("bits must be >= 1");
  if (hidden < 1) throw UsageError("hidden must be >= 1");
  if (!(gamma > 0.0) || !std::isfinite(gamma)) throw UsageError("gamma must be > 0");
  if (!(lambda >= 0.0 && lambda <= 1.0)) throw UsageError("lambda must lie in [0, 1]");
  if (!(alpha >= 0.0) || !std::isfinite(alpha)) throw UsageError("alpha must be >= 0");
  if (!(beta >= 0.0) || !std::isfinite(beta)) throw UsageError("beta must be >= 0");
  if (!(lr > 0.0) || !std::isfinite(lr)) throw UsageError("lr must be > 0");
  if (!(momentum >= 0.0 && momentum < 1.0)) throw UsageError("momentum must lie in [0, 1)");
  if (!(weight_decay >= 0.0) || !std::isfinite(weight_decay)) {
    throw UsageError("weight_decay must be >= 0");
  }
  if (batch < 2) throw UsageError("batch must be >= 2");
}

void apply_preset(TrainConfig& cfg, const std::string& name) {
  struct Preset {
    const char* name;
    double alpha, lambda, gamma, beta;
  };
  static constexpr Preset kPresets[] = {
      {"cifar10", 0.2, 0.8, 0.2, 0.001},
      {"nuswide", 0.1, 0.5, 0.2, 0.001},
      {"mirflickr", 0.3, 0.6, 0.5, 0.001},
  };
  for (const auto& p : kPresets) {
    if (name == p.name) {
      cfg.alpha = p.alpha;
      cfg.lambda = p.lambda;
      cfg.gamma = p.gamma;
      cfg.beta = p.beta;
      return;
    }
  }
  throw UsageError("unknown preset '" + name + "' (expected cifar10, nuswide or mirflickr)");
}

HashHeadParams HashHeadParams::zeros(std::size_t input_dim, std::size_t hidden, std::size_t bits) {
  HashHeadParams p;
  p.input_dim = input_dim;
  p.hidden = hidden;
  p.bits = bits;
  p.w1 = Matrix(hidden, input_dim);
  p.b1.assign(hidden, 0.0);
  p.w2 = Matrix(bits, hidden);
  p.b2.assign(bits, 0.0);
  return p;
}

std::array<std::span<double>, 4> HashHeadParams::blocks() {
  return {w1.values(), std::span<double>(b1), w2.values(), std::span<double>(b2)};
}

std::array<std::span<const double>, 4> HashHeadParams::blocks() const {
  return {w1.values(), std::span<const double>(b1), w2.values(), std::span<const double>(b2)};
}

HashHeadParams init_params(std::size_t input_dim, std::size_t hidden, std::size_t bits,
                           std::uint64_t seed) {
  if (input_dim < 1 || hidden < 1 || bits < 1) {
    throw UsageError("hash head dimensions must be >= 1");
  }
  auto p = HashHeadParams::zeros(input_dim, hidden, bits);
  std::mt19937_64 rng(seed);
  auto xavier = [&rng](Matrix& w) {
    const double bound =
        std::sqrt(6.0 / static_cast<double>(w.rows() + w.cols()));
    std::uniform_real_distribution<double> dist(-bound, bound);
    for (double& v : w.values()) v = dist(rng);
  };
  xavier(p.w1);
  xavier(p.w2);
  return p;
}

ForwardCache forward_cached(const HashHeadParams& p, const Matrix& x) {
  if (x.cols() != p.input_dim) {
    throw UsageError("forward: feature dimension " + std::to_string(x.cols()) +
                     " does not match model input " + std::to_string(p.input_dim));
  }
  const std::size_t t = x.rows();
  ForwardCache c{Matrix(t, p.hidden), Matrix(t, p.hidden), Matrix(t, p.bits)};
  multiply_transposed(x, p.w1, c.pre_hidden);
  for (std::size_t i = 0; i < t; ++i) {
    auto pre = c.pre_hidden.row(i);
    auto act = c.hidden.row(i);
    for (std::size_t h = 0; h < p.hidden; ++h) {
      pre[h] += p.b1[h];
      act[h] = pre[h] > 0.0 ? pre[h] : 0.0;
    }
  }
  multiply_transposed(c.hidden, p.w2, c.z);
  for (std::size_t i = 0; i < t; ++i) {
    auto zr = c.z.row(i);
    for (std::size_t b = 0; b < p.bits; ++b) zr[b] = std::tanh(zr[b] + p.b2[b]);
  }
  return c;
}

Matrix forward(const HashHeadParams& p, const Matrix& x) { return forward_cached(p, x).z; }

PairSets partition_pairs(const Matrix& q_block, double lambda) {
  const std::size_t t = q_block.rows();
  PairSets sets{std::vector<std::vector<std::size_t>>(t), std::vector<std::vector<std::size_t>>(t)};
  for (std::size_t i = 0; i < t; ++i) {
    for (std::size_t j = 0; j < t; ++j) {
      if (j == i) continue;
      (q_block(i, j) >= lambda ? sets.positives[i] : sets.negatives[i]).push_back(j);
    }
  }
  return sets;
}

LossBreakdown loss_and_grad(const Matrix& z, const Matrix& q_block, const TrainConfig& cfg,
                            Matrix* grad) {
  check_shapes(z, q_block);
  const std::size_t t = z.rows();
  const std::size_t k = z.cols();
  const double td = static_cast<double>(t);

  std::vector<double> norms(t);
  Matrix unit(t, k);
  for (std::size_t i = 0; i < t; ++i) {
    double n2 = 0.0;
    for (double v : z.row(i)) n2 += v * v;
    norms[i] = std::sqrt(n2);
    if (!(norms[i] > 0.0) || !std::isfinite(norms[i])) {
      throw NumericalError("loss: code row " + std::to_string(i) +
                           " has zero or non-finite norm; cosine similarity undefined");
    }
    for (std::size_t c = 0; c < k; ++c) unit(i, c) = z(i, c) / norms[i];
  }
  Matrix cosine(t, t);
  multiply_transposed(unit, unit, cosine);

  LossBreakdown out;
  Matrix g_cos(t, t);  // d total / d cosine(i, j)

  for (std::size_t i = 0; i < t; ++i) {
    for (std::size_t j = 0; j < t; ++j) {
      const double diff = cosine(i, j) - q_block(i, j);
      out.l2_term += diff * diff;
      g_cos(i, j) = 2.0 * diff / (td * td);
    }
  }
  out.l2_term /= td * td;

  const auto sets = partition_pairs(q_block, cfg.lambda);
  const double inv_gamma = 1.0 / cfg.gamma;
  std::vector<double> log_denom;
  for (std::size_t i = 0; i < t; ++i) {
    const auto& pos = sets.positives[i];
    const auto& neg = sets.negatives[i];
    if (pos.empty()) continue;

    double neg_max = kNegInf;
    for (auto l : neg) neg_max = std::max(neg_max, cosine(i, l) * inv_gamma);
    double neg_lse = kNegInf;
    if (!neg.empty()) {
      double acc = 0.0;
      for (auto l : neg) acc += std::exp(cosine(i, l) * inv_gamma - neg_max);
      neg_lse = neg_max + std::log(acc);
    }

    log_denom.assign(pos.size(), 0.0);
    double row_term = 0.0;
    for (std::size_t a = 0; a < pos.size(); ++a) {
      const double logit = cosine(i, pos[a]) * inv_gamma;
      log_denom[a] = log_add_exp(logit, neg_lse);
      row_term += log_denom[a] - logit;
    }
    const double inv_pos = 1.0 / static_cast<double>(pos.size());
    out.contrastive_term += row_term * inv_pos;

    const double w = cfg.alpha * inv_pos * inv_gamma / td;
    for (std::size_t a = 0; a < pos.size(); ++a) {
      const double logit = cosine(i, pos[a]) * inv_gamma;
      g_cos(i, pos[a]) += w * (std::exp(logit - log_denom[a]) - 1.0);
    }
    if (!neg.empty()) {
      // sum_a exp(logit_l - log_denom[a]) = exp(logit_l - neg_max) * sum_a exp(neg_max - log_denom[a])
      double shared = 0.0;
      for (double ld : log_denom) shared += std::exp(neg_max - ld);
      for (auto l : neg) {
        g_cos(i, l) += w * std::exp(cosine(i, l) * inv_gamma - neg_max) * shared;
      }
    }
  }
  out.contrastive_term /= td;

  for (std::size_t i = 0; i < t; ++i) {
    for (double v : z.row(i)) {
      const double r = v - sign_pm1(v);
      out.quant_term += r * r;
    }
  }
  out.quant_term /= td;

  out.total = out.l2_term + cfg.alpha * out.contrastive_term + cfg.beta * out.quant_term;

  if (grad != nullptr) {
    *grad = Matrix(t, k);
    std::vector<double> g_unit(k);
    for (std::size_t i = 0; i < t; ++i) {
      std::fill(g_unit.begin(), g_unit.end(), 0.0);
      for (std::size_t j = 0; j < t; ++j) {
        const double s = g_cos(i, j) + g_cos(j, i);
        if (s == 0.0) continue;
        const auto uj = unit.row(j);
        for (std::size_t c = 0; c < k; ++c) g_unit[c] += s * uj[c];
      }
      const auto ui = unit.row(i);
      double radial = 0.0;
      for (std::size_t c = 0; c < k; ++c) radial += g_unit[c] * ui[c];
      auto gi = grad->row(i);
      for (std::size_t c = 0; c < k; ++c) {
        gi[c] = (g_unit[c] - radial * ui[c]) / norms[i] +
                cfg.beta * 2.0 * (z(i, c) - sign_pm1(z(i, c))) / td;
      }
    }
  }
  return out;
}

LossBreakdown loss(const Matrix& z, const Matrix& q_block, const TrainConfig& cfg) {
  return loss_and_grad(z, q_block, cfg, nullptr);
}

Matrix loss_grad(const Matrix& z, const Matrix& q_block, const TrainConfig& cfg) {
  Matrix g;
  loss_and_grad(z, q_block, cfg, &g);
  return g;
}

HashHeadParams backward(const HashHeadParams& p, const Matrix& x, const ForwardCache& cache,
                        const Matrix& dz) {
  const std::size_t t = x.rows();
  if (x.cols() != p.input_dim || dz.rows() != t || dz.cols() != p.bits ||
      cache.z.rows() != t || cache.hidden.rows() != t) {
    throw UsageError("backward: inconsistent shapes");
  }
  auto g = HashHeadParams::zeros(p.input_dim, p.hidden, p.bits);

  Matrix d_pre_out(t, p.bits);
  for (std::size_t i = 0; i < t; ++i) {
    for (std::size_t b = 0; b < p.bits; ++b) {
      const double zv = cache.z(i, b);
      d_pre_out(i, b) = dz(i, b) * (1.0 - zv * zv);
    }
  }
  g.w2 = transposed_multiply(d_pre_out, cache.hidden);
  add_column_sums(d_pre_out, g.b2);

  Matrix d_hidden = multiply(d_pre_out, p.w2);
  for (std::size_t i = 0; i < t; ++i) {
    for (std::size_t h = 0; h < p.hidden; ++h) {
      if (!(cache.pre_hidden(i, h) > 0.0)) d_hidden(i, h) = 0.0;
    }
  }
  g.w1 = transposed_multiply(d_hidden, x);
  add_column_sums(d_hidden, g.b1);
  return g;
}

MomentumState make_momentum_state(const HashHeadParams& p) {
  return {HashHeadParams::zeros(p.input_dim, p.hidden, p.bits)};
}

void sgd_step(HashHeadParams& p, const HashHeadParams& grads, MomentumState& state,
              const TrainConfig& cfg) {
  auto params = p.blocks();
  const auto gs = grads.blocks();
  auto vs = state.velocity.blocks();
  for (std::size_t b = 0; b < params.size(); ++b) {
    if (gs[b].size() != params[b].size() || vs[b].size() != params[b].size()) {
      throw UsageError("sgd_step: gradient shape mismatch");
    }
    for (std::size_t x = 0; x < params[b].size(); ++x) {
      vs[b][x] = cfg.momentum * vs[b][x] + gs[b][x] + cfg.weight_decay * params[b][x];
      params[b][x] -= cfg.lr * vs[b][x];
    }
  }
}

TrainResult train(const FeatureMatrix& features, const conceptsim::SimilaritySource& src,
                  const TrainConfig& cfg, const EpochObserver& observer) {
  cfg.validate();
  const std::size_t n = features.n();
  if (src.n() != n) {
    throw DataError("train: feature matrix has " + std::to_string(n) +
                    " rows but the similarity source covers " + std::to_string(src.n()));
  }
  if (features.d() < 1) throw DataError("train: empty feature matrix");
  if (cfg.epochs > 0 && n < cfg.batch) {
    throw UsageError("train: batch size " + std::to_string(cfg.batch) +
                     " exceeds the training set size " + std::to_string(n));
  }

  TrainResult result{init_params(features.d(), cfg.hidden, cfg.bits, cfg.seed), {}};
  auto state = make_momentum_state(result.params);
  std::seed_seq shuffle_seed{static_cast<std::uint32_t>(cfg.seed),
                             static_cast<std::uint32_t>(cfg.seed >> 32), 0x5348u};
  std::mt19937_64 rng(shuffle_seed);

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  const std::size_t t = cfg.batch;
  const std::size_t batches = n / t;
  Matrix x(t, features.d());
  Matrix dz;

  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    EpochStats stats;
    stats.epoch = epoch;
    stats.batches = batches;
    for (std::size_t b = 0; b < batches; ++b) {
      const std::span<const std::size_t> idx(order.data() + b * t, t);
      for (std::size_t r = 0; r < t; ++r) {
        const auto src_row = features.features.row(idx[r]);
        std::copy(src_row.begin(), src_row.end(), x.row(r).begin());
      }
      const auto cache = forward_cached(result.params, x);
      const auto q = src.block(idx, idx);
      LossBreakdown lb;
      try {
        lb = loss_and_grad(cache.z, q, cfg, &dz);
      } catch (const NumericalError& e) {
        throw NumericalError("epoch " + std::to_string(epoch) + ", batch " +
                             std::to_string(b + 1) + ": " + e.what());
      }
      if (!std::isfinite(lb.total)) {
        throw NumericalError("non-finite loss at epoch " + std::to_string(epoch) + ", batch " +
                             std::to_string(b + 1));
      }
      const auto grads = backward(result.params, x, cache, dz);
      sgd_step(result.params, grads, state, cfg);

      stats.mean.l2_term += lb.l2_term;
      stats.mean.contrastive_term += lb.contrastive_term;
      stats.mean.quant_term += lb.quant_term;
      stats.mean.total += lb.total;
    }
    if (batches > 0) {
      const double inv = 1.0 / static_cast<double>(batches);
      stats.mean.l2_term *= inv;
      stats.mean.contrastive_term *= inv;
      stats.mean.quant_term *= inv;
      stats.mean.total *= inv;
    }
    result.history.push_back(stats);
    if (observer) observer(stats);
  }
  return result;
}

Matrix encode_relaxed(const HashHeadParams& p, const Matrix& features, std::size_t chunk) {
  if (chunk == 0) chunk = 1;
  Matrix out(features.rows(), p.bits);
  for (std::size_t start = 0; start < features.rows(); start += chunk) {
    const std::size_t rows = std::min(chunk, features.rows() - start);
    Matrix x(rows, features.cols());
    for (std::size_t r = 0; r < rows; ++r) {
      const auto src = features.row(start + r);
      std::copy(src.begin(), src.end(), x.row(r).begin());
    }
    const auto z = forward(p, x);
    for (std::size_t r = 0; r < rows; ++r) {
      const auto zr = z.row(r);
      std::copy(zr.begin(), zr.end(), out.row(start + r).begin());
    }
  }
  return out;
}

}  // namespace semhash::hashnet
