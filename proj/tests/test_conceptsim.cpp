#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "oracles.hpp"
#include "semhash/conceptsim.hpp"
#include "semhash/error.hpp"

using namespace semhash;
using namespace semhash::conceptsim;

namespace {

ScoreMatrix make_scores(std::size_t n, std::size_t m) {
  ScoreMatrix s;
  for (std::size_t j = 0; j < m; ++j) s.concept_names.push_back("c" + std::to_string(j));
  s.scores = Matrix(n, m);
  return s;
}

ScoreMatrix random_scores(std::mt19937_64& rng, std::size_t n, std::size_t m, double scale = 1.0) {
  auto s = make_scores(n, m);
  std::normal_distribution<double> g(0.0, scale);
  for (double& v : s.scores.values()) v = g(rng);
  return s;
}

DistributionMatrix rows_of(std::initializer_list<std::vector<double>> rows) {
  DistributionMatrix d;
  const std::size_t m = rows.begin()->size();
  for (std::size_t j = 0; j < m; ++j) d.concept_names.push_back("c" + std::to_string(j));
  d.dist = Matrix(rows.size(), m);
  std::size_t i = 0;
  for (const auto& r : rows) {
    for (std::size_t j = 0; j < m; ++j) d.dist(i, j) = r[j];
    ++i;
  }
  return d;
}

std::size_t first_argmax(std::span<const double> row) {
  std::size_t best = 0;
  for (std::size_t j = 1; j < row.size(); ++j) {
    if (row[j] > row[best]) best = j;
  }
  return best;
}

// Block-structured scores: row i belongs to cluster i % m and scores 1 there.
ScoreMatrix balanced(std::size_t n, std::size_t m) {
  auto s = make_scores(n, m);
  for (std::size_t i = 0; i < n; ++i) s.scores(i, i % m) = 1.0;
  return s;
}

}  // namespace

TEST(Softmax, UniformRow) {
  auto s = make_scores(1, 3);
  for (double tau : {0.01, 1.0, 500.0}) {
    const auto d = concept_distributions(s, tau);
    for (std::size_t j = 0; j < 3; ++j) EXPECT_NEAR(d.dist(0, j), 1.0 / 3, 1e-15);
  }
}

TEST(Softmax, ClosedFormTwoColumns) {
  auto s = make_scores(1, 2);
  s.scores(0, 1) = std::log(2.0);
  const auto d = concept_distributions(s, 1.0);
  EXPECT_NEAR(d.dist(0, 0), 1.0 / 3, 1e-15);
  EXPECT_NEAR(d.dist(0, 1), 2.0 / 3, 1e-15);
}

TEST(Softmax, RowStochasticAndArgmaxPreserving) {
  std::mt19937_64 rng(21);
  for (int trial = 0; trial < 20; ++trial) {
    const auto s = random_scores(rng, 30, 2 + trial, 5.0);
    const double tau = std::exp(std::uniform_real_distribution<double>(-3, 6)(rng));
    const auto d = concept_distributions(s, tau);
    for (std::size_t i = 0; i < s.n(); ++i) {
      double sum = 0;
      for (double v : d.dist.row(i)) sum += v;
      EXPECT_NEAR(sum, 1.0, 1e-9);
      EXPECT_EQ(first_argmax(d.dist.row(i)), first_argmax(s.scores.row(i)));
    }
  }
}

TEST(Softmax, ExtremeScoresDoNotOverflow) {
  auto s = make_scores(1, 3);
  s.scores(0, 0) = 1e30;
  s.scores(0, 1) = -1e30;
  const auto d = concept_distributions(s, 1000.0);
  EXPECT_EQ(d.dist(0, 0), 1.0);
  EXPECT_EQ(d.dist(0, 1), 0.0);
}

TEST(Softmax, ScaleAndShiftIdentities) {
  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 10; ++trial) {
    const auto s = random_scores(rng, 10, 7);
    const double c = std::uniform_real_distribution<double>(0.1, 10)(rng);
    const double tau = std::uniform_real_distribution<double>(0.5, 30)(rng);
    auto scaled = s;
    for (double& v : scaled.scores.values()) v *= c;
    auto shifted = s;
    for (std::size_t i = 0; i < s.n(); ++i) {
      const double shift = std::uniform_real_distribution<double>(-50, 50)(rng);
      for (double& v : shifted.scores.row(i)) v += shift;
    }
    const auto base = concept_distributions(s, tau);
    const auto a = concept_distributions(scaled, tau);
    const auto b = concept_distributions(s, c * tau);
    const auto sh = concept_distributions(shifted, tau);
    for (std::size_t x = 0; x < base.dist.values().size(); ++x) {
      EXPECT_NEAR(a.dist.values()[x], b.dist.values()[x], 1e-12);
      EXPECT_NEAR(sh.dist.values()[x], base.dist.values()[x], 1e-12);
    }
  }
}

TEST(Softmax, Errors) {
  auto s = make_scores(1, 2);
  EXPECT_THROW(concept_distributions(s, 0.0), UsageError);
  EXPECT_THROW(concept_distributions(s, -1.0), UsageError);
  s.scores(0, 0) = std::nan("");
  EXPECT_THROW(concept_distributions(s, 1.0), DataError);
}

TEST(Frequencies, DirectCount) {
  const auto d = rows_of({{0.9, 0.1}, {0.6, 0.4}, {0.2, 0.8}});
  EXPECT_EQ(concept_frequencies(d), (std::vector<std::size_t>{2, 1}));
}

TEST(Frequencies, IdenticalRowsAndTies) {
  const auto same = rows_of({{0.1, 0.7, 0.2}, {0.1, 0.7, 0.2}, {0.1, 0.7, 0.2}});
  EXPECT_EQ(concept_frequencies(same), (std::vector<std::size_t>{0, 3, 0}));
  const auto tie = rows_of({{1.0 / 3, 1.0 / 3, 1.0 / 3}, {0.2, 0.4, 0.4}});
  EXPECT_EQ(concept_frequencies(tie), (std::vector<std::size_t>{1, 1, 0}));
}

TEST(KeepMask, IntegerBounds) {
  const std::vector<std::size_t> f = {4, 5, 50, 51, 0, 0, 0, 0, 0, 0};
  const auto keep = keep_mask(f, 100, 10);
  EXPECT_FALSE(keep[0]);
  EXPECT_TRUE(keep[1]);
  EXPECT_TRUE(keep[2]);
  EXPECT_FALSE(keep[3]);
  EXPECT_FALSE(keep[4]);
}

TEST(KeepMask, FractionalLowerBound) {
  const std::vector<std::size_t> f = {1, 2, 3, 4};
  const auto keep = keep_mask(f, 10, 4);
  EXPECT_EQ(keep, (std::vector<bool>{false, true, true, true}));
}

TEST(KeepMask, DegenerateAllFalse) {
  const std::vector<std::size_t> f = {7, 0, 0};
  EXPECT_EQ(keep_mask(f, 7, 3), (std::vector<bool>{false, false, false}));
}

TEST(Denoise, DominantColumnDiscarded) {
  auto s = make_scores(40, 4);
  for (std::size_t i = 0; i < 40; ++i) s.scores(i, 0) = 10.0;
  const auto f = concept_frequencies(concept_distributions(s, 12.0));
  EXPECT_EQ(f, (std::vector<std::size_t>{40, 0, 0, 0}));
  EXPECT_EQ(keep_mask(f, 40, 4), (std::vector<bool>{false, false, false, false}));
  EXPECT_THROW(denoise(s, 12.0), DataError);
}

TEST(Denoise, DominantConceptMarkedDiscardedInReport) {
  // 60 of 100 rows pick column 0 (above 0.5n), the rest split over 1..4
  auto s = make_scores(100, 5);
  for (std::size_t i = 0; i < 100; ++i) s.scores(i, i < 60 ? 0 : 1 + i % 4) = 5.0;
  const auto r = denoise(s, 15.0);
  EXPECT_EQ(r.report.frequencies[0], 60u);
  EXPECT_EQ(r.report.kept, (std::vector<std::size_t>{1, 2, 3, 4}));
  EXPECT_EQ(r.distributions.m(), 4u);
  EXPECT_NE(r.report.to_text().find("c0\t60\tdiscarded"), std::string::npos);
  EXPECT_NE(r.report.to_text().find("c1\t10\tkept"), std::string::npos);
  EXPECT_DOUBLE_EQ(r.report.second_pass_tau, 15.0 * 4 / 5);
  const auto same = denoise(s, 15.0, SecondPassTemperature::kSame);
  EXPECT_DOUBLE_EQ(same.report.second_pass_tau, 15.0);
}

TEST(Denoise, BalancedClustersUnchanged) {
  const auto s = balanced(100, 4);
  const auto r = denoise(s, 12.0);
  EXPECT_EQ(r.report.kept.size(), 4u);
  EXPECT_EQ(r.report.frequencies, (std::vector<std::size_t>{25, 25, 25, 25}));
  const auto plain = concept_distributions(s, 12.0);
  for (std::size_t x = 0; x < plain.dist.values().size(); ++x) {
    EXPECT_NEAR(r.distributions.dist.values()[x], plain.dist.values()[x], 1e-12);
  }
}

TEST(Denoise, TooFewKeptIsAnError) {
  auto s = make_scores(10, 3);
  for (std::size_t i = 0; i < 10; ++i) s.scores(i, 0) = 1.0;
  try {
    denoise(s, 9.0);
    FAIL();
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("concept set"), std::string::npos);
  }
}

TEST(Denoise, TemplateAveragingSharesMask) {
  std::mt19937_64 rng(4);
  std::vector<ScoreMatrix> templates = {balanced(100, 4), balanced(100, 4)};
  std::normal_distribution<double> g(0, 0.01);
  for (double& v : templates[1].scores.values()) v += g(rng);
  const auto out = denoise_templates(templates, 12.0);
  ASSERT_EQ(out.size(), 2u);
  EXPECT_EQ(out[0].report.kept, out[1].report.kept);
}

TEST(SimilarityBlock, HandExamples) {
  const auto d = rows_of({{0.5, 0.5}, {1.0, 0.0}, {0.0, 1.0}, {0.5, 0.5}});
  SimilaritySource src(SimilarityMode::kConcept, {d});
  const std::vector<std::size_t> all = {0, 1, 2, 3};
  const auto q = src.block(all, all);
  EXPECT_NEAR(q(0, 1), 0.70710678, 1e-8);
  EXPECT_EQ(q(1, 2), 0.0);
  EXPECT_NEAR(q(0, 3), 1.0, 1e-15);
  for (std::size_t i = 0; i < 4; ++i) EXPECT_EQ(q(i, i), 1.0);
}

TEST(SimilarityBlock, PropertiesOnRandomDistributions) {
  std::mt19937_64 rng(99);
  const auto d = concept_distributions(random_scores(rng, 25, 6), 4.0);
  SimilaritySource src(SimilarityMode::kConcept, {d});
  std::vector<std::size_t> all(25);
  std::iota(all.begin(), all.end(), 0);
  const auto q = src.block(all, all);
  for (std::size_t i = 0; i < 25; ++i) {
    EXPECT_EQ(q(i, i), 1.0);
    for (std::size_t j = 0; j < 25; ++j) {
      EXPECT_EQ(q(i, j), q(j, i));
      EXPECT_GE(q(i, j), 0.0);
      EXPECT_LE(q(i, j), 1.0);
    }
  }
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t i = rng() % 25, j = rng() % 25;
    const std::vector<std::size_t> r = {i}, c = {j};
    const double expect = i == j ? 1.0 : oracle::cosine(d.dist.row(i), d.dist.row(j));
    EXPECT_NEAR(src.block(r, c)(0, 0), expect, 1e-12);
  }
}

TEST(SimilarityBlock, TemplateAverageIsMeanCosine) {
  std::mt19937_64 rng(5);
  const auto a = concept_distributions(random_scores(rng, 6, 4), 3.0);
  const auto b = concept_distributions(random_scores(rng, 6, 4), 3.0);
  SimilaritySource src(SimilarityMode::kConcept, {a, b});
  EXPECT_EQ(src.payload_count(), 2u);
  const std::vector<std::size_t> r = {1, 4}, c = {2, 5, 0};
  const auto q = src.block(r, c);
  for (std::size_t x = 0; x < r.size(); ++x) {
    for (std::size_t y = 0; y < c.size(); ++y) {
      const double expect = 0.5 * (oracle::cosine(a.dist.row(r[x]), a.dist.row(c[y])) +
                                   oracle::cosine(b.dist.row(r[x]), b.dist.row(c[y])));
      EXPECT_NEAR(q(x, y), expect, 1e-12);
    }
  }
}

TEST(SimilarityBlock, FeatureModeMatchesCosineAndRejectsZeroRows) {
  std::mt19937_64 rng(6);
  FeatureMatrix f{Matrix(5, 3)};
  std::normal_distribution<double> g;
  for (double& v : f.features.values()) v = g(rng);
  SimilaritySource src(f);
  const std::vector<std::size_t> r = {0, 3}, c = {1, 2, 4};
  const auto q = src.block(r, c);
  for (std::size_t x = 0; x < 2; ++x) {
    for (std::size_t y = 0; y < 3; ++y) {
      EXPECT_NEAR(q(x, y), oracle::cosine(f.features.row(r[x]), f.features.row(c[y])), 1e-12);
    }
  }
  for (double& v : f.features.row(2)) v = 0.0;
  EXPECT_THROW(SimilaritySource{f}, DataError);
}

TEST(SimilarityMode, ParseRoundTrip) {
  for (auto m : {SimilarityMode::kConcept, SimilarityMode::kConceptNoDenoise,
                 SimilarityMode::kFeatureCosine}) {
    EXPECT_EQ(parse_similarity_mode(to_string(m)), m);
  }
  EXPECT_THROW(parse_similarity_mode("bogus"), UsageError);
}
