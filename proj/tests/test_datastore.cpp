#include <gtest/gtest.h>

#include <bit>
#include <cmath>
#include <cstring>
#include <limits>
#include <random>

#include "oracles.hpp"
#include "semhash/datastore.hpp"
#include "semhash/error.hpp"
#include "test_util.hpp"

using namespace semhash;
using testutil::TempDir;

namespace {

ScoreMatrix cat_dog() {
  ScoreMatrix s;
  s.concept_names = {"cat", "dog"};
  s.scores = Matrix(1, 2);
  s.scores(0, 0) = 0.5;
  s.scores(0, 1) = 0.25;
  return s;
}

ScoreMatrix random_scores(std::mt19937_64& rng, std::size_t n, std::size_t m) {
  std::normal_distribution<float> g(0.0f, 1.0f);
  ScoreMatrix s;
  for (std::size_t j = 0; j < m; ++j) s.concept_names.push_back("c" + std::to_string(j) + "_é");
  s.scores = Matrix(n, m);
  for (double& v : s.scores.values()) v = g(rng);  // float-representable
  return s;
}

std::uint32_t le32(const std::vector<char>& b, std::size_t at) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= std::uint32_t(static_cast<unsigned char>(b[at + i])) << (8 * i);
  return v;
}

std::uint64_t le64(const std::vector<char>& b, std::size_t at) {
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= std::uint64_t(static_cast<unsigned char>(b[at + i])) << (8 * i);
  return v;
}

}  // namespace

TEST(ScoreMatrixFormat, SmallFileHasExactLayout) {
  TempDir dir;
  write_score_matrix(dir / "s.uhsm", cat_dog());
  const auto bytes = testutil::read_bytes(dir / "s.uhsm");
  // magic 4 + version 4 + n 8 + m 8 + (4+3) + (4+3) + 2 floats 8
  ASSERT_EQ(bytes.size(), 46u);
  EXPECT_EQ(std::string(bytes.data(), 4), "UHSM");
  EXPECT_EQ(le32(bytes, 4), 1u);
  EXPECT_EQ(le64(bytes, 8), 1u);
  EXPECT_EQ(le64(bytes, 16), 2u);
  EXPECT_EQ(le32(bytes, 24), 3u);
  EXPECT_EQ(std::string(bytes.data() + 28, 3), "cat");
  EXPECT_EQ(le32(bytes, 31), 3u);
  EXPECT_EQ(std::string(bytes.data() + 35, 3), "dog");
  EXPECT_EQ(le32(bytes, 38), std::bit_cast<std::uint32_t>(0.5f));
  EXPECT_EQ(le32(bytes, 42), std::bit_cast<std::uint32_t>(0.25f));
}

TEST(ScoreMatrixFormat, RoundTripRandomized) {
  TempDir dir;
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 5; ++trial) {
    const auto s = random_scores(rng, 1 + trial * 7, 2 + trial * 3);
    write_score_matrix(dir / "s.uhsm", s);
    const auto back = read_score_matrix(dir / "s.uhsm");
    EXPECT_EQ(back.concept_names, s.concept_names);
    EXPECT_EQ(back.scores, s.scores);
  }
}

TEST(ScoreMatrixFormat, NonFiniteRejectedBeforeWriting) {
  TempDir dir;
  auto s = cat_dog();
  s.scores(0, 1) = std::numeric_limits<double>::quiet_NaN();
  EXPECT_THROW(write_score_matrix(dir / "nan.uhsm", s), DataError);
  EXPECT_FALSE(std::filesystem::exists(dir / "nan.uhsm"));
}

TEST(ScoreMatrixFormat, InvariantViolationsRejectedOnWrite) {
  TempDir dir;
  auto dup = cat_dog();
  dup.concept_names = {"cat", "cat"};
  EXPECT_THROW(write_score_matrix(dir / "a", dup), DataError);

  auto empty_name = cat_dog();
  empty_name.concept_names[0].clear();
  EXPECT_THROW(write_score_matrix(dir / "b", empty_name), DataError);

  ScoreMatrix one_concept;
  one_concept.concept_names = {"cat"};
  one_concept.scores = Matrix(1, 1);
  EXPECT_THROW(write_score_matrix(dir / "c", one_concept), DataError);
}

TEST(ScoreMatrixFormat, WrongMagicNamesTheMismatch) {
  TempDir dir;
  write_score_matrix(dir / "s.uhsm", cat_dog());
  auto bytes = testutil::read_bytes(dir / "s.uhsm");
  std::memcpy(bytes.data(), "XXXX", 4);
  testutil::write_bytes(dir / "s.uhsm", bytes);
  try {
    read_score_matrix(dir / "s.uhsm");
    FAIL() << "expected FormatError";
  } catch (const FormatError& e) {
    EXPECT_NE(std::string(e.what()).find("magic"), std::string::npos);
    EXPECT_NE(std::string(e.what()).find("XXXX"), std::string::npos);
  }
}

TEST(ScoreMatrixFormat, WrongVersionRejected) {
  TempDir dir;
  write_score_matrix(dir / "s.uhsm", cat_dog());
  auto bytes = testutil::read_bytes(dir / "s.uhsm");
  bytes[4] = 2;
  testutil::write_bytes(dir / "s.uhsm", bytes);
  EXPECT_THROW(read_score_matrix(dir / "s.uhsm"), FormatError);
}

TEST(ScoreMatrixFormat, TruncationDetectedAtEveryLength) {
  TempDir dir;
  write_score_matrix(dir / "s.uhsm", cat_dog());
  const auto bytes = testutil::read_bytes(dir / "s.uhsm");
  for (std::size_t len = 0; len < bytes.size(); ++len) {
    testutil::write_bytes(dir / "t.uhsm", std::vector<char>(bytes.begin(), bytes.begin() + len));
    EXPECT_THROW(read_score_matrix(dir / "t.uhsm"), FormatError) << "length " << len;
  }
}

TEST(ScoreMatrixFormat, ReaderRejectsNonFiniteAndDuplicates) {
  TempDir dir;
  write_score_matrix(dir / "s.uhsm", cat_dog());
  auto bytes = testutil::read_bytes(dir / "s.uhsm");
  auto nan_bytes = bytes;
  const auto nan_bits = std::bit_cast<std::uint32_t>(std::numeric_limits<float>::infinity());
  for (int i = 0; i < 4; ++i) nan_bytes[42 + i] = static_cast<char>((nan_bits >> (8 * i)) & 0xFF);
  testutil::write_bytes(dir / "inf.uhsm", nan_bytes);
  EXPECT_THROW(read_score_matrix(dir / "inf.uhsm"), FormatError);

  auto dup = bytes;
  std::memcpy(dup.data() + 35, "cat", 3);
  testutil::write_bytes(dir / "dup.uhsm", dup);
  EXPECT_THROW(read_score_matrix(dir / "dup.uhsm"), FormatError);
}

TEST(ScoreMatrixFormat, MissingFileIsIoError) {
  EXPECT_THROW(read_score_matrix("/nonexistent/dir/x.uhsm"), IoError);
}

TEST(FeatureMatrixFormat, RoundTripAndLayout) {
  TempDir dir;
  FeatureMatrix f{Matrix(3, 5)};
  std::mt19937_64 rng(3);
  std::normal_distribution<float> g;
  for (double& v : f.features.values()) v = g(rng);
  write_feature_matrix(dir / "f.uhsf", f);
  const auto bytes = testutil::read_bytes(dir / "f.uhsf");
  EXPECT_EQ(bytes.size(), 24u + 3 * 5 * 4);
  EXPECT_EQ(std::string(bytes.data(), 4), "UHSF");
  EXPECT_EQ(read_feature_matrix(dir / "f.uhsf").features, f.features);
  EXPECT_THROW(read_score_matrix(dir / "f.uhsf"), FormatError);
}

TEST(DistributionFormat, RoundTripRenormalizes) {
  TempDir dir;
  DistributionMatrix d{{"a", "b", "c"}, Matrix(2, 3)};
  const double row0[] = {0.1, 0.2, 0.7};
  const double row1[] = {1.0 / 3, 1.0 / 3, 1.0 / 3};
  for (int j = 0; j < 3; ++j) {
    d.dist(0, j) = row0[j];
    d.dist(1, j) = row1[j];
  }
  write_distribution_matrix(dir / "d.uhsd", d);
  const auto back = read_distribution_matrix(dir / "d.uhsd");
  EXPECT_NO_THROW(back.validate(1e-9));
  for (std::size_t x = 0; x < 6; ++x) EXPECT_NEAR(back.dist.values()[x], d.dist.values()[x], 1e-7);
}

TEST(Labels, ParsesDirectExample) {
  const auto t = parse_labels("0\t3\n1\t3,7\n");
  ASSERT_EQ(t.n(), 2u);
  EXPECT_EQ(t.labels[0], (std::vector<std::uint32_t>{3}));
  EXPECT_EQ(t.labels[1], (std::vector<std::uint32_t>{3, 7}));
}

TEST(Labels, OutOfOrderLinesStoredByIndex) {
  const auto t = parse_labels("1\t2\n0\t1\n");
  EXPECT_EQ(t.labels[0], (std::vector<std::uint32_t>{1}));
  EXPECT_EQ(t.labels[1], (std::vector<std::uint32_t>{2}));
}

TEST(Labels, Errors) {
  EXPECT_THROW(parse_labels("0\t\n"), DataError);
  EXPECT_THROW(parse_labels("0\t1\n0\t2\n"), DataError);  // duplicate
  EXPECT_THROW(parse_labels("0\t1\n2\t2\n"), DataError);  // missing 1
  EXPECT_THROW(parse_labels("0 1\n"), DataError);         // no tab
  EXPECT_THROW(parse_labels("0\t1,x\n"), DataError);
  EXPECT_THROW(parse_labels("0\t-1\n"), DataError);
  EXPECT_THROW(parse_labels(""), DataError);
}

TEST(Labels, FileRoundTrip) {
  TempDir dir;
  std::mt19937_64 rng(5);
  const auto t = oracle::random_labels(rng, 40, 9, 3);
  write_labels(dir / "l.tsv", t);
  EXPECT_EQ(read_labels(dir / "l.tsv").labels, t.labels);
}

TEST(CodesFormat, AllOnesWord) {
  TempDir dir;
  PackedCodeSet c(1, 64);
  for (std::size_t j = 0; j < 64; ++j) c.set_bit(0, j, true);
  write_codes(dir / "c.uhsb", c);
  const auto bytes = testutil::read_bytes(dir / "c.uhsb");
  ASSERT_EQ(bytes.size(), 32u);
  EXPECT_EQ(std::string(bytes.data(), 4), "UHSB");
  EXPECT_EQ(le64(bytes, 8), 64u);  // k before n
  EXPECT_EQ(le64(bytes, 16), 1u);
  EXPECT_EQ(le64(bytes, 24), 0xFFFFFFFFFFFFFFFFull);
}

TEST(CodesFormat, PaddingGarbageRejectedOnRead) {
  TempDir dir;
  PackedCodeSet c(1, 65);
  c.set_bit(0, 64, true);
  write_codes(dir / "c.uhsb", c);
  auto bytes = testutil::read_bytes(dir / "c.uhsb");
  EXPECT_NO_THROW(read_codes(dir / "c.uhsb"));
  bytes[24 + 8] |= 0x02;  // bit 65 of the second word
  testutil::write_bytes(dir / "c.uhsb", bytes);
  EXPECT_THROW(read_codes(dir / "c.uhsb"), FormatError);
}

TEST(CodesFormat, PaddingGarbageRejectedOnWriteAndConstruct) {
  TempDir dir;
  EXPECT_THROW(PackedCodeSet(1, 65, {0, 0b110}), FormatError);
  PackedCodeSet c(1, 65);
  c.set_bit(0, 70, true);  // beyond k; set_bit does not police padding
  EXPECT_THROW(write_codes(dir / "c.uhsb", c), FormatError);
}

TEST(CodesFormat, RoundTripAllLengths) {
  TempDir dir;
  std::mt19937_64 rng(17);
  for (std::size_t k : {1u, 7u, 63u, 64u, 65u, 96u, 128u, 200u}) {
    const auto c = oracle::random_codeset(rng, 13, k);
    write_codes(dir / "c.uhsb", c);
    const auto back = read_codes(dir / "c.uhsb");
    EXPECT_EQ(back, c) << "k=" << k;
    // unpack to bits and repack is the identity
    PackedCodeSet repacked(c.n(), c.k());
    for (std::size_t i = 0; i < c.n(); ++i) {
      for (std::size_t j = 0; j < k; ++j) repacked.set_bit(i, j, back.bit(i, j));
    }
    EXPECT_EQ(repacked, c);
  }
}
