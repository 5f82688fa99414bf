#include "semhash/datastore.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iterator>
#include <limits>
#include <optional>
#include <sstream>
#include <unordered_set>

#include "byte_io.hpp"
#include "semhash/error.hpp"

namespace semhash {

namespace {

using detail::ByteReader;
using detail::ByteWriter;
using detail::kFormatVersion;

void check_names(const std::vector<std::string>& names, std::size_t m, const std::string& what) {
  if (names.size() != m) {
    throw DataError(what + ": " + std::to_string(names.size()) + " concept names for " +
                    std::to_string(m) + " columns");
  }
  std::unordered_set<std::string_view> seen;
  for (const auto& name : names) {
    if (name.empty()) throw DataError(what + ": empty concept name");
    if (!seen.insert(name).second) throw DataError(what + ": duplicate concept name '" + name + "'");
  }
}

void check_finite_f32(const Matrix& mat, const std::string& what) {
  for (double v : mat.values()) {
    if (!std::isfinite(v) || !std::isfinite(static_cast<float>(v))) {
      throw DataError(what + ": non-finite value (or not representable as float32)");
    }
  }
}

void write_named_matrix(const std::filesystem::path& path, std::string_view magic,
                        const std::vector<std::string>& names, const Matrix& mat) {
  ByteWriter w;
  w.reserve(24 + mat.rows() * mat.cols() * 4);
  w.magic(magic);
  w.u32(kFormatVersion);
  w.u64(mat.rows());
  w.u64(mat.cols());
  for (const auto& name : names) w.str(name);
  for (double v : mat.values()) w.f32(static_cast<float>(v));
  w.flush_to(path);
}

struct NamedMatrix {
  std::vector<std::string> names;
  Matrix mat;
};

NamedMatrix read_named_matrix(const std::filesystem::path& path, std::string_view magic) {
  auto r = ByteReader::from_file(path);
  r.expect_magic(magic);
  r.expect_version();
  const auto n = r.u64("row count");
  const auto m = r.u64("column count");
  r.require_remaining(m, 4, "concept name block");
  NamedMatrix out;
  out.names.reserve(m);
  for (std::uint64_t j = 0; j < m; ++j) out.names.push_back(r.str("concept name"));
  if (m != 0 && n > std::numeric_limits<std::uint64_t>::max() / m) {
    throw FormatError(r.origin() + ": dimensions overflow");
  }
  r.require_remaining(n * m, 4, "payload");
  out.mat = Matrix(n, m);
  for (auto& v : out.mat.values()) v = r.f32("payload");
  r.expect_end();
  return out;
}

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \r");
  return std::string(s.substr(first, last - first + 1));
}

std::optional<std::uint64_t> parse_uint(std::string_view s) {
  std::uint64_t v = 0;
  const auto* end = s.data() + s.size();
  auto [p, ec] = std::from_chars(s.data(), end, v);
  if (ec != std::errc() || p != end || s.empty()) return std::nullopt;
  return v;
}

}  // namespace

void ScoreMatrix::validate() const {
  if (n() < 1) throw DataError("score matrix: need at least one image");
  if (m() < 2) throw DataError("score matrix: need at least two concepts");
  check_names(concept_names, m(), "score matrix");
  check_finite_f32(scores, "score matrix");
}

void FeatureMatrix::validate() const {
  if (n() < 1 || d() < 1) throw DataError("feature matrix: need n >= 1 and d >= 1");
  check_finite_f32(features, "feature matrix");
}

void DistributionMatrix::validate(double row_sum_tol) const {
  if (n() < 1 || m() < 1) throw DataError("distribution matrix: empty");
  check_names(concept_names, m(), "distribution matrix");
  for (std::size_t i = 0; i < n(); ++i) {
    double sum = 0.0;
    for (double v : dist.row(i)) {
      if (!std::isfinite(v) || v < 0.0 || v > 1.0) {
        throw DataError("distribution matrix: entry outside [0, 1] in row " + std::to_string(i));
      }
      sum += v;
    }
    if (std::abs(sum - 1.0) > row_sum_tol) {
      throw DataError("distribution matrix: row " + std::to_string(i) + " sums to " +
                      std::to_string(sum));
    }
  }
}

PackedCodeSet::PackedCodeSet(std::size_t n, std::size_t k)
    : n_(n), k_(k), words_per_code_(words_for_bits(k)), words_(n * words_for_bits(k), 0) {}

PackedCodeSet::PackedCodeSet(std::size_t n, std::size_t k, std::vector<std::uint64_t> words)
    : n_(n), k_(k), words_per_code_(words_for_bits(k)), words_(std::move(words)) {
  if (words_.size() != n_ * words_per_code_) {
    throw FormatError("packed codes: expected " + std::to_string(n_ * words_per_code_) +
                      " words, got " + std::to_string(words_.size()));
  }
  check_padding();
}

void PackedCodeSet::check_padding() const {
  if (words_per_code_ == 0) return;
  const auto mask = tail_mask();
  for (std::size_t i = 0; i < n_; ++i) {
    if (words_[(i + 1) * words_per_code_ - 1] & ~mask) {
      throw FormatError("packed codes: nonzero padding bits in code " + std::to_string(i));
    }
  }
}

void PackedCodeSet::set_bit(std::size_t i, std::size_t j, bool value) noexcept {
  auto& w = words_[i * words_per_code_ + j / 64];
  const std::uint64_t b = std::uint64_t{1} << (j % 64);
  w = value ? (w | b) : (w & ~b);
}

std::uint64_t PackedCodeSet::tail_mask() const noexcept {
  const auto rem = k_ % 64;
  return rem == 0 ? ~std::uint64_t{0} : (std::uint64_t{1} << rem) - 1;
}

void write_score_matrix(const std::filesystem::path& path, const ScoreMatrix& s) {
  s.validate();
  write_named_matrix(path, "UHSM", s.concept_names, s.scores);
}

ScoreMatrix read_score_matrix(const std::filesystem::path& path) {
  auto raw = read_named_matrix(path, "UHSM");
  ScoreMatrix s{std::move(raw.names), std::move(raw.mat)};
  try {
    s.validate();
  } catch (const DataError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
  return s;
}

void write_feature_matrix(const std::filesystem::path& path, const FeatureMatrix& f) {
  f.validate();
  ByteWriter w;
  w.reserve(24 + f.n() * f.d() * 4);
  w.magic("UHSF");
  w.u32(kFormatVersion);
  w.u64(f.n());
  w.u64(f.d());
  for (double v : f.features.values()) w.f32(static_cast<float>(v));
  w.flush_to(path);
}

FeatureMatrix read_feature_matrix(const std::filesystem::path& path) {
  auto r = ByteReader::from_file(path);
  r.expect_magic("UHSF");
  r.expect_version();
  const auto n = r.u64("row count");
  const auto d = r.u64("dimension");
  if (d != 0 && n > std::numeric_limits<std::uint64_t>::max() / d) {
    throw FormatError(r.origin() + ": dimensions overflow");
  }
  r.require_remaining(n * d, 4, "payload");
  FeatureMatrix f{Matrix(n, d)};
  for (auto& v : f.features.values()) v = r.f32("payload");
  r.expect_end();
  try {
    f.validate();
  } catch (const DataError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
  return f;
}

void write_distribution_matrix(const std::filesystem::path& path, const DistributionMatrix& d) {
  d.validate();
  write_named_matrix(path, "UHSD", d.concept_names, d.dist);
}

DistributionMatrix read_distribution_matrix(const std::filesystem::path& path) {
  auto raw = read_named_matrix(path, "UHSD");
  DistributionMatrix d{std::move(raw.names), std::move(raw.mat)};
  // float32 storage: allow per-entry rounding, then restore exact stochasticity
  const double tol = 1e-5 + 2.4e-7 * static_cast<double>(d.m());
  try {
    d.validate(tol);
  } catch (const DataError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
  for (std::size_t i = 0; i < d.n(); ++i) {
    auto row = d.dist.row(i);
    double sum = 0.0;
    for (double v : row) sum += v;
    for (double& v : row) v /= sum;
  }
  return d;
}

LabelTable parse_labels(const std::string& text) {
  std::vector<std::optional<std::vector<std::uint32_t>>> rows;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto where = "labels line " + std::to_string(line_no);
    const auto tab = line.find('\t');
    if (tab == std::string::npos) throw DataError(where + ": missing TAB separator");
    const auto index = parse_uint(trim(std::string_view(line).substr(0, tab)));
    if (!index) throw DataError(where + ": bad item index");
    if (*index > 100'000'000) throw DataError(where + ": item index too large");

    std::vector<std::uint32_t> ids;
    std::string_view rest = std::string_view(line).substr(tab + 1);
    if (trim(rest).empty()) throw DataError(where + ": empty label set");
    while (true) {
      const auto comma = rest.find(',');
      const auto token = trim(rest.substr(0, comma));
      const auto id = parse_uint(token);
      if (!id || *id > std::numeric_limits<std::uint32_t>::max()) {
        throw DataError(where + ": bad label id '" + token + "'");
      }
      ids.push_back(static_cast<std::uint32_t>(*id));
      if (comma == std::string_view::npos) break;
      rest = rest.substr(comma + 1);
    }
    std::sort(ids.begin(), ids.end());
    ids.erase(std::unique(ids.begin(), ids.end()), ids.end());

    if (*index >= rows.size()) rows.resize(*index + 1);
    if (rows[*index]) throw DataError(where + ": duplicate item index " + std::to_string(*index));
    rows[*index] = std::move(ids);
  }

  LabelTable table;
  table.labels.reserve(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (!rows[i]) throw DataError("labels: missing item index " + std::to_string(i));
    table.labels.push_back(std::move(*rows[i]));
  }
  if (table.labels.empty()) throw DataError("labels: no items");
  return table;
}

LabelTable read_labels(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path.string() + "' for reading");
  std::ostringstream ss;
  ss << in.rdbuf();
  try {
    return parse_labels(ss.str());
  } catch (const DataError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

void write_labels(const std::filesystem::path& path, const LabelTable& labels) {
  std::ostringstream out;
  for (std::size_t i = 0; i < labels.n(); ++i) {
    if (labels.labels[i].empty()) throw DataError("labels: empty label set for item " + std::to_string(i));
    out << i << '\t';
    for (std::size_t j = 0; j < labels.labels[i].size(); ++j) {
      if (j) out << ',';
      out << labels.labels[i][j];
    }
    out << '\n';
  }
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot open '" + path.string() + "' for writing");
  f << out.str();
  if (!f) throw IoError("write to '" + path.string() + "' failed");
}

void write_codes(const std::filesystem::path& path, const PackedCodeSet& codes) {
  if (codes.k() == 0) throw DataError("packed codes: code length must be positive");
  codes.check_padding();
  ByteWriter w;
  w.reserve(24 + codes.words().size() * 8);
  w.magic("UHSB");
  w.u32(kFormatVersion);
  w.u64(codes.k());
  w.u64(codes.n());
  for (auto word : codes.words()) w.u64(word);
  w.flush_to(path);
}

PackedCodeSet read_codes(const std::filesystem::path& path) {
  auto r = ByteReader::from_file(path);
  r.expect_magic("UHSB");
  r.expect_version();
  const auto k = r.u64("code length");
  const auto n = r.u64("code count");
  if (k == 0) throw FormatError(r.origin() + ": code length must be positive");
  const auto wpc = words_for_bits(k);
  if (n > std::numeric_limits<std::uint64_t>::max() / wpc) {
    throw FormatError(r.origin() + ": dimensions overflow");
  }
  r.require_remaining(n * wpc, 8, "code words");
  std::vector<std::uint64_t> words(n * wpc);
  for (auto& word : words) word = r.u64("code words");
  r.expect_end();
  try {
    return PackedCodeSet(n, k, std::move(words));
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

}  // namespace semhash
