#pragma once

// Little-endian byte buffers shared by the binary file formats.

#include <bit>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <string>
#include <string_view>
#include <vector>

#include "semhash/error.hpp"

namespace semhash::detail {

inline constexpr std::uint32_t kFormatVersion = 1;

class ByteWriter {
 public:
  void magic(std::string_view tag) { buf_.insert(buf_.end(), tag.begin(), tag.end()); }

  void u32(std::uint32_t v) {
    for (int s = 0; s < 32; s += 8) buf_.push_back(static_cast<char>((v >> s) & 0xFFU));
  }
  void u64(std::uint64_t v) {
    for (int s = 0; s < 64; s += 8) buf_.push_back(static_cast<char>((v >> s) & 0xFFU));
  }
  void f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }

  void str(const std::string& s) {
    u32(static_cast<std::uint32_t>(s.size()));
    buf_.insert(buf_.end(), s.begin(), s.end());
  }

  void reserve(std::size_t bytes) { buf_.reserve(bytes); }

  void flush_to(const std::filesystem::path& path) const {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
    out.write(buf_.data(), static_cast<std::streamsize>(buf_.size()));
    out.close();
    if (!out) throw IoError("write to '" + path.string() + "' failed");
  }

 private:
  std::vector<char> buf_;
};

class ByteReader {
 public:
  ByteReader(std::vector<char> bytes, std::string origin)
      : bytes_(std::move(bytes)), origin_(std::move(origin)) {}

  static ByteReader from_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open '" + path.string() + "' for reading");
    std::vector<char> bytes{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
    if (in.bad()) throw IoError("read from '" + path.string() + "' failed");
    return ByteReader(std::move(bytes), path.string());
  }

  void expect_magic(std::string_view tag) {
    need(tag.size(), "magic");
    std::string_view got(bytes_.data() + pos_, tag.size());
    if (got != tag) {
      throw FormatError(origin_ + ": magic mismatch, expected \"" + std::string(tag) +
                        "\" but found \"" + printable(got) + "\"");
    }
    pos_ += tag.size();
  }

  void expect_version() {
    const auto v = u32("version");
    if (v != kFormatVersion) {
      throw FormatError(origin_ + ": unsupported version " + std::to_string(v));
    }
  }

  std::uint32_t u32(const char* what) {
    need(4, what);
    std::uint32_t v = 0;
    for (int b = 0; b < 4; ++b) {
      v |= static_cast<std::uint32_t>(static_cast<unsigned char>(bytes_[pos_ + b])) << (8 * b);
    }
    pos_ += 4;
    return v;
  }

  std::uint64_t u64(const char* what) {
    need(8, what);
    std::uint64_t v = 0;
    for (int b = 0; b < 8; ++b) {
      v |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes_[pos_ + b])) << (8 * b);
    }
    pos_ += 8;
    return v;
  }

  float f32(const char* what) { return std::bit_cast<float>(u32(what)); }

  std::string str(const char* what) {
    const auto len = u32(what);
    need(len, what);
    std::string s(bytes_.data() + pos_, len);
    pos_ += len;
    return s;
  }

  /// Fails early (before allocating) when the declared payload cannot fit.
  void require_remaining(std::uint64_t count, std::uint64_t elem_size, const char* what) const {
    const auto remaining = static_cast<std::uint64_t>(bytes_.size() - pos_);
    if (elem_size != 0 && count > remaining / elem_size) {
      throw FormatError(origin_ + ": truncated " + what + " (declares " + std::to_string(count) +
                        " elements, " + std::to_string(remaining) + " bytes remain)");
    }
  }

  void expect_end() const {
    if (pos_ != bytes_.size()) {
      throw FormatError(origin_ + ": " + std::to_string(bytes_.size() - pos_) +
                        " trailing bytes after payload");
    }
  }

  const std::string& origin() const { return origin_; }

 private:
  void need(std::size_t count, const char* what) const {
    if (bytes_.size() - pos_ < count) {
      throw FormatError(origin_ + ": truncated while reading " + what);
    }
  }

  static std::string printable(std::string_view raw) {
    std::string out;
    for (char c : raw) out.push_back((c >= 0x20 && c < 0x7F) ? c : '?');
    return out;
  }

  std::vector<char> bytes_;
  std::string origin_;
  std::size_t pos_ = 0;
};

}  // namespace semhash::detail
