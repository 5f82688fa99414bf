#include <cmath>
#include <limits>

#include "byte_io.hpp"
#include "semhash/error.hpp"
#include "semhash/hashnet.hpp"

namespace semhash::hashnet {

void save_params(const std::filesystem::path& path, const HashHeadParams& p) {
  if (p.w1.rows() != p.hidden || p.w1.cols() != p.input_dim || p.b1.size() != p.hidden ||
      p.w2.rows() != p.bits || p.w2.cols() != p.hidden || p.b2.size() != p.bits) {
    throw DataError("save_params: inconsistent parameter shapes");
  }
  detail::ByteWriter w;
  w.magic("UHSW");
  w.u32(detail::kFormatVersion);
  w.u64(p.input_dim);
  w.u64(p.hidden);
  w.u64(p.bits);
  for (const auto block : p.blocks()) {
    for (double v : block) {
      const auto f = static_cast<float>(v);
      if (!std::isfinite(f)) throw DataError("save_params: non-finite weight");
      w.f32(f);
    }
  }
  w.flush_to(path);
}

HashHeadParams load_params(const std::filesystem::path& path) {
  auto r = detail::ByteReader::from_file(path);
  r.expect_magic("UHSW");
  r.expect_version();
  const auto d = r.u64("input dimension");
  const auto h = r.u64("hidden width");
  const auto k = r.u64("code length");
  if (d < 1 || h < 1 || k < 1) throw FormatError(r.origin() + ": zero model dimension");
  constexpr std::uint64_t kLimit = std::uint64_t{1} << 31;
  if (d > kLimit || h > kLimit || k > kLimit) throw FormatError(r.origin() + ": dimensions overflow");
  r.require_remaining(h * d + h + k * h + k, 4, "weights");
  auto p = HashHeadParams::zeros(d, h, k);
  for (auto block : p.blocks()) {
    for (double& v : block) {
      v = r.f32("weights");
      if (!std::isfinite(v)) throw FormatError(r.origin() + ": non-finite weight");
    }
  }
  r.expect_end();
  return p;
}

}  // namespace semhash::hashnet
