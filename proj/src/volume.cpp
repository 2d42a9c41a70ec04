#include "flare/volume.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <sstream>

#include "flare/bytes.hpp"
#include "flare/error.hpp"

namespace flare {

namespace {

std::string dims_str(Dims d) {
  std::ostringstream os;
  os << d.nx << "x" << d.ny << "x" << d.nz;
  return os.str();
}

}  // namespace

Volume::Volume(Dims dims, std::vector<float> data) : dims_(dims), data_(std::move(data)) {
  if (dims_.nx == 0 || dims_.ny == 0 || dims_.nz == 0)
    throw DimensionError("volume dims must be positive, got " + dims_str(dims_));
  if (data_.size() != dims_.count())
    throw DimensionError("volume data length " + std::to_string(data_.size()) + " does not match dims " +
                         dims_str(dims_));
  float lo = std::numeric_limits<float>::infinity();
  float hi = -std::numeric_limits<float>::infinity();
  for (std::size_t i = 0; i < data_.size(); ++i) {
    const float v = data_[i];
    if (!std::isfinite(v)) throw InputError("non-finite value at index " + std::to_string(i));
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  vmin_ = lo;
  vmax_ = hi;
}

Volume load_volume(const std::filesystem::path& path, Dims dims) {
  if (dims.nx == 0 || dims.ny == 0 || dims.nz == 0) throw DimensionError("dims must be positive");
  std::error_code ec;
  const auto size = std::filesystem::file_size(path, ec);
  if (ec) throw IoError("cannot stat " + path.string() + ": " + ec.message());
  if (size != dims.count() * sizeof(float))
    throw DimensionError(path.string() + " holds " + std::to_string(size) + " bytes, dims " + dims_str(dims) +
                         " need " + std::to_string(dims.count() * sizeof(float)));
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<float> data(dims.count());
  in.read(reinterpret_cast<char*>(data.data()), static_cast<std::streamsize>(size));
  if (!in) throw IoError("short read from " + path.string());
  if constexpr (std::endian::native == std::endian::big) {
    for (auto& v : data) v = byteswap(v);
  }
  return Volume(dims, std::move(data));
}

void store_volume(const std::filesystem::path& path, std::span<const float> data) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  if constexpr (std::endian::native == std::endian::big) {
    for (float v : data) {
      auto u = byteswap(v);
      out.write(reinterpret_cast<const char*>(&u), sizeof u);
    }
  } else {
    out.write(reinterpret_cast<const char*>(data.data()), static_cast<std::streamsize>(data.size_bytes()));
  }
  if (!out) throw IoError("write failed for " + path.string());
}

double max_abs_error(std::span<const float> a, std::span<const float> b) {
  if (a.size() != b.size()) throw DimensionError("max_abs_error: length mismatch");
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i)
    m = std::max(m, std::abs(static_cast<double>(a[i]) - static_cast<double>(b[i])));
  return m;
}

double psnr(const Volume& reference, std::span<const float> test) {
  if (reference.size() != test.size()) throw DimensionError("psnr: dims mismatch");
  const auto ref = reference.data();
  double sse = 0.0;
  for (std::size_t i = 0; i < ref.size(); ++i) {
    const double d = static_cast<double>(ref[i]) - static_cast<double>(test[i]);
    sse += d * d;
  }
  if (sse == 0.0) return std::numeric_limits<double>::infinity();
  const double mse = sse / static_cast<double>(ref.size());
  const double r = reference.range();
  return 10.0 * std::log10(r * r / mse);
}

double psnr(const Volume& reference, const Volume& test) {
  if (!(reference.dims() == test.dims())) throw DimensionError("psnr: dims mismatch");
  return psnr(reference, test.data());
}

BlockGrid partition_blocks(Dims dims, std::size_t block_size) {
  if (block_size < 2) throw DimensionError("block size must be >= 2");
  if (dims.count() == 0) throw DimensionError("cannot partition an empty volume");
  BlockGrid g;
  g.dims = dims;
  g.block_size = block_size;
  for (int a = 0; a < 3; ++a) g.counts[a] = (dims[a] + block_size - 1) / block_size;
  g.blocks.reserve(g.counts[0] * g.counts[1] * g.counts[2]);
  for (std::size_t bx = 0; bx < g.counts[0]; ++bx)
    for (std::size_t by = 0; by < g.counts[1]; ++by)
      for (std::size_t bz = 0; bz < g.counts[2]; ++bz) {
        Block b;
        const std::array<std::size_t, 3> bi{bx, by, bz};
        for (int a = 0; a < 3; ++a) {
          b.origin[a] = bi[a] * block_size;
          b.extent[a] = std::min(block_size, dims[a] - b.origin[a]);
        }
        g.blocks.push_back(b);
      }
  return g;
}

Slice2D extract_slice(Dims d, std::span<const float> data, Axis axis, std::size_t index) {
  const int ax = static_cast<int>(axis);
  if (index >= d[ax]) throw DimensionError("slice index out of range");
  Slice2D s;
  s.axis = axis;
  s.index = index;
  switch (axis) {
    case Axis::X:
      s.data.resize(static_cast<Eigen::Index>(d.ny), static_cast<Eigen::Index>(d.nz));
      std::memcpy(s.data.data(), data.data() + index * d.ny * d.nz, d.ny * d.nz * sizeof(float));
      break;
    case Axis::Y:
      s.data.resize(static_cast<Eigen::Index>(d.nx), static_cast<Eigen::Index>(d.nz));
      for (std::size_t x = 0; x < d.nx; ++x)
        for (std::size_t z = 0; z < d.nz; ++z) s.data(x, z) = data[d.index(x, index, z)];
      break;
    case Axis::Z:
      s.data.resize(static_cast<Eigen::Index>(d.nx), static_cast<Eigen::Index>(d.ny));
      for (std::size_t x = 0; x < d.nx; ++x)
        for (std::size_t y = 0; y < d.ny; ++y) s.data(x, y) = data[d.index(x, y, index)];
      break;
  }
  return s;
}

Slice2D extract_slice(const Volume& v, Axis axis, std::size_t index) {
  return extract_slice(v.dims(), v.data(), axis, index);
}

}  // namespace flare
