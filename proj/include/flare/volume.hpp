#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include <Eigen/Core>

namespace flare {

// Extents of a 3D field. Storage is row-major with the last axis (z)
// varying fastest: flat index = (x * ny + y) * nz + z.
struct Dims {
  std::size_t nx = 0, ny = 0, nz = 0;

  std::size_t count() const { return nx * ny * nz; }
  std::size_t operator[](int axis) const { return axis == 0 ? nx : axis == 1 ? ny : nz; }
  std::size_t index(std::size_t x, std::size_t y, std::size_t z) const { return (x * ny + y) * nz + z; }
  bool operator==(const Dims&) const = default;
};

enum class Axis : std::uint8_t { X = 0, Y = 1, Z = 2 };

// Immutable 3D single-precision field with its value range.
class Volume {
 public:
  Volume() = default;
  // Throws DimensionError on size mismatch, InputError on NaN/Inf.
  Volume(Dims dims, std::vector<float> data);

  const Dims& dims() const { return dims_; }
  std::span<const float> data() const { return data_; }
  float vmin() const { return vmin_; }
  float vmax() const { return vmax_; }
  double range() const { return static_cast<double>(vmax_) - static_cast<double>(vmin_); }
  std::size_t size() const { return data_.size(); }
  float at(std::size_t x, std::size_t y, std::size_t z) const { return data_[dims_.index(x, y, z)]; }
  std::size_t bytes() const { return data_.size() * sizeof(float); }

 private:
  Dims dims_;
  std::vector<float> data_;
  float vmin_ = 0.0f;
  float vmax_ = 0.0f;
};

// Headerless little-endian float32 raw files (SDRBench convention).
Volume load_volume(const std::filesystem::path& path, Dims dims);
void store_volume(const std::filesystem::path& path, std::span<const float> data);
inline void store_volume(const std::filesystem::path& path, const Volume& v) { store_volume(path, v.data()); }

// 10*log10(range^2 / MSE) with range taken from the reference. Returns
// +infinity when the fields are identical.
double psnr(const Volume& reference, const Volume& test);
double psnr(const Volume& reference, std::span<const float> test);
double max_abs_error(std::span<const float> a, std::span<const float> b);

struct Block {
  std::array<std::size_t, 3> origin{};
  std::array<std::size_t, 3> extent{};

  std::size_t count() const { return extent[0] * extent[1] * extent[2]; }
};

// Non-overlapping cover of a volume by cubes of edge B (boundary blocks may
// be partial). Blocks are ordered lexicographically by (bx, by, bz) with bx
// the slowest-varying coordinate.
struct BlockGrid {
  Dims dims;
  std::size_t block_size = 32;
  std::array<std::size_t, 3> counts{};
  std::vector<Block> blocks;

  std::size_t block_id(std::size_t bx, std::size_t by, std::size_t bz) const {
    return (bx * counts[1] + by) * counts[2] + bz;
  }
};

BlockGrid partition_blocks(Dims dims, std::size_t block_size);

using SliceMatrix = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// A 2D cut through the volume at a fixed coordinate along `axis`. The data
// holds the two remaining axes in storage order.
struct Slice2D {
  Axis axis = Axis::X;
  std::size_t index = 0;
  SliceMatrix data;
};

Slice2D extract_slice(const Volume& v, Axis axis, std::size_t index);
Slice2D extract_slice(Dims dims, std::span<const float> data, Axis axis, std::size_t index);

}  // namespace flare
