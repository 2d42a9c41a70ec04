#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "flare/trace.hpp"
#include "flare/volume.hpp"

namespace flare {

// Interpolation coefficient sets. Only the SZ3-style cubic set is defined:
// 4-tap (-1, 9, 9, -1)/16 in the interior, (1/2, 1/2) near block edges,
// linear extrapolation (-1/2, 3/2) or a copy where no right neighbour exists.
enum class TapSet : std::uint8_t { Cubic = 0 };

struct QuantizerConfig {
  double eb_rel = 1e-3;
  double eb_abs = 0.0;  // eb_rel * value range; 0 only for constant fields
  std::uint32_t radius = 32768;
  TapSet taps = TapSet::Cubic;
  std::size_t block_size = 32;
};

// Validated config with eb_abs derived from the field's global value range.
QuantizerConfig make_quantizer_config(const Volume& v, double eb_rel = 1e-3, std::size_t block_size = 32,
                                      std::uint32_t radius = 32768);

struct Outlier {
  std::uint64_t index = 0;  // flat volume index
  float value = 0.0f;

  bool operator==(const Outlier&) const = default;
};

// Codes are in canonical (breadth-first) order: level coarse to fine, then
// block order, then axis pass X, Y, Z, then lexicographic point order.
// Code 0 marks an outlier whose raw value is carried in `outliers`.
struct QuantCodeStream {
  std::vector<std::uint32_t> codes;
  std::vector<Outlier> outliers;  // sorted by code position
  std::vector<float> anchors;     // block order, one lattice per block

  bool operator==(const QuantCodeStream&) const = default;
};

// Per-slice extrema of the reconstruction, slices cut along X.
struct SliceStats {
  std::vector<float> min, max;

  bool operator==(const SliceStats&) const = default;
};

SliceStats compute_slice_stats(Dims dims, std::span<const float> recon);

// Number of interpolation levels for block edge B: ceil(log2 B). Anchors
// sit on the lattice of stride 2^levels (the block origin for full blocks).
std::uint32_t level_count(std::size_t block_size);

// Points predicted by one axis pass of `level` inside a block.
std::size_t pass_point_count(const Block& block, std::uint32_t level, Axis axis);
std::size_t anchor_point_count(const Block& block, std::uint32_t levels);

struct Prediction {
  std::size_t index = 0;  // flat volume index
  float value = 0.0f;
};

// Predictions for one axis pass of `level` within `block`, in lexicographic
// point order. Reads only lattice points of stride 2^level along `axis`
// from `recon` and never crosses the block boundary.
std::vector<Prediction> interpolate_level(std::span<const float> recon, Dims dims, const Block& block,
                                          std::uint32_t level, Axis axis, const QuantizerConfig& cfg);

struct Quantized {
  std::uint32_t code = 0;
  float recon = 0.0f;
  bool outlier = false;
};

// Linear-scaling quantization, round half away from zero. Guarantees
// |orig - recon| <= eb_abs; anything that cannot meet it becomes an outlier.
Quantized quantize(float pred, float orig, const QuantizerConfig& cfg);
float dequantize(float pred, std::uint32_t code, const QuantizerConfig& cfg);

struct ScheduleOptions {
  // Finest levels scheduled depth-first in look-ahead order.
  std::uint32_t lookahead_levels = 3;
  // When non-zero, a NeuralSlice event with this MAC count follows every
  // emitted slice.
  std::uint64_t neural_macs_per_slice = 0;
};

// Data-independent schedule of the level-wise interpolation. The returned
// trace drives both the functional predictor and the simulator.
ExecTrace build_schedule(const BlockGrid& grid, Order order, const ScheduleOptions& opts = {});

struct PredictorResult {
  QuantCodeStream stream;
  Volume recon;
  SliceStats stats;
  ExecTrace trace;
};

PredictorResult compress_predict(const Volume& v, const QuantizerConfig& cfg, Order order,
                                 const ScheduleOptions& opts = {});
inline PredictorResult compress_predict_bfs(const Volume& v, const QuantizerConfig& cfg) {
  return compress_predict(v, cfg, Order::BreadthFirst);
}
inline PredictorResult compress_predict_lookahead(const Volume& v, const QuantizerConfig& cfg) {
  return compress_predict(v, cfg, Order::LookAhead);
}

struct Reconstruction {
  Volume recon;
  SliceStats stats;
  ExecTrace trace;
};

// Throws TruncatedStream when fewer codes than points remain, CorruptStream
// for inconsistent anchor or outlier side channels.
Reconstruction decompress_predict(const QuantCodeStream& stream, const QuantizerConfig& cfg, Dims dims,
                                  Order order = Order::BreadthFirst, const ScheduleOptions& opts = {});

// Canonical code offset of every (level, block) work item; index with
// [levels - level][block]. Also the total non-anchor point count.
struct CanonicalLayout {
  std::vector<std::vector<std::size_t>> offset;
  std::size_t total_codes = 0;
  std::size_t total_anchors = 0;
};
CanonicalLayout canonical_layout(const BlockGrid& grid);

}  // namespace flare
