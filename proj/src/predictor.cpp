#include "flare/predictor.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <unordered_map>

#include "flare/error.hpp"

namespace flare {

namespace {

std::size_t count_mod(std::size_t extent, std::size_t start, std::size_t step) {
  return extent > start ? (extent - 1 - start) / step + 1 : 0;
}

struct PassGeometry {
  std::array<std::size_t, 3> start{}, step{};
};

// Level L fills stride s = 2^(L-1) from the stride-2s lattice, one axis at
// a time: X refines x only, Y refines y on the x-refined lattice, and Z
// finishes the level.
PassGeometry pass_geometry(std::uint32_t level, Axis axis) {
  const std::size_t s = std::size_t{1} << (level - 1);
  switch (axis) {
    case Axis::X: return {{s, 0, 0}, {2 * s, 2 * s, 2 * s}};
    case Axis::Y: return {{0, s, 0}, {s, 2 * s, 2 * s}};
    case Axis::Z: return {{0, 0, s}, {s, s, 2 * s}};
  }
  return {};
}

// `p` points at the target; neighbours sit at multiples of `s * stride`.
// Taps are evaluated in double and rounded once, which keeps constants and
// arithmetic sequences exact.
inline float predict_line(const float* p, std::ptrdiff_t stride, std::size_t i, std::size_t s, std::size_t extent) {
  const auto step = static_cast<std::ptrdiff_t>(s) * stride;
  const double b = p[-step];
  if (i + s < extent) {
    const double c = p[step];
    if (i >= 3 * s && i + 3 * s < extent) {
      const double a = p[-3 * step];
      const double d = p[3 * step];
      return static_cast<float>((9.0 * (b + c) - (a + d)) / 16.0);
    }
    return static_cast<float>((b + c) / 2.0);
  }
  if (i >= 3 * s) {
    const double a = p[-3 * step];
    return static_cast<float>(1.5 * b - 0.5 * a);
  }
  return static_cast<float>(b);
}

template <typename Sink>
void run_pass(const float* recon, Dims d, const Block& blk, std::uint32_t level, Axis axis, Sink&& sink) {
  const auto g = pass_geometry(level, axis);
  const std::size_t s = std::size_t{1} << (level - 1);
  const int ax = static_cast<int>(axis);
  const std::ptrdiff_t stride = ax == 0 ? static_cast<std::ptrdiff_t>(d.ny * d.nz)
                                : ax == 1 ? static_cast<std::ptrdiff_t>(d.nz)
                                          : 1;
  const auto& ext = blk.extent;
  const auto& org = blk.origin;
  for (std::size_t x = g.start[0]; x < ext[0]; x += g.step[0])
    for (std::size_t y = g.start[1]; y < ext[1]; y += g.step[1])
      for (std::size_t z = g.start[2]; z < ext[2]; z += g.step[2]) {
        const std::size_t idx = d.index(org[0] + x, org[1] + y, org[2] + z);
        const std::size_t local = ax == 0 ? x : ax == 1 ? y : z;
        sink(idx, predict_line(recon + idx, stride, local, s, ext[ax]));
      }
}

template <typename Sink>
void run_item(const float* recon, Dims d, const Block& blk, std::uint32_t level, Sink&& sink) {
  for (Axis axis : {Axis::X, Axis::Y, Axis::Z}) run_pass(recon, d, blk, level, axis, sink);
}

template <typename F>
void for_each_anchor(Dims d, const Block& blk, std::uint32_t levels, F&& f) {
  const std::size_t a = std::size_t{1} << levels;
  for (std::size_t x = 0; x < blk.extent[0]; x += a)
    for (std::size_t y = 0; y < blk.extent[1]; y += a)
      for (std::size_t z = 0; z < blk.extent[2]; z += a)
        f(d.index(blk.origin[0] + x, blk.origin[1] + y, blk.origin[2] + z));
}

std::vector<std::size_t> anchor_offsets(const BlockGrid& g, std::uint32_t levels) {
  std::vector<std::size_t> off(g.blocks.size() + 1, 0);
  for (std::size_t b = 0; b < g.blocks.size(); ++b) off[b + 1] = off[b] + anchor_point_count(g.blocks[b], levels);
  return off;
}

std::size_t item_points(const Block& blk, std::uint32_t level) {
  return pass_point_count(blk, level, Axis::X) + pass_point_count(blk, level, Axis::Y) +
         pass_point_count(blk, level, Axis::Z);
}

std::uint64_t item_passes(const Block& blk, std::uint32_t level) {
  std::uint64_t n = 0;
  for (Axis a : {Axis::X, Axis::Y, Axis::Z}) n += pass_point_count(blk, level, a) > 0 ? 1 : 0;
  return n;
}

class ScheduleBuilder {
 public:
  ScheduleBuilder(const BlockGrid& g, const ScheduleOptions& opts) : g_(g), opts_(opts) {
    levels_ = level_count(g.block_size);
    remaining_in_slab_.assign(g.counts[0], g.counts[1] * g.counts[2]);
    trace_.dims = g.dims;
    trace_.block_size = static_cast<std::uint32_t>(g.block_size);
    trace_.levels = levels_;
  }

  ExecTrace build(Order order) {
    trace_.order = order;
    for (std::size_t b = 0; b < g_.blocks.size(); ++b)
      push({EventKind::LoadAnchors, 0, static_cast<std::uint32_t>(b), anchor_point_count(g_.blocks[b], levels_)});

    std::vector<std::uint32_t> all(g_.blocks.size());
    std::iota(all.begin(), all.end(), 0u);

    if (order == Order::LookAhead && all.size() < 2) {
      push({EventKind::Warning, 0, 0, static_cast<std::uint64_t>(TraceWarning::LookaheadFallback)});
      order = Order::BreadthFirst;
    }
    if (order == Order::BreadthFirst) {
      for (std::uint32_t level = levels_; level >= 1; --level)
        for (auto b : all) predict(b, level);
      for (auto b : all) forward(b);
      return std::move(trace_);
    }
    const std::uint32_t depth = std::clamp<std::uint32_t>(opts_.lookahead_levels, 1, levels_);
    for (std::uint32_t level = levels_; level > depth; --level)
      for (auto b : all) predict(b, level);
    descend(all, depth);
    return std::move(trace_);
  }

 private:
  // Depth-first refinement: the whole set advances one level, then the
  // first half (by point count) runs to completion before the second half
  // resumes. Level-1 results leave the working set immediately.
  void descend(std::span<const std::uint32_t> set, std::uint32_t level) {
    for (auto b : set) predict(b, level);
    if (level == 1) {
      for (auto b : set) forward(b);
      return;
    }
    if (set.size() < 2) {
      descend(set, level - 1);
      return;
    }
    std::uint64_t total = 0;
    for (auto b : set) total += g_.blocks[b].count();
    std::uint64_t acc = 0;
    std::size_t k = 0;
    while (k < set.size() && 2 * acc < total) acc += g_.blocks[set[k++]].count();
    k = std::clamp<std::size_t>(k, 1, set.size() - 1);
    descend(set.first(k), level - 1);
    descend(set.subspan(k), level - 1);
  }

  void predict(std::uint32_t b, std::uint32_t level) {
    const auto& blk = g_.blocks[b];
    const auto pts = item_points(blk, level);
    const auto lv = static_cast<std::uint8_t>(level);
    push({EventKind::PredictBatch, lv, b, pts, item_passes(blk, level)});
    push({EventKind::CodecSymbols, lv, b, pts, 0});
  }

  void forward(std::uint32_t b) {
    const auto& blk = g_.blocks[b];
    push({EventKind::Forward, 0, b, blk.count() * sizeof(float)});
    const std::size_t slab = blk.origin[0] / g_.block_size;
    if (--remaining_in_slab_[slab] != 0) return;
    const std::size_t first = slab * g_.block_size;
    const std::size_t last = std::min(first + g_.block_size, g_.dims.nx);
    const std::uint64_t slice_bytes = g_.dims.ny * g_.dims.nz * sizeof(float);
    push({EventKind::EmitSliceBatch, 0, 0, first, last, (last - first) * slice_bytes});
    if (opts_.neural_macs_per_slice == 0) return;
    for (std::size_t s = first; s < last; ++s) push({EventKind::NeuralSlice, 0, 0, s, opts_.neural_macs_per_slice});
  }

  void push(TraceEvent e) { trace_.events.push_back(e); }

  const BlockGrid& g_;
  ScheduleOptions opts_;
  std::uint32_t levels_ = 0;
  std::vector<std::size_t> remaining_in_slab_;
  ExecTrace trace_;
};

}  // namespace

std::uint32_t level_count(std::size_t block_size) {
  if (block_size < 2) throw DimensionError("block size must be >= 2");
  std::uint32_t l = 0;
  while ((std::size_t{1} << l) < block_size) ++l;
  return l;
}

std::size_t pass_point_count(const Block& blk, std::uint32_t level, Axis axis) {
  const auto g = pass_geometry(level, axis);
  std::size_t n = 1;
  for (int a = 0; a < 3; ++a) n *= count_mod(blk.extent[a], g.start[a], g.step[a]);
  return n;
}

std::size_t anchor_point_count(const Block& blk, std::uint32_t levels) {
  const std::size_t a = std::size_t{1} << levels;
  std::size_t n = 1;
  for (int ax = 0; ax < 3; ++ax) n *= count_mod(blk.extent[ax], 0, a);
  return n;
}

QuantizerConfig make_quantizer_config(const Volume& v, double eb_rel, std::size_t block_size, std::uint32_t radius) {
  if (!(eb_rel > 0.0) || !std::isfinite(eb_rel)) throw InputError("relative error bound must be positive");
  if (radius < 2) throw InputError("quantization radius must be >= 2");
  if (block_size < 2) throw DimensionError("block size must be >= 2");
  QuantizerConfig cfg;
  cfg.eb_rel = eb_rel;
  cfg.eb_abs = eb_rel * v.range();
  cfg.radius = radius;
  cfg.block_size = block_size;
  return cfg;
}

SliceStats compute_slice_stats(Dims d, std::span<const float> recon) {
  if (recon.size() != d.count()) throw DimensionError("slice stats: length mismatch");
  SliceStats st;
  st.min.resize(d.nx);
  st.max.resize(d.nx);
  const std::size_t plane = d.ny * d.nz;
  for (std::size_t x = 0; x < d.nx; ++x) {
    auto [lo, hi] = std::minmax_element(recon.begin() + static_cast<std::ptrdiff_t>(x * plane),
                                        recon.begin() + static_cast<std::ptrdiff_t>((x + 1) * plane));
    st.min[x] = *lo;
    st.max[x] = *hi;
  }
  return st;
}

std::vector<Prediction> interpolate_level(std::span<const float> recon, Dims dims, const Block& block,
                                          std::uint32_t level, Axis axis, const QuantizerConfig& cfg) {
  if (recon.size() != dims.count()) throw DimensionError("interpolate_level: recon length mismatch");
  if (level < 1 || level > level_count(cfg.block_size))
    throw DimensionError("interpolation level " + std::to_string(level) + " outside [1, log2(B)]");
  std::vector<Prediction> out;
  out.reserve(pass_point_count(block, level, axis));
  run_pass(recon.data(), dims, block, level, axis,
           [&](std::size_t idx, float pred) { out.push_back({idx, pred}); });
  return out;
}

Quantized quantize(float pred, float orig, const QuantizerConfig& cfg) {
  const double eb = cfg.eb_abs;
  if (eb > 0.0) {
    const double q = (static_cast<double>(orig) - static_cast<double>(pred)) / (2.0 * eb);
    if (std::abs(q) < static_cast<double>(cfg.radius)) {
      const auto bin = static_cast<std::int64_t>(std::round(q));
      if (std::abs(bin) < static_cast<std::int64_t>(cfg.radius)) {
        const auto recon = static_cast<float>(static_cast<double>(pred) + 2.0 * eb * static_cast<double>(bin));
        if (std::abs(static_cast<double>(orig) - static_cast<double>(recon)) <= eb)
          return {static_cast<std::uint32_t>(bin + cfg.radius), recon, false};
      }
    }
  } else if (pred == orig) {
    return {cfg.radius, pred, false};
  }
  return {0, orig, true};
}

float dequantize(float pred, std::uint32_t code, const QuantizerConfig& cfg) {
  const auto bin = static_cast<std::int64_t>(code) - static_cast<std::int64_t>(cfg.radius);
  return static_cast<float>(static_cast<double>(pred) + 2.0 * cfg.eb_abs * static_cast<double>(bin));
}

CanonicalLayout canonical_layout(const BlockGrid& g) {
  const auto levels = level_count(g.block_size);
  CanonicalLayout lay;
  lay.offset.assign(levels, std::vector<std::size_t>(g.blocks.size(), 0));
  std::size_t pos = 0;
  for (std::uint32_t li = 0; li < levels; ++li) {
    const std::uint32_t level = levels - li;
    for (std::size_t b = 0; b < g.blocks.size(); ++b) {
      lay.offset[li][b] = pos;
      pos += item_points(g.blocks[b], level);
    }
  }
  lay.total_codes = pos;
  for (const auto& blk : g.blocks) lay.total_anchors += anchor_point_count(blk, levels);
  return lay;
}

ExecTrace build_schedule(const BlockGrid& grid, Order order, const ScheduleOptions& opts) {
  return ScheduleBuilder(grid, opts).build(order);
}

PredictorResult compress_predict(const Volume& v, const QuantizerConfig& cfg, Order order,
                                 const ScheduleOptions& opts) {
  if (cfg.eb_abs < 0.0 || (cfg.eb_abs == 0.0 && v.range() > 0.0))
    throw InputError("eb_abs must be positive for a non-constant field");
  if (cfg.radius < 2) throw InputError("quantization radius must be >= 2");
  const Dims d = v.dims();
  const auto grid = partition_blocks(d, cfg.block_size);
  const auto levels = level_count(cfg.block_size);
  const auto layout = canonical_layout(grid);
  const auto aoff = anchor_offsets(grid, levels);
  auto trace = build_schedule(grid, order, opts);

  const auto orig = v.data();
  std::vector<float> recon(d.count(), 0.0f);
  QuantCodeStream out;
  out.codes.assign(layout.total_codes, 0);
  out.anchors.assign(layout.total_anchors, 0.0f);
  struct PendingOutlier {
    std::size_t pos;
    Outlier o;
  };
  std::vector<PendingOutlier> outliers;

  for (const auto& e : trace.events) {
    const auto& blk = grid.blocks[e.block];
    if (e.kind == EventKind::LoadAnchors) {
      std::size_t k = aoff[e.block];
      for_each_anchor(d, blk, levels, [&](std::size_t idx) {
        recon[idx] = orig[idx];
        out.anchors[k++] = orig[idx];
      });
    } else if (e.kind == EventKind::PredictBatch) {
      std::size_t pos = layout.offset[levels - e.level][e.block];
      run_item(recon.data(), d, blk, e.level, [&](std::size_t idx, float pred) {
        const auto q = quantize(pred, orig[idx], cfg);
        if (q.outlier) outliers.push_back({pos, {idx, orig[idx]}});
        out.codes[pos++] = q.code;
        recon[idx] = q.recon;
      });
    }
  }
  std::sort(outliers.begin(), outliers.end(), [](const auto& a, const auto& b) { return a.pos < b.pos; });
  out.outliers.reserve(outliers.size());
  for (const auto& p : outliers) out.outliers.push_back(p.o);

  auto stats = compute_slice_stats(d, recon);
  return {std::move(out), Volume(d, std::move(recon)), std::move(stats), std::move(trace)};
}

Reconstruction decompress_predict(const QuantCodeStream& s, const QuantizerConfig& cfg, Dims d, Order order,
                                  const ScheduleOptions& opts) {
  const auto grid = partition_blocks(d, cfg.block_size);
  const auto levels = level_count(cfg.block_size);
  const auto layout = canonical_layout(grid);
  if (s.codes.size() < layout.total_codes) throw TruncatedStream(s.codes.size());
  if (s.codes.size() > layout.total_codes)
    throw CorruptStream("code stream longer than the volume", layout.total_codes);
  if (s.anchors.size() != layout.total_anchors)
    throw CorruptStream("anchor count does not match dims", s.anchors.size());

  std::unordered_map<std::uint64_t, float> outlier_values;
  outlier_values.reserve(s.outliers.size());
  for (const auto& o : s.outliers) outlier_values.emplace(o.index, o.value);
  const auto zero_codes = static_cast<std::size_t>(std::count(s.codes.begin(), s.codes.end(), 0u));
  if (zero_codes != s.outliers.size() || outlier_values.size() != s.outliers.size())
    throw CorruptStream("outlier list does not match sentinel codes", zero_codes);

  const auto aoff = anchor_offsets(grid, levels);
  auto trace = build_schedule(grid, order, opts);
  std::vector<float> recon(d.count(), 0.0f);
  const std::uint32_t max_code = 2 * cfg.radius;

  for (const auto& e : trace.events) {
    const auto& blk = grid.blocks[e.block];
    if (e.kind == EventKind::LoadAnchors) {
      std::size_t k = aoff[e.block];
      for_each_anchor(d, blk, levels, [&](std::size_t idx) { recon[idx] = s.anchors[k++]; });
    } else if (e.kind == EventKind::PredictBatch) {
      std::size_t pos = layout.offset[levels - e.level][e.block];
      run_item(recon.data(), d, blk, e.level, [&](std::size_t idx, float pred) {
        const auto code = s.codes[pos];
        if (code == 0) {
          const auto it = outlier_values.find(idx);
          if (it == outlier_values.end()) throw CorruptStream("sentinel code without outlier entry", pos);
          recon[idx] = it->second;
        } else {
          if (code > max_code) throw CorruptStream("quantization code out of range", pos);
          recon[idx] = dequantize(pred, code, cfg);
        }
        ++pos;
      });
    }
  }
  auto stats = compute_slice_stats(d, recon);
  return {Volume(d, std::move(recon)), std::move(stats), std::move(trace)};
}

}  // namespace flare
