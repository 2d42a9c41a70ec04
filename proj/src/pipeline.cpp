#include "flare/pipeline.hpp"

#include "flare/error.hpp"

namespace flare {

double CompressResult::ratio() const {
  return bytes.empty() ? 0.0 : static_cast<double>(predicted.bytes()) / static_cast<double>(bytes.size());
}

nn::Image<float> slice_image(const Volume& v, std::size_t x) {
  const auto d = v.dims();
  nn::Image<float> img(d.ny, d.nz);
  const float* p = v.data().data() + x * d.ny * d.nz;
  std::copy(p, p + d.ny * d.nz, img.data());
  return img;
}

namespace {

nn::SliceRange slice_range(const nn::Image<float>& img, double eb_abs) {
  return {img.minCoeff(), img.maxCoeff(), eb_abs};
}

void annotate_codec_bits(ExecTrace& trace, const BlockGrid& grid, std::span<const std::uint32_t> codes,
                         const HuffmanTable& table) {
  const auto layout = canonical_layout(grid);
  for (auto& e : trace.events) {
    if (e.kind != EventKind::CodecSymbols) continue;
    const auto off = layout.offset[trace.levels - e.level][e.block];
    std::uint64_t bits = 0;
    for (std::size_t i = 0; i < e.a; ++i) bits += table.length_of(codes[off + i]);
    e.b = bits;
  }
}

}  // namespace

std::vector<nn::TrainingPair> training_pairs(const Volume& recon, const Volume& original, double eb_abs) {
  std::vector<nn::TrainingPair> pairs;
  for (std::size_t x = 0; x < recon.dims().nx; ++x) {
    auto r = slice_image(recon, x);
    const auto range = slice_range(r, eb_abs);
    pairs.push_back({std::move(r), slice_image(original, x), range});
  }
  return pairs;
}

bool network_applicable(const Volume& recon, double eb_abs) {
  const auto d = recon.dims();
  return d.ny >= 3 && d.nz >= 3 && eb_abs > 0.0 && recon.vmax() > recon.vmin();
}

Volume enhance_volume(const nn::ConvNetParams<float>& params, const Volume& recon, double eb_abs) {
  const auto d = recon.dims();
  std::vector<float> out(recon.data().begin(), recon.data().end());
  for (std::size_t x = 0; x < d.nx; ++x) {
    const auto img = slice_image(recon, x);
    const auto range = slice_range(img, eb_abs);
    if (range.degenerate()) continue;
    const auto res = nn::residual_forward<float>(params, img, range, /*fused=*/true);
    nn::Image<float> delta(d.ny, d.nz);
    for (Eigen::Index i = 0; i < delta.size(); ++i)
      delta.data()[i] = static_cast<float>(range.scale() * static_cast<double>(res(0, i)));
    const auto enhanced = nn::enhance_and_clamp(img, delta, eb_abs);
    std::copy(enhanced.data(), enhanced.data() + enhanced.size(), out.begin() + x * d.ny * d.nz);
  }
  return Volume(d, std::move(out));
}

CompressResult compress(const Volume& v, const CompressOptions& opts) {
  if (opts.epochs < 0) throw InputError("epochs must be non-negative");
  const auto cfg = make_quantizer_config(v, opts.eb_rel, opts.block_size, opts.radius);
  const auto d = v.dims();
  const std::uint64_t slice_macs = nn::macs_per_pixel() * d.ny * d.nz;

  auto pred = compress_predict(v, cfg, opts.order);
  CompressResult out{{}, {}, pred.recon, pred.recon, {}, false, {}, {}};
  out.has_network = opts.epochs > 0 && network_applicable(pred.recon, cfg.eb_abs);

  ScheduleOptions sched;
  if (out.has_network) sched.neural_macs_per_slice = 3 * static_cast<std::uint64_t>(opts.epochs) * slice_macs;
  const auto grid = partition_blocks(d, cfg.block_size);
  out.trace = build_schedule(grid, opts.order, sched);

  StreamParts& p = out.parts;
  p.dims = d;
  p.eb_rel = cfg.eb_rel;
  p.eb_abs = cfg.eb_abs;
  p.block_size = static_cast<std::uint32_t>(cfg.block_size);
  p.radius = cfg.radius;
  p.taps = cfg.taps;
  p.code_count = pred.stream.codes.size();
  p.anchors = pred.stream.anchors;
  p.outliers = pred.stream.outliers;
  if (!pred.stream.codes.empty()) {
    p.table = build_table(histogram(pred.stream.codes));
    p.payload = encode(pred.stream.codes, p.table);
    annotate_codec_bits(out.trace, grid, pred.stream.codes, p.table);
  }

  if (out.has_network) {
    const auto pairs = training_pairs(pred.recon, v, cfg.eb_abs);
    out.params = nn::train_online(nn::init_params<float>(opts.seed), pairs, {opts.epochs, opts.lr}, &out.epoch_loss);
    p.network = nn::serialize_params(out.params);
    out.enhanced = enhance_volume(out.params, pred.recon, cfg.eb_abs);
  }
  out.bytes = pack_stream(p);
  return out;
}

DecompressResult decompress(std::span<const std::uint8_t> bytes, Order order) {
  const auto p = unpack_stream(bytes);
  QuantizerConfig cfg{p.eb_rel, p.eb_abs, p.radius, p.taps, p.block_size};
  QuantCodeStream stream;
  stream.codes = decode(p.payload, p.table, p.code_count);
  stream.anchors = p.anchors;
  stream.outliers = p.outliers;

  const bool has_network = !p.network.empty();
  ScheduleOptions sched;
  if (has_network) sched.neural_macs_per_slice = nn::macs_per_pixel() * p.dims.ny * p.dims.nz;
  auto rec = decompress_predict(stream, cfg, p.dims, order, sched);
  if (!stream.codes.empty()) annotate_codec_bits(rec.trace, partition_blocks(p.dims, p.block_size), stream.codes, p.table);

  DecompressResult out{rec.recon, rec.recon, std::move(rec.trace), p.eb_abs, has_network};
  if (has_network) {
    if (p.dims.ny < 3 || p.dims.nz < 3) throw CorruptStream("network section present for slices smaller than 3x3", 6);
    out.enhanced = enhance_volume(nn::deserialize_params(p.network), rec.recon, p.eb_abs);
  }
  return out;
}

}  // namespace flare
