#include "flare/neural.hpp"

#include <algorithm>
#include <string>

#include "flare/bytes.hpp"

namespace flare::nn {

ConvNetParams<float> train_online(ConvNetParams<float> params, std::span<const TrainingPair> pairs,
                                  const TrainOptions& opts, std::vector<double>* epoch_loss) {
  if (pairs.empty()) throw InputError("training needs at least one slice pair");
  if (opts.epochs < 1) throw InputError("training needs at least one epoch");
  if (epoch_loss) epoch_loss->clear();
  Gradients<float> g;
  for (int epoch = 0; epoch < opts.epochs; ++epoch) {
    double total = 0.0;
    for (std::size_t i = 0; i < pairs.size(); ++i) {
      const auto& pair = pairs[i];
      const double loss = loss_and_gradient(params, pair.recon, pair.original, pair.range, &g);
      if (!std::isfinite(loss))
        throw TrainingError("non-finite loss at epoch " + std::to_string(epoch) + ", pair " + std::to_string(i));
      total += loss;
      if (opts.lr == 0.0) continue;
      for (int l = 0; l < kLayers; ++l) {
        auto& layer = params.layers[l];
        layer.weight = (layer.weight.cast<Accum>() - opts.lr * g.weight[l]).cast<float>();
        layer.bias = (layer.bias.cast<Accum>() - opts.lr * g.bias[l]).cast<float>();
      }
    }
    if (epoch_loss) epoch_loss->push_back(total / static_cast<double>(pairs.size()));
  }
  return params;
}

Image<float> enhance_and_clamp(const Image<float>& recon, const Image<float>& residual, double eb_abs) {
  if (recon.rows() != residual.rows() || recon.cols() != residual.cols())
    throw DimensionError("enhance_and_clamp: shape mismatch");
  Image<float> out(recon.rows(), recon.cols());
  for (Eigen::Index i = 0; i < recon.rows(); ++i)
    for (Eigen::Index j = 0; j < recon.cols(); ++j) {
      const double base = recon(i, j);
      const double v = std::clamp(base + static_cast<double>(residual(i, j)), base - eb_abs, base + eb_abs);
      float f = static_cast<float>(v);
      // Rounding to float must not step outside the clamp window.
      if (static_cast<double>(f) > base + eb_abs) f = std::nextafter(f, -INFINITY);
      if (static_cast<double>(f) < base - eb_abs) f = std::nextafter(f, INFINITY);
      out(i, j) = f;
    }
  return out;
}

std::vector<std::uint8_t> serialize_params(const ConvNetParams<float>& p) {
  ByteWriter w;
  w.put<std::uint32_t>(static_cast<std::uint32_t>(ConvNetParams<float>::parameter_count()));
  for (int l = 0; l < kLayers; ++l) {
    const auto& layer = p.layers[l];
    for (int kx = 0; kx < 3; ++kx)
      for (int ky = 0; ky < 3; ++ky)
        for (int in = 0; in < kInChannels[l]; ++in)
          for (int out = 0; out < kOutChannels[l]; ++out) w.put<float>(layer.w(kx, ky, in, out));
    for (int out = 0; out < kOutChannels[l]; ++out) w.put<float>(layer.bias(out));
  }
  return w.take();
}

ConvNetParams<float> deserialize_params(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes);
  const auto count = r.get<std::uint32_t>();
  if (count != ConvNetParams<float>::parameter_count())
    throw CorruptStream("network parameter count " + std::to_string(count) + " does not match topology", 0);
  if (r.remaining() != count * sizeof(float)) throw CorruptStream("network parameter block has wrong length", 4);
  ConvNetParams<float> p;
  for (int l = 0; l < kLayers; ++l) {
    auto& layer = p.layers[l];
    layer.weight.setZero(kOutChannels[l], kInChannels[l] * 9);
    layer.bias.setZero(kOutChannels[l]);
    for (int kx = 0; kx < 3; ++kx)
      for (int ky = 0; ky < 3; ++ky)
        for (int in = 0; in < kInChannels[l]; ++in)
          for (int out = 0; out < kOutChannels[l]; ++out) layer.w(kx, ky, in, out) = r.get<float>();
    for (int out = 0; out < kOutChannels[l]; ++out) layer.bias(out) = r.get<float>();
  }
  return p;
}

}  // namespace flare::nn
