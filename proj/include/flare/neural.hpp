#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "flare/error.hpp"
#include "flare/volume.hpp"

namespace flare::nn {

template <typename Scalar>
using Image = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Channels x pixels, pixel index = row * width + col.
template <typename Scalar>
using FeatureMap = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

using Accum = double;

inline constexpr int kChannels = 16;
inline constexpr int kLayers = 4;
inline constexpr std::array<int, kLayers> kInChannels{1, kChannels, kChannels, kChannels};
inline constexpr std::array<int, kLayers> kOutChannels{kChannels, kChannels, kChannels, 1};

// 3x3 same-padded convolution. weight is out x (in * 9); column
// (c * 3 + kx) * 3 + ky multiplies input channel c at offset (kx-1, ky-1).
template <typename Scalar>
struct ConvLayer {
  Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> weight;
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> bias;

  Scalar w(int kx, int ky, int in, int out) const { return weight(out, (in * 3 + kx) * 3 + ky); }
  Scalar& w(int kx, int ky, int in, int out) { return weight(out, (in * 3 + kx) * 3 + ky); }
};

// conv(1->16)+ReLU, conv(16->16)+ReLU, conv(16->16)+ReLU, conv(16->1),
// with the output treated as a residual in normalized units.
template <typename Scalar>
struct ConvNetParams {
  std::array<ConvLayer<Scalar>, kLayers> layers;
  std::uint64_t seed = 0;

  static constexpr std::size_t parameter_count() {
    std::size_t n = 0;
    for (int l = 0; l < kLayers; ++l) n += static_cast<std::size_t>(kInChannels[l] * 9 * kOutChannels[l] + kOutChannels[l]);
    return n;
  }

  template <typename Other>
  ConvNetParams<Other> cast() const {
    ConvNetParams<Other> p;
    p.seed = seed;
    for (int l = 0; l < kLayers; ++l) {
      p.layers[l].weight = layers[l].weight.template cast<Other>();
      p.layers[l].bias = layers[l].bias.template cast<Other>();
    }
    return p;
  }

  // Compares parameters only; the seed is not part of the serialized form.
  bool operator==(const ConvNetParams& o) const {
    for (int l = 0; l < kLayers; ++l)
      if (layers[l].weight != o.layers[l].weight || layers[l].bias != o.layers[l].bias) return false;
    return true;
  }
};

// Multiply-accumulates per output pixel for one forward pass.
constexpr std::uint64_t macs_per_pixel() {
  std::uint64_t n = 0;
  for (int l = 0; l < kLayers; ++l) n += static_cast<std::uint64_t>(9 * kInChannels[l] * kOutChannels[l]);
  return n;
}

// He-uniform hidden layers, zero biases, zero final layer (so an untrained
// network is the identity on its input slice).
template <typename Scalar>
ConvNetParams<Scalar> init_params(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  auto uniform = [&rng] { return static_cast<double>(rng() >> 11) * 0x1.0p-53; };
  ConvNetParams<Scalar> p;
  p.seed = seed;
  for (int l = 0; l < kLayers; ++l) {
    auto& layer = p.layers[l];
    layer.weight.setZero(kOutChannels[l], kInChannels[l] * 9);
    layer.bias.setZero(kOutChannels[l]);
    if (l == kLayers - 1) continue;
    const double limit = std::sqrt(6.0 / (9.0 * kInChannels[l]));
    for (Eigen::Index j = 0; j < layer.weight.cols(); ++j)
      for (Eigen::Index i = 0; i < layer.weight.rows(); ++i)
        layer.weight(i, j) = static_cast<Scalar>((2.0 * uniform() - 1.0) * limit);
  }
  return p;
}

struct SliceRange {
  double min = 0.0;
  double max = 0.0;
  // Value of one residual unit; 0 selects the slice span.
  double unit = 0.0;
  double span() const { return max - min; }
  bool degenerate() const { return !(max > min); }
  double scale() const { return unit > 0.0 ? unit : span(); }
};

template <typename Scalar>
struct FusedFirstLayer {
  ConvLayer<Accum> layer;
  // Raw value whose normalized image is zero; used as the padding value so
  // border pixels match zero padding in the normalized domain.
  Scalar pad = 0;
};

// W' = W / (max - min), b' = b - sum_k W * min / (max - min). A degenerate
// range folds to W' = 0, b' = b, matching an all-zero normalized slice.
template <typename Scalar>
FusedFirstLayer<Scalar> fold_normalization(const ConvLayer<Scalar>& first, SliceRange r) {
  FusedFirstLayer<Scalar> f;
  f.pad = static_cast<Scalar>(r.min);
  if (r.degenerate()) {
    f.layer.weight.setZero(first.weight.rows(), first.weight.cols());
    f.layer.bias = first.bias.template cast<Accum>();
    return f;
  }
  const Accum inv = 1.0 / r.span();
  const Accum shift = r.min * inv;
  const auto w = first.weight.template cast<Accum>();
  f.layer.weight = w * inv;
  f.layer.bias = first.bias.template cast<Accum>() - shift * w.rowwise().sum();
  return f;
}

// (D - min) / (max - min); all zeros when max == min.
template <typename Scalar>
Image<Scalar> instance_normalize(const Image<Scalar>& slice, SliceRange r) {
  if (r.degenerate()) return Image<Scalar>::Zero(slice.rows(), slice.cols());
  const Accum inv = 1.0 / r.span();
  return ((slice.template cast<Accum>().array() - r.min) * inv).matrix().template cast<Scalar>();
}

inline Slice2D instance_normalize(const Slice2D& s, double min, double max) {
  return {s.axis, s.index, instance_normalize<float>(s.data, {min, max})};
}

namespace detail {

// Patch matrix (channels * 9) x pixels, out-of-range taps set to `pad`.
template <typename Scalar>
Eigen::Matrix<Accum, Eigen::Dynamic, Eigen::Dynamic> im2col(const FeatureMap<Scalar>& in, int h, int w, Scalar pad) {
  const auto channels = static_cast<int>(in.rows());
  Eigen::Matrix<Accum, Eigen::Dynamic, Eigen::Dynamic> cols(channels * 9, h * w);
  for (int p = 0; p < h * w; ++p) {
    const int r = p / w, c = p % w;
    for (int ch = 0; ch < channels; ++ch)
      for (int kx = 0; kx < 3; ++kx)
        for (int ky = 0; ky < 3; ++ky) {
          const int rr = r + kx - 1, cc = c + ky - 1;
          const bool inside = rr >= 0 && rr < h && cc >= 0 && cc < w;
          cols((ch * 3 + kx) * 3 + ky, p) = static_cast<Accum>(inside ? in(ch, rr * w + cc) : pad);
        }
  }
  return cols;
}

// Adjoint of im2col: scatters patch gradients back onto input pixels.
inline Eigen::Matrix<Accum, Eigen::Dynamic, Eigen::Dynamic> col2im(
    const Eigen::Matrix<Accum, Eigen::Dynamic, Eigen::Dynamic>& gcols, int channels, int h, int w) {
  Eigen::Matrix<Accum, Eigen::Dynamic, Eigen::Dynamic> g = Eigen::Matrix<Accum, Eigen::Dynamic, Eigen::Dynamic>::Zero(channels, h * w);
  for (int p = 0; p < h * w; ++p) {
    const int r = p / w, c = p % w;
    for (int ch = 0; ch < channels; ++ch)
      for (int kx = 0; kx < 3; ++kx)
        for (int ky = 0; ky < 3; ++ky) {
          const int rr = r + kx - 1, cc = c + ky - 1;
          if (rr >= 0 && rr < h && cc >= 0 && cc < w) g(ch, rr * w + cc) += gcols((ch * 3 + kx) * 3 + ky, p);
        }
  }
  return g;
}

template <typename Scalar>
FeatureMap<Scalar> as_feature(const Image<Scalar>& img) {
  FeatureMap<Scalar> f(1, img.size());
  for (Eigen::Index r = 0; r < img.rows(); ++r)
    for (Eigen::Index c = 0; c < img.cols(); ++c) f(0, r * img.cols() + c) = img(r, c);
  return f;
}

}  // namespace detail

// Intermediate values kept for back-propagation.
template <typename Scalar>
struct ForwardCache {
  int h = 0, w = 0;
  std::array<Eigen::Matrix<Accum, Eigen::Dynamic, Eigen::Dynamic>, kLayers> cols;
  std::array<FeatureMap<Scalar>, kLayers> pre;  // pre-activations
  FeatureMap<Scalar> residual;                  // network output, normalized units
};

template <typename Scalar>
FeatureMap<Scalar> conv(const ConvLayer<Scalar>& layer, const Eigen::Matrix<Accum, Eigen::Dynamic, Eigen::Dynamic>& cols) {
  Eigen::Matrix<Accum, Eigen::Dynamic, Eigen::Dynamic> z = layer.weight.template cast<Accum>() * cols;
  z.colwise() += layer.bias.template cast<Accum>();
  return z.template cast<Scalar>();
}

// Runs the network on one slice. With `fused`, the first layer consumes the
// raw slice through folded weights; otherwise the slice is normalized first.
template <typename Scalar>
FeatureMap<Scalar> residual_forward(const ConvNetParams<Scalar>& p, const Image<Scalar>& slice, SliceRange r, bool fused,
                                    ForwardCache<Scalar>* cache = nullptr) {
  const int h = static_cast<int>(slice.rows()), w = static_cast<int>(slice.cols());
  if (h < 3 || w < 3) throw DimensionError("slice must be at least 3x3 for the neural enhancer");
  ForwardCache<Scalar> local;
  ForwardCache<Scalar>& c = cache ? *cache : local;
  c.h = h;
  c.w = w;

  FeatureMap<Scalar> a;
  if (fused) {
    const auto f = fold_normalization(p.layers[0], r);
    c.cols[0] = detail::im2col<Scalar>(detail::as_feature<Scalar>(slice), h, w, f.pad);
    c.pre[0] = conv(f.layer, c.cols[0]).template cast<Scalar>();
  } else {
    c.cols[0] = detail::im2col<Scalar>(detail::as_feature<Scalar>(instance_normalize<Scalar>(slice, r)), h, w, Scalar(0));
    c.pre[0] = conv(p.layers[0], c.cols[0]);
  }
  for (int l = 1; l < kLayers; ++l) {
    a = c.pre[l - 1].cwiseMax(Scalar(0));
    c.cols[l] = detail::im2col<Scalar>(a, h, w, Scalar(0));
    c.pre[l] = conv(p.layers[l], c.cols[l]);
  }
  c.residual = c.pre[kLayers - 1];
  return c.residual;
}

// Enhanced slice = slice + scale * residual. A degenerate range yields the
// input unchanged on both paths.
template <typename Scalar>
Image<Scalar> forward(const ConvNetParams<Scalar>& p, const Image<Scalar>& slice, SliceRange r, bool fused) {
  const auto res = residual_forward(p, slice, r, fused);
  Image<Scalar> out = slice;
  if (r.degenerate()) return out;
  const Accum scale = r.scale();
  for (Eigen::Index i = 0; i < out.rows(); ++i)
    for (Eigen::Index j = 0; j < out.cols(); ++j)
      out(i, j) = static_cast<Scalar>(static_cast<Accum>(out(i, j)) + scale * static_cast<Accum>(res(0, i * out.cols() + j)));
  return out;
}

inline Slice2D forward(const ConvNetParams<float>& p, const Slice2D& s, SliceRange r, bool fused) {
  return {s.axis, s.index, forward<float>(p, s.data, r, fused)};
}

template <typename Scalar>
struct Gradients {
  std::array<Eigen::Matrix<Accum, Eigen::Dynamic, Eigen::Dynamic>, kLayers> weight;
  std::array<Eigen::Matrix<Accum, Eigen::Dynamic, 1>, kLayers> bias;
};

// Mean squared error between the enhanced slice and `target`, measured in
// residual units, plus its gradient with respect to every parameter
// (unfused path).
template <typename Scalar>
Accum loss_and_gradient(const ConvNetParams<Scalar>& p, const Image<Scalar>& recon, const Image<Scalar>& target,
                        SliceRange r, Gradients<Scalar>* grads) {
  ForwardCache<Scalar> c;
  residual_forward(p, recon, r, /*fused=*/false, &c);
  const Accum scale = r.degenerate() ? 0.0 : r.scale();
  const Accum inv = r.scale() > 0.0 ? 1.0 / r.scale() : 1.0;
  const int n = c.h * c.w;
  Eigen::Matrix<Accum, 1, Eigen::Dynamic> err(n);
  for (int i = 0; i < n; ++i) {
    const int row = i / c.w, col = i % c.w;
    const Accum out = static_cast<Accum>(recon(row, col)) + scale * static_cast<Accum>(c.residual(0, i));
    err(i) = (out - static_cast<Accum>(target(row, col))) * inv;
  }
  const Accum loss = err.squaredNorm() / n;
  if (!grads) return loss;

  Eigen::Matrix<Accum, Eigen::Dynamic, Eigen::Dynamic> g = (2.0 * scale * inv / n) * err;
  for (int l = kLayers - 1; l >= 0; --l) {
    grads->weight[l] = g * c.cols[l].transpose();
    grads->bias[l] = g.rowwise().sum();
    if (l == 0) break;
    Eigen::Matrix<Accum, Eigen::Dynamic, Eigen::Dynamic> gcols = p.layers[l].weight.template cast<Accum>().transpose() * g;
    g = detail::col2im(gcols, kInChannels[l], c.h, c.w);
    g.array() *= (c.pre[l - 1].array() > Scalar(0)).template cast<Accum>();
  }
  return loss;
}

struct TrainingPair {
  Image<float> recon;
  Image<float> original;
  SliceRange range;
};

struct TrainOptions {
  int epochs = 6;
  double lr = 1e-2;
};

// Plain SGD, one step per pair, pairs visited in order. `epoch_loss`, when
// given, receives the mean loss of each epoch. Throws TrainingError on a
// non-finite loss.
ConvNetParams<float> train_online(ConvNetParams<float> params, std::span<const TrainingPair> pairs,
                                  const TrainOptions& opts, std::vector<double>* epoch_loss = nullptr);

// clamp(recon + residual, recon - eb, recon + eb), element-wise.
Image<float> enhance_and_clamp(const Image<float>& recon, const Image<float>& residual, double eb_abs);

// u32 parameter count, then every layer's weights in (kx, ky, in, out)
// order followed by its biases, as little-endian float32.
std::vector<std::uint8_t> serialize_params(const ConvNetParams<float>& p);
ConvNetParams<float> deserialize_params(std::span<const std::uint8_t> bytes);

}  // namespace flare::nn
