#include <cmath>

#include "doctest.h"
#include "flare/error.hpp"
#include "flare/neural.hpp"
#include "support.hpp"

using namespace flare;
using namespace flare::nn;

namespace {

template <typename S>
Image<S> random_image(testing::Rng& rng, int h, int w, double lo, double hi) {
  Image<S> img(h, w);
  for (Eigen::Index i = 0; i < img.size(); ++i) img.data()[i] = static_cast<S>(rng.uniform(lo, hi));
  return img;
}

template <typename S>
ConvNetParams<S> random_params(testing::Rng& rng, double scale = 0.3) {
  auto p = init_params<S>(rng.next());
  for (auto& layer : p.layers) {
    for (Eigen::Index i = 0; i < layer.weight.size(); ++i) layer.weight.data()[i] = static_cast<S>(rng.uniform(-scale, scale));
    for (Eigen::Index i = 0; i < layer.bias.size(); ++i) layer.bias.data()[i] = static_cast<S>(rng.uniform(-0.1, 0.1));
  }
  return p;
}

double max_rel(const Image<float>& a, const Image<float>& b) {
  const double scale = std::max(1e-30, static_cast<double>(b.cwiseAbs().maxCoeff()));
  return (a.cast<double>() - b.cast<double>()).cwiseAbs().maxCoeff() / scale;
}

}  // namespace

TEST_CASE("topology constants") {
  CHECK(ConvNetParams<float>::parameter_count() == 4945);
  CHECK(macs_per_pixel() == 4896);
}

TEST_CASE("instance normalization") {
  Image<float> c = Image<float>::Constant(2, 3, 5.0f);
  CHECK(instance_normalize<float>(c, {5.0, 5.0}).isZero());

  Image<float> a(1, 3);
  a << 0.0f, 0.5f, 1.0f;
  CHECK(instance_normalize<float>(a, {0.0, 1.0}) == a);

  Image<float> b(1, 3);
  b << 2.0f, 3.0f, 4.0f;
  CHECK(instance_normalize<float>(b, {2.0, 4.0}) == a);

  Slice2D s{Axis::X, 0, b};
  CHECK(instance_normalize(s, 2.0, 4.0).data == a);
}

TEST_CASE("normalization folding") {
  testing::Rng rng(11);
  const auto p = random_params<float>(rng);
  const auto& first = p.layers[0];

  const auto unit = fold_normalization(first, {0.0, 1.0});
  CHECK(unit.layer.weight == first.weight.cast<double>());
  CHECK(unit.layer.bias == first.bias.cast<double>());

  ConvLayer<float> tap;
  tap.weight.setZero(kChannels, 9);
  tap.bias.setZero(kChannels);
  tap.w(1, 1, 0, 0) = 1.0f;
  const auto half = fold_normalization(tap, {0.0, 2.0});
  CHECK(half.layer.w(1, 1, 0, 0) == 0.5);
  CHECK(half.layer.bias(0) == 0.0);

  const auto flat = fold_normalization(first, {3.0, 3.0});
  CHECK(flat.layer.weight.isZero());
  CHECK(flat.layer.bias == first.bias.cast<double>());

  // Single conv layer: fused raw input against normalize-then-convolve.
  for (int trial = 0; trial < 20; ++trial) {
    const double lo = rng.uniform(-5.0, 5.0), hi = lo + rng.uniform(0.5, 10.0);
    const auto img = random_image<float>(rng, 9, 7, lo, hi);
    const SliceRange r{lo, hi};
    const auto f = fold_normalization(first, r);
    const FeatureMap<float> fused = conv(f.layer, detail::im2col<float>(detail::as_feature<float>(img), 9, 7, f.pad)).cast<float>();
    const auto ref = conv(first, detail::im2col<float>(detail::as_feature<float>(instance_normalize<float>(img, r)), 9, 7, 0.0f));
    const double scale = ref.cwiseAbs().maxCoeff();
    CHECK((fused.cast<double>() - ref.cast<double>()).cwiseAbs().maxCoeff() / scale <= 1e-5);
  }
}

TEST_CASE("forward") {
  testing::Rng rng(12);
  const auto img = random_image<float>(rng, 10, 12, -1.0, 3.0);
  const SliceRange r{img.minCoeff(), img.maxCoeff()};

  const auto identity = init_params<float>(5);
  CHECK(forward<float>(identity, img, r, true) == img);
  CHECK(forward<float>(identity, img, r, false) == img);

  const auto p = random_params<float>(rng);
  const auto fused = forward<float>(p, img, r, true);
  const auto plain = forward<float>(p, img, r, false);
  CHECK(fused.rows() == img.rows());
  CHECK(fused.cols() == img.cols());
  CHECK(max_rel(fused, plain) <= 1e-5);

  const Image<float> flat = Image<float>::Constant(6, 6, 2.5f);
  const SliceRange fr{2.5, 2.5};
  CHECK(residual_forward<float>(p, flat, fr, true) == residual_forward<float>(p, flat, fr, false));
  CHECK(forward<float>(p, flat, fr, true) == flat);

  Slice2D s{Axis::X, 3, img};
  CHECK(forward(p, s, r, true).data == fused);

  CHECK_THROWS_AS(forward<float>(p, Image<float>::Zero(2, 8), {0, 1}, true), DimensionError);
}

std::vector<bool> relu_pattern(const ConvNetParams<double>& p, const Image<double>& x, SliceRange r) {
  ForwardCache<double> c;
  residual_forward(p, x, r, false, &c);
  std::vector<bool> mask;
  for (int l = 0; l + 1 < kLayers; ++l)
    for (Eigen::Index i = 0; i < c.pre[l].size(); ++i) mask.push_back(c.pre[l].data()[i] > 0);
  return mask;
}

TEST_CASE("gradients match central differences") {
  testing::Rng rng(13);
  const double h = 1e-3;
  for (int trial = 0; trial < 3; ++trial) {
    const auto p = random_params<double>(rng, 0.4);
    const auto x = random_image<double>(rng, 8, 8, 0.0, 2.0);
    const auto y = random_image<double>(rng, 8, 8, 0.0, 2.0);
    const SliceRange r{x.minCoeff(), x.maxCoeff(), 0.05};
    const auto base = relu_pattern(p, x, r);
    Gradients<double> g;
    loss_and_gradient(p, x, y, r, &g);

    // Coordinates whose +-h probe flips a ReLU are not differentiable at
    // this step size and are left out of the comparison.
    std::size_t probed = 0, kinked = 0;
    auto probe = [&](auto bump, double analytic, double& num, double& ana) {
      auto plus = p, minus = p;
      bump(plus, h);
      bump(minus, -h);
      ++probed;
      if (relu_pattern(plus, x, r) != base || relu_pattern(minus, x, r) != base) {
        ++kinked;
        return;
      }
      const auto loss = [&](const ConvNetParams<double>& q) {
        return loss_and_gradient(q, x, y, r, static_cast<Gradients<double>*>(nullptr));
      };
      const double fd = (loss(plus) - loss(minus)) / (2 * h);
      num += (fd - analytic) * (fd - analytic);
      ana += analytic * analytic;
    };

    for (int l = 0; l < kLayers; ++l) {
      CAPTURE(l);
      double num = 0, ana = 0;
      for (Eigen::Index i = 0; i < g.weight[l].size(); ++i)
        probe([&](ConvNetParams<double>& q, double d) { q.layers[l].weight.data()[i] += d; }, g.weight[l].data()[i], num,
              ana);
      CHECK(std::sqrt(num / ana) <= 1e-4);
      num = ana = 0;
      for (Eigen::Index i = 0; i < g.bias[l].size(); ++i)
        probe([&](ConvNetParams<double>& q, double d) { q.layers[l].bias(i) += d; }, g.bias[l](i), num, ana);
      CHECK(std::sqrt(num / ana) <= 1e-4);
    }
    CHECK(kinked * 10 < probed);
  }
}

TEST_CASE("online training") {
  testing::Rng rng(14);
  std::vector<TrainingPair> pairs;
  for (int i = 0; i < 4; ++i) {
    auto orig = random_image<float>(rng, 8, 8, 0.0, 1.0);
    Image<float> recon = orig;
    for (Eigen::Index k = 0; k < recon.size(); ++k) recon.data()[k] += static_cast<float>(rng.uniform(-0.01, 0.01));
    pairs.push_back({recon, orig, {recon.minCoeff(), recon.maxCoeff(), 0.01}});
  }
  const auto init = init_params<float>(99);

  CHECK(train_online(init, pairs, {3, 0.0}) == init);

  std::vector<TrainingPair> same{{pairs[0].original, pairs[0].original, pairs[0].range}};
  std::vector<double> loss;
  CHECK(train_online(init, same, {2, 0.1}, &loss) == init);
  CHECK(loss == std::vector<double>{0.0, 0.0});

  const auto a = train_online(init, pairs, {3, 0.05}, &loss);
  const auto b = train_online(init, pairs, {3, 0.05});
  CHECK(a == b);
  CHECK(loss.size() == 3);
  CHECK_FALSE(a == init);

  CHECK_THROWS_AS(train_online(init, {}, {1, 0.1}), InputError);
  CHECK_THROWS_AS(train_online(init, pairs, {0, 0.1}), InputError);
  CHECK_THROWS_AS(train_online(init, pairs, {4, 1e30}), TrainingError);
}

TEST_CASE("clamped enhancement") {
  Image<float> recon(2, 2);
  recon << 1.0f, 2.0f, 3.0f, 4.0f;
  const double eb = 0.01;
  CHECK(enhance_and_clamp(recon, Image<float>::Zero(2, 2), eb) == recon);
  const auto up = enhance_and_clamp(recon, Image<float>::Constant(2, 2, 0.1f), eb);
  for (Eigen::Index i = 0; i < 4; ++i) {
    CHECK(up.data()[i] >= recon.data()[i]);
    CHECK(static_cast<double>(up.data()[i]) - recon.data()[i] <= eb);
    CHECK(static_cast<double>(up.data()[i]) - recon.data()[i] >= eb - 1e-6);
  }
  Image<float> small(2, 2);
  small << 0.004f, -0.002f, 0.0f, 0.009f;
  const auto mid = enhance_and_clamp(recon, small, eb);
  for (Eigen::Index i = 0; i < 4; ++i) CHECK(mid.data()[i] == recon.data()[i] + small.data()[i]);
  CHECK_THROWS_AS(enhance_and_clamp(recon, Image<float>::Zero(3, 2), eb), DimensionError);

  testing::Rng rng(15);
  const auto big = random_image<float>(rng, 16, 16, -1e3, 1e3);
  const auto res = random_image<float>(rng, 16, 16, -1.0, 1.0);
  const auto out = enhance_and_clamp(big, res, 1e-4);
  for (Eigen::Index i = 0; i < out.size(); ++i)
    CHECK(std::abs(static_cast<double>(out.data()[i]) - big.data()[i]) <= 1e-4);
}

TEST_CASE("parameter serialization") {
  testing::Rng rng(16);
  const auto p = random_params<float>(rng);
  const auto bytes = serialize_params(p);
  CHECK(bytes.size() == 4 + 4 * ConvNetParams<float>::parameter_count());
  CHECK(deserialize_params(bytes) == p);
  CHECK(serialize_params(deserialize_params(bytes)) == bytes);

  auto bad = bytes;
  bad[0] ^= 1;
  CHECK_THROWS_AS(deserialize_params(bad), CorruptStream);
  bad = bytes;
  bad.pop_back();
  CHECK_THROWS_AS(deserialize_params(bad), CorruptStream);
}
