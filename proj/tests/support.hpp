#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "flare/volume.hpp"

namespace flare::testing {

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}
  double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  std::uint64_t next() { return gen_(); }
  std::uint64_t below(std::uint64_t n) { return gen_() % n; }

 private:
  std::mt19937_64 gen_;
};

// Sum of low-frequency sinusoids, roughly in [-2, 2].
inline Volume smooth_field(Dims d, std::uint64_t seed, int terms = 4, double max_cycles = 1.5) {
  Rng rng(seed);
  struct Wave {
    double kx, ky, kz, phase, amp;
  };
  std::vector<Wave> waves;
  const double tau = 6.283185307179586;
  for (int i = 0; i < terms; ++i)
    waves.push_back({tau * rng.uniform(0.2, max_cycles) / static_cast<double>(d.nx),
                     tau * rng.uniform(0.2, max_cycles) / static_cast<double>(d.ny),
                     tau * rng.uniform(0.2, max_cycles) / static_cast<double>(d.nz), rng.uniform(0.0, tau),
                     rng.uniform(0.3, 1.0)});
  std::vector<float> f(d.count());
  for (std::size_t x = 0; x < d.nx; ++x)
    for (std::size_t y = 0; y < d.ny; ++y)
      for (std::size_t z = 0; z < d.nz; ++z) {
        double v = 0.0;
        for (const auto& w : waves)
          v += w.amp * std::sin(w.kx * static_cast<double>(x) + w.ky * static_cast<double>(y) +
                                w.kz * static_cast<double>(z) + w.phase);
        f[d.index(x, y, z)] = static_cast<float>(v);
      }
  return Volume(d, std::move(f));
}

// Smooth field plus uniform noise of amplitude `noise`.
inline Volume rough_field(Dims d, std::uint64_t seed, double noise = 0.05) {
  const auto base = smooth_field(d, seed);
  Rng rng(seed ^ 0x9e3779b97f4a7c15ull);
  std::vector<float> f(base.data().begin(), base.data().end());
  for (auto& v : f) {
    v += static_cast<float>(noise * rng.uniform(-1.0, 1.0));
  }
  return Volume(d, std::move(f));
}

inline Volume constant_field(Dims d, float c) { return Volume(d, std::vector<float>(d.count(), c)); }

inline Volume ramp_field(Dims d) {
  std::vector<float> f(d.count());
  for (std::size_t x = 0; x < d.nx; ++x)
    for (std::size_t y = 0; y < d.ny; ++y)
      for (std::size_t z = 0; z < d.nz; ++z)
        f[d.index(x, y, z)] = static_cast<float>(0.5 * static_cast<double>(x) + 0.25 * static_cast<double>(y) +
                                                 0.125 * static_cast<double>(z));
  return Volume(d, std::move(f));
}

}  // namespace flare::testing
