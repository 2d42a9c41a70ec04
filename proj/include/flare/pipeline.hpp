#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "flare/codec.hpp"
#include "flare/neural.hpp"
#include "flare/predictor.hpp"
#include "flare/trace.hpp"
#include "flare/volume.hpp"

namespace flare {

struct CompressOptions {
  double eb_rel = 1e-3;
  std::size_t block_size = 32;
  std::uint32_t radius = 32768;
  Order order = Order::LookAhead;
  int epochs = 6;
  double lr = 1e-2;
  std::uint64_t seed = 42;
};

struct CompressResult {
  std::vector<std::uint8_t> bytes;
  StreamParts parts;
  Volume predicted;  // predictor-only reconstruction
  Volume enhanced;   // what decompression will return
  ExecTrace trace;
  bool has_network = false;
  nn::ConvNetParams<float> params;
  std::vector<double> epoch_loss;

  double ratio() const;
};

CompressResult compress(const Volume& v, const CompressOptions& opts = {});

struct DecompressResult {
  Volume predicted;
  Volume enhanced;
  ExecTrace trace;
  double eb_abs = 0.0;
  bool has_network = false;
};

DecompressResult decompress(std::span<const std::uint8_t> bytes, Order order = Order::BreadthFirst);

// X-slice x of a volume as an ny x nz image.
nn::Image<float> slice_image(const Volume& v, std::size_t x);

// Training pairs for every X-slice, ranges taken from the reconstruction.
std::vector<nn::TrainingPair> training_pairs(const Volume& recon, const Volume& original, double eb_abs);

// Runs the fused network over every X-slice of `recon` and clamps the
// result to recon +- eb_abs.
Volume enhance_volume(const nn::ConvNetParams<float>& params, const Volume& recon, double eb_abs);

// True when the neural stage is meaningful for this volume: slices of at
// least 3x3, a nonzero error bound and a non-degenerate slice.
bool network_applicable(const Volume& recon, double eb_abs);

}  // namespace flare
