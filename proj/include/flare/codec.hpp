#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <vector>

#include "flare/predictor.hpp"
#include "flare/volume.hpp"

namespace flare {

using Histogram = std::map<std::uint32_t, std::uint64_t>;

Histogram histogram(std::span<const std::uint32_t> codes);

// Empirical entropy H in bits per symbol.
double entropy(const Histogram& hist);

struct HuffmanSymbol {
  std::uint32_t symbol = 0;
  std::uint8_t length = 0;

  bool operator==(const HuffmanSymbol&) const = default;
};

// Canonical Huffman table. Symbols are kept sorted by (length, symbol);
// codes are assigned in that order, so lengths alone define the table.
class HuffmanTable {
 public:
  static constexpr std::uint8_t kMaxLength = 32;

  HuffmanTable() = default;
  // Validates lengths (1..32, Kraft sum <= 1, distinct symbols).
  explicit HuffmanTable(std::vector<HuffmanSymbol> symbols);

  const std::vector<HuffmanSymbol>& symbols() const { return symbols_; }
  std::size_t size() const { return symbols_.size(); }
  bool empty() const { return symbols_.empty(); }
  std::uint8_t length_of(std::uint32_t symbol) const;
  std::uint32_t code_of(std::uint32_t symbol) const;
  double kraft_sum() const;
  std::uint8_t max_length() const { return max_length_; }
  // Symbol whose canonical code of `length` bits is `code`, if any.
  const HuffmanSymbol* match(std::uint32_t code, std::uint8_t length) const {
    if (code < first_[length] || code - first_[length] >= count_[length]) return nullptr;
    return &symbols_[start_[length] + (code - first_[length])];
  }

  bool operator==(const HuffmanTable& o) const { return symbols_ == o.symbols_; }

 private:
  std::vector<HuffmanSymbol> symbols_;
  std::vector<std::uint32_t> codes_;                      // parallel to symbols_
  std::map<std::uint32_t, std::size_t> index_;            // symbol -> position
  std::array<std::uint32_t, kMaxLength + 1> first_{};     // first code of each length
  std::array<std::uint32_t, kMaxLength + 1> count_{};     // codes of each length
  std::array<std::size_t, kMaxLength + 1> start_{};       // position of first symbol of each length
  std::uint8_t max_length_ = 0;
};

// Optimal prefix code by pairwise merging, ties broken by (count, smallest
// symbol). A single symbol gets length 1. Lengths beyond 32 are avoided by
// flattening the counts and rebuilding.
HuffmanTable build_table(const Histogram& hist);

// Payload bits are packed most significant bit first within each byte.
struct BitPayload {
  std::vector<std::uint8_t> bytes;
  std::uint64_t bits = 0;

  bool operator==(const BitPayload&) const = default;
};

BitPayload encode(std::span<const std::uint32_t> codes, const HuffmanTable& table);

// Decodes exactly n symbols and requires the payload to hold exactly the
// bits they use. Errors carry the bit offset where decoding failed.
std::vector<std::uint32_t> decode(const BitPayload& payload, const HuffmanTable& table, std::size_t n);

// u32 count, then (u32 symbol, u8 length) pairs in canonical order.
std::vector<std::uint8_t> serialize_table(const HuffmanTable& table);
HuffmanTable deserialize_table(std::span<const std::uint8_t> bytes);

inline constexpr std::uint16_t kStreamVersion = 1;

enum StreamFlags : std::uint16_t { kHasNetwork = 1 };

// Everything needed to rebuild a volume. `network` holds the serialized
// network parameters and is empty when no network was trained.
struct StreamParts {
  Dims dims;
  double eb_rel = 0.0;
  double eb_abs = 0.0;
  std::uint32_t block_size = 32;
  std::uint32_t radius = 32768;
  TapSet taps = TapSet::Cubic;
  std::uint64_t code_count = 0;
  std::vector<float> anchors;
  std::vector<Outlier> outliers;
  HuffmanTable table;
  BitPayload payload;
  std::vector<std::uint8_t> network;

  bool operator==(const StreamParts&) const = default;
};

// Container layout (little-endian):
//   "FLRZ" u16 version u16 flags u32 nx ny nz f64 eb_rel f64 eb_abs
//   u32 block_size u32 radius u8 taps u8[3] reserved u64 code_count
//   u64 section lengths: anchors, outliers, table, payload, network
//   anchors: f32 each; outliers: (u64 index, f32 value) each;
//   table: see serialize_table; payload: u64 bit count + packed bytes;
//   network: raw parameter block.
std::vector<std::uint8_t> pack_stream(const StreamParts& parts);
StreamParts unpack_stream(std::span<const std::uint8_t> bytes);

std::vector<std::uint8_t> read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);

}  // namespace flare
