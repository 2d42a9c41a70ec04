#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "flare/volume.hpp"

namespace flare {

enum class EventKind : std::uint8_t {
  LoadAnchors = 0,     // block, a = anchor points loaded
  PredictBatch = 1,    // level, block, a = points predicted, b = non-empty axis passes
  CodecSymbols = 2,    // level, block, a = symbols, b = payload bits (0 if unknown)
  Forward = 3,         // block, a = bytes leaving the prediction working set
  EmitSliceBatch = 4,  // a = first slice, b = one past last slice, c = bytes
  NeuralSlice = 5,     // a = slice index, b = MAC count
  Warning = 6,         // a = warning code
};

enum class TraceWarning : std::uint64_t { LookaheadFallback = 1 };

struct TraceEvent {
  EventKind kind{};
  std::uint8_t level = 0;
  std::uint32_t block = 0;
  std::uint64_t a = 0, b = 0, c = 0;

  bool operator==(const TraceEvent&) const = default;
};

enum class Order : std::uint8_t { BreadthFirst = 0, LookAhead = 1 };

// Ordered log of the work a compression or decompression run performs, in
// logical schedule order. Slices are cut along the slowest axis (X).
struct ExecTrace {
  Dims dims;
  std::uint32_t block_size = 32;
  std::uint32_t levels = 0;
  Order order = Order::BreadthFirst;
  std::vector<TraceEvent> events;

  bool operator==(const ExecTrace&) const = default;
};

// Binary framing: "FLTR", u16 version, u8 order, u8 reserved, u32 nx/ny/nz,
// u32 block size, u32 levels, u64 event count, then 32-byte records
// {u8 kind, u8 level, u16 reserved, u32 block, u64 a, u64 b, u64 c}.
// All integers little-endian.
std::vector<std::uint8_t> serialize_trace(const ExecTrace& trace);
ExecTrace deserialize_trace(std::span<const std::uint8_t> bytes);
void save_trace(const std::filesystem::path& path, const ExecTrace& trace);
ExecTrace load_trace(const std::filesystem::path& path);

// Peak bytes of reconstructed data held by the prediction stage, replayed
// from LoadAnchors / PredictBatch (grow) and Forward (shrink) events.
std::uint64_t peak_working_set(const ExecTrace& trace);

}  // namespace flare
