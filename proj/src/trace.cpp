#include "flare/trace.hpp"

#include <algorithm>
#include <fstream>
#include <iterator>

#include "flare/bytes.hpp"
#include "flare/error.hpp"

namespace flare {

namespace {
constexpr std::uint16_t kTraceVersion = 1;
}

std::vector<std::uint8_t> serialize_trace(const ExecTrace& t) {
  ByteWriter w;
  w.put_tag("FLTR");
  w.put<std::uint16_t>(kTraceVersion);
  w.put<std::uint8_t>(static_cast<std::uint8_t>(t.order));
  w.put<std::uint8_t>(0);
  w.put<std::uint32_t>(static_cast<std::uint32_t>(t.dims.nx));
  w.put<std::uint32_t>(static_cast<std::uint32_t>(t.dims.ny));
  w.put<std::uint32_t>(static_cast<std::uint32_t>(t.dims.nz));
  w.put<std::uint32_t>(t.block_size);
  w.put<std::uint32_t>(t.levels);
  w.put<std::uint64_t>(t.events.size());
  for (const auto& e : t.events) {
    w.put<std::uint8_t>(static_cast<std::uint8_t>(e.kind));
    w.put<std::uint8_t>(e.level);
    w.put<std::uint16_t>(0);
    w.put<std::uint32_t>(e.block);
    w.put<std::uint64_t>(e.a);
    w.put<std::uint64_t>(e.b);
    w.put<std::uint64_t>(e.c);
  }
  return w.take();
}

ExecTrace deserialize_trace(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes);
  auto tag = r.get_bytes(4);
  if (!std::equal(tag.begin(), tag.end(), "FLTR")) throw CorruptStream("bad trace magic", 0);
  if (r.get<std::uint16_t>() != kTraceVersion) throw CorruptStream("unsupported trace version", 4);
  ExecTrace t;
  const auto order = r.get<std::uint8_t>();
  if (order > 1) throw CorruptStream("bad trace order", 6);
  t.order = static_cast<Order>(order);
  r.get<std::uint8_t>();
  t.dims.nx = r.get<std::uint32_t>();
  t.dims.ny = r.get<std::uint32_t>();
  t.dims.nz = r.get<std::uint32_t>();
  t.block_size = r.get<std::uint32_t>();
  t.levels = r.get<std::uint32_t>();
  const auto n = r.get<std::uint64_t>();
  if (n > r.remaining() / 32) throw CorruptStream("trace event count exceeds payload", r.offset());
  t.events.reserve(n);
  for (std::uint64_t i = 0; i < n; ++i) {
    TraceEvent e;
    const auto kind = r.get<std::uint8_t>();
    if (kind > static_cast<std::uint8_t>(EventKind::Warning)) throw CorruptStream("bad event kind", r.offset() - 1);
    e.kind = static_cast<EventKind>(kind);
    e.level = r.get<std::uint8_t>();
    r.get<std::uint16_t>();
    e.block = r.get<std::uint32_t>();
    e.a = r.get<std::uint64_t>();
    e.b = r.get<std::uint64_t>();
    e.c = r.get<std::uint64_t>();
    t.events.push_back(e);
  }
  if (r.remaining() != 0) throw CorruptStream("trailing bytes after trace", r.offset());
  return t;
}

void save_trace(const std::filesystem::path& path, const ExecTrace& trace) {
  const auto bytes = serialize_trace(trace);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed for " + path.string());
}

ExecTrace load_trace(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return deserialize_trace(bytes);
}

std::uint64_t peak_working_set(const ExecTrace& trace) {
  std::uint64_t live = 0, peak = 0;
  for (const auto& e : trace.events) {
    switch (e.kind) {
      case EventKind::LoadAnchors:
      case EventKind::PredictBatch:
        live += e.a * sizeof(float);
        peak = std::max(peak, live);
        break;
      case EventKind::Forward:
        if (e.a > live) throw SimulationError("trace forwards more bytes than are live");
        live -= e.a;
        break;
      default:
        break;
    }
  }
  return peak;
}

}  // namespace flare
