#include "flare/codec.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iterator>
#include <queue>
#include <string>

#include "flare/bytes.hpp"
#include "flare/error.hpp"

namespace flare {

Histogram histogram(std::span<const std::uint32_t> codes) {
  Histogram h;
  for (auto c : codes) ++h[c];
  return h;
}

double entropy(const Histogram& hist) {
  std::uint64_t n = 0;
  for (const auto& [s, c] : hist) n += c;
  if (n == 0) return 0.0;
  double h = 0.0;
  for (const auto& [s, c] : hist) {
    if (c == 0) continue;
    const double p = static_cast<double>(c) / static_cast<double>(n);
    h -= p * std::log2(p);
  }
  return h;
}

HuffmanTable::HuffmanTable(std::vector<HuffmanSymbol> symbols) : symbols_(std::move(symbols)) {
  std::sort(symbols_.begin(), symbols_.end(), [](const HuffmanSymbol& a, const HuffmanSymbol& b) {
    return a.length != b.length ? a.length < b.length : a.symbol < b.symbol;
  });
  for (std::size_t i = 0; i < symbols_.size(); ++i) {
    const auto& s = symbols_[i];
    if (s.length < 1 || s.length > kMaxLength)
      throw CorruptStream("Huffman code length " + std::to_string(s.length) + " out of range", 0);
    if (!index_.emplace(s.symbol, i).second)
      throw CorruptStream("duplicate Huffman symbol " + std::to_string(s.symbol), 0);
    ++count_[s.length];
    max_length_ = std::max(max_length_, s.length);
  }
  // Kraft check in exact integer arithmetic (units of 2^-32).
  std::uint64_t kraft = 0;
  for (int len = 1; len <= kMaxLength; ++len) kraft += static_cast<std::uint64_t>(count_[len]) << (kMaxLength - len);
  if (kraft > (std::uint64_t{1} << kMaxLength)) throw CorruptStream("Huffman lengths violate the Kraft inequality", 0);

  std::uint64_t code = 0;
  std::size_t pos = 0;
  for (int len = 1; len <= kMaxLength; ++len) {
    first_[len] = static_cast<std::uint32_t>(code);
    start_[len] = pos;
    code = (code + count_[len]) << 1;
    pos += count_[len];
  }
  codes_.resize(symbols_.size());
  for (std::size_t i = 0; i < symbols_.size(); ++i) {
    const auto len = symbols_[i].length;
    codes_[i] = first_[len] + static_cast<std::uint32_t>(i - start_[len]);
  }
}

std::uint8_t HuffmanTable::length_of(std::uint32_t symbol) const {
  auto it = index_.find(symbol);
  if (it == index_.end()) throw InputError("symbol " + std::to_string(symbol) + " is not in the Huffman table");
  return symbols_[it->second].length;
}

std::uint32_t HuffmanTable::code_of(std::uint32_t symbol) const {
  auto it = index_.find(symbol);
  if (it == index_.end()) throw InputError("symbol " + std::to_string(symbol) + " is not in the Huffman table");
  return codes_[it->second];
}

double HuffmanTable::kraft_sum() const {
  double k = 0.0;
  for (const auto& s : symbols_) k += std::ldexp(1.0, -s.length);
  return k;
}

namespace {

struct Node {
  std::uint64_t count;
  std::uint32_t min_symbol;
  int left = -1, right = -1;
};

std::vector<std::uint8_t> huffman_lengths(const std::vector<std::pair<std::uint32_t, std::uint64_t>>& items) {
  std::vector<Node> nodes;
  nodes.reserve(items.size() * 2);
  using Key = std::tuple<std::uint64_t, std::uint32_t, int>;
  std::priority_queue<Key, std::vector<Key>, std::greater<>> heap;
  for (const auto& [sym, cnt] : items) {
    nodes.push_back({cnt, sym});
    heap.emplace(cnt, sym, static_cast<int>(nodes.size() - 1));
  }
  while (heap.size() > 1) {
    auto [ca, sa, a] = heap.top();
    heap.pop();
    auto [cb, sb, b] = heap.top();
    heap.pop();
    nodes.push_back({ca + cb, std::min(sa, sb), a, b});
    heap.emplace(ca + cb, std::min(sa, sb), static_cast<int>(nodes.size() - 1));
  }
  std::vector<std::uint8_t> lengths(items.size(), 0);
  std::vector<std::pair<int, int>> stack{{static_cast<int>(nodes.size() - 1), 0}};
  while (!stack.empty()) {
    auto [n, depth] = stack.back();
    stack.pop_back();
    if (nodes[n].left < 0) {
      lengths[n] = static_cast<std::uint8_t>(std::min(depth, 255));
      continue;
    }
    stack.push_back({nodes[n].left, depth + 1});
    stack.push_back({nodes[n].right, depth + 1});
  }
  return lengths;
}

}  // namespace

HuffmanTable build_table(const Histogram& hist) {
  std::vector<std::pair<std::uint32_t, std::uint64_t>> items;
  for (const auto& [s, c] : hist)
    if (c > 0) items.emplace_back(s, c);
  if (items.empty()) throw InputError("cannot build a Huffman table from an empty histogram");
  if (items.size() == 1) return HuffmanTable({{items[0].first, 1}});
  for (;;) {
    const auto lengths = huffman_lengths(items);
    if (*std::max_element(lengths.begin(), lengths.end()) <= HuffmanTable::kMaxLength) {
      std::vector<HuffmanSymbol> syms;
      for (std::size_t i = 0; i < items.size(); ++i) syms.push_back({items[i].first, lengths[i]});
      return HuffmanTable(std::move(syms));
    }
    for (auto& [s, c] : items) c = (c + 1) / 2;
  }
}

BitPayload encode(std::span<const std::uint32_t> codes, const HuffmanTable& table) {
  BitPayload out;
  std::uint64_t acc = 0;
  int pending = 0;
  for (auto sym : codes) {
    const auto len = table.length_of(sym);
    acc = (acc << len) | table.code_of(sym);
    pending += len;
    out.bits += len;
    while (pending >= 8) {
      pending -= 8;
      out.bytes.push_back(static_cast<std::uint8_t>(acc >> pending));
    }
    acc &= (std::uint64_t{1} << pending) - 1;
  }
  if (pending > 0) out.bytes.push_back(static_cast<std::uint8_t>(acc << (8 - pending)));
  return out;
}

std::vector<std::uint32_t> decode(const BitPayload& payload, const HuffmanTable& table, std::size_t n) {
  if (payload.bytes.size() != (payload.bits + 7) / 8) throw CorruptStream("payload byte count does not match bit count", 0);
  std::vector<std::uint32_t> out;
  if (n == 0) {
    if (payload.bits != 0) throw CorruptStream("payload has bits beyond the last symbol", 0);
    return out;
  }
  if (table.empty()) throw CorruptStream("empty Huffman table for a non-empty payload", 0);
  out.reserve(n);
  std::uint64_t pos = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const std::uint64_t start = pos;
    std::uint32_t code = 0;
    const HuffmanSymbol* hit = nullptr;
    for (std::uint8_t len = 1; len <= table.max_length(); ++len) {
      if (pos >= payload.bits) throw CorruptStream("payload exhausted while decoding symbol " + std::to_string(i), pos);
      const int bit = (payload.bytes[pos >> 3] >> (7 - (pos & 7))) & 1;
      ++pos;
      code = (code << 1) | static_cast<std::uint32_t>(bit);
      if ((hit = table.match(code, len))) break;
    }
    if (!hit) throw CorruptStream("invalid Huffman prefix", start);
    out.push_back(hit->symbol);
  }
  if (pos != payload.bits) throw CorruptStream("payload has bits beyond the last symbol", pos);
  return out;
}

std::vector<std::uint8_t> serialize_table(const HuffmanTable& table) {
  ByteWriter w;
  w.put<std::uint32_t>(static_cast<std::uint32_t>(table.size()));
  for (const auto& s : table.symbols()) {
    w.put<std::uint32_t>(s.symbol);
    w.put<std::uint8_t>(s.length);
  }
  return w.take();
}

HuffmanTable deserialize_table(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes);
  const auto n = r.get<std::uint32_t>();
  if (r.remaining() != static_cast<std::size_t>(n) * 5) throw CorruptStream("Huffman table length mismatch", 4);
  std::vector<HuffmanSymbol> syms(n);
  for (auto& s : syms) {
    s.symbol = r.get<std::uint32_t>();
    s.length = r.get<std::uint8_t>();
  }
  return HuffmanTable(std::move(syms));
}

std::vector<std::uint8_t> pack_stream(const StreamParts& p) {
  ByteWriter anchors, outliers, payload;
  for (float a : p.anchors) anchors.put<float>(a);
  for (const auto& o : p.outliers) {
    outliers.put<std::uint64_t>(o.index);
    outliers.put<float>(o.value);
  }
  const auto table = serialize_table(p.table);
  payload.put<std::uint64_t>(p.payload.bits);
  payload.put_bytes(p.payload.bytes);

  ByteWriter w;
  w.put_tag("FLRZ");
  w.put<std::uint16_t>(kStreamVersion);
  w.put<std::uint16_t>(p.network.empty() ? 0 : kHasNetwork);
  w.put<std::uint32_t>(static_cast<std::uint32_t>(p.dims.nx));
  w.put<std::uint32_t>(static_cast<std::uint32_t>(p.dims.ny));
  w.put<std::uint32_t>(static_cast<std::uint32_t>(p.dims.nz));
  w.put<double>(p.eb_rel);
  w.put<double>(p.eb_abs);
  w.put<std::uint32_t>(p.block_size);
  w.put<std::uint32_t>(p.radius);
  w.put<std::uint8_t>(static_cast<std::uint8_t>(p.taps));
  for (int i = 0; i < 3; ++i) w.put<std::uint8_t>(0);
  w.put<std::uint64_t>(p.code_count);
  for (std::size_t len : {anchors.size(), outliers.size(), table.size(), payload.size(), p.network.size()})
    w.put<std::uint64_t>(len);
  w.put_bytes(anchors.buffer());
  w.put_bytes(outliers.buffer());
  w.put_bytes(table);
  w.put_bytes(payload.buffer());
  w.put_bytes(p.network);
  return w.take();
}

StreamParts unpack_stream(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes);
  const auto tag = r.get_bytes(4);
  if (!std::equal(tag.begin(), tag.end(), "FLRZ")) throw CorruptStream("bad stream magic", 0);
  if (const auto v = r.get<std::uint16_t>(); v != kStreamVersion)
    throw CorruptStream("unsupported stream version " + std::to_string(v), 4);
  const auto flags = r.get<std::uint16_t>();
  if (flags & ~kHasNetwork) throw CorruptStream("unknown stream flags", 6);
  StreamParts p;
  p.dims.nx = r.get<std::uint32_t>();
  p.dims.ny = r.get<std::uint32_t>();
  p.dims.nz = r.get<std::uint32_t>();
  if (p.dims.count() == 0) throw CorruptStream("zero volume dimension", 8);
  p.eb_rel = r.get<double>();
  p.eb_abs = r.get<double>();
  if (!std::isfinite(p.eb_abs) || p.eb_abs < 0.0) throw CorruptStream("bad absolute error bound", 28);
  p.block_size = r.get<std::uint32_t>();
  if (p.block_size < 2) throw CorruptStream("bad block size", 36);
  p.radius = r.get<std::uint32_t>();
  if (p.radius < 1 || p.radius > (1u << 30)) throw CorruptStream("bad quantizer radius", 40);
  const auto taps = r.get<std::uint8_t>();
  if (taps != static_cast<std::uint8_t>(TapSet::Cubic)) throw CorruptStream("unknown tap set", 44);
  p.taps = static_cast<TapSet>(taps);
  r.get_bytes(3);
  p.code_count = r.get<std::uint64_t>();
  std::array<std::uint64_t, 5> len{};
  for (auto& l : len) l = r.get<std::uint64_t>();
  std::uint64_t total = 0;
  for (auto l : len) {
    if (l > r.remaining()) throw CorruptStream("section length exceeds stream", r.offset());
    total += l;
  }
  if (total != r.remaining()) throw CorruptStream("section lengths do not cover the stream", r.offset());
  if (len[0] % 4 != 0) throw CorruptStream("anchor section length not a multiple of 4", r.offset());
  if (len[1] % 12 != 0) throw CorruptStream("outlier section length not a multiple of 12", r.offset());
  if (((flags & kHasNetwork) != 0) != (len[4] != 0)) throw CorruptStream("network flag disagrees with section", 6);

  ByteReader anchors(r.get_bytes(len[0]), r.offset());
  p.anchors.resize(len[0] / 4);
  for (auto& a : p.anchors) a = anchors.get<float>();

  ByteReader outliers(r.get_bytes(len[1]), r.offset());
  p.outliers.resize(len[1] / 12);
  for (auto& o : p.outliers) {
    o.index = outliers.get<std::uint64_t>();
    o.value = outliers.get<float>();
    if (o.index >= p.dims.count()) throw CorruptStream("outlier index out of range", outliers.offset() - 12);
  }

  const auto table_off = r.offset();
  try {
    p.table = deserialize_table(r.get_bytes(len[2]));
  } catch (const CorruptStream& e) {
    throw CorruptStream(std::string("bad Huffman table: ") + e.what(), table_off);
  }

  ByteReader payload(r.get_bytes(len[3]), r.offset());
  p.payload.bits = payload.get<std::uint64_t>();
  if (payload.remaining() != (p.payload.bits + 7) / 8)
    throw CorruptStream("payload byte count does not match bit count", payload.offset());
  const auto body = payload.get_bytes(payload.remaining());
  p.payload.bytes.assign(body.begin(), body.end());

  const auto net = r.get_bytes(len[4]);
  p.network.assign(net.begin(), net.end());
  return p;
}

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed for " + path.string());
}

}  // namespace flare
