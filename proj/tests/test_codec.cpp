#include <algorithm>
#include <cmath>
#include <filesystem>

#include "doctest.h"
#include "flare/bytes.hpp"
#include "flare/codec.hpp"
#include "flare/error.hpp"
#include "support.hpp"

using namespace flare;

namespace {

std::vector<std::uint32_t> random_codes(testing::Rng& rng, std::size_t n, std::uint32_t alphabet, double skew) {
  std::vector<std::uint32_t> out(n);
  for (auto& c : out) {
    const double u = rng.uniform(0.0, 1.0);
    c = static_cast<std::uint32_t>(std::pow(u, skew) * alphabet) + 100;
  }
  return out;
}

StreamParts sample_parts(testing::Rng& rng) {
  StreamParts p;
  p.dims = {5, 6, 7};
  p.eb_rel = 1e-3;
  p.eb_abs = 0.0123;
  p.block_size = 4;
  p.radius = 16;
  p.anchors = {1.5f, -2.0f, 3.25f};
  p.outliers = {{3, 9.5f}, {17, -4.0f}};
  std::vector<std::uint32_t> codes = random_codes(rng, 200, 12, 3.0);
  codes[10] = 0;
  p.code_count = codes.size();
  p.table = build_table(histogram(codes));
  p.payload = encode(codes, p.table);
  p.network = {1, 2, 3, 4, 5};
  return p;
}

}  // namespace

TEST_CASE("huffman code lengths") {
  const auto t = build_table({{'a', 1}, {'b', 1}, {'c', 2}});
  CHECK(t.length_of('a') == 2);
  CHECK(t.length_of('b') == 2);
  CHECK(t.length_of('c') == 1);
  CHECK(t.code_of('c') == 0b0);
  CHECK(t.code_of('a') == 0b10);
  CHECK(t.code_of('b') == 0b11);

  Histogram uniform;
  for (std::uint32_t s = 0; s < 256; ++s) uniform[s * 3] = 7;
  const auto u = build_table(uniform);
  CHECK(u.size() == 256);
  for (const auto& s : u.symbols()) CHECK(s.length == 8);
  CHECK(u.kraft_sum() == 1.0);

  const auto one = build_table({{42, 1000}});
  CHECK(one.length_of(42) == 1);
  CHECK(one.code_of(42) == 0);

  CHECK_THROWS_AS(build_table({}), InputError);
  CHECK_THROWS_AS(one.code_of(7), InputError);
}

TEST_CASE("huffman length limit") {
  // Fibonacci counts drive textbook Huffman past 32 bits.
  Histogram fib;
  std::uint64_t a = 1, b = 1;
  for (std::uint32_t s = 0; s < 40; ++s) {
    fib[s] = a;
    const auto c = a + b;
    a = b;
    b = c;
  }
  const auto t = build_table(fib);
  CHECK(t.max_length() <= HuffmanTable::kMaxLength);
  CHECK(t.kraft_sum() <= 1.0);
  std::vector<std::uint32_t> codes;
  for (std::uint32_t s = 0; s < 40; ++s) codes.push_back(s);
  CHECK(decode(encode(codes, t), t, codes.size()) == codes);
}

TEST_CASE("huffman table validation") {
  CHECK_THROWS_AS(HuffmanTable({{1, 0}}), CorruptStream);
  CHECK_THROWS_AS(HuffmanTable({{1, 33}}), CorruptStream);
  CHECK_THROWS_AS(HuffmanTable({{1, 1}, {1, 2}}), CorruptStream);
  CHECK_THROWS_AS(HuffmanTable({{1, 1}, {2, 1}, {3, 1}}), CorruptStream);
  CHECK_NOTHROW(HuffmanTable({{1, 1}, {2, 2}}));
}

TEST_CASE("encode and decode") {
  const auto t = build_table({{'a', 1}, {'b', 1}, {'c', 2}});
  const auto empty = encode({}, t);
  CHECK(empty.bits == 0);
  CHECK(empty.bytes.empty());
  CHECK(decode(empty, t, 0).empty());

  const std::vector<std::uint32_t> seq{'c', 'a', 'b', 'c', 'c', 'b'};
  const auto p = encode(seq, t);
  CHECK(p.bits == 1 + 2 + 2 + 1 + 1 + 2);
  // 0 10 11 0 0 11 -> 0101 1001 1(000 0000)
  REQUIRE(p.bytes.size() == 2);
  CHECK(p.bytes[0] == 0x59);
  CHECK(p.bytes[1] == 0x80);
  CHECK(decode(p, t, seq.size()) == seq);

  const std::vector<std::uint32_t> bad{'a', 'z'};
  CHECK_THROWS_AS(encode(bad, t), InputError);

  const auto one = build_table({{5, 10}});
  const std::vector<std::uint32_t> flat(1000, 5);
  CHECK(encode(flat, one).bits == 1000);
}

TEST_CASE("decode errors carry the bit offset") {
  const auto t = build_table({{'a', 1}, {'b', 1}, {'c', 2}});
  const std::vector<std::uint32_t> seq{'a', 'b', 'c', 'a'};
  auto p = encode(seq, t);
  REQUIRE(p.bits == 7);

  auto cut = p;
  cut.bits = 5;
  try {
    decode(cut, t, seq.size());
    FAIL("expected CorruptStream");
  } catch (const CorruptStream& e) {
    CHECK(e.offset() == 5);
  }

  CHECK_THROWS_AS(decode(p, t, 3), CorruptStream);
  CHECK_THROWS_AS(decode(p, t, 5), CorruptStream);

  // 1, 2 and 3 bit codes leave 111 unassigned.
  const HuffmanTable partial({{1, 1}, {2, 2}, {3, 3}});
  BitPayload junk{{0xE0}, 3};
  try {
    decode(junk, partial, 1);
    FAIL("expected CorruptStream");
  } catch (const CorruptStream& e) {
    CHECK(e.offset() == 0);
  }
}

TEST_CASE("round trip fuzz") {
  testing::Rng rng(21);
  for (int trial = 0; trial < 10000; ++trial) {
    const std::size_t n = 1 + rng.below(64);
    const auto codes = random_codes(rng, n, 1 + static_cast<std::uint32_t>(rng.below(300)), rng.uniform(0.5, 6.0));
    const auto t = build_table(histogram(codes));
    const auto p = encode(codes, t);
    REQUIRE(decode(p, t, n) == codes);
  }
}

TEST_CASE("payload size within entropy bounds") {
  testing::Rng rng(22);
  for (int trial = 0; trial < 20; ++trial) {
    const auto codes = random_codes(rng, 5000 + rng.below(5000), 2 + static_cast<std::uint32_t>(rng.below(500)),
                                    rng.uniform(1.0, 8.0));
    const auto hist = histogram(codes);
    const auto t = build_table(hist);
    const double h = entropy(hist);
    const double n = static_cast<double>(codes.size());
    const auto bits = static_cast<double>(encode(codes, t).bits);
    CHECK(bits >= h * n - 1e-6);
    CHECK(bits <= (h + 1.0) * n);
  }
}

TEST_CASE("canonical determinism") {
  testing::Rng rng(23);
  const auto codes = random_codes(rng, 3000, 60, 2.0);
  auto shuffled = codes;
  std::reverse(shuffled.begin(), shuffled.end());
  const auto a = serialize_table(build_table(histogram(codes)));
  const auto b = serialize_table(build_table(histogram(shuffled)));
  CHECK(a == b);
  CHECK(deserialize_table(a) == build_table(histogram(codes)));
  CHECK(serialize_table(deserialize_table(a)) == a);

  auto bad = a;
  bad.pop_back();
  CHECK_THROWS_AS(deserialize_table(bad), CorruptStream);
}

TEST_CASE("container round trip") {
  testing::Rng rng(24);
  const auto parts = sample_parts(rng);
  const auto bytes = pack_stream(parts);
  CHECK(std::equal(bytes.begin(), bytes.begin() + 4, "FLRZ"));
  CHECK(unpack_stream(bytes) == parts);
  CHECK(pack_stream(unpack_stream(bytes)) == bytes);

  auto bare = parts;
  bare.network.clear();
  CHECK(unpack_stream(pack_stream(bare)) == bare);

  const auto path = std::filesystem::temp_directory_path() / "flare_codec_test.flrz";
  write_file(path, bytes);
  CHECK(read_file(path) == bytes);
  std::filesystem::remove(path);
  CHECK_THROWS_AS(read_file(path), IoError);
}

TEST_CASE("container rejects damage") {
  testing::Rng rng(25);
  const auto parts = sample_parts(rng);
  const auto bytes = pack_stream(parts);

  auto magic = bytes;
  magic[0] = 'X';
  CHECK_THROWS_AS(unpack_stream(magic), CorruptStream);

  auto version = bytes;
  version[4] = 2;
  CHECK_THROWS_AS(unpack_stream(version), CorruptStream);

  for (std::size_t cut : {std::size_t{0}, std::size_t{10}, std::size_t{60}, bytes.size() - 1})
    CHECK_THROWS_AS(unpack_stream(std::span(bytes).first(cut)), CorruptStream);

  auto extra = bytes;
  extra.push_back(0);
  CHECK_THROWS_AS(unpack_stream(extra), CorruptStream);

  // Anchor section length that is not a multiple of 4.
  auto section = bytes;
  section[56] += 1;
  CHECK_THROWS_AS(unpack_stream(section), CorruptStream);

  // Outlier index past the end of the volume.
  auto far = parts;
  far.outliers.push_back({far.dims.count(), 1.0f});
  CHECK_THROWS_AS(unpack_stream(pack_stream(far)), CorruptStream);
}
