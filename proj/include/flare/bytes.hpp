#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <span>
#include <string>
#include <type_traits>
#include <vector>

#include "flare/error.hpp"

namespace flare {

template <typename T>
constexpr T byteswap(T v) {
  static_assert(std::is_integral_v<T>);
  std::make_unsigned_t<T> u = static_cast<std::make_unsigned_t<T>>(v), r = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    r = static_cast<decltype(r)>((r << 8) | (u & 0xFF));
    u = static_cast<decltype(u)>(u >> 8);
  }
  return static_cast<T>(r);
}

inline float byteswap(float v) { return std::bit_cast<float>(byteswap(std::bit_cast<std::uint32_t>(v))); }
inline double byteswap(double v) { return std::bit_cast<double>(byteswap(std::bit_cast<std::uint64_t>(v))); }

// Appends little-endian scalars to a byte buffer.
class ByteWriter {
 public:
  template <typename T>
  void put(T v) {
    if constexpr (std::endian::native == std::endian::big) v = byteswap(v);
    const auto* p = reinterpret_cast<const std::uint8_t*>(&v);
    buf_.insert(buf_.end(), p, p + sizeof(T));
  }
  void put_bytes(std::span<const std::uint8_t> bytes) { buf_.insert(buf_.end(), bytes.begin(), bytes.end()); }
  void put_tag(const char (&tag)[5]) { buf_.insert(buf_.end(), tag, tag + 4); }

  std::size_t size() const { return buf_.size(); }
  std::vector<std::uint8_t>& buffer() { return buf_; }
  std::vector<std::uint8_t> take() { return std::move(buf_); }

 private:
  std::vector<std::uint8_t> buf_;
};

// Bounds-checked little-endian reader; overruns raise CorruptStream with
// the byte offset of the failed read.
class ByteReader {
 public:
  explicit ByteReader(std::span<const std::uint8_t> data, std::size_t base = 0) : data_(data), base_(base) {}

  template <typename T>
  T get() {
    need(sizeof(T));
    T v;
    std::memcpy(&v, data_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    if constexpr (std::endian::native == std::endian::big) v = byteswap(v);
    return v;
  }
  std::span<const std::uint8_t> get_bytes(std::size_t n) {
    need(n);
    auto s = data_.subspan(pos_, n);
    pos_ += n;
    return s;
  }
  std::size_t pos() const { return pos_; }
  std::size_t remaining() const { return data_.size() - pos_; }
  std::size_t offset() const { return base_ + pos_; }

 private:
  void need(std::size_t n) const {
    if (n > data_.size() - pos_) throw CorruptStream("unexpected end of data", base_ + pos_);
  }
  std::span<const std::uint8_t> data_;
  std::size_t base_;
  std::size_t pos_ = 0;
};

}  // namespace flare
