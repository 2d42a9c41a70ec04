#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace flare {

// Base for every error raised by the library. The CLI maps the concrete
// subclasses onto its exit-code contract.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Wrong shapes, sizes, or parameter ranges.
class DimensionError : public Error {
 public:
  using Error::Error;
};

// Input data the pipeline refuses to process (non-finite values, bad config).
class InputError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

// Malformed compressed stream. `offset` is a bit offset for Huffman payload
// errors and a byte offset for container errors.
class CorruptStream : public Error {
 public:
  CorruptStream(const std::string& what, std::uint64_t offset)
      : Error(what + " (offset " + std::to_string(offset) + ")"), offset_(offset) {}
  std::uint64_t offset() const noexcept { return offset_; }

 private:
  std::uint64_t offset_;
};

// Code stream ends before every point of the volume has been decoded.
class TruncatedStream : public Error {
 public:
  explicit TruncatedStream(std::uint64_t first_missing)
      : Error("code stream truncated; first missing code index " + std::to_string(first_missing)),
        first_missing_(first_missing) {}
  std::uint64_t first_missing() const noexcept { return first_missing_; }

 private:
  std::uint64_t first_missing_;
};

// Numerical failure during training (non-finite loss).
class TrainingError : public Error {
 public:
  using Error::Error;
};

// Simulator could not make progress, or was handed an inconsistent trace.
class SimulationError : public Error {
 public:
  using Error::Error;
};

}  // namespace flare
