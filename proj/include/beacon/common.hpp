#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>

namespace beacon {

/// Number of modulation classes. The class index order is fixed for the
/// lifetime of every model and dataset.
inline constexpr std::size_t kNumClasses = 10;

/// Softmax output of a classifier head, indexed by class.
using ProbVector = std::array<double, kNumClasses>;

/// The random engine used everywhere a seeded stream is needed.
using Rng = std::mt19937_64;

/// Process exit codes reported by the CLI, one per failure category.
enum class ErrorCategory : int {
  usage = 2,
  io = 3,
  format = 4,
  numeric = 5,
  precondition = 6,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorCategory category, const std::string& what)
      : std::runtime_error(what), category_(category) {}
  ErrorCategory category() const noexcept { return category_; }

 private:
  ErrorCategory category_;
};

class UsageError : public Error {
 public:
  explicit UsageError(const std::string& what) : Error(ErrorCategory::usage, what) {}
};

class IoError : public Error {
 public:
  explicit IoError(const std::string& what) : Error(ErrorCategory::io, what) {}
};

/// Wrong magic bytes, unsupported version or an out-of-range field.
class FormatError : public Error {
 public:
  explicit FormatError(const std::string& what) : Error(ErrorCategory::format, what) {}
};

class TruncatedError : public Error {
 public:
  explicit TruncatedError(const std::string& what) : Error(ErrorCategory::format, what) {}
};

class ChecksumError : public Error {
 public:
  explicit ChecksumError(const std::string& what) : Error(ErrorCategory::format, what) {}
};

class NumericError : public Error {
 public:
  explicit NumericError(const std::string& what) : Error(ErrorCategory::numeric, what) {}
};

class PreconditionError : public Error {
 public:
  explicit PreconditionError(const std::string& what)
      : Error(ErrorCategory::precondition, what) {}
};

class DimensionError : public PreconditionError {
 public:
  explicit DimensionError(const std::string& what) : PreconditionError(what) {}
};

/// SplitMix64 finalizer. Derives an independent stream seed from a base seed
/// and a stream index: derive_seed(s, i) = mix(s + (i + 1) * 0x9E3779B97F4A7C15).
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) noexcept;

/// Uniform real in [lo, hi) built from the raw 53 high bits of the engine.
double uniform(Rng& rng, double lo, double hi);

/// Standard normal deviate.
double gaussian(Rng& rng);

/// Uniform integer in [0, n).
std::size_t uniform_index(Rng& rng, std::size_t n);

/// CRC-32 (IEEE, zlib polynomial) over a byte range.
std::uint32_t crc32(std::span<const std::uint8_t> bytes, std::uint32_t seed = 0);

/// Argmax with ties broken by the lowest index.
std::size_t argmax(std::span<const double> values);

std::string hex32(std::uint32_t value);

}  // namespace beacon
