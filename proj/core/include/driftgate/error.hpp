#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>

namespace driftgate {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Caller supplied data that violates a precondition (dimension mismatch,
/// non-finite entries, out-of-order frames, bad configuration values).
class InputError : public Error {
 public:
  using Error::Error;
};

/// A file that does not conform to one of the on-disk formats.
class FormatError : public Error {
 public:
  enum class Kind {
    BadMagic,
    BadVersion,
    Truncated,
    DimensionMismatch,
    MetadataMismatch,
    Malformed,
  };

  FormatError(Kind kind, const std::string& what) : Error(what), kind_(kind) {}

  Kind kind() const noexcept { return kind_; }

 private:
  Kind kind_;
};

/// The model of normal cannot be factorized: zero trace, or a covariance
/// that is not positive definite after shrinkage.
class DegenerateModelError : public Error {
 public:
  DegenerateModelError(const std::string& what, std::uint64_t version)
      : Error(what), version_(version) {}

  std::uint64_t version() const noexcept { return version_; }

 private:
  std::uint64_t version_;
};

/// Filesystem failure. When raised from a streaming run, carries the index of
/// the last frame that was fully processed.
class IoError : public Error {
 public:
  explicit IoError(const std::string& what,
                   std::optional<std::uint64_t> last_frame = std::nullopt)
      : Error(what), last_frame_(last_frame) {}

  std::optional<std::uint64_t> last_completed_frame() const noexcept {
    return last_frame_;
  }

 private:
  std::optional<std::uint64_t> last_frame_;
};

}  // namespace driftgate
