#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace mrecon {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidArgument : public Error {
 public:
  using Error::Error;
};

class DimensionMismatch : public Error {
 public:
  using Error::Error;
};

/// Input is geometrically or numerically degenerate (constant maps,
/// rank-deficient matrices, collinear correspondences, empty overlaps).
class DegenerateInput : public Error {
 public:
  using Error::Error;
};

class NonDifferentiable : public Error {
 public:
  using Error::Error;
};

class ConvergenceError : public Error {
 public:
  using Error::Error;
};

class JointLimitViolation : public Error {
 public:
  using Error::Error;
};

// File format errors.

class FormatError : public Error {
 public:
  using Error::Error;
};

class BadMagic : public FormatError {
 public:
  explicit BadMagic(const std::string& path)
      : FormatError("bad magic in raster file: " + path) {}
};

class MalformedHeader : public FormatError {
 public:
  using FormatError::FormatError;
};

class TruncatedFile : public FormatError {
 public:
  TruncatedFile(const std::string& path, std::uint64_t offset, std::uint64_t expected)
      : FormatError("truncated file " + path + ": data ends at byte offset " +
                    std::to_string(offset) + ", expected " + std::to_string(expected) +
                    " bytes"),
        offset_(offset) {}
  std::uint64_t offset() const { return offset_; }

 private:
  std::uint64_t offset_;
};

class MissingFile : public FormatError {
 public:
  explicit MissingFile(const std::string& path)
      : FormatError("missing file: " + path), path_(path) {}
  const std::string& path() const { return path_; }

 private:
  std::string path_;
};

class VersionMismatch : public FormatError {
 public:
  using FormatError::FormatError;
};

}  // namespace mrecon
