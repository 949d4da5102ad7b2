#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace protobank {

// Base of every error thrown by the library. The CLI maps ValidationError to
// exit code 1 and IoError to exit code 2; nothing else escapes on purpose.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Bad arguments, violated invariants, inconsistent inputs.
class ValidationError : public Error {
 public:
  using Error::Error;
};

// Structural file problems: unreadable, wrong magic, short payload.
class IoError : public Error {
 public:
  using Error::Error;
};

class ZeroNormRow : public ValidationError {
 public:
  explicit ZeroNormRow(std::size_t row, const std::string& where = "")
      : ValidationError("ZeroNormRow: row " + std::to_string(row) +
                        (where.empty() ? "" : " of " + where) +
                        " has norm <= 1e-12"),
        row_(row) {}
  std::size_t row() const { return row_; }

 private:
  std::size_t row_;
};

class DimensionMismatch : public ValidationError {
 public:
  DimensionMismatch(std::size_t got, std::size_t want)
      : ValidationError("DimensionMismatch: got dim " + std::to_string(got) +
                        ", expected " + std::to_string(want)) {}
  explicit DimensionMismatch(const std::string& what) : ValidationError(what) {}
};

class EmptyClass : public ValidationError {
 public:
  explicit EmptyClass(long long cls)
      : ValidationError("EmptyClass: class " + std::to_string(cls) + " has no members") {}
};

class LabelOutOfRange : public ValidationError {
 public:
  LabelOutOfRange(long long label, long long class_count)
      : ValidationError("LabelOutOfRange: label " + std::to_string(label) +
                        " not in [0, " + std::to_string(class_count) + ")") {}
};

class NonFiniteInput : public ValidationError {
 public:
  explicit NonFiniteInput(const std::string& where)
      : ValidationError("NonFiniteInput: " + where) {}
};

class SingleClass : public ValidationError {
 public:
  explicit SingleClass(const std::string& what =
                           "SingleClass: operation needs at least 2 classes")
      : ValidationError(what) {}
};

class EmptyReference : public ValidationError {
 public:
  EmptyReference() : ValidationError("EmptyReference: reference set has no classes") {}
};

class TrackerUninitialized : public ValidationError {
 public:
  TrackerUninitialized()
      : ValidationError("TrackerUninitialized: sigma tracker has no update yet") {}
};

class EmptyPartition : public ValidationError {
 public:
  explicit EmptyPartition(const std::string& which)
      : ValidationError("EmptyPartition: " + which + " partition is empty") {}
};

class LengthMismatch : public ValidationError {
 public:
  LengthMismatch(const std::string& what, std::size_t got, std::size_t want)
      : ValidationError("LengthMismatch: " + what + " has length " + std::to_string(got) +
                        ", expected " + std::to_string(want)) {}
};

class ConfigInvalid : public ValidationError {
 public:
  explicit ConfigInvalid(const std::string& what) : ValidationError("ConfigInvalid: " + what) {}
};

class BadMagic : public IoError {
 public:
  BadMagic(const std::string& path, const std::string& want)
      : IoError("BadMagic: " + path + " does not start with '" + want + "'") {}
};

class TruncatedPayload : public IoError {
 public:
  TruncatedPayload(const std::string& path, std::size_t want_bytes, std::size_t got_bytes)
      : IoError("TruncatedPayload: " + path + " needs " + std::to_string(want_bytes) +
                " payload bytes, found " + std::to_string(got_bytes)) {}
};

class LabelCountMismatch : public IoError {
 public:
  LabelCountMismatch(const std::string& path, std::size_t labels, std::size_t rows)
      : IoError("LabelCountMismatch: " + path + " has " + std::to_string(labels) +
                " labels for " + std::to_string(rows) + " embedding rows") {}
};

}  // namespace protobank
