// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>

namespace livlr {

// Root of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Operand extents do not agree with an operation's contract.
class ShapeError : public Error {
 public:
  using Error::Error;
};

// A precondition on values (not shapes) was violated.
class ContractError : public Error {
 public:
  using Error::Error;
};

// Structural inconsistency in an input graph or parse.
class IntegrityError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class DataError : public Error {
 public:
  using Error::Error;
};

// Non-finite values surfaced during training or checking.
class NumericError : public Error {
 public:
  using Error::Error;
};

class CheckpointError : public Error {
 public:
  enum class Kind { kIo, kBadMagic, kBadVersion, kTruncated, kShapeMismatch, kMissingTensor, kUnknownTensor };

  CheckpointError(Kind kind, const std::string& what) : Error(what), kind_(kind) {}
  Kind kind() const noexcept { return kind_; }

 private:
  Kind kind_;
};

}  // namespace livlr
