#pragma once

#include <stdexcept>
#include <string>

namespace deus {

// Base of every toolkit error. Subclasses map 1:1 onto CLI exit-code
// categories (see tools/cli.cpp).
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Dimension or index violations (matrix shapes, layer indices, config
// consistency).
class ShapeError : public Error {
 public:
  explicit ShapeError(const std::string& msg) : Error(msg) {}
};

// Archive / token-file parsing and content faults.
class FormatError : public Error {
 public:
  enum class Fault {
    BadMagic,
    BadHeader,
    Truncated,
    NonFinite,
    BadShape,
    DuplicateName,
    MissingTensor,
    UnexpectedTensor,
    EmptyArchive,
    BadTokenFile,
    TokenOutOfRange,
  };

  FormatError(Fault fault, const std::string& msg) : Error(msg), fault_(fault) {}
  Fault fault() const { return fault_; }

 private:
  Fault fault_;
};

// Filesystem failures (open/stat/rename).
class IoError : public Error {
 public:
  explicit IoError(const std::string& msg) : Error(msg) {}
};

// Expansion planning violations (bad ratio, incompatible group arithmetic,
// unimplemented method stubs).
class PlanError : public Error {
 public:
  explicit PlanError(const std::string& msg) : Error(msg) {}
};

// Optimal-transport solver failures (bad epsilon, kernel underflow,
// non-permutation hardening).
class SolverError : public Error {
 public:
  explicit SolverError(const std::string& msg) : Error(msg) {}
};

}  // namespace deus
