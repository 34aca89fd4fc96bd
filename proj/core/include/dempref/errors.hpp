#pragma once

#include <stdexcept>
#include <string>

namespace dempref {

// Base of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class OutOfBounds : public Error {
 public:
  using Error::Error;
};

class NonFinite : public Error {
 public:
  using Error::Error;
};

class DimensionMismatch : public Error {
 public:
  using Error::Error;
};

class InvalidArgument : public Error {
 public:
  using Error::Error;
};

class EmptyEvidence : public Error {
 public:
  using Error::Error;
};

class IndexOutOfRange : public Error {
 public:
  using Error::Error;
};

class SamplerDiverged : public Error {
 public:
  using Error::Error;
};

class EmptyBelief : public Error {
 public:
  using Error::Error;
};

class TooManyOptions : public Error {
 public:
  using Error::Error;
};

class OptimizerFailed : public Error {
 public:
  using Error::Error;
};

class ZeroTrueVector : public Error {
 public:
  using Error::Error;
};

class ResponderTimeout : public Error {
 public:
  using Error::Error;
};

class UnknownDomain : public Error {
 public:
  using Error::Error;
};

// Raised by rollout when a substep fails; carries the offending substep.
class RolloutError : public Error {
 public:
  RolloutError(int substep, const std::string& what)
      : Error("substep " + std::to_string(substep) + ": " + what),
        substep_(substep) {}
  int substep() const { return substep_; }

 private:
  int substep_;
};

}  // namespace dempref
