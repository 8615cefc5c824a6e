#pragma once

#include <stdexcept>
#include <string>

namespace sgmi {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Tensor shapes do not conform for an operation.
class DimensionError : public Error {
 public:
  using Error::Error;
};

class IndexError : public Error {
 public:
  using Error::Error;
};

// A documented precondition was violated by the caller.
class ContractError : public Error {
 public:
  using Error::Error;
};

class LoadError : public Error {
 public:
  using Error::Error;
};

// Input files are readable but internally inconsistent.
class IntegrityError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

// Training produced a non-finite value.
class NumericalError : public Error {
 public:
  using Error::Error;
};

}  // namespace sgmi
