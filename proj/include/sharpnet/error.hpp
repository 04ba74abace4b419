#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace sharpnet {

class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Shape or rank mismatch between tensors / layers.
class DimensionError : public Error {
public:
  using Error::Error;
};

/// Semantically invalid values (bad labels, mismatched counts, bad arguments).
class ValidationError : public Error {
public:
  using Error::Error;
};

/// Operation invoked in the wrong order (e.g. backward without forward).
class StateError : public Error {
public:
  using Error::Error;
};

/// Non-finite values where finite ones are required.
class NumericError : public Error {
public:
  using Error::Error;
};

/// Malformed or truncated file contents.
class FormatError : public Error {
public:
  using Error::Error;
};

/// Network layout unsuitable for a transformation (folding, export).
class StructureError : public Error {
public:
  using Error::Error;
};

/// Attempt to lower a layer's sharpness.
class MonotonicityError : public Error {
public:
  using Error::Error;
};

/// Export requested while some spiking layers are still soft.
class NotFullySharpenedError : public StructureError {
public:
  NotFullySharpenedError(std::string msg, std::vector<int> layers)
      : StructureError(std::move(msg)), offending_layers(std::move(layers)) {}
  std::vector<int> offending_layers;
};

} // namespace sharpnet
