// Copyright (c) 2026 the imc authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>

namespace imc {

/// Base class for all errors thrown by this library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Dimension or shape mismatch between operands.
class InvalidShapeError : public Error {
 public:
  using Error::Error;
};

/// Input that is formally valid but numerically unusable, e.g. a zero-norm
/// vector fed to a normalization or cosine.
class DegenerateInputError : public Error {
 public:
  using Error::Error;
};

/// NaN or infinity found where a finite value is required.
class NonFiniteError : public Error {
 public:
  using Error::Error;
};

/// Mini-batch too small to form a single negative pair.
class InsufficientBatchError : public Error {
 public:
  using Error::Error;
};

/// Invalid configuration values (bad thresholds, negative weights, ...).
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// File format, parsing, or integrity problems in stored data.
class DataError : public Error {
 public:
  using Error::Error;
};

/// Runtime numerical failure: divergence, non-finite loss or gradient.
class NumericalError : public Error {
 public:
  using Error::Error;
};

}  // namespace imc
