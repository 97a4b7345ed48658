// Copyright (c) 2026 The LADD Workbench Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>

namespace ladd {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Operand extents disagree with what an op or architecture expects.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// Requested differentiation order is not supported by some op on the path.
class CapabilityError : public Error {
 public:
  using Error::Error;
};

/// Malformed on-disk data (dataset batches, IDX files, checkpoints).
class FormatError : public Error {
 public:
  using Error::Error;
};

/// Archive contents disagree with their manifest or violate dataset invariants.
class IntegrityError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Non-finite loss, divergence, degenerate denominators.
class NumericalError : public Error {
 public:
  using Error::Error;
};

class IndexError : public Error {
 public:
  using Error::Error;
};

class MissingInputError : public Error {
 public:
  using Error::Error;
};

}  // namespace ladd
