// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>

namespace ocs {

/// Base class for all engine errors.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Tensor or layer shape inconsistency; message names the offending node.
struct ShapeError : Error {
  using Error::Error;
};

/// Invalid architecture description (cycle, unknown kind, bad attribute).
struct GraphError : Error {
  using Error::Error;
};

/// Channel-coupling pattern the dependency analysis cannot handle.
struct GroupingError : Error {
  using Error::Error;
};

/// Partition target unreachable, e.g. per-group floors bind.
struct PartitionError : Error {
  using Error::Error;
};

/// Non-finite value encountered during training.
struct NumericError : Error {
  using Error::Error;
};

/// Malformed config, dataset or checkpoint file.
struct IoError : Error {
  using Error::Error;
};

}  // namespace ocs
