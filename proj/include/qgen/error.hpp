#pragma once

#include <stdexcept>
#include <string>

namespace qgen {

// Shape or dimension disagreement between operands.
struct ShapeError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// A lookup index fell outside the addressed extent.
struct IndexError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// A normalization was asked to run over a slice with no unmasked entries.
struct MaskError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// An operation contract was violated (non-scalar loss, misaligned corpora, ...).
struct ContractError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// An input file could not be parsed; the message carries the line number.
struct ParseError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// A record parsed cleanly but violates a data invariant.
struct ValidationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Bad run configuration: missing paths, out-of-range values.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Checkpoint file does not match the model it is loaded into.
struct CheckpointError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace qgen
