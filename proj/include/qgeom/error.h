#pragma once

#include <stdexcept>
#include <string>

namespace qgeom {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ParseError : Error {
  ParseError(const std::string& file, long line, const std::string& what)
      : Error(file + ":" + std::to_string(line) + ": " + what),
        line_number(line) {}
  long line_number;
};

struct UnsupportedFormat : Error {
  using Error::Error;
};

struct IoError : Error {
  using Error::Error;
};

struct DegenerateGeometry : Error {
  using Error::Error;
};

struct DegenerateFace : Error {
  using Error::Error;
};

struct IsolatedVertex : Error {
  using Error::Error;
};

struct EmptyInput : Error {
  using Error::Error;
};

struct SizeMismatch : Error {
  using Error::Error;
};

struct EmptyNeighborhood : Error {
  using Error::Error;
};

struct NoCandidateTriangles : Error {
  using Error::Error;
};

struct TargetTooSmall : Error {
  using Error::Error;
};

// Raised when an optimization step produces a NaN/Inf loss. Carries the step
// at which the run aborted and which loss component went non-finite.
struct NonFiniteLoss : Error {
  NonFiniteLoss(long at_step, const std::string& comp)
      : Error("non-finite loss at step " + std::to_string(at_step) +
              " in component '" + comp + "'"),
        step(at_step),
        component(comp) {}
  long step;
  std::string component;
};

}  // namespace qgeom
