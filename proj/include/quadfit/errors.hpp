#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

#include "quadfit/geometry.hpp"

namespace quadfit {

// Base class of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Input data violates a documented invariant (mesh, config, constraints).
class ValidationError : public Error {
 public:
  using Error::Error;
};

// Mesh connectivity cannot support the requested operation.
class TopologyError : public Error {
 public:
  using Error::Error;
};

// Degenerate geometry (zero-area triangle, zero-length edge, ...).
class GeometryError : public Error {
 public:
  using Error::Error;
};

// Nearest-neighbour query against an empty set.
class QueryError : public Error {
 public:
  using Error::Error;
};

// Array lengths disagree.
class ShapeError : public Error {
 public:
  using Error::Error;
};

// Missing or inconsistent configuration.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Two meshes expected to share topology do not.
class CorrespondenceError : public Error {
 public:
  using Error::Error;
};

// A file could not be opened, read or written.
class IoError : public Error {
 public:
  using Error::Error;
};

class ParseError : public Error {
 public:
  ParseError(const std::string& source, std::size_t line, const std::string& what)
      : Error(source + ":" + std::to_string(line) + ": " + what), line_(line) {}

  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

// The affine least-squares system is rank deficient. `directions` spans the
// unconstrained subspace of the (centred) source coordinates.
class DegenerateConstraintError : public Error {
 public:
  DegenerateConstraintError(const std::string& what, std::vector<Vec3> directions)
      : Error(what), directions_(std::move(directions)) {}

  const std::vector<Vec3>& directions() const { return directions_; }

 private:
  std::vector<Vec3> directions_;
};

// Optimizer produced a non-finite loss. Carries the last finite state.
class DivergenceError : public Error {
 public:
  DivergenceError(const std::string& what, int iteration, std::vector<Vec3> last_state)
      : Error(what), iteration_(iteration), last_state_(std::move(last_state)) {}

  int iteration() const { return iteration_; }
  const std::vector<Vec3>& last_state() const { return last_state_; }

 private:
  int iteration_;
  std::vector<Vec3> last_state_;
};

}  // namespace quadfit
