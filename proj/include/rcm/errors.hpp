#pragma once

#include <stdexcept>
#include <string>

namespace rcm {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Invalid construction parameter; `field()` names the offending field.
class ParameterError : public Error {
public:
  ParameterError(std::string field, const std::string& what)
      : Error(field + ": " + what), field_(std::move(field)) {}
  const std::string& field() const noexcept { return field_; }

private:
  std::string field_;
};

/// A requested structure does not fit into the lattice.
class GeometryError : public Error {
public:
  using Error::Error;
};

/// A kernel operation was invoked at a vertex with zero total conductance.
class DegenerateVertexError : public Error {
public:
  explicit DegenerateVertexError(std::size_t vertex)
      : Error("degenerate vertex " + std::to_string(vertex) + " (pi = 0)"), vertex_(vertex) {}
  std::size_t vertex() const noexcept { return vertex_; }

private:
  std::size_t vertex_;
};

/// Malformed or truncated serialized data.
class FormatError : public Error {
public:
  using Error::Error;
};

/// Iterative solver hit its iteration cap; carries the final residual.
class SolverError : public Error {
public:
  SolverError(const std::string& what, double residual, std::size_t iterations)
      : Error(what + " (residual " + std::to_string(residual) + " after " +
              std::to_string(iterations) + " iterations)"),
        residual_(residual), iterations_(iterations) {}
  double residual() const noexcept { return residual_; }
  std::size_t iterations() const noexcept { return iterations_; }

private:
  double residual_;
  std::size_t iterations_;
};

/// Requested cluster does not exist.
class SelectionError : public Error {
public:
  using Error::Error;
};

/// Data violates a solvability condition (nonzero charge, ill-posed problem, ...).
class ConsistencyError : public Error {
public:
  using Error::Error;
};

/// A precondition on the arguments was violated.
class PreconditionError : public Error {
public:
  using Error::Error;
};

}  // namespace rcm
