// Exception types thrown by the engine.
#pragma once

#include <stdexcept>
#include <string>

namespace berez {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// an operand that must be parity-homogeneous is mixed, or has the wrong parity
struct ParityError : Error {
  using Error::Error;
};

// numeric evaluation left the domain of a primitive (division by zero, ...)
struct DomainError : Error {
  using Error::Error;
};

struct DimensionError : Error {
  using Error::Error;
};

// the body determinant changes sign on the sampled region
struct SignAmbiguous : Error {
  using Error::Error;
};

// the lower-right block of a supermatrix has a singular body
struct SingularV : Error {
  using Error::Error;
};

// no coordinate system adapted to the requested boundary data is available
struct NoAdaptedCoordinates : Error {
  using Error::Error;
};

// a mapped region's Jacobian vanishes at a quadrature node
struct NodeSingularity : Error {
  using Error::Error;
};

// an integrand evaluated to a non-finite value at a quadrature node
struct NonFinite : Error {
  using Error::Error;
};

// boundary data fails joint independence or adapted-system validation
struct InvalidCorner : Error {
  using Error::Error;
};

// a declared derivation family violates its defining evaluations
struct NotDerivation : Error {
  using Error::Error;
};

// operation requires a coordinate system shape the engine does not handle
struct UnsupportedSystem : Error {
  using Error::Error;
};

struct ParseError : Error {
  int line = 0;
  ParseError(const std::string& msg, int line_no)
      : Error("line " + std::to_string(line_no) + ": " + msg), line(line_no) {}
};

struct ScenarioError : Error {
  using Error::Error;
};

}  // namespace berez
