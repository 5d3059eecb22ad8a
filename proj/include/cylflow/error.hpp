#pragma once

#include <stdexcept>
#include <string>

namespace cylflow {

/// Base of every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Bad arguments or violated type invariants.
class InvalidArgument : public Error {
public:
    using Error::Error;
};

/// The surface R + rho reached the axis of rotation; the radial-graph
/// description is no longer valid.
class AxisTouched : public Error {
public:
    using Error::Error;
};

/// Cylinder parameters outside the chart where the radial graph exists.
class OutsideChart : public Error {
public:
    using Error::Error;
};

class NewtonDiverged : public Error {
public:
    using Error::Error;
};

/// R <= d*sqrt(n-1)/pi: the linearized operator has a non-negative
/// eigenvalue outside its kernel.
class NonPositiveGap : public Error {
public:
    using Error::Error;
};

class InsufficientData : public Error {
public:
    using Error::Error;
};

class Blowup : public Error {
public:
    using Error::Error;
};

} // namespace cylflow
