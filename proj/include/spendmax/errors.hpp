#pragma once

#include <stdexcept>
#include <string>

namespace spendmax {

// Input violates a mathematical precondition (bad parameter, state outside
// the effective domain, ...).
class DomainError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

// Invalid simulation / run configuration.
class ConfigError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

// A bracketing search failed to enclose a root.
class BracketError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Finite-difference grid too coarse or otherwise unusable.
class GridError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

// A finite-difference stencil cannot be placed (too close to a kink).
class StencilError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace spendmax
