#pragma once

#include <stdexcept>
#include <string>

namespace qdarwin {

/// Bad arguments: wrong dimensions, non-unitary operators, out-of-range
/// indices, violated preconditions.
class InvalidArgument : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// A numerical guard tripped: a size limit, or a quantity drifted beyond
/// what rounding can explain.
class NumericalGuard : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace qdarwin
