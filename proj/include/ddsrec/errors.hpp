#pragma once

#include <stdexcept>
#include <string>

namespace ddsrec {

// Operand shapes do not satisfy an operation's contract.
class ShapeError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

// Input data is missing, malformed, or filters down to nothing.
class DataError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Non-finite values, divergence, or a failed gradient check.
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace ddsrec
