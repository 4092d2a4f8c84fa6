#pragma once

#include <stdexcept>
#include <string>

namespace pointproc {

// Malformed or invalid input data (files, containers, dimensions).
class data_error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Incompatible configuration, e.g. a stochastic solver on a non-decomposable model.
class config_error : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

// Overflow, divergence or an infeasible point hit during a computation.
class numerical_error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

} // namespace pointproc
