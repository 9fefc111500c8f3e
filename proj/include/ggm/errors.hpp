#pragma once

#include <stdexcept>
#include <string>

namespace ggm {

// Thrown when an input (config file, matrix dimension, parameter range)
// violates a contract. CLI maps this to exit code 2.
struct InputError : std::runtime_error {
    explicit InputError(const std::string& msg) : std::runtime_error(msg) {}
};

// Thrown when a computation fails numerically (singular covariance,
// non-PD matrix, underflow). CLI maps this to exit code 3.
struct NumericalError : std::runtime_error {
    explicit NumericalError(const std::string& msg) : std::runtime_error(msg) {}
};

// Thrown when an iterative scheme fails to converge. CLI maps this to exit
// code 4.
struct ConvergenceError : std::runtime_error {
    explicit ConvergenceError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace ggm
