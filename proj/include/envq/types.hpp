#pragma once

#include <Eigen/Dense>

#include <stdexcept>
#include <string>
#include <vector>

namespace envq {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using RowVector = Eigen::RowVectorXd;

// Residual tolerance for solved equations.
inline constexpr double EPS_RES = 1e-10;
// Row-sum tolerance for stochastic / generator checks on parsed input.
inline constexpr double EPS_STOCH = 1e-9;
// Tolerance for "is theta a null vector of Q~(n)".
inline constexpr double EPS_PRODUCT_FORM = 1e-9;

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct InvalidModel : Error {
    using Error::Error;
};

struct Singular : Error {
    using Error::Error;
};

struct MultipleClosedClasses : Error {
    std::vector<std::vector<std::size_t>> classes;
    MultipleClosedClasses(std::string what, std::vector<std::vector<std::size_t>> cls)
        : Error(std::move(what)), classes(std::move(cls)) {}
};

struct ConstraintViolated : Error {
    using Error::Error;
};

struct NotErgodic : Error {
    using Error::Error;
};

struct Disagreement : Error {
    using Error::Error;
};

inline double max_abs(const RowVector& v) { return v.size() ? v.cwiseAbs().maxCoeff() : 0.0; }

} // namespace envq
