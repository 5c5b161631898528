#pragma once

#include "tabspec/common.hpp"

#include <functional>

namespace tabspec::optim {

// Objective returning f(x) and writing the gradient into `grad`.
using Objective = std::function<double(const Vector& x, Vector& grad)>;

struct BoundedLbfgsOptions {
    int max_iterations = 1000;
    int history = 10;
    double pgtol = 1e-9;  // on the infinity norm of the projected gradient
    double ftol = 1e-14;  // relative decrease
};

struct BoundedLbfgsResult {
    Vector x;
    double f = 0.0;
    int iterations = 0;
    bool converged = false;
};

// Projected L-BFGS for simple box constraints lower <= x <= upper.
BoundedLbfgsResult minimize_bounded(const Objective& fn, Vector x0, const Vector& lower, const Vector& upper,
                                    const BoundedLbfgsOptions& options = {});

}  // namespace tabspec::optim
