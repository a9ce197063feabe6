#pragma once

#include <cstddef>
#include <functional>
#include <span>

#include "psat/autodiff.hpp"
#include "psat/tensor.hpp"

namespace psat {

// A scalar-valued differentiable function: builds its computation on the
// given tape from one leaf per parameter tensor and returns the 1x1 loss.
using DifferentiableFn = std::function<ad::Var(ad::Tape&, std::span<const ad::Var>)>;

struct GradCheckReport {
    bool passed = false;
    double max_rel_error = 0.0;
    std::size_t entries_checked = 0;
    std::size_t worst_param = 0;
    std::size_t worst_row = 0;
    std::size_t worst_col = 0;
    double worst_analytic = 0.0;
    double worst_numeric = 0.0;
};

// Compares the analytic gradient of f (reverse mode) against central
// finite differences (f(p+h) - f(p-h)) / 2h for every entry of every
// parameter. Relative error uses an absolute floor of 1e-6 in the
// denominator so that entries whose true gradient sits below the
// finite-difference noise floor are compared absolutely.
// Throws MathError if the loss evaluates non-finite.
GradCheckReport grad_check(const DifferentiableFn& f, std::span<const Tensor2> params,
                           double step, double tolerance);

}  // namespace psat
