#include "psat/grad_check.hpp"

#include <cmath>
#include <vector>

namespace psat {

namespace {

double evaluate(const DifferentiableFn& f, std::span<const Tensor2> params) {
    ad::Tape tape;
    std::vector<ad::Var> leaves;
    leaves.reserve(params.size());
    for (const Tensor2& p : params) leaves.push_back(tape.leaf(p));
    ad::Var loss = f(tape, leaves);
    double v = tape.value(loss).at(0, 0);
    if (!std::isfinite(v)) throw MathError("grad_check: non-finite loss");
    return v;
}

}  // namespace

GradCheckReport grad_check(const DifferentiableFn& f, std::span<const Tensor2> params,
                           double step, double tolerance) {
    if (step <= 0.0) throw MathError("grad_check: step must be positive");

    // Analytic pass.
    ad::Tape tape;
    std::vector<ad::Var> leaves;
    leaves.reserve(params.size());
    for (const Tensor2& p : params) leaves.push_back(tape.leaf(p));
    ad::Var loss = f(tape, leaves);
    if (!std::isfinite(tape.value(loss).at(0, 0))) throw MathError("grad_check: non-finite loss");
    tape.backward(loss);

    std::vector<Tensor2> perturbed(params.begin(), params.end());
    GradCheckReport report;
    report.max_rel_error = 0.0;

    for (std::size_t p = 0; p < params.size(); ++p) {
        const Tensor2& analytic = tape.grad(leaves[p]);
        for (std::size_t i = 0; i < perturbed[p].size(); ++i) {
            double saved = perturbed[p].data[i];
            perturbed[p].data[i] = saved + step;
            double up = evaluate(f, perturbed);
            perturbed[p].data[i] = saved - step;
            double down = evaluate(f, perturbed);
            perturbed[p].data[i] = saved;

            double numeric = (up - down) / (2.0 * step);
            double a = analytic.data[i];
            double denom = std::max({std::abs(a), std::abs(numeric), 1e-6});
            double rel = std::abs(a - numeric) / denom;
            ++report.entries_checked;
            if (rel > report.max_rel_error) {
                report.max_rel_error = rel;
                report.worst_param = p;
                report.worst_row = i / perturbed[p].cols;
                report.worst_col = i % perturbed[p].cols;
                report.worst_analytic = a;
                report.worst_numeric = numeric;
            }
        }
    }
    report.passed = report.max_rel_error < tolerance;
    return report;
}

}  // namespace psat
