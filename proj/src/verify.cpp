#include "pairstop/verify.hpp"

#include <algorithm>
#include <limits>

#include "pairstop/errors.hpp"

namespace pairstop {

namespace {
constexpr double kNonnegativityTol = 1e-12;
}

ConditionReport check_condition_a(const BvpSolution& sol, double lambda, const JumpDensity& density,
                                  std::size_t n_samples) {
    if (n_samples == 0) throw InvalidParameter("n_samples", "must be >= 1");
    ConditionReport rep;
    rep.margin_curve.reserve(n_samples);
    rep.worst_margin = std::numeric_limits<double>::infinity();
    const PiecewiseLinearView v = sol.view();
    const double J = density.jmax();
    for (std::size_t k = 1; k <= n_samples; ++k) {
        const double x = k == n_samples ? sol.b + J
                                        : sol.b + J * static_cast<double>(k) / static_cast<double>(n_samples);
        // phi is symmetric, so phi(y - x) = phi(x - y).
        const double lhs = convolve_jump(density, lambda, v, x);
        const double rhs = sol.params.mu * x;
        rep.margin_curve.push_back({x, lhs, rhs});
        if (rhs - lhs < rep.worst_margin) {
            rep.worst_margin = rhs - lhs;
            rep.worst_x = x;
        }
    }
    rep.condition_a_holds = rep.worst_margin >= 0.0;
    return rep;
}

ConditionReport check_condition_b(const BvpSolution& sol) {
    ConditionReport rep;
    rep.min_v = *std::min_element(sol.coeffs.begin(), sol.coeffs.end());
    rep.condition_b_holds = rep.min_v >= -kNonnegativityTol;
    return rep;
}

ConditionReport check_conditions(const BvpSolution& sol, std::size_t n_samples) {
    ConditionReport rep = check_condition_a(sol, sol.params.lambda, JumpDensity(sol.params), n_samples);
    const ConditionReport b = check_condition_b(sol);
    rep.condition_b_holds = b.condition_b_holds;
    rep.min_v = b.min_v;
    return rep;
}

}  // namespace pairstop
