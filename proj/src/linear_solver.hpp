#pragma once

#include <vector>

#include "pairstop/fem.hpp"

namespace pairstop::detail {

/// Solves system.matrix * c = system.load, filling `info` (method, residuals,
/// iteration count, condition estimate). Throws SingularSystemError.
std::vector<double> solve_linear(const FemSystem& system, const SolveOptions& options, SolveInfo& info);

/// ||A||_inf from the stored parts.
double matrix_inf_norm(const FemSystem& system);

/// f - A c with long double accumulation.
std::vector<double> accurate_residual(const FemSystem& system, std::span<const double> c);

}  // namespace pairstop::detail
