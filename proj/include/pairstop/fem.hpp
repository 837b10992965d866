#pragma once

#include <cstddef>
#include <span>
#include <string_view>
#include <vector>

#include "pairstop/model.hpp"

namespace pairstop {

/// Uniform mesh a = x_0 < ... < x_N = b, h = (b - a) / N.
class Mesh {
public:
    Mesh(double a, double b, std::size_t n);

    double a() const noexcept { return a_; }
    double b() const noexcept { return b_; }
    std::size_t n() const noexcept { return n_; }
    double h() const noexcept { return h_; }

    /// x_j; x_N is exactly b.
    double node(std::size_t j) const noexcept {
        return j == n_ ? b_ : a_ + h_ * static_cast<double>(j);
    }
    std::vector<double> nodes() const;

private:
    double a_;
    double b_;
    std::size_t n_;
    double h_;
};

/// Galerkin system A(phi_i, phi_j) c = (f, phi_j) over the N-1 interior hat
/// functions, stored by parts:
///
///   matrix = L-part + mass-part - convolution-part
///
/// L-part     int (sigma^2/2) phi_i' phi_j' + mu x phi_i' phi_j     (tridiagonal)
/// mass-part  lambda int phi_i phi_j                                (tridiagonal Toeplitz)
/// conv-part  lambda int int phi(x - y) phi_i(y) phi_j(x) dy dx      (symmetric Toeplitz)
///
/// Row index is the test function, column index the trial function.
struct FemSystem {
    Mesh mesh;
    ModelParams params;
    // L-part, row r: lower[r] at column r-1, diag[r] at r, upper[r] at r+1.
    std::vector<double> l_lower;
    std::vector<double> l_diag;
    std::vector<double> l_upper;
    double mass_diag = 0.0;
    double mass_off = 0.0;
    // conv[k] is the convolution part at |row - col| = k; trailing zeros trimmed.
    std::vector<double> conv;
    std::vector<double> load;

    std::size_t size() const noexcept { return load.size(); }
    /// Largest |row - col| with a nonzero entry.
    std::size_t half_bandwidth() const noexcept;

    double l_part(std::size_t row, std::size_t col) const noexcept;
    double mass_part(std::size_t row, std::size_t col) const noexcept;
    double conv_part(std::size_t row, std::size_t col) const noexcept;
    double entry(std::size_t row, std::size_t col) const noexcept;

    /// Row-major dense copy of the full matrix.
    std::vector<double> to_dense() const;

    /// y = matrix * x.
    void apply(std::span<const double> x, std::span<double> y) const;
    std::vector<double> apply(std::span<const double> x) const;
};

/// Assembles the weak form with load f(x) = -mu x.
/// Throws InvalidParameter if n < 2 or b <= a.
FemSystem assemble(const ModelParams& params, double b, std::size_t n);

enum class SolverKind { Auto, Dense, Banded, Krylov };

std::string_view to_string(SolverKind kind);

struct SolveOptions {
    SolverKind kind = SolverKind::Auto;
    /// Auto picks dense LU up to this many unknowns (when the band is wide).
    std::size_t dense_limit = 2500;
    /// GMRES stopping threshold on the normwise backward error.
    double krylov_tol = 1e-15;
    std::size_t krylov_restart = 60;
    std::size_t krylov_max_iter = 3000;
    /// Iterative refinement steps with the residual accumulated in extended
    /// precision. Each step costs one more solve; worth it for N in the tens
    /// of thousands, where cancellation in the stiffness rows limits the
    /// plain solve to about 1e-9 relative accuracy.
    std::size_t refine_steps = 0;
};

struct SolveInfo {
    SolverKind method = SolverKind::Auto;
    double residual_max = 0.0;      // ||A c - f||_inf
    double load_max = 0.0;          // ||f||_inf
    double backward_error = 0.0;    // ||r||_inf / (||A||_inf ||c||_inf + ||f||_inf)
    std::size_t iterations = 0;     // Krylov iterations, 0 for direct solvers
    double rcond = 0.0;             // LU reciprocal condition estimate, 0 if not computed
    double h = 0.0;
    double h0 = 0.0;                // uniqueness threshold from the error constants

    double relative_residual() const noexcept { return load_max > 0.0 ? residual_max / load_max : residual_max; }
    double h_over_h0() const noexcept { return h / h0; }
};

/// Nodal coefficients of v_N on [a, b]; coeffs.front() = coeffs.back() = 0.
struct BvpSolution {
    Mesh mesh;
    std::vector<double> coeffs;
    ModelParams params;
    double b;
    SolveInfo info;

    PiecewiseLinearView view() const noexcept { return {mesh.a(), mesh.h(), coeffs}; }
};

/// Solves the assembled system. Throws SingularSystemError (reporting h and
/// h0) when the factorisation or iteration detects rank deficiency.
BvpSolution solve(const FemSystem& system, const SolveOptions& options = {});

/// One-sided derivative of v_N at b: -v_N(x_{N-1}) / h.
double derivative_at_b(const BvpSolution& sol) noexcept;

/// Piecewise-linear interpolant of the coefficients; 0 outside (a, b).
double eval(const BvpSolution& sol, double x) noexcept;

/// u(x) = v_N(x) + x, so u(x) = x outside (a, b).
double value_function(const BvpSolution& sol, double x) noexcept;

/// Explicit constants of the existence and error analysis for the given
/// parameters on (a, b).
///
/// c1 is taken as sigma^2/2 + c2 mu max(|a|,|b|) + 2 lambda c2^2, i.e. the
/// boundedness estimate |A(u,v)| <= c1 ||Du|| ||Dv|| with both L2 factors
/// replaced through Poincare's inequality.
struct ErrorConstants {
    double c1 = 0, c2 = 0, c3 = 0, c4 = 0, c5 = 0, c6 = 0, c7 = 0, c8 = 0;
    double c9 = 0, c10 = 0, c11 = 0;
    double h0 = 0;
    double gamma_hat = 0;
    double f_norm = 0;  // ||mu x||_{L2(a,b)}

    double c2_poincare() const noexcept { return c2; }

    /// A-priori bound on ||v - v_h||: 4 c1^2 c3^2 sigma^-2 h^2 ||f||.
    double l2_bound(double h) const noexcept { return l2_factor * h * h * f_norm; }
    /// A-priori bound on ||D(v - v_h)||: 4 c1 c3 sigma^-2 h ||f||.
    double h1_bound(double h) const noexcept { return h1_factor * h * f_norm; }
    /// A-priori bound on |v'(b) - v_h'(b)|: c11 h^(1/2).
    double derivative_bound(double h) const noexcept;

    double l2_factor = 0;  // 4 c1^2 c3^2 sigma^-2
    double h1_factor = 0;  // 4 c1 c3 sigma^-2
};

ErrorConstants constants(const ModelParams& params, double b);

}  // namespace pairstop
