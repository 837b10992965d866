#include "pairstop/fem.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "gauss_legendre.hpp"
#include "linear_solver.hpp"
#include "pairstop/errors.hpp"

namespace pairstop {

Mesh::Mesh(double a, double b, std::size_t n) : a_(a), b_(b), n_(n) {
    if (!(std::isfinite(a) && std::isfinite(b) && b > a)) throw InvalidParameter("b", "must satisfy b > a");
    if (n < 2) throw InvalidParameter("n", "element count must be >= 2");
    h_ = (b - a) / static_cast<double>(n);
}

std::vector<double> Mesh::nodes() const {
    std::vector<double> x(n_ + 1);
    for (std::size_t j = 0; j <= n_; ++j) x[j] = node(j);
    return x;
}

namespace {

// Autocorrelation of the unit-height hat of half-width h, divided by h: the
// centred cubic B-spline in s = |t| / h.
double hat_autocorrelation(double s) noexcept {
    s = std::abs(s);
    if (s >= 2.0) return 0.0;
    if (s >= 1.0) {
        const double u = 2.0 - s;
        return u * u * u / 6.0;
    }
    return 2.0 / 3.0 - s * s + 0.5 * s * s * s;
}

// int phi(s) R(s - d) ds with R(t) = h * hat_autocorrelation(t / h).
double convolution_gram(const JumpDensity& density, double h, double d) {
    const double J = density.jmax();
    const double max_width = 0.25 * density.gamma();
    double total = 0.0;
    for (int piece = -2; piece < 2; ++piece) {
        const double lo = std::max(d + piece * h, -J);
        const double hi = std::min(d + (piece + 1) * h, J);
        if (!(hi > lo)) continue;
        total += detail::gauss_composite(
            [&](double s) { return density.density(s) * hat_autocorrelation((s - d) / h); }, lo, hi,
            max_width);
    }
    return h * total;
}

}  // namespace

FemSystem assemble(const ModelParams& params, double b, std::size_t n) {
    params.validate();
    Mesh mesh(params.a, b, n);
    const std::size_t m = n - 1;
    const double h = mesh.h();
    const double mu = params.mu;
    const double half_s2 = 0.5 * params.sigma * params.sigma;

    FemSystem sys{mesh, params, {}, {}, {}, 0.0, 0.0, {}, {}};
    sys.l_lower.assign(m, 0.0);
    sys.l_diag.assign(m, 0.0);
    sys.l_upper.assign(m, 0.0);
    sys.load.assign(m, 0.0);

    for (std::size_t r = 0; r < m; ++r) {
        const double xl = mesh.node(r);
        const double xc = mesh.node(r + 1);
        const double xr = mesh.node(r + 2);
        // int mu x phi_i' phi_j over the (at most two) shared elements, exact
        // for the quadratic integrand.
        sys.l_diag[r] = 2.0 * half_s2 / h + mu * (xl - xr) / 6.0;
        sys.l_lower[r] = r > 0 ? -half_s2 / h - mu * (xl + 2.0 * xc) / 6.0 : 0.0;
        sys.l_upper[r] = r + 1 < m ? -half_s2 / h + mu * (2.0 * xc + xr) / 6.0 : 0.0;
        // (-mu x, phi_j) = -mu x_j h, exact since the hat integrates linears exactly.
        sys.load[r] = -mu * xc * h;
    }

    if (params.lambda > 0.0) {
        const JumpDensity density(params);
        sys.mass_diag = params.lambda * 2.0 * h / 3.0;
        sys.mass_off = params.lambda * h / 6.0;
        // Nonzero for |d| < J + 2h.
        const auto reach = static_cast<std::size_t>(std::ceil(density.jmax() / h)) + 2;
        const std::size_t kmax = std::min(reach, m - 1);
        sys.conv.resize(kmax + 1);
        for (std::size_t k = 0; k <= kmax; ++k) {
            sys.conv[k] = params.lambda * convolution_gram(density, h, static_cast<double>(k) * h);
        }
        while (!sys.conv.empty() && sys.conv.back() == 0.0) sys.conv.pop_back();
    }
    return sys;
}

std::size_t FemSystem::half_bandwidth() const noexcept {
    const std::size_t tri = size() > 1 ? 1 : 0;
    return conv.empty() ? tri : std::max(tri, conv.size() - 1);
}

double FemSystem::l_part(std::size_t row, std::size_t col) const noexcept {
    if (row == col) return l_diag[row];
    if (col + 1 == row) return l_lower[row];
    if (row + 1 == col) return l_upper[row];
    return 0.0;
}

double FemSystem::mass_part(std::size_t row, std::size_t col) const noexcept {
    if (row == col) return mass_diag;
    if (col + 1 == row || row + 1 == col) return mass_off;
    return 0.0;
}

double FemSystem::conv_part(std::size_t row, std::size_t col) const noexcept {
    const std::size_t k = row > col ? row - col : col - row;
    return k < conv.size() ? conv[k] : 0.0;
}

double FemSystem::entry(std::size_t row, std::size_t col) const noexcept {
    return l_part(row, col) + mass_part(row, col) - conv_part(row, col);
}

std::vector<double> FemSystem::to_dense() const {
    const std::size_t m = size();
    std::vector<double> dense(m * m);
    for (std::size_t r = 0; r < m; ++r) {
        for (std::size_t c = 0; c < m; ++c) dense[r * m + c] = entry(r, c);
    }
    return dense;
}

void FemSystem::apply(std::span<const double> x, std::span<double> y) const {
    const std::size_t m = size();
    for (std::size_t r = 0; r < m; ++r) {
        double s = (l_diag[r] + mass_diag) * x[r];
        if (r > 0) s += (l_lower[r] + mass_off) * x[r - 1];
        if (r + 1 < m) s += (l_upper[r] + mass_off) * x[r + 1];
        double c = conv.empty() ? 0.0 : conv[0] * x[r];
        const std::size_t kmax = conv.empty() ? 0 : conv.size() - 1;
        const std::size_t left = std::min(kmax, r);
        const std::size_t right = std::min(kmax, m - 1 - r);
        for (std::size_t k = 1; k <= left; ++k) c += conv[k] * x[r - k];
        for (std::size_t k = 1; k <= right; ++k) c += conv[k] * x[r + k];
        y[r] = s - c;
    }
}

std::vector<double> FemSystem::apply(std::span<const double> x) const {
    std::vector<double> y(size());
    apply(x, y);
    return y;
}

std::string_view to_string(SolverKind kind) {
    switch (kind) {
        case SolverKind::Auto: return "auto";
        case SolverKind::Dense: return "dense";
        case SolverKind::Banded: return "banded";
        case SolverKind::Krylov: return "krylov";
    }
    return "unknown";
}

BvpSolution solve(const FemSystem& system, const SolveOptions& options) {
    const ErrorConstants k = constants(system.params, system.mesh.b());
    SolveInfo info;
    info.h = system.mesh.h();
    info.h0 = k.h0;

    std::vector<double> interior = detail::solve_linear(system, options, info);

    BvpSolution sol{system.mesh, std::vector<double>(system.mesh.n() + 1, 0.0), system.params,
                    system.mesh.b(), info};
    std::copy(interior.begin(), interior.end(), sol.coeffs.begin() + 1);
    return sol;
}

double derivative_at_b(const BvpSolution& sol) noexcept {
    const std::size_t n = sol.mesh.n();
    return (sol.coeffs[n] - sol.coeffs[n - 1]) / sol.mesh.h();
}

double eval(const BvpSolution& sol, double x) noexcept { return sol.view()(x); }

double value_function(const BvpSolution& sol, double x) noexcept { return eval(sol, x) + x; }

double ErrorConstants::derivative_bound(double h) const noexcept { return c11 * std::sqrt(h); }

ErrorConstants constants(const ModelParams& p, double b) {
    p.validate();
    if (!(b > p.a)) throw InvalidParameter("b", "must satisfy b > a");
    const double a = p.a;
    const double len = b - a;
    const double s2 = p.sigma * p.sigma;
    const double xmax = std::max(std::abs(a), std::abs(b));

    ErrorConstants k;
    k.c2 = len / std::numbers::pi;
    k.c1 = 0.5 * s2 + k.c2 * p.mu * xmax + 2.0 * p.lambda * k.c2 * k.c2;
    k.gamma_hat = p.mu * b / s2 + std::sqrt(2.0 * (p.lambda + 1.0) / s2);
    k.c4 = std::exp(k.gamma_hat * len);
    k.c5 = len * k.c4;
    k.c6 = k.c2 * std::sqrt(2.0 / (s2 * p.mu) + 4.0 * k.c5 * k.c5 / (s2 * s2 * p.mu * p.mu));
    k.c7 = 4.0 / s2;
    k.c8 = 4.0 / s2 * (2.0 * p.lambda + p.mu + p.mu * p.mu * xmax * xmax / s2);
    k.c3 = k.c7 + k.c6 * k.c8;
    k.h0 = p.sigma / (std::numbers::sqrt2 * std::sqrt(p.mu) * k.c1 * k.c3);
    k.c9 = 4.0 * k.c1 / s2;
    k.c10 = 2.0 + 4.0 * k.c1 * k.c3 / s2;
    k.f_norm = p.mu * std::sqrt((b * b * b - a * a * a) / 3.0);
    k.c11 = k.c10 * k.f_norm;
    k.l2_factor = 4.0 * k.c1 * k.c1 * k.c3 * k.c3 / s2;
    k.h1_factor = 4.0 * k.c1 * k.c3 / s2;
    return k;
}

}  // namespace pairstop
