#pragma once

#include <functional>
#include <span>

namespace pairstop {

/// Market and model scalars for the jump OU spread
///   dU = -mu U dt + sigma dW + dC,
/// where C is compound Poisson with intensity `lambda` and jumps drawn from a
/// zero-mean normal of scale `gamma` truncated to (-jmax, jmax). Trades are
/// force-closed at the stop-loss level `a`.
struct ModelParams {
    double mu = 8.0;
    double sigma = 0.2;
    double lambda = 10.0;
    double a = -0.1;
    double gamma = 0.02;
    double jmax = 0.05;

    /// Throws InvalidParameter naming the first field out of range.
    void validate() const;

    /// a = -0.1, lambda = 10, sigma = 0.2, mu = sigma^2 / 0.005, gamma = 0.02, J = 0.05.
    static ModelParams defaults() { return {}; }
};

/// Standard normal distribution function.
double normal_cdf(double x);

/// Truncated normal jump density
///   phi(y) = exp(-y^2 / (2 gamma^2)) / (gamma sqrt(2 pi) (2 Phi(J/gamma) - 1)),  |y| < J,
/// and zero elsewhere. Immutable after construction.
class JumpDensity {
public:
    JumpDensity(double gamma, double jmax);
    explicit JumpDensity(const ModelParams& p) : JumpDensity(p.gamma, p.jmax) {}

    double gamma() const noexcept { return gamma_; }
    double jmax() const noexcept { return jmax_; }
    double norm_const() const noexcept { return norm_const_; }

    /// phi(y); exactly 0 outside (-J, J) and exactly symmetric.
    double density(double y) const noexcept;

    /// Integral of phi over (-inf, y].
    double cdf(double y) const noexcept;

    /// Integral of phi over [lo, hi]; negative if hi < lo.
    double mass(double lo, double hi) const noexcept;

    /// Integral of s * phi(s) over [lo, hi].
    double first_moment(double lo, double hi) const noexcept;

    /// Inverse of cdf on (0, 1), by bisection to an interval width of `tol`.
    double quantile(double u, double tol = 1e-12) const;

private:
    // Untruncated Gaussian shape (with normalisation) evaluated on the
    // support clipped to [-J, J].
    double gauss_clipped(double s) const noexcept;

    double gamma_;
    double jmax_;
    double norm_const_;
    double erf_j_;  // erf(J / (gamma sqrt 2)) = 2 Phi(J/gamma) - 1
};

/// Continuous piecewise-linear function on a uniform grid over [a, b],
/// extended by zero outside. Non-owning view.
struct PiecewiseLinearView {
    double a;
    double h;
    std::span<const double> values;  // nodal values x_0 = a, ..., x_N = b

    double b() const noexcept { return a + h * static_cast<double>(values.size() - 1); }
    double node(std::size_t j) const noexcept;
    double operator()(double x) const noexcept;
};

/// lambda * int_a^b phi(x - y) v(y) dy, with the integral over each linear
/// piece evaluated in closed form from the CDF and first moment of phi.
double convolve_jump(const JumpDensity& d, double lambda, const PiecewiseLinearView& v, double x);

/// I v(x) = lambda int_a^b phi(x - y) v(y) dy - lambda v(x) for piecewise-linear v.
double apply_jump_operator(const JumpDensity& d, double lambda, const PiecewiseLinearView& v, double x);

/// Same operator for an arbitrary v on [a, b] (zero outside), by composite
/// Gauss-Legendre quadrature split at the support edges.
double apply_jump_operator(const JumpDensity& d, double lambda,
                           const std::function<double(double)>& v, double a, double b, double x,
                           int panels = 64);

}  // namespace pairstop
