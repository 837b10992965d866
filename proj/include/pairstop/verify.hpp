#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <vector>

#include "pairstop/fem.hpp"

namespace pairstop {

/// One sample of the generator inequality above b:
///   lhs = lambda int_a^b v(y) phi(y - x) dy,  rhs = mu x.
struct MarginPoint {
    double x;
    double lhs;
    double rhs;
};

/// Checks of the two hypotheses under which the computed u is the value
/// function: (a) lhs <= rhs for x > b, (b) v >= 0.
struct ConditionReport {
    bool condition_a_holds = false;
    double worst_margin = 0.0;  // min over samples of rhs - lhs
    double worst_x = 0.0;
    std::vector<MarginPoint> margin_curve;
    bool condition_b_holds = false;
    double min_v = 0.0;
};

/// Samples (b, b + J] at n_samples uniformly spaced points (the last one
/// exactly b + J). Beyond b + J the integral vanishes and the condition is
/// automatic. Fills the condition (a) fields only.
ConditionReport check_condition_a(const BvpSolution& sol, double lambda, const JumpDensity& density,
                                  std::size_t n_samples = 512);

/// Minimum nodal value; holds when min_v >= -1e-12. Fills the (b) fields only.
ConditionReport check_condition_b(const BvpSolution& sol);

/// Both checks merged into one report.
ConditionReport check_conditions(const BvpSolution& sol, std::size_t n_samples = 512);

/// Monte Carlo estimate of E_x0[U at the first exit from (a, b)].
struct McEstimate {
    double x0 = 0.0;
    double mean = 0.0;
    double std_err = 0.0;
    std::size_t n_paths = 0;
    double dt = 0.0;
    std::uint64_t seed = 0;

    // The first bias_paths paths monitored on the dt/4 grid as well (absent
    // when the bias check is off).
    std::optional<double> fine_mean;
    std::optional<double> fine_std_err;
    std::size_t bias_paths = 0;
    /// 2 |mean(dt) - mean(dt/4)| over the doubly monitored paths:
    /// discrete-monitoring bias of `mean` under a sqrt(dt) error model.
    double bias_allowance = 0.0;

    double min_stopped = 0.0;
    double max_stopped = 0.0;
    double mean_exit_time = 0.0;
    std::size_t jumps = 0;
};

struct McOptions {
    bool bias_check = true;
    /// Paths that also get dt/4 monitoring; 0 means all of them.
    std::size_t bias_paths = 50000;
    /// 0 means thread_count().
    std::size_t threads = 0;
};

/// Exact jump-free transition over time tau: the Gaussian with mean
/// x exp(-mu tau) and variance sigma^2 (1 - exp(-2 mu tau)) / (2 mu), drawn
/// from the standard normal z.
double ou_transition(const ModelParams& params, double x, double tau, double z);

/// Largest dt with sigma sqrt(dt) <= (b - a) / 200.
double default_time_step(const ModelParams& params, double b);

/// Simulates the spread with exact OU transitions between grid times and jump
/// epochs (exponential clock, inverse-CDF jump sizes) and stops at the first
/// monitored time with U <= a or U >= b. x0 must lie in [a, b]; starting on
/// the boundary returns x0 with zero variance. Results depend only on the
/// seed, not on the thread count.
McEstimate simulate_stopped_value(const ModelParams& params, double b, double x0, std::size_t n_paths,
                                  double dt, std::uint64_t seed, const McOptions& options = {});

/// Per-path stopped values (dt grid), for distribution checks.
std::vector<double> simulate_stopped_values(const ModelParams& params, double b, double x0,
                                            std::size_t n_paths, double dt, std::uint64_t seed,
                                            std::size_t threads = 0);

/// Reference solution of the jump-free problem
///   -sigma^2/2 v'' + mu x v' = -s mu x,  v(a) = v(b) = 0,
/// by linear shooting with classical RK4 and Richardson extrapolation over
/// step doubling. s = 1 is the problem of interest; s = 0 is the homogeneous one.
class OdeOracle {
public:
    /// Requires params.lambda == 0 and b > a. Throws IntegrationError if the
    /// Richardson estimate does not reach tol within max_steps RK4 steps.
    OdeOracle(const ModelParams& params, double b, double tol, double forcing_scale = 1.0,
              std::size_t max_steps = std::size_t{1} << 22);

    double a() const noexcept { return a_; }
    double b() const noexcept { return b_; }
    double error_estimate() const noexcept { return error_estimate_; }
    std::size_t steps() const noexcept { return x_.size() - 1; }

    /// v(x), cubic Hermite between grid nodes; 0 outside (a, b).
    double operator()(double x) const noexcept;
    /// v'(x) on [a, b].
    double derivative(double x) const noexcept;

private:
    double a_;
    double b_;
    double error_estimate_ = 0.0;
    std::vector<double> x_;
    std::vector<double> v_;
    std::vector<double> dv_;
    double curvature_coeff_;  // 2 mu / sigma^2
    double forcing_;
};

/// Root of b -> v'(b) for the jump-free problem, by bisection on the ODE
/// oracle over [lo, hi] (which must bracket a sign change).
double ode_free_boundary(const ModelParams& params, double lo, double hi, double tol_b, double ode_tol = 1e-12);

}  // namespace pairstop
