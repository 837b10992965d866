#pragma once

#include <cstddef>
#include <optional>
#include <utility>
#include <vector>

#include "pairstop/fem.hpp"

namespace pairstop {

/// F_N(b) = v_N'(b) on a uniform N-element mesh of [a, b].
double f_n(const ModelParams& params, double b, std::size_t n, const SolveOptions& solver = {});

struct Bracket {
    double b_lo = 0.0;
    double b_hi = 0.0;
    double f_lo = 0.0;  // F_N(b_lo) < 0
    double f_hi = 0.0;  // F_N(b_hi) >= 0
    std::vector<std::pair<double, double>> samples;  // every (b, F_N(b)) evaluated
};

struct BracketOptions {
    std::size_t max_expansions = 60;
    SolveOptions solver{};
};

/// Geometric search from b_init: upward (b *= growth) while F_N < 0, or
/// downward (b /= growth, then b = 0) while F_N >= 0. Throws BracketError with
/// the sampled pairs when no sign change is found within max_expansions.
Bracket bracket_root(const ModelParams& params, std::size_t n, double b_init, double growth,
                     const BracketOptions& options = {});

struct FindOptions {
    /// Defaults to 0.1 |a|.
    std::optional<double> b_init;
    double growth = 1.5;
    std::size_t max_expansions = 60;
    SolveOptions solver{};
};

struct FreeBoundaryResult {
    double b_n = 0.0;
    std::pair<double, double> bracket;  // final (b_lo, b_hi)
    std::pair<double, double> initial_bracket;
    std::size_t n = 0;
    std::size_t iterations = 0;  // bisection steps
    double f_at_root = 0.0;
    BvpSolution solution;
};

/// Bisection on F_N until the bracket width is at most 2 tol_b; the mesh of
/// [a, b] is rebuilt at every trial b.
FreeBoundaryResult find_boundary(const ModelParams& params, std::size_t n, double tol_b,
                                 const FindOptions& options = {});

struct ConvergenceRow {
    std::size_t n = 0;
    double b_n = 0.0;
    std::optional<double> delta;  // b_n - previous b_n
    std::size_t iterations = 0;
    double f_at_root = 0.0;
};

struct ConvergenceReport {
    ModelParams params;
    double tol_b = 0.0;
    std::vector<ConvergenceRow> rows;

    /// b_n strictly decreasing in n.
    bool strictly_decreasing() const noexcept;
    /// |delta| strictly shrinking from row to row.
    bool deltas_shrinking() const noexcept;
};

/// One find_boundary per entry of ns (nonempty, strictly increasing). Runs
/// are independent and may execute concurrently; output order follows ns.
ConvergenceReport convergence_study(const ModelParams& params, const std::vector<std::size_t>& ns,
                                    double tol_b, const FindOptions& options = {});

/// (b, F_N(b)) for each b; the data behind a plot of F_N.
std::vector<std::pair<double, double>> scan_f_n(const ModelParams& params, std::size_t n,
                                                const std::vector<double>& bs,
                                                const SolveOptions& solver = {});

/// Number of sign changes along an ordered scan.
std::size_t count_sign_changes(const std::vector<std::pair<double, double>>& scan);

/// Thresholds for the existence certificate; the defaults are the values
/// used for the default parameter set and may need changing with parameters.
struct CertificateThresholds {
    double f_low = -0.5;    // require F_N(b1) <= f_low
    double f_high = 0.5;    // require F_N(b2) >= f_high
    double uniform = 0.25;  // require c12 N^(-1/2) < uniform
};

/// Checks the computable hypotheses under which a root of F in (b1, b2)
/// follows from a root of F_N: sign margins at b1 and b2, the uniform error
/// bound c12 N^(-1/2) below the margin, and N >= N0 (h <= h0 on all of
/// [b1, b2]). c11 and h0 are maximised/minimised over a grid of b values.
struct Certificate {
    double b1 = 0.0, b2 = 0.0;
    std::size_t n = 0;
    double f_b1 = 0.0, f_b2 = 0.0;
    double c11_hat = 0.0, h0_hat = 0.0;
    double c12_hat = 0.0, n0_hat = 0.0;
    double uniform_bound = 0.0;  // c12_hat n^(-1/2)
    bool signs_ok = false;
    bool bound_ok = false;
    bool mesh_ok = false;

    bool holds() const noexcept { return signs_ok && bound_ok && mesh_ok; }
};

Certificate existence_certificate(const ModelParams& params, double b1, double b2, std::size_t n,
                                  const CertificateThresholds& thresholds = {}, std::size_t b_samples = 64,
                                  const SolveOptions& solver = {});

}  // namespace pairstop
