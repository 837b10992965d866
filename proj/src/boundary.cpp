#include "pairstop/boundary.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "pairstop/errors.hpp"
#include "pairstop/parallel.hpp"

namespace pairstop {

double f_n(const ModelParams& params, double b, std::size_t n, const SolveOptions& solver) {
    return derivative_at_b(solve(assemble(params, b, n), solver));
}

namespace {

[[noreturn]] void no_sign_change(const std::vector<std::pair<double, double>>& samples) {
    std::ostringstream msg;
    msg << "no sign change of F_N found; sampled (b, F_N):";
    for (const auto& [b, f] : samples) msg << " (" << b << ", " << f << ")";
    throw BracketError(msg.str(), samples);
}

}  // namespace

Bracket bracket_root(const ModelParams& params, std::size_t n, double b_init, double growth,
                     const BracketOptions& options) {
    params.validate();
    if (!(b_init > std::max(0.0, params.a))) throw InvalidParameter("b_init", "must be > max(0, a)");
    if (!(growth > 1.0)) throw InvalidParameter("growth", "must be > 1");

    Bracket br;
    auto eval_f = [&](double b) {
        const double f = f_n(params, b, n, options.solver);
        br.samples.emplace_back(b, f);
        return f;
    };

    double b = b_init;
    double f = eval_f(b);
    if (f < 0.0) {
        for (std::size_t k = 0; k < options.max_expansions; ++k) {
            const double next = b * growth;
            const double fn = eval_f(next);
            if (fn >= 0.0) {
                br.b_lo = b;
                br.f_lo = f;
                br.b_hi = next;
                br.f_hi = fn;
                return br;
            }
            b = next;
            f = fn;
        }
    } else {
        for (std::size_t k = 0; k <= options.max_expansions; ++k) {
            // Last attempt is b = 0 itself, where F_N is negative for a < 0.
            const double next = k == options.max_expansions ? 0.0 : b / growth;
            const double fn = eval_f(next);
            if (fn < 0.0) {
                br.b_lo = next;
                br.f_lo = fn;
                br.b_hi = b;
                br.f_hi = f;
                return br;
            }
            b = next;
            f = fn;
        }
    }
    no_sign_change(br.samples);
}

FreeBoundaryResult find_boundary(const ModelParams& params, std::size_t n, double tol_b,
                                 const FindOptions& options) {
    params.validate();
    if (!(tol_b > 0.0)) throw InvalidParameter("tol_b", "must be > 0");
    if (n < 2) throw InvalidParameter("n", "element count must be >= 2");
    const double b_init = options.b_init.value_or(0.1 * std::abs(params.a));
    const Bracket br =
        bracket_root(params, n, b_init, options.growth, {options.max_expansions, options.solver});

    double lo = br.b_lo;
    double hi = br.b_hi;
    std::size_t iterations = 0;

    auto finish = [&](BvpSolution sol, double b) {
        const double f = derivative_at_b(sol);
        return FreeBoundaryResult{b, {lo, hi}, {br.b_lo, br.b_hi}, n, iterations, f, std::move(sol)};
    };

    if (br.f_hi == 0.0) return finish(solve(assemble(params, hi, n), options.solver), hi);
    while (hi - lo > 2.0 * tol_b) {
        const double mid = 0.5 * (lo + hi);
        BvpSolution sol = solve(assemble(params, mid, n), options.solver);
        const double f = derivative_at_b(sol);
        ++iterations;
        if (f == 0.0) return finish(std::move(sol), mid);
        if (f < 0.0) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    const double root = 0.5 * (lo + hi);
    return finish(solve(assemble(params, root, n), options.solver), root);
}

bool ConvergenceReport::strictly_decreasing() const noexcept {
    for (std::size_t i = 1; i < rows.size(); ++i) {
        if (!(rows[i].b_n < rows[i - 1].b_n)) return false;
    }
    return true;
}

bool ConvergenceReport::deltas_shrinking() const noexcept {
    for (std::size_t i = 2; i < rows.size(); ++i) {
        if (!(std::abs(*rows[i].delta) < std::abs(*rows[i - 1].delta))) return false;
    }
    return true;
}

ConvergenceReport convergence_study(const ModelParams& params, const std::vector<std::size_t>& ns,
                                    double tol_b, const FindOptions& options) {
    if (ns.empty()) throw InvalidParameter("ns", "must be nonempty");
    for (std::size_t i = 1; i < ns.size(); ++i) {
        if (!(ns[i] > ns[i - 1])) throw InvalidParameter("ns", "must be strictly increasing");
    }
    ConvergenceReport report{params, tol_b, std::vector<ConvergenceRow>(ns.size())};
    parallel_for(ns.size(), [&](std::size_t i) {
        const FreeBoundaryResult r = find_boundary(params, ns[i], tol_b, options);
        report.rows[i] = {ns[i], r.b_n, std::nullopt, r.iterations, r.f_at_root};
    });
    for (std::size_t i = 1; i < ns.size(); ++i) {
        report.rows[i].delta = report.rows[i].b_n - report.rows[i - 1].b_n;
    }
    return report;
}

std::vector<std::pair<double, double>> scan_f_n(const ModelParams& params, std::size_t n,
                                                const std::vector<double>& bs, const SolveOptions& solver) {
    std::vector<std::pair<double, double>> out(bs.size());
    parallel_for(bs.size(), [&](std::size_t i) { out[i] = {bs[i], f_n(params, bs[i], n, solver)}; });
    return out;
}

std::size_t count_sign_changes(const std::vector<std::pair<double, double>>& scan) {
    std::size_t changes = 0;
    for (std::size_t i = 1; i < scan.size(); ++i) {
        if ((scan[i - 1].second < 0.0) != (scan[i].second < 0.0)) ++changes;
    }
    return changes;
}

Certificate existence_certificate(const ModelParams& params, double b1, double b2, std::size_t n,
                                  const CertificateThresholds& thresholds, std::size_t b_samples,
                                  const SolveOptions& solver) {
    if (!(b1 > params.a && b2 > b1)) throw InvalidParameter("b2", "require a < b1 < b2");
    Certificate c;
    c.b1 = b1;
    c.b2 = b2;
    c.n = n;
    c.f_b1 = f_n(params, b1, n, solver);
    c.f_b2 = f_n(params, b2, n, solver);
    c.h0_hat = std::numeric_limits<double>::infinity();
    const std::size_t samples = std::max<std::size_t>(b_samples, 2);
    for (std::size_t i = 0; i < samples; ++i) {
        const double b = b1 + (b2 - b1) * static_cast<double>(i) / static_cast<double>(samples - 1);
        const ErrorConstants k = constants(params, b);
        c.c11_hat = std::max(c.c11_hat, k.c11);
        c.h0_hat = std::min(c.h0_hat, k.h0);
    }
    c.c12_hat = c.c11_hat * std::sqrt(b2 - params.a);
    c.n0_hat = (b2 - params.a) / c.h0_hat;
    c.uniform_bound = c.c12_hat / std::sqrt(static_cast<double>(n));
    c.signs_ok = c.f_b1 <= thresholds.f_low && c.f_b2 >= thresholds.f_high;
    c.bound_ok = c.uniform_bound < thresholds.uniform;
    c.mesh_ok = static_cast<double>(n) >= c.n0_hat;
    return c;
}

}  // namespace pairstop
