#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "oracles.hpp"
#include "pairstop/boundary.hpp"
#include "pairstop/errors.hpp"
#include "pairstop/verify.hpp"

using namespace pairstop;

namespace {

const FreeBoundaryResult& default_root() {
    static const FreeBoundaryResult r = find_boundary(ModelParams{}, 1000, 1e-11);
    return r;
}

}  // namespace

TEST_CASE("condition (a) sampling and verdict at the default parameters") {
    const BvpSolution& sol = default_root().solution;
    const ConditionReport rep = check_condition_a(sol, sol.params.lambda, JumpDensity(sol.params), 512);
    REQUIRE(rep.margin_curve.size() == 512);
    CHECK(rep.margin_curve.back().x == sol.b + sol.params.jmax);
    for (const auto& pt : rep.margin_curve) {
        CHECK(pt.x > sol.b);
        CHECK(pt.x <= sol.b + sol.params.jmax);
        CHECK(pt.rhs == sol.params.mu * pt.x);
        CHECK(rep.worst_margin <= pt.rhs - pt.lhs);
    }
    CHECK(rep.condition_a_holds);
    CHECK(rep.worst_margin > 0.0);
    CHECK(rep.condition_a_holds == (rep.worst_margin >= 0.0));
}

TEST_CASE("condition (a) integral against brute-force quadrature") {
    const BvpSolution& sol = default_root().solution;
    const ModelParams& p = sol.params;
    const ConditionReport rep = check_condition_a(sol, p.lambda, JumpDensity(p), 16);
    for (const auto& pt : rep.margin_curve) {
        const double ref = p.lambda * oracle::integrate(
                                          [&](double y) { return eval(sol, y) * oracle::truncated_normal(y - pt.x, p.gamma, p.jmax); },
                                          std::max(p.a, pt.x - p.jmax), sol.b, {}, 1e-14);
        CHECK(std::abs(pt.lhs - ref) < 1e-9);
    }
}

TEST_CASE("condition (a): jump-free case and the automatic region") {
    ModelParams p;
    p.lambda = 0.0;
    const BvpSolution sol = solve(assemble(p, 0.0573, 300));
    const ConditionReport rep = check_condition_a(sol, 0.0, JumpDensity(p), 64);
    for (const auto& pt : rep.margin_curve) CHECK(pt.lhs == 0.0);
    CHECK(rep.condition_a_holds);

    const BvpSolution& s10 = default_root().solution;
    const JumpDensity d(s10.params);
    for (double dx : {0.0, 1e-9, 0.01, 1.0}) {
        CHECK(convolve_jump(d, s10.params.lambda, s10.view(), s10.b + s10.params.jmax + dx) == 0.0);
    }
    CHECK_THROWS_AS(check_condition_a(s10, 10.0, d, 0), InvalidParameter);
}

TEST_CASE("condition (b)") {
    SUBCASE("holds at the root with a tight bisection") {
        const ConditionReport rep = check_condition_b(default_root().solution);
        CHECK(rep.condition_b_holds);
        CHECK(rep.min_v >= -1e-12);
    }
    SUBCASE("zero load gives v = 0") {
        FemSystem sys = assemble(ModelParams{}, 0.0573, 100);
        std::fill(sys.load.begin(), sys.load.end(), 0.0);
        const ConditionReport rep = check_condition_b(solve(sys));
        CHECK(rep.min_v == 0.0);
        CHECK(rep.condition_b_holds);
    }
    SUBCASE("sign-flipped load fails") {
        FemSystem sys = assemble(ModelParams{}, 0.0573, 100);
        for (double& f : sys.load) f = -f;
        const ConditionReport rep = check_condition_b(solve(sys));
        CHECK(rep.min_v < 0.0);
        CHECK_FALSE(rep.condition_b_holds);
    }
    SUBCASE("merged report") {
        const ConditionReport rep = check_conditions(default_root().solution, 32);
        CHECK(rep.margin_curve.size() == 32);
        CHECK(rep.condition_a_holds);
        CHECK(rep.condition_b_holds);
    }
}

TEST_CASE("jump sizes: Kolmogorov-Smirnov test of inverse-cdf sampling") {
    const JumpDensity d(0.02, 0.05);
    std::mt19937_64 rng(31337);
    std::uniform_real_distribution<double> u01;
    const std::size_t n = 1000000;
    std::vector<double> xs(n);
    for (double& x : xs) {
        double u = u01(rng);
        while (u <= 0.0) u = u01(rng);
        x = d.quantile(u);
    }
    std::sort(xs.begin(), xs.end());
    CHECK(xs.front() > -0.05);
    CHECK(xs.back() < 0.05);
    double ks = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double f = d.cdf(xs[i]);
        ks = std::max({ks, static_cast<double>(i + 1) / n - f, f - static_cast<double>(i) / n});
    }
    CHECK(ks < oracle::ks_critical_1pct(n));
}

TEST_CASE("exact OU transition: one-step mean and variance") {
    ModelParams p;
    p.lambda = 0.0;
    const double x = 0.03, tau = 0.01;
    std::mt19937_64 rng(404);
    std::normal_distribution<double> z;
    const std::size_t n = 1000000;
    double s = 0.0, ss = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double y = ou_transition(p, x, tau, z(rng));
        s += y;
        ss += y * y;
    }
    const double mean = s / n;
    const double var = ss / n - mean * mean;
    const double m_exact = x * std::exp(-p.mu * tau);
    const double v_exact = p.sigma * p.sigma * (1.0 - std::exp(-2.0 * p.mu * tau)) / (2.0 * p.mu);
    CHECK(std::abs(mean - m_exact) <= 3.0 * std::sqrt(v_exact / n));
    // Var of the sample variance of a Gaussian is 2 v^2 / (n - 1).
    CHECK(std::abs(var - v_exact) <= 3.0 * v_exact * std::sqrt(2.0 / (n - 1)));
    CHECK(ou_transition(p, x, 0.0, 1.0) == x);
}

TEST_CASE("Monte Carlo: input validation and boundary starts") {
    const ModelParams p;
    const double b = 0.0573;
    auto field_of = [&](double x0, std::size_t paths, double dt) {
        try {
            simulate_stopped_value(p, b, x0, paths, dt, 1);
        } catch (const InvalidParameter& e) {
            return e.field();
        }
        return std::string{};
    };
    CHECK(field_of(-0.2, 10, 1e-4) == "x0");
    CHECK(field_of(0.06, 10, 1e-4) == "x0");
    CHECK(field_of(0.0, 0, 1e-4) == "paths");
    CHECK(field_of(0.0, 10, 0.0) == "dt");

    const McEstimate at_a = simulate_stopped_value(p, b, p.a, 1000, 1e-4, 3);
    CHECK(at_a.mean == p.a);
    CHECK(at_a.std_err == 0.0);
    const McEstimate at_b = simulate_stopped_value(p, b, b, 1000, 1e-4, 3);
    CHECK(at_b.mean == b);
    CHECK(at_b.std_err == 0.0);
}

TEST_CASE("Monte Carlo: reproducibility, thread independence and standard error") {
    const ModelParams p;
    const double b = 0.0573;
    const double dt = default_time_step(p, b);
    CHECK(p.sigma * std::sqrt(dt) == doctest::Approx((b - p.a) / 200.0));

    McOptions one, three;
    one.threads = 1;
    three.threads = 3;
    const McEstimate e1 = simulate_stopped_value(p, b, 0.0, 3000, dt, 17, one);
    const McEstimate e3 = simulate_stopped_value(p, b, 0.0, 3000, dt, 17, three);
    CHECK(e1.mean == e3.mean);
    CHECK(e1.std_err == e3.std_err);
    CHECK(*e1.fine_mean == *e3.fine_mean);
    CHECK(e1.seed == 17);
    CHECK(e1.n_paths == 3000);
    CHECK(e1.bias_paths == 3000);
    CHECK(e1.bias_allowance == doctest::Approx(2.0 * std::abs(e1.mean - *e1.fine_mean)));
    CHECK(simulate_stopped_value(p, b, 0.0, 3000, dt, 18, one).mean != e1.mean);

    McOptions plain;
    plain.bias_check = false;
    const McEstimate e = simulate_stopped_value(p, b, 0.0, 3000, dt, 17, plain);
    CHECK_FALSE(e.fine_mean.has_value());
    const std::vector<double> vals = simulate_stopped_values(p, b, 0.0, 3000, dt, 17);
    double m = 0.0;
    for (double v : vals) m += v;
    m /= vals.size();
    double ss = 0.0;
    for (double v : vals) ss += (v - m) * (v - m);
    CHECK(e.mean == doctest::Approx(m).epsilon(1e-14));
    CHECK(e.std_err == doctest::Approx(std::sqrt(ss / (vals.size() - 1)) / std::sqrt(double(vals.size()))).epsilon(1e-12));

    McOptions partial;
    partial.bias_paths = 1000;
    const McEstimate ep = simulate_stopped_value(p, b, 0.0, 3000, dt, 17, partial);
    CHECK(ep.bias_paths == 1000);
    CHECK(ep.fine_mean.has_value());
}

TEST_CASE("Monte Carlo: stopped values stay within one jump of the barriers") {
    const ModelParams p;
    const double b = 0.0573;
    const std::vector<double> vals = simulate_stopped_values(p, b, 0.02, 5000, default_time_step(p, b), 5);
    for (double v : vals) {
        CHECK(v >= p.a - p.jmax);
        CHECK(v <= b + p.jmax);
        CHECK((v <= p.a || v >= b));
    }
}

TEST_CASE("ODE oracle against the closed form") {
    ModelParams p;
    p.lambda = 0.0;
    const double b = 0.06;
    const OdeOracle ode(p, b, 1e-12);
    const oracle::JumpFreeExact exact(p.mu, p.sigma, p.a, b);
    CHECK(ode.error_estimate() <= 1e-12);
    CHECK(ode(p.a) == 0.0);
    CHECK(ode(b) == 0.0);
    CHECK(ode(-0.5) == 0.0);
    for (double x = -0.0999; x < b; x += 0.00373) {
        CHECK(std::abs(ode(x) - exact.value(x)) < 1e-10);
        CHECK(std::abs(ode.derivative(x) - exact.derivative(x)) < 1e-9);
    }
    CHECK(std::abs(ode.derivative(b) - exact.derivative(b)) < 1e-9);
}

TEST_CASE("ODE oracle: homogeneous problem, symmetry and failures") {
    ModelParams p;
    p.lambda = 0.0;
    const OdeOracle zero(p, 0.05, 1e-12, 0.0);
    for (double x = -0.09; x < 0.05; x += 0.01) CHECK(zero(x) == 0.0);

    // With a = -b the solution is odd and its derivative even.
    ModelParams sym = p;
    sym.a = -0.08;
    const OdeOracle ode(sym, 0.08, 1e-12);
    for (double x : {0.01, 0.033, 0.07}) {
        CHECK(std::abs(ode(x) + ode(-x)) < 1e-11);
        CHECK(std::abs(ode.derivative(x) - ode.derivative(-x)) < 1e-10);
    }

    CHECK_THROWS_AS(OdeOracle(ModelParams{}, 0.05, 1e-10), InvalidParameter);
    CHECK_THROWS_AS(OdeOracle(p, -0.2, 1e-10), InvalidParameter);
    try {
        OdeOracle(p, 0.05, 1e-15, 1.0, 512);
        FAIL("expected IntegrationError");
    } catch (const IntegrationError& e) {
        CHECK(std::string(e.what()).find("did not reach") != std::string::npos);
    }
}

TEST_CASE("jump-free free boundary from the ODE oracle") {
    ModelParams p;
    p.lambda = 0.0;
    const double kappa = p.mu / (p.sigma * p.sigma);
    // Smooth fit: (b - a) exp(kappa b^2) = int_a^b exp(kappa t^2) dt.
    auto g = [&](double b) {
        return (b - p.a) * std::exp(kappa * b * b) -
               oracle::integrate([&](double t) { return std::exp(kappa * t * t); }, p.a, b, {0.0});
    };
    double lo = 0.001, hi = 0.1;
    REQUIRE(g(lo) < 0.0);
    REQUIRE(g(hi) > 0.0);
    for (int i = 0; i < 60; ++i) {
        const double mid = 0.5 * (lo + hi);
        (g(mid) < 0.0 ? lo : hi) = mid;
    }
    const double b_exact = 0.5 * (lo + hi);
    CHECK(std::abs(ode_free_boundary(p, 0.001, 0.1, 1e-10) - b_exact) < 1e-8);
    CHECK_THROWS_AS(ode_free_boundary(p, 0.08, 0.1, 1e-8), BracketError);
}

TEST_CASE("Monte Carlo agrees with the finite element value without jumps") {
    ModelParams p;
    p.lambda = 0.0;
    const double b = 0.0573;
    const BvpSolution sol = solve(assemble(p, b, 4000));
    McOptions plain;
    plain.bias_check = false;
    // At the default step the missed-crossing bias (~5e-4) exceeds 3 se; it scales like sqrt(dt).
    const double dt = default_time_step(p, b) / 16.0;
    const McEstimate e = simulate_stopped_value(p, b, 0.0, 200000, dt, 42, plain);
    MESSAGE("MC ", e.mean, " +- ", e.std_err, ", FEM ", value_function(sol, 0.0));
    CHECK(std::abs(e.mean - value_function(sol, 0.0)) <= 3.0 * e.std_err);
}
