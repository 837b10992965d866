#include <doctest.h>

#include <cmath>
#include <vector>

#include "pairstop/boundary.hpp"
#include "pairstop/errors.hpp"

using namespace pairstop;

TEST_CASE("F_N is negative for b <= 0") {
    const ModelParams p;
    for (double b : {-0.09, -0.05, -0.01, 0.0}) CHECK(f_n(p, b, 400) < 0.0);
}

TEST_CASE("F_N is deterministic") {
    const ModelParams p;
    CHECK(f_n(p, 0.04, 600) == f_n(p, 0.04, 600));
}

TEST_CASE("bracketing from below and from above") {
    const ModelParams p;
    SUBCASE("upward search") {
        const Bracket br = bracket_root(p, 400, 0.01, 1.5);
        CHECK(br.f_lo < 0.0);
        CHECK(br.f_hi >= 0.0);
        CHECK(br.b_lo >= 0.0);
        CHECK(br.b_hi == doctest::Approx(1.5 * br.b_lo));
        CHECK(br.samples.size() >= 2);
    }
    SUBCASE("downward search") {
        const Bracket br = bracket_root(p, 400, 0.4, 2.0);
        CHECK(br.f_lo < 0.0);
        CHECK(br.f_hi >= 0.0);
        CHECK(br.b_lo >= 0.0);
        CHECK(br.b_lo < br.b_hi);
    }
    SUBCASE("falls back to b = 0 when shrinking does not help") {
        BracketOptions o;
        o.max_expansions = 1;
        const Bracket br = bracket_root(p, 400, 0.4, 1.01, o);
        CHECK(br.b_lo == 0.0);
        CHECK(br.f_lo < 0.0);
    }
}

TEST_CASE("bracketing rejects bad input and reports the samples on failure") {
    const ModelParams p;
    auto field_of = [&](double b_init, double growth) {
        try {
            bracket_root(p, 100, b_init, growth);
        } catch (const InvalidParameter& e) {
            return e.field();
        }
        return std::string{};
    };
    CHECK(field_of(0.0, 1.5) == "b_init");
    CHECK(field_of(0.01, 1.0) == "growth");

    BracketOptions o;
    o.max_expansions = 2;
    try {
        bracket_root(p, 200, 1e-4, 1.01, o);
        FAIL("expected BracketError");
    } catch (const BracketError& e) {
        CHECK(e.samples().size() == 3);
        for (const auto& [b, f] : e.samples()) CHECK(f < 0.0);
        CHECK(std::string(e.what()).find("no sign change") != std::string::npos);
    }
}

TEST_CASE("free boundary at N = 2000") {
    const ModelParams p;
    const double tol = 1e-6;
    const FreeBoundaryResult r = find_boundary(p, 2000, tol);
    CHECK(std::abs(r.b_n - 0.0572939) <= 5e-4);
    CHECK(r.b_n > 0.0);
    CHECK(r.n == 2000);
    CHECK(r.bracket.second - r.bracket.first <= 2.0 * tol);
    CHECK(r.b_n == doctest::Approx(0.5 * (r.bracket.first + r.bracket.second)));
    CHECK(r.iterations > 0);
    CHECK(r.solution.b == r.b_n);
    CHECK(r.f_at_root == derivative_at_b(r.solution));

    const double f_lo = f_n(p, r.bracket.first, 2000);
    const double f_hi = f_n(p, r.bracket.second, 2000);
    CHECK(f_lo < 0.0);
    CHECK(f_hi > 0.0);
    const double slope = (f_hi - f_lo) / (r.bracket.second - r.bracket.first);
    CHECK(std::abs(r.f_at_root) <= slope * 2.0 * tol);
}

TEST_CASE("free boundary input validation") {
    const ModelParams p;
    auto field_of = [&](std::size_t n, double tol) {
        try {
            find_boundary(p, n, tol);
        } catch (const InvalidParameter& e) {
            return e.field();
        }
        return std::string{};
    };
    CHECK(field_of(1, 1e-6) == "n");
    CHECK(field_of(100, 0.0) == "tol_b");
    ModelParams bad;
    bad.sigma = 0.0;
    CHECK_THROWS_AS(find_boundary(bad, 100, 1e-6), InvalidParameter);
}

TEST_CASE("convergence study layout") {
    const ModelParams p;
    const ConvergenceReport rep = convergence_study(p, {250, 500, 1000}, 1e-7);
    REQUIRE(rep.rows.size() == 3);
    CHECK(rep.rows[0].n == 250);
    CHECK_FALSE(rep.rows[0].delta.has_value());
    for (std::size_t i = 1; i < 3; ++i) {
        CHECK(*rep.rows[i].delta == rep.rows[i].b_n - rep.rows[i - 1].b_n);
    }
    CHECK(rep.tol_b == 1e-7);
    CHECK(rep.strictly_decreasing());
    CHECK(rep.deltas_shrinking());

    CHECK_THROWS_AS(convergence_study(p, {}, 1e-6), InvalidParameter);
    CHECK_THROWS_AS(convergence_study(p, {500, 500}, 1e-6), InvalidParameter);
}

TEST_CASE("report predicates") {
    ConvergenceReport rep;
    rep.rows = {{10, 0.5, std::nullopt, 0, 0.0}, {20, 0.4, -0.1, 0, 0.0}, {30, 0.35, -0.05, 0, 0.0}};
    CHECK(rep.strictly_decreasing());
    CHECK(rep.deltas_shrinking());
    rep.rows[2].b_n = 0.4;
    rep.rows[2].delta = 0.0;
    CHECK_FALSE(rep.strictly_decreasing());
    rep.rows[2].delta = 0.2;
    CHECK_FALSE(rep.deltas_shrinking());
}

TEST_CASE("F_N has a single sign change on [0, 0.1]") {
    std::vector<double> bs;
    for (int i = 0; i <= 20; ++i) bs.push_back(0.005 * i);
    const auto scan = scan_f_n(ModelParams{}, 500, bs);
    REQUIRE(scan.size() == bs.size());
    CHECK(count_sign_changes(scan) == 1);
    CHECK(scan.front().second < 0.0);
    CHECK(scan.back().second > 0.0);
    CHECK(count_sign_changes({{0, -1}, {1, 1}, {2, -1}}) == 2);
}

TEST_CASE("existence certificate at the default parameters") {
    const Certificate c = existence_certificate(ModelParams{}, 0.0, 0.1, 2000);
    CHECK(c.f_b1 <= -0.5);
    CHECK(c.f_b2 >= 0.5);
    CHECK(c.signs_ok);
    // The analytic constants are far too large for a practical N.
    CHECK_FALSE(c.bound_ok);
    CHECK_FALSE(c.mesh_ok);
    CHECK_FALSE(c.holds());
    CHECK(c.c12_hat == doctest::Approx(c.c11_hat * std::sqrt(0.2)));
    CHECK(c.uniform_bound == doctest::Approx(c.c12_hat / std::sqrt(2000.0)));
    CHECK(c.n0_hat == doctest::Approx(0.2 / c.h0_hat));
    CHECK(c.c11_hat >= constants(ModelParams{}, 0.1).c11);
    CHECK(c.h0_hat <= constants(ModelParams{}, 0.0).h0);

    CertificateThresholds strict;
    strict.f_low = -0.6;
    CHECK_FALSE(existence_certificate(ModelParams{}, 0.0, 0.1, 2000, strict).signs_ok);
    CHECK_THROWS_AS(existence_certificate(ModelParams{}, 0.1, 0.05, 100), InvalidParameter);
}
