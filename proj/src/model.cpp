#include "pairstop/model.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "gauss_legendre.hpp"
#include "pairstop/errors.hpp"

namespace pairstop {

void ModelParams::validate() const {
    auto require = [](bool ok, const char* field, const char* what) {
        if (!ok) throw InvalidParameter(field, what);
    };
    require(std::isfinite(mu) && mu > 0.0, "mu", "must be finite and > 0");
    require(std::isfinite(sigma) && sigma > 0.0, "sigma", "must be finite and > 0");
    require(std::isfinite(lambda) && lambda >= 0.0, "lambda", "must be finite and >= 0");
    require(std::isfinite(a) && a < 0.0, "a", "stop-loss level must be finite and < 0");
    require(std::isfinite(gamma) && gamma > 0.0, "gamma", "must be finite and > 0");
    require(std::isfinite(jmax) && jmax > 0.0, "jmax", "must be finite and > 0");
}

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

JumpDensity::JumpDensity(double gamma, double jmax) : gamma_(gamma), jmax_(jmax) {
    if (!(std::isfinite(gamma) && gamma > 0.0)) throw InvalidParameter("gamma", "must be > 0");
    if (!(std::isfinite(jmax) && jmax > 0.0)) throw InvalidParameter("jmax", "must be > 0");
    erf_j_ = std::erf(jmax_ / (gamma_ * std::numbers::sqrt2));
    norm_const_ = 1.0 / (gamma_ * std::sqrt(2.0 * std::numbers::pi) * erf_j_);
}

double JumpDensity::density(double y) const noexcept {
    if (!(std::abs(y) < jmax_)) return 0.0;
    const double z = y / gamma_;
    return norm_const_ * std::exp(-0.5 * z * z);
}

double JumpDensity::gauss_clipped(double s) const noexcept {
    const double z = std::clamp(s, -jmax_, jmax_) / gamma_;
    return norm_const_ * std::exp(-0.5 * z * z);
}

double JumpDensity::cdf(double y) const noexcept {
    if (y <= -jmax_) return 0.0;
    if (y >= jmax_) return 1.0;
    return 0.5 + 0.5 * std::erf(y / (gamma_ * std::numbers::sqrt2)) / erf_j_;
}

double JumpDensity::mass(double lo, double hi) const noexcept {
    if (hi < lo) return -mass(hi, lo);
    const double l = std::max(lo, -jmax_);
    const double u = std::min(hi, jmax_);
    if (!(u > l)) return 0.0;
    // Difference of erf is accurate near the centre; far in the tails both
    // terms are close to +-erf_j and the absolute error stays ~1e-16.
    const double k = 1.0 / (gamma_ * std::numbers::sqrt2);
    return 0.5 * (std::erf(u * k) - std::erf(l * k)) / erf_j_;
}

double JumpDensity::first_moment(double lo, double hi) const noexcept {
    if (hi < lo) return -first_moment(hi, lo);
    const double l = std::max(lo, -jmax_);
    const double u = std::min(hi, jmax_);
    if (!(u > l)) return 0.0;
    // d/ds exp(-s^2 / 2 gamma^2) = -(s / gamma^2) exp(...)
    return -gamma_ * gamma_ * (gauss_clipped(u) - gauss_clipped(l));
}

double JumpDensity::quantile(double u, double tol) const {
    if (!(u > 0.0 && u < 1.0)) throw InvalidParameter("u", "quantile argument must lie in (0, 1)");
    double lo = -jmax_;
    double hi = jmax_;
    while (hi - lo > tol) {
        const double mid = 0.5 * (lo + hi);
        if (cdf(mid) < u) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    return 0.5 * (lo + hi);
}

double PiecewiseLinearView::node(std::size_t j) const noexcept {
    if (j + 1 == values.size()) return b();
    return a + h * static_cast<double>(j);
}

double PiecewiseLinearView::operator()(double x) const noexcept {
    const std::size_t n = values.size() - 1;
    if (!(x > a) || !(x < b())) return 0.0;
    const double s = (x - a) / h;
    std::size_t j = std::min(static_cast<std::size_t>(s), n - 1);
    if (x == node(j)) return values[j];
    if (x == node(j + 1)) return values[j + 1];
    const double t = (x - node(j)) / h;
    return values[j] + t * (values[j + 1] - values[j]);
}

double convolve_jump(const JumpDensity& d, double lambda, const PiecewiseLinearView& v, double x) {
    if (lambda == 0.0) return 0.0;
    const std::size_t n = v.values.size() - 1;
    const double J = d.jmax();
    // Elements meeting (x - J, x + J).
    const double lo = std::max(v.a, x - J);
    const double hi = std::min(v.b(), x + J);
    if (!(hi > lo)) return 0.0;
    const auto first = static_cast<std::size_t>(std::max(0.0, std::floor((lo - v.a) / v.h)));
    const auto last = std::min(n, static_cast<std::size_t>(std::ceil((hi - v.a) / v.h)));
    double total = 0.0;
    for (std::size_t k = first; k < last; ++k) {
        const double y0 = v.node(k);
        const double y1 = v.node(k + 1);
        const double c0 = v.values[k];
        const double slope = (v.values[k + 1] - c0) / (y1 - y0);
        // Over y in [y0, y1], s = x - y runs over [x - y1, x - y0], and
        // v(y) = c0 + slope (y - y0) = c0 + slope ((x - y0) - s).
        const double s_lo = x - y1;
        const double s_hi = x - y0;
        const double m0 = d.mass(s_lo, s_hi);
        if (m0 == 0.0) continue;
        const double m1 = d.first_moment(s_lo, s_hi);
        total += c0 * m0 + slope * ((x - y0) * m0 - m1);
    }
    return lambda * total;
}

double apply_jump_operator(const JumpDensity& d, double lambda, const PiecewiseLinearView& v, double x) {
    if (lambda == 0.0) return 0.0;
    return convolve_jump(d, lambda, v, x) - lambda * v(x);
}

double apply_jump_operator(const JumpDensity& d, double lambda, const std::function<double(double)>& v,
                           double a, double b, double x, int panels) {
    if (lambda == 0.0) return 0.0;
    const double lo = std::max(a, x - d.jmax());
    const double hi = std::min(b, x + d.jmax());
    double conv = 0.0;
    if (hi > lo) {
        // phi is smooth on its support, so splitting at the support edges and
        // at x leaves smooth integrands on each piece.
        auto integrand = [&](double y) { return d.density(x - y) * v(y); };
        const double mid = std::clamp(x, lo, hi);
        conv = detail::gauss_composite(integrand, lo, mid, 0.0, panels) +
               detail::gauss_composite(integrand, mid, hi, 0.0, panels);
    }
    const double vx = (x > a && x < b) ? v(x) : 0.0;
    return lambda * conv - lambda * vx;
}

}  // namespace pairstop
