#include <algorithm>
#include <array>
#include <cmath>
#include <sstream>

#include "pairstop/errors.hpp"
#include "pairstop/verify.hpp"

namespace pairstop {

namespace {

constexpr std::size_t kMinSteps = 256;

struct Trajectory {
    std::vector<double> v;
    std::vector<double> dv;
};

// Shooting on `steps` uniform RK4 steps. With w = v', the equation reads
// w' = k x (w + s); the particular (p(a) = p'(a) = 0) and homogeneous
// (q(a) = 0, q'(a) = 1) solutions are combined to satisfy v(b) = 0.
Trajectory shoot(double a, double b, double k, double s, std::size_t steps) {
    const double H = (b - a) / static_cast<double>(steps);
    using State = std::array<double, 4>;  // p, p', q, q'
    auto rhs = [&](double x, const State& y) -> State {
        return {y[1], k * x * (y[1] + s), y[3], k * x * y[3]};
    };
    std::vector<State> traj(steps + 1);
    traj[0] = {0.0, 0.0, 0.0, 1.0};
    for (std::size_t i = 0; i < steps; ++i) {
        const double x = a + H * static_cast<double>(i);
        const State& y = traj[i];
        auto axpy = [](const State& u, double c, const State& d) {
            return State{u[0] + c * d[0], u[1] + c * d[1], u[2] + c * d[2], u[3] + c * d[3]};
        };
        const State k1 = rhs(x, y);
        const State k2 = rhs(x + 0.5 * H, axpy(y, 0.5 * H, k1));
        const State k3 = rhs(x + 0.5 * H, axpy(y, 0.5 * H, k2));
        const State k4 = rhs(x + H, axpy(y, H, k3));
        State next;
        for (int c = 0; c < 4; ++c) next[c] = y[c] + H / 6.0 * (k1[c] + 2.0 * k2[c] + 2.0 * k3[c] + k4[c]);
        traj[i + 1] = next;
    }
    const double alpha = -traj[steps][0] / traj[steps][2];
    Trajectory out{std::vector<double>(steps + 1), std::vector<double>(steps + 1)};
    for (std::size_t i = 0; i <= steps; ++i) {
        out.v[i] = traj[i][0] + alpha * traj[i][2];
        out.dv[i] = traj[i][1] + alpha * traj[i][3];
    }
    out.v[steps] = 0.0;
    return out;
}

}  // namespace

OdeOracle::OdeOracle(const ModelParams& params, double b, double tol, double forcing_scale,
                     std::size_t max_steps)
    : a_(params.a), b_(b), curvature_coeff_(2.0 * params.mu / (params.sigma * params.sigma)),
      forcing_(forcing_scale) {
    params.validate();
    if (params.lambda != 0.0) throw InvalidParameter("lambda", "ODE oracle requires lambda = 0");
    if (!(b > params.a)) throw InvalidParameter("b", "must satisfy b > a");
    if (!(tol > 0.0)) throw InvalidParameter("tol", "must be > 0");

    std::size_t steps = kMinSteps;
    Trajectory coarse = shoot(a_, b_, curvature_coeff_, forcing_, steps);
    double err = std::numeric_limits<double>::infinity();
    while (2 * steps <= max_steps) {
        const Trajectory fine = shoot(a_, b_, curvature_coeff_, forcing_, 2 * steps);
        // Fourth-order Richardson at the coarse nodes.
        err = 0.0;
        x_.resize(steps + 1);
        v_.resize(steps + 1);
        dv_.resize(steps + 1);
        for (std::size_t i = 0; i <= steps; ++i) {
            const double dv = (fine.v[2 * i] - coarse.v[i]) / 15.0;
            const double ddv = (fine.dv[2 * i] - coarse.dv[i]) / 15.0;
            err = std::max({err, std::abs(dv), std::abs(ddv) * (b_ - a_)});
            x_[i] = i == steps ? b_ : a_ + (b_ - a_) * static_cast<double>(i) / static_cast<double>(steps);
            v_[i] = fine.v[2 * i] + dv;
            dv_[i] = fine.dv[2 * i] + ddv;
        }
        if (err <= tol) break;
        coarse = fine;
        steps *= 2;
    }
    error_estimate_ = err;
    if (!(err <= tol)) {
        std::ostringstream msg;
        msg << "ODE oracle did not reach tol " << tol << " (estimate " << err << " at " << steps << " steps)";
        throw IntegrationError(msg.str());
    }
    v_.front() = 0.0;
    v_.back() = 0.0;
}

double OdeOracle::operator()(double x) const noexcept {
    if (!(x > a_) || !(x < b_)) return 0.0;
    const std::size_t n = x_.size() - 1;
    const double H = (b_ - a_) / static_cast<double>(n);
    const std::size_t i = std::min(static_cast<std::size_t>((x - a_) / H), n - 1);
    // Quintic Hermite from v, v', v'' = k x (v' + s) at both ends.
    const double x0 = x_[i], x1 = x_[i + 1];
    const double t = (x - x0) / (x1 - x0);
    const double hh = x1 - x0;
    const double f0 = v_[i], f1 = v_[i + 1];
    const double d0 = dv_[i] * hh, d1 = dv_[i + 1] * hh;
    const double s0 = curvature_coeff_ * x0 * (dv_[i] + forcing_) * hh * hh;
    const double s1 = curvature_coeff_ * x1 * (dv_[i + 1] + forcing_) * hh * hh;
    const double t2 = t * t, t3 = t2 * t, t4 = t3 * t, t5 = t4 * t;
    const double h00 = 1 - 10 * t3 + 15 * t4 - 6 * t5;
    const double h10 = t - 6 * t3 + 8 * t4 - 3 * t5;
    const double h20 = 0.5 * (t2 - 3 * t3 + 3 * t4 - t5);
    const double h01 = 10 * t3 - 15 * t4 + 6 * t5;
    const double h11 = -4 * t3 + 7 * t4 - 3 * t5;
    const double h21 = 0.5 * (t3 - 2 * t4 + t5);
    return h00 * f0 + h10 * d0 + h20 * s0 + h01 * f1 + h11 * d1 + h21 * s1;
}

double OdeOracle::derivative(double x) const noexcept {
    x = std::clamp(x, a_, b_);
    const std::size_t n = x_.size() - 1;
    const double H = (b_ - a_) / static_cast<double>(n);
    const std::size_t i = std::min(static_cast<std::size_t>((x - a_) / H), n - 1);
    if (x == x_[i]) return dv_[i];
    if (x == x_[i + 1]) return dv_[i + 1];
    // v' solves w' = k x (w + s); integrate exactly from the nearer node:
    // w + s = (w0 + s) exp(k (x^2 - x0^2) / 2).
    const std::size_t j = (x - x_[i] <= x_[i + 1] - x) ? i : i + 1;
    const double x0 = x_[j];
    return (dv_[j] + forcing_) * std::exp(0.5 * curvature_coeff_ * (x - x0) * (x + x0)) - forcing_;
}

double ode_free_boundary(const ModelParams& params, double lo, double hi, double tol_b, double ode_tol) {
    auto f = [&](double b) {
        const OdeOracle oracle(params, b, ode_tol);
        return oracle.derivative(b);
    };
    double flo = f(lo);
    const double fhi = f(hi);
    if (!(flo < 0.0 && fhi > 0.0)) {
        throw BracketError("ODE oracle: interval does not bracket a root", {{lo, flo}, {hi, fhi}});
    }
    while (hi - lo > 2.0 * tol_b) {
        const double mid = 0.5 * (lo + hi);
        const double fm = f(mid);
        if (fm == 0.0) return mid;
        if (fm < 0.0) {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    return 0.5 * (lo + hi);
}

}  // namespace pairstop
