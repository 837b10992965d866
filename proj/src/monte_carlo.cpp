#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <tuple>

#include <boost/random/normal_distribution.hpp>

#include "pairstop/errors.hpp"
#include "pairstop/parallel.hpp"
#include "pairstop/verify.hpp"

namespace pairstop {

namespace {

// Monitoring ratio between the reported grid and the bias-check grid.
constexpr unsigned kRefine = 4;

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

struct PathOutcome {
    double coarse = 0.0;  // stopped value monitored every dt (and at jumps)
    double fine = 0.0;    // same path monitored every dt / kRefine
    double exit_time = 0.0;
    std::uint32_t jumps = 0;
};

class PathSimulator {
public:
    PathSimulator(const ModelParams& p, double b, double dt, bool bias_check)
        : p_(p), b_(b), density_(p), sub_(bias_check ? kRefine : 1), step_(dt / sub_) {
        decay_ = std::exp(-p.mu * step_);
        step_sd_ = ou_sd(step_);
    }

    PathOutcome run(double x0, std::uint64_t seed, std::size_t path) const {
        PathOutcome out{x0, x0, 0.0, 0};
        if (x0 <= p_.a || x0 >= b_) return out;

        std::mt19937_64 rng(splitmix64(seed ^ splitmix64(path)));
        boost::random::normal_distribution<double> normal;
        std::uniform_real_distribution<double> uniform;
        const double inf = std::numeric_limits<double>::infinity();
        std::exponential_distribution<double> waiting(p_.lambda > 0.0 ? p_.lambda : 1.0);
        auto next_wait = [&] { return p_.lambda > 0.0 ? waiting(rng) : inf; };

        double x = x0;
        double t = 0.0;
        double to_grid = step_;
        double to_jump = next_wait();
        std::uint64_t steps = 0;
        bool fine_open = true;
        auto outside = [&](double u) { return u <= p_.a || u >= b_; };

        for (;;) {
            bool coarse_check = false;
            if (to_jump < to_grid) {
                x = ou_step(x, to_jump, normal(rng));
                t += to_jump;
                to_grid -= to_jump;
                double u = uniform(rng);
                while (u <= 0.0) u = uniform(rng);
                x += density_.quantile(u);
                ++out.jumps;
                to_jump = next_wait();
                coarse_check = true;
            } else {
                x = to_grid == step_ ? decay_ * x + step_sd_ * normal(rng) : ou_step(x, to_grid, normal(rng));
                t += to_grid;
                to_jump -= to_grid;
                to_grid = step_;
                ++steps;
                coarse_check = steps % sub_ == 0;
            }
            if (fine_open && outside(x)) {
                out.fine = x;
                fine_open = false;
            }
            if (coarse_check && outside(x)) {
                out.coarse = x;
                out.exit_time = t;
                return out;
            }
        }
    }

private:
    double ou_sd(double tau) const { return ou_transition(p_, 0.0, tau, 1.0); }
    double ou_step(double x, double tau, double z) const { return ou_transition(p_, x, tau, z); }

    ModelParams p_;
    double b_;
    JumpDensity density_;
    unsigned sub_;
    double step_;
    double decay_;
    double step_sd_;
};

void check_inputs(const ModelParams& params, double b, double x0, std::size_t n_paths, double dt) {
    params.validate();
    if (!(b > params.a)) throw InvalidParameter("b", "must satisfy b > a");
    if (!(x0 >= params.a && x0 <= b)) throw InvalidParameter("x0", "must lie in [a, b]");
    if (n_paths == 0) throw InvalidParameter("paths", "must be >= 1");
    if (!(dt > 0.0 && std::isfinite(dt))) throw InvalidParameter("dt", "must be > 0");
}

// Paths [0, coupled) are monitored on both grids; the rest on the dt grid only.
std::vector<PathOutcome> run_paths(const ModelParams& params, double b, double x0, std::size_t n_paths,
                                   double dt, std::uint64_t seed, std::size_t coupled, std::size_t threads) {
    const PathSimulator both(params, b, dt, true);
    const PathSimulator coarse_only(params, b, dt, false);
    std::vector<PathOutcome> outcomes(n_paths);
    parallel_for(
        n_paths,
        [&](std::size_t i) { outcomes[i] = (i < coupled ? both : coarse_only).run(x0, seed, i); },
        threads == 0 ? thread_count() : threads);
    return outcomes;
}

std::pair<double, double> mean_and_stderr(const std::vector<PathOutcome>& paths, std::size_t count,
                                          double PathOutcome::*field) {
    const auto n = static_cast<double>(count);
    double mean = 0.0;
    for (std::size_t i = 0; i < count; ++i) mean += paths[i].*field;
    mean /= n;
    if (count < 2) return {mean, 0.0};
    double ss = 0.0;
    for (std::size_t i = 0; i < count; ++i) ss += (paths[i].*field - mean) * (paths[i].*field - mean);
    return {mean, std::sqrt(ss / (n - 1.0) / n)};
}

}  // namespace

double ou_transition(const ModelParams& params, double x, double tau, double z) {
    const double sd = params.sigma * std::sqrt(-std::expm1(-2.0 * params.mu * tau) / (2.0 * params.mu));
    return x * std::exp(-params.mu * tau) + sd * z;
}

double default_time_step(const ModelParams& params, double b) {
    const double r = (b - params.a) / (200.0 * params.sigma);
    return r * r;
}

McEstimate simulate_stopped_value(const ModelParams& params, double b, double x0, std::size_t n_paths,
                                  double dt, std::uint64_t seed, const McOptions& options) {
    check_inputs(params, b, x0, n_paths, dt);
    if (x0 <= params.a || x0 >= b) {
        McEstimate est;
        est.x0 = est.mean = est.min_stopped = est.max_stopped = x0;
        est.n_paths = n_paths;
        est.dt = dt;
        est.seed = seed;
        if (options.bias_check) {
            est.fine_mean = x0;
            est.fine_std_err = 0.0;
            est.bias_paths = options.bias_paths == 0 ? n_paths : std::min(n_paths, options.bias_paths);
        }
        return est;
    }
    const std::size_t coupled =
        options.bias_check ? (options.bias_paths == 0 ? n_paths : std::min(n_paths, options.bias_paths)) : 0;
    const std::vector<PathOutcome> paths = run_paths(params, b, x0, n_paths, dt, seed, coupled, options.threads);

    McEstimate est;
    est.x0 = x0;
    est.n_paths = n_paths;
    est.dt = dt;
    est.seed = seed;
    std::tie(est.mean, est.std_err) = mean_and_stderr(paths, n_paths, &PathOutcome::coarse);
    if (coupled > 0) {
        const auto [fm, fse] = mean_and_stderr(paths, coupled, &PathOutcome::fine);
        const double cm = coupled == n_paths ? est.mean : mean_and_stderr(paths, coupled, &PathOutcome::coarse).first;
        est.fine_mean = fm;
        est.fine_std_err = fse;
        est.bias_paths = coupled;
        est.bias_allowance = 2.0 * std::abs(cm - fm);
    }
    est.min_stopped = std::numeric_limits<double>::infinity();
    est.max_stopped = -std::numeric_limits<double>::infinity();
    double exit_sum = 0.0;
    for (std::size_t i = 0; i < n_paths; ++i) {
        const PathOutcome& p = paths[i];
        est.min_stopped = std::min({est.min_stopped, p.coarse, p.fine});
        est.max_stopped = std::max({est.max_stopped, p.coarse, p.fine});
        exit_sum += p.exit_time;
        est.jumps += p.jumps;
    }
    est.mean_exit_time = exit_sum / static_cast<double>(n_paths);
    return est;
}

std::vector<double> simulate_stopped_values(const ModelParams& params, double b, double x0,
                                            std::size_t n_paths, double dt, std::uint64_t seed,
                                            std::size_t threads) {
    check_inputs(params, b, x0, n_paths, dt);
    const std::vector<PathOutcome> paths = run_paths(params, b, x0, n_paths, dt, seed, 0, threads);
    std::vector<double> values(n_paths);
    for (std::size_t i = 0; i < n_paths; ++i) values[i] = paths[i].coarse;
    return values;
}

}  // namespace pairstop
