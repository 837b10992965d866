#include "linear_solver.hpp"

#include <lapacke.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "pairstop/errors.hpp"

namespace pairstop::detail {

namespace {

constexpr double kSingularRcond = 1e-14;
// GMRES result accepted on stagnation if its backward error is below this.
constexpr double kStagnationAccept = 1e-12;

[[noreturn]] void throw_singular(const std::string& why, const SolveInfo& info) {
    std::ostringstream msg;
    msg << "singular Galerkin system (" << why << "); h = " << info.h << ", h0 = " << info.h0
        << ", h/h0 = " << info.h_over_h0();
    throw SingularSystemError(msg.str(), info.h, info.h0);
}

double inf_norm(std::span<const double> v) {
    double m = 0.0;
    for (double x : v) m = std::max(m, std::abs(x));
    return m;
}

double norm2(std::span<const double> v) {
    double s = 0.0;
    for (double x : v) s += x * x;
    return std::sqrt(s);
}

std::vector<double> solve_dense(const FemSystem& sys, SolveInfo& info) {
    const auto m = static_cast<lapack_int>(sys.size());
    std::vector<double> mat(static_cast<std::size_t>(m) * m);
    for (lapack_int c = 0; c < m; ++c) {
        for (lapack_int r = 0; r < m; ++r) {
            mat[static_cast<std::size_t>(c) * m + r] = sys.entry(r, c);
        }
    }
    const double anorm1 = [&] {
        double best = 0.0;
        for (lapack_int c = 0; c < m; ++c) {
            double s = 0.0;
            for (lapack_int r = 0; r < m; ++r) s += std::abs(mat[static_cast<std::size_t>(c) * m + r]);
            best = std::max(best, s);
        }
        return best;
    }();
    std::vector<lapack_int> piv(m);
    const lapack_int fact = LAPACKE_dgetrf(LAPACK_COL_MAJOR, m, m, mat.data(), m, piv.data());
    if (fact > 0) throw_singular("exact zero pivot in dense LU", info);
    if (fact < 0) throw NumericalError("dgetrf: invalid argument");
    double rcond = 0.0;
    LAPACKE_dgecon(LAPACK_COL_MAJOR, '1', m, mat.data(), m, anorm1, &rcond);
    info.rcond = rcond;
    if (!(rcond > kSingularRcond)) throw_singular("dense LU condition estimate below threshold", info);
    std::vector<double> x(sys.load);
    LAPACKE_dgetrs(LAPACK_COL_MAJOR, 'N', m, 1, mat.data(), m, piv.data(), x.data(), m);
    return x;
}

std::vector<double> solve_banded(const FemSystem& sys, SolveInfo& info) {
    const auto m = static_cast<lapack_int>(sys.size());
    const auto kb = static_cast<lapack_int>(std::max<std::size_t>(sys.half_bandwidth(), 1));
    const lapack_int ldab = 3 * kb + 1;
    std::vector<double> ab(static_cast<std::size_t>(ldab) * m, 0.0);
    double anorm1 = 0.0;
    for (lapack_int c = 0; c < m; ++c) {
        double colsum = 0.0;
        for (lapack_int r = std::max<lapack_int>(0, c - kb); r <= std::min(m - 1, c + kb); ++r) {
            const double v = sys.entry(r, c);
            ab[static_cast<std::size_t>(c) * ldab + (2 * kb + r - c)] = v;
            colsum += std::abs(v);
        }
        anorm1 = std::max(anorm1, colsum);
    }
    std::vector<lapack_int> piv(m);
    const lapack_int fact = LAPACKE_dgbtrf(LAPACK_COL_MAJOR, m, m, kb, kb, ab.data(), ldab, piv.data());
    if (fact > 0) throw_singular("exact zero pivot in banded LU", info);
    if (fact < 0) throw NumericalError("dgbtrf: invalid argument");
    double rcond = 0.0;
    LAPACKE_dgbcon(LAPACK_COL_MAJOR, '1', m, kb, kb, ab.data(), ldab, piv.data(), anorm1, &rcond);
    info.rcond = rcond;
    if (!(rcond > kSingularRcond)) throw_singular("banded LU condition estimate below threshold", info);
    std::vector<double> x(sys.load);
    LAPACKE_dgbtrs(LAPACK_COL_MAJOR, 'N', m, kb, kb, 1, ab.data(), ldab, piv.data(), x.data(), m);
    return x;
}

// LU of the tridiagonal (L-part + mass-part), used as right preconditioner.
class TridiagonalPreconditioner {
public:
    explicit TridiagonalPreconditioner(const FemSystem& sys)
        : lower_(sys.size()), pivot_(sys.size()), upper_(sys.size()) {
        const std::size_t m = sys.size();
        for (std::size_t r = 0; r < m; ++r) {
            const double d = sys.l_diag[r] + sys.mass_diag;
            upper_[r] = r + 1 < m ? sys.l_upper[r] + sys.mass_off : 0.0;
            if (r == 0) {
                pivot_[r] = d;
            } else {
                lower_[r] = (sys.l_lower[r] + sys.mass_off) / pivot_[r - 1];
                pivot_[r] = d - lower_[r] * upper_[r - 1];
            }
            ok_ = ok_ && std::isfinite(pivot_[r]) && pivot_[r] != 0.0;
        }
    }

    bool ok() const noexcept { return ok_; }

    void apply(std::span<const double> rhs, std::span<double> out) const {
        const std::size_t m = pivot_.size();
        out[0] = rhs[0];
        for (std::size_t r = 1; r < m; ++r) out[r] = rhs[r] - lower_[r] * out[r - 1];
        out[m - 1] /= pivot_[m - 1];
        for (std::size_t r = m - 1; r-- > 0;) out[r] = (out[r] - upper_[r] * out[r + 1]) / pivot_[r];
    }

private:
    std::vector<double> lower_;
    std::vector<double> pivot_;
    std::vector<double> upper_;
    bool ok_ = true;
};

// Restarted GMRES with right preconditioning and modified Gram-Schmidt.
// Stops when the normwise backward error of the true residual drops below
// the tolerance, or when a restart cycle no longer improves it.
std::vector<double> solve_krylov(const FemSystem& sys, const SolveOptions& opt, SolveInfo& info) {
    const std::size_t m = sys.size();
    const TridiagonalPreconditioner prec(sys);
    if (!prec.ok()) throw_singular("zero pivot in tridiagonal preconditioner", info);

    const double anorm = matrix_inf_norm(sys);
    const double fnorm = inf_norm(sys.load);
    const std::size_t restart = std::max<std::size_t>(opt.krylov_restart, 2);

    std::vector<double> x(m, 0.0);
    if (fnorm == 0.0) return x;
    prec.apply(sys.load, x);
    std::vector<double> r(m), z(m), w(m);
    std::vector<std::vector<double>> basis(restart + 1, std::vector<double>(m));
    std::vector<double> hess((restart + 1) * restart);
    std::vector<double> cs(restart), sn(restart), g(restart + 1), y(restart);
    auto H = [&](std::size_t i, std::size_t j) -> double& { return hess[i * restart + j]; };

    auto residual = [&] {
        sys.apply(x, w);
        for (std::size_t i = 0; i < m; ++i) r[i] = sys.load[i] - w[i];
    };
    auto backward_error = [&] { return inf_norm(r) / (anorm * inf_norm(x) + fnorm); };

    residual();
    double eta = backward_error();
    double best_eta = eta;
    std::size_t iters = 0;
    while (eta > opt.krylov_tol && iters < opt.krylov_max_iter) {
        const double beta = norm2(r);
        if (beta == 0.0) break;
        for (std::size_t i = 0; i < m; ++i) basis[0][i] = r[i] / beta;
        std::fill(g.begin(), g.end(), 0.0);
        g[0] = beta;
        // 2-norm target matching the inf-norm backward error threshold.
        const double target = opt.krylov_tol * (anorm * inf_norm(x) + fnorm);

        std::size_t k = 0;
        for (; k < restart && iters < opt.krylov_max_iter; ++k, ++iters) {
            prec.apply(basis[k], z);
            sys.apply(z, w);
            for (std::size_t j = 0; j <= k; ++j) {
                double dot = 0.0;
                for (std::size_t i = 0; i < m; ++i) dot += w[i] * basis[j][i];
                H(j, k) = dot;
                for (std::size_t i = 0; i < m; ++i) w[i] -= dot * basis[j][i];
            }
            const double wn = norm2(w);
            H(k + 1, k) = wn;
            if (wn > 0.0) {
                for (std::size_t i = 0; i < m; ++i) basis[k + 1][i] = w[i] / wn;
            }
            for (std::size_t j = 0; j < k; ++j) {
                const double t = cs[j] * H(j, k) + sn[j] * H(j + 1, k);
                H(j + 1, k) = -sn[j] * H(j, k) + cs[j] * H(j + 1, k);
                H(j, k) = t;
            }
            const double rho = std::hypot(H(k, k), H(k + 1, k));
            if (rho == 0.0) throw_singular("GMRES breakdown with zero Hessenberg column", info);
            cs[k] = H(k, k) / rho;
            sn[k] = H(k + 1, k) / rho;
            H(k, k) = rho;
            H(k + 1, k) = 0.0;
            g[k + 1] = -sn[k] * g[k];
            g[k] = cs[k] * g[k];
            if (std::abs(g[k + 1]) <= target || wn == 0.0) {
                ++k;
                ++iters;
                break;
            }
        }
        // Back substitution for the least-squares coefficients.
        for (std::size_t i = k; i-- > 0;) {
            double s = g[i];
            for (std::size_t j = i + 1; j < k; ++j) s -= H(i, j) * y[j];
            y[i] = s / H(i, i);
        }
        std::fill(w.begin(), w.end(), 0.0);
        for (std::size_t j = 0; j < k; ++j) {
            for (std::size_t i = 0; i < m; ++i) w[i] += y[j] * basis[j][i];
        }
        prec.apply(w, z);
        for (std::size_t i = 0; i < m; ++i) x[i] += z[i];

        residual();
        eta = backward_error();
        if (eta > 0.5 * best_eta && eta > opt.krylov_tol) {
            // No meaningful progress over a whole cycle.
            best_eta = std::min(best_eta, eta);
            break;
        }
        best_eta = std::min(best_eta, eta);
    }
    info.iterations = iters;
    if (!(eta <= std::max(opt.krylov_tol, kStagnationAccept))) {
        throw_singular("GMRES stagnated at backward error " + std::to_string(eta), info);
    }
    return x;
}

}  // namespace

double matrix_inf_norm(const FemSystem& sys) {
    const std::size_t m = sys.size();
    double best = 0.0;
    for (std::size_t r = 0; r < m; ++r) {
        double s = std::abs(sys.l_diag[r] + sys.mass_diag - (sys.conv.empty() ? 0.0 : sys.conv[0]));
        for (std::size_t k = 1; k <= std::max<std::size_t>(sys.half_bandwidth(), 1); ++k) {
            if (r >= k) s += std::abs(sys.entry(r, r - k));
            if (r + k < m) s += std::abs(sys.entry(r, r + k));
        }
        best = std::max(best, s);
    }
    return best;
}

std::vector<double> accurate_residual(const FemSystem& sys, std::span<const double> c) {
    const std::size_t m = sys.size();
    std::vector<double> res(m);
    const std::size_t kmax = sys.conv.empty() ? 0 : sys.conv.size() - 1;
    // The tridiagonal entries are rebuilt in long double: their double roundings
    // are of order eps / h, which the conditioning amplifies to ~1e-9 at fine meshes.
    using ld = long double;
    const ld h = sys.mesh.h();
    const ld half_s2 = 0.5L * static_cast<ld>(sys.params.sigma) * static_cast<ld>(sys.params.sigma);
    const ld mu = sys.params.mu;
    const ld lam = sys.conv.empty() ? 0.0L : static_cast<ld>(sys.params.lambda);
    const ld mass_diag = lam * 2.0L * h / 3.0L;
    const ld mass_off = lam * h / 6.0L;
    const auto node = [&](std::size_t j) -> ld {
        return j == sys.mesh.n() ? static_cast<ld>(sys.mesh.b()) : static_cast<ld>(sys.mesh.a()) + h * static_cast<ld>(j);
    };
    for (std::size_t r = 0; r < m; ++r) {
        const ld xl = node(r);
        const ld xc = node(r + 1);
        const ld xr = node(r + 2);
        long double s = sys.load[r];
        s -= (2.0L * half_s2 / h + mu * (xl - xr) / 6.0L + mass_diag) * c[r];
        if (r > 0) s -= (-half_s2 / h - mu * (xl + 2.0L * xc) / 6.0L + mass_off) * c[r - 1];
        if (r + 1 < m) s -= (-half_s2 / h + mu * (2.0L * xc + xr) / 6.0L + mass_off) * c[r + 1];
        if (!sys.conv.empty()) {
            s += static_cast<long double>(sys.conv[0]) * c[r];
            for (std::size_t k = 1; k <= std::min(kmax, r); ++k) s += static_cast<long double>(sys.conv[k]) * c[r - k];
            for (std::size_t k = 1; k <= std::min(kmax, m - 1 - r); ++k) s += static_cast<long double>(sys.conv[k]) * c[r + k];
        }
        res[r] = static_cast<double>(s);
    }
    return res;
}

std::vector<double> solve_linear(const FemSystem& sys, const SolveOptions& opt, SolveInfo& info) {
    SolverKind kind = opt.kind;
    if (kind == SolverKind::Auto) {
        const std::size_t n = sys.mesh.n();
        const auto jump_band = static_cast<std::size_t>(std::ceil(sys.params.jmax / sys.mesh.h()));
        if (sys.conv.empty() || 4 * (jump_band + 1) < n) {
            kind = SolverKind::Banded;
        } else if (sys.size() <= opt.dense_limit) {
            kind = SolverKind::Dense;
        } else {
            kind = SolverKind::Krylov;
        }
    }
    info.method = kind;

    auto run = [&](const FemSystem& s) {
        switch (kind) {
            case SolverKind::Dense: return solve_dense(s, info);
            case SolverKind::Banded: return solve_banded(s, info);
            default: return solve_krylov(s, opt, info);
        }
    };
    std::vector<double> x = run(sys);
    for (double v : x) {
        if (!std::isfinite(v)) throw_singular("non-finite solution", info);
    }
    std::vector<double> res = accurate_residual(sys, x);
    if (opt.refine_steps > 0) {
        // Correction solves reuse the matrix with the extended-precision residual as load.
        FemSystem corr = sys;
        std::size_t total_iters = info.iterations;
        for (std::size_t step = 0; step < opt.refine_steps && inf_norm(res) > 0.0; ++step) {
            corr.load = res;
            const std::vector<double> d = run(corr);
            total_iters += info.iterations;
            for (std::size_t i = 0; i < x.size(); ++i) x[i] += d[i];
            res = accurate_residual(sys, x);
        }
        info.iterations = total_iters;
    }
    info.residual_max = inf_norm(res);
    info.load_max = inf_norm(sys.load);
    info.backward_error = info.residual_max / (matrix_inf_norm(sys) * inf_norm(x) + info.load_max);
    return x;
}

}  // namespace pairstop::detail
