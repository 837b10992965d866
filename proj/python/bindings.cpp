#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <string>

#include "pairstop/boundary.hpp"
#include "pairstop/errors.hpp"
#include "pairstop/fem.hpp"
#include "pairstop/verify.hpp"

namespace py = pybind11;
using namespace pairstop;

namespace {

py::array_t<double> to_array(const std::vector<double>& v) { return py::array_t<double>(v.size(), v.data()); }

SolverKind parse_solver(const std::string& name) {
    if (name == "auto") return SolverKind::Auto;
    if (name == "dense") return SolverKind::Dense;
    if (name == "banded") return SolverKind::Banded;
    if (name == "krylov") return SolverKind::Krylov;
    throw InvalidParameter("solver", "expected auto, dense, banded or krylov, got '" + name + "'");
}

SolveOptions solve_options(const std::string& solver) {
    SolveOptions o;
    o.kind = parse_solver(solver);
    return o;
}

py::dict info_dict(const SolveInfo& info) {
    py::dict d;
    d["method"] = std::string(to_string(info.method));
    d["residual_max"] = info.residual_max;
    d["backward_error"] = info.backward_error;
    d["iterations"] = info.iterations;
    d["rcond"] = info.rcond;
    d["h"] = info.h;
    d["h0"] = info.h0;
    return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Finite element solver for the optimal exit level of a jump OU spread";
    m.attr("__version__") = PAIRSTOP_VERSION;

    auto numerical = py::register_exception<NumericalError>(m, "NumericalError", PyExc_RuntimeError);
    py::register_exception<SingularSystemError>(m, "SingularSystemError", numerical.ptr());
    py::register_exception<BracketError>(m, "BracketError", numerical.ptr());
    py::register_exception<IntegrationError>(m, "IntegrationError", numerical.ptr());

    py::class_<ModelParams>(m, "ModelParams")
        .def(py::init([](double mu, double sigma, double lambda_, double a, double gamma, double jmax) {
                 ModelParams p{mu, sigma, lambda_, a, gamma, jmax};
                 p.validate();
                 return p;
             }),
             py::arg("mu") = 8.0, py::arg("sigma") = 0.2, py::arg("lambda_") = 10.0, py::arg("a") = -0.1,
             py::arg("gamma") = 0.02, py::arg("jmax") = 0.05)
        .def_readwrite("mu", &ModelParams::mu)
        .def_readwrite("sigma", &ModelParams::sigma)
        .def_readwrite("lambda_", &ModelParams::lambda)
        .def_readwrite("a", &ModelParams::a)
        .def_readwrite("gamma", &ModelParams::gamma)
        .def_readwrite("jmax", &ModelParams::jmax)
        .def("validate", &ModelParams::validate)
        .def("__repr__", [](const ModelParams& p) {
            return "ModelParams(mu=" + std::to_string(p.mu) + ", sigma=" + std::to_string(p.sigma) +
                   ", lambda_=" + std::to_string(p.lambda) + ", a=" + std::to_string(p.a) +
                   ", gamma=" + std::to_string(p.gamma) + ", jmax=" + std::to_string(p.jmax) + ")";
        });

    py::class_<BvpSolution>(m, "Solution")
        .def_readonly("b", &BvpSolution::b)
        .def_property_readonly("x", [](const BvpSolution& s) { return to_array(s.mesh.nodes()); })
        .def_property_readonly("v", [](const BvpSolution& s) { return to_array(s.coeffs); })
        .def_property_readonly("n", [](const BvpSolution& s) { return s.mesh.n(); })
        .def_property_readonly("derivative_at_b", [](const BvpSolution& s) { return derivative_at_b(s); })
        .def_property_readonly("info", [](const BvpSolution& s) { return info_dict(s.info); })
        .def("__call__", [](const BvpSolution& s, double x) { return eval(s, x); }, py::arg("x"))
        .def("value_function", [](const BvpSolution& s, double x) { return value_function(s, x); }, py::arg("x"));

    m.def(
        "solve",
        [](const ModelParams& p, double b, std::size_t n, const std::string& solver) {
            return pairstop::solve(assemble(p, b, n), solve_options(solver));
        },
        py::arg("params"), py::arg("b"), py::arg("n"), py::arg("solver") = "auto",
        "Galerkin solution v_N on [a, b] with n elements.");

    m.def(
        "system_matrix",
        [](const ModelParams& p, double b, std::size_t n, const std::string& part) {
            const FemSystem sys = assemble(p, b, n);
            const std::size_t k = sys.size();
            py::array_t<double> out({k, k});
            auto r = out.mutable_unchecked<2>();
            for (std::size_t i = 0; i < k; ++i) {
                for (std::size_t j = 0; j < k; ++j) {
                    if (part == "full") r(i, j) = sys.entry(i, j);
                    else if (part == "l") r(i, j) = sys.l_part(i, j);
                    else if (part == "mass") r(i, j) = sys.mass_part(i, j);
                    else if (part == "conv") r(i, j) = sys.conv_part(i, j);
                    else throw InvalidParameter("part", "expected full, l, mass or conv");
                }
            }
            return py::make_tuple(out, to_array(sys.load));
        },
        py::arg("params"), py::arg("b"), py::arg("n"), py::arg("part") = "full",
        "Dense system matrix (or one of its parts) and load vector.");

    m.def(
        "f_n", [](const ModelParams& p, double b, std::size_t n) { return f_n(p, b, n); }, py::arg("params"),
        py::arg("b"), py::arg("n"), "F_N(b) = v_N'(b).");

    m.def(
        "find_boundary",
        [](const ModelParams& p, std::size_t n, double tol_b) {
            FreeBoundaryResult r = find_boundary(p, n, tol_b);
            py::dict d;
            d["b_n"] = r.b_n;
            d["bracket"] = r.bracket;
            d["iterations"] = r.iterations;
            d["f_at_root"] = r.f_at_root;
            d["solution"] = std::move(r.solution);
            return d;
        },
        py::arg("params"), py::arg("n") = 2000, py::arg("tol_b") = 1e-6);

    m.def(
        "check_conditions",
        [](const BvpSolution& sol, std::size_t samples) {
            const ConditionReport rep = pairstop::check_conditions(sol, samples);
            std::vector<double> xs, lhs, rhs;
            for (const auto& pt : rep.margin_curve) {
                xs.push_back(pt.x);
                lhs.push_back(pt.lhs);
                rhs.push_back(pt.rhs);
            }
            py::dict d;
            d["condition_a_holds"] = rep.condition_a_holds;
            d["worst_margin"] = rep.worst_margin;
            d["worst_x"] = rep.worst_x;
            d["condition_b_holds"] = rep.condition_b_holds;
            d["min_v"] = rep.min_v;
            d["x"] = to_array(xs);
            d["lhs"] = to_array(lhs);
            d["rhs"] = to_array(rhs);
            return d;
        },
        py::arg("solution"), py::arg("samples") = 512);

    m.def(
        "simulate",
        [](const ModelParams& p, double b, double x0, std::size_t paths, std::uint64_t seed, double dt,
           std::size_t bias_paths) {
            McOptions o;
            o.bias_paths = bias_paths;
            const double step = dt > 0.0 ? dt : default_time_step(p, b);
            const McEstimate e = [&] {
                py::gil_scoped_release release;
                return simulate_stopped_value(p, b, x0, paths, step, seed, o);
            }();
            py::dict d;
            d["mean"] = e.mean;
            d["std_err"] = e.std_err;
            d["fine_mean"] = e.fine_mean;
            d["bias_allowance"] = e.bias_allowance;
            d["min_stopped"] = e.min_stopped;
            d["max_stopped"] = e.max_stopped;
            d["dt"] = e.dt;
            return d;
        },
        py::arg("params"), py::arg("b"), py::arg("x0"), py::arg("paths") = 20000, py::arg("seed") = 1,
        py::arg("dt") = 0.0, py::arg("bias_paths") = 50000,
        "Monte Carlo mean of the spread at the first exit from (a, b); dt <= 0 picks the default step.");

    m.def(
        "constants",
        [](const ModelParams& p, double b) {
            const ErrorConstants k = pairstop::constants(p, b);
            py::dict d;
            const std::pair<const char*, double> values[] = {
                {"c1", k.c1}, {"c2", k.c2}, {"c3", k.c3},   {"c4", k.c4},   {"c5", k.c5},
                {"c6", k.c6}, {"c7", k.c7}, {"c8", k.c8},   {"c9", k.c9},   {"c10", k.c10},
                {"c11", k.c11}, {"h0", k.h0}, {"gamma_hat", k.gamma_hat}, {"f_norm", k.f_norm}};
            for (const auto& [name, v] : values) d[name] = v;
            return d;
        },
        py::arg("params"), py::arg("b"));

    m.def(
        "ode_solution",
        [](const ModelParams& p, double b, py::array_t<double, py::array::forcecast> xs, double tol,
           std::size_t max_steps) {
            const OdeOracle ode(p, b, tol, 1.0, max_steps);
            auto in = xs.unchecked<1>();
            py::array_t<double> out(in.shape(0));
            auto o = out.mutable_unchecked<1>();
            for (py::ssize_t i = 0; i < in.shape(0); ++i) o(i) = ode(in(i));
            return out;
        },
        py::arg("params"), py::arg("b"), py::arg("x"), py::arg("tol") = 1e-12,
        py::arg("max_steps") = std::size_t{1} << 22,
        "Reference v for the jump-free problem (params.lambda_ must be 0).");

    m.def("ode_free_boundary", &ode_free_boundary, py::arg("params"), py::arg("lo"), py::arg("hi"),
          py::arg("tol_b") = 1e-10, py::arg("ode_tol") = 1e-12);
}
