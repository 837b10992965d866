#include "cli.hpp"

#include <chrono>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "pairstop/boundary.hpp"
#include "pairstop/errors.hpp"
#include "pairstop/fem.hpp"
#include "pairstop/verify.hpp"

namespace pairstop::cli {

using Json = nlohmann::ordered_json;

namespace {

constexpr double kDefaultTolB = 1e-6;
// check-conditions inspects v_N at the last interior node, which equals
// -h F_N(b_N); the bisection residual has to sit well below the -1e-12 floor.
constexpr double kConditionTolB = 1e-11;

const std::vector<std::string> kCommands = {"solve",    "find-boundary", "converge",
                                            "check-conditions", "simulate", "constants"};

class ConfigError : public std::runtime_error {
public:
    ConfigError(const std::string& field, const std::string& what)
        : std::runtime_error(field + ": " + what) {}
    explicit ConfigError(const InvalidParameter& e) : std::runtime_error(e.what()) {}
};

struct Settings {
    std::string command;
    ModelParams params;
    std::size_t n = 2000;
    std::optional<double> b;
    std::vector<std::size_t> ns{2000, 4000, 6000, 8000};
    std::optional<double> tol_b;
    std::vector<double> x0{-0.05, 0.0, 0.03};
    std::size_t paths = 20000;
    std::size_t bias_paths = 50000;
    std::optional<double> dt;
    std::uint64_t seed = 1;
    std::size_t samples = 512;
    std::vector<double> scan_b;  // lo, hi, count
    SolverKind solver = SolverKind::Auto;
    std::string out = "-";
    std::string format = "json";
};

// Values given on the command line; unset means "not given".
struct Flags {
    std::optional<double> mu, sigma, lambda, a, gamma, jmax, b, tol_b, dt;
    std::optional<std::size_t> n, paths, bias_paths, samples;
    std::optional<std::uint64_t> seed;
    std::vector<std::size_t> ns;
    std::vector<double> x0;
    std::vector<double> scan_b;
    std::optional<std::string> solver, out, format;
    std::string config;
};

SolverKind parse_solver(const std::string& s) {
    if (s == "auto") return SolverKind::Auto;
    if (s == "dense") return SolverKind::Dense;
    if (s == "banded") return SolverKind::Banded;
    if (s == "krylov") return SolverKind::Krylov;
    throw ConfigError("solver", "expected one of auto, dense, banded, krylov; got '" + s + "'");
}

// ---------------------------------------------------------------- config file

double json_number(const Json& v, const std::string& key) {
    if (!v.is_number()) throw ConfigError(key, "expected a number");
    return v.get<double>();
}

std::size_t json_count(const Json& v, const std::string& key) {
    if (v.is_number_unsigned()) return v.get<std::size_t>();
    if (v.is_number_integer() && v.get<long long>() >= 0) return static_cast<std::size_t>(v.get<long long>());
    throw ConfigError(key, "expected a non-negative integer");
}

template <class T, class Convert>
std::vector<T> json_list(const Json& v, const std::string& key, Convert convert) {
    std::vector<T> out;
    if (v.is_array()) {
        for (const auto& e : v) out.push_back(convert(e, key));
    } else if (v.is_string()) {
        std::stringstream ss(v.get<std::string>());
        std::string item;
        while (std::getline(ss, item, ',')) {
            try {
                out.push_back(convert(Json::parse(item), key));
            } catch (const Json::exception&) {
                throw ConfigError(key, "cannot parse list item '" + item + "'");
            }
        }
    } else {
        out.push_back(convert(v, key));
    }
    return out;
}

void apply_config(const std::string& path, Settings& s) {
    std::ifstream in(path);
    if (!in) throw ConfigError("config", "cannot open '" + path + "'");
    Json doc;
    try {
        doc = Json::parse(in);
    } catch (const Json::exception& e) {
        throw ConfigError("config", std::string("invalid JSON: ") + e.what());
    }
    if (!doc.is_object()) throw ConfigError("config", "expected a flat JSON object");

    for (const auto& [raw_key, v] : doc.items()) {
        std::string key = raw_key;
        for (char& c : key) {
            if (c == '-') c = '_';
        }
        if (key == "mu") s.params.mu = json_number(v, key);
        else if (key == "sigma") s.params.sigma = json_number(v, key);
        else if (key == "lambda") s.params.lambda = json_number(v, key);
        else if (key == "a") s.params.a = json_number(v, key);
        else if (key == "gamma") s.params.gamma = json_number(v, key);
        else if (key == "jmax") s.params.jmax = json_number(v, key);
        else if (key == "n") s.n = json_count(v, key);
        else if (key == "b") s.b = json_number(v, key);
        else if (key == "ns") s.ns = json_list<std::size_t>(v, key, json_count);
        else if (key == "tol_b") s.tol_b = json_number(v, key);
        else if (key == "x0") s.x0 = json_list<double>(v, key, json_number);
        else if (key == "paths") s.paths = json_count(v, key);
        else if (key == "bias_paths") s.bias_paths = json_count(v, key);
        else if (key == "dt") s.dt = json_number(v, key);
        else if (key == "seed") s.seed = json_count(v, key);
        else if (key == "samples") s.samples = json_count(v, key);
        else if (key == "scan_b") s.scan_b = json_list<double>(v, key, json_number);
        else if (key == "solver" && v.is_string()) s.solver = parse_solver(v.get<std::string>());
        else if (key == "out" && v.is_string()) s.out = v.get<std::string>();
        else if (key == "format" && v.is_string()) s.format = v.get<std::string>();
        else throw ConfigError(raw_key, "unknown key or wrong type in config file");
    }
}

void apply_flags(const Flags& f, Settings& s) {
    if (f.mu) s.params.mu = *f.mu;
    if (f.sigma) s.params.sigma = *f.sigma;
    if (f.lambda) s.params.lambda = *f.lambda;
    if (f.a) s.params.a = *f.a;
    if (f.gamma) s.params.gamma = *f.gamma;
    if (f.jmax) s.params.jmax = *f.jmax;
    if (f.n) s.n = *f.n;
    if (f.b) s.b = f.b;
    if (!f.ns.empty()) s.ns = f.ns;
    if (f.tol_b) s.tol_b = f.tol_b;
    if (!f.x0.empty()) s.x0 = f.x0;
    if (f.paths) s.paths = *f.paths;
    if (f.bias_paths) s.bias_paths = *f.bias_paths;
    if (f.dt) s.dt = f.dt;
    if (f.seed) s.seed = *f.seed;
    if (f.samples) s.samples = *f.samples;
    if (!f.scan_b.empty()) s.scan_b = f.scan_b;
    if (f.solver) s.solver = parse_solver(*f.solver);
    if (f.out) s.out = *f.out;
    if (f.format) s.format = *f.format;
}

void validate(const Settings& s) {
    try {
        s.params.validate();
    } catch (const InvalidParameter& e) {
        throw ConfigError(e);
    }
    if (s.n < 2) throw ConfigError("n", "element count must be >= 2, got " + std::to_string(s.n));
    if (s.format != "json" && s.format != "csv") throw ConfigError("format", "expected json or csv");
    if (s.tol_b && !(*s.tol_b > 0.0)) throw ConfigError("tol_b", "must be > 0");
    if (s.b && !(*s.b > s.params.a)) throw ConfigError("b", "must be > a");
    if (s.samples < 1) throw ConfigError("samples", "must be >= 1");
    if (s.command == "converge") {
        if (s.ns.empty()) throw ConfigError("ns", "must be nonempty");
        for (std::size_t i = 0; i < s.ns.size(); ++i) {
            if (s.ns[i] < 2) throw ConfigError("ns", "element counts must be >= 2");
            if (i > 0 && s.ns[i] <= s.ns[i - 1]) throw ConfigError("ns", "must be strictly increasing");
        }
    }
    if ((s.command == "solve" || s.command == "constants") && !s.b) {
        throw ConfigError("b", "required by " + s.command);
    }
    if (s.command == "simulate") {
        if (s.paths < 1) throw ConfigError("paths", "must be >= 1");
        if (s.x0.empty()) throw ConfigError("x0", "must be nonempty");
        if (s.dt && !(*s.dt > 0.0)) throw ConfigError("dt", "must be > 0");
    }
    if (!s.scan_b.empty()) {
        if (s.scan_b.size() != 3) throw ConfigError("scan_b", "expected lo,hi,count");
        const double count = s.scan_b[2];
        if (!(s.scan_b[0] > s.params.a && s.scan_b[1] > s.scan_b[0])) {
            throw ConfigError("scan_b", "require a < lo < hi");
        }
        if (!(count >= 2.0 && count == std::floor(count))) throw ConfigError("scan_b", "count must be an integer >= 2");
    }
}

// ---------------------------------------------------------------- output

Json num(double x) {
    if (!std::isfinite(x)) return nullptr;
    return round9(x);
}

Json num_array(const std::vector<double>& xs) {
    Json a = Json::array();
    for (double x : xs) a.push_back(num(x));
    return a;
}

std::string fmt9(double x) {
    if (!std::isfinite(x)) return "";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.9g", x);
    return buf;
}

std::string utc_timestamp() {
    const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

Json params_json(const ModelParams& p) {
    return Json{{"mu", num(p.mu)},       {"sigma", num(p.sigma)}, {"lambda", num(p.lambda)},
                {"a", num(p.a)},         {"gamma", num(p.gamma)}, {"jmax", num(p.jmax)}};
}

Json metadata(const Settings& s) {
    Json m;
    m["tool"] = "pairstop";
    m["version"] = PAIRSTOP_VERSION;
    m["command"] = s.command;
    m["params"] = params_json(s.params);
    m["n"] = s.n;
    m["seed"] = s.seed;
    m["timestamp"] = utc_timestamp();
    return m;
}

Json solver_json(const SolveInfo& info) {
    return Json{{"method", std::string(to_string(info.method))},
                {"backward_error", num(info.backward_error)},
                {"relative_residual", num(info.relative_residual())},
                {"iterations", info.iterations},
                {"rcond", num(info.rcond)},
                {"h", num(info.h)},
                {"h0", num(info.h0)},
                {"h_over_h0", num(info.h_over_h0())}};
}

// A table is the CSV form of a command's main curve.
struct Table {
    std::vector<std::string> header;
    std::vector<std::vector<double>> columns;
};

Table solution_table(const BvpSolution& sol) {
    Table t{{"x", "v", "u"}, {{}, {}, {}}};
    for (std::size_t j = 0; j < sol.coeffs.size(); ++j) {
        const double x = sol.mesh.node(j);
        t.columns[0].push_back(x);
        t.columns[1].push_back(sol.coeffs[j]);
        t.columns[2].push_back(sol.coeffs[j] + x);
    }
    return t;
}

Json table_json(const Table& t) {
    Json j;
    for (std::size_t c = 0; c < t.header.size(); ++c) j[t.header[c]] = num_array(t.columns[c]);
    return j;
}

void write_csv(std::ostream& os, const Table& t) {
    for (std::size_t c = 0; c < t.header.size(); ++c) os << (c ? "," : "") << t.header[c];
    os << '\n';
    const std::size_t rows = t.columns.empty() ? 0 : t.columns[0].size();
    for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t c = 0; c < t.columns.size(); ++c) os << (c ? "," : "") << fmt9(t.columns[c][r]);
        os << '\n';
    }
}

struct Output {
    Json result;
    Table table;
};

SolveOptions solve_options(const Settings& s) {
    SolveOptions o;
    o.kind = s.solver;
    return o;
}

FindOptions find_options(const Settings& s) {
    FindOptions o;
    o.solver = solve_options(s);
    return o;
}

// ---------------------------------------------------------------- commands

Output cmd_solve(const Settings& s) {
    const BvpSolution sol = solve(assemble(s.params, *s.b, s.n), solve_options(s));
    Output o;
    o.table = solution_table(sol);
    o.result["b"] = num(*s.b);
    o.result["n"] = s.n;
    o.result["f_n"] = num(derivative_at_b(sol));
    o.result["min_v"] = num(check_condition_b(sol).min_v);
    o.result["solver"] = solver_json(sol.info);
    if (!s.scan_b.empty()) {
        const auto count = static_cast<std::size_t>(s.scan_b[2]);
        std::vector<double> bs(count);
        for (std::size_t i = 0; i < count; ++i) {
            bs[i] = s.scan_b[0] + (s.scan_b[1] - s.scan_b[0]) * static_cast<double>(i) / static_cast<double>(count - 1);
        }
        const auto scan = scan_f_n(s.params, s.n, bs, solve_options(s));
        Table st{{"b", "f_n"}, {{}, {}}};
        for (const auto& [b, f] : scan) {
            st.columns[0].push_back(b);
            st.columns[1].push_back(f);
        }
        o.result["f_scan"] = table_json(st);
        o.result["sign_changes"] = count_sign_changes(scan);
        o.table = st;
    }
    o.result["curve"] = table_json(solution_table(sol));
    return o;
}

Output cmd_find_boundary(const Settings& s) {
    const FreeBoundaryResult r = find_boundary(s.params, s.n, s.tol_b.value_or(kDefaultTolB), find_options(s));
    Output o;
    o.table = solution_table(r.solution);
    o.result["b_n"] = num(r.b_n);
    o.result["f_at_root"] = num(r.f_at_root);
    o.result["iterations"] = r.iterations;
    o.result["tol_b"] = num(s.tol_b.value_or(kDefaultTolB));
    o.result["bracket"] = {num(r.bracket.first), num(r.bracket.second)};
    o.result["initial_bracket"] = {num(r.initial_bracket.first), num(r.initial_bracket.second)};
    o.result["solver"] = solver_json(r.solution.info);
    o.result["curve"] = table_json(o.table);
    return o;
}

Output cmd_converge(const Settings& s) {
    const double tol = s.tol_b.value_or(kDefaultTolB);
    const ConvergenceReport rep = convergence_study(s.params, s.ns, tol, find_options(s));
    Output o;
    o.table = {{"n", "b_n", "delta"}, {{}, {}, {}}};
    Json rows = Json::array();
    for (const auto& row : rep.rows) {
        const double delta = row.delta.value_or(std::nan(""));
        rows.push_back(Json{{"n", row.n},
                            {"b_n", num(row.b_n)},
                            {"delta", num(delta)},
                            {"iterations", row.iterations},
                            {"f_at_root", num(row.f_at_root)}});
        o.table.columns[0].push_back(static_cast<double>(row.n));
        o.table.columns[1].push_back(row.b_n);
        o.table.columns[2].push_back(delta);
    }
    o.result["tol_b"] = num(tol);
    o.result["rows"] = rows;
    o.result["strictly_decreasing"] = rep.strictly_decreasing();
    o.result["deltas_shrinking"] = rep.deltas_shrinking();
    return o;
}

Output cmd_check_conditions(const Settings& s) {
    std::optional<BvpSolution> sol;
    Output o;
    if (s.b) {
        sol = solve(assemble(s.params, *s.b, s.n), solve_options(s));
        o.result["b_n"] = num(*s.b);
        o.result["f_at_root"] = num(derivative_at_b(*sol));
    } else {
        const double tol = s.tol_b.value_or(kConditionTolB);
        FreeBoundaryResult r = find_boundary(s.params, s.n, tol, find_options(s));
        o.result["b_n"] = num(r.b_n);
        o.result["f_at_root"] = num(r.f_at_root);
        o.result["iterations"] = r.iterations;
        o.result["tol_b"] = num(tol);
        sol = std::move(r.solution);
    }
    const ConditionReport rep = check_conditions(*sol, s.samples);
    o.result["condition_a_holds"] = rep.condition_a_holds;
    o.result["worst_margin"] = num(rep.worst_margin);
    o.result["worst_x"] = num(rep.worst_x);
    o.result["condition_b_holds"] = rep.condition_b_holds;
    o.result["min_v"] = num(rep.min_v);
    o.table = {{"x", "lhs", "rhs"}, {{}, {}, {}}};
    for (const auto& p : rep.margin_curve) {
        o.table.columns[0].push_back(p.x);
        o.table.columns[1].push_back(p.lhs);
        o.table.columns[2].push_back(p.rhs);
    }
    o.result["margin_curve"] = table_json(o.table);
    return o;
}

Output cmd_simulate(const Settings& s) {
    std::optional<BvpSolution> sol;
    double b = 0.0;
    Output o;
    if (s.b) {
        b = *s.b;
        sol = solve(assemble(s.params, b, s.n), solve_options(s));
    } else {
        FreeBoundaryResult r = find_boundary(s.params, s.n, s.tol_b.value_or(kDefaultTolB), find_options(s));
        b = r.b_n;
        sol = std::move(r.solution);
    }
    for (double x0 : s.x0) {
        if (!(x0 >= s.params.a && x0 <= b)) throw ConfigError("x0", "every start point must lie in [a, b]");
    }
    const double dt = s.dt.value_or(default_time_step(s.params, b));
    McOptions mc;
    mc.bias_paths = s.bias_paths;

    o.table = {{"x0", "mean", "std_err", "value_function", "fine_mean", "bias_allowance", "min_stopped",
                "max_stopped"},
               std::vector<std::vector<double>>(8)};
    Json estimates = Json::array();
    for (double x0 : s.x0) {
        const McEstimate e = simulate_stopped_value(s.params, b, x0, s.paths, dt, s.seed, mc);
        const double u = value_function(*sol, x0);
        const double fine = e.fine_mean.value_or(std::nan(""));
        estimates.push_back(Json{{"x0", num(x0)},
                                 {"mean", num(e.mean)},
                                 {"std_err", num(e.std_err)},
                                 {"value_function", num(u)},
                                 {"fine_mean", num(fine)},
                                 {"bias_paths", e.bias_paths},
                                 {"bias_allowance", num(e.bias_allowance)},
                                 {"agrees", std::abs(e.mean - u) <= 3.0 * e.std_err + e.bias_allowance},
                                 {"min_stopped", num(e.min_stopped)},
                                 {"max_stopped", num(e.max_stopped)},
                                 {"mean_exit_time", num(e.mean_exit_time)},
                                 {"jumps", e.jumps}});
        const double row[] = {x0, e.mean, e.std_err, u, fine, e.bias_allowance, e.min_stopped, e.max_stopped};
        for (std::size_t c = 0; c < 8; ++c) o.table.columns[c].push_back(row[c]);
    }
    o.result["b"] = num(b);
    o.result["n_paths"] = s.paths;
    o.result["dt"] = num(dt);
    o.result["estimates"] = estimates;
    return o;
}

Output cmd_constants(const Settings& s) {
    const ErrorConstants k = constants(s.params, *s.b);
    const double h = (*s.b - s.params.a) / static_cast<double>(s.n);
    const std::vector<std::pair<std::string, double>> values = {
        {"c1", k.c1},   {"c2", k.c2},   {"c3", k.c3},   {"c4", k.c4},
        {"c5", k.c5},   {"c6", k.c6},   {"c7", k.c7},   {"c8", k.c8},
        {"c9", k.c9},   {"c10", k.c10}, {"c11", k.c11}, {"h0", k.h0},
        {"gamma_hat", k.gamma_hat},     {"c2_poincare", k.c2_poincare()},
        {"f_norm", k.f_norm},           {"l2_bound", k.l2_bound(h)},
        {"h1_bound", k.h1_bound(h)},    {"derivative_bound", k.derivative_bound(h)},
    };
    Output o;
    Json c;
    Table t{{"name", "value"}, {}};
    for (const auto& [name, v] : values) c[name] = num(v);
    o.result["b"] = num(*s.b);
    o.result["h"] = num(h);
    o.result["constants"] = c;
    o.result["n_for_h0"] = num((*s.b - s.params.a) / k.h0);
    // name,value has a text column; written directly in write_output.
    o.table = t;
    return o;
}

void write_output(const Settings& s, const Output& o, std::ostream& os) {
    if (s.format == "json") {
        Json doc;
        doc["metadata"] = metadata(s);
        doc["result"] = o.result;
        os << doc.dump(2) << '\n';
    } else if (s.command == "constants") {
        os << "name,value\n";
        for (const auto& [name, v] : o.result["constants"].items()) {
            os << name << ',' << (v.is_null() ? "" : fmt9(v.get<double>())) << '\n';
        }
    } else {
        write_csv(os, o.table);
    }
}

// ---------------------------------------------------------------- validation mode

void require(bool ok, const std::string& path, const std::string& what) {
    if (!ok) throw ConfigError(path, what);
}

void require_number(const Json& obj, const std::string& key, const std::string& path) {
    require(obj.contains(key), path + "." + key, "missing");
    const Json& v = obj.at(key);
    require(v.is_null() || v.is_number(), path + "." + key, "expected a number or null");
    if (v.is_number_float()) {
        const double x = v.get<double>();
        require(round9(x) == x, path + "." + key, "more than 9 significant digits");
    }
}

void require_bool(const Json& obj, const std::string& key, const std::string& path) {
    require(obj.contains(key) && obj.at(key).is_boolean(), path + "." + key, "expected a boolean");
}

void require_columns(const Json& obj, const std::string& key, const std::vector<std::string>& cols,
                     const std::string& path) {
    require(obj.contains(key) && obj.at(key).is_object(), path + "." + key, "expected an object of columns");
    std::optional<std::size_t> len;
    for (const auto& c : cols) {
        const std::string p = path + "." + key + "." + c;
        require(obj.at(key).contains(c) && obj.at(key).at(c).is_array(), p, "expected an array");
        const Json& arr = obj.at(key).at(c);
        require(!len || *len == arr.size(), p, "column length mismatch");
        len = arr.size();
        for (const auto& v : arr) require(v.is_null() || v.is_number(), p, "expected numbers");
    }
}

std::string validate_document(const Json& doc) {
    require(doc.is_object(), "$", "expected an object");
    require(doc.contains("metadata") && doc.at("metadata").is_object(), "metadata", "missing");
    const Json& m = doc.at("metadata");
    require(m.value("tool", "") == "pairstop", "metadata.tool", "expected 'pairstop'");
    require(m.contains("version") && m.at("version").is_string(), "metadata.version", "expected a string");
    require(m.contains("timestamp") && m.at("timestamp").is_string(), "metadata.timestamp", "expected a string");
    require(m.contains("n") && m.at("n").is_number_integer(), "metadata.n", "expected an integer");
    require(m.contains("seed") && m.at("seed").is_number_integer(), "metadata.seed", "expected an integer");
    require(m.contains("params") && m.at("params").is_object(), "metadata.params", "missing");
    for (const char* k : {"mu", "sigma", "lambda", "a", "gamma", "jmax"}) require_number(m.at("params"), k, "metadata.params");
    const std::string command = m.value("command", "");
    require(std::find(kCommands.begin(), kCommands.end(), command) != kCommands.end(), "metadata.command",
            "unknown command '" + command + "'");

    require(doc.contains("result") && doc.at("result").is_object(), "result", "missing");
    const Json& r = doc.at("result");
    const std::string p = "result";
    if (command == "solve") {
        for (const char* k : {"b", "f_n", "min_v"}) require_number(r, k, p);
        require(r.contains("solver"), p + ".solver", "missing");
        require_columns(r, "curve", {"x", "v", "u"}, p);
    } else if (command == "find-boundary") {
        for (const char* k : {"b_n", "f_at_root", "tol_b"}) require_number(r, k, p);
        require(r.contains("iterations") && r.at("iterations").is_number_integer(), p + ".iterations", "expected an integer");
        require(r.contains("bracket") && r.at("bracket").is_array() && r.at("bracket").size() == 2, p + ".bracket",
                "expected [lo, hi]");
        require_columns(r, "curve", {"x", "v", "u"}, p);
    } else if (command == "converge") {
        require(r.contains("rows") && r.at("rows").is_array() && !r.at("rows").empty(), p + ".rows", "expected rows");
        for (std::size_t i = 0; i < r.at("rows").size(); ++i) {
            const std::string rp = p + ".rows[" + std::to_string(i) + "]";
            for (const char* k : {"b_n", "delta", "f_at_root"}) require_number(r.at("rows")[i], k, rp);
        }
        require_bool(r, "strictly_decreasing", p);
    } else if (command == "check-conditions") {
        for (const char* k : {"b_n", "f_at_root", "worst_margin", "worst_x", "min_v"}) require_number(r, k, p);
        require_bool(r, "condition_a_holds", p);
        require_bool(r, "condition_b_holds", p);
        require_columns(r, "margin_curve", {"x", "lhs", "rhs"}, p);
    } else if (command == "simulate") {
        for (const char* k : {"b", "dt"}) require_number(r, k, p);
        require(r.contains("estimates") && r.at("estimates").is_array(), p + ".estimates", "expected an array");
        for (std::size_t i = 0; i < r.at("estimates").size(); ++i) {
            const std::string ep = p + ".estimates[" + std::to_string(i) + "]";
            for (const char* k : {"x0", "mean", "std_err", "value_function", "bias_allowance"}) {
                require_number(r.at("estimates")[i], k, ep);
            }
        }
    } else if (command == "constants") {
        require(r.contains("constants") && r.at("constants").is_object(), p + ".constants", "missing");
        for (const char* k : {"c1", "c2", "c3", "c4", "c5", "c6", "c7", "c8", "c9", "c10", "c11", "h0", "gamma_hat"}) {
            require_number(r.at("constants"), k, p + ".constants");
        }
    }
    return command;
}

int run_validate(const std::string& path, std::ostream& out, std::ostream& err) {
    std::ifstream in(path);
    if (!in) {
        err << "error: file: cannot open '" << path << "'\n";
        return kConfigError;
    }
    try {
        const std::string command = validate_document(Json::parse(in));
        out << "valid " << command << " document\n";
        return kOk;
    } catch (const Json::exception& e) {
        err << "error: file: invalid JSON: " << e.what() << '\n';
    } catch (const ConfigError& e) {
        err << "error: " << e.what() << '\n';
    }
    return kConfigError;
}

Output dispatch(const Settings& s) {
    if (s.command == "solve") return cmd_solve(s);
    if (s.command == "find-boundary") return cmd_find_boundary(s);
    if (s.command == "converge") return cmd_converge(s);
    if (s.command == "check-conditions") return cmd_check_conditions(s);
    if (s.command == "simulate") return cmd_simulate(s);
    return cmd_constants(s);
}

void print_bracket_samples(const BracketError& e, std::ostream& err) {
    err << "sampled (b, F_N(b)):\n";
    for (const auto& [b, f] : e.samples()) err << "  " << fmt9(b) << ", " << fmt9(f) << '\n';
}

}  // namespace

double round9(double x) {
    if (!std::isfinite(x) || x == 0.0) return x;
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.9g", x);
    return std::strtod(buf, nullptr);
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Optimal exit level for a mean-reverting spread with jumps and a stop-loss"};
    app.require_subcommand(1);
    app.fallthrough();
    app.set_version_flag("--version", std::string(PAIRSTOP_VERSION));

    Flags f;
    app.add_option("--mu", f.mu, "Mean-reversion speed");
    app.add_option("--sigma", f.sigma, "Diffusion volatility");
    app.add_option("--lambda", f.lambda, "Jump intensity");
    app.add_option("--a", f.a, "Stop-loss level");
    app.add_option("--gamma", f.gamma, "Jump size scale");
    app.add_option("--jmax", f.jmax, "Jump size bound J");
    app.add_option("--n", f.n, "Element count N (default 2000)");
    app.add_option("--b", f.b, "Right endpoint b; required by solve and constants");
    app.add_option("--ns", f.ns, "Element counts for converge")->delimiter(',');
    app.add_option("--tol-b", f.tol_b,
                   "Bisection tolerance on b (default 1e-6; 1e-11 for check-conditions)");
    app.add_option("--x0", f.x0, "Start points for simulate")->delimiter(',');
    app.add_option("--paths", f.paths, "Monte Carlo paths per start point (default 20000)");
    app.add_option("--bias-paths", f.bias_paths, "Paths also monitored on dt/4 (default 50000, 0 = all)");
    app.add_option("--dt", f.dt, "Monitoring time step (default ((b - a) / (200 sigma))^2)");
    app.add_option("--seed", f.seed, "Random seed (default 1)");
    app.add_option("--samples", f.samples, "Sample points on (b, b + J] for check-conditions (default 512)");
    app.add_option("--scan-b", f.scan_b, "solve: also tabulate F_N on lo,hi,count")->delimiter(',')->expected(3);
    app.add_option("--solver", f.solver, "auto, dense, banded or krylov");
    app.add_option("--config", f.config, "Flat JSON file of settings; flags override it");
    app.add_option("--out", f.out, "Output path, - for stdout");
    app.add_option("--format", f.format, "json or csv");

    std::string command;
    for (const auto& name : kCommands) {
        app.add_subcommand(name)->callback([&command, name] { command = name; });
    }
    std::string validate_path;
    auto* validate_cmd = app.add_subcommand("validate", "Check a JSON result document");
    validate_cmd->add_option("file", validate_path, "JSON document")->required();

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    if (!reversed.empty()) reversed.pop_back();
    try {
        app.parse(reversed);
    } catch (const CLI::CallForHelp& e) {
        out << app.help();
        return kOk;
    } catch (const CLI::CallForVersion& e) {
        out << PAIRSTOP_VERSION << '\n';
        return kOk;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << '\n';
        return kConfigError;
    }
    if (validate_cmd->parsed()) return run_validate(validate_path, out, err);

    Settings s;
    s.command = command;
    try {
        if (!f.config.empty()) apply_config(f.config, s);
        apply_flags(f, s);
        validate(s);
    } catch (const ConfigError& e) {
        err << "error: " << e.what() << '\n';
        return kConfigError;
    }

    try {
        const Output o = dispatch(s);
        if (s.out == "-") {
            write_output(s, o, out);
        } else {
            std::ofstream file(s.out, std::ios::binary);
            if (!file) throw ConfigError("out", "cannot open '" + s.out + "' for writing");
            write_output(s, o, file);
        }
    } catch (const ConfigError& e) {
        err << "error: " << e.what() << '\n';
        return kConfigError;
    } catch (const InvalidParameter& e) {
        err << "error: " << e.what() << '\n';
        return kConfigError;
    } catch (const BracketError& e) {
        err << "numerical error: " << e.what() << '\n';
        print_bracket_samples(e, err);
        return kNumericalError;
    } catch (const SingularSystemError& e) {
        err << "numerical error: " << e.what() << " (h = " << fmt9(e.h()) << ", h0 = " << fmt9(e.h0()) << ")\n";
        return kNumericalError;
    } catch (const NumericalError& e) {
        err << "numerical error: " << e.what() << '\n';
        return kNumericalError;
    }
    return kOk;
}

}  // namespace pairstop::cli
