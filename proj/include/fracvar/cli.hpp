#pragma once

// Batch front-end: problem file -> task -> summary.json + CSV tables.
//
// Exit codes: 0 success, 2 validation error, 3 numerical failure
// (non-finite value or integrand domain error), 4 non-convergence.
//
// summary.json is byte-identical across runs of the same problem file;
// wall-clock timings go to timings.json instead.

#include "fracvar/certify.hpp"
#include "fracvar/solver.hpp"
#include "fracvar/varproblem.hpp"

#include "json.hpp"

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <iterator>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace fracvar::cli {

using nlohmann::json;

inline constexpr const char* kVersion = "0.1.0";

enum ExitCode : int { kOk = 0, kValidation = 2, kNumerical = 3, kNotConverged = 4 };

class ValidationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

inline const std::set<std::string>& task_names() {
    static const std::set<std::string> names{"eval-op",        "functional",  "el-residual", "solve",
                                             "solve-iso",      "certify-convex", "check-field", "limit-sweep"};
    return names;
}

/// Parsed and validated problem file with every default filled in.
struct ProblemFile {
    std::string task;
    double a = 0.0, b = 1.0;
    std::vector<double> alphas, betas;
    std::size_t unknowns = 1;
    std::string lagrangian;
    std::optional<std::pair<std::string, double>> constraint;  // g, ell
    struct Field {
        std::string phi, s;
        Box2 box{{0.0, 1.0}, {-1.0, 1.0}};
        int samples = 11;
    };
    std::optional<Field> field;
    std::size_t n_cells = 256;
    SolveConfig solver;
    std::vector<EndpointPins> pins;  // one per unknown
    std::vector<std::string> y;      // optional trajectory expressions in x, one per unknown
    Box3 convexity_box{{0.0, 1.0}, {-1.0, 1.0}, {-1.0, 1.0}};
    int convexity_samples = 9;
    std::vector<double> sweep_orders;
    std::string sweep_classical;

    VarProblem problem() const {
        VarProblem p;
        p.a = a;
        p.b = b;
        for (double al : alphas) p.alphas.emplace_back(al);
        for (double be : betas) p.betas.emplace_back(be);
        p.unknowns = unknowns;
        p.lagrangian = parse(lagrangian);
        if (constraint) p.constraint = IsoConstraint{parse(constraint->first), constraint->second};
        p.pins = pins;
        return p;
    }
    Grid grid() const { return Grid(a, b, n_cells); }
};

namespace detail {

inline void check_keys(const json& obj, const std::string& where, std::initializer_list<const char*> allowed) {
    if (!obj.is_object()) throw ValidationError(where + ": expected an object");
    for (const auto& [key, _] : obj.items()) {
        bool ok = false;
        for (const char* a : allowed) ok = ok || key == a;
        if (!ok) throw ValidationError("unknown key '" + (where.empty() ? key : where + "." + key) + "'");
    }
}

inline double get_number(const json& j, const std::string& key) {
    if (!j.is_number()) throw ValidationError("'" + key + "' must be a number");
    const double v = j.get<double>();
    if (!std::isfinite(v)) throw ValidationError("'" + key + "' must be finite");
    return v;
}

inline std::string get_string(const json& j, const std::string& key) {
    if (!j.is_string()) throw ValidationError("'" + key + "' must be a string");
    return j.get<std::string>();
}

inline std::vector<double> get_orders(const json& j, const std::string& key) {
    std::vector<double> out;
    if (j.is_array()) {
        if (j.empty()) throw ValidationError("'" + key + "' must not be empty");
        for (const auto& e : j) out.push_back(get_number(e, key));
    } else {
        out.push_back(get_number(j, key));
    }
    for (double o : out) {
        if (!(o > 0.0 && o < 1.0)) {
            throw ValidationError("'" + key + "' = " + fracvar::detail::format_number(o) +
                                  " violates the restriction of fractional orders to the open interval (0,1)");
        }
    }
    return out;
}

inline Interval get_interval(const json& j, const std::string& key) {
    if (!j.is_array() || j.size() != 2) throw ValidationError("'" + key + "' must be [lo, hi]");
    Interval iv{get_number(j[0], key), get_number(j[1], key)};
    if (iv.hi < iv.lo) throw ValidationError("'" + key + "' needs lo <= hi");
    return iv;
}

inline std::string check_expr(const std::string& src, const std::string& key) {
    try {
        parse(src);
    } catch (const ParseError& e) {
        throw ValidationError("'" + key + "': " + e.what());
    }
    return src;
}

inline EndpointPins get_pins(const json& j, const std::string& key) {
    check_keys(j, key, {"left", "right"});
    EndpointPins p;
    if (j.contains("left") && !j["left"].is_null()) p.left = get_number(j["left"], key + ".left");
    if (j.contains("right") && !j["right"].is_null()) p.right = get_number(j["right"], key + ".right");
    return p;
}

inline json interval_json(const Interval& iv) { return json::array({iv.lo, iv.hi}); }

inline json optional_json(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

}  // namespace detail

inline ProblemFile parse_problem(const json& doc) {
    using namespace detail;
    check_keys(doc, "", {"task", "interval", "orders", "unknowns", "lagrangian", "constraint", "field", "grid",
                         "solver", "pins", "y", "convexity", "sweep"});
    ProblemFile pf;
    if (!doc.contains("task")) throw ValidationError("missing key 'task'");
    pf.task = get_string(doc["task"], "task");
    if (!task_names().contains(pf.task)) throw ValidationError("unknown task '" + pf.task + "'");
    const bool needs_grid = pf.task != "certify-convex";

    if (doc.contains("interval")) {
        const json& iv = doc["interval"];
        check_keys(iv, "interval", {"a", "b"});
        if (!iv.contains("a") || !iv.contains("b")) throw ValidationError("'interval' needs both 'a' and 'b'");
        pf.a = get_number(iv["a"], "interval.a");
        pf.b = get_number(iv["b"], "interval.b");
        if (!(pf.b > pf.a)) throw ValidationError("'interval' needs a < b");
    } else if (needs_grid) {
        throw ValidationError("missing key 'interval'");
    }

    if (doc.contains("orders")) {
        const json& o = doc["orders"];
        check_keys(o, "orders", {"alpha", "beta"});
        if (!o.contains("alpha") || !o.contains("beta")) throw ValidationError("'orders' needs 'alpha' and 'beta'");
        pf.alphas = get_orders(o["alpha"], "orders.alpha");
        pf.betas = get_orders(o["beta"], "orders.beta");
    } else if (needs_grid) {
        throw ValidationError("missing key 'orders'");
    } else {
        pf.alphas = {0.5};
        pf.betas = {0.5};
    }

    if (doc.contains("unknowns")) {
        const json& u = doc["unknowns"];
        if (!u.is_number_integer() || u.get<long long>() < 1) throw ValidationError("'unknowns' must be a positive integer");
        pf.unknowns = u.get<std::size_t>();
    }

    if (!doc.contains("lagrangian")) throw ValidationError("missing key 'lagrangian'");
    pf.lagrangian = check_expr(get_string(doc["lagrangian"], "lagrangian"), "lagrangian");

    if (doc.contains("constraint")) {
        const json& c = doc["constraint"];
        check_keys(c, "constraint", {"g", "ell"});
        if (!c.contains("g") || !c.contains("ell")) throw ValidationError("'constraint' needs 'g' and 'ell'");
        pf.constraint = std::make_pair(check_expr(get_string(c["g"], "constraint.g"), "constraint.g"),
                                       get_number(c["ell"], "constraint.ell"));
    }

    if (doc.contains("field")) {
        const json& f = doc["field"];
        check_keys(f, "field", {"phi", "s", "box", "samples"});
        if (!f.contains("phi") || !f.contains("s")) throw ValidationError("'field' needs 'phi' and 's'");
        ProblemFile::Field fd;
        fd.phi = check_expr(get_string(f["phi"], "field.phi"), "field.phi");
        fd.s = check_expr(get_string(f["s"], "field.s"), "field.s");
        if (f.contains("box")) {
            check_keys(f["box"], "field.box", {"x", "y"});
            if (f["box"].contains("x")) fd.box.x = get_interval(f["box"]["x"], "field.box.x");
            if (f["box"].contains("y")) fd.box.y = get_interval(f["box"]["y"], "field.box.y");
        } else if (doc.contains("interval")) {
            fd.box.x = {pf.a, pf.b};
        }
        if (f.contains("samples")) {
            if (!f["samples"].is_number_integer() || f["samples"].get<long long>() < 2) {
                throw ValidationError("'field.samples' must be an integer >= 2");
            }
            fd.samples = f["samples"].get<int>();
        }
        pf.field = fd;
    }

    if (doc.contains("grid")) {
        const json& g = doc["grid"];
        check_keys(g, "grid", {"n_cells"});
        if (!g.contains("n_cells") || !g["n_cells"].is_number_integer() || g["n_cells"].get<long long>() < 1) {
            throw ValidationError("'grid.n_cells' must be a positive integer");
        }
        pf.n_cells = g["n_cells"].get<std::size_t>();
    } else if (needs_grid) {
        throw ValidationError("missing key 'grid'");
    }

    if (doc.contains("solver")) {
        const json& s = doc["solver"];
        check_keys(s, "solver", {"max_iters", "grad_tol", "step_init", "armijo_c", "armijo_shrink", "multiplier_tol",
                                 "max_outer"});
        auto integer = [&](const char* k, int& out) {
            if (!s.contains(k)) return;
            if (!s[k].is_number_integer()) throw ValidationError(std::string("'solver.") + k + "' must be an integer");
            out = s[k].get<int>();
        };
        auto number = [&](const char* k, double& out) {
            if (s.contains(k)) out = get_number(s[k], std::string("solver.") + k);
        };
        integer("max_iters", pf.solver.max_iters);
        integer("max_outer", pf.solver.max_outer);
        number("grad_tol", pf.solver.grad_tol);
        number("step_init", pf.solver.step_init);
        number("armijo_c", pf.solver.armijo_c);
        number("armijo_shrink", pf.solver.armijo_shrink);
        number("multiplier_tol", pf.solver.multiplier_tol);
        try {
            pf.solver.validate();
        } catch (const std::invalid_argument& e) {
            throw ValidationError(e.what());
        }
    }

    pf.pins.assign(pf.unknowns, EndpointPins{});
    if (doc.contains("pins")) {
        const json& p = doc["pins"];
        if (p.is_array()) {
            if (p.size() != pf.unknowns) throw ValidationError("'pins' array needs one entry per unknown");
            for (std::size_t k = 0; k < p.size(); ++k) pf.pins[k] = get_pins(p[k], "pins[" + std::to_string(k) + "]");
        } else {
            const EndpointPins one = get_pins(p, "pins");
            pf.pins.assign(pf.unknowns, one);
        }
    }

    if (doc.contains("y")) {
        const json& y = doc["y"];
        if (y.is_string()) {
            pf.y.push_back(check_expr(y.get<std::string>(), "y"));
        } else if (y.is_array()) {
            for (const auto& e : y) pf.y.push_back(check_expr(get_string(e, "y"), "y"));
        } else {
            throw ValidationError("'y' must be an expression string or an array of them");
        }
        if (pf.y.size() != pf.unknowns) throw ValidationError("'y' needs one expression per unknown");
        for (std::size_t k = 0; k < pf.y.size(); ++k) {
            for (const auto& v : free_variables(parse(pf.y[k]))) {
                if (v != "x") throw ValidationError("'y' may only use the variable x, found '" + v + "'");
            }
        }
    }

    if (doc.contains("convexity")) {
        const json& c = doc["convexity"];
        check_keys(c, "convexity", {"box", "samples"});
        if (c.contains("box")) {
            check_keys(c["box"], "convexity.box", {"x", "u", "v"});
            if (c["box"].contains("x")) pf.convexity_box.x = get_interval(c["box"]["x"], "convexity.box.x");
            if (c["box"].contains("u")) pf.convexity_box.u = get_interval(c["box"]["u"], "convexity.box.u");
            if (c["box"].contains("v")) pf.convexity_box.v = get_interval(c["box"]["v"], "convexity.box.v");
        }
        if (c.contains("samples")) {
            if (!c["samples"].is_number_integer() || c["samples"].get<long long>() < 3) {
                throw ValidationError("'convexity.samples' must be an integer >= 3");
            }
            pf.convexity_samples = c["samples"].get<int>();
        }
    }

    if (doc.contains("sweep")) {
        const json& s = doc["sweep"];
        check_keys(s, "sweep", {"orders", "classical"});
        if (!s.contains("orders") || !s["orders"].is_array()) throw ValidationError("'sweep.orders' must be an array");
        if (s["orders"].empty()) throw ValidationError("'sweep.orders' must not be empty");
        pf.sweep_orders = get_orders(s["orders"], "sweep.orders");
        if (!s.contains("classical")) throw ValidationError("'sweep' needs 'classical'");
        pf.sweep_classical = check_expr(get_string(s["classical"], "sweep.classical"), "sweep.classical");
    }

    // Task-specific requirements.
    if (pf.task == "solve-iso" && !pf.constraint) throw ValidationError("task 'solve-iso' needs 'constraint'");
    if (pf.task == "check-field" && !pf.field) throw ValidationError("task 'check-field' needs 'field'");
    if (pf.task == "limit-sweep" && pf.sweep_orders.empty()) throw ValidationError("task 'limit-sweep' needs 'sweep'");
    if (pf.task == "eval-op" && pf.unknowns != 1) throw ValidationError("task 'eval-op' supports a single unknown");
    if (pf.task == "check-field" && !pf.y.empty() && (pf.alphas.size() != 1 || pf.unknowns != 1)) {
        throw ValidationError("task 'check-field' needs a single alpha and a single unknown");
    }
    if (pf.task == "certify-convex" || pf.task == "check-field") {
        for (const auto& v : free_variables(parse(pf.lagrangian))) {
            if (v != "x" && v != "u" && v != "v") {
                throw ValidationError("'lagrangian' for task '" + pf.task + "' may only use x, u, v; found '" + v + "'");
            }
        }
    }
    if (needs_grid) {
        try {
            pf.problem().validate();
        } catch (const std::invalid_argument& e) {
            throw ValidationError(e.what());
        }
    }
    return pf;
}

/// Effective configuration; itself a valid problem file.
inline json to_json(const ProblemFile& pf) {
    using namespace detail;
    json j;
    j["task"] = pf.task;
    j["interval"] = {{"a", pf.a}, {"b", pf.b}};
    j["orders"] = {{"alpha", pf.alphas}, {"beta", pf.betas}};
    j["unknowns"] = pf.unknowns;
    j["lagrangian"] = pf.lagrangian;
    if (pf.constraint) j["constraint"] = {{"g", pf.constraint->first}, {"ell", pf.constraint->second}};
    if (pf.field) {
        j["field"] = {{"phi", pf.field->phi},
                      {"s", pf.field->s},
                      {"box", {{"x", interval_json(pf.field->box.x)}, {"y", interval_json(pf.field->box.y)}}},
                      {"samples", pf.field->samples}};
    }
    j["grid"] = {{"n_cells", pf.n_cells}};
    j["solver"] = {{"max_iters", pf.solver.max_iters},         {"grad_tol", pf.solver.grad_tol},
                   {"step_init", pf.solver.step_init},         {"armijo_c", pf.solver.armijo_c},
                   {"armijo_shrink", pf.solver.armijo_shrink}, {"multiplier_tol", pf.solver.multiplier_tol},
                   {"max_outer", pf.solver.max_outer}};
    json pins = json::array();
    for (const auto& p : pf.pins) pins.push_back({{"left", optional_json(p.left)}, {"right", optional_json(p.right)}});
    j["pins"] = pins;
    if (!pf.y.empty()) j["y"] = pf.y;
    j["convexity"] = {{"box",
                       {{"x", interval_json(pf.convexity_box.x)},
                        {"u", interval_json(pf.convexity_box.u)},
                        {"v", interval_json(pf.convexity_box.v)}}},
                      {"samples", pf.convexity_samples}};
    if (!pf.sweep_orders.empty()) j["sweep"] = {{"orders", pf.sweep_orders}, {"classical", pf.sweep_classical}};
    return j;
}

/// FNV-1a, 64 bit. Stable across platforms, used only to identify inputs.
inline std::string fnv1a64(std::string_view bytes) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    std::ostringstream os;
    os << "fnv1a64:" << std::hex;
    os.width(16);
    os.fill('0');
    os << h;
    return os.str();
}

// ---------------------------------------------------------------------------
// CSV

class CsvTable {
public:
    void add(std::string name, std::vector<double> column) {
        names_.push_back(std::move(name));
        cols_.push_back(std::move(column));
    }
    std::size_t rows() const { return cols_.empty() ? 0 : cols_.front().size(); }

    void write(const std::filesystem::path& path) const {
        std::ofstream os(path, std::ios::binary);
        if (!os) throw std::runtime_error("cannot write " + path.string());
        for (std::size_t c = 0; c < names_.size(); ++c) os << (c ? "," : "") << names_[c];
        os << '\n';
        for (std::size_t r = 0; r < rows(); ++r) {
            for (std::size_t c = 0; c < cols_.size(); ++c) {
                os << (c ? "," : "") << fracvar::detail::format_number(cols_[c][r]);
            }
            os << '\n';
        }
    }

private:
    std::vector<std::string> names_;
    std::vector<std::vector<double>> cols_;
};

// ---------------------------------------------------------------------------
// Limit sweep

struct SweepRow {
    double order = 0.0;
    double J = 0.0;
    double distance = 0.0;  // weighted L2 distance to the classical solution
    int iters = 0;
    bool converged = false;
    std::string status;
};

/// Solve with every alpha and beta set to each order in turn and measure
/// the distance to a classical reference solution y(x).
inline std::vector<SweepRow> limit_sweep(const VarProblem& base, const Grid& grid, const SolveConfig& cfg,
                                         std::span<const double> orders, const Expr& classical) {
    if (orders.empty()) throw std::invalid_argument("limit_sweep: empty orders list");
    const SampledFn ref = SampledFn::sample(grid, [&](double x) { return evaluate(classical, {{"x", x}}); });
    std::vector<SweepRow> rows;
    for (double o : orders) {
        SweepRow row;
        row.order = o;
        try {
            VarProblem p = base;
            p.alphas.assign(base.alphas.size(), FracOrder(o));
            p.betas.assign(base.betas.size(), FracOrder(o));
            const SolveReport rep = p.constraint ? solve_isoperimetric(p, grid, cfg) : minimize(p, grid, cfg);
            row.J = rep.J;
            row.iters = rep.iters;
            row.converged = rep.converged;
            double d2 = 0.0;
            for (const auto& yk : rep.y) {
                std::vector<double> diff(grid.size());
                for (std::size_t i = 0; i < diff.size(); ++i) diff[i] = yk[i] - ref.values[i];
                d2 += grid.inner(diff, diff);
            }
            row.distance = std::sqrt(d2);
            row.status = rep.converged ? "ok" : "not-converged";
        } catch (const std::exception& e) {
            row.J = std::numeric_limits<double>::quiet_NaN();
            row.distance = std::numeric_limits<double>::quiet_NaN();
            row.status = std::string("failed: ") + e.what();
        }
        rows.push_back(row);
    }
    return rows;
}

// ---------------------------------------------------------------------------
// Task execution

struct RunOptions {
    std::optional<std::size_t> n_cells;
    bool quiet = false;
};

namespace detail {

inline Samples sample_y(const ProblemFile& pf, const VarProblem& p, const Grid& grid) {
    if (pf.y.empty()) return default_initial_guess(p, grid);
    Samples y;
    for (const auto& src : pf.y) {
        const Expr e = parse(src);
        std::vector<double> row(grid.size());
        for (std::size_t i = 0; i < row.size(); ++i) {
            try {
                row[i] = evaluate(e, {{"x", grid.node(i)}});
            } catch (const EvalError& err) {
                throw NodeEvalError(i, grid.node(i), std::string("y: ") + err.what());
            }
        }
        y.push_back(std::move(row));
    }
    return y;
}

inline std::string y_name(std::size_t k, std::size_t n) { return n == 1 ? "y" : "y" + std::to_string(k + 1); }

/// x, y..., channels... in the documented order.
inline CsvTable trajectory_table(const DiscreteProblem& dp, const Samples& y, const Samples& ch) {
    CsvTable t;
    t.add("x", ch[0]);
    for (std::size_t k = 0; k < y.size(); ++k) t.add(y_name(k, y.size()), y[k]);
    const auto slots = dp.layout().slots();
    for (std::size_t s = 1; s < slots.size(); ++s) t.add(slots[s], ch[s]);
    return t;
}

inline void add_residual(CsvTable& t, const Residual& r) {
    for (std::size_t k = 0; k < r.values.size(); ++k) {
        t.add(r.values.size() == 1 ? "residual" : "residual" + std::to_string(k + 1), r.values[k]);
    }
}

inline json report_json(const SolveReport& rep) {
    json r;
    r["J"] = rep.J;
    r["residual_norm"] = rep.residual_norm;
    r["converged"] = rep.converged;
    r["iters"] = rep.iters;
    r["lambda"] = optional_json(rep.lambda);
    r["constraint_gap"] = optional_json(rep.constraint_gap);
    if (rep.outer_iters > 0) r["outer_iters"] = rep.outer_iters;
    r["abnormal"] = rep.abnormal;
    return r;
}

}  // namespace detail

/// Run one problem file. Writes summary.json (always, once the file parses),
/// timings.json and task CSVs into out_dir. Returns the exit code.
inline int run(const std::filesystem::path& problem_path, const std::filesystem::path& out_dir,
               const RunOptions& opts = {}, std::ostream& log = std::cerr) {
    using namespace detail;
    const auto t0 = std::chrono::steady_clock::now();
    std::string bytes;
    {
        std::ifstream is(problem_path, std::ios::binary);
        if (!is) {
            log << "fracvar: cannot read " << problem_path << '\n';
            return kValidation;
        }
        bytes.assign(std::istreambuf_iterator<char>(is), std::istreambuf_iterator<char>());
    }

    json summary;
    summary["fracvar_version"] = kVersion;
    summary["input_hash"] = fnv1a64(bytes);
    std::vector<std::string> outputs;
    json warnings = json::array();

    std::error_code ec;
    std::filesystem::create_directories(out_dir, ec);
    if (ec) {
        log << "fracvar: cannot create output directory " << out_dir << ": " << ec.message() << '\n';
        return kValidation;
    }

    auto finish = [&](int code, const std::string& status) {
        summary["status"] = status;
        summary["exit_code"] = code;
        summary["outputs"] = outputs;
        summary["warnings"] = warnings;
        std::ofstream(out_dir / "summary.json", std::ios::binary) << summary.dump(2) << '\n';
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        std::ofstream(out_dir / "timings.json", std::ios::binary) << json{{"wall_seconds", secs}}.dump(2) << '\n';
        return code;
    };

    ProblemFile pf;
    try {
        json doc;
        try {
            doc = json::parse(bytes);
        } catch (const json::parse_error& e) {
            throw ValidationError(std::string("malformed JSON: ") + e.what());
        }
        pf = parse_problem(doc);
        if (opts.n_cells) {
            if (*opts.n_cells == 0) throw ValidationError("--n-cells must be positive");
            pf.n_cells = *opts.n_cells;
        }
    } catch (const ValidationError& e) {
        log << "fracvar: validation error: " << e.what() << '\n';
        summary["error"] = e.what();
        return finish(kValidation, "validation-error");
    }
    summary["task"] = pf.task;
    summary["problem"] = to_json(pf);

    auto write = [&](const CsvTable& t, const std::string& name) {
        t.write(out_dir / name);
        outputs.push_back(name);
    };

    json result;
    int code = kOk;
    std::string status = "ok";
    try {
        if (pf.task == "certify-convex") {
            const ConvexityReport rep = check_convexity(parse(pf.lagrangian), pf.convexity_box, pf.convexity_samples);
            result["convex"] = rep.convex;
            result["gradient_inequality_holds"] = rep.gradient_inequality_holds;
            result["hessian_psd"] = rep.hessian_psd;
            result["pairs_checked"] = rep.pairs_checked;
            result["inconclusive_points"] = rep.inconclusive.size();
            if (rep.counterexample) {
                const auto& c = *rep.counterexample;
                result["counterexample"] = {{"x", c.x},   {"u", c.u},   {"v", c.v},          {"du", c.du},
                                            {"dv", c.dv}, {"violation", c.violation}, {"source", c.source}};
            }
        } else {
            const VarProblem p = pf.problem();
            const Grid grid = pf.grid();
            if (pf.task == "eval-op") {
                const Samples y = sample_y(pf, p, grid);
                CsvTable ops;
                ops.add("x", grid.nodes());
                ops.add("y", y[0]);
                CsvTable coeffs;
                std::vector<double> k(grid.size());
                for (std::size_t i = 0; i < k.size(); ++i) k[i] = static_cast<double>(i);
                coeffs.add("k", k);
                std::vector<std::pair<std::string, std::vector<double>>> left, right;
                const auto& A = p.alphas;
                const auto& B = p.betas;
                for (std::size_t i = 0; i < A.size(); ++i) {
                    const std::string sfx = A.size() == 1 ? "" : std::to_string(i + 1);
                    const FracOperator L = build_left_rlfi(grid, A[i].complement());
                    left.emplace_back("I_y" + sfx, L.apply(y[0]));
                    right.emplace_back("RI_y" + sfx, build_right_adjoint(L).apply(y[0]));
                    coeffs.add("rlfi_generator" + sfx, {L.generator().begin(), L.generator().end()});
                    coeffs.add("rlfi_first_column" + sfx, {L.first_column().begin(), L.first_column().end()});
                }
                for (std::size_t j = 0; j < B.size(); ++j) {
                    const std::string sfx = B.size() == 1 ? "" : std::to_string(j + 1);
                    const FracOperator D = build_left_rlfd(grid, B[j]);
                    left.emplace_back("D_y" + sfx, D.apply(y[0]));
                    right.emplace_back("RD_y" + sfx, build_right_adjoint(D).apply(y[0]));
                    coeffs.add("rlfd_generator" + sfx, {D.generator().begin(), D.generator().end()});
                }
                for (auto& [name, col] : left) ops.add(name, std::move(col));
                for (auto& [name, col] : right) ops.add(name, std::move(col));
                write(ops, "operators.csv");
                write(coeffs, "coefficients.csv");
                result["rows"] = grid.size();
            } else if (pf.task == "functional" || pf.task == "el-residual") {
                const DiscreteProblem dp(p, grid);
                const Samples y = sample_y(pf, p, grid);
                const Samples ch = dp.channels(y);
                const std::vector<double> Lvals = dp.integrand_values(ch);
                const double J = grid.integrate(Lvals);
                if (!std::isfinite(J)) throw NumericalError(0, "functional is not finite");
                result["J"] = J;
                CsvTable t = trajectory_table(dp, y, ch);
                if (pf.task == "functional") {
                    t.add("integrand", Lvals);
                    if (p.constraint) result["constraint_value"] = constraint_value(p, y, grid);
                    write(t, "trajectory.csv");
                } else {
                    const Residual r = dp.residual_from_channels(ch);
                    result["residual_norm"] = r.norm;
                    result["residual_interior_norm"] = r.interior_norm();
                    add_residual(t, r);
                    write(t, "residual.csv");
                }
            } else if (pf.task == "solve" || pf.task == "solve-iso") {
                const Samples y0 = sample_y(pf, p, grid);
                SolveReport rep;
                VarProblem solved = p;
                if (pf.task == "solve") {
                    solved.constraint.reset();
                    rep = minimize(solved, grid, pf.solver, y0);
                } else {
                    rep = solve_isoperimetric(p, grid, pf.solver, y0);
                    solved = augmented_lagrangian(p, rep.lambda.value_or(0.0));
                }
                result = report_json(rep);
                for (const auto& w : rep.warnings) warnings.push_back(w);
                const DiscreteProblem dp(solved, grid);
                const Samples ch = dp.channels(rep.y);
                CsvTable t = trajectory_table(dp, rep.y, ch);
                add_residual(t, dp.residual_from_channels(ch));
                write(t, "solution.csv");
                if (!rep.converged) {
                    code = kNotConverged;
                    status = rep.abnormal ? "abnormal" : "not-converged";
                }
            } else if (pf.task == "check-field") {
                const Expr L = parse(pf.lagrangian);
                const ExactField field = ExactField::parse(pf.field->phi, pf.field->s, pf.field->box);
                const FieldCheckReport fc = check_field(L, field, pf.field->samples);
                result["field_identities_pass"] = fc.pass;
                result["max_residual_x"] = fc.max_residual_x;
                result["max_residual_y"] = fc.max_residual_y;
                result["inconclusive_points"] = fc.inconclusive.size();
                if (!pf.y.empty()) {
                    const Samples y = sample_y(pf, p, grid);
                    const FieldMinimizerReport fm =
                        verify_field_minimizer(L, field, SampledFn{grid, y[0]}, FracOrder(pf.alphas[0]));
                    result["field_trajectory"] = fm.field_trajectory;
                    result["field_residual_norm"] = fm.field_residual_norm;
                    result["field_tol"] = fm.field_tol;
                    result["J"] = fm.J;
                    result["field_value"] = fm.field_value;
                    result["gap"] = fm.gap;
                    result["min_excess"] = fm.min_excess;
                    result["verdict"] = fc.pass ? fm.verdict : "field identities fail; " + fm.verdict;
                    CsvTable t;
                    t.add("x", grid.nodes());
                    t.add("y", y[0]);
                    t.add("I_y", fm.integral_channel);
                    t.add("D_y", fm.derivative_channel);
                    t.add("field_residual", fm.field_residual);
                    t.add("excess", fm.excess_values);
                    write(t, "field.csv");
                }
            } else if (pf.task == "limit-sweep") {
                const auto rows = limit_sweep(p, grid, pf.solver, pf.sweep_orders, parse(pf.sweep_classical));
                std::ofstream os(out_dir / "sweep.csv", std::ios::binary);
                os << "order,J,distance,iters,converged,status\n";
                json jrows = json::array();
                for (const auto& r : rows) {
                    os << fracvar::detail::format_number(r.order) << ',' << fracvar::detail::format_number(r.J) << ','
                       << fracvar::detail::format_number(r.distance) << ',' << r.iters << ','
                       << (r.converged ? 1 : 0) << ',' << '"' << r.status << '"' << '\n';
                    jrows.push_back({{"order", r.order},
                                     {"J", std::isfinite(r.J) ? json(r.J) : json(nullptr)},
                                     {"distance", std::isfinite(r.distance) ? json(r.distance) : json(nullptr)},
                                     {"iters", r.iters},
                                     {"converged", r.converged},
                                     {"status", r.status}});
                    if (!r.converged) code = kNotConverged;
                }
                outputs.push_back("sweep.csv");
                result["rows"] = jrows;
                if (code != kOk) status = "not-converged";
            }
        }
    } catch (const ValidationError& e) {
        log << "fracvar: validation error: " << e.what() << '\n';
        summary["error"] = e.what();
        return finish(kValidation, "validation-error");
    } catch (const NumericalError& e) {
        log << "fracvar: numerical failure: " << e.what() << '\n';
        summary["error"] = e.what();
        return finish(kNumerical, "numerical-failure");
    } catch (const NodeEvalError& e) {
        log << "fracvar: numerical failure: " << e.what() << '\n';
        summary["error"] = e.what();
        return finish(kNumerical, "numerical-failure");
    } catch (const EvalError& e) {
        log << "fracvar: numerical failure: " << e.what() << '\n';
        summary["error"] = e.what();
        return finish(kNumerical, "numerical-failure");
    } catch (const std::invalid_argument& e) {
        log << "fracvar: validation error: " << e.what() << '\n';
        summary["error"] = e.what();
        return finish(kValidation, "validation-error");
    } catch (const std::domain_error& e) {
        log << "fracvar: validation error: " << e.what() << '\n';
        summary["error"] = e.what();
        return finish(kValidation, "validation-error");
    }
    summary["result"] = result;
    if (!opts.quiet) log << "fracvar: " << pf.task << ": " << status << '\n';
    return finish(code, status);
}

}  // namespace fracvar::cli
