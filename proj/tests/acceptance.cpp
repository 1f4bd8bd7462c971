// Acceptance suite: one PASS/FAIL line per criterion, detail lines indented.
// Exit status is the number of failed criteria (0 when all pass).

#include "expr_gen.hpp"
#include "fracvar/cli.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numbers>
#include <random>
#include <sstream>
#include <string>
#include <vector>

using namespace fracvar;
namespace fs = std::filesystem;

namespace {

const fs::path kProblems = fs::path(FRACVAR_SOURCE_DIR) / "problems";
const double kG15 = std::tgamma(1.5);

struct Outcome {
    bool pass = true;
    std::vector<std::string> details;

    void check(bool ok, const std::string& what) {
        pass = pass && ok;
        details.push_back(std::string(ok ? "ok   " : "FAIL ") + what);
    }
};

std::string fmt(const char* f, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

std::vector<double> sample(const Grid& g, const std::function<double(double)>& fn) {
    return SampledFn::sample(g, fn).values;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

cli::ProblemFile load(const std::string& name) {
    std::ifstream is(kProblems / name);
    return cli::parse_problem(cli::json::parse(is));
}

// 1. Operator oracles
Outcome operator_oracles() {
    Outcome o;
    {
        const auto t0 = std::chrono::steady_clock::now();
        const Grid g(0, 1, 1024);
        const auto out = build_left_rlfi(g, FracOrder(0.5)).apply(std::vector<double>(g.size(), 1.0));
        double err = 0.0;
        for (std::size_t i = 0; i < g.size(); ++i) {
            err = std::max(err, std::abs(out[i] - 2.0 * std::sqrt(g.node(i) / std::numbers::pi)));
        }
        const double t = seconds_since(t0);
        o.check(err <= 1e-5 && t < 1.0, fmt("left RLFI of 1 vs 2 sqrt(x/pi): max error %.3e (<= 1e-5), %.3f s", err, t));
    }
    {
        const auto t0 = std::chrono::steady_clock::now();
        const Grid g(0, 1, 1024);
        const auto out = build_left_rlfd(g, FracOrder(0.5)).apply(sample(g, [](double x) { return std::sqrt(x); }));
        double rel = 0.0;
        for (std::size_t i = 1; i < g.size(); ++i) {
            if (g.is_interior(i)) rel = std::max(rel, std::abs(out[i] - kG15) / kG15);
        }
        const double t = seconds_since(t0);
        o.check(rel <= 2e-2 && t < 1.0, fmt("left RLFD of sqrt(t) vs G(1.5): max interior rel. error %.3e (<= 2e-2), %.3f s", rel, t));
    }
    {
        const auto t0 = std::chrono::steady_clock::now();
        const double beta = 0.5;
        std::vector<double> first;
        for (std::size_t n : {256u, 512u}) {
            const Grid g(0, 1, n);
            first.push_back(build_left_rlfd(g, FracOrder(beta)).apply(std::vector<double>(g.size(), 1.0))[1]);
        }
        const double ratio = first[1] / first[0];
        const double t = seconds_since(t0);
        o.check(std::abs(ratio / std::pow(2.0, beta) - 1.0) <= 0.2 && t < 1.0,
                fmt("blow-up of RLFD of 1 at x_1: ratio %.6f vs 2^beta = %.6f (within 20%%), %.3f s", ratio,
                    std::pow(2.0, beta), t));
    }
    return o;
}

// 2. Convergence orders, measured at x = b
Outcome convergence_orders() {
    Outcome o;
    const auto t0 = std::chrono::steady_clock::now();
    const std::vector<std::size_t> ns{128, 256, 512, 1024};
    auto error_at_b = [](bool integral, double nu, double order, std::size_t n) {
        const Grid g(0, 1, n);
        const auto f = sample(g, [nu](double x) { return std::pow(x, nu); });
        const double got = integral ? build_left_rlfi(g, FracOrder(order)).apply(f).back()
                                    : build_left_rlfd(g, FracOrder(order)).apply(f).back();
        const double exact = integral ? std::tgamma(nu + 1) / std::tgamma(nu + order + 1)
                                      : std::tgamma(nu + 1) / std::tgamma(nu - order + 1);
        return std::abs(got - exact);
    };
    for (double order : {0.3, 0.5, 0.7}) {
        for (double nu : {0.5, 1.0, 2.0}) {
            std::vector<double> e;
            for (auto n : ns) e.push_back(error_at_b(true, nu, order, n));
            if (nu == 1.0) {
                // Product trapezoid integrates linear data exactly.
                const double m = *std::max_element(e.begin(), e.end());
                o.check(m <= 1e-13, fmt("RLFI order %.1f, t^%.1f: reproduced exactly, max error %.1e", order, nu, m));
                continue;
            }
            double worst = INFINITY;
            for (std::size_t k = 1; k < e.size(); ++k) worst = std::min(worst, std::log2(e[k - 1] / e[k]));
            o.check(worst >= 1.8, fmt("RLFI order %.1f, t^%.1f: empirical order %.3f (>= 1.8)", order, nu, worst));
        }
    }
    for (double beta : {0.3, 0.5, 0.7}) {
        for (double nu : {0.5, 1.0, 2.0}) {
            if (!(nu > beta)) continue;
            std::vector<double> e;
            for (auto n : ns) e.push_back(error_at_b(false, nu, beta, n));
            double worst = INFINITY;
            for (std::size_t k = 1; k < e.size(); ++k) worst = std::min(worst, std::log2(e[k - 1] / e[k]));
            o.check(worst >= 0.8, fmt("RLFD order %.1f, t^%.1f: empirical order %.3f (>= 0.8)", beta, nu, worst));
        }
    }
    const double t = seconds_since(t0);
    o.check(t < 10.0, fmt("runtime %.3f s (< 10 s)", t));
    return o;
}

// 3. Discrete integration by parts
Outcome integration_by_parts() {
    Outcome o;
    const Grid g(0, 1, 256);
    std::mt19937_64 rng(314159);
    std::uniform_real_distribution<double> U(-1.0, 1.0);
    std::uniform_real_distribution<double> ord(0.05, 0.95);
    double worst = 0.0;
    for (int pair = 0; pair < 100; ++pair) {
        const FracOrder q(ord(rng));
        std::vector<double> f(g.size()), h(g.size());
        for (auto& v : f) v = U(rng);
        for (auto& v : h) v = U(rng);
        for (const auto& L : {build_left_rlfi(g, q), build_left_rlfd(g, q)}) {
            const auto R = build_right_adjoint(L);
            const double lhs = g.inner(L.apply(f), h);
            const double rhs = g.inner(f, R.apply(h));
            const double scale = std::max({std::abs(lhs), std::abs(rhs), 1e-300});
            worst = std::max(worst, std::abs(lhs - rhs) / scale);
        }
    }
    o.check(worst <= 1e-12, fmt("100 random pairs, RLFI and RLFD: max relative residual %.3e (<= 1e-12)", worst));
    for (auto kind : {OperatorKind::RightRLFI, OperatorKind::RightRLFD}) {
        std::vector<double> gaps;
        for (std::size_t n : {128u, 256u, 512u}) {
            const Grid gn(0, 1, n);
            const auto smooth = sample(gn, [](double x) { return std::exp(x); });
            const auto direct = (kind == OperatorKind::RightRLFI ? build_right_rlfi(gn, FracOrder(0.5))
                                                                 : build_right_rlfd(gn, FracOrder(0.5)))
                                    .apply(smooth);
            const auto left = kind == OperatorKind::RightRLFI ? build_left_rlfi(gn, FracOrder(0.5))
                                                              : build_left_rlfd(gn, FracOrder(0.5));
            const auto adj = build_right_adjoint(left).apply(smooth);
            double gap = 0.0;
            for (std::size_t i = 0; i < gn.size(); ++i) {
                if (gn.is_interior(i)) gap = std::max(gap, std::abs(direct[i] - adj[i]));
            }
            gaps.push_back(gap);
        }
        o.check(gaps[0] > 0.0 && gaps[1] < gaps[0] && gaps[2] < gaps[1],
                fmt("%s direct vs adjoint interior gap: %.3e, %.3e, %.3e (decreasing)",
                    std::string(to_string(kind)).c_str(), gaps[0], gaps[1], gaps[2]));
    }
    return o;
}

// 4. Gradient identity
Outcome gradient_identity() {
    Outcome o;
    const auto t0 = std::chrono::steady_clock::now();
    const Grid g(0, 1, 64);
    testing::ExprGenerator gen(2718);
    double worst_adj = 0.0, worst_fd = 0.0;
    for (int t = 0; t < 10; ++t) {
        VarProblem p = VarProblem::basic(0, 1, gen.uniform(0.1, 0.9), gen.uniform(0.1, 0.9), "v^2");
        p.lagrangian = fold::add(gen.smooth(3), parse("v^2/2 + u^2/2"));
        const DiscreteProblem dp(p, g);
        const Samples y{sample(g, [&](double x) { return 0.3 + std::sin(2.0 * x + t); })};
        const Samples grad = gradient(p, y, g);
        const Residual r = el_residual(p, y, g);
        double scale = 0.0;
        for (double v : grad[0]) scale = std::max(scale, std::abs(v));
        for (std::size_t i = 0; i < g.size(); ++i) {
            const double ref = g.weight(i) * r.values[0][i];
            worst_adj = std::max(worst_adj, std::abs(grad[0][i] - ref) / std::max(std::abs(ref), 1e-300));
            Samples yp = y, ym = y;
            yp[0][i] += 1e-6;
            ym[0][i] -= 1e-6;
            const double fd = (dp.functional(yp) - dp.functional(ym)) / 2e-6;
            worst_fd = std::max(worst_fd, std::abs(fd - grad[0][i]) / scale);
        }
    }
    const double t = seconds_since(t0);
    o.check(worst_adj <= 1e-12, fmt("gradient vs weight * residual: max componentwise rel. deviation %.3e (<= 1e-12)", worst_adj));
    o.check(worst_fd <= 1e-6, fmt("gradient vs central differences (step 1e-6): max rel. deviation %.3e (<= 1e-6)", worst_fd));
    o.check(t < 30.0, fmt("10 random Lagrangians at n_cells=64, runtime %.3f s (< 30 s)", t));
    return o;
}

// 5. Driver solve
Outcome driver_solve() {
    Outcome o;
    const auto t0 = std::chrono::steady_clock::now();
    const cli::ProblemFile pf = load("solve_shift.json");
    const Grid g = pf.grid();
    const SolveReport rep = minimize(pf.problem(), g, pf.solver);
    const double t = seconds_since(t0);
    o.check(rep.J <= 1e-6, fmt("J = %.6e (<= 1e-6) after %d iterations", rep.J, rep.iters));
    o.details.push_back(fmt("info J - h/2 = %.3e: with y(0)=0 pinned the Grunwald-Letnikov value at x_0 is 0, so "
                            "the integrand there is 1 and J_h >= w_0 = h/2 = %.6e",
                            rep.J - 0.5 * g.h(), 0.5 * g.h()));
    o.check(rep.iters <= 5000, fmt("iterations %d (<= 5000), converged=%d", rep.iters, rep.converged ? 1 : 0));
    const auto Iy = build_left_rlfi(g, FracOrder(0.5)).apply(rep.y[0]);
    double err = 0.0;
    for (std::size_t i = 0; i < g.size(); ++i) err = std::max(err, std::abs(Iy[i] - g.node(i)));
    o.check(err <= 2e-2, fmt("recovered RLFI channel vs x: max error %.3e (<= 2e-2)", err));
    o.check(t < 60.0, fmt("runtime %.3f s (< 60 s)", t));
    return o;
}

// 6. Isoperimetric fixture
Outcome isoperimetric() {
    Outcome o;
    const cli::ProblemFile one = load("solve_iso.json");
    const cli::ProblemFile two = load("solve_iso_ell2.json");
    const SolveReport r1 = solve_isoperimetric(one.problem(), one.grid(), one.solver);
    const SolveReport r2 = solve_isoperimetric(two.problem(), two.grid(), two.solver);
    const double l1 = r1.lambda.value_or(NAN), l2 = r2.lambda.value_or(NAN);
    const double gap = std::abs(r1.constraint_gap.value_or(INFINITY));
    o.check(r1.converged && !r1.abnormal, fmt("ell=1 converged in %d outer steps", r1.outer_iters));
    o.check(std::abs(l1 + 2.0) <= 1e-2, fmt("ell=1: lambda = %.6f (-2 +- 1e-2)", l1));
    o.check(std::abs(r1.J - 1.0) <= 1e-2, fmt("ell=1: J = %.6f (1 +- 1e-2)", r1.J));
    o.check(gap <= 1e-3, fmt("ell=1: constraint gap %.3e (<= 1e-3)", gap));
    o.check(std::abs(l2 / -4.0 - 1.0) <= 0.05, fmt("ell=2: lambda = %.6f (-4 within 5%%)", l2));
    o.check(std::abs(r2.J / 4.0 - 1.0) <= 0.05, fmt("ell=2: J = %.6f (4 within 5%%)", r2.J));
    return o;
}

// 7. Classical limit sweep
Outcome classical_limit() {
    Outcome o;
    const cli::ProblemFile pf = load("limit_sweep.json");
    const auto rows =
        cli::limit_sweep(pf.problem(), pf.grid(), pf.solver, pf.sweep_orders, parse(pf.sweep_classical));
    bool decreasing = rows.size() == 3;
    for (std::size_t k = 1; k < rows.size(); ++k) decreasing = decreasing && rows[k].distance < rows[k - 1].distance;
    std::string ds;
    for (const auto& r : rows) ds += fmt(" %.3f:%.4e", r.order, r.distance);
    o.check(decreasing, "distance to classical solution strictly decreasing:" + ds);
    bool converged = true;
    for (const auto& r : rows) converged = converged && r.converged;
    o.check(converged, "every solve in the sweep converged");
    return o;
}

// 8. Certify suite
Outcome certify_suite() {
    Outcome o;
    const Box3 box{{0, 1}, {-1, 1}, {-1, 1}};
    const bool c1 = check_convexity(parse("v^2"), box, 9).convex;
    const auto r2 = check_convexity(parse("-(v^2)"), box, 9);
    const bool c3 = check_convexity(parse("u^2 + v^2 + u*v"), box, 9).convex;
    o.check(c1, "v^2 convex");
    o.check(!r2.convex && r2.counterexample.has_value(), "-(v^2) not convex, counterexample reported");
    o.check(c3, "u^2 + v^2 + u*v convex");

    std::mt19937_64 rng(99);
    std::uniform_real_distribution<double> U(-1.0, 1.0);
    double worst = 0.0;
    for (const char* src : {"v^2", "u^2 + v^2 + u*v", "v^2/2"}) {
        const Expr L = parse(src);
        for (int k = 0; k < 10000; ++k) worst = std::min(worst, excess(L, 0.5 * (U(rng) + 1.0), U(rng), U(rng), U(rng)));
    }
    o.check(worst >= -1e-9, fmt("excess on 10^4 samples per v-convex fixture: min %.3e (>= -1e-9)", worst));

    const Grid g(0, 1, 1024);
    const Expr L = parse("v^2/2");
    const auto f1 = verify_field_minimizer(L, ExactField::parse("1", "y - x/2", {{0, 1}, {0, 1}}),
                                           SampledFn::sample(g, [](double x) { return std::sqrt(x) / kG15; }),
                                           FracOrder(0.5));
    o.check(f1.field_trajectory && std::abs(f1.J - 0.5) <= 1e-2 && std::abs(f1.field_value - 0.5) <= 1e-2 &&
                f1.gap <= 1e-2,
            fmt("exact field c=1: J = %.6f, S(b)-S(a) = %.6f, gap %.3e (1/2 within 1e-2)", f1.J, f1.field_value, f1.gap));
    const auto f2 = verify_field_minimizer(L, ExactField::parse("2", "2*y - 2*x", {{0, 1}, {0, 2}}),
                                           SampledFn::sample(g, [](double x) { return 2.0 * std::sqrt(x) / kG15; }),
                                           FracOrder(0.5));
    o.check(f2.field_trajectory && std::abs(f2.J - 2.0) <= 4e-2 && std::abs(f2.field_value - 2.0) <= 4e-2 &&
                f2.gap <= 4e-2,
            fmt("exact field c=2: J = %.6f, S(b)-S(a) = %.6f, gap %.3e (2 within 4e-2)", f2.J, f2.field_value, f2.gap));
    return o;
}

// 9. Expression layer
Outcome expression_layer() {
    Outcome o;
    testing::ExprGenerator gen(1618);
    int round_trips = 0;
    for (int i = 0; i < 1000; ++i) {
        const Expr e = gen.any(5);
        const std::string s = to_string(e);
        if (parse(s) == e && to_string(parse(s)) == s) ++round_trips;
    }
    o.check(round_trips == 1000, fmt("%d / 1000 generated expressions round-trip", round_trips));
    double worst = 0.0;
    for (int i = 0; i < 1000; ++i) {
        const Expr e = gen.smooth(4);
        for (const std::string var : {"x", "u", "v"}) {
            const VarBinding at{{"x", gen.uniform(-1, 1)}, {"u", gen.uniform(-1, 1)}, {"v", gen.uniform(-1, 1)}};
            const double sym = evaluate(differentiate(e, var), at);
            const double fd = testing::central_difference(e, at, var, 1e-3);
            worst = std::max(worst, std::abs(sym - fd) / std::max(1.0, std::abs(sym)));
        }
    }
    o.check(worst <= 1e-6, fmt("symbolic vs finite-difference derivatives, 3000 checks: max rel. deviation %.3e (<= 1e-6)", worst));
    return o;
}

// 10. CLI determinism and schema violations
Outcome cli_behaviour() {
    Outcome o;
    const fs::path root = fs::temp_directory_path() / "fracvar_acceptance";
    fs::remove_all(root);
    auto slurp = [](const fs::path& p) {
        std::ifstream is(p, std::ios::binary);
        return std::string(std::istreambuf_iterator<char>(is), std::istreambuf_iterator<char>());
    };
    std::vector<fs::path> fixtures;
    for (const auto& entry : fs::directory_iterator(kProblems)) {
        if (entry.path().extension() == ".json") fixtures.push_back(entry.path());
    }
    std::sort(fixtures.begin(), fixtures.end());
    int identical = 0;
    std::ostringstream log;
    cli::RunOptions quiet;
    quiet.quiet = true;
    for (const auto& f : fixtures) {
        const fs::path a = root / "a" / f.stem(), b = root / "b" / f.stem();
        cli::run(f, a, quiet, log);
        cli::run(f, b, quiet, log);
        const std::string sa = slurp(a / "summary.json");
        if (!sa.empty() && sa == slurp(b / "summary.json")) ++identical;
    }
    o.check(identical == static_cast<int>(fixtures.size()),
            fmt("%d / %zu fixtures give byte-identical summary.json across two runs", identical, fixtures.size()));

    std::vector<std::pair<std::string, std::string>> violations = {
        {"alpha outside (0,1)", R"({"task":"functional","interval":{"a":0,"b":1},"orders":{"alpha":1.5,"beta":0.5},"lagrangian":"v^2","grid":{"n_cells":8}})"},
        {"unknown top-level key", R"({"task":"functional","interval":{"a":0,"b":1},"orders":{"alpha":0.5,"beta":0.5},"lagrangian":"v^2","grid":{"n_cells":8},"colour":1})"},
        {"unknown nested key", R"({"task":"functional","interval":{"a":0,"b":1,"c":2},"orders":{"alpha":0.5,"beta":0.5},"lagrangian":"v^2","grid":{"n_cells":8}})"},
        {"unknown task", R"({"task":"plot","interval":{"a":0,"b":1},"orders":{"alpha":0.5,"beta":0.5},"lagrangian":"v^2","grid":{"n_cells":8}})"},
        {"missing lagrangian", R"({"task":"functional","interval":{"a":0,"b":1},"orders":{"alpha":0.5,"beta":0.5},"grid":{"n_cells":8}})"},
        {"bad expression", R"({"task":"functional","interval":{"a":0,"b":1},"orders":{"alpha":0.5,"beta":0.5},"lagrangian":"v^","grid":{"n_cells":8}})"},
        {"undeclared variable", R"({"task":"functional","interval":{"a":0,"b":1},"orders":{"alpha":0.5,"beta":0.5},"lagrangian":"w","grid":{"n_cells":8}})"},
        {"wrong type", R"({"task":"functional","interval":{"a":0,"b":1},"orders":{"alpha":"half","beta":0.5},"lagrangian":"v^2","grid":{"n_cells":8}})"},
        {"empty sweep", R"({"task":"limit-sweep","interval":{"a":0,"b":1},"orders":{"alpha":0.9,"beta":0.9},"lagrangian":"v^2","grid":{"n_cells":8},"sweep":{"orders":[],"classical":"x"}})"},
        {"malformed JSON", R"({"task": "functional",)"},
    };
    fs::create_directories(root / "violations");
    int exit2 = 0;
    for (std::size_t k = 0; k < violations.size(); ++k) {
        const fs::path p = root / "violations" / ("v" + std::to_string(k) + ".json");
        std::ofstream(p) << violations[k].second;
        const int rc = cli::run(p, root / "violations" / ("out" + std::to_string(k)), quiet, log);
        if (rc == 2) {
            ++exit2;
        } else {
            o.details.push_back(fmt("FAIL %s exited %d", violations[k].first.c_str(), rc));
        }
    }
    o.check(exit2 == static_cast<int>(violations.size()),
            fmt("%d / %zu schema violations exit 2", exit2, violations.size()));
    return o;
}

}  // namespace

int main() {
    const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
        {"operator oracles", operator_oracles},
        {"convergence orders", convergence_orders},
        {"discrete integration by parts", integration_by_parts},
        {"gradient identity", gradient_identity},
        {"driver solve", driver_solve},
        {"isoperimetric fixture", isoperimetric},
        {"classical limit sweep", classical_limit},
        {"certify suite", certify_suite},
        {"expression layer", expression_layer},
        {"CLI determinism and schema violations", cli_behaviour},
    };
    int failed = 0;
    for (std::size_t k = 0; k < criteria.size(); ++k) {
        const auto t0 = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = criteria[k].second();
        } catch (const std::exception& e) {
            o.check(false, std::string("exception: ") + e.what());
        }
        std::printf("%s [%zu] %s (%.2f s)\n", o.pass ? "PASS" : "FAIL", k + 1, criteria[k].first.c_str(),
                    seconds_since(t0));
        for (const auto& d : o.details) std::printf("       %s\n", d.c_str());
        failed += o.pass ? 0 : 1;
    }
    std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
    return failed;
}
