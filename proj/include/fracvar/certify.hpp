#pragma once

/**
 * @file certify.hpp
 * @brief Sufficiency checks for candidate minimizers.
 *
 * check_convexity    sampled gradient inequality
 *                      L(x,u+du,v+dv) - L(x,u,v) >= L_u du + L_v dv
 *                    plus a sampled 2x2 Hessian PSD test in (u,v). Both are
 *                    sampling certificates over a box, not proofs.
 * excess             Weierstrass excess E = L(x,u,w) - L(x,u,z) - L_v(x,u,z)(w - z).
 * check_field        the two exact-field identities for (Phi, S):
 *                      dS/dx = L(x,y,Phi) - L_v(x,y,Phi) Phi
 *                      dS/dy = L_v(x,y,Phi)
 * verify_field_minimizer
 *                    checks that y0 solves D^alpha y = Phi(x, I^{1-alpha} y)
 *                    and compares J(y0) with S(b, .) - S(a, .).
 *
 * Lagrangians use variables x, u, v; fields use x, y.
 */

#include "fracvar/expr.hpp"
#include "fracvar/fracops.hpp"
#include "fracvar/grid.hpp"
#include "fracvar/varproblem.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace fracvar {

struct Interval {
    double lo = 0.0;
    double hi = 1.0;
    double at(int k, int samples) const {
        return samples == 1 ? lo : lo + (hi - lo) * static_cast<double>(k) / static_cast<double>(samples - 1);
    }
    bool contains(double t) const { return t >= lo && t <= hi; }
};

/// Region [x] x [u] x [v] sampled by check_convexity.
struct Box3 {
    Interval x, u, v;
};

/// Region [x] x [y] on which a field is checked.
struct Box2 {
    Interval x, y;
};

inline constexpr double kConvexityTol = 1e-9;
inline constexpr double kFieldIdentityTol = 1e-8;

namespace detail {

/// L and its first and second (u,v) partials compiled over slots {x, u, v}.
struct LagrangianPartials {
    explicit LagrangianPartials(const Expr& L) {
        const std::array<std::string, 3> slots{"x", "u", "v"};
        for (const auto& v : free_variables(L)) {
            if (v != "x" && v != "u" && v != "v") {
                throw std::invalid_argument("lagrangian variable '" + v + "' is not one of x, u, v");
            }
        }
        const Expr Lu = differentiate(L, "u");
        const Expr Lv = differentiate(L, "v");
        f = CompiledExpr(L, slots);
        fu = CompiledExpr(Lu, slots);
        fv = CompiledExpr(Lv, slots);
        fuu = CompiledExpr(differentiate(Lu, "u"), slots);
        fvv = CompiledExpr(differentiate(Lv, "v"), slots);
        fuv = CompiledExpr(differentiate(Lu, "v"), slots);
    }
    CompiledExpr f, fu, fv, fuu, fvv, fuv;
};

inline std::string point_text(std::initializer_list<double> xs) {
    std::string s = "(";
    for (double v : xs) s += (s.size() > 1 ? "," : "") + format_number(v);
    return s + ")";
}

}  // namespace detail

/// L(x,u+du,v+dv) - L(x,u,v) - L_u du - L_v dv. Negative means a violation
/// of the convexity inequality.
inline double gradient_inequality_gap(const Expr& L, double x, double u, double v, double du, double dv) {
    const detail::LagrangianPartials P(L);
    const std::array<double, 3> base{x, u, v};
    const std::array<double, 3> moved{x, u + du, v + dv};
    return P.f(moved) - P.f(base) - P.fu(base) * du - P.fv(base) * dv;
}

struct ConvexityCounterexample {
    double x = 0.0, u = 0.0, v = 0.0;
    double du = 0.0, dv = 0.0;
    /// Gradient-inequality gap (negative) or, for Hessian-only failures, the
    /// most negative Hessian test value.
    double violation = 0.0;
    std::string source;  // "gradient-inequality" or "hessian"
};

struct ConvexityReport {
    bool convex = false;
    bool gradient_inequality_holds = false;
    bool hessian_psd = false;
    std::optional<ConvexityCounterexample> counterexample;
    Box3 box;
    int samples_per_axis = 0;
    std::size_t pairs_checked = 0;
    std::vector<std::string> inconclusive;
};

inline ConvexityReport check_convexity(const Expr& L, const Box3& box, int samples_per_axis) {
    if (samples_per_axis < 3) throw std::invalid_argument("check_convexity: samples_per_axis must be at least 3");
    for (const Interval* iv : {&box.x, &box.u, &box.v}) {
        if (!std::isfinite(iv->lo) || !std::isfinite(iv->hi) || iv->hi < iv->lo) {
            throw std::invalid_argument("check_convexity: box bounds must be finite with lo <= hi");
        }
    }
    const detail::LagrangianPartials P(L);
    const int s = samples_per_axis;
    ConvexityReport rep;
    rep.box = box;
    rep.samples_per_axis = s;

    ConvexityCounterexample worst_grad;
    worst_grad.violation = 0.0;
    bool grad_fail = false;
    ConvexityCounterexample worst_hess;
    worst_hess.violation = 0.0;
    bool hess_fail = false;

    // Values on the (u, v) lattice for each x, reused as both base and target.
    std::vector<double> val(s * s), gu(s * s), gv(s * s);
    std::vector<bool> ok(s * s);
    for (int ix = 0; ix < s; ++ix) {
        const double x = box.x.at(ix, s);
        for (int iu = 0; iu < s; ++iu) {
            for (int iv = 0; iv < s; ++iv) {
                const int n = iu * s + iv;
                const std::array<double, 3> pt{x, box.u.at(iu, s), box.v.at(iv, s)};
                try {
                    val[n] = P.f(pt);
                    gu[n] = P.fu(pt);
                    gv[n] = P.fv(pt);
                    ok[n] = std::isfinite(val[n]) && std::isfinite(gu[n]) && std::isfinite(gv[n]);
                    const double huu = P.fuu(pt), hvv = P.fvv(pt), huv = P.fuv(pt);
                    const double det = huu * hvv - huv * huv;
                    const double m = std::min({huu, hvv, det});
                    if (m < -kConvexityTol && m < worst_hess.violation) {
                        hess_fail = true;
                        // Direction of most negative curvature.
                        const double tr = huu + hvv;
                        const double lam = 0.5 * tr - std::sqrt(std::max(0.0, 0.25 * tr * tr - det));
                        double eu = huv, ev = lam - huu;
                        if (std::abs(eu) + std::abs(ev) < 1e-300) {
                            eu = huu <= hvv ? 1.0 : 0.0;
                            ev = huu <= hvv ? 0.0 : 1.0;
                        }
                        const double len = std::hypot(eu, ev);
                        worst_hess = {pt[0], pt[1], pt[2], eu / len, ev / len, m, "hessian"};
                    }
                } catch (const EvalError&) {
                    ok[n] = false;
                }
                if (!ok[n]) rep.inconclusive.push_back("inconclusive at point " + detail::point_text({pt[0], pt[1], pt[2]}));
            }
        }
        for (int b = 0; b < s * s; ++b) {
            if (!ok[b]) continue;
            const double ub = box.u.at(b / s, s), vb = box.v.at(b % s, s);
            for (int t = 0; t < s * s; ++t) {
                if (t == b || !ok[t]) continue;
                const double du = box.u.at(t / s, s) - ub;
                const double dv = box.v.at(t % s, s) - vb;
                const double gap = val[t] - val[b] - gu[b] * du - gv[b] * dv;
                ++rep.pairs_checked;
                if (gap < -kConvexityTol && gap < worst_grad.violation) {
                    grad_fail = true;
                    worst_grad = {x, ub, vb, du, dv, gap, "gradient-inequality"};
                }
            }
        }
    }

    rep.gradient_inequality_holds = !grad_fail;
    rep.hessian_psd = !hess_fail;
    rep.convex = !grad_fail && !hess_fail && rep.pairs_checked > 0;
    if (grad_fail) {
        rep.counterexample = worst_grad;
    } else if (hess_fail) {
        // Look for an increment along the negative-curvature direction that
        // violates the gradient inequality inside the box.
        rep.counterexample = worst_hess;
        const double span = std::max(box.u.hi - box.u.lo, box.v.hi - box.v.lo);
        for (double step = span; step > span * 1e-6; step *= 0.5) {
            for (double sign : {1.0, -1.0}) {
                const double du = sign * step * worst_hess.du, dv = sign * step * worst_hess.dv;
                if (!box.u.contains(worst_hess.u + du) || !box.v.contains(worst_hess.v + dv)) continue;
                try {
                    const double gap = gradient_inequality_gap(L, worst_hess.x, worst_hess.u, worst_hess.v, du, dv);
                    if (gap < -kConvexityTol) {
                        rep.counterexample =
                            ConvexityCounterexample{worst_hess.x, worst_hess.u, worst_hess.v, du, dv, gap,
                                                    "gradient-inequality"};
                        return rep;
                    }
                } catch (const EvalError&) {
                }
            }
        }
    }
    return rep;
}

inline double excess(const Expr& L, double x, double u, double z, double w) {
    const detail::LagrangianPartials P(L);
    const std::array<double, 3> at_z{x, u, z};
    const std::array<double, 3> at_w{x, u, w};
    return P.f(at_w) - P.f(at_z) - P.fv(at_z) * (w - z);
}

struct ExactField {
    Expr phi;  // over (x, y)
    Expr s;    // over (x, y)
    Box2 domain;

    static ExactField parse(std::string_view phi, std::string_view s, Box2 domain) {
        ExactField f{fracvar::parse(phi), fracvar::parse(s), domain};
        for (const Expr* e : {&f.phi, &f.s}) {
            for (const auto& v : free_variables(*e)) {
                if (v != "x" && v != "y") throw std::invalid_argument("field variable '" + v + "' is not one of x, y");
            }
        }
        return f;
    }
};

struct FieldCheckReport {
    bool pass = false;
    /// max |dS/dx - (L - L_v Phi)| over the samples
    double max_residual_x = 0.0;
    /// max |dS/dy - L_v|
    double max_residual_y = 0.0;
    std::size_t points_checked = 0;
    std::vector<std::string> inconclusive;
};

namespace detail {

struct FieldFunctions {
    FieldFunctions(const Expr& L, const ExactField& field) : lag(L) {
        const std::array<std::string, 2> xy{"x", "y"};
        phi = CompiledExpr(field.phi, xy);
        s = CompiledExpr(field.s, xy);
        sx = CompiledExpr(differentiate(field.s, "x"), xy);
        sy = CompiledExpr(differentiate(field.s, "y"), xy);
    }
    LagrangianPartials lag;
    CompiledExpr phi, s, sx, sy;

    /// Residuals of the two identities at (x, y).
    std::array<double, 2> residuals(double x, double y) const {
        const std::array<double, 2> xy{x, y};
        const double p = phi(xy);
        const std::array<double, 3> pt{x, y, p};
        const double Lv = lag.fv(pt);
        return {sx(xy) - (lag.f(pt) - Lv * p), sy(xy) - Lv};
    }
};

}  // namespace detail

inline FieldCheckReport check_field(const Expr& L, const ExactField& field, int samples_per_axis) {
    if (samples_per_axis < 2) throw std::invalid_argument("check_field: samples_per_axis must be at least 2");
    const detail::FieldFunctions F(L, field);
    FieldCheckReport rep;
    const int s = samples_per_axis;
    for (int ix = 0; ix < s; ++ix) {
        for (int iy = 0; iy < s; ++iy) {
            const double x = field.domain.x.at(ix, s), y = field.domain.y.at(iy, s);
            try {
                const auto r = F.residuals(x, y);
                if (!std::isfinite(r[0]) || !std::isfinite(r[1])) throw EvalError("non-finite value", "field identities");
                rep.max_residual_x = std::max(rep.max_residual_x, std::abs(r[0]));
                rep.max_residual_y = std::max(rep.max_residual_y, std::abs(r[1]));
                ++rep.points_checked;
            } catch (const EvalError& e) {
                rep.inconclusive.push_back("inconclusive at point " + detail::point_text({x, y}) + ": " + e.what());
            }
        }
    }
    rep.pass = rep.points_checked > 0 && rep.max_residual_x <= kFieldIdentityTol &&
               rep.max_residual_y <= kFieldIdentityTol;
    return rep;
}

struct FieldMinimizerReport {
    bool field_trajectory = false;
    double field_residual_norm = 0.0;  // interior weighted norm of D y0 - Phi(x, I y0)
    double field_tol = 0.0;
    double J = 0.0;
    double field_value = 0.0;  // S(b, I y0(b)) - S(a, I y0(a))
    double gap = 0.0;          // |J - field_value|
    double min_excess = 0.0;
    bool excess_nonnegative = false;
    std::vector<double> integral_channel;    // I^{1-alpha} y0
    std::vector<double> derivative_channel;  // D^alpha y0
    std::vector<double> field_residual;
    std::vector<double> excess_values;
    std::string verdict;
};

/// Field-equation tolerance: 10 h^min(alpha, 1-alpha).
inline double field_tolerance(const Grid& grid, FracOrder alpha) {
    return 10.0 * std::pow(grid.h(), std::min(alpha.value(), 1.0 - alpha.value()));
}

inline FieldMinimizerReport verify_field_minimizer(const Expr& L, const ExactField& field, const SampledFn& y0,
                                                   FracOrder alpha) {
    const Grid& grid = y0.grid;
    VarProblem p;
    p.a = grid.a();
    p.b = grid.b();
    p.alphas = {alpha};
    p.betas = {alpha};
    p.lagrangian = L;
    const DiscreteProblem dp(p, grid);
    const Samples ch = dp.channels({y0.values});
    const auto& I = ch[1];
    const auto& D = ch[2];
    const detail::FieldFunctions F(L, field);

    FieldMinimizerReport rep;
    rep.integral_channel = I;
    rep.derivative_channel = D;
    rep.field_tol = field_tolerance(grid, alpha);
    const std::size_t m = grid.size();
    rep.field_residual.resize(m);
    rep.excess_values.resize(m);
    rep.min_excess = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < m; ++i) {
        const double x = grid.node(i);
        const std::array<double, 2> xy{x, I[i]};
        double phi = 0.0;
        try {
            phi = F.phi(xy);
            const std::array<double, 3> at_phi{x, I[i], phi};
            const std::array<double, 3> at_d{x, I[i], D[i]};
            rep.excess_values[i] = F.lag.f(at_d) - F.lag.f(at_phi) - F.lag.fv(at_phi) * (D[i] - phi);
        } catch (const EvalError& e) {
            throw NodeEvalError(i, x, e.what());
        }
        rep.field_residual[i] = D[i] - phi;
        rep.min_excess = std::min(rep.min_excess, rep.excess_values[i]);
    }
    rep.excess_nonnegative = rep.min_excess >= -kConvexityTol;
    rep.field_residual_norm = grid.interior_norm(rep.field_residual);
    rep.J = dp.functional({y0.values});
    const std::array<double, 2> end_b{grid.b(), I.back()};
    const std::array<double, 2> end_a{grid.a(), I.front()};
    rep.field_value = F.s(end_b) - F.s(end_a);
    rep.gap = std::abs(rep.J - rep.field_value);
    rep.field_trajectory = rep.field_residual_norm <= rep.field_tol;
    if (!rep.field_trajectory) {
        rep.verdict = "not a field trajectory";
    } else if (!rep.excess_nonnegative) {
        rep.verdict = "field trajectory, but the excess function is negative; no minimality claim";
    } else {
        rep.verdict = "field trajectory: minimizer among curves with the same integral-channel endpoint values";
    }
    return rep;
}

}  // namespace fracvar
