#pragma once

// Direct minimization of the discretized functional.
//
// Descent runs in the weighted inner product of the grid: the search
// direction is minus the Euler-Lagrange residual, which is the Riesz
// representer of the gradient of J_h. Pinned endpoint nodes stay fixed.
// Step lengths come from Armijo backtracking, so the J history never increases.

#include "fracvar/varproblem.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace fracvar {

struct SolveConfig {
    int max_iters = 20000;
    double grad_tol = 1e-6;
    double step_init = 1.0;
    double armijo_c = 1e-4;
    double armijo_shrink = 0.5;
    double multiplier_tol = 1e-6;
    int max_outer = 50;
    /// Start each line search from the Barzilai-Borwein length instead of the
    /// previous step.
    bool bb_trial = true;
    double step_max = 1e6;

    void validate() const {
        if (max_iters < 0) throw std::invalid_argument("solver: max_iters must be non-negative");
        if (!(grad_tol > 0.0)) throw std::invalid_argument("solver: grad_tol must be positive");
        if (!(step_init > 0.0)) throw std::invalid_argument("solver: step_init must be positive");
        if (!(armijo_c > 0.0 && armijo_c < 1.0)) throw std::invalid_argument("solver: armijo_c must lie in (0,1)");
        if (!(armijo_shrink > 0.0 && armijo_shrink < 1.0)) {
            throw std::invalid_argument("solver: armijo_shrink must lie in (0,1)");
        }
        if (!(multiplier_tol > 0.0)) throw std::invalid_argument("solver: multiplier_tol must be positive");
        if (max_outer < 2) throw std::invalid_argument("solver: max_outer must be at least 2");
    }
};

struct IterRecord {
    double J;
    double grad_norm;
};

struct SolveReport {
    Samples y;
    double J = 0.0;
    /// Weighted norm of the residual over free (unpinned) nodes.
    double residual_norm = 0.0;
    std::optional<double> lambda;
    std::optional<double> constraint_gap;
    int iters = 0;
    int outer_iters = 0;
    bool converged = false;
    bool abnormal = false;
    std::vector<IterRecord> history;
    std::vector<std::string> warnings;
};

/// J or its gradient became non-finite at an accepted iterate.
class NumericalError : public std::runtime_error {
public:
    NumericalError(int iteration, const std::string& what)
        : std::runtime_error("iteration " + std::to_string(iteration) + ": " + what), iteration_(iteration) {}
    int iteration() const { return iteration_; }

private:
    int iteration_;
};

/// y0 = 0, adjusted to the pins by linear interpolation.
inline Samples default_initial_guess(const VarProblem& p, const Grid& grid) {
    Samples y(p.unknowns, std::vector<double>(grid.size(), 0.0));
    for (std::size_t k = 0; k < p.unknowns; ++k) {
        const EndpointPins pin = p.pins_for(k);
        const double l = pin.left.value_or(0.0);
        const double r = pin.right.value_or(0.0);
        for (std::size_t i = 0; i < grid.size(); ++i) {
            const double t = (grid.node(i) - grid.a()) / (grid.b() - grid.a());
            y[k][i] = (1.0 - t) * l + t * r;
        }
        y[k].front() = l;
        y[k].back() = r;
    }
    return y;
}

namespace detail {

struct FreeMask {
    std::vector<std::vector<bool>> pinned;

    FreeMask(const VarProblem& p, const Grid& grid) : pinned(p.unknowns, std::vector<bool>(grid.size(), false)) {
        for (std::size_t k = 0; k < p.unknowns; ++k) {
            const EndpointPins pin = p.pins_for(k);
            if (pin.left) pinned[k].front() = true;
            if (pin.right) pinned[k].back() = true;
        }
    }

    void project(Samples& r) const {
        for (std::size_t k = 0; k < r.size(); ++k)
            for (std::size_t i = 0; i < r[k].size(); ++i)
                if (pinned[k][i]) r[k][i] = 0.0;
    }
};

inline void check_pins(const VarProblem& p, const Samples& y) {
    for (std::size_t k = 0; k < p.unknowns; ++k) {
        const EndpointPins pin = p.pins_for(k);
        auto close = [](double a, double b) { return std::abs(a - b) <= 1e-12 * std::max(1.0, std::abs(b)); };
        if (pin.left && !close(y.at(k).front(), *pin.left)) {
            throw std::invalid_argument("initial guess violates the left pin of unknown " + std::to_string(k + 1));
        }
        if (pin.right && !close(y.at(k).back(), *pin.right)) {
            throw std::invalid_argument("initial guess violates the right pin of unknown " + std::to_string(k + 1));
        }
    }
}

inline bool all_finite(const Samples& s) {
    for (const auto& row : s)
        for (double v : row)
            if (!std::isfinite(v)) return false;
    return true;
}

inline SolveReport descend(const DiscreteProblem& dp, const FreeMask& mask, const SolveConfig& cfg, Samples y) {
    const Grid& grid = dp.grid();
    SolveReport rep;
    double t_prev = cfg.step_init;
    Samples y_prev, r_prev;
    int stalled = 0;
    int it = 0;
    for (;; ++it) {
        const Samples ch = dp.channels(y);
        const double J = grid.integrate(dp.integrand_values(ch));
        if (!std::isfinite(J)) throw NumericalError(it, "functional is not finite");
        Samples r = dp.residual_from_channels(ch).values;
        if (!all_finite(r)) throw NumericalError(it, "gradient is not finite");
        mask.project(r);
        const double gnorm = weighted_norm(grid, r);
        rep.history.push_back({J, gnorm});
        rep.J = J;
        rep.residual_norm = gnorm;
        if (gnorm <= cfg.grad_tol) {
            rep.converged = true;
            break;
        }
        if (it >= cfg.max_iters) break;

        const double slope = gnorm * gnorm;
        double t = std::min(cfg.step_init, t_prev / cfg.armijo_shrink);
        if (cfg.bb_trial && it > 0) {
            // Barzilai-Borwein trial length from the last step; Armijo still decides.
            double ss = 0.0, sy = 0.0;
            for (std::size_t k = 0; k < y.size(); ++k)
                for (std::size_t i = 0; i < y[k].size(); ++i) {
                    const double sk = y[k][i] - y_prev[k][i];
                    ss += grid.weight(i) * sk * sk;
                    sy += grid.weight(i) * sk * (r[k][i] - r_prev[k][i]);
                }
            if (sy > 0.0 && std::isfinite(ss / sy)) t = std::min(ss / sy, cfg.step_max);
        }
        Samples trial = y;
        bool accepted = false;
        for (int shrinks = 0; shrinks < 200; ++shrinks) {
            for (std::size_t k = 0; k < y.size(); ++k)
                for (std::size_t i = 0; i < y[k].size(); ++i) trial[k][i] = y[k][i] - t * r[k][i];
            double Jt = std::numeric_limits<double>::infinity();
            try {
                Jt = dp.functional(trial);
            } catch (const NodeEvalError&) {
                // Trial point left the integrand's domain; shrink.
            }
            if (std::isfinite(Jt) && Jt <= J - cfg.armijo_c * t * slope) {
                accepted = true;
                stalled = (J - Jt <= 8.0 * std::numeric_limits<double>::epsilon() * std::abs(J)) ? stalled + 1 : 0;
                break;
            }
            t *= cfg.armijo_shrink;
        }
        if (!accepted) {
            rep.warnings.push_back("line search failed at iteration " + std::to_string(it));
            break;
        }
        if (stalled >= 50) {
            rep.warnings.push_back("descent stalled at rounding level of J at iteration " + std::to_string(it) +
                                   "; grad_tol not reachable");
            break;
        }
        t_prev = t;
        y_prev = y;
        r_prev = std::move(r);
        y.swap(trial);
    }
    rep.iters = it;
    rep.y = std::move(y);
    return rep;
}

}  // namespace detail

/// Exact gradient of J_h with respect to the node values (w * residual).
inline Samples gradient(const VarProblem& p, const Samples& y, const Grid& grid) {
    return DiscreteProblem(p, grid).gradient(y);
}

inline SolveReport minimize(const VarProblem& p, const Grid& grid, const SolveConfig& cfg, Samples y0) {
    cfg.validate();
    if (p.constraint) throw std::invalid_argument("minimize: problem has a constraint; use solve_isoperimetric");
    detail::check_pins(p, y0);
    DiscreteProblem dp(p, grid);
    return detail::descend(dp, detail::FreeMask(p, grid), cfg, std::move(y0));
}

inline SolveReport minimize(const VarProblem& p, const Grid& grid, const SolveConfig& cfg = {}) {
    return minimize(p, grid, cfg, default_initial_guess(p, grid));
}

/// Minimize J subject to I(y) = ell in the normal case (lambda_0 = 1).
///
/// Secant iteration on phi(lambda) = I(argmin (J + lambda I)) - ell. The
/// abnormal case (y an extremal of I) is detected and reported, not solved.
inline SolveReport solve_isoperimetric(const VarProblem& p, const Grid& grid, const SolveConfig& cfg, Samples y0) {
    cfg.validate();
    if (!p.constraint) throw std::invalid_argument("solve_isoperimetric: problem has no constraint");
    detail::check_pins(p, y0);
    const double ell = p.constraint->ell;
    const detail::FreeMask mask(p, grid);
    const DiscreteProblem dj(p, grid);
    const DiscreteProblem dg(p, p.constraint->g, grid);

    auto constraint_gradient_norm = [&](const Samples& y) {
        Samples r = dg.residual(y).values;
        mask.project(r);
        return weighted_norm(grid, r);
    };

    SolveReport out;
    auto abnormal = [&](const Samples& y, const std::string& why) {
        out.abnormal = true;
        out.converged = false;
        out.warnings.push_back("abnormal case: " + why +
                               "; y may be an extremal of the constraint functional (lambda_0 = 0), not solved");
        if (out.y.empty()) {
            out.y = y;
            out.J = dj.functional(y);
            out.constraint_gap = dg.functional(y) - ell;
        }
    };

    if (constraint_gradient_norm(y0) <= 1e-10) {
        abnormal(y0, "constraint gradient vanishes at the initial guess");
        return out;
    }

    Samples warm = std::move(y0);
    int total_iters = 0;
    auto phi = [&](double lambda, SolveReport& inner) {
        const VarProblem aug = augmented_lagrangian(p, lambda);
        DiscreteProblem da(aug, grid);
        inner = detail::descend(da, mask, cfg, warm);
        total_iters += inner.iters;
        warm = inner.y;
        return dg.functional(inner.y) - ell;
    };

    auto finish = [&](double lambda, double gap, SolveReport& inner) {
        out.y = inner.y;
        out.J = dj.functional(inner.y);
        out.residual_norm = inner.residual_norm;
        out.lambda = lambda;
        out.constraint_gap = gap;
        out.history = std::move(inner.history);
        for (auto& w : inner.warnings) out.warnings.push_back(std::move(w));
        out.converged = inner.converged && std::abs(gap) <= cfg.multiplier_tol;
    };

    SolveReport inner;
    double lam_prev = 0.0;
    double phi_prev = phi(lam_prev, inner);
    out.outer_iters = 1;
    if (std::abs(phi_prev) <= cfg.multiplier_tol && inner.converged) {
        finish(lam_prev, phi_prev, inner);
        out.iters = total_iters;
        return out;
    }
    double lam = lam_prev - (phi_prev > 0.0 ? -1.0 : 1.0);
    double best = std::abs(phi_prev);
    int stalled = 0;
    for (;;) {
        const double ph = phi(lam, inner);
        ++out.outer_iters;
        if (constraint_gradient_norm(inner.y) <= 1e-10) {
            abnormal(inner.y, "constraint gradient vanishes at the inner minimizer");
            finish(lam, ph, inner);
            out.converged = false;
            break;
        }
        if (std::abs(ph) <= cfg.multiplier_tol && inner.converged) {
            finish(lam, ph, inner);
            break;
        }
        if (std::abs(ph) < best) {
            best = std::abs(ph);
            stalled = 0;
        } else if (++stalled >= 5) {
            finish(lam, ph, inner);
            abnormal(inner.y, "secant iteration stagnated");
            break;
        }
        if (ph == phi_prev || out.outer_iters >= cfg.max_outer) {
            finish(lam, ph, inner);
            if (ph == phi_prev) {
                abnormal(inner.y, "constraint value does not respond to the multiplier");
            } else {
                out.warnings.push_back("multiplier iteration hit max_outer");
            }
            break;
        }
        const double next = lam - ph * (lam - lam_prev) / (ph - phi_prev);
        lam_prev = lam;
        phi_prev = ph;
        lam = next;
    }
    out.iters = total_iters;
    return out;
}

inline SolveReport solve_isoperimetric(const VarProblem& p, const Grid& grid, const SolveConfig& cfg = {}) {
    return solve_isoperimetric(p, grid, cfg, default_initial_guess(p, grid));
}

}  // namespace fracvar
