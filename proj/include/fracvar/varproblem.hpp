#pragma once

/**
 * @file varproblem.hpp
 * @brief Fractional variational problems on a grid.
 *
 * The functional is
 *
 *   J(y) = int_a^b L(x, I^{1-alpha_1} y, ..., D^{beta_1} y, ...) dx
 *
 * with left operators in the Lagrangian. The Euler-Lagrange residual for
 * unknown k is
 *
 *   r_k = sum_i RI^{1-alpha_i}(dL/du_{i,k}) + sum_j RD^{beta_j}(dL/dv_{j,k})
 *
 * where RI, RD are the adjoint right operators. With this choice the exact
 * gradient of the discrete functional with respect to the node values is
 * w * r (w = trapezoid weights), node by node.
 *
 * Channel variables in the Lagrangian:
 *
 *   one integral order, one unknown        u
 *   several orders, one unknown            u1, u2, ...   (order index)
 *   one order, several unknowns            u1, u2, ...   (unknown index)
 *   several orders and unknowns            u<i>_<k>
 *
 * and likewise v for the derivative channels. x is always available.
 * The problem stores alpha; the integral channel uses order 1 - alpha.
 */

#include "fracvar/expr.hpp"
#include "fracvar/fracops.hpp"
#include "fracvar/grid.hpp"

#include <cmath>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

namespace fracvar {

/// Node values per unknown: samples[k][i] is y_k(x_i).
using Samples = std::vector<std::vector<double>>;

struct IsoConstraint {
    Expr g;
    double ell = 0.0;
};

struct EndpointPins {
    std::optional<double> left;
    std::optional<double> right;
};

/// Expression evaluation failed at a grid node.
class NodeEvalError : public std::runtime_error {
public:
    NodeEvalError(std::size_t node, double x, const std::string& what)
        : std::runtime_error("at node " + std::to_string(node) + " (x=" + detail::format_number(x) + "): " + what),
          node_(node) {}
    std::size_t node() const { return node_; }

private:
    std::size_t node_;
};

/// Variable names of the operator channels.
struct ChannelLayout {
    std::size_t n_int = 1;
    std::size_t n_der = 1;
    std::size_t n_y = 1;

    std::string u_name(std::size_t i, std::size_t k) const { return name('u', n_int, i, k); }
    std::string v_name(std::size_t j, std::size_t k) const { return name('v', n_der, j, k); }

    /// Slot order used by compiled expressions: x, u(i,k) for all i,k, v(j,k) for all j,k.
    std::vector<std::string> slots() const {
        std::vector<std::string> s{"x"};
        for (std::size_t i = 0; i < n_int; ++i)
            for (std::size_t k = 0; k < n_y; ++k) s.push_back(u_name(i, k));
        for (std::size_t j = 0; j < n_der; ++j)
            for (std::size_t k = 0; k < n_y; ++k) s.push_back(v_name(j, k));
        return s;
    }
    std::size_t u_slot(std::size_t i, std::size_t k) const { return 1 + i * n_y + k; }
    std::size_t v_slot(std::size_t j, std::size_t k) const { return 1 + n_int * n_y + j * n_y + k; }
    std::size_t slot_count() const { return 1 + (n_int + n_der) * n_y; }

private:
    std::string name(char c, std::size_t n_orders, std::size_t i, std::size_t k) const {
        std::string s(1, c);
        if (n_orders == 1 && n_y == 1) return s;
        if (n_orders == 1) return s + std::to_string(k + 1);
        if (n_y == 1) return s + std::to_string(i + 1);
        return s + std::to_string(i + 1) + "_" + std::to_string(k + 1);
    }
};

struct VarProblem {
    double a = 0.0;
    double b = 1.0;
    std::vector<FracOrder> alphas;
    std::vector<FracOrder> betas;
    std::size_t unknowns = 1;
    Expr lagrangian;
    std::optional<IsoConstraint> constraint;
    /// Empty, or one entry per unknown.
    std::vector<EndpointPins> pins;

    static VarProblem basic(double a, double b, double alpha, double beta, std::string_view lagrangian) {
        VarProblem p;
        p.a = a;
        p.b = b;
        p.alphas = {FracOrder(alpha)};
        p.betas = {FracOrder(beta)};
        p.lagrangian = parse(lagrangian);
        return p;
    }

    ChannelLayout layout() const { return {alphas.size(), betas.size(), unknowns}; }
    bool is_basic() const { return alphas.size() == 1 && betas.size() == 1 && unknowns == 1; }

    EndpointPins pins_for(std::size_t k) const { return pins.empty() ? EndpointPins{} : pins.at(k); }

    void validate() const {
        if (!(b > a)) throw std::invalid_argument("problem: interval needs a < b");
        if (alphas.empty() || betas.empty()) throw std::invalid_argument("problem: need at least one alpha and one beta");
        if (unknowns == 0) throw std::invalid_argument("problem: need at least one unknown");
        if (lagrangian.empty()) throw std::invalid_argument("problem: missing lagrangian");
        if (!pins.empty() && pins.size() != unknowns) {
            throw std::invalid_argument("problem: pins must be given for every unknown or none");
        }
        check_variables(lagrangian, "lagrangian");
        if (constraint) check_variables(constraint->g, "constraint");
    }

    void check_variables(const Expr& e, const std::string& what) const {
        const auto slots = layout().slots();
        const std::set<std::string> allowed(slots.begin(), slots.end());
        for (const auto& v : free_variables(e)) {
            if (!allowed.contains(v)) {
                std::string list;
                for (const auto& s : slots) list += (list.empty() ? "" : ", ") + s;
                throw std::invalid_argument(what + ": variable '" + v + "' does not match the declared orders and unknowns (expected a subset of " + list + ")");
            }
        }
    }
};

struct Residual {
    Grid grid;
    Samples values;
    double norm = 0.0;

    /// Weighted L2 norm over interior nodes of every unknown.
    double interior_norm() const {
        double s = 0.0;
        for (const auto& row : values) {
            const double n = grid.interior_norm(row);
            s += n * n;
        }
        return std::sqrt(s);
    }
};

inline double weighted_norm(const Grid& grid, const Samples& rows) {
    double s = 0.0;
    for (const auto& row : rows) s += grid.inner(row, row);
    return std::sqrt(s);
}

/// Operators, compiled Lagrangian and its partials for one problem on one grid.
/// Immutable after construction; evaluation is const and thread-safe.
class DiscreteProblem {
public:
    DiscreteProblem(const VarProblem& p, const Grid& grid) : DiscreteProblem(p, p.lagrangian, grid) {}

    /// Same channels as p, integrand replaced by `integrand` (used for constraints).
    DiscreteProblem(const VarProblem& p, const Expr& integrand, const Grid& grid)
        : grid_(grid), layout_(p.layout()), integrand_(integrand) {
        p.validate();
        p.check_variables(integrand, "integrand");
        if (std::abs(grid.a() - p.a) > 1e-12 * std::max(1.0, std::abs(p.a)) ||
            std::abs(grid.b() - p.b) > 1e-12 * std::max(1.0, std::abs(p.b))) {
            throw std::invalid_argument("problem interval does not match the grid");
        }
        for (const auto& al : p.alphas) {
            int_ops_.push_back(build_left_rlfi(grid, al.complement()));
            int_adj_.push_back(build_right_adjoint(int_ops_.back()));
        }
        for (const auto& be : p.betas) {
            der_ops_.push_back(build_left_rlfd(grid, be));
            der_adj_.push_back(build_right_adjoint(der_ops_.back()));
        }
        const auto slots = layout_.slots();
        compiled_ = CompiledExpr(integrand, slots);
        partials_.resize(layout_.slot_count());
        partial_zero_.assign(layout_.slot_count(), true);
        for (std::size_t s = 1; s < slots.size(); ++s) {
            Expr d = differentiate(integrand, slots[s]);
            partial_zero_[s] = d.kind() == NodeKind::Number && d.value() == 0.0;
            partials_[s] = CompiledExpr(d, slots);
        }
    }

    const Grid& grid() const { return grid_; }
    const ChannelLayout& layout() const { return layout_; }
    const Expr& integrand() const { return integrand_; }
    const FracOperator& integral_op(std::size_t i) const { return int_ops_.at(i); }
    const FracOperator& derivative_op(std::size_t j) const { return der_ops_.at(j); }

    /// Channel samples: row s follows layout().slots(); row 0 holds x.
    Samples channels(const Samples& y) const {
        check(y);
        Samples ch(layout_.slot_count());
        ch[0] = grid_.nodes();
        for (std::size_t i = 0; i < layout_.n_int; ++i)
            for (std::size_t k = 0; k < layout_.n_y; ++k) ch[layout_.u_slot(i, k)] = int_ops_[i].apply(y[k]);
        for (std::size_t j = 0; j < layout_.n_der; ++j)
            for (std::size_t k = 0; k < layout_.n_y; ++k) ch[layout_.v_slot(j, k)] = der_ops_[j].apply(y[k]);
        return ch;
    }

    /// Integrand value at every node.
    std::vector<double> integrand_values(const Samples& ch) const { return eval_rows(compiled_, ch); }

    double functional(const Samples& y) const { return grid_.integrate(integrand_values(channels(y))); }

    Residual residual(const Samples& y) const { return residual_from_channels(channels(y)); }

    Residual residual_from_channels(const Samples& ch) const {
        const std::size_t m = grid_.size();
        Samples r(layout_.n_y, std::vector<double>(m, 0.0));
        std::vector<double> tmp(m);
        auto accumulate = [&](std::size_t slot, const FracOperator& adj, std::vector<double>& row) {
            if (partial_zero_[slot]) return;
            const std::vector<double> d = eval_rows(partials_[slot], ch);
            adj.apply(d, tmp);
            for (std::size_t n = 0; n < m; ++n) row[n] += tmp[n];
        };
        for (std::size_t k = 0; k < layout_.n_y; ++k) {
            for (std::size_t i = 0; i < layout_.n_int; ++i) accumulate(layout_.u_slot(i, k), int_adj_[i], r[k]);
            for (std::size_t j = 0; j < layout_.n_der; ++j) accumulate(layout_.v_slot(j, k), der_adj_[j], r[k]);
        }
        const double norm = weighted_norm(grid_, r);
        return {grid_, std::move(r), norm};
    }

    /// Exact gradient of the discrete functional: w * residual.
    Samples gradient(const Samples& y) const {
        Residual r = residual(y);
        for (auto& row : r.values)
            for (std::size_t n = 0; n < row.size(); ++n) row[n] *= grid_.weight(n);
        return r.values;
    }

private:
    void check(const Samples& y) const {
        if (y.size() != layout_.n_y) {
            throw std::invalid_argument("expected " + std::to_string(layout_.n_y) + " unknowns, got " +
                                        std::to_string(y.size()));
        }
        for (const auto& row : y) grid_.check_size(row.size());
    }

    std::vector<double> eval_rows(const CompiledExpr& f, const Samples& ch) const {
        const std::size_t m = grid_.size();
        std::vector<double> out(m);
        std::vector<double> vars(ch.size());
        for (std::size_t n = 0; n < m; ++n) {
            for (std::size_t s = 0; s < ch.size(); ++s) vars[s] = ch[s][n];
            try {
                out[n] = f(vars);
            } catch (const EvalError& e) {
                throw NodeEvalError(n, grid_.node(n), e.what());
            }
        }
        return out;
    }

    Grid grid_;
    ChannelLayout layout_;
    Expr integrand_;
    std::vector<FracOperator> int_ops_, int_adj_, der_ops_, der_adj_;
    CompiledExpr compiled_;
    std::vector<CompiledExpr> partials_;
    std::vector<bool> partial_zero_;
};

inline double evaluate_functional(const VarProblem& p, const Samples& y, const Grid& grid) {
    return DiscreteProblem(p, grid).functional(y);
}

inline Residual el_residual_general(const VarProblem& p, const Samples& y, const Grid& grid) {
    return DiscreteProblem(p, grid).residual(y);
}

/// Residual of the basic problem (one alpha, one beta, one unknown).
inline Residual el_residual(const VarProblem& p, const Samples& y, const Grid& grid) {
    if (!p.is_basic()) {
        throw std::invalid_argument("el_residual: basic problem expected; use el_residual_general");
    }
    return el_residual_general(p, y, grid);
}

/// K = L + lambda * g with the constraint removed (normal case, lambda_0 = 1).
inline VarProblem augmented_lagrangian(const VarProblem& p, double lambda) {
    if (!p.constraint) throw std::invalid_argument("augmented_lagrangian: problem has no constraint");
    VarProblem q = p;
    q.lagrangian = fold::add(p.lagrangian, fold::mul(fold::num(lambda), p.constraint->g));
    q.constraint.reset();
    return q;
}

/// Quadrature of the constraint integrand g over the problem's channels.
inline double constraint_value(const VarProblem& p, const Samples& y, const Grid& grid) {
    if (!p.constraint) throw std::invalid_argument("constraint_value: problem has no constraint");
    return DiscreteProblem(p, p.constraint->g, grid).functional(y);
}

}  // namespace fracvar
