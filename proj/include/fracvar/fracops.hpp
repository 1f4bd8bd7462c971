#pragma once

/**
 * @file fracops.hpp
 * @brief Discrete Riemann-Liouville fractional integrals and derivatives.
 *
 * All operators act on samples over a uniform Grid and are triangular
 * Toeplitz matrices, possibly with a modified first column:
 *
 *   left RLFI   product trapezoid: f is interpolated piecewise linearly and
 *               the kernel (x - t)^(alpha - 1) / Gamma(alpha) is integrated
 *               exactly on every cell. Second order for C^2 integrands.
 *   left RLFD   Gruenwald-Letnikov: h^-beta * sum_k w_k f(x_{i-k}),
 *               w_0 = 1, w_k = w_{k-1} (1 - (beta + 1) / k). First order.
 *
 * Right operators come in two realizations:
 *
 *   Adjoint     R = W^-1 L^T W with W = diag(trapezoid weights). The discrete
 *               integration-by-parts identity <g, L f>_w = <f, R g>_w holds to
 *               rounding. These are the operators used in Euler-Lagrange
 *               residuals.
 *   Mirrored    reverse the samples, apply the left operator, reverse back.
 *               Kept to cross-check the adjoint realization.
 *
 * Only orders in (0, 1) are supported. Sampled functions are assumed
 * bounded; the Lebesgue-space hypotheses of the continuous integration by
 * parts rule cannot be checked on samples.
 */

#include "fracvar/gamma.hpp"
#include "fracvar/grid.hpp"

#include <algorithm>
#include <cmath>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace fracvar {

/// Fractional order restricted to the open interval (0, 1).
class FracOrder {
public:
    explicit FracOrder(double value) : value_(value) {
        if (!(value > 0.0 && value < 1.0)) {
            throw std::domain_error("fractional order must lie in the open interval (0,1), got " +
                                    std::to_string(value));
        }
    }
    double value() const { return value_; }
    /// The order 1 - value, used for the integral channel.
    FracOrder complement() const { return FracOrder(1.0 - value_); }

    friend bool operator==(const FracOrder&, const FracOrder&) = default;

private:
    double value_;
};

enum class OperatorKind { LeftRLFI, RightRLFI, LeftRLFD, RightRLFD };
enum class Realization { Direct, Adjoint, Mirrored };

inline std::string_view to_string(OperatorKind k) {
    switch (k) {
        case OperatorKind::LeftRLFI: return "left-rlfi";
        case OperatorKind::RightRLFI: return "right-rlfi";
        case OperatorKind::LeftRLFD: return "left-rlfd";
        case OperatorKind::RightRLFD: return "right-rlfd";
    }
    return "?";
}

inline bool is_left(OperatorKind k) { return k == OperatorKind::LeftRLFI || k == OperatorKind::LeftRLFD; }

class FracOperator {
public:
    OperatorKind kind() const { return kind_; }
    FracOrder order() const { return order_; }
    const Grid& grid() const { return grid_; }
    Realization realization() const { return realization_; }

    /// Toeplitz generator of the underlying left matrix: L(i, j) = generator[i - j].
    std::span<const double> generator() const { return generator_; }
    /// Replacement for column 0 of the underlying left matrix; empty when the
    /// matrix is pure Toeplitz.
    std::span<const double> first_column() const { return first_column_; }

    /// Matrix entry (i, j) of this operator.
    double entry(std::size_t i, std::size_t j) const {
        const std::size_t n = grid_.n_cells();
        switch (realization_) {
            case Realization::Direct: return base(i, j);
            case Realization::Mirrored: return base(n - i, n - j);
            case Realization::Adjoint: return base(j, i) * grid_.weight(j) / grid_.weight(i);
        }
        return 0.0;
    }

    void apply(std::span<const double> f, std::span<double> out) const {
        grid_.check_size(f.size());
        grid_.check_size(out.size());
        const std::size_t m = f.size();
        switch (realization_) {
            case Realization::Direct: apply_base(f, out); break;
            case Realization::Mirrored: {
                std::vector<double> rf(f.rbegin(), f.rend());
                std::vector<double> tmp(m);
                apply_base(rf, tmp);
                std::reverse_copy(tmp.begin(), tmp.end(), out.begin());
                break;
            }
            case Realization::Adjoint: {
                std::vector<double> wf(m);
                for (std::size_t j = 0; j < m; ++j) wf[j] = grid_.weight(j) * f[j];
                apply_base_transpose(wf, out);
                for (std::size_t i = 0; i < m; ++i) out[i] /= grid_.weight(i);
                break;
            }
        }
    }

    std::vector<double> apply(std::span<const double> f) const {
        std::vector<double> out(f.size());
        apply(f, out);
        return out;
    }

    /// Builders. Defined below as free functions; they need the private constructor.
    friend FracOperator build_left_rlfi(const Grid&, FracOrder);
    friend FracOperator build_left_rlfd(const Grid&, FracOrder);
    friend FracOperator build_right_adjoint(const FracOperator&);
    friend FracOperator build_right_rlfi(const Grid&, FracOrder);
    friend FracOperator build_right_rlfd(const Grid&, FracOrder);

private:
    FracOperator(OperatorKind kind, FracOrder order, Grid grid, Realization r, std::vector<double> gen,
                 std::vector<double> first_col)
        : kind_(kind),
          order_(order),
          grid_(grid),
          realization_(r),
          generator_(std::move(gen)),
          first_column_(std::move(first_col)) {}

    double base(std::size_t i, std::size_t j) const {
        if (j > i) return 0.0;
        if (j == 0 && !first_column_.empty()) return first_column_[i];
        return generator_[i - j];
    }

    void apply_base(std::span<const double> f, std::span<double> out) const {
        const std::size_t m = f.size();
        const std::size_t j0 = first_column_.empty() ? 0 : 1;
        for (std::size_t i = 0; i < m; ++i) {
            double s = first_column_.empty() ? 0.0 : first_column_[i] * f[0];
            for (std::size_t j = j0; j <= i; ++j) s += generator_[i - j] * f[j];
            out[i] = s;
        }
    }

    void apply_base_transpose(std::span<const double> g, std::span<double> out) const {
        const std::size_t m = g.size();
        for (std::size_t i = 0; i < m; ++i) {
            double s = 0.0;
            if (i == 0 && !first_column_.empty()) {
                for (std::size_t j = 0; j < m; ++j) s += first_column_[j] * g[j];
            } else {
                for (std::size_t j = i; j < m; ++j) s += generator_[j - i] * g[j];
            }
            out[i] = s;
        }
    }

    OperatorKind kind_;
    FracOrder order_;
    Grid grid_;
    Realization realization_;
    std::vector<double> generator_;
    std::vector<double> first_column_;
};

/// Product-trapezoid left Riemann-Liouville fractional integral.
inline FracOperator build_left_rlfi(const Grid& grid, FracOrder order) {
    const double a = order.value();
    const std::size_t m = grid.size();
    const double scale = std::pow(grid.h(), a) / gamma_function(a + 2.0);
    auto p = [a](double k) { return std::pow(k, a + 1.0); };

    std::vector<double> gen(m), col(m);
    gen[0] = scale;
    for (std::size_t k = 1; k < m; ++k) {
        const double kk = static_cast<double>(k);
        gen[k] = scale * (p(kk + 1.0) - 2.0 * p(kk) + p(kk - 1.0));
    }
    // Row 0 integrates over an empty interval.
    col[0] = 0.0;
    for (std::size_t i = 1; i < m; ++i) {
        const double ii = static_cast<double>(i);
        col[i] = scale * (p(ii - 1.0) - (ii - 1.0 - a) * std::pow(ii, a));
    }
    return {OperatorKind::LeftRLFI, order, grid, Realization::Direct, std::move(gen), std::move(col)};
}

/// Gruenwald-Letnikov left Riemann-Liouville fractional derivative.
///
/// Reproduces the Riemann-Liouville (not Caputo) derivative, including the
/// (x - a)^-beta growth when f(a) != 0. Row 0 is h^-beta f(a) and is not a
/// meaningful approximation; trust rows i >= n_cells / 16.
inline FracOperator build_left_rlfd(const Grid& grid, FracOrder order) {
    const double b = order.value();
    const std::size_t m = grid.size();
    const double scale = std::pow(grid.h(), -b);
    std::vector<double> gen(m);
    double w = 1.0;
    gen[0] = scale;
    for (std::size_t k = 1; k < m; ++k) {
        w *= 1.0 - (b + 1.0) / static_cast<double>(k);
        gen[k] = scale * w;
    }
    return {OperatorKind::LeftRLFD, order, grid, Realization::Direct, std::move(gen), {}};
}

/// Right operator R = W^-1 L^T W paired with a left operator L.
inline FracOperator build_right_adjoint(const FracOperator& op) {
    if (!is_left(op.kind()) || op.realization() != Realization::Direct) {
        throw std::invalid_argument("build_right_adjoint: expected a direct left operator, got " +
                                    std::string(to_string(op.kind())));
    }
    const auto kind = op.kind() == OperatorKind::LeftRLFI ? OperatorKind::RightRLFI : OperatorKind::RightRLFD;
    return {kind, op.order(), op.grid(), Realization::Adjoint, op.generator_, op.first_column_};
}

/// Right RLFI by reflection of the left product-trapezoid rule.
inline FracOperator build_right_rlfi(const Grid& grid, FracOrder order) {
    FracOperator left = build_left_rlfi(grid, order);
    return {OperatorKind::RightRLFI, order, grid, Realization::Mirrored, std::move(left.generator_),
            std::move(left.first_column_)};
}

/// Right RLFD by reflection of the left Gruenwald-Letnikov rule.
inline FracOperator build_right_rlfd(const Grid& grid, FracOrder order) {
    FracOperator left = build_left_rlfd(grid, order);
    return {OperatorKind::RightRLFD, order, grid, Realization::Mirrored, std::move(left.generator_),
            std::move(left.first_column_)};
}

inline FracOperator build_operator(OperatorKind kind, const Grid& grid, FracOrder order) {
    switch (kind) {
        case OperatorKind::LeftRLFI: return build_left_rlfi(grid, order);
        case OperatorKind::LeftRLFD: return build_left_rlfd(grid, order);
        case OperatorKind::RightRLFI: return build_right_adjoint(build_left_rlfi(grid, order));
        case OperatorKind::RightRLFD: return build_right_adjoint(build_left_rlfd(grid, order));
    }
    throw std::invalid_argument("build_operator: unknown kind");
}

}  // namespace fracvar
