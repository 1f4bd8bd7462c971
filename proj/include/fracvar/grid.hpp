#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace fracvar {

/// Uniform partition of [a, b] with trapezoid quadrature weights.
///
/// Nodes and weights are computed on demand so a Grid is a cheap value.
/// x_0 == a and x_n == b hold exactly.
class Grid {
public:
    Grid(double a, double b, std::size_t n_cells) : a_(a), b_(b), n_(n_cells) {
        if (!std::isfinite(a) || !std::isfinite(b) || !(b > a)) {
            throw std::invalid_argument("grid: need finite a < b");
        }
        if (n_cells == 0) {
            throw std::invalid_argument("grid: n_cells must be positive");
        }
        h_ = (b - a) / static_cast<double>(n_cells);
    }

    double a() const { return a_; }
    double b() const { return b_; }
    double h() const { return h_; }
    std::size_t n_cells() const { return n_; }
    std::size_t size() const { return n_ + 1; }

    double node(std::size_t i) const { return i == n_ ? b_ : a_ + static_cast<double>(i) * h_; }
    double weight(std::size_t i) const { return (i == 0 || i == n_) ? 0.5 * h_ : h_; }

    std::vector<double> nodes() const {
        std::vector<double> x(size());
        for (std::size_t i = 0; i < x.size(); ++i) x[i] = node(i);
        return x;
    }
    std::vector<double> weights() const {
        std::vector<double> w(size());
        for (std::size_t i = 0; i < w.size(); ++i) w[i] = weight(i);
        return w;
    }

    /// Number of nodes at each end treated as boundary layer in accuracy checks.
    std::size_t boundary_margin() const { return n_ / 16; }
    bool is_interior(std::size_t i) const { return i >= boundary_margin() && i <= n_ - boundary_margin(); }

    double integrate(std::span<const double> f) const {
        check_size(f.size());
        double s = 0.0;
        for (std::size_t i = 0; i < f.size(); ++i) s += weight(i) * f[i];
        return s;
    }
    double inner(std::span<const double> f, std::span<const double> g) const {
        check_size(f.size());
        check_size(g.size());
        double s = 0.0;
        for (std::size_t i = 0; i < f.size(); ++i) s += weight(i) * f[i] * g[i];
        return s;
    }
    double norm(std::span<const double> f) const { return std::sqrt(inner(f, f)); }

    /// Weighted L2 norm restricted to interior nodes.
    double interior_norm(std::span<const double> f) const {
        check_size(f.size());
        double s = 0.0;
        for (std::size_t i = 0; i < f.size(); ++i) {
            if (is_interior(i)) s += weight(i) * f[i] * f[i];
        }
        return std::sqrt(s);
    }

    void check_size(std::size_t m) const {
        if (m != size()) {
            throw std::invalid_argument("grid: expected " + std::to_string(size()) + " samples, got " +
                                        std::to_string(m));
        }
    }

    friend bool operator==(const Grid&, const Grid&) = default;

private:
    double a_;
    double b_;
    std::size_t n_;
    double h_ = 0.0;
};

/// Grid samples of a function (y, eta, f, ...).
struct SampledFn {
    SampledFn(Grid g, std::vector<double> v) : grid(g), values(std::move(v)) { grid.check_size(values.size()); }

    static SampledFn sample(const Grid& g, const std::function<double(double)>& fn) {
        std::vector<double> v(g.size());
        for (std::size_t i = 0; i < v.size(); ++i) v[i] = fn(g.node(i));
        return {g, std::move(v)};
    }
    static SampledFn zeros(const Grid& g) { return {g, std::vector<double>(g.size(), 0.0)}; }

    Grid grid;
    std::vector<double> values;
};

}  // namespace fracvar
