#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <vector>

#include "dmte/math.hpp"

// Gaussian-kernel local polynomial regression: fitted value and first
// derivative at a point. Also the batched variant that produces
// E[column | x = x_i] for every sample point, used by the double
// residualization of the partially linear outcome model.

namespace dmte::econ {

struct LocalFit {
    double value = 0.0;
    double derivative = 0.0;
};

namespace detail {

// Kernel weight falls below 1e-12 past |t| = 7.43; treat that as zero.
inline constexpr double kKernelCut = 7.4342;

// Weighted least squares on powers of (x-x0)/h over [lo,hi) of a sorted
// series. Returns the polynomial coefficients for each response column,
// scaled back so row 0 is the fitted value and row 1 the derivative.
inline Eigen::MatrixXd local_wls_sorted(const std::vector<double>& xs, const Eigen::MatrixXd& ys,
                                        std::size_t lo, std::size_t hi, double x0, double h,
                                        int degree) {
    const int p = degree + 1;
    Eigen::MatrixXd s = Eigen::MatrixXd::Zero(p, p);
    Eigen::MatrixXd b = Eigen::MatrixXd::Zero(p, ys.cols());
    std::size_t used = 0;
    Eigen::VectorXd powers(p);
    for (std::size_t i = lo; i < hi; ++i) {
        const double t = (xs[i] - x0) / h;
        const double w = std::exp(-0.5 * t * t);
        if (w <= 1e-12) continue;
        ++used;
        powers[0] = 1.0;
        for (int j = 1; j < p; ++j) powers[j] = powers[j - 1] * t;
        s.noalias() += w * powers * powers.transpose();
        b.noalias() += w * powers * ys.row(static_cast<long>(i));
    }
    if (used < static_cast<std::size_t>(p))
        throw std::runtime_error("local_polynomial: not enough points near x0");
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(s);
    qr.setThreshold(1e-12);
    if (qr.rank() < p) throw std::runtime_error("local_polynomial: singular local design");
    Eigen::MatrixXd coef = qr.solve(b);
    if (p > 1) coef.row(1) /= h;  // undo the 1/h basis scaling for the derivative
    return coef;
}

inline std::pair<std::size_t, std::size_t> window(const std::vector<double>& xs, double x0,
                                                  double h) {
    const double cut = kKernelCut * h;
    const auto lo = std::lower_bound(xs.begin(), xs.end(), x0 - cut);
    const auto hi = std::upper_bound(xs.begin(), xs.end(), x0 + cut);
    return {static_cast<std::size_t>(lo - xs.begin()), static_cast<std::size_t>(hi - xs.begin())};
}

}  // namespace detail

inline LocalFit local_polynomial(const std::vector<double>& xs, const std::vector<double>& ys,
                                 double x0, double bandwidth, int degree) {
    if (xs.size() != ys.size()) throw std::invalid_argument("local_polynomial: xs/ys mismatch");
    if (!(bandwidth > 0.0)) throw std::invalid_argument("local_polynomial: bandwidth must be > 0");
    if (degree < 1) throw std::invalid_argument("local_polynomial: degree must be >= 1");

    std::vector<std::size_t> order(xs.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return xs[a] < xs[b]; });
    std::vector<double> sx(xs.size());
    Eigen::MatrixXd sy(static_cast<long>(ys.size()), 1);
    for (std::size_t i = 0; i < order.size(); ++i) {
        sx[i] = xs[order[i]];
        sy(static_cast<long>(i), 0) = ys[order[i]];
    }
    const auto [lo, hi] = detail::window(sx, x0, bandwidth);
    const Eigen::MatrixXd coef = detail::local_wls_sorted(sx, sy, lo, hi, x0, bandwidth, degree);
    return {coef(0, 0), coef(1, 0)};
}

// Rule-of-thumb bandwidth for a propensity-like regressor.
inline double rule_of_thumb_bandwidth(const Eigen::VectorXd& x) {
    const auto n = x.size();
    if (n < 2) throw std::invalid_argument("bandwidth: need at least two points");
    const double mean = x.mean();
    const double sd = std::sqrt((x.array() - mean).square().sum() / (static_cast<double>(n) - 1.0));
    return 1.06 * sd * std::pow(static_cast<double>(n), -0.2);
}

// Fitted values of each column of Y on x, evaluated at every x_i (leave-in).
inline Eigen::MatrixXd local_fitted_values(const Eigen::VectorXd& x, const Eigen::MatrixXd& y,
                                           double bandwidth, int degree) {
    const auto n = x.size();
    if (y.rows() != n) throw std::invalid_argument("local_fitted_values: x/Y mismatch");
    std::vector<std::size_t> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return x[static_cast<long>(a)] < x[static_cast<long>(b)];
    });
    std::vector<double> sx(static_cast<std::size_t>(n));
    Eigen::MatrixXd sy(n, y.cols());
    for (std::size_t i = 0; i < order.size(); ++i) {
        sx[i] = x[static_cast<long>(order[i])];
        sy.row(static_cast<long>(i)) = y.row(static_cast<long>(order[i]));
    }
    Eigen::MatrixXd fitted(n, y.cols());
    parallel_for(static_cast<std::size_t>(n), [&](std::size_t i) {
        const auto [lo, hi] = detail::window(sx, sx[i], bandwidth);
        const Eigen::MatrixXd coef =
            detail::local_wls_sorted(sx, sy, lo, hi, sx[i], bandwidth, degree);
        fitted.row(static_cast<long>(order[i])) = coef.row(0);
    });
    return fitted;
}

// Value and derivative of E[r | x] on a grid of evaluation points.
inline std::vector<LocalFit> local_curve(const Eigen::VectorXd& x, const Eigen::VectorXd& r,
                                         const std::vector<double>& grid, double bandwidth,
                                         int degree) {
    std::vector<std::size_t> order(static_cast<std::size_t>(x.size()));
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return x[static_cast<long>(a)] < x[static_cast<long>(b)];
    });
    std::vector<double> sx(order.size());
    Eigen::MatrixXd sr(x.size(), 1);
    for (std::size_t i = 0; i < order.size(); ++i) {
        sx[i] = x[static_cast<long>(order[i])];
        sr(static_cast<long>(i), 0) = r[static_cast<long>(order[i])];
    }
    std::vector<LocalFit> out(grid.size());
    parallel_for(grid.size(), [&](std::size_t g) {
        const auto [lo, hi] = detail::window(sx, grid[g], bandwidth);
        const Eigen::MatrixXd coef =
            detail::local_wls_sorted(sx, sr, lo, hi, grid[g], bandwidth, degree);
        out[g] = {coef(0, 0), coef(1, 0)};
    });
    return out;
}

}  // namespace dmte::econ
