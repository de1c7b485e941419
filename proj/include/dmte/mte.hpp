#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "dmte/localreg.hpp"
#include "dmte/math.hpp"
#include "dmte/ols.hpp"
#include "dmte/probit.hpp"

// Marginal-treatment-effect estimation for a binary deductible choice:
// probit first stage, then either the parametric-normal control-function
// estimator (two selection-corrected arm regressions) or the semiparametric
// local-IV estimator (partially linear model, double residualization, local
// derivative of the nonparametric propensity term).

namespace dmte::econ {

// Table grid the reports are built around.
inline const std::vector<double> kReportPercentiles{0.01, 0.10, 0.25, 0.50, 0.75, 0.90, 0.99};

struct EstimationInput {
    Eigen::VectorXd y;
    Eigen::MatrixXd x;        // covariates, no intercept column
    Eigen::MatrixXd z_excl;   // excluded instruments
    Eigen::VectorXi d;
    std::vector<int> cluster;
    std::vector<std::string> x_names;
    std::vector<std::string> z_names;

    void validate() const {
        const auto n = y.size();
        if (x.rows() != n || z_excl.rows() != n || d.size() != n ||
            static_cast<long>(cluster.size()) != n)
            throw std::invalid_argument("EstimationInput: row counts differ");
        if (x_names.size() != static_cast<std::size_t>(x.cols()) ||
            z_names.size() != static_cast<std::size_t>(z_excl.cols()))
            throw std::invalid_argument("EstimationInput: name/column mismatch");
    }

    // Probit design: [1, instruments, covariates].
    Eigen::MatrixXd selection_design() const {
        Eigen::MatrixXd z(y.size(), 1 + z_excl.cols() + x.cols());
        z.col(0).setOnes();
        z.middleCols(1, z_excl.cols()) = z_excl;
        z.rightCols(x.cols()) = x;
        return z;
    }

    std::vector<std::string> selection_names() const {
        std::vector<std::string> names{"intercept"};
        names.insert(names.end(), z_names.begin(), z_names.end());
        names.insert(names.end(), x_names.begin(), x_names.end());
        return names;
    }
};

struct SupportRegion {
    double bin_width = 0.01;
    int min_count = 1;
    std::vector<int> treated_counts;
    std::vector<int> untreated_counts;
    int first_bin = 0;
    int last_bin = -1;
    double p_lo = 0.0;
    double p_hi = 0.0;

    bool contains(double u) const { return u >= p_lo && u <= p_hi; }
};

// Largest contiguous run of propensity bins populated by both arms.
inline SupportRegion common_support(const Eigen::VectorXd& p, const Eigen::VectorXi& d,
                                    double bin_width = 0.01, int min_count = 1) {
    if (p.size() != d.size()) throw std::invalid_argument("common_support: p/D mismatch");
    if (!(bin_width > 0.0 && bin_width <= 1.0))
        throw std::invalid_argument("common_support: bad bin width");
    const int n_bins = static_cast<int>(std::ceil(1.0 / bin_width - 1e-9));
    SupportRegion region;
    region.bin_width = bin_width;
    region.min_count = min_count;
    region.treated_counts.assign(n_bins, 0);
    region.untreated_counts.assign(n_bins, 0);
    for (long i = 0; i < p.size(); ++i) {
        if (!(p[i] > 0.0 && p[i] < 1.0))
            throw std::invalid_argument("common_support: propensity outside (0,1)");
        const int bin = std::min(static_cast<int>(p[i] / bin_width), n_bins - 1);
        if (d[i]) {
            ++region.treated_counts[bin];
        } else {
            ++region.untreated_counts[bin];
        }
    }
    int best_start = -1, best_len = 0;
    int run_start = -1, run_len = 0;
    for (int b = 0; b < n_bins; ++b) {
        const bool ok = region.treated_counts[b] >= min_count &&
                        region.untreated_counts[b] >= min_count;
        if (ok) {
            if (run_start < 0) run_start = b;
            ++run_len;
            if (run_len > best_len) {
                best_len = run_len;
                best_start = run_start;
            }
        } else {
            run_start = -1;
            run_len = 0;
        }
    }
    if (best_len == 0) throw std::runtime_error("common_support: no bin supports both arms");
    region.first_bin = best_start;
    region.last_bin = best_start + best_len - 1;
    region.p_lo = best_start * bin_width;
    region.p_hi = (best_start + best_len) * bin_width;
    return region;
}

struct PercentileEntry {
    double u = 0.0;
    double estimate = 0.0;
    bool present = true;      // false when outside semiparametric support
    bool in_support = true;   // support warning flag for parametric entries
};

struct MteOptions {
    double bin_width = 0.01;
    int min_count = 1;
    double bandwidth = 0.0;  // <= 0 selects the rule-of-thumb value
    int degree = 2;
    std::vector<double> percentiles = kReportPercentiles;
};

struct MteFit {
    enum class Kind { ParametricNormal, Semiparametric };
    Kind kind = Kind::ParametricNormal;

    ProbitFit first_stage;
    std::vector<std::string> first_stage_names;

    Eigen::VectorXd beta0_hat;  // untreated arm: [intercept, covariates] or covariates only
    Eigen::VectorXd delta_hat;  // parametric: [intercept gap, covariate gaps]; semipar: covariate gaps
    double sigma1v = 0.0;
    double sigma0v = 0.0;

    Eigen::VectorXd x_bar;
    SupportRegion support;
    std::vector<PercentileEntry> percentiles;
    double ate = 0.0;

    // Semiparametric pieces: K'(u) on the 0.01 grid inside support.
    std::vector<double> kprime_u;
    std::vector<double> kprime;

    int n_obs = 0;
    int n_clusters = 0;
    double bandwidth_used = 0.0;

    double cov_gap() const { return sigma1v - sigma0v; }

    // MTE at the covariate means. Parametric: closed form in Phi^-1(u).
    // Semiparametric: linear interpolation on the stored support grid.
    double mte_at(double u) const {
        if (!(u > 0.0 && u < 1.0)) throw std::domain_error("mte_at: u must lie inside (0,1)");
        if (kind == Kind::ParametricNormal) {
            return delta_hat[0] + x_bar.dot(delta_hat.tail(x_bar.size())) +
                   cov_gap() * norm_quantile(u);
        }
        if (kprime_u.empty() || u < kprime_u.front() - 1e-12 || u > kprime_u.back() + 1e-12)
            throw std::runtime_error("mte_at: u outside the common support");
        const double slope_part = x_bar.size() ? x_bar.dot(delta_hat) : 0.0;
        const auto it = std::lower_bound(kprime_u.begin(), kprime_u.end(), u);
        if (it == kprime_u.begin()) return slope_part + kprime.front();
        if (it == kprime_u.end()) return slope_part + kprime.back();
        const auto hi = static_cast<std::size_t>(it - kprime_u.begin());
        const double w = (u - kprime_u[hi - 1]) / (kprime_u[hi] - kprime_u[hi - 1]);
        return slope_part + (1.0 - w) * kprime[hi - 1] + w * kprime[hi];
    }
};

namespace detail {

inline int count_clusters(const std::vector<int>& cluster) {
    std::vector<int> ids(cluster);
    std::sort(ids.begin(), ids.end());
    ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
    return static_cast<int>(ids.size());
}

inline std::vector<long> arm_rows(const Eigen::VectorXi& d, int value) {
    std::vector<long> rows;
    for (long i = 0; i < d.size(); ++i) {
        if (d[i] == value) rows.push_back(i);
    }
    return rows;
}

}  // namespace detail

inline MteFit mte_parametric(const EstimationInput& input, const MteOptions& opts = {}) {
    input.validate();
    const auto n = input.y.size();
    const auto k = input.x.cols();

    MteFit fit;
    fit.kind = MteFit::Kind::ParametricNormal;
    fit.n_obs = static_cast<int>(n);
    fit.n_clusters = detail::count_clusters(input.cluster);
    fit.first_stage_names = input.selection_names();

    const Eigen::MatrixXd z = input.selection_design();
    fit.first_stage = probit_fit(input.d, z);
    if (!fit.first_stage.converged)
        throw std::runtime_error("mte_parametric: first stage did not converge");
    const Eigen::VectorXd p = propensity(fit.first_stage, z);
    fit.support = common_support(p, input.d, opts.bin_width, opts.min_count);

    // Arm regressions with the truncated-normal correction terms.
    const auto run_arm = [&](int arm) {
        const auto rows = detail::arm_rows(input.d, arm);
        if (rows.empty())
            throw std::runtime_error("mte_parametric: a treatment arm is empty");
        Eigen::VectorXd y_arm(rows.size());
        Eigen::MatrixXd w(rows.size(), k + 2);
        std::vector<int> cl(rows.size());
        for (std::size_t r = 0; r < rows.size(); ++r) {
            const long i = rows[r];
            y_arm[static_cast<long>(r)] = input.y[i];
            w(static_cast<long>(r), 0) = 1.0;
            w.row(static_cast<long>(r)).segment(1, k) = input.x.row(i);
            w(static_cast<long>(r), k + 1) = arm ? mills_treated(p[i]) : mills_untreated(p[i]);
            cl[r] = input.cluster[static_cast<std::size_t>(i)];
        }
        return ols(y_arm, w, cl);
    };
    const OlsFit treated = run_arm(1);
    const OlsFit untreated = run_arm(0);

    fit.sigma1v = treated.coef[k + 1];
    fit.sigma0v = untreated.coef[k + 1];
    fit.beta0_hat = untreated.coef.head(k + 1);
    fit.delta_hat = treated.coef.head(k + 1) - untreated.coef.head(k + 1);
    fit.x_bar = input.x.colwise().mean();

    for (const double u : opts.percentiles) {
        PercentileEntry entry;
        entry.u = u;
        entry.estimate = fit.mte_at(u);
        entry.present = true;
        entry.in_support = fit.support.contains(u);
        fit.percentiles.push_back(entry);
    }
    fit.ate = fit.mte_at(0.5);
    return fit;
}

inline MteFit mte_semiparametric(const EstimationInput& input, const MteOptions& opts = {}) {
    input.validate();
    const auto n = input.y.size();
    const auto k = input.x.cols();

    MteFit fit;
    fit.kind = MteFit::Kind::Semiparametric;
    fit.n_obs = static_cast<int>(n);
    fit.n_clusters = detail::count_clusters(input.cluster);
    fit.first_stage_names = input.selection_names();

    const Eigen::MatrixXd z = input.selection_design();
    fit.first_stage = probit_fit(input.d, z);
    if (!fit.first_stage.converged)
        throw std::runtime_error("mte_semiparametric: first stage did not converge");
    const Eigen::VectorXd p = propensity(fit.first_stage, z);
    fit.support = common_support(p, input.d, opts.bin_width, opts.min_count);

    const double h = opts.bandwidth > 0.0 ? opts.bandwidth : rule_of_thumb_bandwidth(p);
    fit.bandwidth_used = h;

    // Partially linear model y = X b0 + p * X (b1-b0) + K(p) + e.
    // Double residualization on p, then least squares on the residuals.
    Eigen::VectorXd resid_target = input.y;
    if (k > 0) {
        Eigen::MatrixXd w(n, 2 * k);
        w.leftCols(k) = input.x;
        w.rightCols(k) = input.x.array().colwise() * p.array();

        Eigen::MatrixXd stacked(n, 1 + 2 * k);
        stacked.col(0) = input.y;
        stacked.rightCols(2 * k) = w;
        const Eigen::MatrixXd fitted = local_fitted_values(p, stacked, h, opts.degree);

        const Eigen::VectorXd ey = input.y - fitted.col(0);
        const Eigen::MatrixXd ew = w - fitted.rightCols(2 * k);
        const OlsFit partial = ols(ey, ew, input.cluster);
        fit.beta0_hat = partial.coef.head(k);
        fit.delta_hat = partial.coef.tail(k);
        resid_target -= w * partial.coef;
    } else {
        fit.beta0_hat.resize(0);
        fit.delta_hat.resize(0);
    }
    fit.x_bar = k > 0 ? Eigen::VectorXd(input.x.colwise().mean()) : Eigen::VectorXd(0);

    // K'(u) over the supported part of the percent grid.
    std::vector<double> grid_u;
    for (int step = 1; step < 100; ++step) {
        const double u = 0.01 * step;
        if (fit.support.contains(u)) grid_u.push_back(u);
    }
    if (grid_u.empty())
        throw std::runtime_error("mte_semiparametric: support too narrow for the percentile grid");
    const std::vector<LocalFit> curve = local_curve(p, resid_target, grid_u, h, opts.degree);
    fit.kprime_u = grid_u;
    fit.kprime.resize(curve.size());
    for (std::size_t i = 0; i < curve.size(); ++i) fit.kprime[i] = curve[i].derivative;

    const double slope_part = k > 0 ? fit.x_bar.dot(fit.delta_hat) : 0.0;
    double ate_sum = 0.0;
    for (std::size_t i = 0; i < grid_u.size(); ++i) ate_sum += slope_part + fit.kprime[i];
    fit.ate = ate_sum / static_cast<double>(grid_u.size());

    for (const double u : opts.percentiles) {
        PercentileEntry entry;
        entry.u = u;
        entry.in_support = fit.support.contains(u);
        entry.present = entry.in_support;
        if (entry.present) {
            const std::vector<LocalFit> at_u = local_curve(p, resid_target, {u}, h, opts.degree);
            entry.estimate = slope_part + at_u[0].derivative;
        }
        fit.percentiles.push_back(entry);
    }
    return fit;
}

// ATE recomputed from the fit: closed form for the parametric estimator,
// grid mean over support for the semiparametric one.
inline double ate_from_mte(const MteFit& fit) {
    if (fit.kind == MteFit::Kind::ParametricNormal) {
        // The Phi^-1 term integrates to zero over (0,1).
        return fit.delta_hat[0] + fit.x_bar.dot(fit.delta_hat.tail(fit.x_bar.size()));
    }
    const double slope_part = fit.x_bar.size() ? fit.x_bar.dot(fit.delta_hat) : 0.0;
    if (fit.kprime.empty()) throw std::runtime_error("ate_from_mte: empty support grid");
    double sum = 0.0;
    for (const double kp : fit.kprime) sum += slope_part + kp;
    return sum / static_cast<double>(fit.kprime.size());
}

}  // namespace dmte::econ
