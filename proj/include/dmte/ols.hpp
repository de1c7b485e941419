#pragma once

#include <Eigen/Dense>
#include <map>
#include <stdexcept>
#include <vector>

// Least squares with cluster-robust covariance; the second-stage workhorse.

namespace dmte::econ {

struct OlsFit {
    Eigen::VectorXd coef;
    Eigen::MatrixXd vcov;  // cluster-robust sandwich
    double rss = 0.0;
    int n = 0;
    int n_clusters = 0;
};

inline OlsFit ols(const Eigen::VectorXd& y, const Eigen::MatrixXd& W,
                  const std::vector<int>& cluster) {
    const auto n = W.rows();
    const auto k = W.cols();
    if (y.size() != n) throw std::invalid_argument("ols: y/W row mismatch");
    if (static_cast<long>(cluster.size()) != n)
        throw std::invalid_argument("ols: cluster/W row mismatch");
    if (n < k) throw std::invalid_argument("ols: fewer rows than columns");

    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(W);
    qr.setThreshold(1e-10);
    if (qr.rank() < k) throw std::runtime_error("ols: rank-deficient design matrix");

    OlsFit fit;
    fit.coef = qr.solve(y);
    const Eigen::VectorXd resid = y - W * fit.coef;
    fit.rss = resid.squaredNorm();
    fit.n = static_cast<int>(n);

    // Sandwich: (W'W)^-1 [sum_g s_g s_g'] (W'W)^-1 with cluster score sums,
    // scaled by the CR1 small-sample factor.
    const Eigen::MatrixXd bread = (W.transpose() * W).ldlt().solve(
        Eigen::MatrixXd::Identity(k, k));
    std::map<int, Eigen::VectorXd> scores;
    for (long i = 0; i < n; ++i) {
        auto [it, inserted] = scores.try_emplace(cluster[i], Eigen::VectorXd::Zero(k));
        it->second += W.row(i).transpose() * resid[i];
    }
    Eigen::MatrixXd meat = Eigen::MatrixXd::Zero(k, k);
    for (const auto& [g, s] : scores) meat += s * s.transpose();
    const double g_count = static_cast<double>(scores.size());
    fit.n_clusters = static_cast<int>(scores.size());
    double scale = 1.0;
    if (g_count > 1 && n > k) {
        scale = (g_count / (g_count - 1.0)) * ((static_cast<double>(n) - 1.0) /
                                               (static_cast<double>(n - k)));
    }
    fit.vcov = scale * bread * meat * bread;
    return fit;
}

}  // namespace dmte::econ
