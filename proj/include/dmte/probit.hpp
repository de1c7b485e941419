#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <stdexcept>

#include "dmte/math.hpp"

// Probit maximum likelihood by Newton iterations on the exact gradient and
// observed-information Hessian, plus the truncated-normal mean terms used by
// the selection-corrected outcome regressions.

namespace dmte::econ {

struct ProbitFit {
    Eigen::VectorXd coef;
    Eigen::MatrixXd vcov;  // inverse observed information at the optimum
    double loglik = 0.0;
    bool converged = false;
    int iterations = 0;
};

inline double probit_loglik(const Eigen::VectorXi& d, const Eigen::MatrixXd& z,
                            const Eigen::VectorXd& psi) {
    const Eigen::VectorXd eta = z * psi;
    double ll = 0.0;
    for (long i = 0; i < eta.size(); ++i) {
        ll += d[i] ? log_norm_cdf(eta[i]) : log_norm_cdf(-eta[i]);
    }
    return ll;
}

inline ProbitFit probit_fit(const Eigen::VectorXi& d, const Eigen::MatrixXd& z) {
    const auto n = z.rows();
    const auto k = z.cols();
    if (d.size() != n) throw std::invalid_argument("probit_fit: D/Z row mismatch");
    const int ones = d.sum();
    if (ones == 0 || ones == n)
        throw std::runtime_error("probit_fit: outcome takes a single class");
    {
        Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(z);
        qr.setThreshold(1e-10);
        if (qr.rank() < k) throw std::runtime_error("probit_fit: design matrix is rank deficient");
    }

    ProbitFit fit;
    fit.coef = Eigen::VectorXd::Zero(k);
    double ll = probit_loglik(d, z, fit.coef);

    Eigen::VectorXd grad(k);
    Eigen::MatrixXd info(k, k);
    constexpr double grad_tol = 1e-8;
    constexpr int max_iter = 100;

    for (int iter = 1; iter <= max_iter; ++iter) {
        fit.iterations = iter;
        const Eigen::VectorXd eta = z * fit.coef;
        grad.setZero();
        info.setZero();
        for (long i = 0; i < n; ++i) {
            // score factor: phi/Phi for successes, -phi/(1-Phi) for failures
            const double s = d[i] ? inv_mills_lower(eta[i]) : -inv_mills_lower(-eta[i]);
            const double w = s * (s + eta[i]);  // observed information weight, >= 0
            grad.noalias() += z.row(i).transpose() * s;
            info.noalias() += z.row(i).transpose() * z.row(i) * w;
        }
        if (grad.norm() < grad_tol) {
            fit.converged = true;
            break;
        }
        Eigen::VectorXd step = info.ldlt().solve(grad);
        // The log likelihood is concave; halve the step on the rare overshoot.
        double scale = 1.0;
        double ll_new = probit_loglik(d, z, fit.coef + step);
        for (int h = 0; h < 30 && !(ll_new >= ll - 1e-12); ++h) {
            scale *= 0.5;
            ll_new = probit_loglik(d, z, fit.coef + scale * step);
        }
        fit.coef += scale * step;
        ll = ll_new;
        if (fit.coef.cwiseAbs().maxCoeff() > 1e4)
            throw std::runtime_error("probit_fit: coefficients diverging (quasi-complete separation)");
    }
    fit.loglik = ll;
    if (fit.converged) {
        // Recompute the information at the final coefficients.
        const Eigen::VectorXd eta = z * fit.coef;
        info.setZero();
        for (long i = 0; i < n; ++i) {
            const double s = d[i] ? inv_mills_lower(eta[i]) : -inv_mills_lower(-eta[i]);
            const double w = s * (s + eta[i]);
            info.noalias() += z.row(i).transpose() * z.row(i) * w;
        }
        fit.vcov = info.ldlt().solve(Eigen::MatrixXd::Identity(k, k));
    }
    return fit;
}

inline Eigen::VectorXd probit_gradient(const Eigen::VectorXi& d, const Eigen::MatrixXd& z,
                                       const Eigen::VectorXd& psi) {
    const Eigen::VectorXd eta = z * psi;
    Eigen::VectorXd grad = Eigen::VectorXd::Zero(z.cols());
    for (long i = 0; i < z.rows(); ++i) {
        const double s = d[i] ? inv_mills_lower(eta[i]) : -inv_mills_lower(-eta[i]);
        grad.noalias() += z.row(i).transpose() * s;
    }
    return grad;
}

inline constexpr double kPropensityClamp = 1e-6;

// Phi(Z psi-hat), clamped into [1e-6, 1-1e-6] to keep the mills ratios finite.
inline Eigen::VectorXd propensity(const ProbitFit& fit, const Eigen::MatrixXd& z) {
    if (!fit.converged) throw std::runtime_error("propensity: probit fit did not converge");
    if (z.cols() != fit.coef.size())
        throw std::invalid_argument("propensity: design dimension mismatch");
    Eigen::VectorXd p = (z * fit.coef).unaryExpr([](double eta) { return norm_cdf(eta); });
    return p.cwiseMax(kPropensityClamp).cwiseMin(1.0 - kPropensityClamp);
}

// E[V | V < Phi^-1(p)] = -phi/p: mean selection unobservable among the treated.
inline double mills_treated(double p) {
    if (!(p > 0.0 && p < 1.0)) throw std::domain_error("mills_treated: p must lie inside (0,1)");
    return -norm_pdf(norm_quantile(p)) / p;
}

// E[V | V >= Phi^-1(p)] = phi/(1-p)
inline double mills_untreated(double p) {
    if (!(p > 0.0 && p < 1.0)) throw std::domain_error("mills_untreated: p must lie inside (0,1)");
    return norm_pdf(norm_quantile(p)) / (1.0 - p);
}

}  // namespace dmte::econ
