#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "dmte/config.hpp"
#include "dmte/market.hpp"
#include "dmte/math.hpp"
#include "dmte/model.hpp"

// Synthetic data generation: a reduced-form Roy process with a known
// marginal-treatment-effect oracle, and a structural generator that routes
// heterogeneous agents through the discrete deductible menu.

namespace dmte::synth {

struct CovariateSpec {
    enum class Kind { Normal, Bernoulli, Uniform };
    Kind kind = Kind::Normal;
    double a = 0.0;  // mean / success prob / lower bound
    double b = 1.0;  // sd / unused / upper bound

    double mean() const {
        switch (kind) {
            case Kind::Normal: return a;
            case Kind::Bernoulli: return a;
            default: return 0.5 * (a + b);
        }
    }

    std::string to_string() const {
        std::ostringstream oss;
        switch (kind) {
            case Kind::Normal: oss << "normal(" << a << ";" << b << ")"; break;
            case Kind::Bernoulli: oss << "bernoulli(" << a << ")"; break;
            default: oss << "uniform(" << a << ";" << b << ")"; break;
        }
        return oss.str();
    }

    static CovariateSpec parse(const std::string& text) {
        const std::size_t open = text.find('(');
        const std::size_t close = text.rfind(')');
        if (open == std::string::npos || close == std::string::npos || close < open)
            throw std::invalid_argument("covariate spec must look like normal(0;1): " + text);
        const std::string name = csv::trim(text.substr(0, open));
        std::vector<double> args;
        for (const auto& piece : csv::split_line(text.substr(open + 1, close - open - 1), ';')) {
            double v{};
            const auto res = std::from_chars(piece.data(), piece.data() + piece.size(), v);
            if (res.ec != std::errc{} || res.ptr != piece.data() + piece.size())
                throw std::invalid_argument("bad covariate parameter '" + piece + "'");
            args.push_back(v);
        }
        CovariateSpec spec;
        if (name == "normal") {
            if (args.size() != 2) throw std::invalid_argument("normal takes 2 parameters");
            spec = {Kind::Normal, args[0], args[1]};
        } else if (name == "bernoulli") {
            if (args.size() != 1) throw std::invalid_argument("bernoulli takes 1 parameter");
            spec = {Kind::Bernoulli, args[0], 0.0};
        } else if (name == "uniform") {
            if (args.size() != 2) throw std::invalid_argument("uniform takes 2 parameters");
            spec = {Kind::Uniform, args[0], args[1]};
        } else {
            throw std::invalid_argument("unknown covariate distribution: " + name);
        }
        return spec;
    }
};

struct InstrumentSpec {
    double premium_mean = 400.0;    // cluster-level premium instrument, CHF
    double premium_sd = 60.0;
    double premium_noise_sd = 0.0;  // individual noise on top of the cluster draw
    double suppl_prob = 0.3;        // binary supplementary-insurance instrument
};

struct DgpConfig {
    int n_agents = 0;
    int n_clusters = 26;
    std::uint64_t seed = 0;
    std::vector<CovariateSpec> covariates;
    InstrumentSpec instruments;
    Eigen::VectorXd psi;    // selection coefficients on [1, premium, suppl, X...]
    double alpha0 = 0.0;
    double alpha1 = 0.0;
    Eigen::VectorXd beta0;  // outcome coefficients on X
    Eigen::VectorXd beta1;
    Eigen::Matrix3d sigma = Eigen::Matrix3d::Identity();  // cov of (w0, w1, V)

    int n_covariates() const { return static_cast<int>(covariates.size()); }

    Eigen::VectorXd covariate_means() const {
        Eigen::VectorXd m(n_covariates());
        for (int j = 0; j < n_covariates(); ++j) m[j] = covariates[j].mean();
        return m;
    }

    void validate() const {
        if (n_agents <= 0) throw std::invalid_argument("DgpConfig: n_agents must be > 0");
        if (n_clusters <= 0) throw std::invalid_argument("DgpConfig: n_clusters must be > 0");
        const int k = n_covariates();
        if (psi.size() != 3 + k)
            throw std::invalid_argument("DgpConfig: psi must have 1 + 2 instruments + " +
                                        std::to_string(k) + " entries");
        if (beta0.size() != k || beta1.size() != k)
            throw std::invalid_argument("DgpConfig: beta dimensions must match covariates");
        if ((sigma - sigma.transpose()).cwiseAbs().maxCoeff() > 1e-12)
            throw std::invalid_argument("DgpConfig: sigma must be symmetric");
        if (std::abs(sigma(2, 2) - 1.0) > 1e-12)
            throw std::invalid_argument("DgpConfig: Var(V) must equal 1");
    }

    static DgpConfig from_config(const cfg::Config& c, const std::string& section = "dgp") {
        DgpConfig d;
        d.n_agents = static_cast<int>(c.get_int(section, "n_agents"));
        d.n_clusters = static_cast<int>(c.get_int(section, "n_clusters", 26));
        d.seed = static_cast<std::uint64_t>(c.get_int(section, "seed", 0));
        for (const auto& item : c.get_list(section, "covariates"))
            d.covariates.push_back(CovariateSpec::parse(item));
        const auto psi = c.get_double_list(section, "psi");
        d.psi = Eigen::Map<const Eigen::VectorXd>(psi.data(), static_cast<long>(psi.size()));
        d.alpha0 = c.get_double(section, "alpha0");
        d.alpha1 = c.get_double(section, "alpha1");
        const auto b0 = c.get_double_list(section, "beta0");
        const auto b1 = c.get_double_list(section, "beta1");
        d.beta0 = Eigen::Map<const Eigen::VectorXd>(b0.data(), static_cast<long>(b0.size()));
        d.beta1 = Eigen::Map<const Eigen::VectorXd>(b1.data(), static_cast<long>(b1.size()));
        d.sigma(0, 0) = c.get_double(section, "sigma00", 1.0);
        d.sigma(1, 1) = c.get_double(section, "sigma11", 1.0);
        d.sigma(0, 1) = d.sigma(1, 0) = c.get_double(section, "sigma01", 0.0);
        d.sigma(0, 2) = d.sigma(2, 0) = c.get_double(section, "sigma0v", 0.0);
        d.sigma(1, 2) = d.sigma(2, 1) = c.get_double(section, "sigma1v", 0.0);
        d.sigma(2, 2) = 1.0;
        d.instruments.premium_mean = c.get_double(section, "premium_mean", 400.0);
        d.instruments.premium_sd = c.get_double(section, "premium_sd", 60.0);
        d.instruments.premium_noise_sd = c.get_double(section, "premium_noise_sd", 0.0);
        d.instruments.suppl_prob = c.get_double(section, "suppl_prob", 0.3);
        d.validate();
        return d;
    }
};

// Closed-form truth implied by joint normality of (w0, w1, V).
struct MteOracle {
    double delta_intercept = 0.0;       // alpha1 - alpha0
    Eigen::VectorXd delta_beta;         // beta1 - beta0
    double cov_gap = 0.0;               // sigma_1V - sigma_0V
};

inline double true_mte(const MteOracle& oracle, const Eigen::VectorXd& x, double u) {
    if (!(u > 0.0 && u < 1.0)) throw std::domain_error("true_mte: u must lie inside (0,1)");
    if (x.size() != oracle.delta_beta.size())
        throw std::invalid_argument("true_mte: covariate dimension mismatch");
    return oracle.delta_intercept + x.dot(oracle.delta_beta) + oracle.cov_gap * norm_quantile(u);
}

struct SyntheticPanel {
    Eigen::MatrixXd X;       // n x k covariates
    Eigen::MatrixXd Z;       // n x 2 instruments: [premium, suppl]
    std::vector<int> cluster;
    Eigen::VectorXd w0, w1, latent_v;
    Eigen::VectorXd selection_index;  // Z psi, including intercept and covariates
    Eigen::VectorXd true_p;
    Eigen::VectorXi treated;   // empty until outcomes are simulated
    Eigen::VectorXd y0, y1, y;
    DgpConfig config;
};

namespace detail {

inline Eigen::Matrix3d sigma_sqrt(const Eigen::Matrix3d& sigma) {
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es(sigma);
    if (es.info() != Eigen::Success)
        throw std::invalid_argument("sigma eigendecomposition failed");
    Eigen::Vector3d ev = es.eigenvalues();
    for (int i = 0; i < 3; ++i) {
        if (ev[i] < -1e-10)
            throw std::invalid_argument("sigma is not positive semi-definite");
        ev[i] = std::sqrt(std::max(ev[i], 0.0));
    }
    return es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
}

}  // namespace detail

// Draws covariates, instruments, clusters and the latent normal triple.
// Deterministic given the seed; outcomes stay empty.
inline SyntheticPanel draw_population(const DgpConfig& config) {
    config.validate();
    const Eigen::Matrix3d root = detail::sigma_sqrt(config.sigma);

    SyntheticPanel panel;
    panel.config = config;
    const int n = config.n_agents;
    const int k = config.n_covariates();
    panel.X.resize(n, k);
    panel.Z.resize(n, 2);
    panel.cluster.resize(n);
    panel.w0.resize(n);
    panel.w1.resize(n);
    panel.latent_v.resize(n);
    panel.selection_index.resize(n);
    panel.true_p.resize(n);

    Rng rng(config.seed);
    // Cluster-level premium instrument, rounded to centimes so the value
    // survives a round trip through the premium CSV exactly.
    std::vector<double> cluster_premium(config.n_clusters);
    for (int g = 0; g < config.n_clusters; ++g) {
        cluster_premium[g] = market::from_rappen(market::to_rappen(
            rng.normal(config.instruments.premium_mean, config.instruments.premium_sd)));
    }

    for (int i = 0; i < n; ++i) {
        const int g = static_cast<int>(rng.uniform_int(config.n_clusters));
        panel.cluster[i] = g;
        for (int j = 0; j < k; ++j) {
            const auto& spec = config.covariates[j];
            switch (spec.kind) {
                case CovariateSpec::Kind::Normal: panel.X(i, j) = rng.normal(spec.a, spec.b); break;
                case CovariateSpec::Kind::Bernoulli:
                    panel.X(i, j) = rng.bernoulli(spec.a) ? 1.0 : 0.0;
                    break;
                default: panel.X(i, j) = rng.uniform(spec.a, spec.b); break;
            }
        }
        panel.Z(i, 1) = rng.bernoulli(config.instruments.suppl_prob) ? 1.0 : 0.0;
        const double noise = rng.normal() * config.instruments.premium_noise_sd;
        panel.Z(i, 0) = cluster_premium[g] + noise;

        const Eigen::Vector3d e{rng.normal(), rng.normal(), rng.normal()};
        const Eigen::Vector3d latent = root * e;
        panel.w0[i] = latent[0];
        panel.w1[i] = latent[1];
        panel.latent_v[i] = latent[2];

        double index = config.psi[0] + config.psi[1] * panel.Z(i, 0) + config.psi[2] * panel.Z(i, 1);
        for (int j = 0; j < k; ++j) index += config.psi[3 + j] * panel.X(i, j);
        panel.selection_index[i] = index;
        panel.true_p[i] = norm_cdf(index);
    }
    return panel;
}

inline std::pair<SyntheticPanel, MteOracle> simulate_roy(const DgpConfig& config) {
    SyntheticPanel panel = draw_population(config);
    const int n = config.n_agents;
    panel.treated.resize(n);
    panel.y0.resize(n);
    panel.y1.resize(n);
    panel.y.resize(n);
    for (int i = 0; i < n; ++i) {
        panel.treated[i] = panel.selection_index[i] - panel.latent_v[i] > 0.0 ? 1 : 0;
        panel.y0[i] = config.alpha0 + panel.X.row(i).dot(config.beta0) + panel.w0[i];
        panel.y1[i] = config.alpha1 + panel.X.row(i).dot(config.beta1) + panel.w1[i];
        panel.y[i] = panel.treated[i] ? panel.y1[i] : panel.y0[i];
    }
    MteOracle oracle;
    oracle.delta_intercept = config.alpha1 - config.alpha0;
    oracle.delta_beta = config.beta1 - config.beta0;
    oracle.cov_gap = config.sigma(1, 2) - config.sigma(0, 2);
    return {std::move(panel), oracle};
}

// ---------------------------------------------------------------------------
// Structural generator: agents choose from the Swiss menu and respond with
// the period-2 utilisation rule.

struct PlanOffer {
    market::PlanSpec spec;
    double monthly_premium = 0.0;
};

struct StructuralOptions {
    std::uint64_t seed = 0;
    double visits_per_chf = 1.0 / 300.0;  // scales care spending into visit counts
    int n_years = 2;
};

struct StructuralYear {
    bool high_need = false;
    double care_spend = 0.0;
    int visits = 1;
};

struct StructuralRecord {
    int canton = 0;
    model::AgentPreferences prefs;
    bool suppl_ins = false;
    int deductible = 300;
    market::PlanType plan_type = market::PlanType::Free;
    double monthly_premium = 0.0;
    double effective_copay = 1.0;
    std::vector<StructuralYear> years;
};

// Effective co-payment for a plan: the marginal price at the agent's own
// expected spending, solved to self-consistency. Lowering c only raises
// spending, so the iteration walks down the price schedule and stops.
inline double effective_copayment(const model::AgentPreferences& prefs, int deductible) {
    double c = 1.0;
    for (int iter = 0; iter < 8; ++iter) {
        const double spend =
            std::max(0.0, prefs.omega * (1.0 - c) + prefs.expected_need());
        const double next = market::marginal_price(spend, deductible);
        if (next == c) break;
        c = next;
    }
    return c;
}

inline std::vector<StructuralRecord> simulate_structural(
    const std::vector<model::AgentPreferences>& population, const std::vector<int>& cantons,
    const std::vector<std::vector<PlanOffer>>& menus_by_canton, const StructuralOptions& opt) {
    if (population.size() != cantons.size())
        throw std::invalid_argument("simulate_structural: population/canton size mismatch");
    Rng rng(opt.seed);
    std::vector<StructuralRecord> out;
    out.reserve(population.size());
    for (std::size_t i = 0; i < population.size(); ++i) {
        const auto& prefs = population[i];
        const int canton = cantons[i];
        if (canton < 0 || canton >= static_cast<int>(menus_by_canton.size()))
            throw std::invalid_argument("simulate_structural: canton without a menu");
        const auto& offers = menus_by_canton[canton];
        if (offers.empty()) throw std::invalid_argument("simulate_structural: empty menu");

        std::vector<model::PlanQuote> quotes(offers.size());
        std::vector<double> copay(offers.size());
        for (std::size_t j = 0; j < offers.size(); ++j) {
            copay[j] = effective_copayment(prefs, offers[j].spec.deductible);
            quotes[j] = {copay[j], 12.0 * offers[j].monthly_premium};
        }
        std::size_t pick;
        try {
            pick = model::choose_plan(prefs, quotes);
        } catch (const std::runtime_error&) {
            throw std::runtime_error("simulate_structural: agent " + std::to_string(i) +
                                     " infeasible for every plan");
        }

        StructuralRecord rec;
        rec.canton = canton;
        rec.prefs = prefs;
        rec.deductible = offers[pick].spec.deductible;
        rec.plan_type = offers[pick].spec.plan_type;
        rec.monthly_premium = offers[pick].monthly_premium;
        rec.effective_copay = copay[pick];
        rec.suppl_ins = rng.bernoulli(0.3);
        rec.years.resize(opt.n_years);
        for (int t = 0; t < opt.n_years; ++t) {
            auto& yr = rec.years[t];
            yr.high_need = rng.bernoulli(prefs.p_high);
            const double need = yr.high_need ? prefs.lambda_high : prefs.lambda_low;
            yr.care_spend = model::optimal_utilization(prefs.omega, rec.effective_copay, need);
            yr.visits = 1 + rng.poisson(std::max(0.0, yr.care_spend) * opt.visits_per_chf);
        }
        out.push_back(std::move(rec));
    }
    return out;
}

}  // namespace dmte::synth
