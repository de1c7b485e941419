#pragma once

#include <cmath>
#include <cstddef>
#include <limits>
#include <stdexcept>
#include <vector>

#include "dmte/math.hpp"

// Two-period model of deductible choice under heterogeneous moral hazard.
//
// Period 2: given a realized care need lambda and a co-payment rate c, the
// agent picks care spending m trading off a quadratic monetized health
// benefit against out-of-pocket cost. Period 1: the agent picks c to
// maximise expected log money across the High/Low need states, anticipating
// her own period-2 response.

namespace dmte::model {

struct AgentPreferences {
    double omega = 1.0;        // moral-hazard coefficient, monetized-care units
    double lambda_high = 1.0;  // high need realization, money units
    double lambda_low = 0.0;   // low need realization, money units
    double p_high = 0.5;       // probability of the high need state
    double income = 10.0;      // period income, money units

    void validate() const {
        if (!(omega > 0.0)) throw std::invalid_argument("AgentPreferences: omega must be > 0");
        if (!(lambda_high > lambda_low))
            throw std::invalid_argument("AgentPreferences: lambda_high must exceed lambda_low");
        if (!(lambda_low >= 0.0))
            throw std::invalid_argument("AgentPreferences: lambda_low must be >= 0");
        if (!(p_high >= 0.0 && p_high <= 1.0))
            throw std::invalid_argument("AgentPreferences: p_high must lie in [0,1]");
        if (!(income > 0.0)) throw std::invalid_argument("AgentPreferences: income must be > 0");
    }

    double expected_need() const { return p_high * lambda_high + (1.0 - p_high) * lambda_low; }
};

// Premium as a linear tariff in the coverage share 1-c. The slope is signed:
// negative reproduces the tariff orientation of the theory section, positive
// the observed market pattern of premiums rising with coverage.
struct LinearTariff {
    double base = 0.0;   // premium at zero coverage
    double slope = 0.0;  // d premium / d coverage share

    double premium(double coverage_share) const { return base + slope * coverage_share; }
    double derivative() const { return slope; }

    void validate() const {
        if (!(base >= 0.0)) throw std::invalid_argument("LinearTariff: base must be >= 0");
        // Linear in coverage, so checking the endpoints covers all c in [0,1].
        if (premium(0.0) < 0.0 || premium(1.0) < 0.0)
            throw std::invalid_argument("LinearTariff: premium must be >= 0 on [0,1]");
    }
};

struct UtilitySnapshot {
    double health_component = 0.0;
    double money_component = 0.0;
    double total = 0.0;
};

inline double health_utility(double care_spend, double lambda, double omega) {
    if (!(omega > 0.0)) throw std::invalid_argument("health_utility: omega must be > 0");
    const double net = care_spend - lambda;
    return net - net * net / (2.0 * omega);
}

inline double money_utility(double care_spend, double copay_rate, const LinearTariff& tariff,
                            double income) {
    if (!(copay_rate >= 0.0 && copay_rate <= 1.0))
        throw std::invalid_argument("money_utility: co-payment rate must lie in [0,1]");
    return income - copay_rate * care_spend - tariff.premium(1.0 - copay_rate);
}

inline UtilitySnapshot period2_utility(double care_spend, const AgentPreferences& prefs,
                                       double lambda_realized, double copay_rate,
                                       const LinearTariff& tariff) {
    UtilitySnapshot snap;
    snap.health_component = health_utility(care_spend, lambda_realized, prefs.omega);
    snap.money_component = money_utility(care_spend, copay_rate, tariff, prefs.income);
    snap.total = snap.health_component + snap.money_component;
    return snap;
}

// m* = omega (1-c) + lambda
inline double optimal_utilization(double omega, double copay_rate, double lambda_realized) {
    if (!(omega > 0.0)) throw std::invalid_argument("optimal_utilization: omega must be > 0");
    if (!(copay_rate >= 0.0 && copay_rate <= 1.0))
        throw std::invalid_argument("optimal_utilization: co-payment rate must lie in [0,1]");
    return omega * (1.0 - copay_rate) + lambda_realized;
}

namespace detail {

// Money left in state lambda when the agent responds with m*(c).
inline double state_money(double c, const AgentPreferences& prefs, double lambda,
                          const LinearTariff& tariff) {
    const double m_star = prefs.omega * (1.0 - c) + lambda;
    return prefs.income - c * m_star - tariff.premium(1.0 - c);
}

// d/dc of state_money; the tariff derivative enters with sign + because the
// premium argument is 1-c.
inline double state_money_dc(double c, const AgentPreferences& prefs, double lambda,
                             const LinearTariff& tariff) {
    return 2.0 * prefs.omega * c - prefs.omega - lambda + tariff.derivative();
}

}  // namespace detail

// E[ln money] across the two need states with the period-2 response plugged in.
inline double expected_period1_utility(double copay_rate, const AgentPreferences& prefs,
                                       const LinearTariff& tariff) {
    prefs.validate();
    const double money_high = detail::state_money(copay_rate, prefs, prefs.lambda_high, tariff);
    const double money_low = detail::state_money(copay_rate, prefs, prefs.lambda_low, tariff);
    if (prefs.p_high > 0.0 && !(money_high > 0.0))
        throw std::domain_error("expected_period1_utility: high-state money non-positive");
    if (prefs.p_high < 1.0 && !(money_low > 0.0))
        throw std::domain_error("expected_period1_utility: low-state money non-positive");
    double value = 0.0;
    if (prefs.p_high > 0.0) value += prefs.p_high * std::log(money_high);
    if (prefs.p_high < 1.0) value += (1.0 - prefs.p_high) * std::log(money_low);
    return value;
}

// Central-difference derivative of the period-1 objective, step 1e-6.
inline double foc_residual(double copay_rate, const AgentPreferences& prefs,
                           const LinearTariff& tariff) {
    constexpr double h = 1e-6;
    return (expected_period1_utility(copay_rate + h, prefs, tariff) -
            expected_period1_utility(copay_rate - h, prefs, tariff)) /
           (2.0 * h);
}

// c* = 1/2 + (E[lambda] - pi') / (2 omega); exact stationary point when the
// two need states leave the same money (degenerate p or equal lambdas).
inline double copayment_closed_form(const AgentPreferences& prefs, const LinearTariff& tariff) {
    prefs.validate();
    return 0.5 + (prefs.expected_need() - tariff.derivative()) / (2.0 * prefs.omega);
}

struct CopaymentSolution {
    double value = 0.0;        // stationary point of the objective, clamped to [0,1]
    bool boundary = false;     // true when the unclamped solution left [0,1]
    double closed_form = 0.0;  // first-order reference value
};

// Stationary point of expected_period1_utility over c.
//
// The exact first-order condition weights each state's money derivative by
// its marginal utility; the closed form drops the 1/money weights. The root
// is unique and bracketed by the per-state stationary points
// c_t = 1/2 + (lambda_t - pi')/(2 omega), so we bisect on that interval and
// polish with Newton. Outside [0,1] the result is clamped and flagged.
inline CopaymentSolution optimal_copayment(const AgentPreferences& prefs,
                                           const LinearTariff& tariff) {
    prefs.validate();
    CopaymentSolution sol;
    sol.closed_form = copayment_closed_form(prefs, tariff);

    const auto foc = [&](double c) {
        double value = 0.0;
        if (prefs.p_high > 0.0) {
            const double money = detail::state_money(c, prefs, prefs.lambda_high, tariff);
            if (!(money > 0.0)) throw std::domain_error("optimal_copayment: infeasible c");
            value += prefs.p_high * detail::state_money_dc(c, prefs, prefs.lambda_high, tariff) / money;
        }
        if (prefs.p_high < 1.0) {
            const double money = detail::state_money(c, prefs, prefs.lambda_low, tariff);
            if (!(money > 0.0)) throw std::domain_error("optimal_copayment: infeasible c");
            value += (1.0 - prefs.p_high) *
                     detail::state_money_dc(c, prefs, prefs.lambda_low, tariff) / money;
        }
        return value;
    };

    // Per-state stationary points bracket the root.
    const double c_low_state = 0.5 + (prefs.lambda_low - tariff.derivative()) / (2.0 * prefs.omega);
    const double c_high_state = 0.5 + (prefs.lambda_high - tariff.derivative()) / (2.0 * prefs.omega);
    double lo = (prefs.p_high >= 1.0) ? c_high_state : c_low_state;
    double hi = (prefs.p_high <= 0.0) ? c_low_state : c_high_state;
    if (lo > hi) std::swap(lo, hi);

    double root;
    if (hi - lo < 1e-14) {
        root = sol.closed_form;
        foc(std::clamp(root, 0.0, 1.0));  // feasibility check at the reported point
    } else {
        // The bracket endpoints have FOC signs -,+ whenever feasible there;
        // shrink inward if money hits zero at an endpoint.
        double f_lo = 0.0, f_hi = 0.0;
        bool ok = false;
        double shrink = 0.0;
        for (int attempt = 0; attempt < 40; ++attempt) {
            const double a = lo + shrink * (hi - lo);
            const double b = hi - shrink * (hi - lo);
            try {
                f_lo = foc(a);
                f_hi = foc(b);
                lo = a;
                hi = b;
                ok = true;
                break;
            } catch (const std::domain_error&) {
                shrink = shrink == 0.0 ? 1e-6 : shrink * 2.0;
                if (shrink >= 0.5) break;
            }
        }
        if (!ok) throw std::domain_error("optimal_copayment: objective undefined near the optimum");
        if (f_lo > 0.0 || f_hi < 0.0) {
            // No sign change: numerically degenerate; fall back to the closed form.
            root = sol.closed_form;
        } else {
            for (int iter = 0; iter < 200 && hi - lo > 1e-15; ++iter) {
                const double mid = 0.5 * (lo + hi);
                const double f_mid = foc(mid);
                if (f_mid <= 0.0) {
                    lo = mid;
                    f_lo = f_mid;
                } else {
                    hi = mid;
                    f_hi = f_mid;
                }
            }
            root = 0.5 * (lo + hi);
        }
    }

    if (root < 0.0 || root > 1.0) {
        sol.boundary = true;
        sol.value = std::clamp(root, 0.0, 1.0);
    } else {
        sol.value = root;
    }
    expected_period1_utility(sol.value, prefs, tariff);  // domain check at the reported point
    return sol;
}

// One plan on the discrete menu: an effective co-payment rate and the
// premium owed under it.
struct PlanQuote {
    double copay_rate = 0.0;
    double premium = 0.0;
};

// Index of the expected-utility-maximising plan; ties break toward the
// lowest co-payment rate (highest coverage).
inline std::size_t choose_plan(const AgentPreferences& prefs, const std::vector<PlanQuote>& menu) {
    if (menu.empty()) throw std::invalid_argument("choose_plan: empty menu");
    bool any = false;
    std::size_t best = 0;
    double best_utility = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < menu.size(); ++i) {
        if (!(menu[i].copay_rate >= 0.0 && menu[i].copay_rate <= 1.0))
            throw std::invalid_argument("choose_plan: co-payment rate outside [0,1]");
        double utility;
        try {
            utility = expected_period1_utility(menu[i].copay_rate, prefs,
                                               LinearTariff{menu[i].premium, 0.0});
        } catch (const std::domain_error&) {
            continue;  // plan infeasible for this agent
        }
        if (!any || utility > best_utility ||
            (utility == best_utility && menu[i].copay_rate < menu[best].copay_rate)) {
            any = true;
            best = i;
            best_utility = utility;
        }
    }
    if (!any) throw std::runtime_error("choose_plan: all menu entries infeasible");
    return best;
}

}  // namespace dmte::model
