#include <catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "dmte/math.hpp"
#include "dmte/model.hpp"

using namespace dmte;
using namespace dmte::model;

namespace {

AgentPreferences prefs(double omega, double lh, double ll, double p, double y) {
    AgentPreferences a;
    a.omega = omega;
    a.lambda_high = lh;
    a.lambda_low = ll;
    a.p_high = p;
    a.income = y;
    return a;
}

// Grid stationary point of the period-1 objective: the c where the central
// difference derivative changes sign. Step 1e-4.
double grid_stationary_point(const AgentPreferences& a, const LinearTariff& t) {
    const double step = 1e-4;
    double prev_c = step;
    double prev_d = foc_residual(prev_c, a, t);
    for (double c = 2 * step; c < 1.0 - step; c += step) {
        const double d = foc_residual(c, a, t);
        if ((prev_d <= 0.0 && d >= 0.0) || (prev_d >= 0.0 && d <= 0.0)) {
            return 0.5 * (prev_c + c);
        }
        prev_c = c;
        prev_d = d;
    }
    return -1.0;  // no interior stationary point
}

}  // namespace

TEST_CASE("health utility evaluates the quadratic benefit") {
    REQUIRE(health_utility(5.0, 5.0, 2.0) == 0.0);
    REQUIRE(health_utility(7.0, 5.0, 2.0) == Catch::Approx(1.0));
    REQUIRE_THROWS_AS(health_utility(1.0, 1.0, 0.0), std::invalid_argument);

    // argmax over a fine m grid sits at lambda + omega
    for (const auto& [lambda, omega] : std::vector<std::pair<double, double>>{
             {0.0, 1.0}, {2.5, 0.7}, {10.0, 4.0}}) {
        double best_m = 0.0, best = -1e300;
        for (double m = 0.0; m <= lambda + 3.0 * omega; m += 1e-3) {
            const double u = health_utility(m, lambda, omega);
            if (u > best) {
                best = u;
                best_m = m;
            }
        }
        REQUIRE(best_m == Catch::Approx(lambda + omega).margin(2e-3));
    }
}

TEST_CASE("money utility evaluates income minus cost sharing and premium") {
    REQUIRE(money_utility(0.0, 0.0, {0.0, 0.0}, 10.0) == 10.0);
    REQUIRE(money_utility(4.0, 0.5, {1.0, 2.0}, 10.0) == Catch::Approx(6.0));
    for (double m : {0.0, 1.0, 7.3}) {
        REQUIRE(money_utility(m, 1.0, {2.0, 0.0}, 10.0) == Catch::Approx(10.0 - m - 2.0));
    }
    REQUIRE_THROWS_AS(money_utility(1.0, 1.5, {0.0, 0.0}, 10.0), std::invalid_argument);
}

TEST_CASE("period-2 utility is additively separable and maximised at m*") {
    const auto a = prefs(2.0, 5.0, 1.0, 0.4, 50.0);
    const LinearTariff t{1.0, -0.5};
    const auto snap = period2_utility(3.0, a, 5.0, 0.3, t);
    REQUIRE(snap.total == Catch::Approx(snap.health_component + snap.money_component));

    const double c = 0.3;
    const double m_star = optimal_utilization(a.omega, c, 5.0);
    double best_m = 0.0, best = -1e300;
    for (double m = 0.0; m <= 12.0; m += 1e-3) {
        const double u = period2_utility(m, a, 5.0, c, t).total;
        if (u > best) {
            best = u;
            best_m = m;
        }
    }
    REQUIRE(best_m == Catch::Approx(m_star).margin(2e-3));
}

TEST_CASE("optimal utilization follows the first-order rule") {
    REQUIRE(optimal_utilization(3.0, 1.0, 2.0) == Catch::Approx(2.0));
    REQUIRE(optimal_utilization(2.0, 0.5, 1.0) == Catch::Approx(2.0));
    REQUIRE(optimal_utilization(3.0, 0.0, 2.0) == Catch::Approx(5.0));
    // small omega with free care: m* approaches the realized need
    REQUIRE(optimal_utilization(1e-9, 0.0, 4.0) == Catch::Approx(4.0).margin(1e-8));
}

TEST_CASE("optimal utilization monotonicity") {
    Rng rng(99);
    for (int i = 0; i < 300; ++i) {
        const double omega = 0.2 + 5.0 * rng.uniform01();
        const double lambda = 4.0 * rng.uniform01();
        const double c = 0.9 * rng.uniform01();
        const double dc = 0.05;
        const double dw = 0.1;
        REQUIRE(optimal_utilization(omega, c + dc, lambda) < optimal_utilization(omega, c, lambda));
        REQUIRE(optimal_utilization(omega + dw, c, lambda) > optimal_utilization(omega, c, lambda));
        REQUIRE(optimal_utilization(omega, c, lambda + 0.1) >
                optimal_utilization(omega, c, lambda));
    }
}

TEST_CASE("expected period-1 utility degenerate and zero-coverage cases") {
    const LinearTariff t{1.0, 0.5};
    const auto sure_high = prefs(2.0, 3.0, 0.0, 1.0, 30.0);
    const double c = 0.4;
    const double money_high =
        30.0 - c * (2.0 * (1.0 - c) + 3.0) - t.premium(1.0 - c);
    REQUIRE(expected_period1_utility(c, sure_high, t) == Catch::Approx(std::log(money_high)));

    const auto sure_low = prefs(2.0, 3.0, 1.0, 0.0, 30.0);
    const double money_low = 30.0 - c * (2.0 * (1.0 - c) + 1.0) - t.premium(1.0 - c);
    REQUIRE(expected_period1_utility(c, sure_low, t) == Catch::Approx(std::log(money_low)));

    // c = 0: out-of-pocket vanishes, so omega and lambda drop out
    const auto a1 = prefs(2.0, 3.0, 1.0, 0.3, 30.0);
    const auto a2 = prefs(9.0, 8.0, 0.5, 0.9, 30.0);
    REQUIRE(expected_period1_utility(0.0, a1, t) ==
            Catch::Approx(std::log(30.0 - t.premium(1.0))));
    REQUIRE(expected_period1_utility(0.0, a1, t) ==
            Catch::Approx(expected_period1_utility(0.0, a2, t)));

    // bankrupt agent reports a domain error, not NaN
    const auto poor = prefs(2.0, 3.0, 1.0, 0.5, 1.0);
    REQUIRE_THROWS_AS(expected_period1_utility(0.9, poor, LinearTariff{5.0, 0.0}),
                      std::domain_error);
}

TEST_CASE("closed-form co-payment special cases") {
    // E[lambda] = 0 with a flat tariff: c* = 1/2 exactly
    const auto zero_need = prefs(2.0, 1.0, 0.0, 0.0, 30.0);
    const auto sol = optimal_copayment(zero_need, {1.0, 0.0});
    REQUIRE(sol.value == Catch::Approx(0.5).margin(1e-12));
    REQUIRE(sol.closed_form == Catch::Approx(0.5));
    REQUIRE_FALSE(sol.boundary);

    // omega -> infinity pins c* at 1/2 for a fixed bracket; check the closed
    // form in the limit and the exact solution at a large feasible omega
    const auto rigid = prefs(1e9, 2.0, 1.0, 0.5, 30.0);
    REQUIRE(copayment_closed_form(rigid, {1.0, -1.0}) == Catch::Approx(0.5).margin(1e-6));
    const auto large = prefs(100.0, 2.0, 1.0, 0.5, 10000.0);
    REQUIRE(optimal_copayment(large, {1.0, -1.0}).value == Catch::Approx(0.5).margin(0.02));

    // omega=2, E[lambda]=1, slope=-1: closed form = 1/2 + (1 + 1)/4 = 1
    const auto unit_need = prefs(2.0, 1.0, 0.0, 1.0, 30.0);
    const auto at_one = optimal_copayment(unit_need, {2.0, -1.0});
    REQUIRE(at_one.closed_form == Catch::Approx(1.0));
    REQUIRE(at_one.value == Catch::Approx(1.0).margin(1e-9));
    // the same agent under a steeper slope is clamped at the boundary
    const auto clamped = optimal_copayment(unit_need, {3.0, -2.0});
    REQUIRE(clamped.boundary);
    REQUIRE(clamped.value == 1.0);
}

TEST_CASE("optimal co-payment solves the first-order condition") {
    Rng rng(2024);
    int interior = 0;
    for (int i = 0; i < 400; ++i) {
        const double omega = 0.5 + 4.0 * rng.uniform01();
        const double ll = 0.5 * rng.uniform01();
        const double lh = ll + 0.2 + 2.0 * rng.uniform01();
        const double p = rng.uniform01();
        const auto a = prefs(omega, lh, ll, p, 25.0 + 20.0 * rng.uniform01());
        const LinearTariff t{1.0 + rng.uniform01(), -1.5 + 3.0 * rng.uniform01()};
        CopaymentSolution sol;
        try {
            sol = optimal_copayment(a, t);
        } catch (const std::domain_error&) {
            continue;
        }
        if (sol.boundary) continue;
        ++interior;
        REQUIRE(std::abs(foc_residual(sol.value, a, t)) < 1e-4);
        // grid oracle: the sign change of the numeric derivative brackets c*
        const double from_grid = grid_stationary_point(a, t);
        if (from_grid > 0.0) {
            REQUIRE(sol.value == Catch::Approx(from_grid).margin(1.5e-4));
        }
        // symmetric perturbation flips the residual sign around c*
        if (sol.value > 0.01 && sol.value < 0.99) {
            const double left = foc_residual(sol.value - 5e-3, a, t);
            const double right = foc_residual(sol.value + 5e-3, a, t);
            REQUIRE(left * right <= 0.0);
        }
    }
    REQUIRE(interior > 100);
}

TEST_CASE("residual at a clamped boundary points toward the unclamped root") {
    const auto a = prefs(2.0, 1.0, 0.0, 1.0, 30.0);
    const auto clamped = optimal_copayment(a, {3.0, -2.0});  // unclamped root above 1
    REQUIRE(clamped.boundary);
    REQUIRE(std::abs(foc_residual(clamped.value, a, {3.0, -2.0})) > 1e-6);
    REQUIRE(foc_residual(clamped.value, a, {3.0, -2.0}) < 0.0);
}

TEST_CASE("comparative statics of the co-payment rule") {
    Rng rng(7);
    for (int i = 0; i < 200; ++i) {
        const double ll = 0.5 * rng.uniform01();
        const double lh = ll + 0.2 + 1.5 * rng.uniform01();
        const double p = rng.uniform01();
        const double slope = -1.0 + 1.5 * rng.uniform01();
        const double omega = 1.0 + 3.0 * rng.uniform01();
        const auto a = prefs(omega, lh, ll, p, 40.0);
        const double bracket = a.expected_need() - slope;
        if (bracket <= 0.05) continue;
        const LinearTariff t{1.5, slope};

        auto lo = optimal_copayment(a, t);
        auto hi = optimal_copayment(prefs(omega * 1.3, lh, ll, p, 40.0), t);
        if (!lo.boundary && !hi.boundary) {
            REQUIRE(hi.value < lo.value);  // more moral hazard, more coverage
        }

        // higher expected need shifts c* upward
        auto shifted = optimal_copayment(prefs(omega, lh + 0.3, ll + 0.3, p, 40.0), t);
        if (!lo.boundary && !shifted.boundary) {
            REQUIRE(shifted.value > lo.value);
        }
    }
}

TEST_CASE("plan choice maximises expected utility") {
    // lambda above omega keeps utility decreasing in the co-payment rate at
    // a fixed premium, which is the regime where dominance is meaningful
    const auto a = prefs(1.0, 6.0, 3.0, 0.5, 60.0);

    REQUIRE(choose_plan(a, {{0.5, 2.0}}) == 0);

    std::vector<PlanQuote> menu{{0.1, 9.0}, {0.3, 6.0}, {0.5, 4.0},
                                {0.7, 2.5}, {0.9, 1.5}, {1.0, 1.0}};
    const auto idx = choose_plan(a, menu);
    // exhaustive oracle straight from the objective
    std::size_t best = 0;
    double best_u = -1e300;
    for (std::size_t j = 0; j < menu.size(); ++j) {
        const double u =
            expected_period1_utility(menu[j].copay_rate, a, LinearTariff{menu[j].premium, 0.0});
        if (u > best_u || (u == best_u && menu[j].copay_rate < menu[best].copay_rate)) {
            best_u = u;
            best = j;
        }
    }
    REQUIRE(idx == best);

    // adding a strictly dominated entry (same premium, higher co-payment)
    // never changes the choice
    auto with_dominated = menu;
    with_dominated.push_back({menu[idx].copay_rate + 0.05, menu[idx].premium});
    REQUIRE(choose_plan(a, with_dominated) == idx);
    // and the dominated entry itself is never selected
    std::vector<PlanQuote> pair{{0.4, 3.0}, {0.6, 3.0}};
    REQUIRE(choose_plan(a, pair) == 0);

    REQUIRE_THROWS_AS(choose_plan(a, {}), std::invalid_argument);
    const auto broke = prefs(1.0, 6.0, 3.0, 0.5, 2.0);
    REQUIRE_THROWS_AS(choose_plan(broke, {{1.0, 50.0}}), std::runtime_error);
}

TEST_CASE("tie-break prefers the lower co-payment") {
    const auto a = prefs(1.0, 6.0, 3.0, 0.5, 60.0);
    std::vector<PlanQuote> twins{{0.5, 2.0}, {0.5, 2.0}};
    REQUIRE(choose_plan(a, twins) == 0);
}
