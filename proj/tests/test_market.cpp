#include <catch_amalgamated.hpp>

#include <sstream>

#include "dmte/market.hpp"
#include "dmte/math.hpp"

using namespace dmte;
using namespace dmte::market;

TEST_CASE("out-of-pocket schedule reproduces the statutory cases") {
    REQUIRE(out_of_pocket(0.0, 300) == 0.0);
    REQUIRE(out_of_pocket(1300.0, 300) == Catch::Approx(400.0).margin(1e-12));
    REQUIRE(out_of_pocket(100000.0, 300) == Catch::Approx(1000.0).margin(1e-12));
    REQUIRE_THROWS_AS(out_of_pocket(-1.0, 300), std::invalid_argument);
    REQUIRE_THROWS_AS(out_of_pocket(100.0, 400), std::invalid_argument);
}

TEST_CASE("out-of-pocket cap, monotonicity and Lipschitz bound") {
    Rng rng(11);
    for (int i = 0; i < 10000; ++i) {
        // centime-aligned spends keep the arithmetic exact
        const double spend = from_rappen(static_cast<std::int64_t>(rng.uniform_int(2000000)));
        for (const int d : kDeductibleMenu) {
            const double oop = out_of_pocket(spend, d);
            REQUIRE(oop <= d + 700.0);
            REQUIRE(oop >= 0.0);
        }
    }
    for (int i = 0; i < 2000; ++i) {
        const double a = from_rappen(static_cast<std::int64_t>(rng.uniform_int(1000000)));
        const double b = a + from_rappen(static_cast<std::int64_t>(rng.uniform_int(100000)));
        for (const int d : kDeductibleMenu) {
            const double lo = out_of_pocket(a, d);
            const double hi = out_of_pocket(b, d);
            REQUIRE(hi >= lo);                      // non-decreasing
            REQUIRE(hi - lo <= (b - a) + 1e-9);     // 1-Lipschitz
        }
        // non-decreasing in the deductible at fixed spend
        double prev = out_of_pocket(a, 300);
        for (const int d : {500, 1000, 1500, 2000, 2500}) {
            const double oop = out_of_pocket(a, d);
            REQUIRE(oop >= prev - 1e-12);
            prev = oop;
        }
    }
}

TEST_CASE("marginal price bands") {
    REQUIRE(marginal_price(100.0, 300) == 1.0);
    REQUIRE(marginal_price(2000.0, 300) == Catch::Approx(0.1));
    REQUIRE(marginal_price(10000.0, 300) == 0.0);
    REQUIRE(marginal_price(7299.99, 300) == Catch::Approx(0.1));
    REQUIRE(marginal_price(7300.0, 300) == 0.0);
}

TEST_CASE("marginal price equals the derivative away from kinks") {
    Rng rng(5);
    const double h = 1e-3;
    for (int i = 0; i < 4000; ++i) {
        const double spend = 12000.0 * rng.uniform01();
        for (const int d : kDeductibleMenu) {
            const double cap_edge = d + 7000.0;
            if (std::abs(spend - d) < 2 * h || std::abs(spend - cap_edge) < 2 * h) continue;
            if (spend < h) continue;
            const double deriv =
                (out_of_pocket(spend + h, d) - out_of_pocket(spend - h, d)) / (2 * h);
            REQUIRE(std::abs(deriv - marginal_price(spend, d)) < 1e-9);
        }
    }
}

TEST_CASE("average market premium") {
    PremiumTable table;
    table.add_row({canton_index("ZH"), AgeGroup::Adult, 300, PlanType::Free, "a", to_rappen(400.0)});
    REQUIRE(table.average(canton_index("ZH"), AgeGroup::Adult, 300, PlanType::Free) ==
            Catch::Approx(400.0));
    table.add_row({canton_index("ZH"), AgeGroup::Adult, 300, PlanType::Free, "b", to_rappen(500.0)});
    REQUIRE(table.average(canton_index("ZH"), AgeGroup::Adult, 300, PlanType::Free) ==
            Catch::Approx(450.0));
    REQUIRE_THROWS_AS(table.average(canton_index("BE"), AgeGroup::Adult, 300, PlanType::Free),
                      std::runtime_error);

    // permutation invariance: same rows in reverse order, bit-identical mean
    PremiumTable reversed;
    reversed.add_row({canton_index("ZH"), AgeGroup::Adult, 300, PlanType::Free, "b", to_rappen(500.0)});
    reversed.add_row({canton_index("ZH"), AgeGroup::Adult, 300, PlanType::Free, "a", to_rappen(400.0)});
    REQUIRE(table.average(canton_index("ZH"), AgeGroup::Adult, 300, PlanType::Free) ==
            reversed.average(canton_index("ZH"), AgeGroup::Adult, 300, PlanType::Free));

    PremiumTable odd;
    odd.add_row({canton_index("GE"), AgeGroup::Adult, 500, PlanType::Managed, "x", to_rappen(333.33)});
    odd.add_row({canton_index("GE"), AgeGroup::Adult, 500, PlanType::Managed, "y", to_rappen(333.34)});
    odd.add_row({canton_index("GE"), AgeGroup::Adult, 500, PlanType::Managed, "z", to_rappen(333.35)});
    REQUIRE(odd.average(canton_index("GE"), AgeGroup::Adult, 500, PlanType::Managed) ==
            Catch::Approx(333.34));
}

TEST_CASE("premium csv ingestion") {
    const char* good =
        "canton,age_group,deductible,plan_type,insurer,monthly_premium\n"
        "ZH,adult,300,free,assura,412.50\n"
        "ZH,adult,300,free,css,398.10\n"
        "BE,young_adult,2500,managed,kpt,199.90\n";
    std::istringstream in(good);
    const PremiumTable table = ingest_premium_csv(in, "fixture");
    REQUIRE(table.size() == 3);
    REQUIRE(table.average(canton_index("ZH"), AgeGroup::Adult, 300, PlanType::Free) ==
            Catch::Approx(405.30));

    std::istringstream bad(
        "canton,age_group,deductible,plan_type,insurer,monthly_premium\n"
        "ZH,adult,300,free,assura,412.50\n"
        "ZH,adult,300,free,css,abc\n");
    REQUIRE_THROWS_WITH(ingest_premium_csv(bad, "fixture"),
                        Catch::Matchers::ContainsSubstring("fixture:3"));

    std::istringstream dup(
        "canton,age_group,deductible,plan_type,insurer,monthly_premium\n"
        "ZH,adult,300,free,assura,412.50\n"
        "ZH,adult,300,free,assura,500.00\n");
    REQUIRE_THROWS_WITH(ingest_premium_csv(dup, "fixture"),
                        Catch::Matchers::ContainsSubstring("duplicate"));

    std::istringstream unknown(
        "canton,age_group,deductible,plan_type,insurer,monthly_premium\n"
        "XX,adult,300,free,assura,412.50\n");
    REQUIRE_THROWS_WITH(ingest_premium_csv(unknown, "fixture"),
                        Catch::Matchers::ContainsSubstring("canton"));
}

TEST_CASE("plan spec validation") {
    PlanSpec spec{300, PlanType::Free, AgeGroup::Adult, canton_index("VD")};
    REQUIRE_NOTHROW(spec.validate());
    spec.deductible = 900;
    REQUIRE_THROWS_AS(spec.validate(), std::invalid_argument);
}
