#include <catch_amalgamated.hpp>

#include <cmath>

#include "dmte/math.hpp"

using namespace dmte;

namespace {

// Independent Phi via the Taylor series around 0 (Abramowitz & Stegun
// 26.2.10): Phi(x) = 1/2 + phi(x) * sum x^(2n+1) / (1*3*...*(2n+1)).
double norm_cdf_series(double x) {
    if (x < -8.0) return 1.0 - norm_cdf_series(-x);
    if (x > 8.0) {
        // Far tail: continued-fraction-free fallback through symmetry is
        // enough for the comparison range used in tests.
        return 1.0 - norm_cdf_series(-x);
    }
    double term = x;
    double sum = x;
    double odd = 1.0;
    for (int n = 1; n < 300; ++n) {
        odd += 2.0;
        term *= x * x / odd;
        sum += term;
        if (std::abs(term) < 1e-18 * std::abs(sum)) break;
    }
    return 0.5 + norm_pdf(x) * sum;
}

}  // namespace

TEST_CASE("normal cdf matches the series oracle") {
    for (double x = -6.0; x <= 6.0; x += 0.0917) {
        REQUIRE(norm_cdf(x) == Catch::Approx(norm_cdf_series(x)).margin(1e-12));
    }
    REQUIRE(norm_cdf(0.0) == Catch::Approx(0.5).margin(1e-16));
}

TEST_CASE("normal quantile inverts the cdf") {
    for (double p = 1e-9; p < 1.0; p = p < 0.001 ? p * 3.7 : p + 0.0313) {
        const double x = norm_quantile(p);
        REQUIRE(norm_cdf(x) == Catch::Approx(p).epsilon(1e-10));
    }
    REQUIRE(norm_quantile(0.5) == Catch::Approx(0.0).margin(1e-15));
    REQUIRE_THROWS_AS(norm_quantile(0.0), std::domain_error);
    REQUIRE_THROWS_AS(norm_quantile(1.0), std::domain_error);
}

TEST_CASE("quantile integrates to zero") {
    // trapezoid on a fine grid; the integrand is odd around 0.5
    const int n = 200000;
    double sum = 0.0;
    for (int i = 1; i < n; ++i) {
        sum += norm_quantile(static_cast<double>(i) / n);
    }
    REQUIRE(std::abs(sum / n) < 1e-6);
}

TEST_CASE("log_norm_cdf is continuous across the tail switch") {
    const double a = log_norm_cdf(-30.0 + 1e-9);
    const double b = log_norm_cdf(-30.0 - 1e-9);
    REQUIRE(std::abs(a - b) < 1e-6);
    REQUIRE(log_norm_cdf(0.0) == Catch::Approx(std::log(0.5)));
}

TEST_CASE("rng streams are deterministic and in range") {
    Rng a(42), b(42);
    for (int i = 0; i < 1000; ++i) {
        const double ua = a.uniform01();
        REQUIRE(ua == b.uniform01());
        REQUIRE(ua > 0.0);
        REQUIRE(ua < 1.0);
    }
    Rng c(7);
    for (int i = 0; i < 1000; ++i) {
        const auto v = c.uniform_int(26);
        REQUIRE(v < 26);
    }
}

TEST_CASE("poisson mean is about right") {
    Rng rng(123);
    const double mean = 3.7;
    double sum = 0.0;
    const int n = 200000;
    for (int i = 0; i < n; ++i) sum += rng.poisson(mean);
    REQUIRE(sum / n == Catch::Approx(mean).margin(0.05));
}

TEST_CASE("quantile_sorted interpolates") {
    std::vector<double> v{1.0, 2.0, 3.0, 4.0};
    REQUIRE(quantile_sorted(v, 0.0) == 1.0);
    REQUIRE(quantile_sorted(v, 1.0) == 4.0);
    REQUIRE(quantile_sorted(v, 0.5) == Catch::Approx(2.5));
}
