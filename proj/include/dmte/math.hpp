#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <random>
#include <stdexcept>
#include <thread>
#include <vector>

// Standard-normal utilities and a deterministic RNG.
//
// All stochastic code in this library draws through Rng below, which maps
// mt19937_64 output to variates with fixed, documented transforms. The
// std::<distribution> classes are implementation-defined and would break the
// byte-identical reproducibility contract.

namespace dmte {

inline constexpr double kInvSqrt2Pi = 0.3989422804014326779399461;

inline double norm_pdf(double x) {
    return kInvSqrt2Pi * std::exp(-0.5 * x * x);
}

inline double norm_cdf(double x) {
    return 0.5 * std::erfc(-x * 0.7071067811865475244);
}

// log Phi(x), stable in the far left tail where Phi underflows.
inline double log_norm_cdf(double x) {
    if (x > -30.0) {
        return std::log(norm_cdf(x));
    }
    // Asymptotic expansion: Phi(x) ~ phi(x)/(-x) * (1 - 1/x^2 + 3/x^4)
    const double x2 = x * x;
    return -0.5 * x2 - std::log(-x) - 0.918938533204672741780329736406 // ln sqrt(2 pi)
           + std::log1p(-1.0 / x2 + 3.0 / (x2 * x2));
}

// phi(x)/Phi(x); the hazard of the lower tail. Stable for large -x.
inline double inv_mills_lower(double x) {
    if (x > -30.0) {
        return norm_pdf(x) / norm_cdf(x);
    }
    return -x / (1.0 - 1.0 / (x * x) + 3.0 / (x * x * x * x));
}

// Inverse standard-normal CDF. Acklam's rational approximation polished with
// one Halley step; accurate to full double precision on (0,1).
inline double norm_quantile(double p) {
    if (!(p > 0.0 && p < 1.0)) {
        throw std::domain_error("norm_quantile: p must lie strictly inside (0,1)");
    }
    static constexpr double a[6] = {-3.969683028665376e+01, 2.209460984245205e+02,
                                    -2.759285104469687e+02, 1.383577518672690e+02,
                                    -3.066479806614716e+01, 2.506628277459239e+00};
    static constexpr double b[5] = {-5.447609879822406e+01, 1.615858368580409e+02,
                                    -1.556989798598866e+02, 6.680131188771972e+01,
                                    -1.328068155288572e+01};
    static constexpr double c[6] = {-7.784894002430293e-03, -3.223964580411365e-01,
                                    -2.400758277161838e+00, -2.549732539343734e+00,
                                    4.374664141464968e+00,  2.938163982698783e+00};
    static constexpr double d[4] = {7.784695709041462e-03, 3.224671290700398e-01,
                                    2.445134137142996e+00, 3.754408661907416e+00};
    constexpr double p_low = 0.02425;

    double x;
    if (p < p_low) {
        const double q = std::sqrt(-2.0 * std::log(p));
        x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
            ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
    } else if (p <= 1.0 - p_low) {
        const double q = p - 0.5;
        const double r = q * q;
        x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
            (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
    } else {
        const double q = std::sqrt(-2.0 * std::log1p(-p));
        x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
            ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
    }
    // Halley refinement against the erfc-based CDF.
    const double e = norm_cdf(x) - p;
    const double u = e / norm_pdf(x);
    x -= u / (1.0 + 0.5 * x * u);
    return x;
}

// Deterministic random source. One fixed mapping per variate kind.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : gen_(seed) {}

    std::uint64_t next() { return gen_(); }

    // Uniform on the open interval (0,1): (k + 0.5) / 2^53.
    double uniform01() {
        return (static_cast<double>(gen_() >> 11) + 0.5) * (1.0 / 9007199254740992.0);
    }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

    // Standard normal by inversion; deterministic given the stream.
    double normal() { return norm_quantile(uniform01()); }

    double normal(double mean, double sd) { return mean + sd * normal(); }

    bool bernoulli(double p) { return uniform01() < p; }

    // Uniform integer in [0, n) via 128-bit multiply-shift.
    std::uint64_t uniform_int(std::uint64_t n) {
        return static_cast<std::uint64_t>(
            (static_cast<unsigned __int128>(gen_()) * n) >> 64);
    }

    // Poisson by CDF inversion; fine for the small means used here.
    int poisson(double mean) {
        if (mean < 0.0) throw std::invalid_argument("poisson: negative mean");
        if (mean == 0.0) return 0;
        const double u = uniform01();
        double term = std::exp(-mean);
        double cum = term;
        int k = 0;
        const int k_max = static_cast<int>(20.0 + 10.0 * mean);
        while (u > cum && k < k_max) {
            ++k;
            term *= mean / k;
            cum += term;
        }
        return k;
    }

private:
    std::mt19937_64 gen_;
};

// Type-7 (linear interpolation) quantile of a sorted sample.
inline double quantile_sorted(const std::vector<double>& sorted, double q) {
    if (sorted.empty()) throw std::invalid_argument("quantile_sorted: empty sample");
    if (q <= 0.0) return sorted.front();
    if (q >= 1.0) return sorted.back();
    const double h = q * (static_cast<double>(sorted.size()) - 1.0);
    const auto lo = static_cast<std::size_t>(h);
    if (lo + 1 >= sorted.size()) return sorted.back();
    const double w = h - static_cast<double>(lo);
    return sorted[lo] * (1.0 - w) + sorted[lo + 1] * w;
}

// Chunked index-parallel loop. Deterministic as long as fn(i) writes only to
// slot i of some preallocated output.
inline void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn) {
    unsigned workers = std::thread::hardware_concurrency();
    if (workers == 0) workers = 1;
    if (n < 2 * workers || workers == 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::vector<std::thread> pool;
    pool.reserve(workers);
    const std::size_t chunk = (n + workers - 1) / workers;
    for (unsigned w = 0; w < workers; ++w) {
        const std::size_t lo = w * chunk;
        const std::size_t hi = std::min(n, lo + chunk);
        if (lo >= hi) break;
        pool.emplace_back([lo, hi, &fn] {
            for (std::size_t i = lo; i < hi; ++i) fn(i);
        });
    }
    for (auto& t : pool) t.join();
}

}  // namespace dmte
