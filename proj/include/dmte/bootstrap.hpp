#pragma once

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <functional>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "dmte/math.hpp"
#include "dmte/mte.hpp"

// Cluster bootstrap: resample whole clusters with replacement, rerun the
// full two-stage estimator, and report percentile confidence bounds.

namespace dmte::econ {

// Named statistics produced by one estimator run. `present` lets the
// semiparametric estimator drop percentiles that fall outside a replicate's
// common support instead of extrapolating.
struct StatVector {
    std::vector<std::string> names;
    std::vector<double> values;
    std::vector<char> present;

    void add(const std::string& name, double value, bool is_present = true) {
        names.push_back(name);
        values.push_back(value);
        present.push_back(is_present ? 1 : 0);
    }
};

struct BootstrapCi {
    std::string name;
    double lo = 0.0;
    double hi = 0.0;
    int n_used = 0;
    bool present = false;
};

struct BootstrapResult {
    int requested = 0;
    int completed = 0;
    int failed = 0;
    std::vector<BootstrapCi> ci;

    const BootstrapCi* find(const std::string& name) const {
        for (const auto& c : ci) {
            if (c.name == name) return &c;
        }
        return nullptr;
    }
};

using EstimatorFn = std::function<StatVector(const EstimationInput&)>;

namespace detail {

inline EstimationInput resample_clusters(const EstimationInput& input,
                                         const std::vector<std::vector<long>>& groups, Rng& rng) {
    const std::size_t g_count = groups.size();
    std::vector<long> rows;
    std::vector<int> new_cluster;
    for (std::size_t draw = 0; draw < g_count; ++draw) {
        const auto pick = static_cast<std::size_t>(rng.uniform_int(g_count));
        for (const long i : groups[pick]) {
            rows.push_back(i);
            new_cluster.push_back(static_cast<int>(draw));
        }
    }
    EstimationInput out;
    const auto m = static_cast<long>(rows.size());
    out.y.resize(m);
    out.x.resize(m, input.x.cols());
    out.z_excl.resize(m, input.z_excl.cols());
    out.d.resize(m);
    out.cluster = std::move(new_cluster);
    out.x_names = input.x_names;
    out.z_names = input.z_names;
    for (long r = 0; r < m; ++r) {
        const long i = rows[static_cast<std::size_t>(r)];
        out.y[r] = input.y[i];
        out.x.row(r) = input.x.row(i);
        out.z_excl.row(r) = input.z_excl.row(i);
        out.d[r] = input.d[i];
    }
    return out;
}

}  // namespace detail

inline BootstrapResult cluster_bootstrap(const EstimationInput& input,
                                         const EstimatorFn& estimator, int reps,
                                         std::uint64_t seed) {
    input.validate();
    if (reps < 1) throw std::invalid_argument("cluster_bootstrap: reps must be >= 1");

    std::map<int, std::vector<long>> by_id;
    for (long i = 0; i < static_cast<long>(input.cluster.size()); ++i)
        by_id[input.cluster[static_cast<std::size_t>(i)]].push_back(i);
    if (by_id.size() < 2)
        throw std::invalid_argument("cluster_bootstrap: need at least two clusters");
    std::vector<std::vector<long>> groups;
    groups.reserve(by_id.size());
    for (auto& [id, rows] : by_id) groups.push_back(std::move(rows));

    std::vector<StatVector> stats(static_cast<std::size_t>(reps));
    std::vector<char> ok(static_cast<std::size_t>(reps), 0);
    parallel_for(static_cast<std::size_t>(reps), [&](std::size_t r) {
        Rng rng(seed + static_cast<std::uint64_t>(r));
        try {
            const EstimationInput sample = detail::resample_clusters(input, groups, rng);
            stats[r] = estimator(sample);
            ok[r] = 1;
        } catch (const std::exception&) {
            ok[r] = 0;
        }
    });

    BootstrapResult result;
    result.requested = reps;
    for (std::size_t r = 0; r < stats.size(); ++r) {
        if (ok[r]) {
            ++result.completed;
        } else {
            ++result.failed;
        }
    }
    if (result.failed * 2 > reps)
        throw std::runtime_error("cluster_bootstrap: more than half of the replicates failed");

    // Union of statistic names, in first-seen order.
    std::vector<std::string> names;
    for (std::size_t r = 0; r < stats.size(); ++r) {
        if (!ok[r]) continue;
        for (const auto& name : stats[r].names) {
            if (std::find(names.begin(), names.end(), name) == names.end()) names.push_back(name);
        }
    }
    for (const auto& name : names) {
        BootstrapCi ci;
        ci.name = name;
        std::vector<double> draws;
        for (std::size_t r = 0; r < stats.size(); ++r) {
            if (!ok[r]) continue;
            for (std::size_t j = 0; j < stats[r].names.size(); ++j) {
                if (stats[r].names[j] == name && stats[r].present[j]) {
                    draws.push_back(stats[r].values[j]);
                    break;
                }
            }
        }
        ci.n_used = static_cast<int>(draws.size());
        if (draws.size() >= 2) {
            std::sort(draws.begin(), draws.end());
            ci.lo = quantile_sorted(draws, 0.025);
            ci.hi = quantile_sorted(draws, 0.975);
            ci.present = true;
        }
        result.ci.push_back(ci);
    }
    return result;
}

// The statistics reported for an MTE fit: the percentile grid, the ATE, the
// selection-covariance gap when parametric, and the first-stage instrument
// coefficients.
inline StatVector mte_stat_vector(const MteFit& fit) {
    StatVector stats;
    for (const auto& entry : fit.percentiles) {
        char buf[32];
        std::snprintf(buf, sizeof(buf), "mte_u%.2f", entry.u);
        stats.add(buf, entry.present ? entry.estimate : 0.0, entry.present);
    }
    stats.add("ate", fit.ate);
    if (fit.kind == MteFit::Kind::ParametricNormal) {
        stats.add("cov_gap", fit.cov_gap());
        stats.add("sigma1v", fit.sigma1v);
        stats.add("sigma0v", fit.sigma0v);
    }
    for (std::size_t j = 0; j < fit.first_stage_names.size(); ++j) {
        stats.add("fs_" + fit.first_stage_names[j], fit.first_stage.coef[static_cast<long>(j)]);
    }
    return stats;
}

}  // namespace dmte::econ
