#pragma once

#include <cstdint>
#include <fstream>
#include <iomanip>
#include <optional>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "dmte/bootstrap.hpp"
#include "dmte/csv.hpp"
#include "dmte/mte.hpp"
#include "dmte/pipeline.hpp"

// Report bundle: the percentile table, first-stage coefficients, support
// summary and run metadata, serialized as versioned JSON plus plot-ready
// CSV files.

namespace dmte::report {

inline constexpr int kSchemaVersion = 1;
inline constexpr const char* kToolVersion = "0.1.0";

struct CiValue {
    double estimate = 0.0;
    bool present = true;
    std::optional<double> ci_lo;
    std::optional<double> ci_hi;
};

struct ReportBundle {
    int schema_version = kSchemaVersion;
    std::string tool_version = kToolVersion;
    std::string estimator;  // "normal" | "semipar"
    std::string treatment;  // "lowest" | "highest"
    std::uint64_t seed = 0;
    std::string config_hash;
    int n_obs = 0;
    int n_clusters = 0;
    int bootstrap_requested = 0;
    int bootstrap_completed = 0;
    int bootstrap_failed = 0;
    double bandwidth = 0.0;

    std::vector<std::string> first_stage_names;
    std::vector<CiValue> first_stage;

    double support_lo = 0.0;
    double support_hi = 0.0;
    double support_bin_width = 0.01;
    int support_min_count = 1;

    std::vector<std::string> x_names;
    std::vector<double> x_bar;

    std::optional<double> sigma1v;
    std::optional<double> sigma0v;

    std::vector<double> percentile_u;
    std::vector<CiValue> percentiles;
    std::vector<bool> percentile_in_support;
    CiValue ate;

    std::vector<double> curve_u;
    std::vector<CiValue> curve;
};

namespace detail {

inline std::string stat_name(const char* prefix, double u) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%s%.2f", prefix, u);
    return buf;
}

inline void attach_ci(CiValue& value, const econ::BootstrapResult* boot, const std::string& name) {
    if (!boot) return;
    const econ::BootstrapCi* ci = boot->find(name);
    if (ci && ci->present) {
        value.ci_lo = ci->lo;
        value.ci_hi = ci->hi;
    }
}

}  // namespace detail

// Curve statistics on the percent grid; reused for bootstrap bands.
inline econ::StatVector curve_stat_vector(const econ::MteFit& fit) {
    econ::StatVector stats = econ::mte_stat_vector(fit);
    for (int step = 1; step < 100; ++step) {
        const double u = 0.01 * step;
        const std::string name = detail::stat_name("curve_u", u);
        if (fit.kind == econ::MteFit::Kind::ParametricNormal) {
            stats.add(name, fit.mte_at(u));
        } else {
            const bool in_support = fit.support.contains(u);
            stats.add(name, in_support ? fit.mte_at(u) : 0.0, in_support);
        }
    }
    return stats;
}

inline ReportBundle make_bundle(const econ::MteFit& fit, const econ::BootstrapResult* boot,
                                const std::string& treatment, std::uint64_t seed,
                                const std::string& config_hash) {
    ReportBundle b;
    b.estimator = fit.kind == econ::MteFit::Kind::ParametricNormal ? "normal" : "semipar";
    b.treatment = treatment;
    b.seed = seed;
    b.config_hash = config_hash;
    b.n_obs = fit.n_obs;
    b.n_clusters = fit.n_clusters;
    b.bandwidth = fit.bandwidth_used;
    if (boot) {
        b.bootstrap_requested = boot->requested;
        b.bootstrap_completed = boot->completed;
        b.bootstrap_failed = boot->failed;
    }

    b.first_stage_names = fit.first_stage_names;
    for (std::size_t j = 0; j < fit.first_stage_names.size(); ++j) {
        CiValue v;
        v.estimate = fit.first_stage.coef[static_cast<long>(j)];
        detail::attach_ci(v, boot, "fs_" + fit.first_stage_names[j]);
        b.first_stage.push_back(v);
    }

    b.support_lo = fit.support.p_lo;
    b.support_hi = fit.support.p_hi;
    b.support_bin_width = fit.support.bin_width;
    b.support_min_count = fit.support.min_count;

    for (long j = 0; j < fit.x_bar.size(); ++j) b.x_bar.push_back(fit.x_bar[j]);

    if (fit.kind == econ::MteFit::Kind::ParametricNormal) {
        b.sigma1v = fit.sigma1v;
        b.sigma0v = fit.sigma0v;
    }

    for (const auto& entry : fit.percentiles) {
        CiValue v;
        v.estimate = entry.present ? entry.estimate : 0.0;
        v.present = entry.present;
        detail::attach_ci(v, boot, detail::stat_name("mte_u", entry.u));
        b.percentile_u.push_back(entry.u);
        b.percentiles.push_back(v);
        b.percentile_in_support.push_back(entry.in_support);
    }
    b.ate.estimate = fit.ate;
    detail::attach_ci(b.ate, boot, "ate");

    for (int step = 1; step < 100; ++step) {
        const double u = 0.01 * step;
        CiValue v;
        if (fit.kind == econ::MteFit::Kind::ParametricNormal) {
            v.estimate = fit.mte_at(u);
        } else if (fit.support.contains(u)) {
            v.estimate = fit.mte_at(u);
        } else {
            v.present = false;
        }
        if (v.present) detail::attach_ci(v, boot, detail::stat_name("curve_u", u));
        b.curve_u.push_back(u);
        b.curve.push_back(v);
    }
    return b;
}

inline nlohmann::json ci_to_json(const CiValue& v) {
    nlohmann::json j;
    j["present"] = v.present;
    if (v.present) j["estimate"] = v.estimate;
    if (v.ci_lo) j["ci_lo"] = *v.ci_lo;
    if (v.ci_hi) j["ci_hi"] = *v.ci_hi;
    return j;
}

inline CiValue ci_from_json(const nlohmann::json& j) {
    CiValue v;
    v.present = j.value("present", true);
    if (v.present) v.estimate = j.at("estimate").get<double>();
    if (j.contains("ci_lo")) v.ci_lo = j.at("ci_lo").get<double>();
    if (j.contains("ci_hi")) v.ci_hi = j.at("ci_hi").get<double>();
    return v;
}

inline nlohmann::json to_json(const ReportBundle& b) {
    nlohmann::json j;
    j["schema_version"] = b.schema_version;
    j["tool_version"] = b.tool_version;
    j["estimator"] = b.estimator;
    j["treatment"] = b.treatment;
    j["seed"] = b.seed;
    j["config_hash"] = b.config_hash;
    j["n_obs"] = b.n_obs;
    j["n_clusters"] = b.n_clusters;
    j["bootstrap"] = {{"requested", b.bootstrap_requested},
                      {"completed", b.bootstrap_completed},
                      {"failed", b.bootstrap_failed}};
    if (b.estimator == "semipar") j["bandwidth"] = b.bandwidth;
    nlohmann::json fs = nlohmann::json::array();
    for (std::size_t i = 0; i < b.first_stage.size(); ++i) {
        nlohmann::json row = ci_to_json(b.first_stage[i]);
        row["name"] = b.first_stage_names[i];
        fs.push_back(row);
    }
    j["first_stage"] = fs;
    j["support"] = {{"p_lo", b.support_lo},
                    {"p_hi", b.support_hi},
                    {"bin_width", b.support_bin_width},
                    {"min_count", b.support_min_count}};
    j["x_names"] = b.x_names;
    j["x_bar"] = b.x_bar;
    if (b.sigma1v) j["sigma1v"] = *b.sigma1v;
    if (b.sigma0v) j["sigma0v"] = *b.sigma0v;
    nlohmann::json pct = nlohmann::json::array();
    for (std::size_t i = 0; i < b.percentiles.size(); ++i) {
        nlohmann::json row = ci_to_json(b.percentiles[i]);
        row["u"] = b.percentile_u[i];
        row["in_support"] = static_cast<bool>(b.percentile_in_support[i]);
        pct.push_back(row);
    }
    j["percentiles"] = pct;
    j["ate"] = ci_to_json(b.ate);
    nlohmann::json curve = nlohmann::json::array();
    for (std::size_t i = 0; i < b.curve.size(); ++i) {
        nlohmann::json row = ci_to_json(b.curve[i]);
        row["u"] = b.curve_u[i];
        curve.push_back(row);
    }
    j["mte_curve"] = curve;
    return j;
}

inline ReportBundle from_json(const nlohmann::json& j) {
    ReportBundle b;
    b.schema_version = j.at("schema_version").get<int>();
    if (b.schema_version != kSchemaVersion)
        throw std::runtime_error("report schema version mismatch: expected " +
                                 std::to_string(kSchemaVersion) + ", found " +
                                 std::to_string(b.schema_version));
    b.tool_version = j.value("tool_version", "");
    b.estimator = j.at("estimator").get<std::string>();
    b.treatment = j.at("treatment").get<std::string>();
    b.seed = j.at("seed").get<std::uint64_t>();
    b.config_hash = j.value("config_hash", "");
    b.n_obs = j.at("n_obs").get<int>();
    b.n_clusters = j.at("n_clusters").get<int>();
    b.bootstrap_requested = j.at("bootstrap").at("requested").get<int>();
    b.bootstrap_completed = j.at("bootstrap").at("completed").get<int>();
    b.bootstrap_failed = j.at("bootstrap").at("failed").get<int>();
    b.bandwidth = j.value("bandwidth", 0.0);
    for (const auto& row : j.at("first_stage")) {
        b.first_stage_names.push_back(row.at("name").get<std::string>());
        b.first_stage.push_back(ci_from_json(row));
    }
    b.support_lo = j.at("support").at("p_lo").get<double>();
    b.support_hi = j.at("support").at("p_hi").get<double>();
    b.support_bin_width = j.at("support").at("bin_width").get<double>();
    b.support_min_count = j.at("support").at("min_count").get<int>();
    b.x_names = j.value("x_names", std::vector<std::string>{});
    b.x_bar = j.value("x_bar", std::vector<double>{});
    if (j.contains("sigma1v")) b.sigma1v = j.at("sigma1v").get<double>();
    if (j.contains("sigma0v")) b.sigma0v = j.at("sigma0v").get<double>();
    for (const auto& row : j.at("percentiles")) {
        b.percentile_u.push_back(row.at("u").get<double>());
        b.percentiles.push_back(ci_from_json(row));
        b.percentile_in_support.push_back(row.value("in_support", true));
    }
    b.ate = ci_from_json(j.at("ate"));
    for (const auto& row : j.at("mte_curve")) {
        b.curve_u.push_back(row.at("u").get<double>());
        b.curve.push_back(ci_from_json(row));
    }
    return b;
}

inline void write_report_json(const ReportBundle& b, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open for writing: " + path);
    out << to_json(b).dump(2) << "\n";
}

inline ReportBundle read_report_json(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open report: " + path);
    nlohmann::json j;
    in >> j;
    return from_json(j);
}

// u,mte,ci_lo,ci_hi rows on the percent grid; cells stay empty when absent.
inline void write_mte_curve_csv(const ReportBundle& b, std::ostream& out) {
    csv::write_row(out, {"u", "mte", "ci_lo", "ci_hi"});
    for (std::size_t i = 0; i < b.curve.size(); ++i) {
        const CiValue& v = b.curve[i];
        csv::write_row(out, {csv::format_double(b.curve_u[i]),
                             v.present ? csv::format_double(v.estimate) : "",
                             v.ci_lo ? csv::format_double(*v.ci_lo) : "",
                             v.ci_hi ? csv::format_double(*v.ci_hi) : ""});
    }
}

inline void write_support_csv(const econ::SupportRegion& support, std::ostream& out) {
    csv::write_row(out, {"bin_lo", "bin_hi", "n_treated", "n_untreated", "in_support"});
    for (std::size_t b = 0; b < support.treated_counts.size(); ++b) {
        const bool inside = static_cast<int>(b) >= support.first_bin &&
                            static_cast<int>(b) <= support.last_bin;
        csv::write_row(out, {csv::format_double(static_cast<double>(b) * support.bin_width),
                             csv::format_double(static_cast<double>(b + 1) * support.bin_width),
                             std::to_string(support.treated_counts[b]),
                             std::to_string(support.untreated_counts[b]),
                             inside ? "1" : "0"});
    }
}

inline void write_dropped_csv(const pipe::DropLedger& ledger, std::ostream& out) {
    csv::write_row(out, {"stage", "row_number", "person_id", "year", "reason"});
    for (const auto& e : ledger.entries) {
        csv::write_row(out, {e.stage, std::to_string(e.row_number), std::to_string(e.person_id),
                             std::to_string(e.year), e.reason});
    }
}

// Side-by-side percentile table across bundles; absent cells render empty.
inline void render_comparison(const std::vector<ReportBundle>& bundles, std::ostream& text,
                              std::ostream& table_csv) {
    if (bundles.empty()) throw std::invalid_argument("render_comparison: no bundles");
    std::vector<double> grid;
    for (const auto& b : bundles) {
        for (const double u : b.percentile_u) {
            if (std::find(grid.begin(), grid.end(), u) == grid.end()) grid.push_back(u);
        }
    }
    std::sort(grid.begin(), grid.end());

    const auto label = [](const ReportBundle& b) {
        return b.estimator + "/" + b.treatment;
    };
    const auto cell = [](const CiValue& v) {
        if (!v.present) return std::string("--");
        std::ostringstream oss;
        oss << std::fixed << std::setprecision(3) << v.estimate;
        if (v.ci_lo && v.ci_hi)
            oss << " [" << std::setprecision(3) << *v.ci_lo << "," << *v.ci_hi << "]";
        return oss.str();
    };

    std::vector<std::string> header{"statistic"};
    for (const auto& b : bundles) header.push_back(label(b));
    csv::write_row(table_csv, header);

    text << std::left << std::setw(14) << "statistic";
    for (const auto& b : bundles) text << std::setw(28) << label(b);
    text << "\n";

    for (const double u : grid) {
        std::ostringstream name;
        name << "mte_u" << std::fixed << std::setprecision(2) << u;
        std::vector<std::string> row{name.str()};
        text << std::left << std::setw(14) << name.str();
        for (const auto& b : bundles) {
            std::string rendered = "--";
            for (std::size_t i = 0; i < b.percentile_u.size(); ++i) {
                if (std::abs(b.percentile_u[i] - u) < 1e-12) {
                    rendered = cell(b.percentiles[i]);
                    break;
                }
            }
            row.push_back(rendered);
            text << std::setw(28) << rendered;
        }
        text << "\n";
        csv::write_row(table_csv, row);
    }
    std::vector<std::string> ate_row{"ate"};
    text << std::left << std::setw(14) << "ate";
    for (const auto& b : bundles) {
        ate_row.push_back(cell(b.ate));
        text << std::setw(28) << cell(b.ate);
    }
    text << "\n";
    csv::write_row(table_csv, ate_row);
}

}  // namespace dmte::report
