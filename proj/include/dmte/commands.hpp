#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "dmte/bootstrap.hpp"
#include "dmte/config.hpp"
#include "dmte/csv.hpp"
#include "dmte/market.hpp"
#include "dmte/mte.hpp"
#include "dmte/pipeline.hpp"
#include "dmte/report.hpp"
#include "dmte/synthgen.hpp"

// Batch commands behind the CLI: simulate (synthetic panel + oracle),
// estimate (pipeline + MTE fit + bootstrap + report files), mc-study
// (replicated oracle-recovery summary) and report (side-by-side tables).

namespace dmte::cli {

// Errors carry the pipeline stage that produced them.
class StageError : public std::runtime_error {
public:
    StageError(std::string stage, const std::string& message)
        : std::runtime_error("[" + stage + "] " + message), stage_(std::move(stage)) {}
    const std::string& stage() const { return stage_; }

private:
    std::string stage_;
};

template <typename Fn>
auto stage(const std::string& name, Fn&& fn) {
    try {
        return fn();
    } catch (const StageError&) {
        throw;
    } catch (const std::exception& e) {
        throw StageError(name, e.what());
    }
}

// Roy panel -> estimator input, bypassing the CSV pipeline.
inline econ::EstimationInput roy_estimation_input(const synth::SyntheticPanel& panel) {
    econ::EstimationInput input;
    input.y = panel.y;
    input.x = panel.X;
    input.z_excl = panel.Z;
    input.d = panel.treated;
    input.cluster = panel.cluster;
    for (int j = 0; j < panel.X.cols(); ++j) input.x_names.push_back("x" + std::to_string(j));
    input.z_names = {"avg_premium", "suppl_ins"};
    return input;
}

inline cfg::Config load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw StageError("config", "cannot open config file: " + path);
    return stage("config", [&] { return cfg::Config::parse(in, path); });
}

inline std::string hash_hex(std::uint64_t h) {
    char buf[24];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

// ---------------------------------------------------------------------------
// simulate

struct SimulateArgs {
    std::string config_path;
    std::optional<std::uint64_t> seed;  // overrides [dgp] seed
    std::string out_dir = ".";
};

namespace detail {

// The Roy exporter writes the first continuous covariate into income_pm
// (affine map, recorded in the oracle) and a binary covariate into gender.
struct RoyColumnMap {
    struct Slot {
        std::string column;
        double shift = 0.0;
        double scale = 1.0;
    };
    std::vector<Slot> slots;
};

inline RoyColumnMap roy_column_map(const synth::DgpConfig& dgp) {
    RoyColumnMap map;
    bool income_used = false, gender_used = false;
    for (const auto& spec : dgp.covariates) {
        if (spec.kind == synth::CovariateSpec::Kind::Bernoulli && !gender_used) {
            map.slots.push_back({"gender", 0.0, 1.0});
            gender_used = true;
        } else if (!income_used) {
            map.slots.push_back({"income_pm", 60000.0, 15000.0});
            income_used = true;
        } else {
            throw std::runtime_error(
                "roy export maps at most one continuous covariate (income_pm) and one "
                "binary covariate (gender); use mc-study for richer designs");
        }
    }
    return map;
}

inline int clamp_visits(double y) {
    const double v = std::exp(y);
    if (!(v >= 1.0)) return 1;
    if (v > 10000.0) return 10000;
    return static_cast<int>(std::lround(v));
}

inline void write_roy_panel_csv(const synth::SyntheticPanel& panel, const RoyColumnMap& map,
                                std::ostream& out) {
    csv::write_row(out, pipe::kPanelColumns);
    const int n = panel.config.n_agents;
    for (int i = 0; i < n; ++i) {
        double income = 60000.0;
        int gender = 0;
        for (std::size_t j = 0; j < map.slots.size(); ++j) {
            const double x = panel.X(i, static_cast<long>(j));
            if (map.slots[j].column == "gender") {
                gender = x > 0.5 ? 1 : 0;
            } else {
                income = map.slots[j].shift + map.slots[j].scale * x;
            }
        }
        const int visits = clamp_visits(panel.y[i]);
        const int deductible = panel.treated[i] ? 300 : 2500;
        const std::string canton = market::kCantonCodes[panel.cluster[i]];
        const int age = 30 + (i % 40);
        for (const int year : {2018, 2019}) {
            csv::write_row(out, {std::to_string(i + 1), std::to_string(year), canton,
                                 std::to_string(age), std::to_string(gender), "14", "2",
                                 csv::format_double(income), "active", "0",
                                 panel.Z(i, 1) > 0.5 ? "1" : "0", std::to_string(deductible),
                                 "free", std::to_string(visits), "3", "0", "0", "0", "1", "0"});
        }
    }
}

// One premium cell per (canton, adult, deductible, free): two insurers
// straddling the cluster instrument value so the cell mean reproduces it.
inline void write_roy_premium_csv(const synth::SyntheticPanel& panel, std::ostream& out) {
    csv::write_row(out, {"canton", "age_group", "deductible", "plan_type", "insurer",
                         "monthly_premium"});
    std::map<int, double> cluster_premium;
    for (int i = 0; i < panel.config.n_agents; ++i)
        cluster_premium.emplace(panel.cluster[i], panel.Z(i, 0));
    for (const auto& [g, premium] : cluster_premium) {
        const std::string canton = market::kCantonCodes[g];
        for (const int d : market::kDeductibleMenu) {
            csv::write_row(out, {canton, "adult", std::to_string(d), "free", "alpha",
                                 csv::format_double(premium - 10.0)});
            csv::write_row(out, {canton, "adult", std::to_string(d), "free", "beta",
                                 csv::format_double(premium + 10.0)});
        }
    }
}

inline nlohmann::json oracle_json(const synth::MteOracle& oracle, const synth::DgpConfig& dgp,
                                  const RoyColumnMap& map) {
    nlohmann::json j;
    j["kind"] = "roy";
    j["delta_intercept"] = oracle.delta_intercept;
    std::vector<double> db(oracle.delta_beta.data(),
                           oracle.delta_beta.data() + oracle.delta_beta.size());
    j["delta_beta"] = db;
    j["cov_gap"] = oracle.cov_gap;
    const Eigen::VectorXd means = dgp.covariate_means();
    std::vector<double> mv(means.data(), means.data() + means.size());
    j["covariate_means"] = mv;
    nlohmann::json columns = nlohmann::json::array();
    for (std::size_t s = 0; s < map.slots.size(); ++s) {
        columns.push_back({{"column", map.slots[s].column},
                           {"shift", map.slots[s].shift},
                           {"scale", map.slots[s].scale}});
    }
    j["columns"] = columns;
    return j;
}

inline synth::MteOracle oracle_from_json(const nlohmann::json& j) {
    synth::MteOracle oracle;
    oracle.delta_intercept = j.at("delta_intercept").get<double>();
    const auto db = j.at("delta_beta").get<std::vector<double>>();
    oracle.delta_beta =
        Eigen::Map<const Eigen::VectorXd>(db.data(), static_cast<long>(db.size()));
    oracle.cov_gap = j.at("cov_gap").get<double>();
    return oracle;
}

// ---- structural mode ------------------------------------------------------

struct StructuralDgp {
    int n_agents = 0;
    int n_clusters = 26;
    std::uint64_t seed = 0;
    double omega_log_mean = std::log(2500.0);
    double omega_log_sd = 0.7;
    double lambda_ratio = 2.0;     // lambda_high = ratio * omega * exp(noise)
    double lambda_log_sd = 0.3;
    double p_high = 0.35;
    double income = 70000.0;
    double visits_per_chf = 1.0 / 300.0;
    double premium_base_mean = 400.0;  // monthly, deductible 300
    double premium_base_sd = 25.0;

    static StructuralDgp from_config(const cfg::Config& c) {
        StructuralDgp s;
        s.n_agents = static_cast<int>(c.get_int("dgp", "n_agents"));
        s.n_clusters = static_cast<int>(c.get_int("dgp", "n_clusters", 26));
        s.seed = static_cast<std::uint64_t>(c.get_int("dgp", "seed", 0));
        s.omega_log_mean = c.get_double("dgp", "omega_log_mean", s.omega_log_mean);
        s.omega_log_sd = c.get_double("dgp", "omega_log_sd", s.omega_log_sd);
        s.lambda_ratio = c.get_double("dgp", "lambda_ratio", s.lambda_ratio);
        s.lambda_log_sd = c.get_double("dgp", "lambda_log_sd", s.lambda_log_sd);
        s.p_high = c.get_double("dgp", "p_high", s.p_high);
        s.income = c.get_double("dgp", "income", s.income);
        s.visits_per_chf = c.get_double("dgp", "visits_per_chf", s.visits_per_chf);
        s.premium_base_mean = c.get_double("dgp", "premium_base_mean", s.premium_base_mean);
        s.premium_base_sd = c.get_double("dgp", "premium_base_sd", s.premium_base_sd);
        if (s.n_agents <= 0) throw std::runtime_error("dgp.n_agents must be > 0");
        return s;
    }
};

// Premium falls as the deductible rises, mirroring the market discounts.
inline const std::map<int, double> kDeductibleDiscount{
    {300, 0.0}, {500, 0.06}, {1000, 0.16}, {1500, 0.25}, {2000, 0.32}, {2500, 0.40}};

struct StructuralWorld {
    std::vector<model::AgentPreferences> population;
    std::vector<int> cantons;
    std::vector<std::vector<synth::PlanOffer>> menus;
    std::vector<synth::StructuralRecord> records;
};

inline StructuralWorld run_structural(const StructuralDgp& s) {
    Rng rng(s.seed);
    StructuralWorld world;
    world.menus.resize(s.n_clusters);
    for (int g = 0; g < s.n_clusters; ++g) {
        const double base = market::from_rappen(
            market::to_rappen(rng.normal(s.premium_base_mean, s.premium_base_sd)));
        for (const int d : market::kDeductibleMenu) {
            synth::PlanOffer offer;
            offer.spec = {d, market::PlanType::Free, market::AgeGroup::Adult, g};
            offer.monthly_premium =
                market::from_rappen(market::to_rappen(base * (1.0 - kDeductibleDiscount.at(d))));
            world.menus[g].push_back(offer);
        }
    }
    world.population.reserve(s.n_agents);
    world.cantons.reserve(s.n_agents);
    for (int i = 0; i < s.n_agents; ++i) {
        model::AgentPreferences prefs;
        prefs.omega = std::exp(rng.normal(s.omega_log_mean, s.omega_log_sd));
        prefs.lambda_low = 0.0;
        prefs.lambda_high = s.lambda_ratio * prefs.omega * std::exp(rng.normal(0.0, s.lambda_log_sd));
        prefs.p_high = s.p_high;
        prefs.income = s.income;
        world.population.push_back(prefs);
        world.cantons.push_back(static_cast<int>(rng.uniform_int(s.n_clusters)));
    }
    synth::StructuralOptions opt;
    opt.seed = s.seed + 0x5D1F;
    opt.visits_per_chf = s.visits_per_chf;
    opt.n_years = 2;
    world.records = synth::simulate_structural(world.population, world.cantons, world.menus, opt);
    return world;
}

inline void write_structural_panel_csv(const StructuralWorld& world, std::ostream& out,
                                       std::uint64_t seed) {
    csv::write_row(out, pipe::kPanelColumns);
    Rng rng(seed + 0x77);
    for (std::size_t i = 0; i < world.records.size(); ++i) {
        const auto& rec = world.records[i];
        const int gender = rng.bernoulli(0.5) ? 1 : 0;
        const int age = 30 + static_cast<int>(i % 40);
        const int med_need = std::min(10, static_cast<int>(rec.prefs.lambda_high / 2000.0));
        for (std::size_t t = 0; t < rec.years.size(); ++t) {
            const auto& yr = rec.years[t];
            csv::write_row(
                out, {std::to_string(i + 1), std::to_string(2018 + t),
                      market::kCantonCodes[rec.canton], std::to_string(age),
                      std::to_string(gender), "14", "2",
                      csv::format_double(rec.prefs.income / 12.0), "active", "0",
                      rec.suppl_ins ? "1" : "0", std::to_string(rec.deductible), "free",
                      std::to_string(yr.visits), "3", yr.high_need ? "1" : "0", "0", "0", "1",
                      std::to_string(med_need)});
        }
    }
}

inline void write_structural_premium_csv(const StructuralWorld& world, std::ostream& out) {
    csv::write_row(out, {"canton", "age_group", "deductible", "plan_type", "insurer",
                         "monthly_premium"});
    for (std::size_t g = 0; g < world.menus.size(); ++g) {
        for (const auto& offer : world.menus[g]) {
            csv::write_row(out, {market::kCantonCodes[g], "adult",
                                 std::to_string(offer.spec.deductible), "free", "alpha",
                                 csv::format_double(offer.monthly_premium - 5.0)});
            csv::write_row(out, {market::kCantonCodes[g], "adult",
                                 std::to_string(offer.spec.deductible), "free", "beta",
                                 csv::format_double(offer.monthly_premium + 5.0)});
        }
    }
}

}  // namespace detail

inline void run_simulate(const SimulateArgs& args) {
    const cfg::Config config = load_config(args.config_path);
    const std::string kind = config.get_string("dgp", "kind", "roy");
    std::filesystem::create_directories(args.out_dir);
    const auto out_path = [&](const std::string& name) {
        return (std::filesystem::path(args.out_dir) / name).string();
    };

    if (kind == "roy") {
        synth::DgpConfig dgp = stage("config", [&] { return synth::DgpConfig::from_config(config); });
        if (args.seed) dgp.seed = *args.seed;
        if (dgp.instruments.premium_noise_sd != 0.0)
            throw StageError("config",
                             "roy export requires premium_noise_sd = 0 so the premium CSV can "
                             "reproduce the instrument exactly");
        const detail::RoyColumnMap map =
            stage("config", [&] { return detail::roy_column_map(dgp); });
        const auto [panel, oracle] = stage("simulate", [&] { return synth::simulate_roy(dgp); });

        stage("write", [&] {
            std::ofstream panel_out(out_path("panel.csv"));
            if (!panel_out) throw std::runtime_error("cannot write " + out_path("panel.csv"));
            detail::write_roy_panel_csv(panel, map, panel_out);
            std::ofstream prem_out(out_path("premiums.csv"));
            if (!prem_out) throw std::runtime_error("cannot write " + out_path("premiums.csv"));
            detail::write_roy_premium_csv(panel, prem_out);
            std::ofstream oracle_out(out_path("oracle.json"));
            if (!oracle_out) throw std::runtime_error("cannot write " + out_path("oracle.json"));
            nlohmann::json j = detail::oracle_json(oracle, dgp, map);
            j["seed"] = dgp.seed;
            j["config_hash"] = hash_hex(config.hash());
            oracle_out << j.dump(2) << "\n";
            return 0;
        });
        return;
    }
    if (kind == "structural") {
        detail::StructuralDgp dgp =
            stage("config", [&] { return detail::StructuralDgp::from_config(config); });
        if (args.seed) dgp.seed = *args.seed;
        const detail::StructuralWorld world =
            stage("simulate", [&] { return detail::run_structural(dgp); });
        stage("write", [&] {
            std::ofstream panel_out(out_path("panel.csv"));
            if (!panel_out) throw std::runtime_error("cannot write " + out_path("panel.csv"));
            detail::write_structural_panel_csv(world, panel_out, dgp.seed);
            std::ofstream prem_out(out_path("premiums.csv"));
            if (!prem_out) throw std::runtime_error("cannot write " + out_path("premiums.csv"));
            detail::write_structural_premium_csv(world, prem_out);
            std::ofstream oracle_out(out_path("oracle.json"));
            if (!oracle_out) throw std::runtime_error("cannot write " + out_path("oracle.json"));
            nlohmann::json j;
            j["kind"] = "structural";
            j["seed"] = dgp.seed;
            j["config_hash"] = hash_hex(config.hash());
            oracle_out << j.dump(2) << "\n";
            return 0;
        });
        return;
    }
    throw StageError("config", "dgp.kind must be roy or structural, got " + kind);
}

// ---------------------------------------------------------------------------
// estimate

struct EstimateArgs {
    std::string config_path;
    std::optional<std::uint64_t> seed;
    pipe::TreatmentSide treatment = pipe::TreatmentSide::Lowest;
    std::string estimator = "normal";  // normal | semipar
    int reps = 0;
    bool stable_only = false;
    std::string stratum;  // empty = full sample
    std::string out_dir = ".";
};

namespace detail {

inline std::string stratum_dimension(const std::string& name) {
    if (name.rfind("hh_", 0) == 0) return "household_size_band";
    if (name == "women" || name == "men") return "gender";
    if (name == "subsidy" || name == "no_subsidy") return "subsidy";
    if (name.rfind("educ_", 0) == 0) return "education_band";
    throw std::runtime_error("unknown stratum name: " + name);
}

}  // namespace detail

struct EstimateResult {
    econ::MteFit fit;
    report::ReportBundle bundle;
    pipe::DropLedger ledger;
};

inline EstimateResult run_estimate(const EstimateArgs& args) {
    const cfg::Config config = load_config(args.config_path);
    if (args.reps > 0 && !args.seed)
        throw StageError("config", "bootstrap requested (--reps > 0) but no --seed given");
    if (args.estimator != "normal" && args.estimator != "semipar")
        throw StageError("config", "estimator must be normal or semipar");

    const std::string panel_path = config.get_string("data", "panel");
    const std::string premium_path = config.get_string("data", "premiums");

    pipe::DropLedger ledger;
    std::vector<pipe::PanelRecord> records = stage("ingest", [&] {
        std::ifstream in(panel_path);
        if (!in) throw std::runtime_error("cannot open panel: " + panel_path);
        return pipe::ingest_panel_csv(in, ledger, panel_path);
    });
    const market::PremiumTable premiums = stage("ingest", [&] {
        std::ifstream in(premium_path);
        if (!in) throw std::runtime_error("cannot open premiums: " + premium_path);
        return market::ingest_premium_csv(in, premium_path);
    });

    std::vector<pipe::EstimationRow> rows = stage("pipeline", [&] {
        auto drafts = pipe::build_lags(std::move(records), ledger);
        drafts = pipe::intensive_margin(std::move(drafts), ledger);
        drafts = pipe::join_premiums(std::move(drafts), premiums, ledger);
        pipe::apply_treatment(drafts, args.treatment);
        if (args.stable_only) drafts = pipe::stable_subsample(std::move(drafts), ledger);
        if (!args.stratum.empty()) {
            const std::string dimension = detail::stratum_dimension(args.stratum);
            bool found = false;
            for (auto& s : pipe::stratify(drafts, dimension)) {
                if (s.name == args.stratum) {
                    drafts = std::move(s.rows);
                    found = true;
                    break;
                }
            }
            if (!found) throw std::runtime_error("stratum not found: " + args.stratum);
        }
        if (drafts.empty()) throw std::runtime_error("no rows left after filtering");
        return drafts;
    });

    pipe::DesignSpec design;
    design.covariates = config.get_list("estimate", "covariates");
    design.instruments = config.get_list("estimate", "instruments");
    design.canton_fe = config.get_bool("estimate", "canton_fe", false);

    econ::MteOptions opts;
    opts.bin_width = config.get_double("estimate", "bin_width", 0.01);
    opts.min_count = static_cast<int>(config.get_int("estimate", "min_count", 1));
    opts.bandwidth = config.get_double("estimate", "bandwidth", 0.0);
    opts.degree = static_cast<int>(config.get_int("estimate", "degree", 2));

    const econ::EstimationInput input =
        stage("pipeline", [&] { return pipe::build_estimation_input(rows, design); });

    const bool semipar = args.estimator == "semipar";
    const econ::MteFit fit = stage("estimate", [&] {
        return semipar ? econ::mte_semiparametric(input, opts) : econ::mte_parametric(input, opts);
    });

    std::optional<econ::BootstrapResult> boot;
    if (args.reps > 0) {
        boot = stage("bootstrap", [&] {
            const econ::EstimatorFn estimator = [&](const econ::EstimationInput& sample) {
                const econ::MteFit rep_fit = semipar ? econ::mte_semiparametric(sample, opts)
                                                     : econ::mte_parametric(sample, opts);
                return report::curve_stat_vector(rep_fit);
            };
            return econ::cluster_bootstrap(input, estimator, args.reps, *args.seed);
        });
    }

    EstimateResult result;
    result.fit = fit;
    result.ledger = ledger;
    result.bundle =
        report::make_bundle(fit, boot ? &*boot : nullptr, pipe::to_string(args.treatment),
                            args.seed.value_or(0), hash_hex(config.hash()));

    stage("write", [&] {
        std::filesystem::create_directories(args.out_dir);
        const auto out_path = [&](const std::string& name) {
            return (std::filesystem::path(args.out_dir) / name).string();
        };
        report::write_report_json(result.bundle, out_path("report.json"));
        std::ofstream curve(out_path("mte_curve.csv"));
        if (!curve) throw std::runtime_error("cannot write " + out_path("mte_curve.csv"));
        report::write_mte_curve_csv(result.bundle, curve);
        std::ofstream support(out_path("support.csv"));
        if (!support) throw std::runtime_error("cannot write " + out_path("support.csv"));
        report::write_support_csv(fit.support, support);
        std::ofstream dropped(out_path("dropped_rows.csv"));
        if (!dropped) throw std::runtime_error("cannot write " + out_path("dropped_rows.csv"));
        report::write_dropped_csv(ledger, dropped);
        return 0;
    });
    return result;
}

// ---------------------------------------------------------------------------
// mc-study

struct McArgs {
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::string out_dir = ".";
};

struct McCell {
    std::string estimator;
    std::string statistic;  // "u0.25", "ate", "cov_gap"
    double bias = 0.0;
    double rmse = 0.0;
    double coverage = -1.0;  // -1 when no bootstrap was run
    int n_used = 0;
};

struct McSummary {
    int replicates = 0;
    int failures = 0;
    std::vector<McCell> cells;
};

inline McSummary run_mc_study(const McArgs& args) {
    const cfg::Config config = load_config(args.config_path);
    synth::DgpConfig base = stage("config", [&] { return synth::DgpConfig::from_config(config); });
    if (args.seed) base.seed = *args.seed;
    const int replicates = static_cast<int>(config.get_int("mc", "replicates"));
    if (replicates < 1) throw StageError("config", "mc.replicates must be >= 1");
    const int boot_reps = static_cast<int>(config.get_int("mc", "bootstrap_reps", 0));
    std::vector<std::string> estimators = config.get_list("mc", "estimators");
    if (estimators.empty()) estimators = {"normal"};

    econ::MteOptions opts;
    opts.bandwidth = config.get_double("mc", "bandwidth", 0.0);
    opts.degree = static_cast<int>(config.get_int("mc", "degree", 2));

    struct Draw {
        double err = 0.0;
        bool covered = false;
        bool has_ci = false;
    };
    // (estimator, statistic) -> replicate draws
    std::map<std::pair<std::string, std::string>, std::vector<Draw>> draws;
    int failures = 0;

    for (int r = 0; r < replicates; ++r) {
        synth::DgpConfig dgp = base;
        dgp.seed = base.seed + static_cast<std::uint64_t>(r);
        try {
            const auto [panel, oracle] = synth::simulate_roy(dgp);
            const econ::EstimationInput input = roy_estimation_input(panel);
            const Eigen::VectorXd x_bar = panel.X.colwise().mean();
            for (const auto& name : estimators) {
                const bool semipar = name == "semipar";
                const econ::MteFit fit = semipar ? econ::mte_semiparametric(input, opts)
                                                 : econ::mte_parametric(input, opts);
                std::optional<econ::BootstrapResult> boot;
                if (boot_reps > 0) {
                    const econ::EstimatorFn estimator = [&](const econ::EstimationInput& sample) {
                        const econ::MteFit rep = semipar ? econ::mte_semiparametric(sample, opts)
                                                         : econ::mte_parametric(sample, opts);
                        return econ::mte_stat_vector(rep);
                    };
                    boot = econ::cluster_bootstrap(input, estimator, boot_reps,
                                                   dgp.seed + 0x9E3779B9ull);
                }
                const auto record = [&](const std::string& stat_label, double est, double truth,
                                        const std::string& boot_name) {
                    Draw draw;
                    draw.err = est - truth;
                    if (boot) {
                        const econ::BootstrapCi* ci = boot->find(boot_name);
                        if (ci && ci->present) {
                            draw.has_ci = true;
                            draw.covered = truth >= ci->lo && truth <= ci->hi;
                        }
                    }
                    draws[{name, stat_label}].push_back(draw);
                };
                for (const auto& entry : fit.percentiles) {
                    if (!entry.present) continue;
                    const double truth = synth::true_mte(oracle, x_bar, entry.u);
                    char label[16];
                    std::snprintf(label, sizeof(label), "u%.2f", entry.u);
                    char boot_name[24];
                    std::snprintf(boot_name, sizeof(boot_name), "mte_u%.2f", entry.u);
                    record(label, entry.estimate, truth, boot_name);
                }
                if (!semipar) {
                    record("cov_gap", fit.cov_gap(), oracle.cov_gap, "cov_gap");
                    record("ate", fit.ate, synth::true_mte(oracle, x_bar, 0.5), "ate");
                }
            }
        } catch (const std::exception&) {
            ++failures;
            if (failures * 2 > replicates)
                throw StageError("mc", "more than half of the replicates failed");
        }
    }

    McSummary summary;
    summary.replicates = replicates;
    summary.failures = failures;
    for (const auto& [key, vec] : draws) {
        McCell cell;
        cell.estimator = key.first;
        cell.statistic = key.second;
        cell.n_used = static_cast<int>(vec.size());
        double sum = 0.0, sq = 0.0;
        int covered = 0, with_ci = 0;
        for (const auto& d : vec) {
            sum += d.err;
            sq += d.err * d.err;
            if (d.has_ci) {
                ++with_ci;
                if (d.covered) ++covered;
            }
        }
        cell.bias = sum / static_cast<double>(vec.size());
        cell.rmse = std::sqrt(sq / static_cast<double>(vec.size()));
        if (with_ci > 0) cell.coverage = static_cast<double>(covered) / with_ci;
        summary.cells.push_back(cell);
    }

    stage("write", [&] {
        std::filesystem::create_directories(args.out_dir);
        const auto path = (std::filesystem::path(args.out_dir) / "mc_summary.csv").string();
        std::ofstream out(path);
        if (!out) throw std::runtime_error("cannot write " + path);
        csv::write_row(out, {"estimator", "statistic", "bias", "rmse", "coverage", "n_used",
                             "replicates", "failures"});
        for (const auto& cell : summary.cells) {
            csv::write_row(out, {cell.estimator, cell.statistic, csv::format_double(cell.bias),
                                 csv::format_double(cell.rmse),
                                 cell.coverage >= 0.0 ? csv::format_double(cell.coverage) : "",
                                 std::to_string(cell.n_used), std::to_string(summary.replicates),
                                 std::to_string(summary.failures)});
        }
        return 0;
    });
    return summary;
}

// ---------------------------------------------------------------------------
// report

struct ReportArgs {
    std::vector<std::string> bundle_paths;
    std::string out_dir = ".";
};

inline void run_report(const ReportArgs& args) {
    if (args.bundle_paths.empty()) throw StageError("config", "no report bundles given");
    std::vector<report::ReportBundle> bundles;
    for (const auto& path : args.bundle_paths) {
        bundles.push_back(stage("read", [&] { return report::read_report_json(path); }));
    }
    stage("write", [&] {
        std::filesystem::create_directories(args.out_dir);
        const auto path = (std::filesystem::path(args.out_dir) / "comparison.csv").string();
        std::ofstream table(path);
        if (!table) throw std::runtime_error("cannot write " + path);
        report::render_comparison(bundles, std::cout, table);
        return 0;
    });
}

}  // namespace dmte::cli
