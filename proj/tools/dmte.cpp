// dmte: synthetic deductible-choice panels and marginal-treatment-effect
// estimation from one batch front end.

#include <CLI11.hpp>
#include <cstdint>
#include <iostream>
#include <string>
#include <vector>

#include "dmte/commands.hpp"

int main(int argc, char** argv) {
    CLI::App app{"deductible-choice MTE toolkit"};
    app.require_subcommand(1);

    // simulate
    auto* simulate = app.add_subcommand("simulate", "generate a synthetic panel and oracle");
    std::string sim_config, sim_out = ".";
    std::int64_t sim_seed = -1;
    simulate->add_option("--config", sim_config, "DGP config file")->required();
    simulate->add_option("--seed", sim_seed, "override the config seed");
    simulate->add_option("--out", sim_out, "output directory");

    // estimate
    auto* estimate = app.add_subcommand("estimate", "run the pipeline and fit MTEs");
    std::string est_config, est_treatment = "lowest", est_estimator = "normal", est_out = ".";
    std::string est_stratum;
    std::int64_t est_seed = -1;
    int est_reps = 0;
    bool est_stable = false;
    estimate->add_option("--config", est_config, "estimation config file")->required();
    estimate->add_option("--seed", est_seed, "bootstrap seed");
    estimate->add_option("--treatment", est_treatment, "lowest | highest")
        ->check(CLI::IsMember({"lowest", "highest"}));
    estimate->add_option("--estimator", est_estimator, "normal | semipar")
        ->check(CLI::IsMember({"normal", "semipar"}));
    estimate->add_option("--reps", est_reps, "bootstrap replications (0 = none)");
    estimate->add_flag("--stable-only", est_stable, "restrict to stable characteristics");
    estimate->add_option("--stratum", est_stratum, "restrict to one stratum (e.g. women, hh_1)");
    estimate->add_option("--out", est_out, "output directory");

    // mc-study
    auto* mc = app.add_subcommand("mc-study", "Monte Carlo recovery study against the oracle");
    std::string mc_config, mc_out = ".";
    std::int64_t mc_seed = -1;
    mc->add_option("--config", mc_config, "study config file")->required();
    mc->add_option("--seed", mc_seed, "override the config seed");
    mc->add_option("--out", mc_out, "output directory");

    // report
    auto* rep = app.add_subcommand("report", "side-by-side table from report bundles");
    std::vector<std::string> rep_paths;
    std::string rep_out = ".";
    rep->add_option("bundles", rep_paths, "report.json paths")->required();
    rep->add_option("--out", rep_out, "output directory");

    CLI11_PARSE(app, argc, argv);

    try {
        if (simulate->parsed()) {
            dmte::cli::SimulateArgs args;
            args.config_path = sim_config;
            args.out_dir = sim_out;
            if (sim_seed >= 0) args.seed = static_cast<std::uint64_t>(sim_seed);
            dmte::cli::run_simulate(args);
        } else if (estimate->parsed()) {
            dmte::cli::EstimateArgs args;
            args.config_path = est_config;
            args.treatment = dmte::pipe::parse_treatment_side(est_treatment);
            args.estimator = est_estimator;
            args.reps = est_reps;
            args.stable_only = est_stable;
            args.stratum = est_stratum;
            args.out_dir = est_out;
            if (est_seed >= 0) args.seed = static_cast<std::uint64_t>(est_seed);
            dmte::cli::run_estimate(args);
        } else if (mc->parsed()) {
            dmte::cli::McArgs args;
            args.config_path = mc_config;
            args.out_dir = mc_out;
            if (mc_seed >= 0) args.seed = static_cast<std::uint64_t>(mc_seed);
            dmte::cli::run_mc_study(args);
        } else if (rep->parsed()) {
            dmte::cli::ReportArgs args;
            args.bundle_paths = rep_paths;
            args.out_dir = rep_out;
            dmte::cli::run_report(args);
        }
    } catch (const dmte::cli::StageError& e) {
        std::cerr << "error " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
