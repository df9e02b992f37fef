// SPDX-License-Identifier: Apache-2.0
//
// arraycal: simulation toolkit for phased-array calibration with
// Kronecker-structured Gaussian-process regression.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
// http://www.apache.org/licenses/LICENSE-2.0

#include <cstdlib>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "arraycal/experiment.hpp"

namespace {

struct CommonArgs {
    std::string config_path;
    std::string out_dir;
    std::vector<std::uint64_t> seeds;
    std::string denominator;
    int jobs = 1;
};

void add_common(CLI::App* cmd, CommonArgs& a, bool with_jobs = true) {
    cmd->add_option("-c,--config", a.config_path, "experiment config (JSON)")
        ->required()
        ->check(CLI::ExistingFile);
    cmd->add_option("-o,--out", a.out_dir,
                    "output directory (default: config output_dir; ARRAYCAL_OUT overrides)");
    cmd->add_option("--seeds", a.seeds, "override the seed list from the config");
    cmd->add_option("--denominator", a.denominator,
                    "override denominator_mode (paper_sum or cell_count)")
        ->check(CLI::IsMember({"paper_sum", "cell_count"}));
    if (with_jobs)
        cmd->add_option("-j,--jobs", a.jobs, "worker threads over seeds")
            ->check(CLI::PositiveNumber);
}

arraycal::LoadedConfig load_with_overrides(const CommonArgs& a) {
    arraycal::LoadedConfig lc = arraycal::load_config(a.config_path);
    if (!a.seeds.empty()) lc.config.seeds = a.seeds;
    if (!a.denominator.empty())
        lc.config.denominator = (a.denominator == "paper_sum")
                                    ? arraycal::BpaDenominator::PaperSum
                                    : arraycal::BpaDenominator::CellCount;
    return lc;
}

std::string resolve_out_dir(const CommonArgs& a, const arraycal::ExperimentConfig& c) {
    if (const char* env = std::getenv("ARRAYCAL_OUT")) return env;
    if (!a.out_dir.empty()) return a.out_dir;
    return c.output_dir;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"arraycal: phased-array calibration simulation toolkit"};
    app.set_version_flag("--version", std::string("arraycal ") + arraycal::kToolVersion);
    app.require_subcommand(1);

    CommonArgs run_args, validate_args, fit_args, apply_args, dump_args;
    std::uint64_t dump_seed = 0;
    double dump_fraction = -1.0;
    bool dump_seed_set = false;

    auto* cmd_run = app.add_subcommand(
        "run", "full pipeline: simulate, fit, calibrate, write reports");
    add_common(cmd_run, run_args);

    auto* cmd_validate =
        app.add_subcommand("validate", "parse and validate a config, then exit");
    cmd_validate->add_option("-c,--config", validate_args.config_path, "config to check")
        ->required()
        ->check(CLI::ExistingFile);

    auto* cmd_fit = app.add_subcommand(
        "fit", "simulate and fit only; writes one model file per (seed, fraction)");
    add_common(cmd_fit, fit_args);

    auto* cmd_apply = app.add_subcommand(
        "apply", "calibrate from previously fitted model files and write reports");
    add_common(cmd_apply, apply_args);

    auto* cmd_dump = app.add_subcommand(
        "pattern-dump", "write beam-pattern cuts through the UE direction as CSV");
    add_common(cmd_dump, dump_args, false);
    cmd_dump->add_option("--seed", dump_seed, "seed to dump (default: first in config)")
        ->each([&](const std::string&) { dump_seed_set = true; });
    cmd_dump->add_option("--fraction", dump_fraction,
                         "sampling fraction to dump (default: first in config)");

    CLI11_PARSE(app, argc, argv);

    try {
        if (cmd_validate->parsed()) {
            const auto lc = arraycal::load_config(validate_args.config_path);
            std::cout << "ok: " << validate_args.config_path << " digest="
                      << arraycal::detail::digest_hex(lc.digest) << " mode="
                      << ((lc.config.mode == arraycal::BeamformingMode::Dbf) ? "dbf" : "abf")
                      << " grid=" << lc.config.band_points << "x"
                      << lc.config.num_channels() << "x" << lc.config.num_codewords()
                      << "\n";
            return 0;
        }

        const CommonArgs& a = cmd_run->parsed()   ? run_args
                              : cmd_fit->parsed() ? fit_args
                              : cmd_apply->parsed() ? apply_args
                                                    : dump_args;
        arraycal::LoadedConfig lc = load_with_overrides(a);
        const std::string out = resolve_out_dir(a, lc.config);

        if (cmd_dump->parsed()) {
            const std::uint64_t seed = dump_seed_set ? dump_seed : lc.config.seeds.front();
            const double fraction =
                (dump_fraction > 0.0) ? dump_fraction : lc.config.sampling_fractions.front();
            const auto ctx = arraycal::make_context(lc.config);
            const auto scen = arraycal::build_scenario(ctx, lc.config, seed);
            const auto model = arraycal::fit_run_model(ctx, lc.config, scen, seed, fraction);
            arraycal::PatternSet patterns;
            arraycal::apply_run_model(ctx, lc.config, scen, model, seed, fraction, &patterns);
            arraycal::write_pattern_dump(out, lc, patterns, seed, fraction);
            std::cout << "wrote pattern cuts to " << out << "\n";
            return 0;
        }

        const auto stage = cmd_fit->parsed()     ? arraycal::PipelineStage::FitOnly
                           : cmd_apply->parsed() ? arraycal::PipelineStage::ApplyOnly
                                                 : arraycal::PipelineStage::Run;
        const auto reports = arraycal::run_experiment(lc, out, a.jobs, stage);
        if (stage == arraycal::PipelineStage::FitOnly)
            std::cout << "wrote model files to " << out << "\n";
        else
            std::cout << "wrote " << reports.size() << " report rows to " << out << "\n";
        return 0;
    } catch (const arraycal::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const arraycal::ConvergenceError& e) {
        std::cerr << "convergence error: " << e.what() << "\n";
        return 3;
    } catch (const arraycal::NumericalError& e) {
        std::cerr << "numerical error: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
