// SPDX-License-Identifier: Apache-2.0
//
// arraycal: simulation toolkit for phased-array calibration with
// Kronecker-structured Gaussian-process regression.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
// http://www.apache.org/licenses/LICENSE-2.0

#pragma once

#include <array>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "arraycal/beamsynth.hpp"
#include "arraycal/calibration.hpp"
#include "arraycal/kernels.hpp"
#include "arraycal/metrics.hpp"

namespace arraycal {

/// Configuration file is invalid (missing fields, bad types, bad values).
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

inline constexpr int kConfigSchemaVersion = 1;

enum class AbfSelection { Nearest, Ratio };

namespace detail {
inline std::array<KernelSpec, 3> default_kernels() {
    // Tuned for the whitened regression target (the smooth distortion field):
    // a broad spectral peak at DC plus a mild low-frequency peak on the
    // frequency axis, smooth RQ factors elsewhere.
    SmParams sm;
    sm.components = {{0.7, 0.0, 0.3}, {0.3, 1.0, 0.3}};
    return {KernelSpec{sm}, KernelSpec{RqParams{1.0, 0.3, 1.0}},
            KernelSpec{RqParams{1.0, 0.3, 1.0}}};
}
}  // namespace detail

struct ExperimentConfig {
    BeamformingMode mode = BeamformingMode::Dbf;
    int nx = 4, ny = 4;
    double spacing = 0.5;
    int codebook_bits = 2;
    double gain_min = 0.1, gain_max = 1.0;
    double band_reference_hz = 3.5e9;
    double band_min_hz = 3.3e9, band_max_hz = 3.7e9;
    std::size_t band_points = 4;
    double re_amplitude = 0.05, im_amplitude = 0.05;
    std::array<int, 3> cutoffs{2, 2, 2};
    double measurement_noise_sigma = 1e-4;
    std::vector<double> sampling_fractions{0.2};
    std::vector<std::uint64_t> seeds{1};
    // GP settings
    double gp_noise2 = 1e-6;
    double cg_tol = 1e-6;
    int cg_max_iters = 0;
    bool optimize_hyperparameters = false;
    int opt_restarts = 3;
    int opt_max_iters = 60;
    std::array<KernelSpec, 3> kernels = detail::default_kernels();  // frequency, channel, codebook
    // Synthesis
    SynthesisSpec synthesis;
    // Pattern sampling
    std::size_t pattern_az_count = 61, pattern_el_count = 61;
    // ABF behavior
    AbfSelection abf_selection = AbfSelection::Nearest;
    bool abf_center_freq_only = false;
    BpaDenominator denominator = BpaDenominator::PaperSum;
    std::string output_dir = "out";

    std::size_t num_channels() const { return static_cast<std::size_t>(nx) * ny; }
    std::size_t num_codewords() const { return std::size_t{1} << (2 * codebook_bits); }

    std::vector<double> band_frequencies() const {
        std::vector<double> f(band_points);
        for (std::size_t i = 0; i < band_points; ++i)
            f[i] = (band_points == 1)
                       ? 0.5 * (band_min_hz + band_max_hz)
                       : band_min_hz + (band_max_hz - band_min_hz) * static_cast<double>(i) /
                                           static_cast<double>(band_points - 1);
        return f;
    }

    void validate() const {
        if (nx < 1 || ny < 1) throw ConfigError("array: dimensions must be >= 1");
        if (spacing <= 0.0) throw ConfigError("array.spacing: must be > 0");
        if (codebook_bits < 1) throw ConfigError("codebook.bits: must be >= 1");
        if (!(gain_min > 0.0) || !(gain_min < gain_max))
            throw ConfigError("codebook: require 0 < gain_min < gain_max");
        if (band_points < 1) throw ConfigError("band.num_points: must be >= 1");
        if (band_min_hz <= 0.0 || band_max_hz < band_min_hz)
            throw ConfigError("band: require 0 < min_hz <= max_hz");
        if (sampling_fractions.empty()) throw ConfigError("sampling_fractions: empty");
        for (double f : sampling_fractions)
            if (!(f > 0.0) || f > 1.0)
                throw ConfigError("sampling_fractions: values must be in (0, 1]");
        if (seeds.empty()) throw ConfigError("seeds: empty");
        if (gp_noise2 < 0.0) throw ConfigError("gp.noise2: must be >= 0");
        if (!(cg_tol > 0.0)) throw ConfigError("gp.cg_tol: must be > 0");
        if (measurement_noise_sigma < 0.0)
            throw ConfigError("measurement_noise_sigma: must be >= 0");
        if (re_amplitude < 0.0 || im_amplitude < 0.0)
            throw ConfigError("distortion: amplitudes must be >= 0");
        for (int c : cutoffs)
            if (c < 1) throw ConfigError("distortion.cutoffs: must be >= 1");
        if (pattern_az_count < 2 || pattern_el_count < 2)
            throw ConfigError("pattern: at least 2 angles per axis");
        for (const auto& k : kernels) {
            try {
                validate_kernel(k);
            } catch (const std::invalid_argument& e) {
                throw ConfigError(std::string("gp.kernels: ") + e.what());
            }
        }
        try {
            synthesis.validate();
        } catch (const std::invalid_argument& e) {
            throw ConfigError(std::string("synthesis: ") + e.what());
        }
    }
};

inline KernelSpec kernel_from_json(const nlohmann::json& j) {
    const std::string kind = j.at("kind").get<std::string>();
    if (kind == "rq") {
        RqParams p;
        p.sigma2 = j.at("sigma2").get<double>();
        p.length = j.at("length").get<double>();
        p.alpha = j.at("alpha").get<double>();
        return KernelSpec{p};
    }
    if (kind == "sm") {
        SmParams p;
        for (const auto& c : j.at("components")) {
            SmComponent comp;
            comp.weight = c.at("weight").get<double>();
            comp.mean = c.at("mean").get<double>();
            comp.variance = c.at("variance").get<double>();
            p.components.push_back(comp);
        }
        return KernelSpec{p};
    }
    if (kind == "product") {
        ProductParams p;
        for (const auto& f : j.at("factors")) p.factors.push_back(kernel_from_json(f));
        return KernelSpec{p};
    }
    throw ConfigError("kernel.kind: expected rq, sm or product, got '" + kind + "'");
}

inline nlohmann::json kernel_to_json(const KernelSpec& k) {
    nlohmann::json j;
    if (const auto* rq = std::get_if<RqParams>(&k.params)) {
        j["kind"] = "rq";
        j["sigma2"] = rq->sigma2;
        j["length"] = rq->length;
        j["alpha"] = rq->alpha;
    } else if (const auto* sm = std::get_if<SmParams>(&k.params)) {
        j["kind"] = "sm";
        j["components"] = nlohmann::json::array();
        for (const auto& c : sm->components)
            j["components"].push_back(
                {{"weight", c.weight}, {"mean", c.mean}, {"variance", c.variance}});
    } else {
        j["kind"] = "product";
        j["factors"] = nlohmann::json::array();
        for (const auto& f : std::get<ProductParams>(k.params).factors)
            j["factors"].push_back(kernel_to_json(f));
    }
    return j;
}

inline ExperimentConfig config_from_json(const nlohmann::json& j) {
    ExperimentConfig c;
    try {
        if (j.at("schema_version").get<int>() != kConfigSchemaVersion)
            throw ConfigError("schema_version: expected " +
                              std::to_string(kConfigSchemaVersion));
        const std::string mode = j.at("mode").get<std::string>();
        if (mode == "dbf")
            c.mode = BeamformingMode::Dbf;
        else if (mode == "abf")
            c.mode = BeamformingMode::Abf;
        else
            throw ConfigError("mode: expected 'dbf' or 'abf'");

        const auto& arr = j.at("array");
        c.nx = arr.at("nx").get<int>();
        c.ny = arr.at("ny").get<int>();
        c.spacing = arr.value("spacing", 0.5);

        const auto& cb = j.at("codebook");
        c.codebook_bits = cb.at("bits").get<int>();
        c.gain_min = cb.value("gain_min", 0.1);
        c.gain_max = cb.value("gain_max", 1.0);

        const auto& band = j.at("band");
        c.band_reference_hz = band.value("reference_hz", 3.5e9);
        c.band_min_hz = band.at("min_hz").get<double>();
        c.band_max_hz = band.at("max_hz").get<double>();
        c.band_points = band.at("num_points").get<std::size_t>();

        const auto& dist = j.at("distortion");
        c.re_amplitude = dist.at("re_amplitude").get<double>();
        c.im_amplitude = dist.at("im_amplitude").get<double>();
        if (dist.contains("cutoffs")) {
            const auto v = dist.at("cutoffs").get<std::vector<int>>();
            if (v.size() != 3) throw ConfigError("distortion.cutoffs: expected 3 entries");
            c.cutoffs = {v[0], v[1], v[2]};
        }

        c.measurement_noise_sigma = j.value("measurement_noise_sigma", 1e-4);
        c.sampling_fractions = j.at("sampling_fractions").get<std::vector<double>>();
        c.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();

        if (j.contains("gp")) {
            const auto& gp = j.at("gp");
            c.gp_noise2 = gp.value("noise2", 1e-6);
            c.cg_tol = gp.value("cg_tol", 1e-6);
            c.cg_max_iters = gp.value("cg_max_iters", 0);
            c.optimize_hyperparameters = gp.value("optimize_hyperparameters", false);
            c.opt_restarts = gp.value("restarts", 3);
            c.opt_max_iters = gp.value("max_opt_iters", 60);
            if (gp.contains("kernels")) {
                const auto& ks = gp.at("kernels");
                c.kernels[0] = kernel_from_json(ks.at("frequency"));
                c.kernels[1] = kernel_from_json(ks.at("channel"));
                c.kernels[2] = kernel_from_json(ks.at("codebook"));
            }
        }

        const auto& syn = j.at("synthesis");
        c.synthesis.ue.azimuth = syn.at("ue").at("azimuth").get<double>();
        c.synthesis.ue.elevation = syn.at("ue").at("elevation").get<double>();
        if (syn.contains("sectors"))
            for (const auto& s : syn.at("sectors")) {
                AngleSector sec;
                sec.az_lo = s.at("azimuth").at(0).get<double>();
                sec.az_hi = s.at("azimuth").at(1).get<double>();
                sec.el_lo = s.at("elevation").at(0).get<double>();
                sec.el_hi = s.at("elevation").at(1).get<double>();
                c.synthesis.sectors.push_back(sec);
            }
        c.synthesis.regularization = syn.value("regularization", 1e-2);
        c.synthesis.samples_per_degree = syn.value("samples_per_degree", 1.0);

        if (j.contains("pattern")) {
            c.pattern_az_count = j.at("pattern").value("azimuth_count", std::size_t{61});
            c.pattern_el_count = j.at("pattern").value("elevation_count", std::size_t{61});
        }
        if (j.contains("abf")) {
            const std::string sel = j.at("abf").value("selection", "nearest");
            if (sel == "nearest")
                c.abf_selection = AbfSelection::Nearest;
            else if (sel == "ratio")
                c.abf_selection = AbfSelection::Ratio;
            else
                throw ConfigError("abf.selection: expected 'nearest' or 'ratio'");
            c.abf_center_freq_only = j.at("abf").value("center_freq_only", false);
        }
        const std::string denom = j.value("denominator_mode", "paper_sum");
        if (denom == "paper_sum")
            c.denominator = BpaDenominator::PaperSum;
        else if (denom == "cell_count")
            c.denominator = BpaDenominator::CellCount;
        else
            throw ConfigError("denominator_mode: expected 'paper_sum' or 'cell_count'");
        c.output_dir = j.value("output_dir", "out");
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }
    c.validate();
    return c;
}

struct LoadedConfig {
    ExperimentConfig config;
    std::string raw;        // original file bytes
    std::uint64_t digest;   // FNV-1a of the raw bytes
};

inline std::uint64_t fnv1a64(const std::string& data) {
    std::uint64_t h = 14695981039346656037ULL;
    for (unsigned char c : data) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

inline LoadedConfig load_config(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open config file: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    LoadedConfig lc;
    lc.raw = ss.str();
    lc.digest = fnv1a64(lc.raw);
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(lc.raw);
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError(path + ": " + e.what());
    }
    lc.config = config_from_json(j);
    return lc;
}

}  // namespace arraycal
