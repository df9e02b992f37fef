// SPDX-License-Identifier: Apache-2.0
//
// arraycal: simulation toolkit for phased-array calibration with
// Kronecker-structured Gaussian-process regression.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
// http://www.apache.org/licenses/LICENSE-2.0

#include <catch2/catch_amalgamated.hpp>
#include <filesystem>

#include "arraycal/config.hpp"

using namespace arraycal;

namespace {
nlohmann::json minimal_config() {
    return nlohmann::json::parse(R"({
        "schema_version": 1,
        "mode": "dbf",
        "array": {"nx": 2, "ny": 2},
        "codebook": {"bits": 2},
        "band": {"min_hz": 3.3e9, "max_hz": 3.7e9, "num_points": 3},
        "distortion": {"re_amplitude": 0.1, "im_amplitude": 0.1},
        "sampling_fractions": [0.2],
        "seeds": [1],
        "synthesis": {"ue": {"azimuth": 90.0, "elevation": 90.0}}
    })");
}
}  // namespace

TEST_CASE("minimal config fills documented defaults") {
    const auto c = config_from_json(minimal_config());
    REQUIRE(c.mode == BeamformingMode::Dbf);
    REQUIRE(c.spacing == 0.5);
    REQUIRE(c.gain_min == 0.1);
    REQUIRE(c.gain_max == 1.0);
    REQUIRE(c.band_reference_hz == 3.5e9);
    REQUIRE(c.cutoffs == std::array<int, 3>{2, 2, 2});
    REQUIRE(c.measurement_noise_sigma == 1e-4);
    REQUIRE(c.gp_noise2 == 1e-6);
    REQUIRE_FALSE(c.optimize_hyperparameters);
    REQUIRE(c.pattern_az_count == 61);
    REQUIRE(c.abf_selection == AbfSelection::Nearest);
    REQUIRE(c.denominator == BpaDenominator::PaperSum);
    REQUIRE(c.num_channels() == 4);
    REQUIRE(c.num_codewords() == 16);
    // default kernels: SM on frequency, RQ elsewhere
    REQUIRE(std::holds_alternative<SmParams>(c.kernels[0].params));
    REQUIRE(std::holds_alternative<RqParams>(c.kernels[1].params));
    REQUIRE(std::holds_alternative<RqParams>(c.kernels[2].params));
}

TEST_CASE("band frequencies span the configured range") {
    auto j = minimal_config();
    const auto c = config_from_json(j);
    const auto f = c.band_frequencies();
    REQUIRE(f.size() == 3);
    REQUIRE(f.front() == 3.3e9);
    REQUIRE(f.back() == 3.7e9);
    REQUIRE(f[1] == Catch::Approx(3.5e9));

    j["band"]["num_points"] = 1;
    const auto c1 = config_from_json(j);
    REQUIRE(c1.band_frequencies() == std::vector<double>{3.5e9});
}

TEST_CASE("config parsing rejects malformed input") {
    auto bad_mode = minimal_config();
    bad_mode["mode"] = "hybrid";
    REQUIRE_THROWS_AS(config_from_json(bad_mode), ConfigError);

    auto bad_fraction = minimal_config();
    bad_fraction["sampling_fractions"] = {1.5};
    REQUIRE_THROWS_AS(config_from_json(bad_fraction), ConfigError);

    auto missing = minimal_config();
    missing.erase("band");
    REQUIRE_THROWS_AS(config_from_json(missing), ConfigError);

    auto bad_schema = minimal_config();
    bad_schema["schema_version"] = 99;
    REQUIRE_THROWS_AS(config_from_json(bad_schema), ConfigError);

    auto ue_in_sector = minimal_config();
    ue_in_sector["synthesis"]["sectors"] = {
        {{"azimuth", {80.0, 100.0}}, {"elevation", {80.0, 100.0}}}};
    REQUIRE_THROWS_AS(config_from_json(ue_in_sector), ConfigError);
}

TEST_CASE("kernel JSON round-trips") {
    ProductParams prod;
    prod.factors = {KernelSpec{SmParams{{{0.6, 0.0, 0.2}, {0.4, 2.0, 0.2}}}},
                    KernelSpec{RqParams{1.1, 0.3, 2.5}}};
    const KernelSpec k{prod};
    const auto k2 = kernel_from_json(kernel_to_json(k));
    REQUIRE(pack_hyperparameters(k2) == pack_hyperparameters(k));
    REQUIRE(kernel_to_json(k2) == kernel_to_json(k));
    REQUIRE_THROWS_AS(kernel_from_json(nlohmann::json{{"kind", "matern"}}), ConfigError);
}

TEST_CASE("FNV-1a digest matches the reference value") {
    // published 64-bit FNV-1a test vector
    REQUIRE(fnv1a64("abc") == 0xe71fa2190541574bULL);
    REQUIRE(fnv1a64("") == 14695981039346656037ULL);
}

TEST_CASE("load_config reads files and reports parse errors") {
    const auto dir = std::filesystem::temp_directory_path() / "arraycal_cfg_test";
    std::filesystem::create_directories(dir);
    const auto good = dir / "good.json";
    {
        std::ofstream out(good);
        out << minimal_config().dump(2);
    }
    const auto lc = load_config(good.string());
    REQUIRE(lc.config.num_channels() == 4);
    REQUIRE(lc.digest == fnv1a64(lc.raw));

    const auto bad = dir / "bad.json";
    {
        std::ofstream out(bad);
        out << "{not json";
    }
    REQUIRE_THROWS_AS(load_config(bad.string()), ConfigError);
    REQUIRE_THROWS_AS(load_config((dir / "missing.json").string()), ConfigError);
    std::filesystem::remove_all(dir);
}
