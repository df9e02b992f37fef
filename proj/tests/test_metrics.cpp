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

#include "arraycal/metrics.hpp"

using namespace arraycal;

namespace {
BeamPattern make_pattern(std::size_t I, std::size_t J, std::size_t K, double fill) {
    BeamPattern p;
    p.azimuths = linspace_deg(0.0, 180.0, I);
    p.elevations = linspace_deg(0.0, 180.0, J);
    p.frequencies.resize(K);
    for (std::size_t k = 0; k < K; ++k) p.frequencies[k] = 1e9 + 1e6 * static_cast<double>(k);
    p.values.assign(I * J * K, fill);
    return p;
}
}  // namespace

TEST_CASE("bpa_rmse on a 2x2x2 grid with one unit-error cell") {
    const auto p = make_pattern(2, 2, 2, 1.0);
    auto q = p;
    q.values[3] = 2.0;  // single cell off by one
    // paper_sum denominator: sqrt(1 / (2+2+2))
    REQUIRE(bpa_rmse(p, q, BpaDenominator::PaperSum) ==
            Catch::Approx(std::sqrt(1.0 / 6.0)).margin(1e-12));
    // cell_count denominator: sqrt(1 / 8)
    REQUIRE(bpa_rmse(p, q, BpaDenominator::CellCount) ==
            Catch::Approx(std::sqrt(1.0 / 8.0)).margin(1e-12));
}

TEST_CASE("denominator modes differ by the expected constant factor") {
    const std::size_t I = 5, J = 4, K = 3;
    auto p = make_pattern(I, J, K, 0.0);
    auto q = p;
    for (std::size_t i = 0; i < q.values.size(); ++i)
        q.values[i] = 0.01 * static_cast<double>(i % 7);
    const double a = bpa_rmse(p, q, BpaDenominator::PaperSum);
    const double b = bpa_rmse(p, q, BpaDenominator::CellCount);
    const double factor = std::sqrt(static_cast<double>(I * J * K) /
                                    static_cast<double>(I + J + K));
    REQUIRE(a == Catch::Approx(b * factor).margin(1e-12));
}

TEST_CASE("bpa_rmse rejects mismatched axes") {
    const auto p = make_pattern(2, 2, 2, 1.0);
    const auto q = make_pattern(2, 2, 3, 1.0);
    REQUIRE_THROWS_AS(bpa_rmse(p, q), std::invalid_argument);
}

TEST_CASE("nrmse normalizes by the truth range") {
    const std::vector<double> truth{0.0, 1.0, 2.0, 3.0};
    const std::vector<double> est{0.1, 1.1, 2.1, 3.1};
    // rmse = 0.1, range = 3
    REQUIRE(nrmse(truth, est) == Catch::Approx(0.1 / 3.0).margin(1e-12));
    REQUIRE(nrmse(truth, truth) == 0.0);
    REQUIRE_THROWS_AS(nrmse({1.0, 1.0}, {1.0, 2.0}), std::domain_error);
    REQUIRE_THROWS_AS(nrmse({1.0}, {1.0, 2.0}), std::invalid_argument);
}

TEST_CASE("order statistics interpolate linearly") {
    const auto s = order_stats({4.0, 1.0, 3.0, 2.0});
    REQUIRE(s.median == Catch::Approx(2.5));
    REQUIRE(s.q25 == Catch::Approx(1.75));
    REQUIRE(s.q75 == Catch::Approx(3.25));
    const auto single = order_stats({5.0});
    REQUIRE(single.median == 5.0);
    REQUIRE(single.q25 == 5.0);
    REQUIRE(single.q75 == 5.0);
}

TEST_CASE("summarize aggregates the report fields") {
    std::vector<CalibrationReport> reports(3);
    for (std::size_t i = 0; i < 3; ++i) {
        reports[i].improvement_ratio = static_cast<double>(i + 1);
        reports[i].bpa_distorted = 0.1 * static_cast<double>(i);
        reports[i].bpa_calibrated = 0.01 * static_cast<double>(i);
    }
    const auto a = summarize(reports);
    REQUIRE(a.count == 3);
    REQUIRE(a.improvement_ratio.median == Catch::Approx(2.0));
    REQUIRE(a.bpa_distorted.median == Catch::Approx(0.1));
    REQUIRE_THROWS_AS(summarize({}), std::invalid_argument);
}
