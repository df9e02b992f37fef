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

#include "arraycal/distortion.hpp"
#include "arraycal/smooth_field.hpp"

using namespace arraycal;

namespace {
std::vector<double> ref_grid17() {
    std::vector<double> g(17);
    for (std::size_t i = 0; i < 17; ++i) g[i] = static_cast<double>(i) / 16.0;
    return g;
}
}  // namespace

TEST_CASE("smooth field is normalized to the requested amplitude") {
    const SmoothField f(42, {2, 2, 2}, 0.3);
    const auto g = ref_grid17();
    const auto vals = f.evaluate_on_grid(g, g, g);
    double mean = 0.0;
    for (double v : vals) mean += v;
    mean /= static_cast<double>(vals.size());
    double var = 0.0;
    for (double v : vals) var += (v - mean) * (v - mean);
    var /= static_cast<double>(vals.size());
    REQUIRE(std::sqrt(var) == Catch::Approx(0.3).margin(1e-12));
}

TEST_CASE("smooth field is deterministic in the seed") {
    const SmoothField a(7, {2, 3, 2}, 0.1), b(7, {2, 3, 2}, 0.1), c(8, {2, 3, 2}, 0.1);
    REQUIRE(a(0.3, 0.6, 0.9) == b(0.3, 0.6, 0.9));
    REQUIRE(a(0.3, 0.6, 0.9) != c(0.3, 0.6, 0.9));
    REQUIRE(a.coefficients() == b.coefficients());
}

TEST_CASE("grid evaluation matches pointwise evaluation") {
    const SmoothField f(11, {1, 2, 3}, 0.2);
    const std::vector<double> xs{0.0, 0.4, 1.0}, ys{0.25, 0.75}, zs{0.1, 0.5, 0.6, 0.95};
    const auto vals = f.evaluate_on_grid(xs, ys, zs);
    std::size_t idx = 0;
    for (double x : xs)
        for (double y : ys)
            for (double z : zs)
                REQUIRE(vals[idx++] == Catch::Approx(f(x, y, z)).margin(1e-12));
}

TEST_CASE("smooth field validates arguments") {
    REQUIRE_THROWS_AS(SmoothField(1, {0, 1, 1}, 0.1), std::invalid_argument);
    REQUIRE_THROWS_AS(SmoothField(1, {1, 1, 1}, -0.1), std::invalid_argument);
    REQUIRE_THROWS_AS(smooth_random_field_3d(1, {1, 1, 1}, 0.0), std::invalid_argument);
    // zero amplitude is legal for the raw field and evaluates to zero
    const SmoothField z(1, {1, 1, 1}, 0.0);
    REQUIRE(z(0.2, 0.4, 0.8) == 0.0);
}

TEST_CASE("distortion tensor is (1 + re) + j im") {
    const auto axes = make_grid_axes(17, 17, 17);
    const double amp_re = 0.15, amp_im = 0.05;
    const auto d = generate_distortion(3, axes, amp_re, amp_im, {2, 2, 2});
    REQUIRE(d.values.size() == axes.size());

    // the axes coincide with the 17^3 normalization grid, so the empirical
    // std of each component is exact
    double mean_re = 0.0, mean_im = 0.0;
    for (const cplx& v : d.values) {
        mean_re += v.real() - 1.0;
        mean_im += v.imag();
    }
    mean_re /= static_cast<double>(d.values.size());
    mean_im /= static_cast<double>(d.values.size());
    double var_re = 0.0, var_im = 0.0;
    for (const cplx& v : d.values) {
        var_re += (v.real() - 1.0 - mean_re) * (v.real() - 1.0 - mean_re);
        var_im += (v.imag() - mean_im) * (v.imag() - mean_im);
    }
    var_re /= static_cast<double>(d.values.size());
    var_im /= static_cast<double>(d.values.size());
    REQUIRE(std::sqrt(var_re) == Catch::Approx(amp_re).margin(1e-12));
    REQUIRE(std::sqrt(var_im) == Catch::Approx(amp_im).margin(1e-12));

    // separate re/im streams: fields differ
    const auto d2 = generate_distortion(4, axes, amp_re, amp_im, {2, 2, 2});
    REQUIRE(d.values[0] != d2.values[0]);
}

TEST_CASE("zero amplitudes give the identity distortion") {
    const auto axes = make_grid_axes(3, 4, 5);
    const auto d = generate_distortion(9, axes, 0.0, 0.0, {2, 2, 2});
    for (const cplx& v : d.values) REQUIRE(v == cplx(1.0, 0.0));
}

TEST_CASE("distort_weights is elementwise multiplication") {
    Eigen::MatrixXcd w(2, 2), d(2, 2);
    w << cplx(1, 1), cplx(2, 0), cplx(0, 3), cplx(-1, 2);
    d << cplx(1, 0), cplx(0, 1), cplx(2, 0), cplx(1, 1);
    const auto out = distort_weights(w, d);
    for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j)
            REQUIRE(std::abs(out(i, j) - w(i, j) * d(i, j)) < 1e-15);
    Eigen::MatrixXcd bad(2, 3);
    REQUIRE_THROWS_AS(distort_weights(w, bad), std::invalid_argument);
}
