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

#include "arraycal/calibration.hpp"

using namespace arraycal;

namespace {

const std::array<KernelSpec, 3> kKernels = {
    KernelSpec{SmParams{{{0.7, 0.0, 0.3}, {0.3, 1.0, 0.3}}}},
    KernelSpec{RqParams{1.0, 0.3, 1.0}}, KernelSpec{RqParams{1.0, 0.3, 1.0}}};

/// Oracle model: the posterior mean is set to the exact distorted codebook
/// weights, bypassing the GP fit. Tests the calibration logic in isolation.
CalibrationModel exact_model(const GridAxes& axes, const DistortionTensor& dist,
                             const AbfCodebook& cb, BeamformingMode mode) {
    CalibrationModel m;
    m.codebook = cb;
    m.mode = mode;
    m.gp_re.axes = axes;
    m.gp_im.axes = axes;
    m.mean_re.resize(static_cast<Eigen::Index>(axes.size()));
    m.mean_im.resize(static_cast<Eigen::Index>(axes.size()));
    for (std::size_t i = 0; i < axes.size(); ++i) {
        const cplx truth = cb.weights[i % cb.size()] * dist.values[i];
        m.mean_re(static_cast<Eigen::Index>(i)) = truth.real();
        m.mean_im(static_cast<Eigen::Index>(i)) = truth.imag();
    }
    return m;
}

}  // namespace

TEST_CASE("sampling plan selects the requested fraction deterministically") {
    const auto axes = make_grid_axes(4, 6, 8);
    const auto m1 = design_sampling_plan(axes, 0.25, 42);
    const auto m2 = design_sampling_plan(axes, 0.25, 42);
    const auto m3 = design_sampling_plan(axes, 0.25, 43);
    REQUIRE(m1 == m2);
    REQUIRE(m1 != m3);
    std::size_t count = 0;
    for (auto b : m1) count += b;
    REQUIRE(count == static_cast<std::size_t>(0.25 * 4 * 6 * 8));

    REQUIRE_THROWS_AS(design_sampling_plan(axes, 0.0, 1), std::invalid_argument);
    REQUIRE_THROWS_AS(design_sampling_plan(axes, 1.5, 1), std::invalid_argument);
}

TEST_CASE("sampling plan covers every channel when the fraction permits") {
    const auto axes = make_grid_axes(3, 8, 5);
    const auto [nf, nn, nz] = axes.dims();
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const auto mask = design_sampling_plan(axes, 0.2, seed);
        std::vector<bool> covered(nn, false);
        for (std::size_t i = 0; i < mask.size(); ++i)
            if (mask[i]) covered[(i / nz) % nn] = true;
        for (bool c : covered) REQUIRE(c);
    }
}

TEST_CASE("noise-free measurements equal the distorted codebook weights") {
    const auto axes = make_grid_axes(2, 3, 16);
    const auto cb = make_abf_codebook(2, 0.1, 1.0);
    const auto dist = generate_distortion(5, axes, 0.1, 0.1, {2, 2, 2});
    std::vector<std::uint8_t> mask(axes.size(), 0);
    mask[0] = mask[17] = mask[axes.size() - 1] = 1;
    const auto grid = simulate_measurements(dist, cb, mask, 0.0, 1);
    REQUIRE(grid.measured.size() == 3);
    REQUIRE(grid.measured[0] == cb.weights[0] * dist.values[0]);
    REQUIRE(grid.measured[1] == cb.weights[17 % 16] * dist.values[17]);
    REQUIRE(grid.measured[2] == cb.weights[(axes.size() - 1) % 16] *
                                    dist.values[axes.size() - 1]);

    // noisy measurements are deterministic per seed
    const auto g1 = simulate_measurements(dist, cb, mask, 1e-3, 7);
    const auto g2 = simulate_measurements(dist, cb, mask, 1e-3, 7);
    REQUIRE(g1.measured == g2.measured);
}

TEST_CASE("exact model recovers the distortion field") {
    const auto axes = make_grid_axes(3, 4, 16);
    const auto cb = make_abf_codebook(2, 0.1, 1.0);
    const auto dist = generate_distortion(11, axes, 0.15, 0.1, {2, 2, 2});
    const auto model = exact_model(axes, dist, cb, BeamformingMode::Dbf);

    const auto [nf, nn, nz] = axes.dims();
    for (std::size_t fi = 0; fi < nf; ++fi)
        for (std::size_t ni = 0; ni < nn; ++ni)
            for (std::size_t zi = 0; zi < nz; ++zi) {
                const cplx d_hat = estimate_distortion(model, fi, ni, zi);
                REQUIRE(std::abs(d_hat - dist.at(fi, ni, zi)) < 1e-12);
            }
    REQUIRE_THROWS_AS(estimate_distortion(model, nf, 0, 0), std::invalid_argument);
}

TEST_CASE("DBF correction cancels the distortion under an exact model") {
    const auto axes = make_grid_axes(3, 4, 16);
    const auto cb = make_abf_codebook(2, 0.1, 1.0);
    const auto dist = generate_distortion(23, axes, 0.2, 0.15, {2, 2, 2});
    const auto model = exact_model(axes, dist, cb, BeamformingMode::Dbf);

    const auto [nf, nn, nz] = axes.dims();
    Eigen::MatrixXcd desired(nf, nn);
    SeededRng rng(3);
    for (std::size_t f = 0; f < nf; ++f)
        for (std::size_t n = 0; n < nn; ++n)
            desired(static_cast<Eigen::Index>(f), static_cast<Eigen::Index>(n)) =
                std::polar(0.3 + 0.7 * rng.uniform(), 2.0 * kPi * rng.uniform());

    const auto corrected = calibrate_dbf(desired, model);
    for (std::size_t f = 0; f < nf; ++f)
        for (std::size_t n = 0; n < nn; ++n) {
            const auto fe = static_cast<Eigen::Index>(f);
            const auto ne = static_cast<Eigen::Index>(n);
            const std::size_t z = cb.nearest_cell_index(desired(fe, ne));
            const cplx realized = corrected(fe, ne) * dist.at(f, n, z);
            REQUIRE(std::abs(realized - desired(fe, ne)) < 1e-12);
        }
}

TEST_CASE("nearest ABF selection finds the exact entries under an exact model") {
    const auto axes = make_grid_axes(2, 5, 64);
    const auto cb = make_abf_codebook(3, 0.1, 1.0);
    const auto dist = generate_distortion(31, axes, 0.05, 0.05, {2, 2, 2});
    const auto model = exact_model(axes, dist, cb, BeamformingMode::Abf);

    const auto [nf, nn, nz] = axes.dims();
    const std::vector<std::size_t> want{3, 17, 40, 5, 63};
    Eigen::MatrixXcd desired(nf, nn);
    for (std::size_t f = 0; f < nf; ++f)
        for (std::size_t n = 0; n < nn; ++n)
            desired(static_cast<Eigen::Index>(f), static_cast<Eigen::Index>(n)) =
                cb.weights[want[n]] * dist.at(f, n, want[n]);

    REQUIRE(calibrate_abf_nearest(desired, model) == want);
    // restricting evaluation to one frequency still recovers the entries here
    REQUIRE(calibrate_abf_nearest(desired, model, {0}) == want);
}

TEST_CASE("ratio ABF selection reproduces a consistent desired chain") {
    const auto axes = make_grid_axes(2, 4, 64);
    const auto cb = make_abf_codebook(3, 0.1, 1.0);
    const auto dist = generate_distortion(53, axes, 0.05, 0.05, {2, 2, 2});
    const auto model = exact_model(axes, dist, cb, BeamformingMode::Abf);

    const auto [nf, nn, nz] = axes.dims();
    const std::vector<std::size_t> want{10, 22, 45, 8};
    Eigen::MatrixXcd desired(nf, nn);
    for (std::size_t f = 0; f < nf; ++f)
        for (std::size_t n = 0; n < nn; ++n)
            desired(static_cast<Eigen::Index>(f), static_cast<Eigen::Index>(n)) =
                cb.weights[want[n]] * dist.at(f, n, want[n]);

    REQUIRE(calibrate_abf_ratio(desired, model) == want);
    Eigen::MatrixXcd narrow(nf, 1);
    narrow.setOnes();
    REQUIRE_THROWS_AS(calibrate_abf_ratio(narrow, model), std::invalid_argument);
}

TEST_CASE("held-out NRMSE diagnostics are populated when truth is supplied") {
    const auto axes = make_grid_axes(3, 4, 16);
    const auto cb = make_abf_codebook(2, 0.1, 1.0);
    const auto dist = generate_distortion(2, axes, 0.1, 0.1, {2, 2, 2});
    const auto mask = design_sampling_plan(axes, 0.5, 9);
    const auto grid = simulate_measurements(dist, cb, mask, 0.0, 3);

    std::vector<cplx> truth(axes.size());
    for (std::size_t i = 0; i < truth.size(); ++i)
        truth[i] = cb.weights[i % cb.size()] * dist.values[i];

    FitOptions opt;
    opt.noise2 = 1e-6;
    opt.cg_tol = 1e-8;
    opt.truth = &truth;
    opt.validation_seed = 12;
    const auto model = fit_calibration_model(grid, kKernels, BeamformingMode::Dbf, cb, opt);
    REQUIRE(model.nrmse_re >= 0.0);
    REQUIRE(model.nrmse_im >= 0.0);
    REQUIRE(model.nrmse_re < 0.5);

    FitOptions no_truth;
    const auto bare = fit_calibration_model(grid, kKernels, BeamformingMode::Dbf, cb, no_truth);
    REQUIRE(bare.nrmse_re == -1.0);
}

TEST_CASE("fitted GP approximates the distortion from partial observations") {
    // Cutoffs {1, 1, 1}: the field's Fourier basis (27 modes) is well covered
    // by the ~150 observations, so the GP can actually identify it.
    const auto axes = make_grid_axes(4, 8, 16);
    const auto cb = make_abf_codebook(2, 0.1, 1.0);
    const auto dist = generate_distortion(6, axes, 0.1, 0.1, {1, 1, 1});
    const auto mask = design_sampling_plan(axes, 0.3, 17);
    const auto grid = simulate_measurements(dist, cb, mask, 1e-5, 8);

    FitOptions opt;
    opt.noise2 = 1e-6;
    opt.cg_tol = 1e-7;
    const auto model = fit_calibration_model(grid, kKernels, BeamformingMode::Dbf, cb, opt);

    // RMS prediction error over the full grid stays well below the
    // distortion amplitude
    double ss = 0.0;
    for (std::size_t i = 0; i < axes.size(); ++i) {
        const cplx truth = cb.weights[i % cb.size()] * dist.values[i];
        const cplx pred(model.mean_re(static_cast<Eigen::Index>(i)),
                        model.mean_im(static_cast<Eigen::Index>(i)));
        ss += std::norm(truth - pred);
    }
    const double rms = std::sqrt(ss / static_cast<double>(axes.size()));
    REQUIRE(rms < 0.02);
}
