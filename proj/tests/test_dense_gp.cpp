// SPDX-License-Identifier: Apache-2.0
//
// arraycal: simulation toolkit for phased-array calibration with
// Kronecker-structured Gaussian-process regression.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
// http://www.apache.org/licenses/LICENSE-2.0

#include <Eigen/Eigenvalues>
#include <catch2/catch_amalgamated.hpp>

#include "arraycal/dense_gp.hpp"
#include "arraycal/optimize.hpp"
#include "arraycal/rng.hpp"

using namespace arraycal;

namespace {
Eigen::MatrixXd points_1d(const std::vector<double>& xs) {
    Eigen::MatrixXd X(static_cast<Eigen::Index>(xs.size()), 1);
    for (std::size_t i = 0; i < xs.size(); ++i) X(static_cast<Eigen::Index>(i), 0) = xs[i];
    return X;
}
}  // namespace

TEST_CASE("dense GP interpolates nearly noise-free data") {
    std::vector<double> xs;
    for (int i = 0; i < 9; ++i) xs.push_back(i / 8.0);
    Eigen::VectorXd y(9);
    for (int i = 0; i < 9; ++i) y(i) = std::sin(3.0 * xs[static_cast<std::size_t>(i)]);
    const KernelSpec k{RqParams{1.0, 0.3, 2.0}};
    const auto model = fit_dense_gp(points_1d(xs), y, k, 1e-10);
    const auto pred = dense_gp_predict(model, points_1d(xs));
    for (int i = 0; i < 9; ++i) {
        REQUIRE(pred.mean(i) == Catch::Approx(y(i)).margin(1e-5));
        REQUIRE(pred.variance(i) >= 0.0);
        REQUIRE(pred.variance(i) < 1e-6);
    }
}

TEST_CASE("dense GP posterior matches an explicit linear solve") {
    SeededRng rng(21);
    std::vector<double> xs(7);
    for (double& v : xs) v = rng.uniform();
    std::sort(xs.begin(), xs.end());
    Eigen::VectorXd y(7);
    for (int i = 0; i < 7; ++i) y(i) = rng.gaussian();
    const KernelSpec k{RqParams{1.2, 0.4, 1.5}};
    const double noise2 = 1e-3;
    const auto model = fit_dense_gp(points_1d(xs), y, k, noise2);

    const std::vector<double> qs{0.05, 0.33, 0.71, 0.99};
    const auto pred = dense_gp_predict(model, points_1d(qs));

    // independent path: full-pivot LU instead of Cholesky
    Eigen::MatrixXd K = gram_matrix_1d(k, xs);
    K.diagonal().array() += noise2;
    const Eigen::VectorXd alpha = K.fullPivLu().solve(y);
    for (std::size_t j = 0; j < qs.size(); ++j) {
        Eigen::VectorXd ks(7);
        for (int i = 0; i < 7; ++i)
            ks(i) = kernel_eval_1d(k, xs[static_cast<std::size_t>(i)], qs[j]);
        const double mean = ks.dot(alpha);
        const double var = kernel_eval_1d(k, qs[j], qs[j]) - ks.dot(K.fullPivLu().solve(ks));
        REQUIRE(pred.mean(static_cast<Eigen::Index>(j)) == Catch::Approx(mean).margin(1e-10));
        REQUIRE(pred.variance(static_cast<Eigen::Index>(j)) ==
                Catch::Approx(var).margin(1e-10));
    }
}

TEST_CASE("log marginal likelihood matches an eigenvalue computation") {
    SeededRng rng(3);
    std::vector<double> xs(10);
    for (double& v : xs) v = rng.uniform();
    std::sort(xs.begin(), xs.end());
    Eigen::VectorXd y(10);
    for (int i = 0; i < 10; ++i) y(i) = rng.gaussian();
    const KernelSpec k{RqParams{0.9, 0.25, 3.0}};
    const double noise2 = 1e-2;

    Eigen::MatrixXd K = gram_matrix_1d(k, xs);
    K.diagonal().array() += noise2;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(K);
    double logdet = 0.0;
    for (Eigen::Index i = 0; i < 10; ++i) logdet += std::log(es.eigenvalues()(i));
    const double quad = y.dot(K.fullPivLu().solve(y));
    const double expected = -0.5 * quad - 0.5 * logdet - 5.0 * std::log(2.0 * kPi);

    REQUIRE(log_marginal_likelihood(points_1d(xs), y, k, noise2) ==
            Catch::Approx(expected).margin(1e-8));
}

TEST_CASE("jitter escalation recovers from duplicate inputs") {
    // duplicate rows make K + 0 I singular
    std::vector<double> xs{0.2, 0.2, 0.7};
    Eigen::VectorXd y(3);
    y << 1.0, 1.0, -1.0;
    const auto model = fit_dense_gp(points_1d(xs), y, KernelSpec{RqParams{1.0, 0.5, 1.0}}, 0.0);
    REQUIRE(model.jitter > 0.0);
    REQUIRE(model.jitter <= 1e-6 * 1.1);
    const auto pred = dense_gp_predict(model, points_1d({0.2}));
    REQUIRE(pred.mean(0) == Catch::Approx(1.0).margin(1e-3));
}

TEST_CASE("hyperparameter optimization does not decrease the likelihood") {
    SeededRng rng(17);
    std::vector<double> xs(16);
    for (std::size_t i = 0; i < xs.size(); ++i) xs[i] = static_cast<double>(i) / 15.0;
    Eigen::VectorXd y(16);
    for (Eigen::Index i = 0; i < 16; ++i)
        y(i) = std::sin(8.0 * xs[static_cast<std::size_t>(i)]) + 0.05 * rng.gaussian();

    const KernelSpec init{RqParams{1.0, 1.0, 1.0}};
    const double ll0 = log_marginal_likelihood(points_1d(xs), y, init, 1e-2);
    HyperOptOptions opts;
    opts.max_iters = 80;
    opts.restarts = 2;
    opts.seed = 1;
    const auto fit = optimize_hyperparameters(points_1d(xs), y, init, 1e-2, opts);
    REQUIRE(fit.lml >= ll0);
    if (fit.improved) REQUIRE(fit.lml > ll0);
    // tuned parameters stay within their declared bounds
    const auto raw = pack_hyperparameters(fit.kernel);
    const auto info = hyperparameter_info(fit.kernel);
    for (std::size_t i = 0; i < raw.size(); ++i) {
        REQUIRE(raw[i] >= info[i].lo);
        REQUIRE(raw[i] <= info[i].hi);
    }
    REQUIRE(fit.noise2 >= 1e-8);
    REQUIRE(fit.noise2 <= 1.0);
}

TEST_CASE("dense GP validates inputs") {
    Eigen::MatrixXd X(2, 1);
    X << 0.0, 1.0;
    Eigen::VectorXd y(3);
    y.setZero();
    REQUIRE_THROWS_AS(fit_dense_gp(X, y, KernelSpec{}, 0.1), std::invalid_argument);
    Eigen::VectorXd y2(2);
    y2.setZero();
    REQUIRE_THROWS_AS(fit_dense_gp(X, y2, KernelSpec{}, -0.1), std::invalid_argument);
}
