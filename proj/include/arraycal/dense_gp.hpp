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

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <stdexcept>

#include "arraycal/common.hpp"
#include "arraycal/kernels.hpp"

namespace arraycal {

/// Exact zero-mean GP regression with a Gaussian likelihood. This is the
/// reference ("oracle") path; the Kronecker solver must agree with it on
/// small grids.
struct DenseGpModel {
    Eigen::MatrixXd X;  // m x d training inputs
    Eigen::VectorXd y;
    KernelSpec kernel;
    double noise2 = 0.0;
    Eigen::LLT<Eigen::MatrixXd> chol;  // of K + noise2 I (+ jitter)
    Eigen::VectorXd alpha;             // (K + noise2 I)^-1 y
    double jitter = 0.0;
};

namespace detail {
/// Cholesky with jitter escalation from 1e-10 to 1e-6 of the mean diagonal.
inline Eigen::LLT<Eigen::MatrixXd> robust_llt(const Eigen::MatrixXd& A, double* jitter_out) {
    const double diag_mean = A.diagonal().mean();
    Eigen::LLT<Eigen::MatrixXd> llt(A);
    double jitter = 0.0;
    if (llt.info() != Eigen::Success) {
        for (double rel = 1e-10; rel <= 1e-6 * 1.0001; rel *= 10.0) {
            jitter = rel * diag_mean;
            llt.compute(A + jitter * Eigen::MatrixXd::Identity(A.rows(), A.cols()));
            if (llt.info() == Eigen::Success) break;
        }
        if (llt.info() != Eigen::Success)
            throw NumericalError("Cholesky failed after jitter escalation");
    }
    if (jitter_out) *jitter_out = jitter;
    return llt;
}
}  // namespace detail

inline DenseGpModel fit_dense_gp(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                                 const KernelSpec& kernel, double noise2) {
    if (X.rows() != y.size() || X.rows() == 0)
        throw std::invalid_argument("fit_dense_gp: inputs/targets length mismatch");
    if (noise2 < 0.0) throw std::invalid_argument("fit_dense_gp: negative noise variance");
    validate_kernel(kernel);
    DenseGpModel m;
    m.X = X;
    m.y = y;
    m.kernel = kernel;
    m.noise2 = noise2;
    Eigen::MatrixXd A = gram_matrix(kernel, X);
    A.diagonal().array() += noise2;
    m.chol = detail::robust_llt(A, &m.jitter);
    m.alpha = m.chol.solve(y);
    return m;
}

struct GpPrediction {
    Eigen::VectorXd mean;
    Eigen::VectorXd variance;
};

inline GpPrediction dense_gp_predict(const DenseGpModel& model, const Eigen::MatrixXd& Xq) {
    if (model.X.rows() == 0) throw std::logic_error("dense_gp_predict: model not fitted");
    if (Xq.cols() != model.X.cols())
        throw std::invalid_argument("dense_gp_predict: query dimension mismatch");
    const Eigen::Index q = Xq.rows(), m = model.X.rows();
    Eigen::MatrixXd Ks(m, q);  // k(x_i, x*_j)
    for (Eigen::Index j = 0; j < q; ++j)
        for (Eigen::Index i = 0; i < m; ++i)
            Ks(i, j) = kernel_eval(model.kernel, model.X.row(i).transpose(),
                                   Xq.row(j).transpose());
    GpPrediction out;
    out.mean = Ks.transpose() * model.alpha;
    out.variance.resize(q);
    const Eigen::MatrixXd V = model.chol.solve(Ks);  // (K + s2 I)^-1 k*
    for (Eigen::Index j = 0; j < q; ++j) {
        const double prior = kernel_eval(model.kernel, Xq.row(j).transpose(),
                                         Xq.row(j).transpose());
        double v = prior - Ks.col(j).dot(V.col(j));
        if (v < -1e-10)
            throw NumericalError("dense_gp_predict: negative posterior variance");
        out.variance(j) = v < 0.0 ? 0.0 : v;
    }
    return out;
}

/// -1/2 y' (K + s2 I)^-1 y - 1/2 log det(K + s2 I) - (m/2) log 2 pi.
inline double log_marginal_likelihood(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                                      const KernelSpec& kernel, double noise2) {
    if (X.rows() != y.size() || X.rows() == 0)
        throw std::invalid_argument("log_marginal_likelihood: bad dataset");
    validate_kernel(kernel);
    Eigen::MatrixXd A = gram_matrix(kernel, X);
    A.diagonal().array() += noise2;
    const auto llt = detail::robust_llt(A, nullptr);
    const Eigen::VectorXd alpha = llt.solve(y);
    double logdet = 0.0;
    const auto& L = llt.matrixL();
    for (Eigen::Index i = 0; i < A.rows(); ++i) logdet += 2.0 * std::log(L(i, i));
    return -0.5 * y.dot(alpha) - 0.5 * logdet -
           0.5 * static_cast<double>(y.size()) * std::log(2.0 * kPi);
}

}  // namespace arraycal
