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

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>
#include <stdexcept>
#include <vector>

#include "arraycal/common.hpp"

namespace arraycal {

namespace detail {

/// Multiply factor K (n_d x n_d) along axis d of the row-major tensor held in
/// `v` with dimensions `dims`, in place. Each slice multiplication is a GEMM.
inline void apply_along_axis(const Eigen::MatrixXd& K, Eigen::VectorXd& v,
                             const std::vector<Eigen::Index>& dims, std::size_t d) {
    const Eigen::Index nd = dims[d];
    Eigen::Index left = 1, right = 1;
    for (std::size_t i = 0; i < d; ++i) left *= dims[i];
    for (std::size_t i = d + 1; i < dims.size(); ++i) right *= dims[i];

    using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
    if (right == 1) {
        // fastest axis: one (left x nd) block, contract on the right
        Eigen::Map<RowMat> B(v.data(), left, nd);
        RowMat out = B * K.transpose();
        B = out;
        return;
    }
    for (Eigen::Index l = 0; l < left; ++l) {
        Eigen::Map<RowMat> B(v.data() + l * nd * right, nd, right);
        RowMat out = K * B;
        B = out;
    }
}

}  // namespace detail

/// (K_1 kron ... kron K_D) v without materializing the product; cost
/// O(m sum_d n_d) for m = prod n_d. Index order matches row-major flattening
/// with axis 0 slowest.
inline Eigen::VectorXd kron_matvec(const std::vector<Eigen::MatrixXd>& factors,
                                   const Eigen::VectorXd& v) {
    if (factors.empty()) throw std::invalid_argument("kron_matvec: no factors");
    std::vector<Eigen::Index> dims;
    Eigen::Index total = 1;
    for (const auto& K : factors) {
        if (K.rows() != K.cols() || K.rows() == 0)
            throw std::invalid_argument("kron_matvec: factors must be square");
        dims.push_back(K.rows());
        total *= K.rows();
    }
    if (v.size() != total)
        throw std::invalid_argument("kron_matvec: vector length mismatch");
    Eigen::VectorXd out = v;
    for (std::size_t d = 0; d < factors.size(); ++d)
        detail::apply_along_axis(factors[d], out, dims, d);
    return out;
}

struct AxisEigen {
    Eigen::VectorXd values;
    Eigen::MatrixXd vectors;
};

/// Per-axis symmetric eigendecompositions; the eigenvalues of the full
/// Kronecker product are all products of per-axis eigenvalues.
inline std::vector<AxisEigen> kron_eigendecomposition(
    const std::vector<Eigen::MatrixXd>& factors) {
    if (factors.empty()) throw std::invalid_argument("kron_eigendecomposition: no factors");
    std::vector<AxisEigen> out;
    out.reserve(factors.size());
    for (const auto& K : factors) {
        if (K.rows() != K.cols() || K.rows() == 0)
            throw std::invalid_argument("kron_eigendecomposition: factors must be square");
        const double scale = K.cwiseAbs().maxCoeff();
        if ((K - K.transpose()).cwiseAbs().maxCoeff() > 1e-10 * std::max(scale, 1.0))
            throw std::invalid_argument("kron_eigendecomposition: non-symmetric factor");
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(K);
        if (es.info() != Eigen::Success)
            throw NumericalError("kron_eigendecomposition: eigensolver failed");
        out.push_back({es.eigenvalues(), es.eigenvectors()});
    }
    return out;
}

/// All eigenvalues of the Kronecker product, unsorted (products of per-axis
/// eigenvalues in row-major index order).
inline Eigen::VectorXd kron_eigenvalues(const std::vector<AxisEigen>& eigs) {
    Eigen::VectorXd vals = Eigen::VectorXd::Ones(1);
    for (const auto& e : eigs) {
        Eigen::VectorXd next(vals.size() * e.values.size());
        Eigen::Index idx = 0;
        for (Eigen::Index i = 0; i < vals.size(); ++i)
            for (Eigen::Index j = 0; j < e.values.size(); ++j)
                next(idx++) = vals(i) * e.values(j);
        vals = next;
    }
    return vals;
}

}  // namespace arraycal
