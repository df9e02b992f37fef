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
#include <algorithm>
#include <cstdint>
#include <stdexcept>
#include <tuple>
#include <vector>

#include "arraycal/common.hpp"
#include "arraycal/grid.hpp"
#include "arraycal/kernels.hpp"
#include "arraycal/kron.hpp"

namespace arraycal {

/// GP posterior on the product grid. The covariance over the full grid is
/// K_1 kron K_2 kron K_3 and is never materialized; missing observations are
/// handled by a selection operator inside the conjugate-gradient solve of
/// (S K S' + noise2 I) u = y.
struct KronGpModel {
    GridAxes axes;
    std::array<KernelSpec, 3> kernels;
    double noise2 = 0.0;
    std::vector<Eigen::MatrixXd> grams;      // per-axis Gram factors
    std::vector<Eigen::MatrixXd> eigvecs;    // per-axis eigenvector factors
    std::vector<Eigen::VectorXd> eigvals;    // per-axis eigenvalues
    Eigen::VectorXd inv_precond;             // 1/(frac lambda + noise2), grid order
    std::vector<std::uint8_t> mask;          // full grid, row-major
    std::vector<std::size_t> observed;       // flat indices of observed entries
    Eigen::VectorXd y;                       // observed targets, grid order
    Eigen::VectorXd u;                       // CG solution
    // Reduced-rank solve (large masked grids): kept Kronecker eigen-triples
    // and posterior coefficients; empty when the dense or CG path was used.
    std::vector<std::array<int, 3>> basis;
    Eigen::VectorXd coeffs;
    int cg_iterations = 0;
    double cg_residual = 0.0;

    bool fitted() const { return u.size() > 0; }
};

namespace detail {

/// y_obs = S K S' x + noise2 x for x over observed entries.
inline Eigen::VectorXd masked_kernel_apply(const KronGpModel& m, const Eigen::VectorXd& x) {
    Eigen::VectorXd full = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(m.axes.size()));
    for (std::size_t i = 0; i < m.observed.size(); ++i)
        full(static_cast<Eigen::Index>(m.observed[i])) = x(static_cast<Eigen::Index>(i));
    full = kron_matvec(m.grams, full);
    Eigen::VectorXd out(x.size());
    for (std::size_t i = 0; i < m.observed.size(); ++i)
        out(static_cast<Eigen::Index>(i)) = full(static_cast<Eigen::Index>(m.observed[i]));
    return out + m.noise2 * x;
}

/// Preconditioner setup: per-axis eigendecompositions and the diagonal
/// 1/(frac lambda_i + noise2), where frac is the observed fraction. This is
/// the exact inverse of K + noise2 I on a full mask and a close surrogate
/// for S K S' + noise2 I on uniform random masks.
inline void build_preconditioner(KronGpModel& m) {
    const auto eigs = kron_eigendecomposition(m.grams);
    m.eigvecs.clear();
    m.eigvals.clear();
    for (const auto& e : eigs) {
        m.eigvecs.push_back(e.vectors);
        m.eigvals.push_back(e.values);
    }
    Eigen::VectorXd lam = kron_eigenvalues(eigs);
    const double frac =
        static_cast<double>(m.observed.size()) / static_cast<double>(m.axes.size());
    m.inv_precond.resize(lam.size());
    for (Eigen::Index i = 0; i < lam.size(); ++i)
        m.inv_precond(i) = 1.0 / (frac * std::max(lam(i), 0.0) + m.noise2);
}

/// z = S Q diag Q' S' r for r over observed entries.
inline Eigen::VectorXd masked_precond_apply(const KronGpModel& m, const Eigen::VectorXd& r) {
    Eigen::VectorXd full = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(m.axes.size()));
    for (std::size_t i = 0; i < m.observed.size(); ++i)
        full(static_cast<Eigen::Index>(m.observed[i])) = r(static_cast<Eigen::Index>(i));
    std::vector<Eigen::MatrixXd> qt;
    for (const auto& Q : m.eigvecs) qt.push_back(Q.transpose());
    full = kron_matvec(qt, full);
    full.array() *= m.inv_precond.array();
    full = kron_matvec(m.eigvecs, full);
    Eigen::VectorXd out(r.size());
    for (std::size_t i = 0; i < m.observed.size(); ++i)
        out(static_cast<Eigen::Index>(i)) = full(static_cast<Eigen::Index>(m.observed[i]));
    return out;
}

/// Dense masked Gram S K S' built entry-wise from the per-axis factors.
inline Eigen::MatrixXd masked_gram(const KronGpModel& m) {
    const auto [nf, nn, nz] = m.axes.dims();
    const Eigen::Index n = static_cast<Eigen::Index>(m.observed.size());
    Eigen::MatrixXd K(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const std::size_t a = m.observed[static_cast<std::size_t>(i)];
        const std::size_t az = a % nz, an = (a / nz) % nn, af = a / (nz * nn);
        for (Eigen::Index j = 0; j <= i; ++j) {
            const std::size_t b = m.observed[static_cast<std::size_t>(j)];
            const std::size_t bz = b % nz, bn = (b / nz) % nn, bf = b / (nz * nn);
            const double v = m.grams[0](static_cast<Eigen::Index>(af),
                                        static_cast<Eigen::Index>(bf)) *
                             m.grams[1](static_cast<Eigen::Index>(an),
                                        static_cast<Eigen::Index>(bn)) *
                             m.grams[2](static_cast<Eigen::Index>(az),
                                        static_cast<Eigen::Index>(bz));
            K(i, j) = v;
            K(j, i) = v;
        }
    }
    return K;
}

/// Largest observation count handled by the direct dense solve. The kernel
/// systems are ill-conditioned enough that CG loses conjugacy to rounding on
/// small problems, while a Cholesky factorization is both exact and cheap.
inline constexpr std::size_t kDenseSolveLimit = 4096;

/// Rank cap for the reduced solve on large grids.
inline constexpr std::size_t kMaxReducedRank = 1536;

/// Reduced-rank direct solve for large masked systems. The kernel is
/// truncated to its leading Kronecker eigen-triples (lambda above a small
/// fraction of the top eigenvalue and of the noise floor) and the resulting
/// low-rank-plus-noise system is solved exactly with the Woodbury identity.
/// Prediction must use the same truncated kernel, so the kept triples and
/// posterior coefficients are recorded on the model; mixing the truncated
/// solution with the full kernel would amplify the dropped directions by
/// lambda / noise2.
inline void reduced_rank_solve(KronGpModel& m) {
    const auto [nf, nn, nz] = m.axes.dims();
    const Eigen::VectorXd& l1 = m.eigvals[0];
    const Eigen::VectorXd& l2 = m.eigvals[1];
    const Eigen::VectorXd& l3 = m.eigvals[2];
    const double lmax = std::max(l1.maxCoeff(), 0.0) * std::max(l2.maxCoeff(), 0.0) *
                        std::max(l3.maxCoeff(), 0.0);
    if (!(lmax > 0.0))
        throw NumericalError("reduced_rank_solve: kernel eigenvalues not positive");
    const double delta = std::max(1e-9 * lmax, 1e-2 * m.noise2);

    struct Trip {
        double lam;
        int i, j, k;
    };
    std::vector<Trip> kept;
    for (int i = 0; i < static_cast<int>(nf); ++i) {
        if (!(l1(i) > 0.0)) continue;
        for (int j = 0; j < static_cast<int>(nn); ++j) {
            if (!(l2(j) > 0.0)) continue;
            const double l12 = l1(i) * l2(j);
            if (l12 * l3.maxCoeff() <= delta) continue;
            for (int k = 0; k < static_cast<int>(nz); ++k) {
                if (!(l3(k) > 0.0)) continue;
                const double lam = l12 * l3(k);
                if (lam > delta) kept.push_back({lam, i, j, k});
            }
        }
    }
    if (kept.empty()) throw NumericalError("reduced_rank_solve: empty eigenbasis");
    std::sort(kept.begin(), kept.end(), [](const Trip& a, const Trip& b) {
        if (a.lam != b.lam) return a.lam > b.lam;
        return std::tie(a.i, a.j, a.k) < std::tie(b.i, b.j, b.k);
    });
    if (kept.size() > kMaxReducedRank) kept.resize(kMaxReducedRank);

    const Eigen::Index r = static_cast<Eigen::Index>(kept.size());
    const Eigen::Index mo = static_cast<Eigen::Index>(m.observed.size());
    Eigen::VectorXd lam(r);
    for (Eigen::Index a = 0; a < r; ++a) lam(a) = kept[static_cast<std::size_t>(a)].lam;

    // Decomposed grid indices per observed point.
    std::vector<int> fo(static_cast<std::size_t>(mo)), no(static_cast<std::size_t>(mo)),
        zo(static_cast<std::size_t>(mo));
    for (Eigen::Index p = 0; p < mo; ++p) {
        const std::size_t x = m.observed[static_cast<std::size_t>(p)];
        zo[static_cast<std::size_t>(p)] = static_cast<int>(x % nz);
        no[static_cast<std::size_t>(p)] = static_cast<int>((x / nz) % nn);
        fo[static_cast<std::size_t>(p)] = static_cast<int>(x / (nz * nn));
    }
    const Eigen::MatrixXd& V1 = m.eigvecs[0];
    const Eigen::MatrixXd& V2 = m.eigvecs[1];
    const Eigen::MatrixXd& V3 = m.eigvecs[2];

    const Eigen::Index chunk = 8192;
    Eigen::MatrixXd U(std::min(chunk, mo), r);
    auto fill_chunk = [&](Eigen::Index start, Eigen::Index rows) {
        for (Eigen::Index a = 0; a < r; ++a) {
            const Trip& t = kept[static_cast<std::size_t>(a)];
            for (Eigen::Index p = 0; p < rows; ++p) {
                const std::size_t q = static_cast<std::size_t>(start + p);
                U(p, a) = V1(fo[q], t.i) * V2(no[q], t.j) * V3(zo[q], t.k);
            }
        }
    };

    Eigen::MatrixXd G = Eigen::MatrixXd::Zero(r, r);
    Eigen::VectorXd Uty = Eigen::VectorXd::Zero(r);
    for (Eigen::Index start = 0; start < mo; start += chunk) {
        const Eigen::Index rows = std::min(chunk, mo - start);
        fill_chunk(start, rows);
        G.selfadjointView<Eigen::Lower>().rankUpdate(U.topRows(rows).transpose());
        Uty.noalias() += U.topRows(rows).transpose() * m.y.segment(start, rows);
    }
    Eigen::MatrixXd C = G.selfadjointView<Eigen::Lower>();
    for (Eigen::Index a = 0; a < r; ++a) C(a, a) += m.noise2 / lam(a);
    const Eigen::LLT<Eigen::MatrixXd> llt(C);
    if (llt.info() != Eigen::Success)
        throw NumericalError("reduced_rank_solve: Woodbury factorization failed");
    const Eigen::VectorXd c0 = llt.solve(Uty);

    m.u.resize(mo);
    Eigen::VectorXd Utu = Eigen::VectorXd::Zero(r);
    for (Eigen::Index start = 0; start < mo; start += chunk) {
        const Eigen::Index rows = std::min(chunk, mo - start);
        fill_chunk(start, rows);
        const Eigen::VectorXd uc =
            (m.y.segment(start, rows) - U.topRows(rows) * c0) / m.noise2;
        m.u.segment(start, rows) = uc;
        Utu.noalias() += U.topRows(rows).transpose() * uc;
    }
    m.coeffs = lam.cwiseProduct(Utu);

    // Residual of the truncated system, for diagnostics.
    double err2 = 0.0;
    for (Eigen::Index start = 0; start < mo; start += chunk) {
        const Eigen::Index rows = std::min(chunk, mo - start);
        fill_chunk(start, rows);
        const Eigen::VectorXd Au =
            U.topRows(rows) * m.coeffs + m.noise2 * m.u.segment(start, rows);
        err2 += (Au - m.y.segment(start, rows)).squaredNorm();
    }
    m.cg_iterations = 0;
    m.cg_residual = std::sqrt(err2) / std::max(m.y.norm(), 1e-300);

    m.basis.resize(kept.size());
    for (std::size_t a = 0; a < kept.size(); ++a)
        m.basis[a] = {kept[a].i, kept[a].j, kept[a].k};
}

/// Preconditioned CG on (S K S' + noise2 I) x = rhs.
inline void conjugate_gradient(const KronGpModel& m, const Eigen::VectorXd& rhs,
                               Eigen::VectorXd& x, double tol, int max_iters,
                               int& iters_out, double& residual_out) {
    const double rhs_norm = rhs.norm();
    if (rhs_norm == 0.0) {
        x.setZero(rhs.size());
        iters_out = 0;
        residual_out = 0.0;
        return;
    }
    x.setZero(rhs.size());
    Eigen::VectorXd r = rhs;
    Eigen::VectorXd z = masked_precond_apply(m, r);
    Eigen::VectorXd p = z;
    double rz = r.dot(z);
    int iters = 0;
    while (iters < max_iters) {
        const Eigen::VectorXd Ap = masked_kernel_apply(m, p);
        const double pAp = p.dot(Ap);
        if (!(pAp > 0.0)) break;
        const double alpha = rz / pAp;
        x += alpha * p;
        r -= alpha * Ap;
        ++iters;
        const double rn = r.norm();
        if (rn / rhs_norm <= tol) {
            iters_out = iters;
            residual_out = rn / rhs_norm;
            return;
        }
        z = masked_precond_apply(m, r);
        const double rz_new = r.dot(z);
        p = z + (rz_new / rz) * p;
        rz = rz_new;
    }
    iters_out = iters;
    residual_out = r.norm() / rhs_norm;
    throw ConvergenceError("grid_gp_fit: CG did not converge", residual_out);
}

}  // namespace detail

inline KronGpModel grid_gp_fit(const GridAxes& axes, const std::vector<std::uint8_t>& mask,
                               const Eigen::VectorXd& targets,
                               const std::array<KernelSpec, 3>& kernels, double noise2,
                               double cg_tol = 1e-8, int cg_max_iters = 0) {
    axes.validate();
    if (mask.size() != axes.size())
        throw std::invalid_argument("grid_gp_fit: mask size != grid size");
    if (noise2 < 0.0) throw std::invalid_argument("grid_gp_fit: negative noise variance");
    for (const auto& k : kernels) validate_kernel(k);

    KronGpModel m;
    m.axes = axes;
    m.kernels = kernels;
    m.noise2 = noise2;
    m.mask = mask;
    for (std::size_t i = 0; i < mask.size(); ++i)
        if (mask[i]) m.observed.push_back(i);
    if (m.observed.empty())
        throw std::invalid_argument("grid_gp_fit: at least one observation required");
    if (targets.size() != static_cast<Eigen::Index>(m.observed.size()))
        throw std::invalid_argument("grid_gp_fit: targets length != observed count");
    m.y = targets;

    for (int d = 0; d < 3; ++d)
        m.grams.push_back(gram_matrix_1d(kernels[d], axes.coords[d]));
    detail::build_preconditioner(m);

    // Auto policy: direct dense solve for small observation sets, reduced-rank
    // direct solve beyond. An explicit cg_max_iters selects the iterative path.
    if (cg_max_iters <= 0) {
        if (m.observed.size() <= detail::kDenseSolveLimit) {
            Eigen::MatrixXd K = detail::masked_gram(m);
            K.diagonal().array() += noise2;
            const Eigen::LLT<Eigen::MatrixXd> llt(K);
            if (llt.info() != Eigen::Success)
                throw NumericalError("grid_gp_fit: masked Gram factorization failed");
            m.u = llt.solve(m.y);
            m.cg_iterations = 0;
            m.cg_residual = (detail::masked_kernel_apply(m, m.u) - m.y).norm() /
                            std::max(m.y.norm(), 1e-300);
        } else {
            detail::reduced_rank_solve(m);
        }
        return m;
    }
    detail::conjugate_gradient(m, m.y, m.u, cg_tol, cg_max_iters, m.cg_iterations,
                               m.cg_residual);
    return m;
}

/// Posterior mean over the full grid: K_{grid,obs} u via one Kronecker MVM,
/// or the eigenbasis expansion for reduced-rank models (the truncated kernel
/// must be used consistently in both the solve and the prediction).
inline Eigen::VectorXd grid_gp_predict_full(const KronGpModel& m) {
    if (!m.fitted()) throw std::logic_error("grid_gp_predict_full: model not fitted");
    if (!m.basis.empty()) {
        const auto [nf, nn, nz] = m.axes.dims();
        Eigen::MatrixXd out =
            Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(nn * nz),
                                  static_cast<Eigen::Index>(nf));
        Eigen::VectorXd col(static_cast<Eigen::Index>(nn * nz));
        for (std::size_t a = 0; a < m.basis.size(); ++a) {
            const auto [i, j, k] = m.basis[a];
            for (std::size_t n = 0; n < nn; ++n)
                col.segment(static_cast<Eigen::Index>(n * nz),
                            static_cast<Eigen::Index>(nz)) =
                    m.eigvecs[1](static_cast<Eigen::Index>(n), j) * m.eigvecs[2].col(k);
            out.noalias() += (m.coeffs(static_cast<Eigen::Index>(a)) * col) *
                             m.eigvecs[0].col(i).transpose();
        }
        return Eigen::Map<const Eigen::VectorXd>(out.data(), out.size());
    }
    Eigen::VectorXd full = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(m.axes.size()));
    for (std::size_t i = 0; i < m.observed.size(); ++i)
        full(static_cast<Eigen::Index>(m.observed[i])) = m.u(static_cast<Eigen::Index>(i));
    return kron_matvec(m.grams, full);
}

inline Eigen::VectorXd grid_gp_predict(const KronGpModel& m,
                                       const std::vector<std::size_t>& indices) {
    const Eigen::VectorXd full = grid_gp_predict_full(m);
    Eigen::VectorXd out(static_cast<Eigen::Index>(indices.size()));
    for (std::size_t i = 0; i < indices.size(); ++i) {
        if (indices[i] >= m.axes.size())
            throw std::invalid_argument("grid_gp_predict: index out of range");
        out(static_cast<Eigen::Index>(i)) = full(static_cast<Eigen::Index>(indices[i]));
    }
    return out;
}

/// Posterior variance at selected grid points. One CG solve per query point,
/// so intended for diagnostics and small grids (off the hot path by default).
inline Eigen::VectorXd grid_gp_predict_variance(const KronGpModel& m,
                                                const std::vector<std::size_t>& indices,
                                                double cg_tol = 1e-8) {
    if (!m.fitted()) throw std::logic_error("grid_gp_predict_variance: model not fitted");
    if (!m.basis.empty())
        throw std::logic_error(
            "grid_gp_predict_variance: unsupported for reduced-rank models");
    const int max_iters =
        static_cast<int>(20.0 * std::sqrt(static_cast<double>(m.axes.size()))) + 50;
    Eigen::VectorXd out(static_cast<Eigen::Index>(indices.size()));
    for (std::size_t q = 0; q < indices.size(); ++q) {
        if (indices[q] >= m.axes.size())
            throw std::invalid_argument("grid_gp_predict_variance: index out of range");
        Eigen::VectorXd e = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(m.axes.size()));
        e(static_cast<Eigen::Index>(indices[q])) = 1.0;
        const Eigen::VectorXd col = kron_matvec(m.grams, e);  // K e_i over the grid
        Eigen::VectorXd k_obs(static_cast<Eigen::Index>(m.observed.size()));
        for (std::size_t i = 0; i < m.observed.size(); ++i)
            k_obs(static_cast<Eigen::Index>(i)) = col(static_cast<Eigen::Index>(m.observed[i]));
        Eigen::VectorXd sol;
        int it = 0;
        double res = 0.0;
        detail::conjugate_gradient(m, k_obs, sol, cg_tol, max_iters, it, res);
        double v = col(static_cast<Eigen::Index>(indices[q])) - k_obs.dot(sol);
        out(static_cast<Eigen::Index>(q)) = v < 0.0 ? 0.0 : v;
    }
    return out;
}

/// Marginal likelihood with the grid-structured log-determinant
/// approximation: the top m_obs Kronecker eigenvalues, scaled by the observed
/// fraction, stand in for the eigenvalues of S K S'. Exact when the mask is
/// full.
inline double kron_log_marginal_likelihood(const KronGpModel& m) {
    if (!m.fitted()) throw std::logic_error("kron_log_marginal_likelihood: model not fitted");
    const auto eigs = kron_eigendecomposition(m.grams);
    Eigen::VectorXd vals = kron_eigenvalues(eigs);
    std::sort(vals.data(), vals.data() + vals.size(), std::greater<double>());
    const std::size_t m_obs = m.observed.size();
    const double frac = static_cast<double>(m_obs) / static_cast<double>(m.axes.size());
    double logdet = 0.0;
    for (std::size_t i = 0; i < m_obs; ++i) {
        const double lam = std::max(vals(static_cast<Eigen::Index>(i)), 0.0);
        logdet += std::log(frac * lam + m.noise2);
    }
    return -0.5 * m.y.dot(m.u) - 0.5 * logdet -
           0.5 * static_cast<double>(m_obs) * std::log(2.0 * kPi);
}

}  // namespace arraycal
