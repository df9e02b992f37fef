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
#include <memory>
#include <stdexcept>
#include <variant>
#include <vector>

#include "arraycal/common.hpp"

namespace arraycal {

/// Rational quadratic: sigma2 (1 + r^2 / (2 alpha l^2))^-alpha with
/// r = ||x - x'||. alpha weights large-scale against small-scale variation.
struct RqParams {
    double sigma2 = 1.0;
    double length = 1.0;
    double alpha = 1.0;
};

struct SmComponent {
    double weight = 1.0;
    double mean = 0.0;      // spectral peak location (cycles per unit input)
    double variance = 1.0;  // spectral peak width
};

/// Spectral mixture on scalar inputs:
/// k(tau) = sum_q w_q exp(-2 pi^2 tau^2 v_q) cos(2 pi tau mu_q).
struct SmParams {
    std::vector<SmComponent> components;
};

struct KernelSpec;

/// Product across input coordinates: factor d applies to coordinate d.
struct ProductParams {
    std::vector<KernelSpec> factors;
};

struct KernelSpec {
    std::variant<RqParams, SmParams, ProductParams> params;

    KernelSpec() : params(RqParams{}) {}
    KernelSpec(RqParams p) : params(std::move(p)) {}
    KernelSpec(SmParams p) : params(std::move(p)) {}
    KernelSpec(ProductParams p) : params(std::move(p)) {}
};

inline void validate_kernel(const KernelSpec& k) {
    if (const auto* rq = std::get_if<RqParams>(&k.params)) {
        if (!(rq->sigma2 > 0.0) || !(rq->length > 0.0) || !(rq->alpha > 0.0))
            throw std::invalid_argument("RQ kernel: hyperparameters must be > 0");
    } else if (const auto* sm = std::get_if<SmParams>(&k.params)) {
        if (sm->components.empty())
            throw std::invalid_argument("SM kernel: at least one component required");
        for (const auto& c : sm->components) {
            if (!(c.weight > 0.0) || !(c.variance > 0.0) || c.mean < 0.0)
                throw std::invalid_argument("SM kernel: invalid component");
        }
    } else {
        const auto& prod = std::get<ProductParams>(k.params);
        if (prod.factors.empty())
            throw std::invalid_argument("product kernel: no factors");
        for (const auto& f : prod.factors) validate_kernel(f);
    }
}

inline double rq_kernel(const Eigen::VectorXd& x, const Eigen::VectorXd& y,
                        const RqParams& p) {
    if (!(p.sigma2 > 0.0) || !(p.length > 0.0) || !(p.alpha > 0.0))
        throw std::invalid_argument("rq_kernel: hyperparameters must be > 0");
    const double r2 = (x - y).squaredNorm();
    return p.sigma2 * std::pow(1.0 + r2 / (2.0 * p.alpha * p.length * p.length), -p.alpha);
}

inline double sm_kernel(double x, double y, const SmParams& p) {
    if (p.components.empty())
        throw std::invalid_argument("sm_kernel: at least one component required");
    const double tau = x - y;
    double acc = 0.0;
    for (const auto& c : p.components) {
        if (!(c.weight > 0.0) || !(c.variance > 0.0))
            throw std::invalid_argument("sm_kernel: invalid component");
        acc += c.weight * std::exp(-2.0 * kPi * kPi * tau * tau * c.variance) *
               std::cos(2.0 * kPi * tau * c.mean);
    }
    return acc;
}

inline double kernel_eval(const KernelSpec& k, const Eigen::VectorXd& x,
                          const Eigen::VectorXd& y) {
    if (const auto* rq = std::get_if<RqParams>(&k.params)) return rq_kernel(x, y, *rq);
    if (const auto* sm = std::get_if<SmParams>(&k.params)) {
        if (x.size() != 1 || y.size() != 1)
            throw std::invalid_argument("kernel_eval: SM kernel expects scalar inputs");
        return sm_kernel(x(0), y(0), *sm);
    }
    const auto& prod = std::get<ProductParams>(k.params);
    if (x.size() != static_cast<Eigen::Index>(prod.factors.size()) || x.size() != y.size())
        throw std::invalid_argument("kernel_eval: product kernel dimension mismatch");
    double acc = 1.0;
    Eigen::VectorXd xi(1), yi(1);
    for (Eigen::Index d = 0; d < x.size(); ++d) {
        xi(0) = x(d);
        yi(0) = y(d);
        acc *= kernel_eval(prod.factors[d], xi, yi);
    }
    return acc;
}

inline double kernel_eval_1d(const KernelSpec& k, double x, double y) {
    Eigen::VectorXd a(1), b(1);
    a(0) = x;
    b(0) = y;
    return kernel_eval(k, a, b);
}

/// Symmetric Gram matrix K_ij = k(x_i, x_j) for points given as matrix rows.
inline Eigen::MatrixXd gram_matrix(const KernelSpec& k, const Eigen::MatrixXd& points) {
    if (points.rows() == 0) throw std::invalid_argument("gram_matrix: no points");
    const Eigen::Index m = points.rows();
    Eigen::MatrixXd K(m, m);
    for (Eigen::Index i = 0; i < m; ++i) {
        for (Eigen::Index j = 0; j <= i; ++j) {
            const double v =
                kernel_eval(k, points.row(i).transpose(), points.row(j).transpose());
            K(i, j) = v;
            K(j, i) = v;
        }
    }
    return K;
}

inline Eigen::MatrixXd gram_matrix_1d(const KernelSpec& k, const std::vector<double>& xs) {
    Eigen::MatrixXd pts(static_cast<Eigen::Index>(xs.size()), 1);
    for (std::size_t i = 0; i < xs.size(); ++i) pts(static_cast<Eigen::Index>(i), 0) = xs[i];
    return gram_matrix(k, pts);
}

// --- hyperparameter flattening (used by the marginal-likelihood optimizer) ---

struct ParamInfo {
    bool log_scale;
    double lo, hi;  // bounds in the raw (non-log) domain
};

namespace detail {
inline void collect_params(KernelSpec& k, std::vector<double*>& out,
                           std::vector<ParamInfo>* info) {
    if (auto* rq = std::get_if<RqParams>(&k.params)) {
        out.push_back(&rq->sigma2);
        out.push_back(&rq->length);
        out.push_back(&rq->alpha);
        if (info) {
            info->push_back({true, 1e-4, 10.0});
            info->push_back({true, 0.01, 10.0});
            info->push_back({true, 0.1, 100.0});
        }
    } else if (auto* sm = std::get_if<SmParams>(&k.params)) {
        for (auto& c : sm->components) {
            out.push_back(&c.weight);
            out.push_back(&c.mean);
            out.push_back(&c.variance);
            if (info) {
                info->push_back({true, 1e-4, 10.0});
                info->push_back({false, 0.0, 64.0});
                info->push_back({true, 1e-6, 100.0});
            }
        }
    } else {
        for (auto& f : std::get<ProductParams>(k.params).factors)
            collect_params(f, out, info);
    }
}
}  // namespace detail

inline std::vector<double> pack_hyperparameters(const KernelSpec& k) {
    auto copy = k;
    std::vector<double*> ptrs;
    detail::collect_params(copy, ptrs, nullptr);
    std::vector<double> v(ptrs.size());
    for (std::size_t i = 0; i < ptrs.size(); ++i) v[i] = *ptrs[i];
    return v;
}

inline void unpack_hyperparameters(KernelSpec& k, const std::vector<double>& v) {
    std::vector<double*> ptrs;
    detail::collect_params(k, ptrs, nullptr);
    if (ptrs.size() != v.size())
        throw std::invalid_argument("unpack_hyperparameters: size mismatch");
    for (std::size_t i = 0; i < ptrs.size(); ++i) *ptrs[i] = v[i];
}

inline std::vector<ParamInfo> hyperparameter_info(const KernelSpec& k) {
    auto copy = k;
    std::vector<double*> ptrs;
    std::vector<ParamInfo> info;
    detail::collect_params(copy, ptrs, &info);
    return info;
}

}  // namespace arraycal
