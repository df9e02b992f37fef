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

#include <algorithm>
#include <functional>
#include <limits>
#include <vector>

#include "arraycal/common.hpp"
#include "arraycal/dense_gp.hpp"
#include "arraycal/kernels.hpp"
#include "arraycal/rng.hpp"

namespace arraycal {

struct NelderMeadOptions {
    int max_iters = 200;
    double ftol = 1e-9;
    double init_step = 0.4;
};

struct NelderMeadResult {
    std::vector<double> x;
    double f = std::numeric_limits<double>::infinity();
    int iterations = 0;
};

/// Derivative-free simplex minimization. Deterministic for a given start.
inline NelderMeadResult nelder_mead(const std::function<double(const std::vector<double>&)>& fn,
                                    const std::vector<double>& x0,
                                    const NelderMeadOptions& opts = {}) {
    const std::size_t n = x0.size();
    std::vector<std::vector<double>> simplex(n + 1, x0);
    std::vector<double> fv(n + 1);
    for (std::size_t i = 0; i < n; ++i) simplex[i + 1][i] += opts.init_step;
    for (std::size_t i = 0; i <= n; ++i) fv[i] = fn(simplex[i]);

    auto order = [&] {
        std::vector<std::size_t> idx(n + 1);
        for (std::size_t i = 0; i <= n; ++i) idx[i] = i;
        std::stable_sort(idx.begin(), idx.end(),
                         [&](std::size_t a, std::size_t b) { return fv[a] < fv[b]; });
        std::vector<std::vector<double>> s2(n + 1);
        std::vector<double> f2(n + 1);
        for (std::size_t i = 0; i <= n; ++i) {
            s2[i] = simplex[idx[i]];
            f2[i] = fv[idx[i]];
        }
        simplex.swap(s2);
        fv.swap(f2);
    };

    NelderMeadResult res;
    int it = 0;
    for (; it < opts.max_iters; ++it) {
        order();
        if (std::abs(fv[n] - fv[0]) <= opts.ftol * (std::abs(fv[0]) + opts.ftol)) break;

        std::vector<double> centroid(n, 0.0);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t d = 0; d < n; ++d) centroid[d] += simplex[i][d] / n;

        auto blend = [&](double t, const std::vector<double>& p) {
            std::vector<double> q(n);
            for (std::size_t d = 0; d < n; ++d) q[d] = centroid[d] + t * (p[d] - centroid[d]);
            return q;
        };

        const auto reflected = blend(-1.0, simplex[n]);
        const double fr = fn(reflected);
        if (fr < fv[0]) {
            const auto expanded = blend(-2.0, simplex[n]);
            const double fe = fn(expanded);
            if (fe < fr) {
                simplex[n] = expanded;
                fv[n] = fe;
            } else {
                simplex[n] = reflected;
                fv[n] = fr;
            }
        } else if (fr < fv[n - 1]) {
            simplex[n] = reflected;
            fv[n] = fr;
        } else {
            const auto contracted = blend(fr < fv[n] ? -0.5 : 0.5, simplex[n]);
            const double fc = fn(contracted);
            if (fc < std::min(fr, fv[n])) {
                simplex[n] = contracted;
                fv[n] = fc;
            } else {
                // shrink toward the best vertex
                for (std::size_t i = 1; i <= n; ++i) {
                    for (std::size_t d = 0; d < n; ++d)
                        simplex[i][d] = simplex[0][d] + 0.5 * (simplex[i][d] - simplex[0][d]);
                    fv[i] = fn(simplex[i]);
                }
            }
        }
    }
    order();
    res.x = simplex[0];
    res.f = fv[0];
    res.iterations = it;
    return res;
}

struct HyperOptOptions {
    int max_iters = 100;
    int restarts = 3;
    std::uint64_t seed = 0;
    double init_step = 0.4;
};

struct HyperOptResult {
    std::vector<double> params;  // raw (non-log) domain
    double value = -std::numeric_limits<double>::infinity();
    bool improved = false;  // objective strictly better than at the start point
};

namespace detail {

inline std::vector<double> to_transformed(const std::vector<double>& raw,
                                          const std::vector<ParamInfo>& info) {
    std::vector<double> t(raw.size());
    for (std::size_t i = 0; i < raw.size(); ++i)
        t[i] = info[i].log_scale ? std::log(raw[i]) : raw[i];
    return t;
}

inline std::vector<double> from_transformed(const std::vector<double>& t,
                                            const std::vector<ParamInfo>& info) {
    std::vector<double> raw(t.size());
    for (std::size_t i = 0; i < t.size(); ++i)
        raw[i] = info[i].log_scale ? std::exp(t[i]) : t[i];
    return raw;
}

inline bool within_bounds(const std::vector<double>& raw, const std::vector<ParamInfo>& info) {
    for (std::size_t i = 0; i < raw.size(); ++i)
        if (raw[i] < info[i].lo || raw[i] > info[i].hi) return false;
    return true;
}

}  // namespace detail

/// Multi-start ascent on an arbitrary log-likelihood over bounded
/// hyperparameters. Log-scaled parameters are optimized in log space; points
/// outside their bounds are rejected by penalty. Deterministic given
/// (init, seed, objective).
inline HyperOptResult maximize_hyperparameters(
    const std::function<double(const std::vector<double>&)>& log_likelihood,
    const std::vector<double>& init, const std::vector<ParamInfo>& info,
    const HyperOptOptions& opts = {}) {
    if (init.size() != info.size())
        throw std::invalid_argument("maximize_hyperparameters: init/bounds size mismatch");
    if (!detail::within_bounds(init, info))
        throw std::invalid_argument("maximize_hyperparameters: init outside bounds");

    auto objective = [&](const std::vector<double>& t) -> double {
        const auto raw = detail::from_transformed(t, info);
        if (!detail::within_bounds(raw, info)) return 1e12;
        try {
            const double ll = log_likelihood(raw);
            if (!std::isfinite(ll)) return 1e12;
            return -ll;
        } catch (const NumericalError&) {
            return 1e12;
        } catch (const ConvergenceError&) {
            return 1e12;
        }
    };

    const double f_init = log_likelihood(init);
    HyperOptResult best;
    best.params = init;
    best.value = f_init;

    NelderMeadOptions nm;
    nm.max_iters = opts.max_iters;
    nm.init_step = opts.init_step;

    const auto t0 = detail::to_transformed(init, info);
    SeededRng rng(opts.seed);
    for (int r = 0; r < std::max(opts.restarts, 1); ++r) {
        std::vector<double> start = t0;
        if (r > 0) {
            for (std::size_t i = 0; i < start.size(); ++i) {
                start[i] += 0.7 * rng.gaussian();
                // keep restart points inside the feasible box
                const double lo = info[i].log_scale ? std::log(info[i].lo) : info[i].lo;
                const double hi = info[i].log_scale ? std::log(info[i].hi) : info[i].hi;
                start[i] = std::clamp(start[i], lo, hi);
            }
        }
        const auto res = nelder_mead(objective, start, nm);
        if (-res.f > best.value) {
            best.value = -res.f;
            best.params = detail::from_transformed(res.x, info);
            best.improved = true;
        }
    }
    return best;
}

struct DenseHyperFit {
    KernelSpec kernel;
    double noise2 = 0.0;
    double lml = 0.0;
    bool improved = false;
};

/// Marginal-likelihood hyperparameter fit for the dense GP, including the
/// noise variance (bounds [1e-8, 1], log scale). Optimization is
/// derivative-free, so the analytic-gradient invariant is waived.
inline DenseHyperFit optimize_hyperparameters(const Eigen::MatrixXd& X,
                                              const Eigen::VectorXd& y,
                                              const KernelSpec& kernel_template,
                                              double noise2_init,
                                              const HyperOptOptions& opts = {}) {
    KernelSpec work = kernel_template;
    auto init = pack_hyperparameters(work);
    auto info = hyperparameter_info(work);
    init.push_back(noise2_init);
    info.push_back({true, 1e-8, 1.0});

    auto ll = [&](const std::vector<double>& raw) {
        KernelSpec k = kernel_template;
        std::vector<double> kp(raw.begin(), raw.end() - 1);
        unpack_hyperparameters(k, kp);
        return log_marginal_likelihood(X, y, k, raw.back());
    };

    const auto res = maximize_hyperparameters(ll, init, info, opts);
    DenseHyperFit out;
    out.kernel = kernel_template;
    std::vector<double> kp(res.params.begin(), res.params.end() - 1);
    unpack_hyperparameters(out.kernel, kp);
    out.noise2 = res.params.back();
    out.lml = res.value;
    out.improved = res.improved;
    return out;
}

}  // namespace arraycal
