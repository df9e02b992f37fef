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
#include <iostream>
#include <limits>
#include <optional>
#include <vector>

#include "arraycal/codebook.hpp"
#include "arraycal/common.hpp"
#include "arraycal/distortion.hpp"
#include "arraycal/grid.hpp"
#include "arraycal/grid_gp.hpp"
#include "arraycal/metrics.hpp"
#include "arraycal/optimize.hpp"
#include "arraycal/rng.hpp"

namespace arraycal {

/// Sparse complex observations of distorted weights on the measurement grid.
struct MeasurementGrid {
    GridAxes axes;
    std::vector<std::uint8_t> mask;  // full grid, row-major
    std::vector<cplx> measured;      // observed entries only, in grid order
};

/// Uniform random sampling without replacement at the given fraction.
/// Deterministic per seed. When the fraction permits, the plan is re-drawn
/// (up to 100 times) until every channel slice holds at least one
/// observation; otherwise a warning is printed and the last draw kept.
inline std::vector<std::uint8_t> design_sampling_plan(const GridAxes& axes, double fraction,
                                                      std::uint64_t seed) {
    axes.validate();
    if (!(fraction > 0.0) || fraction > 1.0)
        throw std::invalid_argument("design_sampling_plan: fraction must be in (0, 1]");
    const std::size_t total = axes.size();
    const std::size_t count = static_cast<std::size_t>(fraction * static_cast<double>(total));
    if (count < 1)
        throw std::invalid_argument("design_sampling_plan: fraction selects zero entries");

    const auto [nf, nn, nz] = axes.dims();
    SeededRng rng(seed);
    std::vector<std::uint8_t> mask;
    const bool want_coverage = fraction >= 1.0 / static_cast<double>(nn);
    for (int attempt = 0; attempt < 100; ++attempt) {
        // Fisher-Yates prefix selection.
        std::vector<std::size_t> idx(total);
        for (std::size_t i = 0; i < total; ++i) idx[i] = i;
        for (std::size_t i = 0; i < count; ++i) {
            const std::size_t j = i + rng.integer(total - i);
            std::swap(idx[i], idx[j]);
        }
        mask.assign(total, 0);
        for (std::size_t i = 0; i < count; ++i) mask[idx[i]] = 1;
        if (!want_coverage) return mask;

        std::vector<std::uint8_t> covered(nn, 0);
        for (std::size_t i = 0; i < count; ++i)
            covered[(idx[i] / nz) % nn] = 1;
        if (std::all_of(covered.begin(), covered.end(), [](std::uint8_t c) { return c; }))
            return mask;
    }
    std::cerr << "design_sampling_plan: warning: some channel slices unobserved after "
                 "100 redraws\n";
    return mask;
}

/// Measured entry at (f, n, z) is the distorted codebook weight
/// codebook.weights[z] * d(f, n, z), plus per-component Gaussian noise.
inline MeasurementGrid simulate_measurements(const DistortionTensor& distortion,
                                             const AbfCodebook& codebook,
                                             const std::vector<std::uint8_t>& mask,
                                             double noise_sigma, std::uint64_t seed) {
    if (mask.size() != distortion.axes.size())
        throw std::invalid_argument("simulate_measurements: mask/grid size mismatch");
    if (distortion.axes.dims()[2] != codebook.size())
        throw std::invalid_argument("simulate_measurements: codebook axis size mismatch");
    MeasurementGrid g;
    g.axes = distortion.axes;
    g.mask = mask;
    SeededRng rng(seed);
    const std::size_t nz = codebook.size();
    for (std::size_t i = 0; i < mask.size(); ++i) {
        if (!mask[i]) continue;
        const cplx truth = codebook.weights[i % nz] * distortion.values[i];
        const cplx noise =
            noise_sigma > 0.0
                ? cplx(noise_sigma * rng.gaussian(), noise_sigma * rng.gaussian())
                : cplx(0.0, 0.0);
        g.measured.push_back(truth + noise);
    }
    return g;
}

enum class BeamformingMode { Dbf, Abf };

/// Two Kronecker GP surrogates (real and imaginary surfaces) over shared
/// axes and mask, plus the codebook they were trained against.
struct CalibrationModel {
    KronGpModel gp_re;
    KronGpModel gp_im;
    AbfCodebook codebook;
    BeamformingMode mode = BeamformingMode::Dbf;
    Eigen::VectorXd mean_re;  // cached full-grid posterior means
    Eigen::VectorXd mean_im;
    double nrmse_re = -1.0;  // held-out diagnostics, -1 when unavailable
    double nrmse_im = -1.0;

    cplx predicted_weight(std::size_t fi, std::size_t ni, std::size_t zi) const {
        const std::size_t idx = gp_re.axes.flat_index(fi, ni, zi);
        return {mean_re(static_cast<Eigen::Index>(idx)),
                mean_im(static_cast<Eigen::Index>(idx))};
    }
};

struct FitOptions {
    double noise2 = 1e-6;
    double cg_tol = 1e-8;
    int cg_max_iters = 0;  // 0: 10 sqrt(grid size)
    bool optimize = false;
    HyperOptOptions hyper;
    /// Ground-truth distorted weights over the full grid, simulation-only;
    /// enables held-out NRMSE diagnostics on 5% of the unobserved entries.
    const std::vector<cplx>* truth = nullptr;
    std::uint64_t validation_seed = 0;
};

namespace detail {

/// The GPs regress the whitened surface measured / w_z - 1, i.e. the
/// multiplicative deviation from the commanded codebook weight. The raw
/// measured surface carries the codebook's phase carrier and gain staircase
/// along the weight axis, which no smooth stationary kernel can bridge; the
/// whitened target is the smooth distortion field itself. This routine folds
/// the known weight back in: w_hat = w_z (1 + u + j v) for the two fitted
/// surfaces u, v, overwriting them with Re/Im of the predicted weight.
inline void apply_codebook_whitening_inverse(const GridAxes& axes, const AbfCodebook& codebook,
                                             Eigen::VectorXd& mean_re,
                                             Eigen::VectorXd& mean_im) {
    const std::size_t nz = codebook.size();
    for (std::size_t i = 0; i < axes.size(); ++i) {
        const cplx w = codebook.weights[i % nz];
        const auto ii = static_cast<Eigen::Index>(i);
        const cplx w_hat = w * (1.0 + cplx(mean_re(ii), mean_im(ii)));
        mean_re(ii) = w_hat.real();
        mean_im(ii) = w_hat.imag();
    }
}

inline KronGpModel fit_component(const GridAxes& axes, const std::vector<std::uint8_t>& mask,
                                 const Eigen::VectorXd& targets,
                                 std::array<KernelSpec, 3> kernels, const FitOptions& opt) {
    double noise2 = opt.noise2;
    if (opt.optimize) {
        std::vector<double> init;
        std::vector<ParamInfo> info;
        for (const auto& k : kernels) {
            const auto p = pack_hyperparameters(k);
            const auto pi = hyperparameter_info(k);
            init.insert(init.end(), p.begin(), p.end());
            info.insert(info.end(), pi.begin(), pi.end());
        }
        init.push_back(noise2);
        info.push_back({true, 1e-8, 1.0});

        auto ll = [&](const std::vector<double>& raw) {
            auto ks = kernels;
            std::size_t off = 0;
            for (auto& k : ks) {
                const std::size_t n = pack_hyperparameters(k).size();
                std::vector<double> slice(raw.begin() + off, raw.begin() + off + n);
                unpack_hyperparameters(k, slice);
                off += n;
            }
            const auto model = grid_gp_fit(axes, mask, targets, ks, raw.back(), opt.cg_tol,
                                           opt.cg_max_iters);
            return kron_log_marginal_likelihood(model);
        };
        const auto res = maximize_hyperparameters(ll, init, info, opt.hyper);
        std::size_t off = 0;
        for (auto& k : kernels) {
            const std::size_t n = pack_hyperparameters(k).size();
            std::vector<double> slice(res.params.begin() + off, res.params.begin() + off + n);
            unpack_hyperparameters(k, slice);
            off += n;
        }
        noise2 = res.params.back();
    }
    return grid_gp_fit(axes, mask, targets, kernels, noise2, opt.cg_tol, opt.cg_max_iters);
}

}  // namespace detail

inline CalibrationModel fit_calibration_model(const MeasurementGrid& grid,
                                              const std::array<KernelSpec, 3>& kernels,
                                              BeamformingMode mode,
                                              const AbfCodebook& codebook,
                                              const FitOptions& opt = {}) {
    if (grid.measured.empty())
        throw std::invalid_argument("fit_calibration_model: empty measurement grid");
    if (grid.axes.dims()[2] != codebook.size())
        throw std::invalid_argument("fit_calibration_model: codebook axis size mismatch");
    const Eigen::Index m = static_cast<Eigen::Index>(grid.measured.size());
    const std::size_t nz = codebook.size();
    Eigen::VectorXd y_re(m), y_im(m);
    {
        // Whitened targets: measured / w_z - 1 (see apply_codebook_whitening_inverse).
        Eigen::Index o = 0;
        for (std::size_t i = 0; i < grid.mask.size(); ++i) {
            if (!grid.mask[i]) continue;
            const cplx w = codebook.weights[i % nz];
            const cplx t = grid.measured[static_cast<std::size_t>(o)] / w - 1.0;
            y_re(o) = t.real();
            y_im(o) = t.imag();
            ++o;
        }
        if (o != m)
            throw std::invalid_argument("fit_calibration_model: mask/measured count mismatch");
    }

    CalibrationModel model;
    model.codebook = codebook;
    model.mode = mode;
    model.gp_re = detail::fit_component(grid.axes, grid.mask, y_re, kernels, opt);
    model.gp_im = detail::fit_component(grid.axes, grid.mask, y_im, kernels, opt);
    model.mean_re = grid_gp_predict_full(model.gp_re);
    model.mean_im = grid_gp_predict_full(model.gp_im);
    detail::apply_codebook_whitening_inverse(grid.axes, codebook, model.mean_re,
                                             model.mean_im);

    if (opt.truth) {
        if (opt.truth->size() != grid.axes.size())
            throw std::invalid_argument("fit_calibration_model: truth size mismatch");
        // Held-out set: 5% of the unobserved grid entries, fixed per seed.
        std::vector<std::size_t> hidden;
        for (std::size_t i = 0; i < grid.mask.size(); ++i)
            if (!grid.mask[i]) hidden.push_back(i);
        SeededRng rng(opt.validation_seed);
        const std::size_t want = std::max<std::size_t>(1, hidden.size() / 20);
        for (std::size_t i = 0; i < want && i < hidden.size(); ++i) {
            const std::size_t j = i + rng.integer(hidden.size() - i);
            std::swap(hidden[i], hidden[j]);
        }
        const std::size_t n_holdout = std::min(want, hidden.size());
        std::vector<double> tr_re(n_holdout), tr_im(n_holdout), es_re(n_holdout),
            es_im(n_holdout);
        for (std::size_t i = 0; i < n_holdout; ++i) {
            const std::size_t idx = hidden[i];
            tr_re[i] = (*opt.truth)[idx].real();
            tr_im[i] = (*opt.truth)[idx].imag();
            es_re[i] = model.mean_re(static_cast<Eigen::Index>(idx));
            es_im[i] = model.mean_im(static_cast<Eigen::Index>(idx));
        }
        model.nrmse_re = nrmse(tr_re, es_re);
        model.nrmse_im = nrmse(tr_im, es_im);
    }
    return model;
}

/// Estimated multiplicative distortion at a grid point: the predicted
/// distorted weight divided by the commanded codebook weight.
inline cplx estimate_distortion(const CalibrationModel& model, std::size_t fi,
                                std::size_t ni, std::size_t zi) {
    const auto [nf, nn, nz] = model.gp_re.axes.dims();
    if (fi >= nf || ni >= nn || zi >= nz)
        throw std::invalid_argument("estimate_distortion: index out of range");
    return model.predicted_weight(fi, ni, zi) / model.codebook.weights[zi];
}

/// Digital-beamforming correction: w' = w / d_hat with the distortion sampled
/// at the codebook cell nearest to each desired weight.
inline Eigen::MatrixXcd calibrate_dbf(const Eigen::MatrixXcd& desired,
                                      const CalibrationModel& model) {
    const auto [nf, nn, nz] = model.gp_re.axes.dims();
    if (desired.rows() != static_cast<Eigen::Index>(nf) ||
        desired.cols() != static_cast<Eigen::Index>(nn))
        throw std::invalid_argument("calibrate_dbf: weight shape != grid F x N");
    Eigen::MatrixXcd corrected(desired.rows(), desired.cols());
    for (Eigen::Index f = 0; f < desired.rows(); ++f)
        for (Eigen::Index n = 0; n < desired.cols(); ++n) {
            const std::size_t z = model.codebook.nearest_cell_index(desired(f, n));
            const cplx d = estimate_distortion(model, static_cast<std::size_t>(f),
                                               static_cast<std::size_t>(n), z);
            if (std::abs(d) < 1e-6)
                throw NumericalError("calibrate_dbf: degenerate estimated distortion");
            corrected(f, n) = desired(f, n) / d;
        }
    return corrected;
}

/// Analog-beamforming selection: per channel, the codebook entry whose
/// predicted distorted value is closest (summed over the evaluation
/// frequencies) to the desired broadband weight. Ties break to the lowest
/// index.
inline std::vector<std::size_t> calibrate_abf_nearest(
    const Eigen::MatrixXcd& desired, const CalibrationModel& model,
    const std::vector<std::size_t>& eval_freqs = {}) {
    const auto [nf, nn, nz] = model.gp_re.axes.dims();
    if (desired.rows() != static_cast<Eigen::Index>(nf) ||
        desired.cols() != static_cast<Eigen::Index>(nn))
        throw std::invalid_argument("calibrate_abf_nearest: weight shape != grid F x N");
    std::vector<std::size_t> freqs = eval_freqs;
    if (freqs.empty())
        for (std::size_t f = 0; f < nf; ++f) freqs.push_back(f);

    std::vector<std::size_t> selected(nn);
    for (std::size_t n = 0; n < nn; ++n) {
        std::size_t best = 0;
        double best_cost = std::numeric_limits<double>::infinity();
        for (std::size_t z = 0; z < nz; ++z) {
            double cost = 0.0;
            for (std::size_t f : freqs)
                cost += std::norm(desired(static_cast<Eigen::Index>(f),
                                          static_cast<Eigen::Index>(n)) -
                                  model.predicted_weight(f, n, z));
            if (cost < best_cost) {
                best_cost = cost;
                best = z;
            }
        }
        selected[n] = best;
    }
    return selected;
}

/// Ratio-matching analog selection: the first channel pair is chosen jointly,
/// then each further channel greedily matches the desired consecutive-channel
/// ratio. A heuristic; exact ties fall back to proximity to the desired
/// weight and then to the lowest index.
inline std::vector<std::size_t> calibrate_abf_ratio(const Eigen::MatrixXcd& desired,
                                                    const CalibrationModel& model) {
    const auto [nf, nn, nz] = model.gp_re.axes.dims();
    if (desired.rows() != static_cast<Eigen::Index>(nf) ||
        desired.cols() != static_cast<Eigen::Index>(nn))
        throw std::invalid_argument("calibrate_abf_ratio: weight shape != grid F x N");
    if (nn < 2)
        throw std::invalid_argument("calibrate_abf_ratio: at least two channels required");

    auto pair_cost = [&](std::size_t z_prev, std::size_t n, std::size_t z) {
        double cost = 0.0;
        for (std::size_t f = 0; f < nf; ++f) {
            const cplx prev = model.predicted_weight(f, n - 1, z_prev);
            const cplx cur = model.predicted_weight(f, n, z);
            const cplx w_prev = desired(static_cast<Eigen::Index>(f),
                                        static_cast<Eigen::Index>(n - 1));
            const cplx w_cur =
                desired(static_cast<Eigen::Index>(f), static_cast<Eigen::Index>(n));
            if (std::abs(prev) < 1e-12 || std::abs(w_prev) < 1e-12)
                return std::numeric_limits<double>::infinity();
            cost += std::norm(cur / prev - w_cur / w_prev);
        }
        return cost;
    };

    std::vector<std::size_t> selected(nn);
    {
        double best_cost = std::numeric_limits<double>::infinity();
        double best_anchor = std::numeric_limits<double>::infinity();
        std::size_t b0 = 0, b1 = 0;
        for (std::size_t z0 = 0; z0 < nz; ++z0) {
            double anchor = 0.0;  // tie-break: proximity of channel 0 to its desired weight
            for (std::size_t f = 0; f < nf; ++f)
                anchor += std::norm(desired(static_cast<Eigen::Index>(f), 0) -
                                    model.predicted_weight(f, 0, z0));
            for (std::size_t z1 = 0; z1 < nz; ++z1) {
                const double c = pair_cost(z0, 1, z1);
                const bool better =
                    c < best_cost * (1.0 - 1e-12) ||
                    (c <= best_cost * (1.0 + 1e-12) && anchor < best_anchor * (1.0 - 1e-12));
                if (better) {
                    best_cost = c;
                    best_anchor = anchor;
                    b0 = z0;
                    b1 = z1;
                }
            }
        }
        selected[0] = b0;
        selected[1] = b1;
    }
    for (std::size_t n = 2; n < nn; ++n) {
        std::size_t best = 0;
        double best_cost = std::numeric_limits<double>::infinity();
        for (std::size_t z = 0; z < nz; ++z) {
            const double c = pair_cost(selected[n - 1], n, z);
            if (c < best_cost) {
                best_cost = c;
                best = z;
            }
        }
        selected[n] = best;
    }
    return selected;
}

}  // namespace arraycal
