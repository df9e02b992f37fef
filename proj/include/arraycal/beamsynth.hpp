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
#include <vector>

#include "arraycal/codebook.hpp"
#include "arraycal/common.hpp"
#include "arraycal/geometry.hpp"

namespace arraycal {

struct AngleDirection {
    double azimuth = 90.0;
    double elevation = 90.0;
};

/// Rectangular interference sector in (azimuth, elevation) degrees.
struct AngleSector {
    double az_lo = 0.0, az_hi = 0.0;
    double el_lo = 0.0, el_hi = 0.0;
};

struct SynthesisSpec {
    AngleDirection ue;
    std::vector<AngleSector> sectors;
    double regularization = 1e-2;
    double samples_per_degree = 1.0;

    void validate() const {
        auto in_range = [](double a) { return a >= 0.0 && a <= 180.0; };
        if (!in_range(ue.azimuth) || !in_range(ue.elevation))
            throw std::invalid_argument("SynthesisSpec: UE direction outside [0, 180]");
        for (const auto& s : sectors) {
            if (!(in_range(s.az_lo) && in_range(s.az_hi) && in_range(s.el_lo) &&
                  in_range(s.el_hi)) ||
                s.az_hi < s.az_lo || s.el_hi < s.el_lo)
                throw std::invalid_argument("SynthesisSpec: malformed sector");
            if (ue.azimuth >= s.az_lo && ue.azimuth <= s.az_hi &&
                ue.elevation >= s.el_lo && ue.elevation <= s.el_hi)
                throw std::invalid_argument("SynthesisSpec: UE direction inside a sector");
        }
        if (regularization < 0.0)
            throw std::invalid_argument("SynthesisSpec: negative regularization");
        if (samples_per_degree <= 0.0)
            throw std::invalid_argument("SynthesisSpec: sampling density must be > 0");
    }
};

namespace detail {
inline std::vector<AngleDirection> sector_samples(const AngleSector& s,
                                                  double samples_per_degree) {
    // At least 2 points per axis so every sector contributes >= 4 samples.
    auto count = [&](double lo, double hi) {
        return std::max<std::size_t>(
            2, static_cast<std::size_t>(std::ceil((hi - lo) * samples_per_degree)) + 1);
    };
    const std::size_t na = count(s.az_lo, s.az_hi), ne = count(s.el_lo, s.el_hi);
    std::vector<AngleDirection> out;
    out.reserve(na * ne);
    for (std::size_t i = 0; i < na; ++i)
        for (std::size_t j = 0; j < ne; ++j) {
            const double az = (na == 1) ? s.az_lo
                                        : s.az_lo + (s.az_hi - s.az_lo) *
                                                        static_cast<double>(i) /
                                                        static_cast<double>(na - 1);
            const double el = (ne == 1) ? s.el_lo
                                        : s.el_lo + (s.el_hi - s.el_lo) *
                                                        static_cast<double>(j) /
                                                        static_cast<double>(ne - 1);
            out.push_back({az, el});
        }
    return out;
}
}  // namespace detail

/// Linearly-constrained minimum-variance weights: w = R^-1 a / (a^H R^-1 a)
/// with R = reg I + mean of steering outer products over the interference
/// sectors. Guarantees w^H a = 1 at the UE direction.
inline Eigen::VectorXcd synthesize_weights(const ArrayGeometry& geom, double frequency_hz,
                                           double reference_frequency_hz,
                                           const SynthesisSpec& spec) {
    spec.validate();
    const Eigen::Index n = geom.num_elements();
    Eigen::MatrixXcd R =
        spec.regularization * Eigen::MatrixXcd::Identity(n, n);
    std::size_t total = 0;
    Eigen::MatrixXcd acc = Eigen::MatrixXcd::Zero(n, n);
    for (const auto& sec : spec.sectors) {
        for (const auto& dir : detail::sector_samples(sec, spec.samples_per_degree)) {
            const Eigen::VectorXcd s = steering_vector(geom, dir.azimuth, dir.elevation,
                                                       frequency_hz, reference_frequency_hz);
            acc.noalias() += s * s.adjoint();
            ++total;
        }
    }
    if (total > 0) R += acc / static_cast<double>(total);

    const Eigen::VectorXcd a = steering_vector(geom, spec.ue.azimuth, spec.ue.elevation,
                                               frequency_hz, reference_frequency_hz);
    Eigen::LLT<Eigen::MatrixXcd> llt(R);
    if (llt.info() != Eigen::Success)
        throw NumericalError("synthesize_weights: singular interference covariance");
    const Eigen::VectorXcd Ra = llt.solve(a);
    const cplx denom = a.dot(Ra);  // a^H R^-1 a (Eigen dot conjugates the left operand)
    if (std::abs(denom) < 1e-300)
        throw NumericalError("synthesize_weights: degenerate UE constraint");
    return Ra / denom;
}

struct AbfSynthesis {
    std::vector<std::size_t> indices;  // one codebook entry per channel
    double scale = 1.0;                // applied to the continuous weights before rounding
};

/// Nearest-codebook quantization of the continuous solution. Weights are
/// scaled so the largest amplitude lands on the top gain level, then each
/// channel is rounded independently in the complex plane.
inline AbfSynthesis synthesize_abf_weights(const ArrayGeometry& geom, double frequency_hz,
                                           double reference_frequency_hz,
                                           const SynthesisSpec& spec,
                                           const AbfCodebook& codebook) {
    const Eigen::VectorXcd w =
        synthesize_weights(geom, frequency_hz, reference_frequency_hz, spec);
    const double peak = w.cwiseAbs().maxCoeff();
    AbfSynthesis out;
    out.scale = (peak > 0.0) ? codebook.gains.back() / peak : 1.0;
    out.indices.reserve(w.size());
    for (Eigen::Index i = 0; i < w.size(); ++i)
        out.indices.push_back(codebook.nearest_weight_index(out.scale * w(i)));
    return out;
}

}  // namespace arraycal
