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
#include <array>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "arraycal/common.hpp"
#include "arraycal/grid.hpp"
#include "arraycal/smooth_field.hpp"

namespace arraycal {

/// Ground-truth multiplicative distortion d(f, n, z) = (1 + field_re) + j field_im
/// over the measurement grid. The channel and array factors of the weight
/// distortion model are collapsed into this single complex field.
struct DistortionTensor {
    GridAxes axes;
    std::vector<cplx> values;  // row-major (f, n, z)

    cplx at(std::size_t fi, std::size_t ni, std::size_t zi) const {
        return values[axes.flat_index(fi, ni, zi)];
    }
};

/// Two independent seeded smooth fields drive the real and imaginary
/// perturbations. Zero amplitudes reduce d to exactly 1.
inline DistortionTensor generate_distortion(std::uint64_t seed, const GridAxes& axes,
                                            double re_amplitude, double im_amplitude,
                                            std::array<int, 3> cutoffs) {
    axes.validate();
    if (re_amplitude < 0.0 || im_amplitude < 0.0)
        throw std::invalid_argument("generate_distortion: amplitudes must be >= 0");
    DistortionTensor d;
    d.axes = axes;
    d.values.assign(axes.size(), cplx(1.0, 0.0));

    const SmoothField field_re(seed * 2 + 1, cutoffs, re_amplitude);
    const SmoothField field_im(seed * 2 + 2, cutoffs, im_amplitude);
    const std::vector<double> re =
        field_re.evaluate_on_grid(axes.coords[0], axes.coords[1], axes.coords[2]);
    const std::vector<double> im =
        field_im.evaluate_on_grid(axes.coords[0], axes.coords[1], axes.coords[2]);
    for (std::size_t i = 0; i < d.values.size(); ++i)
        d.values[i] = cplx(1.0 + re[i], im[i]);
    return d;
}

/// Elementwise application of the distortion model: w_distorted = w * d.
inline Eigen::MatrixXcd distort_weights(const Eigen::MatrixXcd& weights,
                                        const Eigen::MatrixXcd& distortion) {
    if (weights.rows() != distortion.rows() || weights.cols() != distortion.cols())
        throw std::invalid_argument("distort_weights: shape mismatch");
    return weights.cwiseProduct(distortion);
}

}  // namespace arraycal
