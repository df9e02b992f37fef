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

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

#include "arraycal/common.hpp"

namespace arraycal {

/// Discrete analog-beamforming weight set: 2^bits uniformly spaced gains in
/// [g_min, g_max] and 2^bits uniformly spaced phases in [0, 2pi), enumerated
/// gain-major (index z = gain_index * 2^bits + phase_index).
struct AbfCodebook {
    int bits = 0;
    std::vector<double> gains;
    std::vector<double> phases;  // radians
    std::vector<cplx> weights;

    std::size_t size() const { return weights.size(); }

    /// Index of the codebook entry nearest to w in the complex plane.
    std::size_t nearest_weight_index(cplx w) const {
        std::size_t best = 0;
        double best_d = std::norm(w - weights[0]);
        for (std::size_t z = 1; z < weights.size(); ++z) {
            const double d = std::norm(w - weights[z]);
            if (d < best_d) {
                best_d = d;
                best = z;
            }
        }
        return best;
    }

    /// Index of the (gain, phase) cell containing w: |w| rounded to the
    /// nearest gain step, arg(w) to the nearest phase step (with wraparound).
    std::size_t nearest_cell_index(cplx w) const {
        const std::size_t levels = gains.size();
        const double g = std::abs(w);
        std::size_t gi = 0;
        if (levels > 1) {
            const double step = (gains.back() - gains.front()) / static_cast<double>(levels - 1);
            const double t = std::round((g - gains.front()) / step);
            gi = static_cast<std::size_t>(std::min<double>(std::max(t, 0.0),
                                                           static_cast<double>(levels - 1)));
        }
        double phi = std::arg(w);
        if (phi < 0.0) phi += 2.0 * kPi;
        const double pstep = 2.0 * kPi / static_cast<double>(levels);
        std::size_t pi_idx = static_cast<std::size_t>(std::llround(phi / pstep)) % levels;
        return gi * levels + pi_idx;
    }
};

inline AbfCodebook make_abf_codebook(int bits, double g_min, double g_max) {
    if (bits < 1) throw std::invalid_argument("make_abf_codebook: bits must be >= 1");
    if (!(g_min > 0.0) || !(g_min < g_max))
        throw std::invalid_argument("make_abf_codebook: require 0 < g_min < g_max");
    AbfCodebook cb;
    cb.bits = bits;
    const std::size_t levels = std::size_t{1} << bits;
    cb.gains.resize(levels);
    cb.phases.resize(levels);
    for (std::size_t i = 0; i < levels; ++i) {
        cb.gains[i] = (levels == 1)
                          ? g_min
                          : g_min + (g_max - g_min) * static_cast<double>(i) /
                                        static_cast<double>(levels - 1);
        cb.phases[i] = 2.0 * kPi * static_cast<double>(i) / static_cast<double>(levels);
    }
    cb.weights.reserve(levels * levels);
    for (double g : cb.gains)
        for (double p : cb.phases)
            cb.weights.emplace_back(g * std::cos(p), g * std::sin(p));
    return cb;
}

}  // namespace arraycal
