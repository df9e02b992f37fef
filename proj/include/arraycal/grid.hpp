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

#include <array>
#include <cstddef>
#include <stdexcept>
#include <vector>

#include "arraycal/common.hpp"

namespace arraycal {

/// Coordinates of the frequency x channel x codebook-index product grid.
/// Each axis is normalized to [0, 1] and strictly increasing; axes need not
/// be regular or of equal cardinality.
struct GridAxes {
    std::array<std::vector<double>, 3> coords;  // [freq, channel, codebook]

    std::array<std::size_t, 3> dims() const {
        return {coords[0].size(), coords[1].size(), coords[2].size()};
    }

    std::size_t size() const {
        return coords[0].size() * coords[1].size() * coords[2].size();
    }

    /// Row-major flat index, frequency slowest, codebook fastest.
    std::size_t flat_index(std::size_t fi, std::size_t ni, std::size_t zi) const {
        return (fi * coords[1].size() + ni) * coords[2].size() + zi;
    }

    void validate() const {
        for (const auto& axis : coords) {
            if (axis.empty()) throw std::invalid_argument("GridAxes: empty axis");
            for (std::size_t i = 0; i < axis.size(); ++i) {
                if (axis[i] < 0.0 || axis[i] > 1.0)
                    throw std::invalid_argument("GridAxes: coordinate outside [0, 1]");
                if (i > 0 && axis[i] <= axis[i - 1])
                    throw std::invalid_argument("GridAxes: axis not strictly increasing");
            }
        }
    }
};

/// n equispaced coordinates spanning [0, 1] (a single point maps to 0).
inline std::vector<double> unit_linspace(std::size_t n) {
    if (n == 0) throw std::invalid_argument("unit_linspace: n must be positive");
    std::vector<double> v(n);
    for (std::size_t i = 0; i < n; ++i)
        v[i] = (n == 1) ? 0.0 : static_cast<double>(i) / static_cast<double>(n - 1);
    return v;
}

inline GridAxes make_grid_axes(std::size_t num_freq, std::size_t num_chan,
                               std::size_t num_code) {
    GridAxes axes{{unit_linspace(num_freq), unit_linspace(num_chan),
                   unit_linspace(num_code)}};
    axes.validate();
    return axes;
}

}  // namespace arraycal
