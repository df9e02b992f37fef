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
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "arraycal/common.hpp"
#include "arraycal/rng.hpp"

namespace arraycal {

/// Smooth random field on [0, 1]^3: a truncated Fourier series with i.i.d.
/// standard-normal coefficients, rescaled so the empirical standard deviation
/// over a reference grid equals `amplitude`. Evaluation is infinitely smooth
/// and fully reproducible from (seed, cutoffs, amplitude).
class SmoothField {
public:
    SmoothField() = default;

    SmoothField(std::uint64_t seed, std::array<int, 3> cutoffs, double amplitude)
        : cutoffs_(cutoffs), amplitude_(amplitude), seed_(seed) {
        for (int c : cutoffs)
            if (c < 1) throw std::invalid_argument("SmoothField: cutoffs must be >= 1");
        if (amplitude < 0.0)
            throw std::invalid_argument("SmoothField: amplitude must be >= 0");
        SeededRng rng(seed);
        std::size_t total = 1;
        for (int d = 0; d < 3; ++d) total *= basis_size(d);
        coeffs_.resize(total);
        for (double& c : coeffs_) c = rng.gaussian();
        normalize();
    }

    std::array<int, 3> cutoffs() const { return cutoffs_; }
    double amplitude() const { return amplitude_; }
    const std::vector<double>& coefficients() const { return coeffs_; }

    double operator()(double x, double y, double z) const {
        if (amplitude_ == 0.0) return 0.0;
        const std::vector<double> bx = basis(0, x), by = basis(1, y), bz = basis(2, z);
        double acc = 0.0;
        std::size_t idx = 0;
        for (double vx : bx)
            for (double vy : by)
                for (double vz : bz) acc += coeffs_[idx++] * vx * vy * vz;
        return scale_ * acc;
    }

    /// Tensor-product evaluation over coordinate lists, row-major output
    /// (x slowest). Contracts axis by axis instead of looping per point.
    std::vector<double> evaluate_on_grid(const std::vector<double>& xs,
                                         const std::vector<double>& ys,
                                         const std::vector<double>& zs) const {
        const std::size_t nx = xs.size(), ny = ys.size(), nz = zs.size();
        std::vector<double> out(nx * ny * nz, 0.0);
        if (amplitude_ == 0.0) return out;
        const std::size_t b0 = basis_size(0), b1 = basis_size(1), b2 = basis_size(2);

        std::vector<std::vector<double>> bx(nx), by(ny), bz(nz);
        for (std::size_t i = 0; i < nx; ++i) bx[i] = basis(0, xs[i]);
        for (std::size_t j = 0; j < ny; ++j) by[j] = basis(1, ys[j]);
        for (std::size_t k = 0; k < nz; ++k) bz[k] = basis(2, zs[k]);

        // coeffs (b0, b1, b2) -> t1 (b0, b1, nz) -> t2 (b0, ny, nz) -> out.
        std::vector<double> t1(b0 * b1 * nz, 0.0);
        for (std::size_t a = 0; a < b0 * b1; ++a)
            for (std::size_t c = 0; c < b2; ++c) {
                const double w = coeffs_[a * b2 + c];
                if (w == 0.0) continue;
                for (std::size_t k = 0; k < nz; ++k) t1[a * nz + k] += w * bz[k][c];
            }
        std::vector<double> t2(b0 * ny * nz, 0.0);
        for (std::size_t a = 0; a < b0; ++a)
            for (std::size_t b = 0; b < b1; ++b)
                for (std::size_t j = 0; j < ny; ++j) {
                    const double w = by[j][b];
                    for (std::size_t k = 0; k < nz; ++k)
                        t2[(a * ny + j) * nz + k] += w * t1[(a * b1 + b) * nz + k];
                }
        for (std::size_t a = 0; a < b0; ++a)
            for (std::size_t i = 0; i < nx; ++i) {
                const double w = bx[i][a];
                for (std::size_t jk = 0; jk < ny * nz; ++jk)
                    out[i * ny * nz + jk] += w * t2[a * ny * nz + jk];
            }
        for (double& v : out) v *= scale_;
        return out;
    }

private:
    std::size_t basis_size(int axis) const {
        return 2 * static_cast<std::size_t>(cutoffs_[axis]) + 1;
    }

    // {1, cos(2 pi k t), sin(2 pi k t)} up to the axis cutoff.
    std::vector<double> basis(int axis, double t) const {
        std::vector<double> b(basis_size(axis));
        b[0] = 1.0;
        for (int k = 1; k <= cutoffs_[axis]; ++k) {
            b[2 * k - 1] = std::cos(2.0 * kPi * k * t);
            b[2 * k] = std::sin(2.0 * kPi * k * t);
        }
        return b;
    }

    void normalize() {
        scale_ = 1.0;
        if (amplitude_ == 0.0) return;
        // Empirical std over a fixed 17^3 reference grid.
        const std::size_t n = 17;
        std::vector<double> g(n);
        for (std::size_t i = 0; i < n; ++i)
            g[i] = static_cast<double>(i) / static_cast<double>(n - 1);
        const std::vector<double> vals = evaluate_on_grid(g, g, g);
        double mean = 0.0;
        for (double v : vals) mean += v;
        mean /= static_cast<double>(vals.size());
        double var = 0.0;
        for (double v : vals) var += (v - mean) * (v - mean);
        var /= static_cast<double>(vals.size());
        const double sd = std::sqrt(var);
        if (sd > 0.0) scale_ = amplitude_ / sd;
    }

    std::array<int, 3> cutoffs_{1, 1, 1};
    double amplitude_ = 0.0;
    std::uint64_t seed_ = 0;
    std::vector<double> coeffs_;
    double scale_ = 1.0;
};

inline SmoothField smooth_random_field_3d(std::uint64_t seed, std::array<int, 3> cutoffs,
                                          double amplitude) {
    if (amplitude <= 0.0)
        throw std::invalid_argument("smooth_random_field_3d: amplitude must be > 0");
    return SmoothField(seed, cutoffs, amplitude);
}

}  // namespace arraycal
