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
#include <stdexcept>
#include <vector>

#include "arraycal/common.hpp"

namespace arraycal {

/// Planar rectangular antenna lattice. Element positions are stored in
/// wavelengths at the reference frequency, centered at the origin in the
/// x-y plane.
struct ArrayGeometry {
    Eigen::Matrix<double, Eigen::Dynamic, 3> positions;  // one row per element
    int nx = 0;
    int ny = 0;
    double spacing = 0.5;

    int num_elements() const { return nx * ny; }
};

inline ArrayGeometry make_uniform_rect_array(int nx, int ny, double spacing = 0.5) {
    if (nx < 1 || ny < 1)
        throw std::invalid_argument("make_uniform_rect_array: dimensions must be >= 1");
    if (spacing <= 0.0)
        throw std::invalid_argument("make_uniform_rect_array: spacing must be > 0");
    ArrayGeometry g;
    g.nx = nx;
    g.ny = ny;
    g.spacing = spacing;
    g.positions.resize(nx * ny, 3);
    const double x0 = -0.5 * spacing * (nx - 1);
    const double y0 = -0.5 * spacing * (ny - 1);
    int row = 0;
    for (int ix = 0; ix < nx; ++ix)
        for (int iy = 0; iy < ny; ++iy, ++row)
            g.positions.row(row) << x0 + spacing * ix, y0 + spacing * iy, 0.0;
    return g;
}

/// Azimuth/elevation sampling in degrees, both spanning [0, 180] (the forward
/// hemisphere).
struct AngleGrid {
    std::vector<double> azimuths;
    std::vector<double> elevations;

    void validate() const {
        auto check = [](const std::vector<double>& v, const char* name) {
            if (v.empty()) throw std::invalid_argument(std::string("AngleGrid: empty ") + name);
            for (std::size_t i = 0; i < v.size(); ++i) {
                if (v[i] < 0.0 || v[i] > 180.0)
                    throw std::invalid_argument(std::string("AngleGrid: ") + name +
                                                " outside [0, 180]");
                if (i > 0 && v[i] <= v[i - 1])
                    throw std::invalid_argument(std::string("AngleGrid: ") + name +
                                                " not strictly increasing");
            }
        };
        check(azimuths, "azimuths");
        check(elevations, "elevations");
    }
};

inline std::vector<double> linspace_deg(double lo, double hi, std::size_t n) {
    std::vector<double> v(n);
    for (std::size_t i = 0; i < n; ++i)
        v[i] = (n == 1) ? lo : lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(n - 1);
    return v;
}

/// Unit propagation direction for (azimuth, elevation) in degrees:
/// (sin el cos az, sin el sin az, cos el). Broadside is (90, 90).
inline Eigen::Vector3d unit_direction(double azimuth_deg, double elevation_deg) {
    if (azimuth_deg < 0.0 || azimuth_deg > 180.0 || elevation_deg < 0.0 ||
        elevation_deg > 180.0)
        throw std::invalid_argument("unit_direction: angle outside [0, 180]");
    const double az = azimuth_deg * kPi / 180.0;
    const double el = elevation_deg * kPi / 180.0;
    return {std::sin(el) * std::cos(az), std::sin(el) * std::sin(az), std::cos(el)};
}

/// Array-factor phase vector: entry n is exp(j 2 pi (f/f_ref) <p_n, u>) with
/// positions in reference wavelengths. Every entry has unit modulus.
inline Eigen::VectorXcd steering_vector(const ArrayGeometry& geom, double azimuth_deg,
                                        double elevation_deg, double frequency_hz,
                                        double reference_frequency_hz) {
    if (frequency_hz <= 0.0 || reference_frequency_hz <= 0.0)
        throw std::invalid_argument("steering_vector: frequency must be > 0");
    const Eigen::Vector3d u = unit_direction(azimuth_deg, elevation_deg);
    const double scale = 2.0 * kPi * frequency_hz / reference_frequency_hz;
    Eigen::VectorXd phase = scale * (geom.positions * u);
    Eigen::VectorXcd s(phase.size());
    for (Eigen::Index i = 0; i < phase.size(); ++i)
        s(i) = cplx(std::cos(phase(i)), std::sin(phase(i)));
    return s;
}

/// Non-negative array-factor magnitudes over azimuth x elevation x frequency.
struct BeamPattern {
    std::vector<double> azimuths;
    std::vector<double> elevations;
    std::vector<double> frequencies;
    std::vector<double> values;  // row-major (azimuth, elevation, frequency)

    std::size_t flat_index(std::size_t i, std::size_t j, std::size_t k) const {
        return (i * elevations.size() + j) * frequencies.size() + k;
    }
    double operator()(std::size_t i, std::size_t j, std::size_t k) const {
        return values[flat_index(i, j, k)];
    }
};

/// |w_k^H a(az_i, el_j, f_k)| for per-frequency weight vectors.
inline BeamPattern beam_pattern(const ArrayGeometry& geom,
                                const std::vector<Eigen::VectorXcd>& weights,
                                const AngleGrid& angles,
                                const std::vector<double>& frequencies_hz,
                                double reference_frequency_hz) {
    angles.validate();
    if (frequencies_hz.empty())
        throw std::invalid_argument("beam_pattern: frequencies must be non-empty");
    if (weights.size() != frequencies_hz.size())
        throw std::invalid_argument("beam_pattern: one weight vector per frequency required");
    for (const auto& w : weights)
        if (w.size() != geom.num_elements())
            throw std::invalid_argument("beam_pattern: weight length != element count");

    BeamPattern p;
    p.azimuths = angles.azimuths;
    p.elevations = angles.elevations;
    p.frequencies = frequencies_hz;
    const std::size_t I = angles.azimuths.size();
    const std::size_t J = angles.elevations.size();
    const std::size_t K = frequencies_hz.size();
    p.values.assign(I * J * K, 0.0);

    // Batch the angle grid into a steering matrix per frequency so the inner
    // loop is one GEMV.
    Eigen::Matrix<double, Eigen::Dynamic, 3> dirs(I * J, 3);
    for (std::size_t i = 0; i < I; ++i)
        for (std::size_t j = 0; j < J; ++j)
            dirs.row(i * J + j) = unit_direction(angles.azimuths[i], angles.elevations[j]).transpose();

    for (std::size_t k = 0; k < K; ++k) {
        const double scale = 2.0 * kPi * frequencies_hz[k] / reference_frequency_hz;
        Eigen::MatrixXd phase = scale * (geom.positions * dirs.transpose());  // elems x angles
        Eigen::VectorXcd response =
            (phase.array().cos().cast<cplx>() +
             cplx(0.0, 1.0) * phase.array().sin().cast<cplx>())
                .matrix()
                .transpose() *
            weights[k].conjugate();
        for (std::size_t a = 0; a < I * J; ++a) {
            const std::size_t i = a / J, j = a % J;
            p.values[p.flat_index(i, j, k)] = std::abs(response(a));
        }
    }
    return p;
}

}  // namespace arraycal
