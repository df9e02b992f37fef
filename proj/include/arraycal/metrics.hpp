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
#include <stdexcept>
#include <string>
#include <vector>

#include "arraycal/common.hpp"
#include "arraycal/geometry.hpp"

namespace arraycal {

/// Denominator convention for the beam-pattern accuracy RMSE. `PaperSum`
/// divides the squared-error sum by I+J+K; `CellCount` by I*J*K. Improvement
/// ratios are identical under either convention.
enum class BpaDenominator { PaperSum, CellCount };

inline double bpa_rmse(const BeamPattern& p, const BeamPattern& q,
                       BpaDenominator mode = BpaDenominator::PaperSum) {
    if (p.azimuths != q.azimuths || p.elevations != q.elevations ||
        p.frequencies != q.frequencies)
        throw std::invalid_argument("bpa_rmse: axis mismatch");
    const double I = static_cast<double>(p.azimuths.size());
    const double J = static_cast<double>(p.elevations.size());
    const double K = static_cast<double>(p.frequencies.size());
    double ss = 0.0;
    for (std::size_t i = 0; i < p.values.size(); ++i) {
        const double d = p.values[i] - q.values[i];
        ss += d * d;
    }
    const double denom = (mode == BpaDenominator::PaperSum) ? (I + J + K) : (I * J * K);
    return std::sqrt(ss / denom);
}

/// RMSE normalized by the ground-truth range.
inline double nrmse(const std::vector<double>& truth, const std::vector<double>& estimate) {
    if (truth.size() != estimate.size() || truth.empty())
        throw std::invalid_argument("nrmse: shape mismatch");
    const auto [lo, hi] = std::minmax_element(truth.begin(), truth.end());
    if (*hi <= *lo) throw std::domain_error("nrmse: constant ground truth");
    double ss = 0.0;
    for (std::size_t i = 0; i < truth.size(); ++i) {
        const double d = truth[i] - estimate[i];
        ss += d * d;
    }
    return std::sqrt(ss / static_cast<double>(truth.size())) / (*hi - *lo);
}

/// One per-run result row of a calibration experiment.
struct CalibrationReport {
    std::uint64_t seed = 0;
    double sampling_fraction = 0.0;
    double bpa_distorted = 0.0;       // ideal vs distorted, paper_sum denominator
    double bpa_calibrated = 0.0;      // ideal vs calibrated, paper_sum denominator
    double bpa_distorted_cell = 0.0;  // same, cell_count denominator
    double bpa_calibrated_cell = 0.0;
    double improvement_ratio = 0.0;
    double gp_nrmse_re = 0.0;
    double gp_nrmse_im = 0.0;
    int cg_iterations_re = 0;
    int cg_iterations_im = 0;
    double runtime_seconds = 0.0;
};

struct FieldStats {
    double median = 0.0;
    double q25 = 0.0;
    double q75 = 0.0;
};

struct AggregateReport {
    std::size_t count = 0;
    FieldStats bpa_distorted, bpa_calibrated, improvement_ratio, gp_nrmse_re, gp_nrmse_im;
};

inline FieldStats order_stats(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    auto quantile = [&](double q) {
        const double pos = q * static_cast<double>(v.size() - 1);
        const std::size_t lo = static_cast<std::size_t>(pos);
        const std::size_t hi = std::min(lo + 1, v.size() - 1);
        const double frac = pos - static_cast<double>(lo);
        return v[lo] * (1.0 - frac) + v[hi] * frac;
    };
    return {quantile(0.5), quantile(0.25), quantile(0.75)};
}

inline AggregateReport summarize(const std::vector<CalibrationReport>& reports) {
    if (reports.empty()) throw std::invalid_argument("summarize: no reports");
    auto field = [&](const std::function<double(const CalibrationReport&)>& get) {
        std::vector<double> v;
        v.reserve(reports.size());
        for (const auto& r : reports) v.push_back(get(r));
        return order_stats(std::move(v));
    };
    AggregateReport a;
    a.count = reports.size();
    a.bpa_distorted = field([](const auto& r) { return r.bpa_distorted; });
    a.bpa_calibrated = field([](const auto& r) { return r.bpa_calibrated; });
    a.improvement_ratio = field([](const auto& r) { return r.improvement_ratio; });
    a.gp_nrmse_re = field([](const auto& r) { return r.gp_nrmse_re; });
    a.gp_nrmse_im = field([](const auto& r) { return r.gp_nrmse_im; });
    return a;
}

}  // namespace arraycal
