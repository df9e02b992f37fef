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

#include <atomic>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <thread>

#include <json.hpp>

#include "arraycal/calibration.hpp"
#include "arraycal/config.hpp"
#include "arraycal/geometry.hpp"
#include "arraycal/metrics.hpp"

namespace arraycal {

namespace detail {

inline std::uint64_t sub_seed(std::uint64_t seed, std::uint64_t stream) {
    // splitmix-style stream derivation
    std::uint64_t x = seed + 0x9E3779B97F4A7C15ULL * (stream + 1);
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

inline std::string fmt_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

inline std::string fmt_fraction(double f) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%g", f * 100.0);
    return buf;
}

inline std::string digest_hex(std::uint64_t d) {
    char buf[20];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(d));
    return buf;
}

}  // namespace detail

/// Objects shared by every run of an experiment (derived from config only).
struct ExperimentContext {
    ArrayGeometry geom;
    AbfCodebook codebook;
    GridAxes axes;
    std::vector<double> frequencies;
    AngleGrid angles;
};

inline ExperimentContext make_context(const ExperimentConfig& c) {
    ExperimentContext ctx;
    ctx.geom = make_uniform_rect_array(c.nx, c.ny, c.spacing);
    ctx.codebook = make_abf_codebook(c.codebook_bits, c.gain_min, c.gain_max);
    ctx.axes = make_grid_axes(c.band_points, c.num_channels(), ctx.codebook.size());
    ctx.frequencies = c.band_frequencies();
    ctx.angles.azimuths = linspace_deg(0.0, 180.0, c.pattern_az_count);
    ctx.angles.elevations = linspace_deg(0.0, 180.0, c.pattern_el_count);
    return ctx;
}

/// Everything that depends on the seed but not on the sampling fraction.
struct Scenario {
    DistortionTensor distortion;
    Eigen::MatrixXcd desired;                   // F x N desired weights
    std::vector<std::size_t> z_canonical;       // per (f, n): codebook cell of the desired weight
    std::vector<std::size_t> z_quantized;       // ABF only: plain per-channel quantization
    std::vector<cplx> truth;                    // full-grid distorted codebook weights
    BeamPattern ideal;
    BeamPattern distorted;
};

namespace detail {

inline std::vector<Eigen::VectorXcd> per_freq_columns(const Eigen::MatrixXcd& w) {
    std::vector<Eigen::VectorXcd> out;
    out.reserve(w.rows());
    for (Eigen::Index f = 0; f < w.rows(); ++f)
        out.push_back(w.row(f).transpose());
    return out;
}

/// Realized ABF weights: the true distorted value of the selected codebook
/// entry for each channel, per frequency.
inline Eigen::MatrixXcd realized_abf_weights(const ExperimentContext& ctx,
                                             const DistortionTensor& dist,
                                             const std::vector<std::size_t>& indices) {
    const auto [nf, nn, nz] = ctx.axes.dims();
    Eigen::MatrixXcd w(nf, nn);
    for (std::size_t f = 0; f < nf; ++f)
        for (std::size_t n = 0; n < nn; ++n)
            w(static_cast<Eigen::Index>(f), static_cast<Eigen::Index>(n)) =
                ctx.codebook.weights[indices[n]] * dist.at(f, n, indices[n]);
    return w;
}

/// True distortion seen by a digital weight: the field evaluated at the
/// codebook cell canonical for the desired weight.
inline Eigen::MatrixXcd canonical_distortion(const ExperimentContext& ctx,
                                             const DistortionTensor& dist,
                                             const std::vector<std::size_t>& z_canonical) {
    const auto [nf, nn, nz] = ctx.axes.dims();
    Eigen::MatrixXcd d(nf, nn);
    for (std::size_t f = 0; f < nf; ++f)
        for (std::size_t n = 0; n < nn; ++n)
            d(static_cast<Eigen::Index>(f), static_cast<Eigen::Index>(n)) =
                dist.at(f, n, z_canonical[f * nn + n]);
    return d;
}

}  // namespace detail

inline Scenario build_scenario(const ExperimentContext& ctx, const ExperimentConfig& c,
                               std::uint64_t seed) {
    Scenario s;
    s.distortion = generate_distortion(seed, ctx.axes, c.re_amplitude, c.im_amplitude,
                                       c.cutoffs);
    const auto [nf, nn, nz] = ctx.axes.dims();

    if (c.mode == BeamformingMode::Dbf) {
        s.desired.resize(nf, nn);
        for (std::size_t f = 0; f < nf; ++f) {
            const Eigen::VectorXcd w = synthesize_weights(
                ctx.geom, ctx.frequencies[f], c.band_reference_hz, c.synthesis);
            s.desired.row(static_cast<Eigen::Index>(f)) = w.transpose();
        }
    } else {
        // ABF weights are broadband: one synthesis at the center frequency,
        // scaled into the codebook's gain range.
        const double fc = ctx.frequencies[nf / 2];
        Eigen::VectorXcd w = synthesize_weights(ctx.geom, fc, c.band_reference_hz,
                                                c.synthesis);
        const double peak = w.cwiseAbs().maxCoeff();
        if (peak > 0.0) w *= ctx.codebook.gains.back() / peak;
        s.desired.resize(nf, nn);
        for (std::size_t f = 0; f < nf; ++f)
            s.desired.row(static_cast<Eigen::Index>(f)) = w.transpose();
        s.z_quantized.resize(nn);
        for (std::size_t n = 0; n < nn; ++n)
            s.z_quantized[n] = ctx.codebook.nearest_weight_index(w(static_cast<Eigen::Index>(n)));
    }

    s.z_canonical.resize(nf * nn);
    for (std::size_t f = 0; f < nf; ++f)
        for (std::size_t n = 0; n < nn; ++n)
            s.z_canonical[f * nn + n] = ctx.codebook.nearest_cell_index(
                s.desired(static_cast<Eigen::Index>(f), static_cast<Eigen::Index>(n)));

    s.truth.resize(ctx.axes.size());
    for (std::size_t i = 0; i < s.truth.size(); ++i)
        s.truth[i] = ctx.codebook.weights[i % nz] * s.distortion.values[i];

    s.ideal = beam_pattern(ctx.geom, detail::per_freq_columns(s.desired), ctx.angles,
                           ctx.frequencies, c.band_reference_hz);

    Eigen::MatrixXcd realized_distorted;
    if (c.mode == BeamformingMode::Dbf) {
        realized_distorted = s.desired.cwiseProduct(
            detail::canonical_distortion(ctx, s.distortion, s.z_canonical));
    } else {
        realized_distorted = detail::realized_abf_weights(ctx, s.distortion, s.z_quantized);
    }
    s.distorted = beam_pattern(ctx.geom, detail::per_freq_columns(realized_distorted),
                               ctx.angles, ctx.frequencies, c.band_reference_hz);
    return s;
}

inline CalibrationModel fit_run_model(const ExperimentContext& ctx,
                                      const ExperimentConfig& c, const Scenario& s,
                                      std::uint64_t seed, double fraction) {
    const auto mask = design_sampling_plan(ctx.axes, fraction, detail::sub_seed(seed, 1));
    const auto grid = simulate_measurements(s.distortion, ctx.codebook, mask,
                                            c.measurement_noise_sigma,
                                            detail::sub_seed(seed, 2));
    FitOptions opt;
    opt.noise2 = c.gp_noise2;
    opt.cg_tol = c.cg_tol;
    opt.cg_max_iters = c.cg_max_iters;
    opt.optimize = c.optimize_hyperparameters;
    opt.hyper.restarts = c.opt_restarts;
    opt.hyper.max_iters = c.opt_max_iters;
    opt.hyper.seed = detail::sub_seed(seed, 3);
    opt.truth = &s.truth;
    opt.validation_seed = detail::sub_seed(seed, 4);
    return fit_calibration_model(grid, c.kernels, c.mode, ctx.codebook, opt);
}

struct PatternSet {
    BeamPattern ideal, distorted, calibrated;
};

inline CalibrationReport apply_run_model(const ExperimentContext& ctx,
                                         const ExperimentConfig& c, const Scenario& s,
                                         const CalibrationModel& model, std::uint64_t seed,
                                         double fraction, PatternSet* patterns = nullptr) {
    const auto [nf, nn, nz] = ctx.axes.dims();
    Eigen::MatrixXcd realized_calibrated;
    if (c.mode == BeamformingMode::Dbf) {
        const Eigen::MatrixXcd corrected = calibrate_dbf(s.desired, model);
        realized_calibrated = corrected.cwiseProduct(
            detail::canonical_distortion(ctx, s.distortion, s.z_canonical));
    } else {
        std::vector<std::size_t> eval_freqs;
        if (c.abf_center_freq_only) eval_freqs.push_back(nf / 2);
        const auto indices = (c.abf_selection == AbfSelection::Nearest)
                                 ? calibrate_abf_nearest(s.desired, model, eval_freqs)
                                 : calibrate_abf_ratio(s.desired, model);
        realized_calibrated = detail::realized_abf_weights(ctx, s.distortion, indices);
    }
    const BeamPattern calibrated =
        beam_pattern(ctx.geom, detail::per_freq_columns(realized_calibrated), ctx.angles,
                     ctx.frequencies, c.band_reference_hz);

    CalibrationReport r;
    r.seed = seed;
    r.sampling_fraction = fraction;
    r.bpa_distorted = bpa_rmse(s.ideal, s.distorted, BpaDenominator::PaperSum);
    r.bpa_calibrated = bpa_rmse(s.ideal, calibrated, BpaDenominator::PaperSum);
    r.bpa_distorted_cell = bpa_rmse(s.ideal, s.distorted, BpaDenominator::CellCount);
    r.bpa_calibrated_cell = bpa_rmse(s.ideal, calibrated, BpaDenominator::CellCount);
    r.improvement_ratio =
        (r.bpa_calibrated > 0.0) ? r.bpa_distorted / r.bpa_calibrated : 0.0;
    r.gp_nrmse_re = model.nrmse_re;
    r.gp_nrmse_im = model.nrmse_im;
    r.cg_iterations_re = model.gp_re.cg_iterations;
    r.cg_iterations_im = model.gp_im.cg_iterations;
    if (patterns) {
        patterns->ideal = s.ideal;
        patterns->distorted = s.distorted;
        patterns->calibrated = calibrated;
    }
    return r;
}

// --- calibration model persistence (split fit/apply pipeline) ---

namespace detail {

inline nlohmann::json vector_to_json(const Eigen::VectorXd& v) {
    nlohmann::json a = nlohmann::json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v(i));
    return a;
}

inline Eigen::VectorXd vector_from_json(const nlohmann::json& a) {
    Eigen::VectorXd v(static_cast<Eigen::Index>(a.size()));
    for (std::size_t i = 0; i < a.size(); ++i) v(static_cast<Eigen::Index>(i)) = a[i];
    return v;
}

inline nlohmann::json component_to_json(const KronGpModel& m) {
    nlohmann::json j;
    j["kernels"] = {kernel_to_json(m.kernels[0]), kernel_to_json(m.kernels[1]),
                    kernel_to_json(m.kernels[2])};
    j["noise2"] = m.noise2;
    j["u"] = vector_to_json(m.u);
    j["y"] = vector_to_json(m.y);
    j["cg_iterations"] = m.cg_iterations;
    j["cg_residual"] = m.cg_residual;
    if (!m.basis.empty()) {
        nlohmann::json b = nlohmann::json::array();
        for (const auto& t : m.basis) b.push_back({t[0], t[1], t[2]});
        j["basis"] = b;
        j["coeffs"] = vector_to_json(m.coeffs);
    }
    return j;
}

inline KronGpModel component_from_json(const nlohmann::json& j, const GridAxes& axes,
                                       const std::vector<std::uint8_t>& mask) {
    KronGpModel m;
    m.axes = axes;
    m.kernels = {kernel_from_json(j.at("kernels").at(0)),
                 kernel_from_json(j.at("kernels").at(1)),
                 kernel_from_json(j.at("kernels").at(2))};
    m.noise2 = j.at("noise2").get<double>();
    m.mask = mask;
    for (std::size_t i = 0; i < mask.size(); ++i)
        if (mask[i]) m.observed.push_back(i);
    m.y = vector_from_json(j.at("y"));
    m.u = vector_from_json(j.at("u"));
    m.cg_iterations = j.at("cg_iterations").get<int>();
    m.cg_residual = j.at("cg_residual").get<double>();
    for (int d = 0; d < 3; ++d)
        m.grams.push_back(gram_matrix_1d(m.kernels[d], axes.coords[d]));
    build_preconditioner(m);
    if (j.contains("basis")) {
        for (const auto& t : j.at("basis"))
            m.basis.push_back({t.at(0).get<int>(), t.at(1).get<int>(), t.at(2).get<int>()});
        m.coeffs = vector_from_json(j.at("coeffs"));
    }
    return m;
}

}  // namespace detail

inline void save_calibration_model(const std::string& path, const CalibrationModel& model,
                                   std::uint64_t config_digest, std::uint64_t seed,
                                   double fraction) {
    nlohmann::json j;
    j["schema_version"] = kConfigSchemaVersion;
    j["tool_version"] = kToolVersion;
    j["config_digest"] = detail::digest_hex(config_digest);
    j["seed"] = seed;
    j["fraction"] = fraction;
    j["mode"] = (model.mode == BeamformingMode::Dbf) ? "dbf" : "abf";
    nlohmann::json obs = nlohmann::json::array();
    for (std::size_t i : model.gp_re.observed) obs.push_back(i);
    j["observed"] = obs;
    j["gp_re"] = detail::component_to_json(model.gp_re);
    j["gp_im"] = detail::component_to_json(model.gp_im);
    j["nrmse_re"] = model.nrmse_re;
    j["nrmse_im"] = model.nrmse_im;
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("save_calibration_model: cannot write " + path);
    out << j.dump(1) << "\n";
}

inline CalibrationModel load_calibration_model(const std::string& path,
                                               const ExperimentContext& ctx,
                                               std::uint64_t expected_digest) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("load_calibration_model: cannot open " + path);
    nlohmann::json j;
    in >> j;
    if (j.at("config_digest").get<std::string>() != detail::digest_hex(expected_digest))
        throw std::runtime_error("load_calibration_model: config digest mismatch in " + path);
    std::vector<std::uint8_t> mask(ctx.axes.size(), 0);
    for (const auto& i : j.at("observed")) mask.at(i.get<std::size_t>()) = 1;
    CalibrationModel m;
    m.codebook = ctx.codebook;
    m.mode = (j.at("mode").get<std::string>() == "dbf") ? BeamformingMode::Dbf
                                                        : BeamformingMode::Abf;
    m.gp_re = detail::component_from_json(j.at("gp_re"), ctx.axes, mask);
    m.gp_im = detail::component_from_json(j.at("gp_im"), ctx.axes, mask);
    m.mean_re = grid_gp_predict_full(m.gp_re);
    m.mean_im = grid_gp_predict_full(m.gp_im);
    detail::apply_codebook_whitening_inverse(ctx.axes, ctx.codebook, m.mean_re, m.mean_im);
    m.nrmse_re = j.at("nrmse_re").get<double>();
    m.nrmse_im = j.at("nrmse_im").get<double>();
    return m;
}

// --- experiment drivers ---

enum class PipelineStage { Run, FitOnly, ApplyOnly };

inline std::string model_filename(std::uint64_t seed, double fraction) {
    return "model_seed" + std::to_string(seed) + "_frac" + detail::fmt_fraction(fraction) +
           ".json";
}

inline void write_reports(const std::filesystem::path& out_dir, const LoadedConfig& lc,
                          const std::vector<CalibrationReport>& reports) {
    const ExperimentConfig& c = lc.config;
    std::filesystem::create_directories(out_dir);

    {
        std::ofstream csv(out_dir / "runs.csv", std::ios::binary);
        csv << "# arraycal " << kToolVersion << " config_digest="
            << detail::digest_hex(lc.digest) << "\n";
        csv << "seed,fraction,bpa_distorted,bpa_calibrated,bpa_distorted_cell,"
               "bpa_calibrated_cell,improvement_ratio,gp_nrmse_re,gp_nrmse_im,"
               "cg_iterations_re,cg_iterations_im\n";
        for (const auto& r : reports) {
            csv << r.seed << "," << detail::fmt_double(r.sampling_fraction) << ","
                << detail::fmt_double(r.bpa_distorted) << ","
                << detail::fmt_double(r.bpa_calibrated) << ","
                << detail::fmt_double(r.bpa_distorted_cell) << ","
                << detail::fmt_double(r.bpa_calibrated_cell) << ","
                << detail::fmt_double(r.improvement_ratio) << ","
                << detail::fmt_double(r.gp_nrmse_re) << ","
                << detail::fmt_double(r.gp_nrmse_im) << "," << r.cg_iterations_re << ","
                << r.cg_iterations_im << "\n";
        }
    }
    {
        nlohmann::json j;
        j["tool_version"] = kToolVersion;
        j["config_digest"] = detail::digest_hex(lc.digest);
        j["mode"] = (c.mode == BeamformingMode::Dbf) ? "dbf" : "abf";
        j["fractions"] = nlohmann::json::array();
        for (double f : c.sampling_fractions) {
            std::vector<CalibrationReport> sub;
            for (const auto& r : reports)
                if (r.sampling_fraction == f) sub.push_back(r);
            if (sub.empty()) continue;
            const AggregateReport a = summarize(sub);
            auto stats = [](const FieldStats& s) {
                return nlohmann::json{{"median", s.median}, {"q25", s.q25}, {"q75", s.q75}};
            };
            j["fractions"].push_back({{"fraction", f},
                                      {"count", a.count},
                                      {"bpa_distorted", stats(a.bpa_distorted)},
                                      {"bpa_calibrated", stats(a.bpa_calibrated)},
                                      {"improvement_ratio", stats(a.improvement_ratio)},
                                      {"gp_nrmse_re", stats(a.gp_nrmse_re)},
                                      {"gp_nrmse_im", stats(a.gp_nrmse_im)}});
        }
        std::ofstream js(out_dir / "summary.json", std::ios::binary);
        js << j.dump(1) << "\n";
    }
    {
        // wall-clock log is kept out of the CSV/JSON so identical runs stay
        // byte-identical
        std::ofstream log(out_dir / "run.log", std::ios::binary);
        log << "arraycal " << kToolVersion << " config_digest="
            << detail::digest_hex(lc.digest) << "\n";
        for (const auto& r : reports)
            log << "seed=" << r.seed << " fraction=" << detail::fmt_double(r.sampling_fraction)
                << " runtime_s=" << detail::fmt_double(r.runtime_seconds) << "\n";
    }
}

/// Executes the configured experiment. Seeds are independent work units and
/// fan out over `jobs` threads; each seed's work is deterministic and
/// single-threaded, so the collected rows do not depend on `jobs`.
inline std::vector<CalibrationReport> run_experiment(const LoadedConfig& lc,
                                                     const std::string& out_dir,
                                                     int jobs = 1,
                                                     PipelineStage stage = PipelineStage::Run) {
    const ExperimentConfig& c = lc.config;
    const ExperimentContext ctx = make_context(c);
    const std::filesystem::path out(out_dir);
    std::filesystem::create_directories(out);

    const std::size_t n_seeds = c.seeds.size();
    std::vector<std::vector<CalibrationReport>> rows(n_seeds);

    auto process_seed = [&](std::size_t si) {
        const std::uint64_t seed = c.seeds[si];
        const auto t0 = std::chrono::steady_clock::now();
        const Scenario scen = build_scenario(ctx, c, seed);
        for (double fraction : c.sampling_fractions) {
            CalibrationModel model;
            if (stage == PipelineStage::ApplyOnly) {
                model = load_calibration_model((out / model_filename(seed, fraction)).string(),
                                               ctx, lc.digest);
            } else {
                model = fit_run_model(ctx, c, scen, seed, fraction);
                if (stage == PipelineStage::FitOnly) {
                    save_calibration_model((out / model_filename(seed, fraction)).string(),
                                           model, lc.digest, seed, fraction);
                    continue;
                }
            }
            CalibrationReport r = apply_run_model(ctx, c, scen, model, seed, fraction);
            r.runtime_seconds =
                std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
            rows[si].push_back(r);
        }
    };

    if (jobs <= 1) {
        for (std::size_t si = 0; si < n_seeds; ++si) process_seed(si);
    } else {
        std::atomic<std::size_t> next{0};
        auto worker = [&] {
            for (std::size_t si = next.fetch_add(1); si < n_seeds; si = next.fetch_add(1))
                process_seed(si);
        };
        std::vector<std::thread> pool;
        for (int t = 0; t < std::min<int>(jobs, static_cast<int>(n_seeds)); ++t)
            pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }

    std::vector<CalibrationReport> reports;
    for (const auto& r : rows) reports.insert(reports.end(), r.begin(), r.end());
    if (stage != PipelineStage::FitOnly) write_reports(out, lc, reports);
    return reports;
}

/// Azimuth and elevation cuts through the UE direction at the center
/// frequency, written as plot-ready CSV (ideal, distorted, calibrated).
inline void write_pattern_dump(const std::filesystem::path& out_dir, const LoadedConfig& lc,
                               const PatternSet& p, std::uint64_t seed, double fraction) {
    const ExperimentConfig& c = lc.config;
    auto nearest_index = [](const std::vector<double>& v, double x) {
        std::size_t best = 0;
        for (std::size_t i = 1; i < v.size(); ++i)
            if (std::abs(v[i] - x) < std::abs(v[best] - x)) best = i;
        return best;
    };
    auto to_db = [](double v) { return 20.0 * std::log10(std::max(v, 1e-12)); };
    const std::size_t k = p.ideal.frequencies.size() / 2;
    const std::size_t j_ue = nearest_index(p.ideal.elevations, c.synthesis.ue.elevation);
    const std::size_t i_ue = nearest_index(p.ideal.azimuths, c.synthesis.ue.azimuth);

    std::filesystem::create_directories(out_dir);
    auto write_cut = [&](const std::string& name, bool azimuth_cut) {
        std::ofstream csv(out_dir / name, std::ios::binary);
        csv << "# arraycal " << kToolVersion << " config_digest="
            << detail::digest_hex(lc.digest) << " seed=" << seed << " fraction="
            << detail::fmt_double(fraction) << "\n";
        csv << "angle_deg,ideal,distorted,calibrated,ideal_db,distorted_db,calibrated_db\n";
        const auto& angles = azimuth_cut ? p.ideal.azimuths : p.ideal.elevations;
        for (std::size_t a = 0; a < angles.size(); ++a) {
            const std::size_t idx = azimuth_cut ? p.ideal.flat_index(a, j_ue, k)
                                                : p.ideal.flat_index(i_ue, a, k);
            const double vi = p.ideal.values[idx];
            const double vd = p.distorted.values[idx];
            const double vc = p.calibrated.values[idx];
            csv << detail::fmt_double(angles[a]) << "," << detail::fmt_double(vi) << ","
                << detail::fmt_double(vd) << "," << detail::fmt_double(vc) << ","
                << detail::fmt_double(to_db(vi)) << "," << detail::fmt_double(to_db(vd))
                << "," << detail::fmt_double(to_db(vc)) << "\n";
        }
    };
    const std::string tag =
        "_seed" + std::to_string(seed) + "_frac" + detail::fmt_fraction(fraction);
    write_cut("pattern_az" + tag + ".csv", true);
    write_cut("pattern_el" + tag + ".csv", false);
}

}  // namespace arraycal
