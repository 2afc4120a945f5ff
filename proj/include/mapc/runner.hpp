#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "mapc/apc.hpp"
#include "mapc/chain.hpp"
#include "mapc/cube_io.hpp"
#include "mapc/errors.hpp"
#include "mapc/metrics.hpp"
#include "mapc/scenario.hpp"
#include "mapc/stretch.hpp"
#include "mapc/synth.hpp"

namespace mapc {

inline constexpr const char* kMethodHannMf = "hann_mf";
inline constexpr const char* kMethodApcBaseline = "apc_baseline";
inline constexpr const char* kMethodApcProposed = "apc_proposed";

struct RunSpec {
    std::string scenario_path;
    std::vector<std::string> methods{kMethodHannMf, kMethodApcBaseline, kMethodApcProposed};
    std::string out_dir;
    std::optional<std::uint64_t> seed; // overrides the scenario seed
    bool dump_intermediates = false;
    std::optional<std::string> cube_path; // ingest instead of synthesizing
};

struct MethodOutcome {
    std::string name;
    bool ok = false;
    std::string error;
    RangeProfile profile; // noncoherent power combination across transmitters
    std::vector<RangeProfile> iteration_profiles; // APC methods only
};

struct RunOutcome {
    Scenario scenario;
    std::uint64_t seed = 0;
    std::vector<MethodOutcome> methods;
    ComparisonReport report;
    std::filesystem::path out_dir;
    std::vector<Cell> cells;

    bool all_ok() const {
        for (const MethodOutcome& m : methods)
            if (!m.ok) return false;
        return true;
    }
};

namespace detail {

inline std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.12g", v);
    return buf;
}

inline void write_file(const std::filesystem::path& path, const std::string& contents) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw io_error("cannot open for write: " + path.string());
    os << contents;
    if (!os) throw io_error("write failed: " + path.string());
}

inline RangeProfile combine_power(const std::vector<RangeProfile>& per_tx) {
    RangeProfile out = per_tx.at(0);
    Eigen::VectorXd power = Eigen::VectorXd::Zero(out.size());
    for (const RangeProfile& p : per_tx) power += p.power();
    power /= static_cast<double>(per_tx.size());
    out.values = power.cwiseSqrt().cast<std::complex<double>>();
    return out;
}

/// Per-receiver snapshot for the traditional-order baseline arm: the
/// block-position-0 pulses of one receiver coherently averaged across
/// blocks, with no doppler compensation or decoding.
inline Eigen::VectorXcd baseline_snapshot(const BlockSet& blocks, int rx) {
    Eigen::VectorXcd acc = Eigen::VectorXcd::Zero(blocks.fast_time_samples());
    for (int p = 0; p < blocks.num_blocks; ++p) acc += blocks.pulses[0][rx].col(p);
    return acc / static_cast<double>(blocks.num_blocks);
}

inline ApcSettings apc_settings(const Scenario& sc) {
    ApcSettings s;
    s.max_iterations = sc.apc_iterations;
    s.early_stop_rel_change = sc.apc_early_stop_rel_change;
    s.diagonal_loading_factor = sc.apc_diagonal_loading;
    return s;
}

/// Baseline arm: adaptive pulse compression per receiver on the traditional
/// uncompensated slow-time average, filtered profiles coherently averaged
/// across receivers.
inline std::vector<ApcResult> baseline_arm(const DataCube& cube, const CompensationMatrix& f,
                                           const Scenario& sc) {
    const BlockSet blocks = block_pulses(cube);
    std::vector<ApcResult> per_rx;
    for (int n = 0; n < blocks.num_rx(); ++n) {
        const Eigen::VectorXcd snap = baseline_snapshot(blocks, n);
        const double sigma2 = sc.apc_noise_power
                                  ? *sc.apc_noise_power
                                  : estimate_noise_power(matched_filter(f, snap));
        per_rx.push_back(rmmse_baseline(f, snap, sigma2, apc_settings(sc)));
    }
    return per_rx;
}

inline RangeProfile coherent_profile_average(const std::vector<RangeProfile>& profiles) {
    RangeProfile out = profiles.at(0);
    Eigen::VectorXcd acc = Eigen::VectorXcd::Zero(out.size());
    for (const RangeProfile& p : profiles) acc += p.values;
    out.values = acc / static_cast<double>(profiles.size());
    return out;
}

inline double method_noise_power(const Scenario& sc, const CompensationMatrix& f,
                                 const std::vector<Eigen::VectorXcd>& snapshots) {
    if (sc.apc_noise_power) return *sc.apc_noise_power;
    double acc = 0.0;
    for (const Eigen::VectorXcd& s : snapshots) acc += estimate_noise_power(matched_filter(f, s));
    return acc / static_cast<double>(snapshots.size());
}

} // namespace detail

struct RunOutcome;
inline void emit_report(const RunOutcome& run, const std::filesystem::path& dir);

/// Per-iteration combined profiles of a set of APC results.
inline std::vector<RangeProfile> iteration_profiles(const std::vector<ApcResult>& results) {
    std::size_t iters = 0;
    for (const ApcResult& r : results) iters = std::max(iters, r.iterations.size());
    std::vector<RangeProfile> out;
    for (std::size_t k = 0; k < iters; ++k) {
        std::vector<RangeProfile> per_tx;
        for (const ApcResult& r : results)
            per_tx.push_back(k < r.iterations.size() ? r.iterations[k] : r.final_profile);
        out.push_back(detail::combine_power(per_tx));
    }
    return out;
}

/// Execute one scenario: synthesize or ingest the cube, run the requested
/// methods, and write profile CSVs plus the comparison report into out_dir.
inline RunOutcome run_scenario(const RunSpec& spec) {
    if (spec.methods.empty()) throw config_error("run: need at least one method");
    for (const std::string& m : spec.methods)
        if (m != kMethodHannMf && m != kMethodApcBaseline && m != kMethodApcProposed)
            throw config_error("run: unknown method '" + m + "'");

    RunOutcome out;
    out.scenario = load_scenario(spec.scenario_path);
    const Scenario& sc = out.scenario;
    out.seed = spec.seed.value_or(sc.seed);
    out.out_dir = spec.out_dir.empty() ? std::filesystem::path(".")
                                       : std::filesystem::path(spec.out_dir);
    std::filesystem::create_directories(out.out_dir);

    const PhaseCodeMatrix code = hadamard(sc.config.num_tx);
    const DataCube cube =
        spec.cube_path ? ingest_raw(*spec.cube_path, sc.config)
                       : synthesize_cube(sc.config, sc.targets, code,
                                         NoiseModel{sc.config.noise_power, out.seed});
    const CompensationMatrix f = build_compensation_matrix(sc.config);
    const DerivedParams d = derive_params(sc.config);

    auto wants = [&](const char* name) {
        return std::find(spec.methods.begin(), spec.methods.end(), name) != spec.methods.end();
    };

    std::optional<PipelineResult> pipeline;
    std::string pipeline_error;
    if (wants(kMethodHannMf) || wants(kMethodApcProposed)) {
        try {
            PipelineOptions opt;
            opt.doppler_window = sc.doppler_window;
            opt.angle_bins = sc.angle_fft_size;
            opt.selector.mode = CellSelector::Mode::detected_peaks;
            opt.selector.detect_scale = sc.cell_detect_scale;
            opt.selector.range_guard_native = sc.cell_range_guard_native;
            opt.keep_intermediates = spec.dump_intermediates;
            pipeline = run_pipeline(cube, code, opt);
            out.cells = pipeline->snapshots.cells;
        } catch (const std::exception& e) {
            pipeline_error = e.what();
        }
    }

    const WindowSpec hann = hanning_window(d.fast_time_samples);
    for (const std::string& name : spec.methods) {
        MethodOutcome mo;
        mo.name = name;
        try {
            if (name == kMethodHannMf) {
                if (!pipeline) throw numerical_error(pipeline_error);
                std::vector<RangeProfile> per_tx;
                for (const Eigen::VectorXcd& s : pipeline->snapshots.per_tx)
                    per_tx.push_back(windowed_matched_filter(f, s, hann));
                mo.profile = detail::combine_power(per_tx);
            } else if (name == kMethodApcBaseline) {
                const std::vector<ApcResult> per_rx = detail::baseline_arm(cube, f, sc);
                std::vector<RangeProfile> finals;
                for (const ApcResult& r : per_rx) finals.push_back(r.final_profile);
                mo.profile = detail::coherent_profile_average(finals);
                std::size_t iters = 0;
                for (const ApcResult& r : per_rx) iters = std::max(iters, r.iterations.size());
                for (std::size_t k = 0; k < iters; ++k) {
                    std::vector<RangeProfile> at_k;
                    for (const ApcResult& r : per_rx)
                        at_k.push_back(k < r.iterations.size() ? r.iterations[k]
                                                               : r.final_profile);
                    mo.iteration_profiles.push_back(detail::coherent_profile_average(at_k));
                }
            } else { // apc_proposed
                if (!pipeline) throw numerical_error(pipeline_error);
                const Eigen::VectorXd taps = hann.taps();
                std::vector<Eigen::VectorXcd> windowed;
                for (const Eigen::VectorXcd& s : pipeline->snapshots.per_tx)
                    windowed.push_back(s.array() * taps.array().cast<std::complex<double>>());
                const CompensationMatrix bank = windowed_bank(f, hann);
                const double sigma2 = detail::method_noise_power(sc, bank, windowed);
                const std::vector<ApcResult> results =
                    rmmse_mimo(bank, windowed, sigma2, detail::apc_settings(sc));
                std::vector<RangeProfile> per_tx;
                for (const ApcResult& r : results) per_tx.push_back(r.final_profile);
                mo.profile = detail::combine_power(per_tx);
                mo.iteration_profiles = iteration_profiles(results);
            }
            mo.ok = true;
        } catch (const std::exception& e) {
            mo.ok = false;
            mo.error = e.what();
        }
        out.methods.push_back(std::move(mo));
    }

    std::vector<std::pair<std::string, RangeProfile>> profiles;
    for (const MethodOutcome& m : out.methods)
        if (m.ok) profiles.emplace_back(m.name, m.profile);
    if (!profiles.empty())
        out.report = build_comparison_report(profiles, sc.metrics,
                                             2.0 * d.native_resolution_m, kMethodApcProposed);

    // profile CSVs: shared range axis, one file per method
    for (const MethodOutcome& m : out.methods) {
        if (!m.ok) continue;
        std::string csv = "range_m,power_db\n";
        const Eigen::VectorXd db = m.profile.power_db();
        for (int b = 0; b < m.profile.size(); ++b)
            csv += detail::fmt(m.profile.range_at(b)) + "," + detail::fmt(db(b)) + "\n";
        detail::write_file(out.out_dir / (m.name + ".csv"), csv);
        if (spec.dump_intermediates) {
            for (std::size_t k = 0; k < m.iteration_profiles.size(); ++k) {
                std::string iter_csv = "range_m,power_db\n";
                const Eigen::VectorXd idb = m.iteration_profiles[k].power_db();
                for (int b = 0; b < m.iteration_profiles[k].size(); ++b)
                    iter_csv += detail::fmt(m.iteration_profiles[k].range_at(b)) + "," +
                                detail::fmt(idb(b)) + "\n";
                detail::write_file(
                    out.out_dir / (m.name + "_iter" + std::to_string(k + 1) + ".csv"),
                    iter_csv);
            }
        }
    }

    if (spec.dump_intermediates && pipeline) {
        const Eigen::MatrixXd pd_power = detection_power(pipeline->pulse_doppler);
        std::string pd_csv;
        for (int q = 0; q < pd_power.rows(); ++q) {
            for (int b = 0; b < pd_power.cols(); ++b)
                pd_csv += (b ? "," : "") + detail::fmt(pd_power(q, b));
            pd_csv += "\n";
        }
        detail::write_file(out.out_dir / "pulse_doppler_power.csv", pd_csv);

        std::string cell_csv;
        for (int b = 0; b < pipeline->cell_energy.rows(); ++b) {
            for (int a = 0; a < pipeline->cell_energy.cols(); ++a)
                cell_csv += (a ? "," : "") + detail::fmt(pipeline->cell_energy(b, a));
            cell_csv += "\n";
        }
        detail::write_file(out.out_dir / "angle_doppler_energy.csv", cell_csv);

        std::string cells_csv = "doppler_bin,angle_bin\n";
        for (const Cell& c : out.cells)
            cells_csv += std::to_string(c.doppler_bin) + "," + std::to_string(c.angle_bin) + "\n";
        detail::write_file(out.out_dir / "integration_cells.csv", cells_csv);
    }

    emit_report(out, out.out_dir);
    return out;
}

/// Write report.json plus the weighted-differential and moving-statistics
/// CSV tables. Deterministic byte-for-byte for identical inputs.
inline void emit_report(const RunOutcome& run, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    const ComparisonReport& rep = run.report;

    nlohmann::ordered_json j;
    j["schema"] = "mapc-report-v1";
    j["seed"] = run.seed;
    j["window_samples"] = rep.window_samples;
    j["regions_m"] = nlohmann::ordered_json::array();
    for (const auto& [lo, hi] : rep.target_regions) j["regions_m"].push_back({lo, hi});
    j["methods"] = nlohmann::ordered_json::array();
    for (const MethodOutcome& m : run.methods) {
        nlohmann::ordered_json jm;
        jm["name"] = m.name;
        jm["ok"] = m.ok;
        if (!m.ok) {
            jm["error"] = m.error;
            j["methods"].push_back(jm);
            continue;
        }
        for (const MethodMetrics& mm : rep.methods) {
            if (mm.name != m.name) continue;
            jm["psl_db"] = mm.psl_db;
            jm["sinr_db"] = mm.sinr_db;
            jm["moving_avg_db_targets"] = mm.moving_avg_targets;
            jm["moving_avg_db_other"] = mm.moving_avg_other;
            jm["moving_std_db_targets"] = mm.moving_std_targets;
            jm["moving_std_db_other"] = mm.moving_std_other;
        }
        jm["profile_csv"] = m.name + ".csv";
        j["methods"].push_back(jm);
    }
    j["pairs"] = nlohmann::ordered_json::array();
    for (const PairMetrics& p : rep.pairs) {
        nlohmann::ordered_json jp;
        jp["reference"] = p.reference;
        jp["other"] = p.other;
        jp["mu_delta_targets"] = p.mu_delta_targets;
        jp["mu_delta_other"] = p.mu_delta_other;
        j["pairs"].push_back(jp);
    }
    detail::write_file(dir / "report.json", j.dump(2) + "\n");

    if (!rep.pairs.empty()) {
        std::string csv = "range_m";
        for (const PairMetrics& p : rep.pairs) csv += ",delta_" + p.other;
        csv += "\n";
        for (Eigen::Index b = 0; b < rep.range_m.size(); ++b) {
            csv += detail::fmt(rep.range_m(b));
            for (const PairMetrics& p : rep.pairs) csv += "," + detail::fmt(p.delta(b));
            csv += "\n";
        }
        detail::write_file(dir / "weighted_diff.csv", csv);

        // summary table mirroring the row/column layout of the weighted
        // amplitude differential comparison
        std::string table = "parameter";
        for (const PairMetrics& p : rep.pairs) table += "," + p.reference + "-" + p.other;
        table += "\nmu_delta_targets";
        for (const PairMetrics& p : rep.pairs) table += "," + detail::fmt(p.mu_delta_targets);
        table += "\nmu_delta_other_locations";
        for (const PairMetrics& p : rep.pairs) table += "," + detail::fmt(p.mu_delta_other);
        table += "\n";
        detail::write_file(dir / "mu_delta_table.csv", table);
    }

    if (!rep.methods.empty()) {
        std::string csv = "range_m";
        for (const MethodMetrics& m : rep.methods)
            csv += "," + m.name + "_avg_db," + m.name + "_std_db";
        csv += "\n";
        std::vector<std::pair<Eigen::VectorXd, Eigen::VectorXd>> stats;
        for (const MethodMetrics& m : rep.methods)
            stats.emplace_back(moving_average(m.power_db, rep.window_samples).series,
                               moving_std(m.power_db, rep.window_samples).series);
        for (Eigen::Index b = 0; b < rep.range_m.size(); ++b) {
            csv += detail::fmt(rep.range_m(b));
            for (const auto& [avg, sd] : stats)
                csv += "," + detail::fmt(avg(b)) + "," + detail::fmt(sd(b));
            csv += "\n";
        }
        detail::write_file(dir / "moving_stats.csv", csv);
    }
}

} // namespace mapc
