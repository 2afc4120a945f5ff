#pragma once

#include <cstdint>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "mapc/errors.hpp"
#include "mapc/metrics.hpp"
#include "mapc/radar_config.hpp"
#include "mapc/window.hpp"

namespace mapc {

/// A parsed scenario file: radar configuration, target scene, and the
/// processing knobs the runner honours. See README for the grammar.
struct Scenario {
    RadarConfig config;
    std::vector<Target> targets;
    std::uint64_t seed = 1;
    MetricsConfig metrics;

    int apc_iterations = 3;
    double apc_early_stop_rel_change = 1e-3;
    double apc_diagonal_loading = 0.0;
    std::optional<double> apc_noise_power; // overrides the estimated snapshot noise
    int angle_fft_size = 64;
    WindowKind doppler_window = WindowKind::hanning;
    double cell_detect_scale = 3.0;
    double cell_range_guard_native = 2.0;
};

namespace detail {

inline std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

inline double parse_double(const std::string& text, int line) {
    std::size_t used = 0;
    double v = 0.0;
    try {
        v = std::stod(text, &used);
    } catch (const std::exception&) {
        throw config_error("scenario line " + std::to_string(line) + ": bad number '" + text +
                           "'");
    }
    if (used != text.size())
        throw config_error("scenario line " + std::to_string(line) + ": bad number '" + text +
                           "'");
    return v;
}

inline Target parse_target(const std::string& body, int line) {
    Target t;
    bool have_range = false, have_amp = false;
    double amplitude_db = 0.0, rcs_dbsm = 0.0, phase_deg = 0.0;
    bool use_rcs = false;
    std::istringstream in(body);
    std::string token;
    while (in >> token) {
        const auto eq = token.find('=');
        if (eq == std::string::npos)
            throw config_error("scenario line " + std::to_string(line) +
                               ": expected key=value, got '" + token + "'");
        const std::string key = token.substr(0, eq);
        const double value = parse_double(token.substr(eq + 1), line);
        if (key == "range_m") {
            t.range_m = value;
            have_range = true;
        } else if (key == "velocity_mps") {
            t.velocity_mps = value;
        } else if (key == "azimuth_deg") {
            t.azimuth_deg = value;
        } else if (key == "amplitude_db") {
            amplitude_db = value;
            have_amp = true;
            use_rcs = false;
        } else if (key == "rcs_dbsm") {
            rcs_dbsm = value;
            have_amp = true;
            use_rcs = true;
        } else if (key == "phase_deg") {
            phase_deg = value;
        } else {
            throw config_error("scenario line " + std::to_string(line) +
                               ": unknown target key '" + key + "'");
        }
    }
    if (!have_range || !have_amp)
        throw config_error("scenario line " + std::to_string(line) +
                           ": target needs range_m and amplitude_db or rcs_dbsm");
    const double magnitude = use_rcs ? std::abs(amplitude_from_rcs(rcs_dbsm, t.range_m))
                                     : std::pow(10.0, amplitude_db / 20.0);
    t.amplitude = std::polar(magnitude, phase_deg * std::numbers::pi / 180.0);
    return t;
}

} // namespace detail

inline Scenario load_scenario(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw io_error("cannot open scenario: " + path);

    Scenario sc;
    std::string raw;
    int line = 0;
    while (std::getline(in, raw)) {
        ++line;
        std::string text = raw;
        if (const auto hash = text.find('#'); hash != std::string::npos)
            text = text.substr(0, hash);
        text = detail::trim(text);
        if (text.empty()) continue;

        if (text.rfind("target:", 0) == 0) {
            sc.targets.push_back(detail::parse_target(text.substr(7), line));
            continue;
        }
        if (text.rfind("region:", 0) == 0) {
            std::istringstream body(text.substr(7));
            double lo = 0.0, hi = 0.0;
            if (!(body >> lo >> hi) || hi < lo)
                throw config_error("scenario line " + std::to_string(line) +
                                   ": region needs 'lo hi' in metres");
            sc.metrics.target_regions.emplace_back(lo, hi);
            continue;
        }

        const auto eq = text.find('=');
        if (eq == std::string::npos)
            throw config_error("scenario line " + std::to_string(line) + ": expected key = value");
        const std::string key = detail::trim(text.substr(0, eq));
        const std::string value = detail::trim(text.substr(eq + 1));
        auto num = [&] { return detail::parse_double(value, line); };
        auto count = [&] { return static_cast<int>(num()); };

        if (key == "num_tx") sc.config.num_tx = count();
        else if (key == "num_rx") sc.config.num_rx = count();
        else if (key == "start_freq_hz") sc.config.start_freq_hz = num();
        else if (key == "bandwidth_hz") sc.config.bandwidth_hz = num();
        else if (key == "sweep_time_s") sc.config.sweep_time_s = num();
        else if (key == "chirp_rate_hz_per_s") sc.config.chirp_rate_hz_per_s = num();
        else if (key == "adc_rate_hz") sc.config.adc_rate_hz = num();
        else if (key == "chirps_per_tx_in_cpi") sc.config.chirps_per_tx_in_cpi = count();
        else if (key == "near_range_m") sc.config.near_range_m = num();
        else if (key == "far_range_m") sc.config.far_range_m = num();
        else if (key == "oversample_factor") sc.config.oversample_factor = count();
        else if (key == "noise_power") sc.config.noise_power = num();
        else if (key == "seed") sc.seed = static_cast<std::uint64_t>(num());
        else if (key == "metrics_window_samples") sc.metrics.window_samples = count();
        else if (key == "apc_iterations") sc.apc_iterations = count();
        else if (key == "apc_early_stop_rel_change") sc.apc_early_stop_rel_change = num();
        else if (key == "apc_diagonal_loading") sc.apc_diagonal_loading = num();
        else if (key == "apc_noise_power") sc.apc_noise_power = num();
        else if (key == "angle_fft_size") sc.angle_fft_size = count();
        else if (key == "cell_detect_scale") sc.cell_detect_scale = num();
        else if (key == "cell_range_guard_native") sc.cell_range_guard_native = num();
        else if (key == "doppler_window") {
            if (value == "rectangular") sc.doppler_window = WindowKind::rectangular;
            else if (value == "hanning") sc.doppler_window = WindowKind::hanning;
            else
                throw config_error("scenario line " + std::to_string(line) +
                                   ": doppler_window must be rectangular or hanning");
        } else {
            throw config_error("scenario line " + std::to_string(line) + ": unknown key '" +
                               key + "'");
        }
    }

    validate(sc.config);
    for (const Target& t : sc.targets)
        if (t.range_m < sc.config.near_range_m || t.range_m > sc.config.far_range_m)
            throw config_error("scenario: target at " + std::to_string(t.range_m) +
                               " m outside swath");
    if (sc.metrics.target_regions.empty()) {
        // default regions: +/- 1 m around each target, clipped to the swath
        for (const Target& t : sc.targets)
            sc.metrics.target_regions.emplace_back(
                std::max(sc.config.near_range_m, t.range_m - 1.0),
                std::min(sc.config.far_range_m, t.range_m + 1.0));
    }
    const DerivedParams d = derive_params(sc.config);
    sc.metrics.range_bin_m = d.range_bin_m;
    return sc;
}

} // namespace mapc
