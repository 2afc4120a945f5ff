#pragma once

#include <cmath>
#include <complex>
#include <numbers>
#include <string>

#include "mapc/errors.hpp"

namespace mapc {

/// Propagation speed used for all range/beat conversions.
inline constexpr double kSpeedOfLight = 3.0e8;

/// Waveform, array, sampling and CPI parameters for one radar configuration.
/// `chirp_rate_hz_per_s` may be left at 0 to derive it as bandwidth/sweep time;
/// when set explicitly it must agree with that ratio to 1e-9 relative.
struct RadarConfig {
    int num_tx = 1;
    int num_rx = 1;
    double start_freq_hz = 0.0;
    double bandwidth_hz = 0.0;
    double sweep_time_s = 0.0;
    double chirp_rate_hz_per_s = 0.0;
    double adc_rate_hz = 0.0;
    int chirps_per_tx_in_cpi = 1; // per-transmitter count; total chirps = num_tx * this
    double near_range_m = 0.0;
    double far_range_m = 0.0;
    int oversample_factor = 1;
    double noise_power = 0.0; // linear, per complex sample

    double chirp_rate() const {
        return chirp_rate_hz_per_s > 0.0 ? chirp_rate_hz_per_s
                                         : bandwidth_hz / sweep_time_s;
    }
    int total_chirps() const { return num_tx * chirps_per_tx_in_cpi; }
};

/// Quantities derived from a validated RadarConfig.
struct DerivedParams {
    int fast_time_samples = 0;   // N_f = floor(sweep_time * adc_rate)
    int range_bins = 0;          // L = oversample_factor * N_f
    double wavelength_m = 0.0;
    double rx_spacing_m = 0.0;   // lambda / 2
    double tx_spacing_m = 0.0;   // num_rx * lambda / 2
    double block_duration_s = 0.0; // num_tx * sweep_time
    double range_bin_m = 0.0;    // (far - near) / L
    double sample_period_s = 0.0;
    double native_resolution_m = 0.0; // c / (2 B)
};

inline void validate(const RadarConfig& cfg) {
    auto fail = [](const std::string& msg) { throw config_error("config: " + msg); };
    if (cfg.num_tx < 1 || cfg.num_rx < 1 || cfg.chirps_per_tx_in_cpi < 1 ||
        cfg.oversample_factor < 1)
        fail("all counts must be >= 1");
    if (cfg.start_freq_hz <= 0) fail("start_freq_hz must be positive");
    if (cfg.bandwidth_hz <= 0) fail("bandwidth_hz must be positive");
    if (cfg.sweep_time_s <= 0) fail("sweep_time_s must be positive");
    if (cfg.adc_rate_hz <= 0) fail("adc_rate_hz must be positive");
    if (cfg.noise_power < 0) fail("noise_power must be >= 0");
    if (!(cfg.far_range_m > cfg.near_range_m) || cfg.near_range_m < 0)
        fail("require far_range_m > near_range_m >= 0");
    if (cfg.chirp_rate_hz_per_s > 0.0) {
        const double derived = cfg.bandwidth_hz / cfg.sweep_time_s;
        if (std::abs(cfg.chirp_rate_hz_per_s - derived) > 1e-9 * derived)
            fail("chirp_rate_hz_per_s inconsistent with bandwidth/sweep_time");
    }
    if (static_cast<int>(std::floor(cfg.sweep_time_s * cfg.adc_rate_hz)) < 2)
        fail("fewer than 2 fast-time samples per sweep");
}

inline DerivedParams derive_params(const RadarConfig& cfg) {
    validate(cfg);
    DerivedParams d;
    d.fast_time_samples = static_cast<int>(std::floor(cfg.sweep_time_s * cfg.adc_rate_hz));
    d.range_bins = cfg.oversample_factor * d.fast_time_samples;
    d.wavelength_m = kSpeedOfLight / cfg.start_freq_hz;
    d.rx_spacing_m = d.wavelength_m / 2.0;
    d.tx_spacing_m = cfg.num_rx * d.wavelength_m / 2.0;
    d.block_duration_s = cfg.num_tx * cfg.sweep_time_s;
    d.range_bin_m = (cfg.far_range_m - cfg.near_range_m) / d.range_bins;
    d.sample_period_s = 1.0 / cfg.adc_rate_hz;
    d.native_resolution_m = kSpeedOfLight / (2.0 * cfg.bandwidth_hz);
    return d;
}

/// Point scatterer. Velocity is radial, positive receding.
struct Target {
    double range_m = 0.0;
    double velocity_mps = 0.0;
    double azimuth_deg = 0.0;
    std::complex<double> amplitude{1.0, 0.0};

    double sin_azimuth() const { return std::sin(azimuth_deg * std::numbers::pi / 180.0); }
    double doppler_hz(double wavelength_m) const { return 2.0 * velocity_mps / wavelength_m; }
    /// Doppler normalized to the chirp interval: f_d * T_p.
    double doppler_normalized(const RadarConfig& cfg, const DerivedParams& d) const {
        return doppler_hz(d.wavelength_m) * cfg.sweep_time_s;
    }
    /// Spatial frequency across the receive array: u * d_R / lambda = u / 2.
    double spatial_normalized() const { return sin_azimuth() / 2.0; }
    /// Two-way delay 2R/c.
    double delay_s() const { return 2.0 * range_m / kSpeedOfLight; }
    /// Beat frequency K*tau + f_d.
    double beat_hz(const RadarConfig& cfg, const DerivedParams& d) const {
        return cfg.chirp_rate() * delay_s() + doppler_hz(d.wavelength_m);
    }
};

/// Scattering amplitude from RCS under the two-way R^-4 power law:
/// |alpha| = sqrt(10^(rcs/10)) / R^2 (unit reference range, zero phase).
inline std::complex<double> amplitude_from_rcs(double rcs_dbsm, double range_m) {
    if (range_m <= 0) throw config_error("amplitude_from_rcs: range must be positive");
    return {std::sqrt(std::pow(10.0, rcs_dbsm / 10.0)) / (range_m * range_m), 0.0};
}

} // namespace mapc
