#pragma once

#include <Eigen/Dense>
#include <iostream>
#include <numbers>

#include "mapc/errors.hpp"
#include "mapc/radar_config.hpp"
#include "mapc/window.hpp"

namespace mapc {

/// Unit-norm-column matched-filter bank over the oversampled range swath.
/// Column l is tuned to the beat frequency of range near + l * bin_m, so
/// F^H applied to a dechirped snapshot peaks at the scatterer range.
struct CompensationMatrix {
    Eigen::MatrixXcd entries;   // N_f x L
    double near_beat_freq_hz = 0.0;
    double freq_step_hz = 0.0;
    Eigen::VectorXd time_axis;  // length N_f, starts at tau_near
    double near_range_m = 0.0;
    double range_bin_m = 0.0;

    int fast_time_samples() const { return static_cast<int>(entries.rows()); }
    int range_bins() const { return static_cast<int>(entries.cols()); }
    double range_at(int bin) const { return near_range_m + bin * range_bin_m; }
};

inline CompensationMatrix build_compensation_matrix(const RadarConfig& cfg, int range_bins) {
    const DerivedParams d = derive_params(cfg);
    if (range_bins < 1) throw config_error("compensation matrix: need at least one range bin");
    if (range_bins < d.fast_time_samples)
        std::cerr << "mapc: warning: range bank undersampled (" << range_bins << " bins < "
                  << d.fast_time_samples << " fast-time samples)\n";

    const int nf = d.fast_time_samples;
    const double chirp_rate = cfg.chirp_rate();
    const double tau_near = 2.0 * cfg.near_range_m / kSpeedOfLight;
    const double bin_m = (cfg.far_range_m - cfg.near_range_m) / range_bins;

    CompensationMatrix f;
    f.near_beat_freq_hz = chirp_rate * 2.0 * cfg.near_range_m / kSpeedOfLight;
    f.freq_step_hz = chirp_rate * 2.0 * bin_m / kSpeedOfLight;
    f.near_range_m = cfg.near_range_m;
    f.range_bin_m = bin_m;
    f.time_axis.resize(nf);
    for (int q = 0; q < nf; ++q) f.time_axis(q) = tau_near + q * d.sample_period_s;

    f.entries.resize(nf, range_bins);
    const double two_pi = 2.0 * std::numbers::pi;
    const double inv_norm = 1.0 / std::sqrt(static_cast<double>(nf));
    for (int l = 0; l < range_bins; ++l) {
        const double freq = f.near_beat_freq_hz + l * f.freq_step_hz;
        for (int q = 0; q < nf; ++q)
            f.entries(q, l) = std::polar(inv_norm, two_pi * freq * f.time_axis(q));
    }
    return f;
}

inline CompensationMatrix build_compensation_matrix(const RadarConfig& cfg) {
    return build_compensation_matrix(cfg, derive_params(cfg).range_bins);
}

/// Length-L complex range estimate with range-axis metadata.
struct RangeProfile {
    Eigen::VectorXcd values;
    double near_range_m = 0.0;
    double bin_m = 0.0;

    int size() const { return static_cast<int>(values.size()); }
    double range_at(int bin) const { return near_range_m + bin * bin_m; }
    Eigen::VectorXd power() const { return values.array().abs2(); }
    Eigen::VectorXd power_db() const {
        return (values.array().abs2() + 1e-300).log10() * 10.0;
    }
};

/// x_mf = F^H s.
inline RangeProfile matched_filter(const CompensationMatrix& f, const Eigen::VectorXcd& s) {
    if (s.size() != f.entries.rows())
        throw config_error("matched_filter: snapshot length does not match bank");
    return {f.entries.adjoint() * s, f.near_range_m, f.range_bin_m};
}

/// Bank with the taper folded into each column and columns renormalized.
/// Matched to snapshots that are windowed before adaptive filtering: the
/// plain bank leaves an off-grid tone's estimate smeared across the window
/// mainlobe, the tapered bank keeps it anchored at the true bin.
inline CompensationMatrix windowed_bank(const CompensationMatrix& f, const WindowSpec& w) {
    if (w.length != f.entries.rows())
        throw config_error("windowed_bank: window length does not match bank");
    CompensationMatrix out = f;
    const Eigen::VectorXd taps = w.taps();
    for (int l = 0; l < out.range_bins(); ++l) {
        out.entries.col(l).array() *= taps.array().cast<std::complex<double>>();
        const double norm = out.entries.col(l).norm();
        if (norm > 0.0) out.entries.col(l) /= norm;
    }
    return out;
}

/// x = F^H (h .* s).
inline RangeProfile windowed_matched_filter(const CompensationMatrix& f,
                                            const Eigen::VectorXcd& s, const WindowSpec& w) {
    if (w.length != f.entries.rows())
        throw config_error("windowed_matched_filter: window length does not match bank");
    if (s.size() != f.entries.rows())
        throw config_error("windowed_matched_filter: snapshot length does not match bank");
    const Eigen::VectorXcd windowed = s.array() * w.taps().array().cast<std::complex<double>>();
    return {f.entries.adjoint() * windowed, f.near_range_m, f.range_bin_m};
}

} // namespace mapc
