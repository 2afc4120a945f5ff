#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "mapc/errors.hpp"
#include "mapc/stretch.hpp"

namespace mapc {

/// Windowing and target-region settings for profile comparison metrics.
struct MetricsConfig {
    int window_samples = 5;      // moving-statistics window k
    double range_bin_m = 0.325;  // nominal moving-statistics bin size (documentation)
    std::vector<std::pair<double, double>> target_regions; // [lo, hi] metres
};

inline constexpr double kDbFloor = -300.0;

/// Population mean and standard deviation of a series.
inline std::pair<double, double> population_stats(const Eigen::VectorXd& x) {
    if (x.size() == 0) throw config_error("population_stats: empty series");
    const double mu = x.mean();
    const double var = (x.array() - mu).square().mean();
    return {mu, std::sqrt(var)};
}

/// Weighted amplitude differential between a reference series x_p and a
/// comparison series x_f (both in dB):
///   delta_n = sqrt(|x_p,n^2 - mu_p^2|) / sigma_p * (x_p,n - x_f,n)
inline Eigen::VectorXd weighted_amp_diff(const Eigen::VectorXd& x_p, const Eigen::VectorXd& x_f,
                                         double mu_p, double sigma_p) {
    if (x_p.size() != x_f.size())
        throw config_error("weighted_amp_diff: series lengths differ");
    if (!(sigma_p > 0.0))
        throw numerical_error("weighted_amp_diff: degenerate statistics (sigma_p == 0)");
    Eigen::VectorXd delta(x_p.size());
    for (Eigen::Index n = 0; n < x_p.size(); ++n) {
        const double weight = std::sqrt(std::abs(x_p(n) * x_p(n) - mu_p * mu_p)) / sigma_p;
        delta(n) = weight * (x_p(n) - x_f(n));
    }
    return delta;
}

/// Moving series plus its mean over all output samples.
struct MovingStat {
    Eigen::VectorXd series;
    double mean = 0.0;
};

/// Trailing moving average over windows of k samples; leading-edge partial
/// windows are averaged over the samples available.
inline MovingStat moving_average(const Eigen::VectorXd& x, int k) {
    if (x.size() == 0) throw config_error("moving_average: empty series");
    if (k < 1) throw config_error("moving_average: window must be >= 1");
    MovingStat out;
    out.series.resize(x.size());
    for (Eigen::Index n = 0; n < x.size(); ++n) {
        const Eigen::Index lo = std::max<Eigen::Index>(0, n - k + 1);
        out.series(n) = x.segment(lo, n - lo + 1).mean();
    }
    out.mean = out.series.mean();
    return out;
}

/// Trailing moving population standard deviation over the same windows.
inline MovingStat moving_std(const Eigen::VectorXd& x, int k) {
    if (x.size() == 0) throw config_error("moving_std: empty series");
    if (k < 1) throw config_error("moving_std: window must be >= 1");
    MovingStat out;
    out.series.resize(x.size());
    for (Eigen::Index n = 0; n < x.size(); ++n) {
        const Eigen::Index lo = std::max<Eigen::Index>(0, n - k + 1);
        const Eigen::Index count = n - lo + 1;
        const double mean = x.segment(lo, count).mean();
        const double var = (x.segment(lo, count).array() - mean).square().sum() / count;
        out.series(n) = std::sqrt(var);
    }
    out.mean = out.series.mean();
    return out;
}

/// Peak sidelobe level and per-region SINR of a range profile.
///   PSL  = max power outside every region's mainlobe, relative to the
///          strongest region peak (dB; floored at -300 when empty/zero).
///   SINR = region peak power over mean power outside all regions (dB).
struct PslSinr {
    double psl_db = kDbFloor;
    std::vector<double> sinr_db;
    std::vector<int> peak_bins;
};

inline PslSinr psl_sinr(const RangeProfile& profile,
                        const std::vector<std::pair<double, double>>& regions,
                        double mainlobe_half_width_m) {
    if (regions.empty()) throw config_error("psl_sinr: need at least one target region");
    const int L = profile.size();
    const Eigen::VectorXd pw = profile.power();
    const double swath_lo = profile.near_range_m;
    const double swath_hi = profile.range_at(L - 1);
    auto bin_of = [&](double r) {
        return static_cast<int>(std::lround((r - profile.near_range_m) / profile.bin_m));
    };

    std::vector<char> in_region(L, 0), in_mainlobe(L, 0);
    PslSinr out;
    double best_peak = 0.0;
    for (const auto& [lo, hi] : regions) {
        if (hi < swath_lo || lo > swath_hi)
            throw config_error("psl_sinr: target region outside swath");
        const int blo = std::max(0, bin_of(lo));
        const int bhi = std::min(L - 1, bin_of(hi));
        int peak_bin = blo;
        for (int b = blo; b <= bhi; ++b) {
            in_region[b] = 1;
            if (pw(b) > pw(peak_bin)) peak_bin = b;
        }
        out.peak_bins.push_back(peak_bin);
        best_peak = std::max(best_peak, pw(peak_bin));
        const int half = std::max(0, static_cast<int>(std::lround(mainlobe_half_width_m /
                                                                  profile.bin_m)));
        for (int b = std::max(0, peak_bin - half); b <= std::min(L - 1, peak_bin + half); ++b)
            in_mainlobe[b] = 1;
    }

    double max_sidelobe = 0.0;
    double outside_sum = 0.0;
    int outside_count = 0;
    for (int b = 0; b < L; ++b) {
        if (!in_mainlobe[b]) max_sidelobe = std::max(max_sidelobe, pw(b));
        if (!in_region[b]) {
            outside_sum += pw(b);
            ++outside_count;
        }
    }

    auto to_db = [](double ratio) {
        return ratio > 0.0 ? std::max(kDbFloor, 10.0 * std::log10(ratio)) : kDbFloor;
    };
    out.psl_db = best_peak > 0.0 ? to_db(max_sidelobe / best_peak) : kDbFloor;
    const double outside_mean = outside_count > 0 ? outside_sum / outside_count : 0.0;
    for (std::size_t r = 0; r < regions.size(); ++r) {
        const double peak = pw(out.peak_bins[r]);
        out.sinr_db.push_back(outside_mean > 0.0 ? to_db(peak / outside_mean)
                                                 : (peak > 0.0 ? -kDbFloor : 0.0));
    }
    return out;
}

/// Membership mask of profile bins covered by any target region.
inline std::vector<char> region_mask(const RangeProfile& profile,
                                     const std::vector<std::pair<double, double>>& regions) {
    std::vector<char> mask(profile.size(), 0);
    for (const auto& [lo, hi] : regions)
        for (int b = 0; b < profile.size(); ++b)
            if (profile.range_at(b) >= lo && profile.range_at(b) <= hi) mask[b] = 1;
    return mask;
}

inline double masked_mean(const Eigen::VectorXd& x, const std::vector<char>& mask, bool inside) {
    double sum = 0.0;
    int count = 0;
    for (Eigen::Index i = 0; i < x.size(); ++i)
        if (static_cast<bool>(mask[static_cast<std::size_t>(i)]) == inside) {
            sum += x(i);
            ++count;
        }
    return count > 0 ? sum / count : 0.0;
}

/// Per-method profile statistics for the comparison report.
struct MethodMetrics {
    std::string name;
    Eigen::VectorXd power_db;
    double psl_db = kDbFloor;
    std::vector<double> sinr_db;
    double moving_avg_targets = 0.0;
    double moving_avg_other = 0.0;
    double moving_std_targets = 0.0;
    double moving_std_other = 0.0;
};

/// Weighted differential of the reference method against one other method.
struct PairMetrics {
    std::string reference;
    std::string other;
    Eigen::VectorXd delta;
    double mu_delta_targets = 0.0;
    double mu_delta_other = 0.0;
};

struct ComparisonReport {
    Eigen::VectorXd range_m;
    std::vector<std::pair<double, double>> target_regions;
    int window_samples = 5;
    std::vector<MethodMetrics> methods;
    std::vector<PairMetrics> pairs;
};

/// Assemble the report from per-method profiles. `reference` names the method
/// used as x_p in the weighted differentials (skipped when absent).
inline ComparisonReport build_comparison_report(
    const std::vector<std::pair<std::string, RangeProfile>>& profiles,
    const MetricsConfig& metrics, double mainlobe_half_width_m,
    const std::string& reference) {
    if (profiles.empty()) throw config_error("comparison report: no profiles");
    ComparisonReport report;
    const RangeProfile& first = profiles.front().second;
    report.range_m.resize(first.size());
    for (int b = 0; b < first.size(); ++b) report.range_m(b) = first.range_at(b);
    report.target_regions = metrics.target_regions;
    report.window_samples = metrics.window_samples;

    const std::vector<char> mask = region_mask(first, metrics.target_regions);
    const Eigen::VectorXd* ref_db = nullptr;
    for (const auto& [name, profile] : profiles) {
        MethodMetrics m;
        m.name = name;
        m.power_db = profile.power_db();
        const PslSinr ps = psl_sinr(profile, metrics.target_regions, mainlobe_half_width_m);
        m.psl_db = ps.psl_db;
        m.sinr_db = ps.sinr_db;
        const MovingStat avg = moving_average(m.power_db, metrics.window_samples);
        const MovingStat sd = moving_std(m.power_db, metrics.window_samples);
        m.moving_avg_targets = masked_mean(avg.series, mask, true);
        m.moving_avg_other = masked_mean(avg.series, mask, false);
        m.moving_std_targets = masked_mean(sd.series, mask, true);
        m.moving_std_other = masked_mean(sd.series, mask, false);
        report.methods.push_back(std::move(m));
    }
    for (const MethodMetrics& m : report.methods)
        if (m.name == reference) ref_db = &m.power_db;
    if (ref_db) {
        const auto [mu_p, sigma_p] = population_stats(*ref_db);
        for (const MethodMetrics& m : report.methods) {
            if (m.name == reference) continue;
            PairMetrics pair;
            pair.reference = reference;
            pair.other = m.name;
            pair.delta = weighted_amp_diff(*ref_db, m.power_db, mu_p, sigma_p);
            pair.mu_delta_targets = masked_mean(pair.delta, mask, true);
            pair.mu_delta_other = masked_mean(pair.delta, mask, false);
            report.pairs.push_back(std::move(pair));
        }
    }
    return report;
}

} // namespace mapc
