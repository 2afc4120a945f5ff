#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <algorithm>
#include <optional>
#include <vector>

#include "mapc/errors.hpp"
#include "mapc/stretch.hpp"

namespace mapc {

struct ApcSettings {
    int max_iterations = 3;
    double early_stop_rel_change = 1e-3; // 0 disables early stopping
    double diagonal_loading_factor = 0.0; // multiplier on the noise power
    std::optional<double> noise_power_override;
    /// Compatibility switch: build the covariance with the signal term
    /// counted twice (2 F P F^H + noise), off by default.
    bool doubled_signal_covariance = false;
    /// Replaces the matched-filter initialization of the power estimate.
    std::optional<Eigen::VectorXd> initial_power;

    void validate(int range_bins) const {
        if (max_iterations < 1 || max_iterations > 10)
            throw config_error("apc: max_iterations must be within [1, 10]");
        if (diagonal_loading_factor < 0.0)
            throw config_error("apc: diagonal loading must be >= 0");
        if (early_stop_rel_change < 0.0)
            throw config_error("apc: early stop threshold must be >= 0");
        if (initial_power && static_cast<int>(initial_power->size()) != range_bins)
            throw config_error("apc: initial power length does not match bank");
        if (initial_power && initial_power->minCoeff() < 0.0)
            throw config_error("apc: initial power must be nonnegative");
    }
};

struct ApcResult {
    RangeProfile matched;                  // F^H s, also the default P_0
    std::vector<RangeProfile> iterations;  // adaptive estimate per iteration
    RangeProfile final_profile;            // == iterations.back()
    std::vector<double> condition_estimates;
    std::vector<double> unity_gain_residuals; // max_l |w(l)^H f_l - 1| per iteration
    bool early_stopped = false;
};

namespace detail {

/// One RMMSE run against a fixed additive covariance term (empty for the
/// single-input variant). Each iteration performs exactly one Hermitian
/// positive-definite factorization, reused for all range bins.
inline ApcResult rmmse_run(const CompensationMatrix& f, const Eigen::VectorXcd& snapshot,
                           double noise_power, const ApcSettings& settings,
                           const Eigen::MatrixXcd* fixed_cross) {
    const int nf = f.fast_time_samples();
    const int bins = f.range_bins();
    settings.validate(bins);
    if (snapshot.size() != nf)
        throw config_error("apc: snapshot length does not match bank");

    const double sigma2 = settings.noise_power_override.value_or(noise_power);
    if (sigma2 < 0.0) throw config_error("apc: noise power must be >= 0");
    const double diag_load = sigma2 * (1.0 + settings.diagonal_loading_factor);

    ApcResult result;
    result.matched = matched_filter(f, snapshot);
    Eigen::VectorXd power =
        settings.initial_power ? *settings.initial_power : result.matched.power();

    const double signal_scale = settings.doubled_signal_covariance ? 2.0 : 1.0;
    for (int k = 0; k < settings.max_iterations; ++k) {
        Eigen::MatrixXcd cov(nf, nf);
        cov.noalias() = (f.entries * power.cast<std::complex<double>>().asDiagonal()) *
                        f.entries.adjoint() * signal_scale;
        if (fixed_cross) cov += *fixed_cross;
        cov.diagonal().array() += diag_load;

        Eigen::LLT<Eigen::MatrixXcd> llt(cov);
        if (llt.info() != Eigen::Success)
            throw numerical_error(
                "apc: covariance factorization failed (singular or indefinite); "
                "supply a positive noise power or enable diagonal loading");
        const Eigen::MatrixXcd gains = llt.solve(f.entries); // C^-1 F, one solve for all bins

        const Eigen::VectorXd ldiag = llt.matrixLLT().diagonal().real();
        result.condition_estimates.push_back(
            std::pow(ldiag.maxCoeff() / ldiag.minCoeff(), 2.0));

        Eigen::VectorXcd estimate(bins);
        double worst_residual = 0.0;
        for (int l = 0; l < bins; ++l) {
            const std::complex<double> denom = f.entries.col(l).dot(gains.col(l)); // f^H g
            const double denom_re = denom.real();
            estimate(l) = gains.col(l).dot(snapshot) / denom_re; // w^H s with w = g / Re(f^H g)
            worst_residual =
                std::max(worst_residual, std::abs(std::conj(denom) / denom_re - 1.0));
        }
        result.unity_gain_residuals.push_back(worst_residual);
        result.iterations.push_back({estimate, f.near_range_m, f.range_bin_m});

        const Eigen::VectorXd next_power = estimate.array().abs2();
        const double prev_peak = power.maxCoeff();
        const double change = (next_power - power).cwiseAbs().maxCoeff();
        power = next_power;
        if (settings.early_stop_rel_change > 0.0 && k + 1 < settings.max_iterations &&
            prev_peak > 0.0 && change < settings.early_stop_rel_change * prev_peak) {
            result.early_stopped = true;
            break;
        }
    }
    result.final_profile = result.iterations.back();
    return result;
}

} // namespace detail

/// Baseline single-input reiterative MMSE filter.
inline ApcResult rmmse_baseline(const CompensationMatrix& f, const Eigen::VectorXcd& snapshot,
                                double noise_power, const ApcSettings& settings = {}) {
    return detail::rmmse_run(f, snapshot, noise_power, settings, nullptr);
}

/// MIMO variant: each transmitter's covariance additionally carries the
/// fixed matched-filter power estimates of every other transmitter, so the
/// per-transmitter runs stay independent.
inline std::vector<ApcResult> rmmse_mimo(const CompensationMatrix& f,
                                         const std::vector<Eigen::VectorXcd>& snapshots,
                                         double noise_power, const ApcSettings& settings = {}) {
    if (snapshots.empty()) throw config_error("rmmse_mimo: need at least one snapshot");
    const int nf = f.fast_time_samples();
    const int nt = static_cast<int>(snapshots.size());

    std::vector<Eigen::MatrixXcd> mf_terms(nt);
    for (int j = 0; j < nt; ++j) {
        if (snapshots[j].size() != nf)
            throw config_error("rmmse_mimo: snapshot length does not match bank");
        const Eigen::VectorXd p = (f.entries.adjoint() * snapshots[j]).array().abs2();
        mf_terms[j].noalias() =
            (f.entries * p.cast<std::complex<double>>().asDiagonal()) * f.entries.adjoint();
    }
    Eigen::MatrixXcd total = Eigen::MatrixXcd::Zero(nf, nf);
    for (const Eigen::MatrixXcd& t : mf_terms) total += t;

    std::vector<ApcResult> results;
    results.reserve(nt);
    for (int i = 0; i < nt; ++i) {
        const Eigen::MatrixXcd cross = total - mf_terms[i];
        results.push_back(detail::rmmse_run(f, snapshots[i], noise_power, settings, &cross));
    }
    return results;
}

/// Noise power from the quietest half of a matched-filter profile, corrected
/// for the trimmed-exponential bias so white noise of power s returns s in
/// expectation. Robust to isolated target peaks.
inline double estimate_noise_power(const RangeProfile& profile) {
    const int bins = profile.size();
    if (bins < 20) throw config_error("estimate_noise_power: need at least 20 bins");
    std::vector<double> p(static_cast<std::size_t>(bins));
    for (int l = 0; l < bins; ++l) p[static_cast<std::size_t>(l)] = std::norm(profile.values(l));
    std::sort(p.begin(), p.end());
    const std::size_t keep = p.size() / 2;
    double sum = 0.0;
    for (std::size_t i = 0; i < keep; ++i) sum += p[i];
    // E[mean of quietest half of Exp(s)] = s * (1 - 0.5*(1 - ln 0.5)) / 0.5
    constexpr double bias = 0.3068528194400547;
    return (sum / keep) / bias;
}

} // namespace mapc
