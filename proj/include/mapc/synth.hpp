#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <complex>
#include <cstdint>
#include <numbers>
#include <random>
#include <vector>

#include "mapc/errors.hpp"
#include "mapc/hadamard.hpp"
#include "mapc/radar_config.hpp"

namespace mapc {

/// Zero-mean circular complex AWGN, independent per sample.
struct NoiseModel {
    double power = 0.0; // E|gamma|^2, linear
    std::uint64_t seed = 0;
};

/// Dechirped, digitized receive samples for one CPI.
/// samples[n] is fast-time x chirp for receiver n.
struct DataCube {
    RadarConfig config;
    std::uint64_t rng_seed = 0;
    std::vector<Eigen::MatrixXcd> samples; // num_rx matrices, N_f x total_chirps

    int fast_time_samples() const { return static_cast<int>(samples.at(0).rows()); }
    int total_chirps() const { return static_cast<int>(samples.at(0).cols()); }
    int num_rx() const { return static_cast<int>(samples.size()); }
};

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// One independent noise stream per (chirp, receiver), reproducible from the
/// master seed alone. Box-Muller keeps the byte stream identical across
/// standard library implementations.
class NoiseStream {
public:
    NoiseStream(std::uint64_t master, int chirp, int rx)
        : engine_(splitmix64(splitmix64(master ^ 0x6d617063ULL) ^
                             (static_cast<std::uint64_t>(chirp) << 32 |
                              static_cast<std::uint64_t>(rx)))) {}

    std::complex<double> sample(double power) {
        const double u1 = uniform_open();
        const double u2 = uniform_open();
        const double r = std::sqrt(-std::log(u1) * power);
        const double ph = 2.0 * std::numbers::pi * u2;
        return {r * std::cos(ph), r * std::sin(ph)};
    }

private:
    double uniform_open() {
        // in (0, 1]; never 0 so log() is safe
        return (static_cast<double>(engine_() >> 11) + 1.0) * 0x1.0p-53;
    }
    std::mt19937_64 engine_;
};

} // namespace detail

/// Synthesize the receive cube for a target scene under slow-time phase
/// coding. Deterministic for a given noise seed.
inline DataCube synthesize_cube(const RadarConfig& cfg, const std::vector<Target>& targets,
                                const PhaseCodeMatrix& code, const NoiseModel& noise) {
    const DerivedParams d = derive_params(cfg);
    if (code.order < cfg.num_tx)
        throw config_error("synthesize_cube: code order smaller than transmitter count");
    for (const Target& t : targets) {
        if (t.range_m < cfg.near_range_m || t.range_m > cfg.far_range_m)
            throw config_error("synthesize_cube: target at " + std::to_string(t.range_m) +
                               " m outside swath");
    }

    const int nf = d.fast_time_samples;
    const int chirps = cfg.total_chirps();
    const double ts = d.sample_period_s;
    const double two_pi = 2.0 * std::numbers::pi;

    DataCube cube;
    cube.config = cfg;
    cube.rng_seed = noise.seed;
    cube.samples.assign(cfg.num_rx, Eigen::MatrixXcd::Zero(nf, chirps));

    struct Precomp {
        std::complex<double> amp;
        double beat_norm; // f_B * T_s
        double dopp_norm; // f_d * T_p
        double u;
    };
    std::vector<Precomp> pre;
    pre.reserve(targets.size());
    for (const Target& t : targets)
        pre.push_back({t.amplitude, t.beat_hz(cfg, d) * ts, t.doppler_normalized(cfg, d),
                       t.sin_azimuth()});

    for (int n = 0; n < cfg.num_rx; ++n) {
        Eigen::MatrixXcd& rx = cube.samples[n];
        for (int m = 0; m < chirps; ++m) {
            for (const Precomp& p : pre) {
                // sum over transmitters of code phasor and spatial phase
                std::complex<double> tx_sum = 0.0;
                for (int i = 0; i < cfg.num_tx; ++i) {
                    const double spatial =
                        (i * d.tx_spacing_m + n * d.rx_spacing_m) / d.wavelength_m * p.u;
                    tx_sum += std::polar(1.0, two_pi * spatial) * code.phasor(i, m);
                }
                const std::complex<double> chirp_gain =
                    p.amp * tx_sum * std::polar(1.0, two_pi * p.dopp_norm * m);
                for (int q = 0; q < nf; ++q)
                    rx(q, m) += chirp_gain * std::polar(1.0, two_pi * p.beat_norm * q);
            }
            if (noise.power > 0.0) {
                detail::NoiseStream stream(noise.seed, m, n);
                for (int q = 0; q < nf; ++q) rx(q, m) += stream.sample(noise.power);
            }
        }
    }
    return cube;
}

/// Slow time regrouped into blocks of num_tx consecutive chirps.
/// pulses[position][rx] is fast-time x block.
struct BlockSet {
    int num_tx = 1;
    int num_blocks = 0;
    std::vector<std::vector<Eigen::MatrixXcd>> pulses;

    int num_rx() const { return static_cast<int>(pulses.at(0).size()); }
    int fast_time_samples() const { return static_cast<int>(pulses.at(0).at(0).rows()); }
};

inline BlockSet block_pulses(const DataCube& cube) {
    const int nt = cube.config.num_tx;
    const int chirps = cube.total_chirps();
    if (chirps % nt != 0)
        throw config_error("block_pulses: chirp count not divisible by transmitter count");
    const int blocks = chirps / nt;

    BlockSet out;
    out.num_tx = nt;
    out.num_blocks = blocks;
    out.pulses.assign(nt, std::vector<Eigen::MatrixXcd>(
                              cube.num_rx(), Eigen::MatrixXcd(cube.fast_time_samples(), blocks)));
    for (int pos = 0; pos < nt; ++pos)
        for (int n = 0; n < cube.num_rx(); ++n)
            for (int p = 0; p < blocks; ++p)
                out.pulses[pos][n].col(p) = cube.samples[n].col(p * nt + pos);
    return out;
}

} // namespace mapc
