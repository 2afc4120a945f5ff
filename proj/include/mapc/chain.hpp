#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <complex>
#include <iostream>
#include <numbers>
#include <vector>

#include "mapc/errors.hpp"
#include "mapc/hadamard.hpp"
#include "mapc/synth.hpp"
#include "mapc/window.hpp"

namespace mapc {

/// Doppler axis of the block-rate DFT. Bin values wrap to [-0.5, 0.5) in
/// block-normalized frequency; dividing by the transmitter count converts to
/// chirp-normalized doppler, so the unambiguous span is 1/num_tx of the
/// chirp-rate axis.
struct DopplerAxis {
    int bins = 0;
    int num_tx = 1;

    int wrapped(int b) const { return b >= (bins + 1) / 2 ? b - bins : b; }
    double block_normalized(int b) const { return static_cast<double>(wrapped(b)) / bins; }
    double chirp_normalized(int b) const { return block_normalized(b) / num_tx; }
    double max_block_normalized() const { return 0.5; }
    double max_chirp_normalized() const { return 0.5 / num_tx; }
};

/// Pulse-doppler matrices per block position per receiver.
struct PulseDopplerSet {
    std::vector<std::vector<Eigen::MatrixXcd>> matrices; // [position][rx], N_f x N_dop
    DopplerAxis axis;
    bool normalized = true; // explicit 1/N_p factor applied

    int num_positions() const { return static_cast<int>(matrices.size()); }
    int num_rx() const { return static_cast<int>(matrices.at(0).size()); }
    int fast_time_samples() const { return static_cast<int>(matrices.at(0).at(0).rows()); }
};

/// DFT across blocks, one bin per block, with taps applied across the
/// doppler domain. `normalize` applies the explicit 1/N_p factor; the
/// transform itself is unnormalized.
inline PulseDopplerSet doppler_process(const BlockSet& blocks, const WindowSpec& window,
                                       bool normalize = true) {
    const int np = blocks.num_blocks;
    if (np < 2) throw config_error("doppler_process: need at least 2 blocks");
    if (window.length != np)
        throw config_error("doppler_process: window length does not match block count");

    const Eigen::VectorXd h = window.taps();
    const double scale = normalize ? 1.0 / np : 1.0;
    Eigen::MatrixXcd dft(np, np);
    for (int p = 0; p < np; ++p)
        for (int b = 0; b < np; ++b)
            dft(p, b) = std::polar(h(p) * scale,
                                   -2.0 * std::numbers::pi * p * b / np);

    PulseDopplerSet out;
    out.axis = {np, blocks.num_tx};
    out.normalized = normalize;
    out.matrices.assign(blocks.num_tx, std::vector<Eigen::MatrixXcd>(blocks.num_rx()));
    for (int pos = 0; pos < blocks.num_tx; ++pos)
        for (int n = 0; n < blocks.num_rx(); ++n)
            out.matrices[pos][n].noalias() = blocks.pulses[pos][n] * dft;
    return out;
}

struct Detection {
    int range_bin = 0;
    int doppler_bin = 0;
};

/// 1D cell-averaging threshold along doppler per fast-time row (circular
/// training window). Cells exceeding scale times the local mean are flagged.
inline std::vector<Detection> detect_doppler_bins(const Eigen::MatrixXd& power, int guard,
                                                  int train, double scale) {
    if (train < 1) throw config_error("detect_doppler_bins: train cells must be >= 1");
    if (guard < 0) throw config_error("detect_doppler_bins: guard cells must be >= 0");
    const int bins = static_cast<int>(power.cols());
    if (2 * (guard + train) + 1 > bins)
        throw config_error("detect_doppler_bins: training window exceeds doppler axis");

    std::vector<Detection> hits;
    for (int q = 0; q < power.rows(); ++q) {
        for (int b = 0; b < bins; ++b) {
            double noise = 0.0;
            for (int o = guard + 1; o <= guard + train; ++o) {
                noise += power(q, (b + o) % bins);
                noise += power(q, (b - o + bins) % bins);
            }
            noise /= 2.0 * train;
            if (power(q, b) > scale * noise && power(q, b) > 0.0)
                hits.push_back({q, b});
        }
    }
    return hits;
}

/// Combined power across positions and receivers, for detection or dumps.
inline Eigen::MatrixXd detection_power(const PulseDopplerSet& pd) {
    Eigen::MatrixXd power = Eigen::MatrixXd::Zero(pd.fast_time_samples(), pd.axis.bins);
    for (const auto& rx_set : pd.matrices)
        for (const Eigen::MatrixXcd& m : rx_set) power += m.array().abs2().matrix();
    return power;
}

namespace detail {

inline void compensate_bin(PulseDopplerSet& pd, int bin) {
    const double fd = pd.axis.chirp_normalized(bin);
    for (int pos = 1; pos < pd.num_positions(); ++pos) {
        const std::complex<double> rot = std::polar(1.0, -2.0 * std::numbers::pi * pos * fd);
        for (auto& m : pd.matrices[pos]) m.col(bin) *= rot;
    }
}

} // namespace detail

/// Remove the per-position doppler phase for one detected bin. Position 0 is
/// unchanged by construction.
inline PulseDopplerSet doppler_compensate(const PulseDopplerSet& pd, int bin) {
    if (bin < 0 || bin >= pd.axis.bins)
        throw config_error("doppler_compensate: bin index out of range");
    PulseDopplerSet out = pd;
    detail::compensate_bin(out, bin);
    return out;
}

/// Compensate every doppler bin with the doppler implied by its own index.
inline PulseDopplerSet doppler_compensate(const PulseDopplerSet& pd) {
    PulseDopplerSet out = pd;
    for (int b = 0; b < pd.axis.bins; ++b) detail::compensate_bin(out, b);
    return out;
}

/// Per-transmitter pulse-doppler matrices after code separation.
struct DecodedSet {
    std::vector<std::vector<Eigen::MatrixXcd>> per_tx; // [tx][rx], N_f x N_dop
    DopplerAxis axis;

    int num_tx() const { return static_cast<int>(per_tx.size()); }
    int num_rx() const { return static_cast<int>(per_tx.at(0).size()); }
    int fast_time_samples() const { return static_cast<int>(per_tx.at(0).at(0).rows()); }
};

/// Inverse Hadamard combination scaled by 1/N_T. Requires a compensated set
/// for moving targets.
inline DecodedSet decode(const PulseDopplerSet& pd, const PhaseCodeMatrix& code) {
    const int positions = pd.num_positions();
    if (code.order != positions)
        throw config_error("decode: code order does not match block structure");
    DecodedSet out;
    out.axis = pd.axis;
    out.per_tx.assign(positions, std::vector<Eigen::MatrixXcd>(pd.num_rx()));
    for (int i = 0; i < positions; ++i)
        for (int n = 0; n < pd.num_rx(); ++n) {
            Eigen::MatrixXcd acc =
                Eigen::MatrixXcd::Zero(pd.fast_time_samples(), pd.axis.bins);
            for (int pos = 0; pos < positions; ++pos)
                acc += static_cast<double>(code.entries(i, pos)) * pd.matrices[pos][n];
            out.per_tx[i][n] = acc / positions;
        }
    return out;
}

struct AngleAxis {
    int bins = 0;
    int wrapped(int a) const { return a >= (bins + 1) / 2 ? a - bins : a; }
    /// sin(azimuth) at bin a for half-wavelength virtual spacing.
    double u(int a) const { return 2.0 * wrapped(a) / bins; }
};

/// Angle cube per transmitter: each transmitter's receive channels embedded
/// at their virtual-array positions (transmitter-major) and DFT'd across the
/// virtual channel axis. Summing the per-transmitter cubes reproduces the
/// full virtual-array spectrum.
struct AngleCubeSet {
    std::vector<std::vector<Eigen::MatrixXcd>> cubes; // [tx][angle bin], N_f x N_dop
    AngleAxis axis;
    DopplerAxis doppler_axis;

    int num_tx() const { return static_cast<int>(cubes.size()); }
    int fast_time_samples() const { return static_cast<int>(cubes.at(0).at(0).rows()); }

    /// Coherently combined energy per (doppler, angle) cell.
    Eigen::MatrixXd cell_energy() const {
        const int nd = doppler_axis.bins;
        Eigen::MatrixXd energy = Eigen::MatrixXd::Zero(nd, axis.bins);
        for (int a = 0; a < axis.bins; ++a) {
            Eigen::MatrixXcd combined = cubes[0][a];
            for (int i = 1; i < num_tx(); ++i) combined += cubes[i][a];
            for (int b = 0; b < nd; ++b) energy(b, a) += combined.col(b).squaredNorm();
        }
        return energy;
    }
};

inline AngleCubeSet angle_process(const DecodedSet& decoded, int angle_bins) {
    const int nt = decoded.num_tx();
    const int nr = decoded.num_rx();
    if (angle_bins < nt * nr)
        throw config_error("angle_process: angle DFT shorter than virtual array");
    AngleCubeSet out;
    out.axis = {angle_bins};
    out.doppler_axis = decoded.axis;
    out.cubes.assign(nt, std::vector<Eigen::MatrixXcd>(angle_bins));
    for (int i = 0; i < nt; ++i)
        for (int a = 0; a < angle_bins; ++a) {
            Eigen::MatrixXcd acc =
                Eigen::MatrixXcd::Zero(decoded.fast_time_samples(), decoded.axis.bins);
            for (int n = 0; n < nr; ++n) {
                const int v = i * nr + n; // virtual channel, transmitter-major
                acc += std::polar(1.0, -2.0 * std::numbers::pi * a * v / angle_bins) *
                       decoded.per_tx[i][n];
            }
            out.cubes[i][a] = std::move(acc);
        }
    return out;
}

struct Cell {
    int doppler_bin = 0;
    int angle_bin = 0;
    bool operator==(const Cell&) const = default;
};

/// Doppler-angle cells to integrate coherently.
///   peak_relative: cells within `within_db` of the global energy peak.
///   top_k:         the k strongest cells.
///   explicit_list: caller-provided cells.
///   detected_peaks: cell-averaging detection along doppler on a
///                   range-compressed statistic, one cell per detection;
///                   see select_cells(AngleCubeSet).
struct CellSelector {
    enum class Mode { peak_relative, top_k, explicit_list, detected_peaks };
    Mode mode = Mode::peak_relative;
    double within_db = 3.0; // peak_relative span
    int k = 1;              // top_k count
    std::vector<Cell> cells;
    // detected_peaks parameters
    double detect_scale = 3.0;       // threshold as a multiple of the median statistic
    double range_guard_native = 2.0; // same-range window that marks sidelobe copies
};

inline std::vector<Cell> select_cells(const Eigen::MatrixXd& energy, const CellSelector& sel) {
    const int nd = static_cast<int>(energy.rows());
    const int na = static_cast<int>(energy.cols());
    std::vector<Cell> out;
    switch (sel.mode) {
    case CellSelector::Mode::explicit_list:
        out = sel.cells;
        break;
    case CellSelector::Mode::top_k: {
        std::vector<Cell> all;
        for (int b = 0; b < nd; ++b)
            for (int a = 0; a < na; ++a) all.push_back({b, a});
        std::stable_sort(all.begin(), all.end(), [&](const Cell& x, const Cell& y) {
            return energy(x.doppler_bin, x.angle_bin) > energy(y.doppler_bin, y.angle_bin);
        });
        const int k = std::min<int>(std::max(sel.k, 0), static_cast<int>(all.size()));
        out.assign(all.begin(), all.begin() + k);
        break;
    }
    case CellSelector::Mode::peak_relative: {
        const double peak = energy.maxCoeff();
        const double floor = peak * std::pow(10.0, -sel.within_db / 10.0);
        for (int b = 0; b < nd; ++b)
            for (int a = 0; a < na; ++a)
                if (energy(b, a) >= floor && energy(b, a) > 0.0) out.push_back({b, a});
        break;
    }
    case CellSelector::Mode::detected_peaks:
        throw config_error("select_cells: detected_peaks needs the angle cube statistic");
    }
    return out;
}

/// Detection-driven cell selection for multi-target coherent integration.
/// Statistic per cell: peak power of the range-compressed (DFT) fast-time
/// column of the transmitter-combined cube — this carries the full
/// compression gain, so targets far below the per-sample noise remain
/// detectable. Cells are flagged against the median statistic (a sliding
/// window would be masked by a second target a few doppler bins away on
/// this short axis). Local maxima are accepted strongest-first; a maximum
/// whose compressed peak lies at the same range as a stronger accepted one
/// is its doppler-skirt or array-sidelobe copy and is dropped. One cell per
/// detection: summing both bins of an off-grid straddle would cancel.
inline std::vector<Cell> select_cells(const AngleCubeSet& cubes, const CellSelector& sel) {
    if (sel.mode != CellSelector::Mode::detected_peaks) {
        return select_cells(cubes.cell_energy(), sel);
    }
    const int nd = cubes.doppler_axis.bins;
    const int na = cubes.axis.bins;
    const int nf = cubes.fast_time_samples();

    Eigen::MatrixXcd dft(nf, nf);
    for (int q = 0; q < nf; ++q)
        for (int k = 0; k < nf; ++k)
            dft(q, k) = std::polar(1.0, -2.0 * std::numbers::pi * q * k / nf);

    Eigen::MatrixXd stat(nd, na); // max compressed power per cell
    Eigen::MatrixXi range_bin(nd, na);
    for (int a = 0; a < na; ++a) {
        Eigen::MatrixXcd combined = cubes.cubes[0][a];
        for (int i = 1; i < cubes.num_tx(); ++i) combined += cubes.cubes[i][a];
        const Eigen::MatrixXcd compressed = dft.adjoint() * combined; // nf x nd
        for (int b = 0; b < nd; ++b) {
            Eigen::Index peak = 0;
            stat(b, a) = compressed.col(b).array().abs2().maxCoeff(&peak);
            range_bin(b, a) = static_cast<int>(peak);
        }
    }

    std::vector<double> sorted(stat.data(), stat.data() + stat.size());
    std::sort(sorted.begin(), sorted.end());
    const double threshold = sorted[sorted.size() / 2] * sel.detect_scale;

    auto wrap = [](int i, int n) { return (i % n + n) % n; };
    std::vector<Cell> maxima;
    for (int b = 0; b < nd; ++b)
        for (int a = 0; a < na; ++a) {
            const double v = stat(b, a);
            if (v <= threshold || v <= 0.0) continue;
            bool is_max = true;
            for (int db = -1; db <= 1 && is_max; ++db)
                for (int da = -1; da <= 1; ++da) {
                    if (db == 0 && da == 0) continue;
                    if (stat(wrap(b + db, nd), wrap(a + da, na)) > v) {
                        is_max = false;
                        break;
                    }
                }
            if (is_max) maxima.push_back({b, a});
        }
    std::stable_sort(maxima.begin(), maxima.end(), [&](const Cell& x, const Cell& y) {
        return stat(x.doppler_bin, x.angle_bin) > stat(y.doppler_bin, y.angle_bin);
    });

    const int guard = static_cast<int>(std::lround(sel.range_guard_native));
    std::vector<Cell> out;
    for (const Cell& c : maxima) {
        const int r = range_bin(c.doppler_bin, c.angle_bin);
        bool sidelobe_copy = false;
        for (const Cell& kept : out)
            if (std::abs(r - range_bin(kept.doppler_bin, kept.angle_bin)) <= guard) {
                sidelobe_copy = true;
                break;
            }
        if (!sidelobe_copy) out.push_back(c);
    }
    std::stable_sort(out.begin(), out.end(), [](const Cell& x, const Cell& y) {
        return x.doppler_bin != y.doppler_bin ? x.doppler_bin < y.doppler_bin
                                              : x.angle_bin < y.angle_bin;
    });
    return out;
}

/// Per-transmitter fast-time snapshots after coherent integration.
struct SnapshotSet {
    std::vector<Eigen::VectorXcd> per_tx;
    std::vector<Cell> cells;
    bool fell_back_to_peak = false;
};

inline SnapshotSet coherent_integrate(const AngleCubeSet& cubes, const CellSelector& sel) {
    SnapshotSet out;
    out.cells = select_cells(cubes, sel);
    if (out.cells.empty()) {
        const Eigen::MatrixXd energy = cubes.cell_energy();
        Eigen::Index pb = 0, pa = 0;
        energy.maxCoeff(&pb, &pa);
        out.cells = {{static_cast<int>(pb), static_cast<int>(pa)}};
        out.fell_back_to_peak = true;
        std::cerr << "mapc: warning: empty cell selection, falling back to peak cell\n";
    }
    const int nf = cubes.fast_time_samples();
    out.per_tx.assign(cubes.num_tx(), Eigen::VectorXcd::Zero(nf));
    for (int i = 0; i < cubes.num_tx(); ++i)
        for (const Cell& c : out.cells)
            out.per_tx[i] += cubes.cubes[i][c.angle_bin].col(c.doppler_bin);
    return out;
}

struct PipelineOptions {
    WindowKind doppler_window = WindowKind::hanning;
    bool normalize_doppler = true;
    int angle_bins = 64;
    CellSelector selector{};
    bool keep_intermediates = false;
};

struct PipelineResult {
    SnapshotSet snapshots;
    Eigen::MatrixXd cell_energy; // N_dop x N_ang
    DopplerAxis doppler_axis;
    AngleAxis angle_axis;
    // populated when keep_intermediates is set
    PulseDopplerSet pulse_doppler;
    DecodedSet decoded;
    AngleCubeSet angle;
};

/// Re-adjusted order of operations: doppler DFT, per-bin compensation,
/// decode, virtual-array angle DFT, coherent integration.
inline PipelineResult run_pipeline(const DataCube& cube, const PhaseCodeMatrix& code,
                                   const PipelineOptions& opt = {}) {
    const BlockSet blocks = block_pulses(cube);
    const WindowSpec window{opt.doppler_window, blocks.num_blocks};
    PulseDopplerSet pd = doppler_process(blocks, window, opt.normalize_doppler);
    PulseDopplerSet compensated = doppler_compensate(pd);
    DecodedSet decoded = decode(compensated, code);
    const int min_bins = cube.config.num_tx * cube.config.num_rx;
    AngleCubeSet cubes = angle_process(decoded, std::max(opt.angle_bins, min_bins));

    PipelineResult result;
    result.cell_energy = cubes.cell_energy();
    result.doppler_axis = pd.axis;
    result.angle_axis = cubes.axis;
    result.snapshots = coherent_integrate(cubes, opt.selector);
    if (opt.keep_intermediates) {
        result.pulse_doppler = std::move(compensated);
        result.decoded = std::move(decoded);
        result.angle = std::move(cubes);
    }
    return result;
}

} // namespace mapc
