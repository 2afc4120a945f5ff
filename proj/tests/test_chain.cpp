#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <complex>

#include "mapc/chain.hpp"
#include "mapc/metrics.hpp"
#include "mapc/stretch.hpp"
#include "mapc/synth.hpp"
#include "test_support.hpp"

using namespace mapc;
using mapc_test::single_tx_sample;
using mapc_test::small_config;

namespace {

/// Radial velocity that lands exactly on block-rate doppler bin `wrapped_bin`.
double grid_velocity(const RadarConfig& cfg, int wrapped_bin) {
    const DerivedParams d = derive_params(cfg);
    return wrapped_bin * d.wavelength_m /
           (2.0 * cfg.chirps_per_tx_in_cpi * cfg.num_tx * cfg.sweep_time_s);
}

Target make_target(double range_m, double velocity = 0.0, double azimuth_deg = 0.0,
                   std::complex<double> amp = {1.0, 0.0}) {
    Target t;
    t.range_m = range_m;
    t.velocity_mps = velocity;
    t.azimuth_deg = azimuth_deg;
    t.amplitude = amp;
    return t;
}

/// Expected decoded matrices for on-grid targets under a rectangular window
/// with the 1/N_p factor applied: each target contributes its zero-chirp
/// single-transmitter sample at its own doppler bin and nothing elsewhere.
DecodedSet expected_decoded(const RadarConfig& cfg, const std::vector<Target>& targets) {
    const DerivedParams d = derive_params(cfg);
    const int np = cfg.chirps_per_tx_in_cpi;
    DecodedSet out;
    out.axis = {np, cfg.num_tx};
    out.per_tx.assign(cfg.num_tx, std::vector<Eigen::MatrixXcd>(
                                      cfg.num_rx,
                                      Eigen::MatrixXcd::Zero(d.fast_time_samples, np)));
    for (const Target& t : targets) {
        const double block_freq = cfg.num_tx * t.doppler_normalized(cfg, d);
        const int bin = ((static_cast<int>(std::lround(block_freq * np)) % np) + np) % np;
        for (int i = 0; i < cfg.num_tx; ++i)
            for (int n = 0; n < cfg.num_rx; ++n)
                for (int q = 0; q < d.fast_time_samples; ++q)
                    out.per_tx[i][n](q, bin) += single_tx_sample(cfg, t, i, q, 0, n);
    }
    return out;
}

double decode_error(const DecodedSet& got, const DecodedSet& want) {
    double num = 0.0, den = 0.0;
    for (int i = 0; i < got.num_tx(); ++i)
        for (int n = 0; n < got.num_rx(); ++n) {
            num += (got.per_tx[i][n] - want.per_tx[i][n]).squaredNorm();
            den += want.per_tx[i][n].squaredNorm();
        }
    return std::sqrt(num / den);
}

} // namespace

TEST_CASE("static scene concentrates all doppler energy in bin zero") {
    const RadarConfig cfg = small_config();
    const DataCube cube =
        synthesize_cube(cfg, {make_target(20.0)}, hadamard(cfg.num_tx), {0.0, 1});
    const PulseDopplerSet pd =
        doppler_process(block_pulses(cube), rectangular_window(cfg.chirps_per_tx_in_cpi));
    for (int pos = 0; pos < pd.num_positions(); ++pos)
        for (int n = 0; n < pd.num_rx(); ++n) {
            const Eigen::MatrixXcd& m = pd.matrices[pos][n];
            const double dc = m.col(0).norm();
            for (int b = 1; b < pd.axis.bins; ++b) CHECK(m.col(b).norm() < 1e-10 * (dc + 1.0));
        }
}

TEST_CASE("an on-grid mover peaks at its doppler bin") {
    const RadarConfig cfg = small_config();
    const int wrapped = 2;
    const Target t = make_target(20.0, grid_velocity(cfg, wrapped));
    const DataCube cube = synthesize_cube(cfg, {t}, hadamard(cfg.num_tx), {0.0, 1});
    const PulseDopplerSet pd =
        doppler_process(block_pulses(cube), rectangular_window(cfg.chirps_per_tx_in_cpi));
    const Eigen::MatrixXd power = detection_power(pd);
    Eigen::Index peak_q = 0, peak_b = 0;
    power.maxCoeff(&peak_q, &peak_b);
    CHECK(static_cast<int>(peak_b) == wrapped);
    CHECK(pd.axis.chirp_normalized(static_cast<int>(peak_b)) ==
          Catch::Approx(t.doppler_normalized(cfg, derive_params(cfg))));
}

TEST_CASE("constant block sequence with hanning taps sums the window") {
    const RadarConfig cfg = small_config(1, 1, 8);
    BlockSet blocks;
    blocks.num_tx = 1;
    blocks.num_blocks = 8;
    blocks.pulses = {{Eigen::MatrixXcd::Constant(4, 8, std::complex<double>(2.0, -1.0))}};
    const WindowSpec hann = hanning_window(8);
    const PulseDopplerSet pd = doppler_process(blocks, hann, /*normalize=*/false);
    const std::complex<double> expect = hann.taps().sum() * std::complex<double>(2.0, -1.0);
    for (int q = 0; q < 4; ++q)
        CHECK(std::abs(pd.matrices[0][0](q, 0) - expect) < 1e-12);
}

TEST_CASE("doppler processing validates block count and window length") {
    const RadarConfig cfg = small_config(2, 2, 1);
    const DataCube cube = synthesize_cube(cfg, {}, hadamard(2), {0.0, 1});
    CHECK_THROWS_AS(doppler_process(block_pulses(cube), rectangular_window(1)), config_error);

    const RadarConfig ok = small_config();
    const DataCube cube2 = synthesize_cube(ok, {}, hadamard(2), {0.0, 1});
    CHECK_THROWS_AS(doppler_process(block_pulses(cube2), rectangular_window(4)), config_error);
}

TEST_CASE("unnormalized rectangular doppler DFT conserves energy times N_p") {
    RadarConfig cfg = small_config();
    cfg.noise_power = 1.0;
    const DataCube cube = synthesize_cube(cfg, {make_target(15.0, 33.0)},
                                          hadamard(cfg.num_tx), {1.0, 77});
    const BlockSet blocks = block_pulses(cube);
    const PulseDopplerSet pd = doppler_process(
        blocks, rectangular_window(cfg.chirps_per_tx_in_cpi), /*normalize=*/false);
    double in = 0.0, out = 0.0;
    for (int pos = 0; pos < blocks.num_tx; ++pos)
        for (int n = 0; n < blocks.num_rx(); ++n) {
            in += blocks.pulses[pos][n].squaredNorm();
            out += pd.matrices[pos][n].squaredNorm();
        }
    CHECK(out == Catch::Approx(cfg.chirps_per_tx_in_cpi * in).epsilon(1e-9));
}

TEST_CASE("block-rate doppler axis is 1/N_T of the chirp-rate axis") {
    const RadarConfig cfg = small_config();
    const DataCube cube = synthesize_cube(cfg, {}, hadamard(2), {0.0, 1});
    const PulseDopplerSet pd =
        doppler_process(block_pulses(cube), rectangular_window(cfg.chirps_per_tx_in_cpi));
    CHECK(pd.axis.max_block_normalized() == 0.5);
    CHECK(pd.axis.max_chirp_normalized() == 0.5 / cfg.num_tx);
    // wrapped values span [-0.5, 0.5)
    double lo = 1.0, hi = -1.0;
    for (int b = 0; b < pd.axis.bins; ++b) {
        lo = std::min(lo, pd.axis.block_normalized(b));
        hi = std::max(hi, pd.axis.block_normalized(b));
    }
    CHECK(lo == -0.5);
    CHECK(hi < 0.5);
}

TEST_CASE("cell-averaging detector on an all-zero matrix finds nothing") {
    const Eigen::MatrixXd zeros = Eigen::MatrixXd::Zero(8, 16);
    CHECK(detect_doppler_bins(zeros, 1, 3, 10.0).empty());
}

TEST_CASE("cell-averaging detector flags an injected tone") {
    Eigen::MatrixXd power = Eigen::MatrixXd::Constant(4, 32, 1.0);
    power(2, 7) = 1000.0; // 30 dB above the floor
    const std::vector<Detection> hits = detect_doppler_bins(power, 1, 4, 10.0);
    REQUIRE(hits.size() == 1);
    CHECK(hits[0].range_bin == 2);
    CHECK(hits[0].doppler_bin == 7);
}

TEST_CASE("cell-averaging detector flags two equal tones in distinct bins") {
    Eigen::MatrixXd power = Eigen::MatrixXd::Constant(2, 32, 1.0);
    power(0, 5) = 500.0;
    power(0, 20) = 500.0;
    const std::vector<Detection> hits = detect_doppler_bins(power, 1, 4, 10.0);
    REQUIRE(hits.size() == 2);
    CHECK(hits[0].doppler_bin == 5);
    CHECK(hits[1].doppler_bin == 20);
}

TEST_CASE("cell-averaging detector rejects degenerate windows") {
    const Eigen::MatrixXd power = Eigen::MatrixXd::Ones(2, 8);
    CHECK_THROWS_AS(detect_doppler_bins(power, 1, 0, 10.0), config_error);
    CHECK_THROWS_AS(detect_doppler_bins(power, 2, 2, 10.0), config_error);
    CHECK_THROWS_AS(detect_doppler_bins(power, -1, 2, 10.0), config_error);
}

TEST_CASE("zero-doppler compensation is the identity") {
    const RadarConfig cfg = small_config();
    const DataCube cube = synthesize_cube(cfg, {make_target(20.0, 0.0, 5.0)},
                                          hadamard(cfg.num_tx), {0.0, 1});
    const PulseDopplerSet pd =
        doppler_process(block_pulses(cube), rectangular_window(cfg.chirps_per_tx_in_cpi));
    const PulseDopplerSet comp = doppler_compensate(pd, 0); // bin 0 carries zero doppler
    for (int pos = 0; pos < pd.num_positions(); ++pos)
        for (int n = 0; n < pd.num_rx(); ++n)
            CHECK((comp.matrices[pos][n] - pd.matrices[pos][n]).cwiseAbs().maxCoeff() == 0.0);
    CHECK_THROWS_AS(doppler_compensate(pd, 99), config_error);
}

TEST_CASE("block position zero is never rotated by compensation") {
    const RadarConfig cfg = small_config();
    const DataCube cube = synthesize_cube(cfg, {make_target(20.0, 41.0, -7.0)},
                                          hadamard(cfg.num_tx), {0.0, 2});
    const PulseDopplerSet pd =
        doppler_process(block_pulses(cube), rectangular_window(cfg.chirps_per_tx_in_cpi));
    const PulseDopplerSet comp = doppler_compensate(pd);
    for (int n = 0; n < pd.num_rx(); ++n)
        CHECK((comp.matrices[0][n] - pd.matrices[0][n]).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("decode recovers per-transmitter signals on a static scene") {
    const RadarConfig cfg = small_config();
    const std::vector<Target> scene{make_target(20.0, 0.0, 9.0, {0.8, 0.3}),
                                    make_target(31.0, 0.0, -14.0)};
    const DataCube cube = synthesize_cube(cfg, scene, hadamard(cfg.num_tx), {0.0, 1});
    const PulseDopplerSet pd =
        doppler_process(block_pulses(cube), rectangular_window(cfg.chirps_per_tx_in_cpi));
    const DecodedSet got = decode(doppler_compensate(pd), hadamard(cfg.num_tx));
    // the oracle includes the d_T-dependent residual phase on transmitter 1
    CHECK(decode_error(got, expected_decoded(cfg, scene)) < 1e-10);
}

TEST_CASE("decode rejects a mismatched code order") {
    const RadarConfig cfg = small_config();
    const DataCube cube = synthesize_cube(cfg, {}, hadamard(2), {0.0, 1});
    const PulseDopplerSet pd =
        doppler_process(block_pulses(cube), rectangular_window(cfg.chirps_per_tx_in_cpi));
    CHECK_THROWS_AS(decode(pd, hadamard(4)), config_error);
}

TEST_CASE("uncompensated decode leaks more as doppler grows") {
    const RadarConfig cfg = small_config();
    std::vector<double> leak;
    for (int bin = 0; bin <= 3; ++bin) {
        // off boresight: at u = 0 the difference pulse cancels and hides the leak
        const Target t = make_target(20.0, grid_velocity(cfg, bin), 10.0);
        const DataCube cube = synthesize_cube(cfg, {t}, hadamard(cfg.num_tx), {0.0, 1});
        const PulseDopplerSet pd = doppler_process(
            block_pulses(cube), rectangular_window(cfg.chirps_per_tx_in_cpi));
        leak.push_back(decode_error(decode(pd, hadamard(cfg.num_tx)),
                                    expected_decoded(cfg, {t})));
    }
    CHECK(leak[0] < 1e-10);
    for (std::size_t i = 1; i < leak.size(); ++i) {
        CHECK(leak[i] > 1e-3);
        CHECK(leak[i] > leak[i - 1]);
    }
}

TEST_CASE("compensated decode is exact for any single on-grid mover") {
    const RadarConfig cfg = small_config();
    for (int bin : {-3, -1, 1, 3}) {
        const Target t = make_target(24.0, grid_velocity(cfg, bin), 6.0);
        const DataCube cube = synthesize_cube(cfg, {t}, hadamard(cfg.num_tx), {0.0, 1});
        const PulseDopplerSet pd = doppler_process(
            block_pulses(cube), rectangular_window(cfg.chirps_per_tx_in_cpi));
        const DecodedSet got = decode(doppler_compensate(pd), hadamard(cfg.num_tx));
        CHECK(decode_error(got, expected_decoded(cfg, {t})) < 1e-9);
    }
}

TEST_CASE("decode before and after the doppler DFT agree on static scenes") {
    const RadarConfig cfg = small_config();
    const std::vector<Target> scene{make_target(18.0, 0.0, 4.0)};
    const DataCube cube = synthesize_cube(cfg, scene, hadamard(cfg.num_tx), {0.0, 3});
    const BlockSet blocks = block_pulses(cube);
    const PhaseCodeMatrix code = hadamard(cfg.num_tx);

    // decode first, then transform each decoded block sequence
    BlockSet decoded_blocks = blocks;
    for (int i = 0; i < cfg.num_tx; ++i)
        for (int n = 0; n < cfg.num_rx; ++n) {
            Eigen::MatrixXcd acc = Eigen::MatrixXcd::Zero(
                blocks.pulses[0][0].rows(), blocks.pulses[0][0].cols());
            for (int pos = 0; pos < cfg.num_tx; ++pos)
                acc += static_cast<double>(code.entries(i, pos)) * blocks.pulses[pos][n];
            decoded_blocks.pulses[i][n] = acc / cfg.num_tx;
        }
    const PulseDopplerSet dft_after = doppler_process(
        decoded_blocks, rectangular_window(cfg.chirps_per_tx_in_cpi));

    const DecodedSet dft_first =
        decode(doppler_process(blocks, rectangular_window(cfg.chirps_per_tx_in_cpi)), code);

    double num = 0.0, den = 0.0;
    for (int i = 0; i < cfg.num_tx; ++i)
        for (int n = 0; n < cfg.num_rx; ++n) {
            num += (dft_first.per_tx[i][n] - dft_after.matrices[i][n]).squaredNorm();
            den += dft_after.matrices[i][n].squaredNorm();
        }
    CHECK(std::sqrt(num / den) < 1e-10);
}

TEST_CASE("boresight target peaks at the zero angle bin") {
    const RadarConfig cfg = small_config(2, 4);
    const DataCube cube =
        synthesize_cube(cfg, {make_target(20.0)}, hadamard(cfg.num_tx), {0.0, 1});
    const PulseDopplerSet pd =
        doppler_process(block_pulses(cube), rectangular_window(cfg.chirps_per_tx_in_cpi));
    const AngleCubeSet cubes = angle_process(decode(doppler_compensate(pd), hadamard(2)), 16);
    const Eigen::MatrixXd energy = cubes.cell_energy();
    Eigen::Index pb = 0, pa = 0;
    energy.maxCoeff(&pb, &pa);
    CHECK(pa == 0);
    CHECK(cubes.axis.u(static_cast<int>(pa)) == 0.0);
}

TEST_CASE("an on-grid angle target peaks at its angle bin") {
    const RadarConfig cfg = small_config(2, 4);
    const int angle_bins = 16;
    const int a0 = 2; // u = 2 * 2/16 = 0.25
    const double azimuth = std::asin(2.0 * a0 / angle_bins) * 180.0 / std::numbers::pi;
    const DataCube cube = synthesize_cube(cfg, {make_target(20.0, 0.0, azimuth)},
                                          hadamard(cfg.num_tx), {0.0, 1});
    const PulseDopplerSet pd =
        doppler_process(block_pulses(cube), rectangular_window(cfg.chirps_per_tx_in_cpi));
    const AngleCubeSet cubes =
        angle_process(decode(doppler_compensate(pd), hadamard(2)), angle_bins);
    const Eigen::MatrixXd energy = cubes.cell_energy();
    Eigen::Index pb = 0, pa = 0;
    energy.maxCoeff(&pb, &pa);
    CHECK(static_cast<int>(pa) == a0);
}

TEST_CASE("single-channel angle processing with one bin is the identity") {
    const RadarConfig cfg = small_config(1, 1);
    const DataCube cube =
        synthesize_cube(cfg, {make_target(12.0)}, hadamard(1), {0.0, 1});
    const PulseDopplerSet pd =
        doppler_process(block_pulses(cube), rectangular_window(cfg.chirps_per_tx_in_cpi));
    const DecodedSet decoded = decode(pd, hadamard(1));
    const AngleCubeSet cubes = angle_process(decoded, 1);
    CHECK((cubes.cubes[0][0] - decoded.per_tx[0][0]).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("angle processing rejects a DFT shorter than the virtual array") {
    const RadarConfig cfg = small_config(2, 4);
    const DataCube cube = synthesize_cube(cfg, {}, hadamard(2), {0.0, 1});
    const PulseDopplerSet pd =
        doppler_process(block_pulses(cube), rectangular_window(cfg.chirps_per_tx_in_cpi));
    const DecodedSet decoded = decode(pd, hadamard(2));
    CHECK_THROWS_AS(angle_process(decoded, 7), config_error);
}

TEST_CASE("coherent integration over one cell extracts that fast-time column") {
    const RadarConfig cfg = small_config(2, 4);
    const DataCube cube = synthesize_cube(cfg, {make_target(22.0, 0.0, 10.0)},
                                          hadamard(cfg.num_tx), {0.0, 4});
    const AngleCubeSet cubes = angle_process(
        decode(doppler_compensate(doppler_process(
                   block_pulses(cube), rectangular_window(cfg.chirps_per_tx_in_cpi))),
               hadamard(2)),
        16);
    CellSelector sel;
    sel.mode = CellSelector::Mode::explicit_list;
    sel.cells = {{0, 3}};
    const SnapshotSet snap = coherent_integrate(cubes, sel);
    for (int i = 0; i < 2; ++i)
        CHECK((snap.per_tx[i] - cubes.cubes[i][3].col(0)).cwiseAbs().maxCoeff() == 0.0);
    CHECK_FALSE(snap.fell_back_to_peak);
}

TEST_CASE("coherent integration is additive over disjoint cells") {
    const RadarConfig cfg = small_config(2, 4);
    const DataCube cube = synthesize_cube(
        cfg,
        {make_target(22.0, grid_velocity(cfg, 1), 0.0),
         make_target(9.0, grid_velocity(cfg, -2), 12.0)},
        hadamard(cfg.num_tx), {0.0, 4});
    const AngleCubeSet cubes = angle_process(
        decode(doppler_compensate(doppler_process(
                   block_pulses(cube), rectangular_window(cfg.chirps_per_tx_in_cpi))),
               hadamard(2)),
        16);
    CellSelector one;
    one.mode = CellSelector::Mode::explicit_list;
    one.cells = {{1, 0}};
    CellSelector two = one;
    two.cells = {{6, 3}};
    CellSelector both = one;
    both.cells = {{1, 0}, {6, 3}};
    const SnapshotSet a = coherent_integrate(cubes, one);
    const SnapshotSet b = coherent_integrate(cubes, two);
    const SnapshotSet ab = coherent_integrate(cubes, both);
    for (int i = 0; i < 2; ++i)
        CHECK((ab.per_tx[i] - (a.per_tx[i] + b.per_tx[i])).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("empty cell selection falls back to the peak cell") {
    const RadarConfig cfg = small_config(2, 2);
    const DataCube cube =
        synthesize_cube(cfg, {make_target(20.0)}, hadamard(cfg.num_tx), {0.0, 4});
    const AngleCubeSet cubes = angle_process(
        decode(doppler_compensate(doppler_process(
                   block_pulses(cube), rectangular_window(cfg.chirps_per_tx_in_cpi))),
               hadamard(2)),
        8);
    CellSelector sel;
    sel.mode = CellSelector::Mode::explicit_list;
    sel.cells = {};
    const SnapshotSet snap = coherent_integrate(cubes, sel);
    CHECK(snap.fell_back_to_peak);
    REQUIRE(snap.cells.size() == 1);
    CHECK(snap.cells[0].doppler_bin == 0); // static target
}

TEST_CASE("top-k and peak-relative selectors pick the strongest cells") {
    Eigen::MatrixXd energy = Eigen::MatrixXd::Constant(4, 4, 0.1);
    energy(1, 2) = 10.0;
    energy(3, 0) = 9.0;
    CellSelector topk;
    topk.mode = CellSelector::Mode::top_k;
    topk.k = 2;
    const std::vector<Cell> cells = select_cells(energy, topk);
    REQUIRE(cells.size() == 2);
    CHECK(cells[0] == Cell{1, 2});
    CHECK(cells[1] == Cell{3, 0});

    CellSelector rel; // default: within 3 dB of the global peak
    const std::vector<Cell> near_peak = select_cells(energy, rel);
    REQUIRE(near_peak.size() == 2);
}

TEST_CASE("pipeline recovers both static boresight targets per transmitter") {
    const RadarConfig cfg = small_config(2, 4, 16);
    const std::vector<Target> scene{make_target(9.0, 0.0, 0.0, {1.0, 0.0}),
                                    make_target(30.0, 0.0, 0.0, {0.05, 0.0})};
    const DataCube cube = synthesize_cube(cfg, scene, hadamard(2), {0.0, 5});
    PipelineOptions opt;
    opt.doppler_window = WindowKind::rectangular;
    opt.selector.mode = CellSelector::Mode::detected_peaks;
    const PipelineResult res = run_pipeline(cube, hadamard(2), opt);

    const CompensationMatrix f = build_compensation_matrix(cfg);
    for (const Eigen::VectorXcd& snapshot : res.snapshots.per_tx) {
        const RangeProfile p = matched_filter(f, snapshot);
        const PslSinr ps = psl_sinr(p, {{8.0, 10.0}, {29.0, 31.0}},
                                    2.0 * derive_params(cfg).native_resolution_m);
        CHECK(std::abs(p.range_at(ps.peak_bins[0]) - 9.0) <= p.bin_m);
        CHECK(std::abs(p.range_at(ps.peak_bins[1]) - 30.0) <= p.bin_m);
    }
}

TEST_CASE("empty scene with zero noise yields all-zero snapshots") {
    const RadarConfig cfg = small_config();
    const DataCube cube = synthesize_cube(cfg, {}, hadamard(2), {0.0, 6});
    const PipelineResult res = run_pipeline(cube, hadamard(2));
    for (const Eigen::VectorXcd& s : res.snapshots.per_tx) CHECK(s.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("pipeline separates two on-grid movers after per-bin compensation") {
    const RadarConfig cfg = small_config(2, 4, 16);
    const std::vector<Target> scene{
        make_target(20.0, grid_velocity(cfg, 3), 0.0, {1.0, 0.0}),
        make_target(10.0, grid_velocity(cfg, -2), 0.0, {0.5, 0.0})};
    const DataCube cube = synthesize_cube(cfg, scene, hadamard(2), {0.0, 7});
    const PulseDopplerSet pd =
        doppler_process(block_pulses(cube), rectangular_window(cfg.chirps_per_tx_in_cpi));
    const DecodedSet got = decode(doppler_compensate(pd), hadamard(2));
    CHECK(decode_error(got, expected_decoded(cfg, scene)) < 1e-6);
}
