#include <catch2/catch_amalgamated.hpp>

#include <cstdint>
#include <filesystem>
#include <fstream>

#include "mapc/cube_io.hpp"
#include "mapc/synth.hpp"
#include "test_support.hpp"

using namespace mapc;
using mapc_test::small_config;

namespace {

std::filesystem::path temp_path(const std::string& name) {
    return std::filesystem::temp_directory_path() / ("mapc_io_" + name);
}

std::string slurp(const std::filesystem::path& p) {
    std::ifstream is(p, std::ios::binary);
    REQUIRE(is);
    return {std::istreambuf_iterator<char>(is), std::istreambuf_iterator<char>()};
}

DataCube noisy_cube(const RadarConfig& cfg, std::uint64_t seed) {
    Target t;
    t.range_m = 20.0;
    t.amplitude = {0.8, 0.1};
    return synthesize_cube(cfg, {t}, hadamard(cfg.num_tx), {0.25, seed});
}

void write_i16_file(const std::filesystem::path& path, const RawFrameHeader& h,
                    const std::vector<std::int16_t>& payload) {
    std::ofstream os(path, std::ios::binary);
    write_raw_header(os, h);
    os.write(reinterpret_cast<const char*>(payload.data()),
             static_cast<std::streamsize>(payload.size() * sizeof(std::int16_t)));
}

} // namespace

TEST_CASE("export then ingest round trips samples at complex64 precision") {
    RadarConfig cfg = small_config();
    cfg.noise_power = 0.25;
    const DataCube cube = noisy_cube(cfg, 42);
    const auto path = temp_path("roundtrip.mapc");
    write_cube(path.string(), cube);

    const DataCube back = ingest_raw(path.string(), cfg);
    for (int n = 0; n < cube.num_rx(); ++n)
        for (int m = 0; m < cube.total_chirps(); ++m)
            for (int q = 0; q < cube.fast_time_samples(); ++q) {
                // volatile defeats an -O3 miscompile that elides the narrowing
                volatile float re32 = static_cast<float>(cube.samples[n](q, m).real());
                volatile float im32 = static_cast<float>(cube.samples[n](q, m).imag());
                const std::complex<double> want{re32, im32};
                REQUIRE(back.samples[n](q, m) == want);
            }

    // a second export of the ingested cube is byte-identical
    const auto path2 = temp_path("roundtrip2.mapc");
    write_cube(path2.string(), back);
    CHECK(slurp(path) == slurp(path2));
}

TEST_CASE("ingest validates magic, header and payload length") {
    RadarConfig cfg = small_config();
    const DataCube cube = noisy_cube(cfg, 7);
    const auto path = temp_path("bad.mapc");
    write_cube(path.string(), cube);

    SECTION("bad magic") {
        std::string bytes = slurp(path);
        bytes[0] = 'X';
        std::ofstream(path, std::ios::binary) << bytes;
        CHECK_THROWS_AS(ingest_raw(path.string(), cfg), io_error);
    }
    SECTION("config mismatch") {
        RadarConfig other = cfg;
        other.num_rx = cfg.num_rx + 1;
        CHECK_THROWS_AS(ingest_raw(path.string(), other), io_error);
    }
    SECTION("truncated payload") {
        std::string bytes = slurp(path);
        bytes.resize(bytes.size() - 5);
        std::ofstream(path, std::ios::binary) << bytes;
        CHECK_THROWS_AS(ingest_raw(path.string(), cfg), io_error);
    }
    SECTION("frame index out of range") {
        CHECK_THROWS_AS(ingest_raw(path.string(), cfg, 1), io_error);
    }
}

TEST_CASE("i16 payload of zeros ingests as a zero cube") {
    const RadarConfig cfg = small_config(1, 1, 2);
    const DerivedParams d = derive_params(cfg);
    RawFrameHeader h;
    h.n_fast = static_cast<std::uint32_t>(d.fast_time_samples);
    h.n_chirps = static_cast<std::uint32_t>(cfg.total_chirps());
    h.n_rx = static_cast<std::uint32_t>(cfg.num_rx);
    h.sample_type = 1;
    const auto path = temp_path("zeros.mapc");
    write_i16_file(path, h, std::vector<std::int16_t>(h.samples_per_frame() * 2, 0));

    const DataCube cube = ingest_raw(path.string(), cfg);
    for (const auto& rx : cube.samples) CHECK(rx.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("i16 samples scale to unit full-scale") {
    const RadarConfig cfg = small_config(1, 1, 2);
    const DerivedParams d = derive_params(cfg);
    RawFrameHeader h;
    h.n_fast = static_cast<std::uint32_t>(d.fast_time_samples);
    h.n_chirps = static_cast<std::uint32_t>(cfg.total_chirps());
    h.n_rx = static_cast<std::uint32_t>(cfg.num_rx);
    h.sample_type = 1;
    std::vector<std::int16_t> payload(h.samples_per_frame() * 2, 0);
    payload[0] = -32768; // first sample, real part
    payload[1] = 16384;  // first sample, imag part
    const auto path = temp_path("scale.mapc");
    write_i16_file(path, h, payload);

    const DataCube cube = ingest_raw(path.string(), cfg);
    CHECK(cube.samples[0](0, 0).real() == Catch::Approx(-1.0));
    CHECK(cube.samples[0](0, 0).imag() == Catch::Approx(0.5));
}

TEST_CASE("multi-frame files support background subtraction") {
    RadarConfig cfg = small_config();
    cfg.noise_power = 0.1;
    const DataCube frame0 = noisy_cube(cfg, 1);
    const DataCube frame1 = noisy_cube(cfg, 2);

    const auto p0 = temp_path("f0.mapc");
    const auto p1 = temp_path("f1.mapc");
    write_cube(p0.string(), frame0);
    write_cube(p1.string(), frame1);

    // concatenate payloads under one header
    const std::string b0 = slurp(p0);
    const std::string b1 = slurp(p1);
    const auto both = temp_path("two_frames.mapc");
    std::ofstream(both, std::ios::binary) << b0 << b1.substr(kRawHeaderBytes);

    CHECK(raw_frame_count(both.string()) == 2);

    SECTION("frame minus itself is a zero cube") {
        const DataCube diff = ingest_raw(both.string(), cfg, 1, 1);
        for (const auto& rx : diff.samples) CHECK(rx.cwiseAbs().maxCoeff() == 0.0);
    }
    SECTION("frame 1 minus frame 0 matches the per-frame difference") {
        const DataCube diff = ingest_raw(both.string(), cfg, 1, 0);
        const DataCube a = ingest_raw(both.string(), cfg, 0);
        const DataCube b = ingest_raw(both.string(), cfg, 1);
        for (int n = 0; n < cfg.num_rx; ++n)
            CHECK((diff.samples[n] - (b.samples[n] - a.samples[n])).cwiseAbs().maxCoeff() ==
                  0.0);
    }
    SECTION("subtract frame out of range") {
        CHECK_THROWS_AS(ingest_raw(both.string(), cfg, 0, 2), io_error);
    }
}
