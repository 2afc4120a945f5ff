#pragma once

#include <cstdint>
#include <cstring>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include "mapc/errors.hpp"
#include "mapc/synth.hpp"

namespace mapc {

// Raw frame file:
//   magic "MAPC" | u32 version | u32 n_fast | u32 n_chirps | u32 n_rx | u32 sample_type
//   payload: one or more frames of n_fast*n_chirps*n_rx samples, fast-time
//   index fastest, then chirp, then receiver; little-endian throughout.
//   sample_type 0 = c64 (float32 re/im), 1 = interleaved int16 re/im scaled
//   by 1/32768 on ingest.
struct RawFrameHeader {
    std::uint32_t version = 1;
    std::uint32_t n_fast = 0;
    std::uint32_t n_chirps = 0;
    std::uint32_t n_rx = 0;
    std::uint32_t sample_type = 0; // 0 = c64, 1 = i16 interleaved

    std::size_t samples_per_frame() const {
        return std::size_t(n_fast) * n_chirps * n_rx;
    }
    std::size_t bytes_per_frame() const {
        return samples_per_frame() * (sample_type == 0 ? 8 : 4);
    }
};

inline constexpr char kRawMagic[4] = {'M', 'A', 'P', 'C'};
inline constexpr std::size_t kRawHeaderBytes = 4 + 5 * 4;

namespace detail {

inline void put_u32(std::ostream& os, std::uint32_t v) {
    const unsigned char b[4] = {static_cast<unsigned char>(v & 0xff),
                                static_cast<unsigned char>((v >> 8) & 0xff),
                                static_cast<unsigned char>((v >> 16) & 0xff),
                                static_cast<unsigned char>((v >> 24) & 0xff)};
    os.write(reinterpret_cast<const char*>(b), 4);
}

inline std::uint32_t get_u32(std::istream& is) {
    unsigned char b[4];
    is.read(reinterpret_cast<char*>(b), 4);
    return std::uint32_t(b[0]) | std::uint32_t(b[1]) << 8 | std::uint32_t(b[2]) << 16 |
           std::uint32_t(b[3]) << 24;
}

inline void put_f32(std::ostream& os, float v) {
    static_assert(sizeof(float) == 4);
    char b[4];
    std::memcpy(b, &v, 4); // IEEE-754 little-endian host assumed
    os.write(b, 4);
}

} // namespace detail

inline void write_raw_header(std::ostream& os, const RawFrameHeader& h) {
    os.write(kRawMagic, 4);
    detail::put_u32(os, h.version);
    detail::put_u32(os, h.n_fast);
    detail::put_u32(os, h.n_chirps);
    detail::put_u32(os, h.n_rx);
    detail::put_u32(os, h.sample_type);
}

inline RawFrameHeader read_raw_header(std::istream& is) {
    char magic[4];
    is.read(magic, 4);
    if (!is || std::memcmp(magic, kRawMagic, 4) != 0)
        throw io_error("raw frame: bad magic");
    RawFrameHeader h;
    h.version = detail::get_u32(is);
    h.n_fast = detail::get_u32(is);
    h.n_chirps = detail::get_u32(is);
    h.n_rx = detail::get_u32(is);
    h.sample_type = detail::get_u32(is);
    if (!is) throw io_error("raw frame: truncated header");
    if (h.version != 1) throw io_error("raw frame: unsupported version");
    if (h.sample_type > 1) throw io_error("raw frame: unknown sample type");
    if (h.n_fast == 0 || h.n_chirps == 0 || h.n_rx == 0)
        throw io_error("raw frame: empty dimensions");
    return h;
}

/// Write one c64 frame.
inline void write_cube(const std::string& path, const DataCube& cube) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw io_error("cannot open for write: " + path);
    RawFrameHeader h;
    h.n_fast = static_cast<std::uint32_t>(cube.fast_time_samples());
    h.n_chirps = static_cast<std::uint32_t>(cube.total_chirps());
    h.n_rx = static_cast<std::uint32_t>(cube.num_rx());
    h.sample_type = 0;
    write_raw_header(os, h);
    for (int n = 0; n < cube.num_rx(); ++n)
        for (int m = 0; m < cube.total_chirps(); ++m)
            for (int q = 0; q < cube.fast_time_samples(); ++q) {
                const std::complex<double> v = cube.samples[n](q, m);
                detail::put_f32(os, static_cast<float>(v.real()));
                detail::put_f32(os, static_cast<float>(v.imag()));
            }
    if (!os) throw io_error("write failed: " + path);
}

inline std::size_t raw_frame_count(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw io_error("cannot open: " + path);
    const RawFrameHeader h = read_raw_header(is);
    is.seekg(0, std::ios::end);
    const std::size_t payload = static_cast<std::size_t>(is.tellg()) - kRawHeaderBytes;
    if (payload % h.bytes_per_frame() != 0)
        throw io_error("raw frame: payload length is not a whole number of frames");
    return payload / h.bytes_per_frame();
}

namespace detail {

inline std::vector<std::complex<double>> read_frame_samples(std::istream& is,
                                                            const RawFrameHeader& h,
                                                            std::size_t frame_index) {
    const std::size_t count = h.samples_per_frame();
    is.seekg(static_cast<std::streamoff>(kRawHeaderBytes + frame_index * h.bytes_per_frame()));
    std::vector<std::complex<double>> out(count);
    if (h.sample_type == 0) {
        std::vector<float> buf(count * 2);
        is.read(reinterpret_cast<char*>(buf.data()),
                static_cast<std::streamsize>(buf.size() * sizeof(float)));
        if (!is) throw io_error("raw frame: truncated payload");
        for (std::size_t i = 0; i < count; ++i) out[i] = {buf[2 * i], buf[2 * i + 1]};
    } else {
        std::vector<std::int16_t> buf(count * 2);
        is.read(reinterpret_cast<char*>(buf.data()),
                static_cast<std::streamsize>(buf.size() * sizeof(std::int16_t)));
        if (!is) throw io_error("raw frame: truncated payload");
        constexpr double scale = 1.0 / 32768.0; // unit full-scale
        for (std::size_t i = 0; i < count; ++i)
            out[i] = {buf[2 * i] * scale, buf[2 * i + 1] * scale};
    }
    return out;
}

} // namespace detail

/// Read one frame (optionally subtracting a reference frame for static
/// background removal) and validate the header against the configuration.
inline DataCube ingest_raw(const std::string& path, const RadarConfig& cfg,
                           std::size_t frame_index = 0,
                           std::optional<std::size_t> subtract_frame = std::nullopt) {
    const DerivedParams d = derive_params(cfg);
    std::ifstream is(path, std::ios::binary);
    if (!is) throw io_error("cannot open: " + path);
    const RawFrameHeader h = read_raw_header(is);
    if (static_cast<int>(h.n_fast) != d.fast_time_samples ||
        static_cast<int>(h.n_chirps) != cfg.total_chirps() ||
        static_cast<int>(h.n_rx) != cfg.num_rx)
        throw io_error("raw frame: header dimensions do not match configuration");

    is.seekg(0, std::ios::end);
    const std::size_t payload = static_cast<std::size_t>(is.tellg()) - kRawHeaderBytes;
    if (payload % h.bytes_per_frame() != 0)
        throw io_error("raw frame: payload length is not a whole number of frames");
    const std::size_t frames = payload / h.bytes_per_frame();
    if (frame_index >= frames || (subtract_frame && *subtract_frame >= frames))
        throw io_error("raw frame: frame index out of range");

    std::vector<std::complex<double>> samples =
        detail::read_frame_samples(is, h, frame_index);
    if (subtract_frame) {
        const std::vector<std::complex<double>> ref =
            detail::read_frame_samples(is, h, *subtract_frame);
        for (std::size_t i = 0; i < samples.size(); ++i) samples[i] -= ref[i];
    }

    DataCube cube;
    cube.config = cfg;
    cube.samples.assign(cfg.num_rx,
                        Eigen::MatrixXcd(d.fast_time_samples, cfg.total_chirps()));
    std::size_t i = 0;
    for (int n = 0; n < cfg.num_rx; ++n)
        for (int m = 0; m < cfg.total_chirps(); ++m)
            for (int q = 0; q < d.fast_time_samples; ++q) cube.samples[n](q, m) = samples[i++];
    return cube;
}

} // namespace mapc
