#pragma once

#include <Eigen/Dense>
#include <complex>
#include <numbers>

#include "mapc/errors.hpp"

namespace mapc {

/// Binary slow-time phase code built from a Hadamard matrix of the given
/// order. Entry +1 maps to phase 0, entry -1 to phase pi; the code repeats
/// with period `order` along slow time.
struct PhaseCodeMatrix {
    int order = 1;
    Eigen::MatrixXi entries; // order x order, values in {+1, -1}

    /// Phase applied to transmitter `tx` on chirp `chirp` (0 or pi).
    double phase(int tx, int chirp) const {
        return entries(tx, chirp % order) > 0 ? 0.0 : std::numbers::pi;
    }

    /// exp(j * phase) without trig roundoff: exactly +1 or -1.
    std::complex<double> phasor(int tx, int chirp) const {
        return {static_cast<double>(entries(tx, chirp % order)), 0.0};
    }
};

/// Sylvester construction. Order must be 1 or a power of two.
inline PhaseCodeMatrix hadamard(int order) {
    if (order < 1 || (order & (order - 1)) != 0)
        throw config_error("hadamard: unsupported order " + std::to_string(order) +
                           " (must be 1 or a power of two)");
    Eigen::MatrixXi a(1, 1);
    a(0, 0) = 1;
    while (a.rows() < order) {
        const Eigen::Index n = a.rows();
        Eigen::MatrixXi b(2 * n, 2 * n);
        b.topLeftCorner(n, n) = a;
        b.topRightCorner(n, n) = a;
        b.bottomLeftCorner(n, n) = a;
        b.bottomRightCorner(n, n) = -a;
        a = std::move(b);
    }
    return {order, std::move(a)};
}

} // namespace mapc
