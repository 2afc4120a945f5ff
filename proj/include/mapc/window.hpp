#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <numbers>

#include "mapc/errors.hpp"

namespace mapc {

enum class WindowKind { rectangular, hanning };

struct WindowSpec {
    WindowKind kind = WindowKind::rectangular;
    int length = 0;

    /// Real taps in [0, 1], symmetric. Hann uses the symmetric definition
    /// h[n] = 0.5 * (1 - cos(2*pi*n / (N-1))).
    Eigen::VectorXd taps() const {
        if (length < 1) throw config_error("window: length must be >= 1");
        Eigen::VectorXd h(length);
        switch (kind) {
        case WindowKind::rectangular:
            h.setOnes();
            break;
        case WindowKind::hanning:
            if (length == 1) {
                h(0) = 1.0;
            } else {
                for (int n = 0; n < length; ++n)
                    h(n) = 0.5 * (1.0 - std::cos(2.0 * std::numbers::pi * n / (length - 1)));
            }
            break;
        }
        return h;
    }
};

inline WindowSpec rectangular_window(int length) { return {WindowKind::rectangular, length}; }
inline WindowSpec hanning_window(int length) { return {WindowKind::hanning, length}; }

} // namespace mapc
