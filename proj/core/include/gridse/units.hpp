#pragma once

#include <cmath>
#include <numbers>

namespace gridse {

constexpr double deg_to_rad(double degrees) { return degrees * (std::numbers::pi / 180.0); }
constexpr double rad_to_deg(double radians) { return radians * (180.0 / std::numbers::pi); }

/// Degree value that converts back to exactly `radians` through deg_to_rad,
/// so files written in degrees re-import bit-identically.
inline double rad_to_deg_exact(double radians) {
    const double guess = rad_to_deg(radians);
    if (deg_to_rad(guess) == radians) return guess;
    double up = guess;
    double down = guess;
    for (int step = 0; step < 8; ++step) {
        up = std::nextafter(up, INFINITY);
        down = std::nextafter(down, -INFINITY);
        if (deg_to_rad(up) == radians) return up;
        if (deg_to_rad(down) == radians) return down;
    }
    return guess;
}

}  // namespace gridse
