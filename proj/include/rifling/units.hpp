#pragma once

// Internal units: time in microseconds, angular frequencies and rates in
// 1/us (rad/us). With the MHz-scale couplings of circuit QED this keeps
// Liouvillian entries O(1..1e3), so residuals and tolerances stay meaningful
// in absolute terms. Frequencies quoted as f = omega/2pi (MHz in config files
// and tables) are converted with the helpers below.

#include <numbers>

namespace rifling::units {

inline constexpr double kTwoPi = 2.0 * std::numbers::pi;

constexpr double mhz(double f_mhz) { return kTwoPi * f_mhz; }  // f/2pi in MHz -> rad/us
constexpr double to_mhz(double omega) { return omega / kTwoPi; }
constexpr double ns(double t_ns) { return t_ns * 1e-3; }       // ns -> us
constexpr double to_ns(double t_us) { return t_us * 1e3; }
constexpr double per_us(double r) { return r; }                // 1/us -> internal
constexpr double per_second(double r) { return r * 1e-6; }     // 1/s -> internal
constexpr double to_per_second(double r) { return r * 1e6; }

}  // namespace rifling::units
