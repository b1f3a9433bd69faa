#pragma once

// Dressed states of H = chi a^dag a sz + Omega/2 X truncated to at most one
// photon, resonant probe and qubit drive. Basis order {|g0>, |e0>, |g1>, |e1>}.

#include <array>
#include <cmath>

#include "rifling/errors.hpp"
#include "rifling/qop.hpp"

namespace rifling {

struct DressedTransition {
    int from = 0;         // s of |0s>: -1 or +1
    int to = 0;           // s' of |1s'>
    double frequency = 0; // E_{1s'} - E_{0s}, rad/us
    double weight = 0;    // |<1s'| a^dag |0s>|^2
    bool inner = false;   // same-sign pair (s == s')
};

struct DressedSpectrum {
    double e0_minus = 0, e0_plus = 0, e1_minus = 0, e1_plus = 0;
    // |0->, |0+>, |1->, |1+> as columns
    Eigen::Matrix4cd states = Eigen::Matrix4cd::Zero();
    std::array<DressedTransition, 4> transitions{};

    [[nodiscard]] Eigen::Vector4cd state(int manifold, int sign) const {
        return states.col(2 * manifold + (sign > 0 ? 1 : 0));
    }
};

/// The explicit 4x4 Hamiltonian in the {|g0>, |e0>, |g1>, |e1>} basis.
inline Eigen::Matrix4cd single_photon_hamiltonian(double chi, double rabi) {
    Eigen::Matrix4cd h = Eigen::Matrix4cd::Zero();
    h(0, 1) = h(1, 0) = 0.5 * rabi;
    h(2, 2) = chi;
    h(3, 3) = -chi;
    h(2, 3) = h(3, 2) = 0.5 * rabi;
    return h;
}

namespace detail {

/// Normalized (x, y) along whichever of two parallel representations is
/// better conditioned; both have a positive ratio, so the choice never flips
/// the sign.
inline Eigen::Vector2d pick_direction(Eigen::Vector2d u, Eigen::Vector2d v) {
    const Eigen::Vector2d& w = u.norm() >= v.norm() ? u : v;
    return w / w.norm();
}

}  // namespace detail

inline DressedSpectrum dressed_spectrum(double chi, double rabi) {
    if (rabi < 0.0) throw InvalidArgument("dressed_spectrum: rabi must be >= 0");
    const double r = std::hypot(2.0 * chi, rabi);
    DressedSpectrum s;
    s.e0_minus = -0.5 * rabi;
    s.e0_plus = 0.5 * rabi;
    s.e1_minus = -0.5 * r;
    s.e1_plus = 0.5 * r;

    const double h = 1.0 / std::sqrt(2.0);
    s.states(0, 0) = h;
    s.states(1, 0) = -h;
    s.states(0, 1) = h;
    s.states(1, 1) = h;
    // |1+> ~ ((2chi + R)/Omega)|g1> + |e1>, equivalently Omega|g1> + (R - 2chi)|e1>.
    const Eigen::Vector2d plus = detail::pick_direction({2.0 * chi + r, rabi}, {rabi, r - 2.0 * chi});
    // |1-> ~ ((2chi - R)/Omega)|g1> + |e1>, equivalently -Omega|g1> + (R + 2chi)|e1>.
    const Eigen::Vector2d minus = detail::pick_direction({2.0 * chi - r, rabi}, {-rabi, r + 2.0 * chi});
    if (r == 0.0) {
        // chi = Omega = 0: fully degenerate, any basis will do.
        s.states(2, 2) = 0.0;
        s.states(3, 2) = 1.0;
        s.states(2, 3) = 1.0;
        s.states(3, 3) = 0.0;
    } else {
        s.states(2, 2) = minus(0);
        s.states(3, 2) = minus(1);
        s.states(2, 3) = plus(0);
        s.states(3, 3) = plus(1);
    }

    // a^dag maps |g0> -> |g1>, |e0> -> |e1>.
    Eigen::Matrix4cd adag = Eigen::Matrix4cd::Zero();
    adag(2, 0) = 1.0;
    adag(3, 1) = 1.0;
    const double e0[2] = {s.e0_minus, s.e0_plus};
    const double e1[2] = {s.e1_minus, s.e1_plus};
    std::size_t k = 0;
    for (int from = 0; from < 2; ++from)
        for (int to = 0; to < 2; ++to) {
            DressedTransition t;
            t.from = from == 0 ? -1 : 1;
            t.to = to == 0 ? -1 : 1;
            t.frequency = e1[to] - e0[from];
            const Complex amp = s.states.col(2 + to).dot(adag * s.states.col(from));
            t.weight = std::norm(amp);
            t.inner = from == to;
            s.transitions[k++] = t;
        }
    return s;
}

inline double rifling_threshold(double chi, double kappa) {
    if (!(kappa > 0.0)) throw InvalidArgument("rifling_threshold: kappa must be positive");
    return chi * chi / kappa;
}

/// Peak-to-peak separation of the two inner transitions, R - Omega.
inline double inner_peak_separation(double chi, double rabi) {
    const double r = std::hypot(2.0 * chi, rabi);
    // R - Omega = 4chi^2/(R + Omega) avoids cancellation at large Omega.
    return r + rabi > 0.0 ? 4.0 * chi * chi / (r + rabi) : 0.0;
}

enum class MergeConvention {
    CenterOffset,  // |E1 - E0| < kappa: each inner line within kappa of the center
    PeakToPeak,    // inner peak-to-peak separation < kappa
};

/// Analytic merge test for the inner pair of transitions.
inline bool inner_peaks_merged(double chi, double rabi, double kappa, MergeConvention c = MergeConvention::CenterOffset) {
    if (!(kappa > 0.0)) throw InvalidArgument("inner_peaks_merged: kappa must be positive");
    const double sep = inner_peak_separation(chi, rabi);
    return c == MergeConvention::CenterOffset ? 0.5 * sep < kappa : sep < kappa;
}

/// Exact Omega at which the analytic merge test switches (0 if merged already
/// at Omega = 0). Asymptotically chi^2/kappa (center offset) or 2 chi^2/kappa
/// (peak-to-peak).
inline double merge_rabi(double chi, double kappa, MergeConvention c = MergeConvention::CenterOffset) {
    if (!(kappa > 0.0)) throw InvalidArgument("merge_rabi: kappa must be positive");
    const double s = c == MergeConvention::CenterOffset ? 2.0 * kappa : kappa;
    return std::max(0.0, (4.0 * chi * chi - s * s) / (2.0 * s));
}

}  // namespace rifling
