#pragma once

// Damped-cosine fit P(t) = A exp(-G t) cos(W t + phi) + B by
// Levenberg-Marquardt with a periodogram start and a linear scan over G.

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <cstddef>
#include <limits>
#include <numbers>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <unsupported/Eigen/FFT>

#include "rifling/errors.hpp"
#include "rifling/lindblad.hpp"

namespace rifling {

struct FitResult {
    double amplitude = 0.0;   // A
    double decay_rate = 0.0;  // Gamma_R, 1/us
    double frequency = 0.0;   // Omega_R, rad/us
    double phase = 0.0;       // phi_0, rad, in (-pi, pi]
    double offset = 0.0;      // B
    double residual_norm = 0.0;  // ||model - data||_2
    double signal_norm = 0.0;    // ||data||_2
    double decay_rate_stderr = 0.0;
    int iterations = 0;
    bool converged = false;

    [[nodiscard]] double relative_residual() const { return signal_norm > 0 ? residual_norm / signal_norm : residual_norm; }
    [[nodiscard]] double evaluate(double t) const {
        return amplitude * std::exp(-decay_rate * t) * std::cos(frequency * t + phase) + offset;
    }
};

struct FitOptions {
    double t_start = 0.0;          // samples before this time are ignored, us
    double gradient_tol = 1e-10;   // on max_k |J_k^T r| / (||J_k|| ||y||)
    int max_iterations = 200;
    std::size_t decay_candidates = 60;
    std::size_t starts = 4;
};

namespace detail {

using Vec5 = Eigen::Matrix<double, 5, 1>;
using Mat5 = Eigen::Matrix<double, 5, 5>;

inline double wrap_phase(double p) {
    p = std::remainder(p, 2.0 * std::numbers::pi);
    if (p <= -std::numbers::pi) p += 2.0 * std::numbers::pi;
    return p;
}

// |sum (y - mean) exp(-i w t)|^2, optionally weighted by w^2 (the spectrum of
// dy/dt, which keeps slow offset drifts from winning over the oscillation).
inline double periodogram(const std::vector<double>& t, const std::vector<double>& y, double mean, double w, bool weighted) {
    double re = 0, im = 0;
    for (std::size_t i = 0; i < t.size(); ++i) {
        const double v = y[i] - mean;
        re += v * std::cos(w * t[i]);
        im -= v * std::sin(w * t[i]);
    }
    return (weighted ? w * w : 1.0) * (re * re + im * im);
}

// Dominant nonzero DFT bins of the w^2-weighted and of the plain spectrum,
// each refined by golden-section search between its neighbours.
inline std::array<double, 2> dominant_frequencies(const std::vector<double>& t, const std::vector<double>& y, double mean) {
    const std::size_t n = t.size();
    const double span = t.back() - t.front();
    const double dw = 2.0 * std::numbers::pi / span;
    const std::size_t kmax = n / 2;
    const double dt = t[1] - t[0];
    bool uniform = true;
    for (std::size_t i = 1; i < n; ++i)
        if (std::abs((t[i] - t[i - 1]) - dt) > 1e-9 * span) uniform = false;
    // bin spacing 2 pi / span for the direct sum, 2 pi / (n dt) for the FFT
    std::vector<double> power, freq;
    if (uniform) {
        std::vector<double> centred(n);
        for (std::size_t i = 0; i < n; ++i) centred[i] = y[i] - mean;
        std::vector<std::complex<double>> spec;
        Eigen::FFT<double> fft;
        fft.fwd(spec, centred);
        const double df = 2.0 * std::numbers::pi / (static_cast<double>(n) * dt);
        for (std::size_t k = 1; k <= kmax; ++k) {
            power.push_back(std::norm(spec[k]));
            freq.push_back(df * static_cast<double>(k));
        }
    } else {
        for (std::size_t k = 1; k <= kmax; ++k) {
            freq.push_back(dw * static_cast<double>(k));
            power.push_back(periodogram(t, y, mean, freq.back(), false));
        }
    }
    double best[2] = {-1.0, -1.0};
    double wbest[2] = {freq[0], freq[0]};
    for (std::size_t k = 0; k < power.size(); ++k)
        for (int j = 0; j < 2; ++j) {
            const double v = j == 0 ? freq[k] * freq[k] * power[k] : power[k];
            if (v > best[j]) {
                best[j] = v;
                wbest[j] = freq[k];
            }
        }
    const double bin = freq[0];
    std::array<double, 2> out{};
    for (int j = 0; j < 2; ++j) {
        const bool weighted = j == 0;
        double lo = std::max(wbest[j] - bin, 0.25 * bin), hi = wbest[j] + bin;
        const double g = 0.5 * (std::sqrt(5.0) - 1.0);
        double a = hi - g * (hi - lo), b = lo + g * (hi - lo);
        double fa = periodogram(t, y, mean, a, weighted), fb = periodogram(t, y, mean, b, weighted);
        for (int it = 0; it < 40; ++it) {  // bracket shrinks to ~1e-8 of a bin; LM refines
            if (fa > fb) {
                hi = b;
                b = a;
                fb = fa;
                a = hi - g * (hi - lo);
                fa = periodogram(t, y, mean, a, weighted);
            } else {
                lo = a;
                a = b;
                fa = fb;
                b = lo + g * (hi - lo);
                fb = periodogram(t, y, mean, b, weighted);
            }
        }
        out[static_cast<std::size_t>(j)] = 0.5 * (lo + hi);
    }
    return out;
}

// Linear least squares for (c1, c2, B) at fixed (G, W), given cos(W t) and
// sin(W t); returns the squared residual.
inline double linear_fit(const std::vector<double>& t, const std::vector<double>& y, const Eigen::VectorXd& cw,
                         const Eigen::VectorXd& sw, double gamma, double w, Vec5& p) {
    const auto n = static_cast<Eigen::Index>(t.size());
    Eigen::MatrixXd m(n, 3);
    const Eigen::Map<const Eigen::VectorXd> rhs(y.data(), n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const double e = std::exp(-gamma * t[static_cast<std::size_t>(i)]);
        m(i, 0) = e * cw(i);
        m(i, 1) = e * sw(i);
        m(i, 2) = 1.0;
    }
    const Eigen::Vector3d c = m.colPivHouseholderQr().solve(rhs);
    // c1 cos + c2 sin = A cos(wt + phi) with c1 = A cos phi, c2 = -A sin phi
    p << std::hypot(c(0), c(1)), gamma, w, std::atan2(-c(1), c(0)), c(2);
    return (m * c - rhs).squaredNorm();
}

struct LmOutcome {
    Vec5 p;
    double sse = 0.0;
    double grad = 0.0;
    int iterations = 0;
    Mat5 jtj;
};

inline void residuals(const std::vector<double>& t, const std::vector<double>& y, const Vec5& p, Eigen::VectorXd& r,
                      Eigen::MatrixXd& jac) {
    const auto n = static_cast<Eigen::Index>(t.size());
    r.resize(n);
    jac.resize(n, 5);
    for (Eigen::Index i = 0; i < n; ++i) {
        const double ti = t[static_cast<std::size_t>(i)];
        const double e = std::exp(-p(1) * ti);
        const double c = std::cos(p(2) * ti + p(3)), s = std::sin(p(2) * ti + p(3));
        r(i) = p(0) * e * c + p(4) - y[static_cast<std::size_t>(i)];
        jac(i, 0) = e * c;
        jac(i, 1) = -ti * p(0) * e * c;
        jac(i, 2) = -ti * p(0) * e * s;
        jac(i, 3) = -p(0) * e * s;
        jac(i, 4) = 1.0;
    }
}

// Gradient scaled per parameter by the column norm of J and by ||y||, so the
// tolerance does not depend on units or on the number of samples.
inline double scaled_gradient(const Eigen::MatrixXd& jac, const Eigen::VectorXd& r, double y_norm) {
    double g = 0.0;
    for (Eigen::Index k = 0; k < jac.cols(); ++k) {
        const double cn = jac.col(k).norm();
        if (cn > 0) g = std::max(g, std::abs(jac.col(k).dot(r)) / (cn * y_norm));
    }
    return g;
}

inline LmOutcome levenberg_marquardt(const std::vector<double>& t, const std::vector<double>& y, Vec5 p,
                                     const FitOptions& opt) {
    Eigen::VectorXd r, r_new;
    Eigen::MatrixXd jac, jac_new;
    double y_norm = 0.0;
    for (double v : y) y_norm += v * v;
    y_norm = std::max(std::sqrt(y_norm), 1e-300);
    residuals(t, y, p, r, jac);
    double sse = r.squaredNorm();
    double lambda = 1e-3;
    LmOutcome out;
    int it = 0;
    for (; it < opt.max_iterations; ++it) {
        const Vec5 g = jac.transpose() * r;
        if (scaled_gradient(jac, r, y_norm) <= opt.gradient_tol) break;
        const Mat5 a = jac.transpose() * jac;
        bool improved = false;
        while (lambda < 1e16) {
            Mat5 damped = a;
            for (int k = 0; k < 5; ++k) damped(k, k) += lambda * std::max(a(k, k), 1e-30);
            const Vec5 step = damped.ldlt().solve(-g);
            const Vec5 trial = p + step;
            residuals(t, y, trial, r_new, jac_new);
            const double sse_new = r_new.squaredNorm();
            if (std::isfinite(sse_new) && sse_new <= sse) {
                const bool stalled = sse - sse_new <= 1e-300 && step.cwiseAbs().maxCoeff() <= 1e-16 * (1.0 + p.cwiseAbs().maxCoeff());
                p = trial;
                r.swap(r_new);
                jac.swap(jac_new);
                sse = sse_new;
                lambda = std::max(lambda / 3.0, 1e-15);
                improved = !stalled;
                break;
            }
            lambda *= 4.0;
        }
        if (!improved) break;
    }
    out.p = p;
    out.sse = sse;
    out.grad = scaled_gradient(jac, r, y_norm);
    out.iterations = it;
    out.jtj = jac.transpose() * jac;
    return out;
}

}  // namespace detail

/// Fits A exp(-G t) cos(W t + phi) + B to (t, y). Needs at least 8 samples
/// and two periods of the dominant frequency inside the fit window.
inline FitResult fit_rabi_decay(const std::vector<double>& times, const std::vector<double>& values,
                                const FitOptions& opt = {}) {
    if (times.size() != values.size()) throw InvalidArgument("fit_rabi_decay: times and values differ in length");
    std::vector<double> t, y;
    for (std::size_t i = 0; i < times.size(); ++i)
        if (times[i] >= opt.t_start - 1e-12) {
            if (!std::isfinite(values[i]) || !std::isfinite(times[i])) throw InvalidArgument("fit_rabi_decay: non-finite sample");
            t.push_back(times[i]);
            y.push_back(values[i]);
        }
    if (t.size() < 8) throw InvalidArgument("fit_rabi_decay: fewer than 8 samples in the fit window");
    for (std::size_t i = 1; i < t.size(); ++i)
        if (!(t[i] > t[i - 1])) throw InvalidArgument("fit_rabi_decay: times must be strictly increasing");

    double mean = 0;
    for (double v : y) mean += v;
    mean /= static_cast<double>(y.size());
    const double span = t.back() - t.front();
    // Frequency seeds: the w^2-weighted peak resists slow drifts, the plain
    // peak resists high-frequency noise on strongly damped traces.
    std::vector<double> seeds;
    for (double w : detail::dominant_frequencies(t, y, mean)) {
        if (w * span / (2.0 * std::numbers::pi) < 2.0) continue;
        if (seeds.empty() || std::abs(w - seeds[0]) > 1e-3 * seeds[0]) seeds.push_back(w);
    }
    if (seeds.empty()) throw InvalidArgument("fit_rabi_decay: fewer than two oscillation periods in the fit window");

    // Scan G on a log grid for the best linear fit at each seed.
    struct Candidate {
        double sse;
        detail::Vec5 p;
    };
    std::vector<Candidate> cands;
    for (double w0 : seeds) {
        Eigen::VectorXd cw(static_cast<Eigen::Index>(t.size())), sw(cw.size());
        for (Eigen::Index i = 0; i < cw.size(); ++i) {
            cw(i) = std::cos(w0 * t[static_cast<std::size_t>(i)]);
            sw(i) = std::sin(w0 * t[static_cast<std::size_t>(i)]);
        }
        const double g_lo = 1e-3 / span, g_hi = std::max(50.0 / span, 2.0 * w0);
        for (std::size_t k = 0; k <= opt.decay_candidates; ++k) {
            // k == decay_candidates: undamped
            const double g = k == opt.decay_candidates
                                 ? 0.0
                                 : g_lo * std::pow(g_hi / g_lo, static_cast<double>(k) / static_cast<double>(opt.decay_candidates - 1));
            detail::Vec5 p;
            const double sse = detail::linear_fit(t, y, cw, sw, g, w0, p);
            cands.push_back({sse, p});
        }
    }
    std::sort(cands.begin(), cands.end(), [](const Candidate& a, const Candidate& b) { return a.sse < b.sse; });

    FitResult best;
    double best_sse = std::numeric_limits<double>::infinity();
    detail::LmOutcome best_lm;
    for (std::size_t s = 0; s < std::min(opt.starts, cands.size()); ++s) {
        const auto lm = detail::levenberg_marquardt(t, y, cands[s].p, opt);
        if (lm.sse < best_sse) {
            best_sse = lm.sse;
            best_lm = lm;
        }
    }

    detail::Vec5 p = best_lm.p;
    if (p(0) < 0) {
        p(0) = -p(0);
        p(3) += std::numbers::pi;
    }
    if (p(2) < 0) {
        p(2) = -p(2);
        p(3) = -p(3);
    }
    if (p(2) * span / (2.0 * std::numbers::pi) < 2.0)
        throw InvalidArgument("fit_rabi_decay: fewer than two oscillation periods in the fit window");
    double dt_max = 0;
    for (std::size_t i = 1; i < t.size(); ++i) dt_max = std::max(dt_max, t[i] - t[i - 1]);
    if (p(2) * dt_max >= std::numbers::pi)
        throw InvalidArgument("fit_rabi_decay: fitted frequency at or above the Nyquist limit of the sampling");
    best.amplitude = p(0);
    best.decay_rate = p(1);
    best.frequency = p(2);
    best.phase = detail::wrap_phase(p(3));
    best.offset = p(4);
    best.residual_norm = std::sqrt(best_lm.sse);
    double sn = 0;
    for (double v : y) sn += v * v;
    best.signal_norm = std::sqrt(sn);
    best.iterations = best_lm.iterations;
    best.converged = best_lm.grad <= opt.gradient_tol;
    const auto dof = static_cast<double>(t.size()) - 5.0;
    if (dof > 0) {
        const detail::Mat5 cov = best_lm.jtj.inverse() * (best_lm.sse / dof);
        best.decay_rate_stderr = std::sqrt(std::max(0.0, cov(1, 1)));
    }
    if (best.decay_rate < 0) {
        best.decay_rate = 0.0;
        best.converged = false;
    }
    return best;
}

/// Fits the named real series of a trajectory.
inline FitResult fit_rabi_decay(const Trajectory& traj, const std::string& series = "P_e", const FitOptions& opt = {}) {
    return fit_rabi_decay(traj.times, traj.real_series(series), opt);
}

}  // namespace rifling
