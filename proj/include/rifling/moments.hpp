#pragma once

// Equations of motion for low-order moments of the single two-level qubit
// + resonator model, their closures and closed-form steady states.
//
// Conventions follow the moment literature rather than qop.hpp: sz is
// <|g><g| - |e><e|> (= +1 in the ground state), sm = <sigma_-> with
// sigma_- = |g><e|, sp = conj(sm). Rates: dgamma = gamma_down - gamma_up,
// sgamma = gamma_down + gamma_up, gamma_sigma = kappa/2 + sgamma.

#include <cmath>
#include <complex>

#include <Eigen/Dense>

#include "rifling/errors.hpp"
#include "rifling/model.hpp"
#include "rifling/qop.hpp"

namespace rifling {

struct MomentState {
    Complex a{};      // <a>
    double n = 0.0;   // <a^dag a>
    double sz = 0.0;  // <sz>
    Complex sm{};     // <sigma_->
    Complex sza{};    // <sz a>
    Complex sma{};    // <sigma_- a>
    Complex spa{};    // <sigma_+ a>

    [[nodiscard]] Complex sp() const { return std::conj(sm); }

    MomentState& operator+=(const MomentState& o) {
        a += o.a; n += o.n; sz += o.sz; sm += o.sm; sza += o.sza; sma += o.sma; spa += o.spa;
        return *this;
    }
    MomentState& operator*=(double s) {
        a *= s; n *= s; sz *= s; sm *= s; sza *= s; sma *= s; spa *= s;
        return *this;
    }
    friend MomentState operator+(MomentState x, const MomentState& y) { return x += y; }
    friend MomentState operator*(double s, MomentState x) { return x *= s; }

    [[nodiscard]] double max_abs() const {
        return std::max({std::abs(a), std::abs(n), std::abs(sz), std::abs(sm), std::abs(sza), std::abs(sma), std::abs(spa)});
    }
};

enum class Closure { WeakDrive, SecondOrder };

/// gamma_sigma = kappa/2 + gamma_down + gamma_up.
inline double gamma_sigma(const SystemParams& p) {
    const auto& q = p.qubits.at(0);
    return 0.5 * p.resonator.kappa + q.gamma_down + q.gamma_up;
}

inline void require_two_level(const SystemParams& p, const char* who) {
    if (p.qubits.size() != 1 || p.qubits[0].n_levels != 2)
        throw UnsupportedModel(std::string(who) + ": only a single two-level qubit is supported");
}

/// Third-order correlators entering the hierarchy.
struct HigherMoments {
    Complex n_sm{};     // <a^dag a sigma_->
    Complex sm_naa{};   // <sigma_- a^dag a a>
    Complex sp_naa{};   // <sigma_+ a^dag a a>
};

inline HigherMoments close_moments(const MomentState& s, Closure closure) {
    if (closure == Closure::WeakDrive) return {};
    return {s.n * s.sm, s.n * s.sma, s.n * s.spa};
}

/// Right-hand side with the higher correlators supplied explicitly. With the
/// exact correlators of a density matrix this is the exact time derivative.
inline MomentState moment_rhs_exact(const MomentState& s, const HigherMoments& h, const SystemParams& p) {
    require_two_level(p, "moment_rhs");
    const auto& q = p.qubits[0];
    const auto& r = p.resonator;
    const double dw = r.delta_omega_r, kappa = r.kappa, eps = r.drive_amp, chi = q.chi, dq = q.delta_omega_q;
    const double dg = q.gamma_down - q.gamma_up, sg = q.gamma_down + q.gamma_up, g2 = q.gamma2();
    // Drive Omega/2 (w sigma_+ + conj(w) sigma_-), w = exp(-i phi).
    const Complex w = std::polar(q.rabi, -q.rabi_phase);
    const Complex wc = std::conj(w);
    const Complex sp = s.sp();

    MomentState d;
    d.a = -kI * (dw * s.a + 0.5 * eps + chi * s.sza) - 0.5 * kappa * s.a;
    d.n = (kI * 0.5 * eps * (s.a - std::conj(s.a))).real() - kappa * s.n;
    d.sz = (kI * (w * sp - wc * s.sm)).real() + dg - sg * s.sz;
    d.sm = -kI * (dq * s.sm - 2.0 * chi * h.n_sm + 0.5 * w * s.sz) - g2 * s.sm;
    d.sza = -kI * (dw * s.sza + 0.5 * eps * s.sz + chi * s.a - (w * s.spa - wc * s.sma)) + dg * s.a -
            (sg + 0.5 * kappa) * s.sza;
    d.sma = -kI * (dw * s.sma - chi * s.sma - 2.0 * chi * h.sm_naa + 0.5 * eps * s.sm + dq * s.sma + 0.5 * w * s.sza) -
            (g2 + 0.5 * kappa) * s.sma;
    d.spa = -kI * (dw * s.spa + chi * s.spa + 2.0 * chi * h.sp_naa + 0.5 * eps * sp - dq * s.spa - 0.5 * wc * s.sza) -
            (g2 + 0.5 * kappa) * s.spa;
    return d;
}

inline MomentState moment_rhs(const MomentState& s, const SystemParams& p, Closure closure) {
    return moment_rhs_exact(s, close_moments(s, closure), p);
}

/// Moments of a full density matrix of the single-qubit model.
inline MomentState moments_of(const ComplexMatrix& rho, const SystemParams& p) {
    require_two_level(p, "moments_of");
    const ComplexMatrix a = resonator_annihilation(p);
    const ComplexMatrix n = a.adjoint() * a;
    const ComplexMatrix sz = qubit_projector(p, 0, 0) - qubit_projector(p, 0, 1);
    const ComplexMatrix sm = qubit_transition(p, 0, 0, 1);
    MomentState m;
    m.a = expect(a, rho);
    m.n = expect(n, rho).real();
    m.sz = expect(sz, rho).real();
    m.sm = expect(sm, rho);
    m.sza = expect(sz * a, rho);
    m.sma = expect(sm * a, rho);
    m.spa = expect(sm.adjoint() * a, rho);
    return m;
}

inline HigherMoments higher_moments_of(const ComplexMatrix& rho, const SystemParams& p) {
    const ComplexMatrix a = resonator_annihilation(p);
    const ComplexMatrix n = a.adjoint() * a;
    const ComplexMatrix sm = qubit_transition(p, 0, 0, 1);
    return {expect(n * sm, rho), expect(sm * n * a, rho), expect(sm.adjoint() * n * a, rho)};
}

// ---------------------------------------------------------------------------
// Steady states

struct IncoherentSteadyState {
    double sz = 0.0;
    Complex a{};
    Complex sza{};
};

/// Omega_R = 0: closed forms for sz, <a> and <sz a>.
inline IncoherentSteadyState incoherent_steady_state(const SystemParams& p) {
    require_two_level(p, "incoherent_steady_state");
    const auto& q = p.qubits[0];
    if (q.rabi != 0.0) throw InvalidArgument("incoherent_steady_state: requires Omega_R = 0");
    const double sg = q.gamma_down + q.gamma_up;
    if (sg == 0.0) throw DivisionByZero("incoherent_steady_state: gamma_down + gamma_up = 0 leaves sz undetermined");
    const double dg = q.gamma_down - q.gamma_up;
    const double dw = p.resonator.delta_omega_r, kappa = p.resonator.kappa, eps = p.resonator.drive_amp, chi = q.chi;
    const double gs = gamma_sigma(p);

    IncoherentSteadyState out;
    out.sz = dg / sg;
    const Complex x = gs + kI * dw;
    const Complex num = 1.0 - kI * chi * dg / (sg * x);
    const Complex den = dw - kI * (0.5 * kappa + chi * (chi + kI * dg) / x);
    out.a = -0.5 * eps * num / den;
    out.sza = -((chi + kI * dg) * out.a + 0.5 * eps * out.sz) / (dw - kI * gs);
    return out;
}

/// gamma_up = gamma_down special case of the incoherent <a>.
inline Complex infinite_temperature_amplitude(const SystemParams& p) {
    require_two_level(p, "infinite_temperature_amplitude");
    const double dw = p.resonator.delta_omega_r, kappa = p.resonator.kappa, eps = p.resonator.drive_amp;
    const double chi = p.qubits[0].chi, gs = gamma_sigma(p);
    const double l = dw * dw + gs * gs;
    return -0.5 * eps / (dw - chi * chi * dw / l - kI * (0.5 * kappa + chi * chi * gs / l));
}

/// Steady state of the weak-drive closure (<a^dag a> = 0 in all correlators).
/// sz and sm are closed form; (sma, spa, sza) follow from a 3x3 linear solve
/// with <a> eliminated through a = -(eps/2 + chi sza)/(dw - i kappa/2).
/// The returned n is the O(eps^2) value slaved to <a>, so that moment_rhs
/// vanishes identically.
inline MomentState weak_drive_steady_state(const SystemParams& p) {
    require_two_level(p, "weak_drive_steady_state");
    const auto& q = p.qubits[0];
    const auto& r = p.resonator;
    const double dw = r.delta_omega_r, kappa = r.kappa, eps = r.drive_amp, chi = q.chi, dq = q.delta_omega_q;
    const double dg = q.gamma_down - q.gamma_up, sg = q.gamma_down + q.gamma_up, g2 = q.gamma2();
    const Complex w = std::polar(q.rabi, -q.rabi_phase);
    const Complex wc = std::conj(w);

    const double rabi2 = q.rabi * q.rabi;
    const double sat = g2 * g2 + dq * dq;
    const double sz_den = sg * sat + g2 * rabi2;
    if (sz_den == 0.0) throw DivisionByZero("weak_drive_steady_state: qubit has no relaxation channel");

    MomentState s;
    s.sz = dg * sat / sz_den;
    s.sm = -kI * w * s.sz / (2.0 * (g2 + kI * dq));
    const Complex sp = s.sp();

    const Complex cav = dw - kI * 0.5 * kappa;
    const Complex a0 = -0.5 * eps / cav;
    const Complex a1 = -chi / cav;

    // Unknowns x = (sma, spa, sza); rows are the sma, spa, sza equations in
    // the form M x = b.
    Eigen::Matrix3cd m = Eigen::Matrix3cd::Zero();
    Eigen::Vector3cd b;
    const double gq = g2 + 0.5 * kappa;
    m(0, 0) = -kI * (dw - chi + dq) - gq;
    m(0, 2) = -kI * 0.5 * w;
    b(0) = kI * 0.5 * eps * s.sm;
    m(1, 1) = -kI * (dw + chi - dq) - gq;
    m(1, 2) = kI * 0.5 * wc;
    b(1) = kI * 0.5 * eps * sp;
    // 0 = -i(dw sza + eps/2 sz + chi a - (w spa - wc sma)) + dg a - (sg + kappa/2) sza
    m(2, 0) = -kI * wc;
    m(2, 1) = kI * w;
    m(2, 2) = -kI * dw - kI * chi * a1 + dg * a1 - (sg + 0.5 * kappa);
    b(2) = kI * 0.5 * eps * s.sz + kI * chi * a0 - dg * a0;

    Eigen::FullPivLU<Eigen::Matrix3cd> lu(m);
    const double cond_scale = m.cwiseAbs().maxCoeff();
    if (!lu.isInvertible() || std::abs(lu.determinant()) <= 1e-14 * cond_scale * cond_scale * cond_scale)
        throw DegenerateSolution("weak_drive_steady_state: singular linear system");
    const Eigen::Vector3cd x = lu.solve(b);
    s.sma = x(0);
    s.spa = x(1);
    s.sza = x(2);
    s.a = a0 + a1 * s.sza;
    s.n = (kI * 0.5 * eps * (s.a - std::conj(s.a))).real() / kappa;
    return s;
}

/// <a> in the limit of vanishing qubit decoherence (closed form).
inline Complex infinite_coherence_amplitude(const SystemParams& p) {
    require_two_level(p, "infinite_coherence_amplitude");
    const double dw = p.resonator.delta_omega_r, kappa = p.resonator.kappa, eps = p.resonator.drive_amp;
    const double chi = p.qubits[0].chi, rabi = p.qubits[0].rabi;
    const Complex inner = dw - kI * 0.5 * kappa -
                          kI * rabi * rabi * (1.0 / (2.0 * kI * (dw - chi) + kappa) + 1.0 / (2.0 * kI * (dw + chi) + kappa));
    return -0.5 * eps / (dw - chi * chi / inner - kI * 0.5 * kappa);
}

/// Classical RK4 integration of the moment ODE, used for consistency checks
/// and for short transients.
inline MomentState integrate_moments(MomentState s, const SystemParams& p, Closure closure, double t_end, double dt) {
    if (!(dt > 0.0)) throw InvalidArgument("integrate_moments: dt must be positive");
    const auto steps = static_cast<long>(std::ceil(t_end / dt));
    const double h = steps > 0 ? t_end / static_cast<double>(steps) : 0.0;
    for (long i = 0; i < steps; ++i) {
        const MomentState k1 = moment_rhs(s, p, closure);
        const MomentState k2 = moment_rhs(s + (0.5 * h) * k1, p, closure);
        const MomentState k3 = moment_rhs(s + (0.5 * h) * k2, p, closure);
        const MomentState k4 = moment_rhs(s + h * k3, p, closure);
        s += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    }
    return s;
}

}  // namespace rifling
