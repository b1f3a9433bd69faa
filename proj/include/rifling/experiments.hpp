#pragma once

// Protocol pipelines: steady-state sweeps, photon-number calibration, pulse
// schedules, Rabi decay under a cavity tone and the Ramsey phase sweep.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <tuple>
#include <vector>

#include "rifling/errors.hpp"
#include "rifling/fit.hpp"
#include "rifling/lindblad.hpp"
#include "rifling/model.hpp"
#include "rifling/parallel.hpp"
#include "rifling/peaks.hpp"
#include "rifling/qop.hpp"
#include "rifling/units.hpp"

namespace rifling {

inline constexpr std::size_t kMaxFockLevels = 256;

// ---------------------------------------------------------------- steady state

struct SteadyStateResult {
    ComplexMatrix rho;
    SystemParams params;  // with the Fock truncation actually used
    Complex amplitude{};  // <a>
    double photons = 0.0;
    double fock_tail = 0.0;
    double residual = 0.0;
};

inline std::size_t next_fock(std::size_t n) {
    const std::size_t m = n + std::max<std::size_t>(4, n / 4);
    if (m > kMaxFockLevels) throw CapacityError("Fock truncation would exceed " + std::to_string(kMaxFockLevels) + " levels");
    return m;
}

/// Fock size that comfortably holds a coherent state with mean n.
inline std::size_t fock_guess(double n) {
    return static_cast<std::size_t>(std::ceil(n + 6.0 * std::sqrt(n) + 6.0));
}

/// Steady state with the Fock space raised until the top level holds less
/// than kFockTailTolerance.
inline SteadyStateResult steady_state_adaptive(SystemParams p) {
    for (;;) {
        const Liouvillian L = build_liouvillian(build_hamiltonian(p), build_collapse_ops(p));
        SteadyStateResult r;
        r.rho = steady_state(L);
        r.fock_tail = expect(fock_top_projector(p), r.rho).real();
        if (r.fock_tail < kFockTailTolerance) {
            r.amplitude = expect(resonator_annihilation(p), r.rho);
            r.photons = expect(resonator_number(p), r.rho).real();
            r.residual = steady_state_residual(L, r.rho);
            r.params = p;
            return r;
        }
        p.resonator.fock_levels = next_fock(p.resonator.fock_levels);
    }
}

// ---------------------------------------------------------------- sweeps

struct Axis {
    std::string name;
    std::string unit;
    std::vector<double> values;  // in `unit`
};

struct SweepGrid {
    Axis x, y;
    Eigen::MatrixXd values;           // rows follow y, columns follow x; NaN where a point failed
    std::vector<std::string> errors;  // row-major, empty string = ok
    double anchor_value = 1.0;        // raw |<a>| that maps to 1
    double anchor_x = 0.0;            // in x.unit

    [[nodiscard]] std::size_t failures() const {
        return static_cast<std::size_t>(std::count_if(errors.begin(), errors.end(), [](const std::string& e) { return !e.empty(); }));
    }
    [[nodiscard]] std::vector<double> row(std::size_t i) const {
        std::vector<double> r(static_cast<std::size_t>(values.cols()));
        for (Eigen::Index j = 0; j < values.cols(); ++j) r[static_cast<std::size_t>(j)] = values(static_cast<Eigen::Index>(i), j);
        return r;
    }
};

struct SweepOptions {
    std::size_t workers = 0;  // 0 = hardware concurrency
    std::size_t qubit = 0;    // the driven qubit
};

namespace detail {

inline std::vector<double> to_mhz(const std::vector<double>& w) {
    std::vector<double> out;
    for (double v : w) out.push_back(units::to_mhz(v));
    return out;
}

// Runs |<a>| over rows x columns; `configure(p, row, col)` sets the swept values.
template <class Configure>
SweepGrid amplitude_grid(const SystemParams& base, std::size_t rows, std::size_t cols, std::size_t workers,
                         Configure configure) {
    SweepGrid g;
    g.values = Eigen::MatrixXd::Constant(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols),
                                         std::numeric_limits<double>::quiet_NaN());
    g.errors.assign(rows * cols, "");
    const auto results = parallel_map(rows * cols, workers, [&](std::size_t k) {
        SystemParams p = base;
        configure(p, k / cols, k % cols);
        return std::abs(steady_state_adaptive(p).amplitude);
    });
    for (std::size_t k = 0; k < results.size(); ++k) {
        if (results[k].ok())
            g.values(static_cast<Eigen::Index>(k / cols), static_cast<Eigen::Index>(k % cols)) = *results[k].value;
        else
            g.errors[k] = results[k].error;
    }
    return g;
}

inline void normalize(SweepGrid& g, const std::vector<double>& reference, const std::vector<double>& x) {
    std::size_t best = 0;
    for (std::size_t j = 0; j < reference.size(); ++j)
        if (std::isfinite(reference[j]) && (!std::isfinite(reference[best]) || reference[j] > reference[best])) best = j;
    if (!std::isfinite(reference[best]) || !(reference[best] > 0))
        throw DegenerateSolution("sweep: normalization reference vanishes");
    g.anchor_value = reference[best];
    g.anchor_x = x[best];
    g.values /= g.anchor_value;
}

}  // namespace detail

/// |<a>| over (Rabi frequency, probe detuning), normalized so that the maximum
/// of the undriven linecut is 1. Inputs in rad/us; axes reported in MHz.
inline SweepGrid spectroscopy_sweep(const SystemParams& params, const std::vector<double>& detunings,
                                    const std::vector<double>& rabis, const SweepOptions& opt = {}) {
    if (detunings.empty() || rabis.empty()) throw InvalidArgument("spectroscopy_sweep: empty grid");
    validate(params);
    if (opt.qubit >= params.qubits.size()) throw InvalidArgument("spectroscopy_sweep: driven qubit out of range");
    const std::size_t cols = detunings.size();

    // The undriven reference row is appended when the grid lacks it.
    const auto zero = std::find(rabis.begin(), rabis.end(), 0.0);
    std::vector<double> rows = rabis;
    if (zero == rabis.end()) rows.push_back(0.0);

    SweepGrid g = detail::amplitude_grid(params, rows.size(), cols, opt.workers, [&](SystemParams& p, std::size_t i, std::size_t j) {
        p.qubits[opt.qubit].rabi = rows[i];
        p.resonator.delta_omega_r = detunings[j];
    });
    const std::size_t ref_row = zero == rabis.end() ? rows.size() - 1 : static_cast<std::size_t>(zero - rabis.begin());
    const std::vector<double> reference = g.row(ref_row);
    const std::vector<double> x = detail::to_mhz(detunings);
    if (zero == rabis.end()) {
        for (std::size_t j = 0; j < cols; ++j)
            if (!g.errors[ref_row * cols + j].empty()) throw SolverError("spectroscopy_sweep: reference row failed: " + g.errors[ref_row * cols + j]);
        g.values.conservativeResize(static_cast<Eigen::Index>(rabis.size()), Eigen::NoChange);
        g.errors.resize(rabis.size() * cols);
    }
    detail::normalize(g, reference, x);
    g.x = {"delta_omega_r/2pi", "MHz", x};
    g.y = {"Omega_R/2pi", "MHz", detail::to_mhz(rabis)};
    return g;
}

/// |<a>| over (Gamma_updown, probe detuning) with gamma_up = gamma_down =
/// Gamma_updown/2 added to the intrinsic rates. Normalized to the maximum of
/// the intrinsic linecut.
inline SweepGrid incoherent_sweep(const SystemParams& params, const std::vector<double>& gamma_updown,
                                  const std::vector<double>& detunings, const SweepOptions& opt = {}) {
    if (detunings.empty() || gamma_updown.empty()) throw InvalidArgument("incoherent_sweep: empty grid");
    validate(params);
    if (opt.qubit >= params.qubits.size()) throw InvalidArgument("incoherent_sweep: qubit out of range");
    for (const auto& q : params.qubits)
        if (q.rabi != 0.0) throw InvalidArgument("incoherent_sweep: the coherent drive must be off");
    for (double g : gamma_updown)
        if (!(g >= 0)) throw InvalidArgument("incoherent_sweep: negative rate");
    const std::size_t cols = detunings.size();
    std::vector<double> rows = gamma_updown;
    rows.push_back(0.0);

    SweepGrid g = detail::amplitude_grid(params, rows.size(), cols, opt.workers, [&](SystemParams& p, std::size_t i, std::size_t j) {
        p.qubits[opt.qubit].gamma_up += 0.5 * rows[i];
        p.qubits[opt.qubit].gamma_down += 0.5 * rows[i];
        p.resonator.delta_omega_r = detunings[j];
    });
    const std::size_t ref_row = rows.size() - 1;
    for (std::size_t j = 0; j < cols; ++j)
        if (!g.errors[ref_row * cols + j].empty()) throw SolverError("incoherent_sweep: reference row failed: " + g.errors[ref_row * cols + j]);
    const std::vector<double> reference = g.row(ref_row);
    g.values.conservativeResize(static_cast<Eigen::Index>(gamma_updown.size()), Eigen::NoChange);
    g.errors.resize(gamma_updown.size() * cols);
    const std::vector<double> x = detail::to_mhz(detunings);
    detail::normalize(g, reference, x);
    g.x = {"delta_omega_r/2pi", "MHz", x};
    g.y = {"Gamma_updown", "1/us", gamma_updown};
    return g;
}

// ---------------------------------------------------------------- calibration

struct Calibration {
    double drive_amp = 0.0;  // eps_d, rad/us
    double photons = 0.0;    // achieved steady-state <a^dag a>
    std::size_t fock_levels = 0;
    int evaluations = 0;
};

/// eps_d such that the steady state with every qubit drive off holds
/// `target` photons, at the probe detuning in `params`.
inline Calibration calibrate_drive(SystemParams params, double target, double rel_tol = 1e-4) {
    if (!(target >= 0) || !std::isfinite(target)) throw InvalidArgument("calibrate_drive: target must be >= 0");
    for (auto& q : params.qubits) q.rabi = 0.0;
    Calibration c;
    if (target == 0.0) {
        c.fock_levels = params.resonator.fock_levels;
        return c;
    }
    params.resonator.fock_levels = std::max(params.resonator.fock_levels, fock_guess(target));

    auto photons_at = [&](double eps) {
        params.resonator.drive_amp = eps;
        const auto r = steady_state_adaptive(params);
        params.resonator.fock_levels = r.params.resonator.fock_levels;
        ++c.evaluations;
        return r.photons;
    };
    auto done = [&](double n) { return std::abs(n - target) <= rel_tol * target; };

    // <n> is quadratic in eps for a linear cavity: fixed point first.
    double eps = params.resonator.kappa * std::sqrt(target);
    for (int it = 0; it < 12; ++it) {
        const double n = photons_at(eps);
        if (done(n)) {
            c.drive_amp = eps;
            c.photons = n;
            c.fock_levels = params.resonator.fock_levels;
            return c;
        }
        if (!(n > 0)) break;
        eps *= std::sqrt(target / n);
    }

    // Bracket and bisect.
    double lo = 0.0, n_lo = 0.0, hi = std::max(eps, params.resonator.kappa), n_hi = photons_at(hi);
    for (int k = 0; k < 60 && n_hi < target; ++k) {
        lo = hi;
        n_lo = n_hi;
        hi *= 2.0;
        n_hi = photons_at(hi);
    }
    if (n_hi < target) throw CalibrationError("calibrate_drive: could not bracket the photon target");
    for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (lo + hi);
        const double n = photons_at(mid);
        if (n < n_lo || n > n_hi) throw CalibrationError("calibrate_drive: photon number is not monotonic in the drive");
        if (done(n)) {
            c.drive_amp = mid;
            c.photons = n;
            c.fock_levels = params.resonator.fock_levels;
            return c;
        }
        (n < target ? lo : hi) = mid;
        (n < target ? n_lo : n_hi) = n;
    }
    throw CalibrationError("calibrate_drive: bisection did not converge");
}

// ---------------------------------------------------------------- schedules

struct QubitDrive {
    double rabi = 0.0;   // rad/us
    double phase = 0.0;  // rad
    bool operator==(const QubitDrive&) const = default;
};

struct DriveSegment {
    double duration = 0.0;           // us
    std::vector<QubitDrive> drives;  // one per qubit; empty = all off
    double drive_amp = 0.0;          // eps_d, rad/us
};

struct PulseSchedule {
    std::vector<DriveSegment> segments;

    [[nodiscard]] double total_duration() const {
        double t = 0;
        for (const auto& s : segments) t += s.duration;
        return t;
    }
};

/// A drive switched on over [start, end).
struct DriveWindow {
    std::size_t qubit = 0;  // ignored for the cavity
    double start = 0.0, end = 0.0;
    double rabi = 0.0, phase = 0.0;
};

struct CavityWindow {
    double start = 0.0, end = 0.0;
    double drive_amp = 0.0;
};

/// Piecewise-constant schedule of length `total` from overlapping windows.
inline PulseSchedule schedule_from_windows(double total, std::size_t n_qubits, const std::vector<DriveWindow>& qubit_windows,
                                           const std::vector<CavityWindow>& cavity_windows) {
    if (!(total > 0)) throw InvalidArgument("schedule: total duration must be positive");
    std::vector<double> cuts{0.0, total};
    for (const auto& w : qubit_windows) {
        if (w.qubit >= n_qubits) throw InvalidArgument("schedule: qubit index out of range");
        if (!(w.start >= 0 && w.end > w.start && w.end <= total + 1e-12)) throw InvalidArgument("schedule: bad qubit window");
        cuts.push_back(w.start);
        cuts.push_back(std::min(w.end, total));
    }
    for (const auto& w : cavity_windows) {
        if (!(w.start >= 0 && w.end > w.start && w.end <= total + 1e-12)) throw InvalidArgument("schedule: bad cavity window");
        cuts.push_back(w.start);
        cuts.push_back(std::min(w.end, total));
    }
    std::sort(cuts.begin(), cuts.end());
    PulseSchedule s;
    for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
        const double a = cuts[i], b = cuts[i + 1];
        if (b - a <= 1e-12) continue;
        const double mid = 0.5 * (a + b);
        DriveSegment seg;
        seg.duration = b - a;
        seg.drives.assign(n_qubits, {});
        for (const auto& w : qubit_windows)
            if (mid > w.start && mid < w.end) seg.drives[w.qubit] = {w.rabi, w.phase};
        for (const auto& w : cavity_windows)
            if (mid > w.start && mid < w.end) seg.drive_amp += w.drive_amp;
        s.segments.push_back(seg);
    }
    return s;
}

struct RabiTiming {
    double cavity_delay = units::ns(10.0);        // cavity on after the qubit drive starts
    double cavity_early_stop = units::ns(15.0);   // cavity off before the qubit drive ends
};

/// Qubit drive over [0, total] with the cavity tone inside it.
inline PulseSchedule rabi_schedule(const SystemParams& p, double rabi, double drive_amp, double total,
                                   const RabiTiming& timing = {}, std::size_t qubit = 0) {
    std::vector<CavityWindow> cav;
    if (drive_amp != 0.0 && total - timing.cavity_early_stop > timing.cavity_delay)
        cav.push_back({timing.cavity_delay, total - timing.cavity_early_stop, drive_amp});
    return schedule_from_windows(total, p.qubits.size(), {{qubit, 0.0, total, rabi, 0.0}}, cav);
}

namespace detail {

inline SystemParams with_segment(SystemParams p, const DriveSegment& seg) {
    for (std::size_t i = 0; i < p.qubits.size(); ++i) {
        const QubitDrive d = seg.drives.empty() ? QubitDrive{} : seg.drives.at(i);
        p.qubits[i].rabi = d.rabi;
        p.qubits[i].rabi_phase = d.phase;
    }
    p.resonator.drive_amp = seg.drive_amp;
    return p;
}

}  // namespace detail

/// Evolves rho0 through the schedule. Drives in `params` are replaced by the
/// schedule's; everything else (rates, detunings, truncation) is kept.
inline Trajectory run_schedule(const SystemParams& params, const ComplexMatrix& rho0, const PulseSchedule& schedule,
                               const std::vector<double>& t_grid, const std::vector<Observable>& observables,
                               const EvolveOptions& opt = {}) {
    if (schedule.segments.empty()) throw InvalidArgument("run_schedule: empty schedule");
    const auto collapse = build_collapse_ops(params);
    std::vector<LiouvillianSegment> segs;
    double t = 0.0;
    for (const auto& seg : schedule.segments) {
        if (!(seg.duration > 0)) throw InvalidArgument("run_schedule: segment durations must be positive");
        if (!seg.drives.empty() && seg.drives.size() != params.qubits.size())
            throw InvalidArgument("run_schedule: one drive per qubit expected");
        t += seg.duration;
        // reuse the generator of an identical earlier segment
        std::optional<std::size_t> same;
        for (std::size_t i = 0; i < segs.size() && !same; ++i)
            if (schedule.segments[i].drives == seg.drives && schedule.segments[i].drive_amp == seg.drive_amp) same = i;
        if (same)
            segs.push_back({t, segs[*same].generator});
        else
            segs.push_back({t, build_liouvillian(build_hamiltonian(detail::with_segment(params, seg)), collapse)});
    }
    return evolve(rho0, segs, t_grid, observables, opt);
}

/// |g...g> (x) |0>.
inline ComplexMatrix ground_state(const SystemParams& p) {
    const auto d = static_cast<Eigen::Index>(hilbert_space(p).total_dim());
    ComplexMatrix rho = ComplexMatrix::Zero(d, d);
    rho(0, 0) = 1.0;
    return rho;
}

/// Ideal instantaneous rotation of one qubit, embedded in the full space.
inline ComplexMatrix qubit_gate(const SystemParams& p, std::size_t qubit, double phase, double angle) {
    const auto& q = p.qubits.at(qubit);
    ComplexMatrix u = identity(q.n_levels);
    u.topLeftCorner(2, 2) = qubit_rotation(phase, angle);
    return embed(u, hilbert_space(p), qubit);
}

inline ComplexMatrix apply_unitary(const ComplexMatrix& u, const ComplexMatrix& rho) { return u * rho * u.adjoint(); }

inline std::vector<double> uniform_grid(double t_end, double dt) {
    if (!(dt > 0) || !(t_end >= 0)) throw InvalidArgument("uniform_grid: bad spacing");
    const auto n = static_cast<std::size_t>(std::floor(t_end / dt + 1e-9));
    std::vector<double> t(n + 1);
    for (std::size_t i = 0; i <= n; ++i) t[i] = static_cast<double>(i) * dt;
    return t;
}

// ---------------------------------------------------------------- Rabi

struct RabiOptions {
    double dt = units::ns(1.0);
    EvolveOptions evolve;
    bool adapt_fock = true;
};

/// P_e of every qubit, <n> and the top-Fock population from the ground state
/// through the schedule, sampled every dt over [0, t_max]. Series are named
/// "P_e" (qubit 0), "P_e1", ... , "n" and "fock_top".
inline Trajectory simulate_rabi(SystemParams params, const PulseSchedule& schedule, double t_max, const RabiOptions& opt = {}) {
    if (!(t_max > 0)) throw InvalidArgument("simulate_rabi: t_max must be positive");
    if (schedule.total_duration() < t_max - 1e-9) throw InvalidArgument("simulate_rabi: schedule shorter than t_max");
    const auto grid = uniform_grid(t_max, opt.dt);
    for (;;) {
        std::vector<Observable> obs;
        for (std::size_t i = 0; i < params.qubits.size(); ++i)
            obs.push_back({i == 0 ? "P_e" : "P_e" + std::to_string(i), qubit_projector(params, i, 1)});
        obs.push_back({"n", resonator_number(params)});
        obs.push_back({"fock_top", fock_top_projector(params)});
        EvolveOptions eo = opt.evolve;
        eo.positivity_stride = std::max<std::size_t>(eo.positivity_stride, 50);
        Trajectory tr = run_schedule(params, ground_state(params), schedule, grid, obs, eo);
        double tail = 0;
        for (double v : tr.real_series("fock_top")) tail = std::max(tail, v);
        if (!opt.adapt_fock || tail < kFockTailTolerance) return tr;
        params.resonator.fock_levels = next_fock(params.resonator.fock_levels);
    }
}

struct RifledRabiOptions {
    double t_max = units::ns(8000.0);
    double dt = units::ns(1.0);
    std::optional<double> probe_detuning;  // default: resonance of the undriven cavity, -chi
    RabiTiming timing;
    FitOptions fit{units::ns(10.0)};
    EvolveOptions evolve;
    std::size_t workers = 0;
};

struct RifledRabiPoint {
    double rabi = 0.0;         // rad/us
    double photons = 0.0;      // setpoint
    double drive_amp = 0.0;    // calibrated eps_d
    std::size_t fock_levels = 0;
    FitResult fit;
    std::string error;         // empty on success
    FailureKind failure = FailureKind::None;
};

/// Fitted Rabi decay rate across Rabi frequencies for each photon setpoint.
/// Rows are ordered setpoint-major.
inline std::vector<RifledRabiPoint> rifled_rabi_curve(SystemParams params, const std::vector<double>& rabis,
                                                      const std::vector<double>& photon_setpoints,
                                                      const RifledRabiOptions& opt = {}) {
    if (rabis.empty() || photon_setpoints.empty()) throw InvalidArgument("rifled_rabi_curve: empty grid");
    validate(params);
    params.resonator.delta_omega_r = opt.probe_detuning.value_or(-params.qubits.at(0).chi);

    std::vector<Calibration> cal;
    for (double n : photon_setpoints) cal.push_back(calibrate_drive(params, n));

    const std::size_t nr = rabis.size();
    auto results = parallel_map(photon_setpoints.size() * nr, opt.workers, [&](std::size_t k) {
        const Calibration& c = cal[k / nr];
        SystemParams p = params;
        p.resonator.fock_levels = std::max<std::size_t>(c.fock_levels, 3);
        const auto sched = rabi_schedule(p, rabis[k % nr], c.drive_amp, opt.t_max, opt.timing);
        RabiOptions ro;
        ro.dt = opt.dt;
        ro.evolve = opt.evolve;
        const Trajectory tr = simulate_rabi(p, sched, opt.t_max, ro);
        return std::make_pair(fit_rabi_decay(tr, "P_e", opt.fit), p.resonator.fock_levels);
    });

    std::vector<RifledRabiPoint> out;
    for (std::size_t k = 0; k < results.size(); ++k) {
        RifledRabiPoint pt;
        pt.rabi = rabis[k % nr];
        pt.photons = photon_setpoints[k / nr];
        pt.drive_amp = cal[k / nr].drive_amp;
        if (results[k].ok()) {
            pt.fit = results[k].value->first;
            pt.fock_levels = results[k].value->second;
        } else {
            pt.error = results[k].error;
            pt.failure = results[k].failure;
        }
        out.push_back(pt);
    }
    return out;
}

// ---------------------------------------------------------------- Ramsey

enum class RiflingAxis { X, Y, None };

struct RamseyOptions {
    double rifle_rabi = units::mhz(30.0);
    double rifle_start = units::ns(5.0);
    double rifle_duration = units::ns(1132.0);
    double hold = units::ns(1142.0);  // between the two pi/2 pulses
    double cavity_start = units::ns(15.0);
    double cavity_duration = units::ns(500.0);
    double photons = 6.8;
    std::optional<double> probe_detuning;  // default -chi
    double first_phase = 0.0;              // axis of the first pi/2 pulse (0 = x)
    std::size_t qubit = 0;
    EvolveOptions evolve;
};

struct RamseyResult {
    std::vector<double> theta;
    std::vector<double> p_excited;
    double drive_amp = 0.0;

    [[nodiscard]] double contrast() const {
        const auto [lo, hi] = std::minmax_element(p_excited.begin(), p_excited.end());
        return *hi - *lo;
    }
};

/// R^{pi/2}(first_phase), then a hold with the cavity pulse and optional
/// rifling, then R^{pi/2}(first_phase + theta); P_e after the second pulse.
/// Rifling about x is in phase with the first pulse (phase first_phase);
/// about y it is in quadrature and spin-locks the qubit.
inline RamseyResult ramsey_phase_sweep(SystemParams params, const std::vector<double>& thetas, RiflingAxis axis,
                                       const RamseyOptions& opt = {}) {
    if (thetas.empty()) throw InvalidArgument("ramsey_phase_sweep: empty theta grid");
    validate(params);
    if (opt.qubit >= params.qubits.size()) throw InvalidArgument("ramsey_phase_sweep: qubit out of range");
    if (!(opt.hold > 0)) throw InvalidArgument("ramsey_phase_sweep: hold must be positive");
    for (auto& q : params.qubits) q.rabi = 0.0;
    params.resonator.delta_omega_r = opt.probe_detuning.value_or(-params.qubits[opt.qubit].chi);

    RamseyResult res;
    if (opt.photons > 0) {
        const Calibration c = calibrate_drive(params, opt.photons);
        res.drive_amp = c.drive_amp;
        params.resonator.fock_levels = std::max<std::size_t>(c.fock_levels, 3);
    }

    std::vector<DriveWindow> qw;
    if (axis != RiflingAxis::None) {
        const double phase = opt.first_phase + (axis == RiflingAxis::Y ? 0.5 * std::numbers::pi : 0.0);
        qw.push_back({opt.qubit, opt.rifle_start, std::min(opt.hold, opt.rifle_start + opt.rifle_duration), opt.rifle_rabi, phase});
    }
    std::vector<CavityWindow> cw;
    if (res.drive_amp != 0.0)
        cw.push_back({opt.cavity_start, std::min(opt.hold, opt.cavity_start + opt.cavity_duration), res.drive_amp});
    const PulseSchedule sched = schedule_from_windows(opt.hold, params.qubits.size(), qw, cw);

    const ComplexMatrix rho0 = apply_unitary(qubit_gate(params, opt.qubit, opt.first_phase, 0.5 * std::numbers::pi), ground_state(params));
    for (;;) {
        EvolveOptions eo = opt.evolve;
        const Trajectory tr = run_schedule(params, rho0, sched, {opt.hold}, {{"fock_top", fock_top_projector(params)}}, eo);
        if (tr.real_series("fock_top").back() >= kFockTailTolerance) {
            params.resonator.fock_levels = next_fock(params.resonator.fock_levels);
            continue;
        }
        const ComplexMatrix pe = qubit_projector(params, opt.qubit, 1);
        for (double th : thetas) {
            const ComplexMatrix u = qubit_gate(params, opt.qubit, opt.first_phase + th, 0.5 * std::numbers::pi);
            res.theta.push_back(th);
            res.p_excited.push_back(expect(pe, apply_unitary(u, tr.final_state)).real());
        }
        return res;
    }
}

// ---------------------------------------------------------------- misc

/// Rabi frequency (rad/us) for a drive power in dBm on the measured setup:
/// Omega_R/2pi = 11.2 * 10^((A + 19.85)/20 + 6) Hz. Setup-specific.
inline double dbm_to_rabi(double dbm) {
    const double hz = 11.2 * std::pow(10.0, (dbm + 19.85) / 20.0 + 6.0);
    return units::kTwoPi * hz * 1e-6;
}

}  // namespace rifling
