#include <gtest/gtest.h>

#include <atomic>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <vector>

#include "rifling/experiments.hpp"
#include "rifling/moments.hpp"
#include "rifling/parallel.hpp"
#include "rifling/presets.hpp"
#include "rifling/units.hpp"

using namespace rifling;

namespace {

SystemParams weak_qubit1() {
    SystemParams p = presets::qubit1_system();
    p.resonator.drive_amp = p.resonator.kappa / 1000;
    return p;
}

std::vector<double> mhz_range(double a, double b, std::size_t n) {
    std::vector<double> v;
    for (std::size_t i = 0; i < n; ++i) v.push_back(units::mhz(a + (b - a) * static_cast<double>(i) / static_cast<double>(n - 1)));
    return v;
}

}  // namespace

TEST(ParallelMap, OrderAndFailures) {
    std::atomic<int> calls{0};
    const auto r = parallel_map(50, 3, [&](std::size_t k) {
        ++calls;
        if (k == 7) throw SolverError("boom");
        if (k == 9) throw InvalidArgument("bad");
        return static_cast<int>(k * k);
    });
    ASSERT_EQ(r.size(), 50u);
    EXPECT_EQ(calls.load(), 50);
    for (std::size_t k = 0; k < 50; ++k) {
        if (k == 7) {
            EXPECT_EQ(r[k].failure, FailureKind::Solver);
        } else if (k == 9) {
            EXPECT_EQ(r[k].failure, FailureKind::InvalidArgument);
        } else {
            ASSERT_TRUE(r[k].ok());
            EXPECT_EQ(*r[k].value, static_cast<int>(k * k));
        }
    }
}

TEST(Schedule, WindowsSplitIntoSegments) {
    const auto s = schedule_from_windows(1.0, 2, {{0, 0.1, 0.9, 3.0, 0.5}, {1, 0.0, 0.5, 2.0, 0.0}}, {{0.2, 0.7, 4.0}});
    EXPECT_NEAR(s.total_duration(), 1.0, 1e-12);
    for (const auto& seg : s.segments) EXPECT_GT(seg.duration, 0.0);
    ASSERT_EQ(s.segments.size(), 6u);  // cuts at 0, .1, .2, .5, .7, .9, 1
    EXPECT_EQ(s.segments[0].drives[0].rabi, 0.0);
    EXPECT_EQ(s.segments[0].drives[1].rabi, 2.0);
    EXPECT_EQ(s.segments[2].drive_amp, 4.0);
    EXPECT_EQ(s.segments[2].drives[0].phase, 0.5);
    EXPECT_EQ(s.segments[5].drives[0].rabi, 0.0);
    EXPECT_THROW(schedule_from_windows(1.0, 1, {{1, 0, 1, 1, 0}}, {}), InvalidArgument);
    EXPECT_THROW(schedule_from_windows(1.0, 1, {{0, 0.5, 0.4, 1, 0}}, {}), InvalidArgument);
    EXPECT_THROW(schedule_from_windows(0.0, 1, {}, {}), InvalidArgument);
}

TEST(Schedule, RabiTimingOffsets) {
    const SystemParams p = presets::qubit1_system();
    const auto s = rabi_schedule(p, 1.0, 2.0, 8.0);
    ASSERT_EQ(s.segments.size(), 3u);
    EXPECT_NEAR(s.segments[0].duration, units::ns(10.0), 1e-12);
    EXPECT_EQ(s.segments[0].drive_amp, 0.0);
    EXPECT_EQ(s.segments[1].drive_amp, 2.0);
    EXPECT_NEAR(s.segments[2].duration, units::ns(15.0), 1e-12);
    for (const auto& seg : s.segments) EXPECT_EQ(seg.drives[0].rabi, 1.0);
}

TEST(Calibration, RoundTripWithinOnePercent) {
    SystemParams p = presets::qubit1_system();
    p.resonator.delta_omega_r = -p.qubits[0].chi;
    for (double n : {0.13, 2.1, 6.8}) {
        const Calibration c = calibrate_drive(p, n);
        SystemParams q = p;
        q.resonator.drive_amp = c.drive_amp;
        q.resonator.fock_levels = c.fock_levels;
        EXPECT_NEAR(steady_state_adaptive(q).photons, n, 0.01 * n) << n;
    }
    EXPECT_EQ(calibrate_drive(p, 0.0).drive_amp, 0.0);
    EXPECT_THROW(calibrate_drive(p, -1.0), InvalidArgument);
}

TEST(SteadyStateAdaptive, RaisesFockUntilTailSmall) {
    SystemParams p = presets::qubit1_system();
    p.resonator.fock_levels = 4;
    p.resonator.delta_omega_r = -p.qubits[0].chi;
    p.resonator.drive_amp = units::mhz(2.0);
    const auto r = steady_state_adaptive(p);
    EXPECT_GT(r.params.resonator.fock_levels, 4u);
    EXPECT_LT(r.fock_tail, kFockTailTolerance);
    EXPECT_LT(r.residual, 1e-10);
}

TEST(SpectroscopySweep, UndrivenRowHasPeaksAtPlusMinusChi) {
    SystemParams p = weak_qubit1();
    p.qubits[0].gamma_up = p.qubits[0].gamma_down;  // populate both states
    const auto g = spectroscopy_sweep(p, mhz_range(-10, 10, 401), {0.0});
    const auto peaks = find_peaks(g.row(0), g.x.values);
    ASSERT_EQ(peaks.size(), 2u);
    EXPECT_NEAR(peaks[0].x, -4.1, 0.05);
    EXPECT_NEAR(peaks[1].x, 4.1, 0.05);
    EXPECT_NEAR(peaks[1].x - peaks[0].x, 8.2, 0.1);
    EXPECT_NEAR(g.values.maxCoeff(), 1.0, 1e-12);
}

TEST(SpectroscopySweep, NormalisationAnchor) {
    const SystemParams p = weak_qubit1();
    const auto g = spectroscopy_sweep(p, mhz_range(-8, 8, 81), {units::mhz(10.0)});
    EXPECT_EQ(g.values.rows(), 1);  // reference row dropped
    EXPECT_EQ(g.y.values.size(), 1u);
    EXPECT_NEAR(g.y.values[0], 10.0, 1e-12);
    EXPECT_GT(g.anchor_value, 0.0);
    EXPECT_NEAR(g.anchor_x, -4.1, 0.1);  // ground-state peak
    EXPECT_EQ(g.failures(), 0u);
}

TEST(SpectroscopySweep, MatchesWeakDriveClosure) {
    SystemParams p = weak_qubit1();
    p.resonator.fock_levels = 4;
    const auto det = mhz_range(-12, 12, 49);
    for (double f : {0.0, 5.0, 30.0}) {
        const auto g = spectroscopy_sweep(p, det, {units::mhz(f)});
        for (std::size_t j = 0; j < det.size(); ++j) {
            SystemParams q = p;
            q.qubits[0].rabi = units::mhz(f);
            q.resonator.delta_omega_r = det[j];
            const double want = std::abs(weak_drive_steady_state(q).a) / g.anchor_value;
            EXPECT_NEAR(g.values(0, static_cast<Eigen::Index>(j)), want, 0.02 * want) << f << " " << j;
        }
    }
}

TEST(SpectroscopySweep, TransmonCentralPeakSplitsAgain) {
    SystemParams p = presets::qubit1_transmon_system();
    p.resonator.drive_amp = p.resonator.kappa / 1000;
    const auto g = spectroscopy_sweep(p, mhz_range(-15, 15, 301), {units::mhz(100.0)});
    EXPECT_GE(find_peaks(g.row(0), g.x.values).size(), 2u);
}

TEST(SpectroscopySweep, DeterministicAcrossWorkerCounts) {
    const SystemParams p = weak_qubit1();
    const auto det = mhz_range(-6, 6, 25);
    const std::vector<double> rabi{0.0, units::mhz(3.0), units::mhz(40.0)};
    const auto a = spectroscopy_sweep(p, det, rabi, {1, 0});
    const auto b = spectroscopy_sweep(p, det, rabi, {3, 0});
    ASSERT_EQ(a.values.size(), b.values.size());
    for (Eigen::Index i = 0; i < a.values.size(); ++i) EXPECT_EQ(a.values.data()[i], b.values.data()[i]);
}

TEST(IncoherentSweep, MatchesClosedForm) {
    SystemParams p = weak_qubit1();
    p.resonator.fock_levels = 4;
    const auto det = mhz_range(-10, 10, 41);
    const std::vector<double> gammas{0.01, 1.0, 100.0};
    const auto g = incoherent_sweep(p, gammas, det);
    for (std::size_t i = 0; i < gammas.size(); ++i)
        for (std::size_t j = 0; j < det.size(); ++j) {
            SystemParams q = p;
            q.qubits[0].gamma_up += 0.5 * gammas[i];
            q.qubits[0].gamma_down += 0.5 * gammas[i];
            q.resonator.delta_omega_r = det[j];
            const double want = std::abs(incoherent_steady_state(q).a) / g.anchor_value;
            EXPECT_NEAR(g.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)), want, 0.01 * want);
        }
}

TEST(IncoherentSweep, FastMixingMergesPeaks) {
    const SystemParams p = weak_qubit1();
    const auto g = incoherent_sweep(p, {1.0, 1000.0}, mhz_range(-12, 12, 241));
    EXPECT_EQ(find_peaks(g.row(0), g.x.values).size(), 2u);
    EXPECT_EQ(find_peaks(g.row(1), g.x.values).size(), 1u);
}

TEST(IncoherentSweep, RejectsCoherentDrive) {
    SystemParams p = weak_qubit1();
    p.qubits[0].rabi = 1.0;
    EXPECT_THROW(incoherent_sweep(p, {1.0}, {0.0}), InvalidArgument);
}

TEST(Ramsey, IdealFringe) {
    SystemParams p = presets::qubit2_system();
    p.qubits[0].gamma_down = p.qubits[0].gamma_phi = 0;
    p.resonator.fock_levels = 3;
    RamseyOptions o;
    o.photons = 0;
    std::vector<double> th;
    for (int k = 0; k <= 12; ++k) th.push_back(k * std::numbers::pi / 6);
    const auto r = ramsey_phase_sweep(p, th, RiflingAxis::None, o);
    for (std::size_t k = 0; k < th.size(); ++k) EXPECT_NEAR(r.p_excited[k], 0.5 * (1 + std::cos(th[k])), 1e-6);
}

TEST(Ramsey, CavityCollapsesUnlessSpinLocked) {
    const SystemParams p = presets::qubit2_system();
    std::vector<double> th;
    for (int k = 0; k < 8; ++k) th.push_back(k * std::numbers::pi / 4);
    RamseyOptions dark;
    dark.photons = 0;
    const double reference = ramsey_phase_sweep(p, th, RiflingAxis::Y, dark).contrast();
    const auto none = ramsey_phase_sweep(p, th, RiflingAxis::None);
    const auto y = ramsey_phase_sweep(p, th, RiflingAxis::Y);
    EXPECT_LT(none.contrast(), 0.05);
    EXPECT_GT(y.contrast(), 0.5 * reference);
    EXPECT_GT(none.drive_amp, 0.0);
}

TEST(Units, DbmConversion) {
    EXPECT_NEAR(units::to_mhz(dbm_to_rabi(-19.85)), 11.2, 1e-12);
    EXPECT_NEAR(dbm_to_rabi(0.15) / dbm_to_rabi(-19.85), 10.0, 1e-12);
}
