#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "rifling/presets.hpp"
#include "rifling/tomo.hpp"
#include "test_util.hpp"

using namespace rifling;
using testutil::max_abs;

namespace {

// rho_{(a b c),(a' b' c')} summed over c = c', written out with explicit loops.
ComplexMatrix trace_last_of_three(const ComplexMatrix& rho, int da, int db, int dc) {
    ComplexMatrix out = ComplexMatrix::Zero(da * db, da * db);
    for (int a = 0; a < da; ++a)
        for (int b = 0; b < db; ++b)
            for (int a2 = 0; a2 < da; ++a2)
                for (int b2 = 0; b2 < db; ++b2)
                    for (int c = 0; c < dc; ++c)
                        out(a * db + b, a2 * db + b2) += rho((a * db + b) * dc + c, (a2 * db + b2) * dc + c);
    return out;
}

ComplexMatrix trace_middle_of_three(const ComplexMatrix& rho, int da, int db, int dc) {
    ComplexMatrix out = ComplexMatrix::Zero(da * dc, da * dc);
    for (int a = 0; a < da; ++a)
        for (int c = 0; c < dc; ++c)
            for (int a2 = 0; a2 < da; ++a2)
                for (int c2 = 0; c2 < dc; ++c2)
                    for (int b = 0; b < db; ++b)
                        out(a * dc + c, a2 * dc + c2) += rho((a * db + b) * dc + c, (a2 * db + b) * dc + c2);
    return out;
}

ComplexMatrix kron_ref(const ComplexMatrix& a, const ComplexMatrix& b) {
    ComplexMatrix k(a.rows() * b.rows(), a.cols() * b.cols());
    for (Eigen::Index i = 0; i < a.rows(); ++i)
        for (Eigen::Index j = 0; j < a.cols(); ++j) k.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
    return k;
}

SystemParams ideal_pair() {
    SystemParams p = presets::two_qubit_system();
    for (auto& q : p.qubits) q.gamma_down = q.gamma_phi = 0;
    return p;
}

SystemParams t1_pair() {
    SystemParams p = presets::two_qubit_system();
    for (auto& q : p.qubits) q.gamma_phi = 0;
    return p;
}

}  // namespace

TEST(PartialTrace, ProductState) {
    std::mt19937_64 rng(1);
    const ComplexMatrix a = testutil::random_density(rng, 2), b = testutil::random_density(rng, 3);
    const HilbertSpace s({2, 3});
    EXPECT_LT(max_abs(partial_trace(kron_ref(a, b), s, {0}) - a), 1e-12);
    EXPECT_LT(max_abs(partial_trace(kron_ref(a, b), s, {1}) - b), 1e-12);
}

TEST(PartialTrace, BellStateGivesMaximallyMixed) {
    ComplexVector psi = ComplexVector::Zero(4);
    psi(0) = psi(3) = 1 / std::sqrt(2.0);
    const ComplexMatrix r = partial_trace(testutil::pure(psi), HilbertSpace({2, 2}), {1});
    EXPECT_LT(max_abs(r - 0.5 * ComplexMatrix::Identity(2, 2)), 1e-12);
}

TEST(PartialTrace, MatchesIndexContraction) {
    std::mt19937_64 rng(2);
    const HilbertSpace s({2, 3, 4});
    for (int k = 0; k < 5; ++k) {
        const ComplexMatrix rho = testutil::random_density(rng, 24);
        const ComplexMatrix r01 = partial_trace(rho, s, {0, 1});
        EXPECT_NEAR(std::abs(r01.trace() - Complex(1, 0)), 0.0, 1e-12);
        EXPECT_LT(max_abs(r01 - trace_last_of_three(rho, 2, 3, 4)), 1e-12);
        EXPECT_LT(max_abs(partial_trace(rho, s, {2, 0}) - trace_middle_of_three(rho, 2, 3, 4)), 1e-12);
    }
}

TEST(PartialTrace, CommutesWithMixtures) {
    std::mt19937_64 rng(3);
    const HilbertSpace s({2, 2, 3});
    const ComplexMatrix x = testutil::random_density(rng, 12), y = testutil::random_density(rng, 12);
    const ComplexMatrix lhs = partial_trace(0.3 * x + 0.7 * y, s, {1});
    const ComplexMatrix rhs = 0.3 * partial_trace(x, s, {1}) + 0.7 * partial_trace(y, s, {1});
    EXPECT_LT(max_abs(lhs - rhs), 1e-12);
}

TEST(PartialTrace, RejectsBadFactorSets) {
    const ComplexMatrix rho = ComplexMatrix::Identity(4, 4) / 4.0;
    const HilbertSpace s({2, 2});
    EXPECT_THROW(partial_trace(rho, s, {}), InvalidArgument);
    EXPECT_THROW(partial_trace(rho, s, {2}), InvalidArgument);
    EXPECT_THROW(partial_trace(rho, s, {0, 0}), InvalidArgument);
    EXPECT_THROW(partial_trace(rho, HilbertSpace({2, 3}), {0}), InvalidArgument);
}

TEST(DensityMatrixType, EnforcesInvariants) {
    EXPECT_NO_THROW(DensityMatrix(ComplexMatrix::Identity(2, 2) / 2.0));
    ComplexMatrix m = ComplexMatrix::Identity(2, 2) / 2.0;
    m(0, 1) = 0.1;
    EXPECT_THROW(DensityMatrix{m}, InvalidArgument);  // not Hermitian
    EXPECT_THROW(DensityMatrix(ComplexMatrix::Identity(2, 2)), InvalidArgument);
    ComplexMatrix neg = ComplexMatrix::Zero(2, 2);
    neg(0, 0) = 1.2;
    neg(1, 1) = -0.2;
    EXPECT_THROW(DensityMatrix{neg}, NotPositiveSemidefinite);
    EXPECT_THROW(DensityMatrix(ComplexMatrix::Identity(2, 2) / 2.0, HilbertSpace({3})), InvalidArgument);
}

TEST(Fidelity, PureStates) {
    ComplexVector a = ComplexVector::Zero(2), b = ComplexVector::Zero(2);
    a(0) = 1;
    b(1) = 1;
    EXPECT_NEAR(fidelity(testutil::pure(a), testutil::pure(a)), 1.0, 1e-10);
    EXPECT_NEAR(fidelity(testutil::pure(a), testutil::pure(b)), 0.0, 1e-10);
}

TEST(Fidelity, PureAgainstMixedIsOverlap) {
    std::mt19937_64 rng(4);
    for (int k = 0; k < 20; ++k) {
        ComplexVector psi = testutil::random_matrix(rng, 4).col(0);
        psi.normalize();
        const ComplexMatrix rho = testutil::random_density(rng, 4);
        const double want = (psi.adjoint() * rho * psi)(0, 0).real();
        EXPECT_NEAR(fidelity(testutil::pure(psi), rho), want, 1e-10);
        EXPECT_NEAR(fidelity(rho, testutil::pure(psi)), want, 1e-9);
    }
}

TEST(Fidelity, SymmetricAndBounded) {
    std::mt19937_64 rng(5);
    for (int k = 0; k < 100; ++k) {
        const ComplexMatrix r = testutil::random_density(rng, 4), s = testutil::random_density(rng, 4);
        const double f = fidelity(r, s);
        EXPECT_NEAR(f, fidelity(s, r), 1e-9);
        EXPECT_GE(f, 0.0);
        EXPECT_LE(f, 1.0 + 1e-9);
        EXPECT_NEAR(fidelity(r, r), 1.0, 1e-10);
    }
    EXPECT_THROW(fidelity(ComplexMatrix::Identity(2, 2), ComplexMatrix::Identity(3, 3)), InvalidArgument);
}

TEST(AmplitudeDamp, ScalesPopulationAndCoherence) {
    ComplexMatrix rho = ComplexMatrix::Constant(2, 2, 0.5);
    const ComplexMatrix out = amplitude_damp(rho, HilbertSpace({2}), 0, 0.5, 2.0);
    EXPECT_NEAR(out(1, 1).real(), 0.5 * std::exp(-1.0), 1e-14);
    EXPECT_NEAR(std::abs(out(0, 1)), 0.5 * std::exp(-0.5), 1e-14);
    EXPECT_NEAR(out.trace().real(), 1.0, 1e-14);
}

TEST(Tomography, IdleIdealPairIsProductSuperposition) {
    TomographyOptions o;
    o.photons = 0;
    const auto r = rifled_tomography_protocol(ideal_pair(), RifleTarget::None, units::ns(1142.0), o);
    EXPECT_NEAR(r.fidelity_vs_ideal, 1.0, 1e-6);
    // (|g> - |e>)/sqrt2 on each qubit in this frame: |rho_01| = 1/2, purity 1
    for (double c : r.coherences) EXPECT_NEAR(c, 0.5, 1e-6);
    EXPECT_NEAR((r.joint.matrix() * r.joint.matrix()).trace().real(), 1.0, 1e-6);
}

TEST(Tomography, CavityPulseCollapsesBothQubits) {
    const auto r = rifled_tomography_protocol(t1_pair(), RifleTarget::None, units::ns(1142.0));
    EXPECT_LT(r.coherences[0], 0.05);
    EXPECT_LT(r.coherences[1], 0.05);
    EXPECT_LT(r.max_trace_drift, 1e-8);
    EXPECT_GE(r.min_eigenvalue, -1e-8);
}

TEST(Tomography, RiflingProtectsTheTarget) {
    const auto r = rifled_tomography_protocol(t1_pair(), RifleTarget::Qubit1, units::ns(1142.0));
    EXPECT_GT(r.coherences[0], 0.3);
    EXPECT_LT(r.coherences[1], 0.05);
    EXPECT_GT(r.target_fidelity, 0.9);
    // the joint state passed the DensityMatrix checks on construction
    EXPECT_EQ(r.joint.dim(), 4);
    EXPECT_LT(r.max_trace_drift, 1e-8);
}

TEST(Tomography, RejectsWrongModels) {
    EXPECT_THROW(rifled_tomography_protocol(presets::qubit1_system(), RifleTarget::None, 1.0), InvalidArgument);
    SystemParams p = presets::two_qubit_system();
    p.qubits[0] = presets::as_transmon(p.qubits[0], presets::kQubit1G0MHz);
    EXPECT_THROW(rifled_tomography_protocol(p, RifleTarget::None, 1.0), UnsupportedModel);
    EXPECT_THROW(rifled_tomography_protocol(presets::two_qubit_system(), RifleTarget::None, 0.0), InvalidArgument);
}

TEST(Dephasing, EchoTimeAsPrinted) {
    EXPECT_EQ(echo_dephasing_time({1.0, 0.0, 0.0}), 0.0);
    EXPECT_NEAR(echo_dephasing_time({1.0, 1.0, 0.0}), 0.8325546111576977, 1e-12);
    EXPECT_NEAR(echo_dephasing_time({2.0, 4.0, 0.0}) / echo_dephasing_time({2.0, 1.0, 0.0}), 2.0, 1e-12);
    EXPECT_NEAR(echo_dephasing_time_reciprocal({1.0, 1.0, 0.0}), 1 / 0.8325546111576977, 1e-12);
    EXPECT_TRUE(std::isinf(echo_dephasing_time_reciprocal({1.0, 0.0, 0.0})));
    EXPECT_THROW(echo_dephasing_time({1.0, -1.0, 0.0}), InvalidArgument);
}

TEST(Dephasing, PhaseDriftCoherence) {
    EXPECT_EQ(phase_drift_coherence(0.0), 1.0);
    EXPECT_NEAR(phase_drift_coherence(1e-8), 1 - 2.5e-9, 1e-15);
    EXPECT_NEAR(phase_drift_coherence(4.0), std::exp(-1.0), 1e-15);
    EXPECT_THROW(phase_drift_coherence(-1.0), InvalidArgument);
}
