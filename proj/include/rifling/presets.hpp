#pragma once

// Device parameters of the two qubits sharing one resonator.

#include "rifling/model.hpp"
#include "rifling/units.hpp"

namespace rifling::presets {

inline constexpr double kKappaMHz = 0.95;
inline constexpr double kQubit1ChiMHz = 4.1;
inline constexpr double kQubit1T1 = 5.1;   // us
inline constexpr double kQubit1T2 = 5.91;  // us, Ramsey
inline constexpr double kQubit1G0MHz = 93.1;
inline constexpr double kQubit2ChiMHz = 3.9;
inline constexpr double kQubit2T1 = 1.87;
inline constexpr double kQubit2T2 = 3.39;
inline constexpr double kQubit2G0MHz = 68.4;
// Not quoted for the device; a typical transmon value.
inline constexpr double kAnharmonicityMHz = 220.0;

inline constexpr double kRiflingRabiMHz = 30.0;
inline constexpr double kRiflingDurationNs = 1132.0;
inline constexpr double kProtocolDurationNs = 1142.0;
inline constexpr double kReadoutPhotons = 6.8;
inline constexpr double kCavityPulseNs = 500.0;
inline const std::vector<double> kPhotonSetpoints{0.0, 0.13, 2.1, 6.8};

inline QubitParams qubit_from(double chi_mhz, double t1, double t2) {
    QubitParams q;
    q.chi = units::mhz(chi_mhz);
    q.gamma_down = 1.0 / t1;
    q.gamma_phi = std::max(0.0, 1.0 / t2 - 0.5 / t1);
    return q;
}

inline QubitParams qubit1() { return qubit_from(kQubit1ChiMHz, kQubit1T1, kQubit1T2); }
inline QubitParams qubit2() { return qubit_from(kQubit2ChiMHz, kQubit2T1, kQubit2T2); }

inline QubitParams as_transmon(QubitParams q, double g0_mhz, std::size_t levels = 3) {
    q.n_levels = levels;
    q.g0 = units::mhz(g0_mhz);
    q.anharmonicity = units::mhz(kAnharmonicityMHz);
    return q;
}

inline ResonatorParams resonator(std::size_t fock = 6) {
    ResonatorParams r;
    r.kappa = units::mhz(kKappaMHz);
    r.fock_levels = fock;
    return r;
}

/// Qubit 1 alone with the resonator, two-level model.
inline SystemParams qubit1_system() {
    SystemParams p;
    p.qubits = {qubit1()};
    p.resonator = resonator();
    return p;
}

inline SystemParams qubit2_system() {
    SystemParams p;
    p.qubits = {qubit2()};
    p.resonator = resonator();
    return p;
}

/// Qubit 1 as a three-level transmon.
inline SystemParams qubit1_transmon_system() {
    SystemParams p;
    p.qubits = {as_transmon(qubit1(), kQubit1G0MHz)};
    p.resonator = resonator();
    return p;
}

/// Both qubits on the shared resonator.
inline SystemParams two_qubit_system() {
    SystemParams p;
    p.qubits = {qubit1(), qubit2()};
    p.resonator = resonator();
    return p;
}

}  // namespace rifling::presets
