#pragma once

// Physical parameters and operator builders for the four-level
// atom-cavity system |g2,0>, |g1,0>, |e,0>, |g2,1>.
//
// All frequencies are angular (rad/us); see units.hpp.

#include <Eigen/Dense>

#include <string>
#include <vector>

namespace ceit {

enum class Axis { Z, Y };

std::string to_string(Axis axis);
Axis axis_from_string(const std::string& s);

/// Complete description of the driven atom-cavity system and the trap.
///
/// Decay rates gamma and kappa are amplitude (HWHM) rates: the excited-state
/// population decays at 2*gamma and the cavity photon number at 2*kappa.
/// Detunings follow Delta_XA = omega_X - omega_atom.
struct SystemParams {
    double g = 0.0;          ///< vacuum Rabi frequency at the antinode
    double omega_l = 0.0;    ///< control Rabi frequency
    double omega_p = 0.0;    ///< probe drive strength
    double gamma = 0.0;      ///< atomic dipole decay rate
    double kappa = 0.0;      ///< cavity field decay rate
    double delta_ca = 0.0;   ///< cavity-atom detuning
    double delta_la = 0.0;   ///< control-atom detuning
    double delta_pa = 0.0;   ///< probe-atom detuning
    double omega_z = 0.0;    ///< trap frequency along the cavity axis
    double omega_y = 0.0;    ///< trap frequency along the control axis
    double omega_rec = 0.0;  ///< recoil frequency
    double kx0 = 0.0;        ///< trap centre offset from the cavity antinode (rad)
    double beta1 = 0.5;      ///< branching of |e> into |g1>; |g2> gets 1 - beta1
    double alpha_z = 0.4;    ///< recoil projection factor along z
    double alpha_y = 0.4;    ///< recoil projection factor along y

    /// Values of the CEIT experiment (g, gamma, kappa, Omega_L, Omega_P,
    /// Delta_CA = 2pi 16 MHz, trap frequencies 0.2 / 0.3 MHz, recoil
    /// 2pi 2.07 kHz), with Delta_LA = Delta_PA = Delta_CA and k x0 = pi/4.
    static SystemParams experiment_defaults();

    double beta2() const { return 1.0 - beta1; }
    double delta_pc() const { return delta_pa - delta_ca; }
    double delta_pl() const { return delta_pa - delta_la; }
    double delta_lc() const { return delta_la - delta_ca; }
    double g_eff() const;
    double cooperativity() const;

    double trap_frequency(Axis axis) const { return axis == Axis::Z ? omega_z : omega_y; }
    double alpha(Axis axis) const { return axis == Axis::Z ? alpha_z : alpha_y; }
    double eta(Axis axis) const;

    /// Sets Delta_PA so that delta_PC takes the given value.
    SystemParams& set_delta_pc(double value)
    {
        delta_pa = delta_ca + value;
        return *this;
    }

    /// Throws ParameterError if any invariant is violated.
    void validate() const;

    /// Soft issues: Lamb-Dicke parameters above 0.3 on either axis.
    std::vector<std::string> warnings() const;
};

/// Ordered basis of the internal four-level space.
namespace basis {
inline constexpr int kG2Vac = 0;   // |g2,0>
inline constexpr int kG1Vac = 1;   // |g1,0>
inline constexpr int kEVac = 2;    // |e,0>
inline constexpr int kG2Photon = 3;  // |g2,1>
inline constexpr int kDim = 4;
}  // namespace basis

/// Ordered basis of the single-excitation block used by the dressed-state
/// and rate calculations: (|g1,0>, |g2,1>, |e,0>).
namespace block {
inline constexpr int kG1 = 0;
inline constexpr int kCav = 1;
inline constexpr int kE = 2;
}  // namespace block

enum class OperatorKind { Hamiltonian, Drive, MechCoupling, DecayChannel };

enum class DecayChannel { Cavity, AtomToG1, AtomToG2 };

struct OperatorLabel {
    OperatorKind kind = OperatorKind::Hamiltonian;
    Axis axis = Axis::Z;                    // MechCoupling only
    DecayChannel channel = DecayChannel::Cavity;  // DecayChannel only
};

/// A 4x4 operator on the internal basis together with what it represents.
struct InternalOperator {
    Eigen::Matrix4cd matrix = Eigen::Matrix4cd::Zero();
    OperatorLabel label;
};

/// Rotating-frame, non-Hermitian Hamiltonian without the probe drive:
/// diag(0, -delta_PL, -Delta_PA - i gamma, -delta_PC - i kappa) with the
/// control coupling Omega_L/2 on |g1,0>-|e,0> and g_eff on |g2,1>-|e,0>.
InternalOperator build_effective_hamiltonian(const SystemParams& p);

/// Probe drive Omega_P/2 between |g2,0> and |g2,1>.
InternalOperator build_drive(const SystemParams& p);

/// Linear mechanical coupling operator W for motion along the given axis;
/// the full coupling is W (b + b^dagger). Carries one power of eta.
InternalOperator build_mech_coupling(const SystemParams& p, Axis axis);

/// Jump operators with their rates folded in: sqrt(2 kappa) for the cavity,
/// sqrt(2 gamma beta_i) for the two atomic channels.
std::vector<InternalOperator> build_decay_channels(const SystemParams& p);

/// Single-excitation block H1 in the probe frame over (|g1,0>, |g2,1>, |e,0>).
Eigen::Matrix3cd single_excitation_block(const SystemParams& p);

/// The same block with the probe detuning removed: H1 = -delta_PC * I + M.
/// Eigenvalues of M are the dressed-state frequencies on the delta_PC axis.
Eigen::Matrix3cd probe_independent_block(const SystemParams& p);

/// Mechanical coupling restricted to the single-excitation block.
Eigen::Matrix3cd mech_coupling_block(const SystemParams& p, Axis axis);

/// Weak-drive intracavity photon number. Without the atom this is the
/// empty-cavity Lorentzian; with the atom it is |c_cav|^2 of the first-order
/// steady-state amplitudes.
double intracavity_photon_number(const SystemParams& p, bool with_atom);

/// sqrt(omega_rec / omega_trap).
double lamb_dicke(double omega_trap, double omega_rec);

}  // namespace ceit
