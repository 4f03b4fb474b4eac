#pragma once

// Heating and cooling rates A+- of one motional axis in the Lamb-Dicke
// regime, the cooling rate Gamma = A- - A+ and the stationary occupation.
//
// Three routes are provided:
//  - rates_resolvent: second-order resolvent perturbation theory on the
//    single-excitation block (carrier -> mechanical vertex -> sideband
//    resolvent -> decay channel), valid anywhere in the weak-probe regime.
//    ProbeModel::Saturated instead takes the force spectrum of the full
//    four-level internal master equation, which keeps probe saturation and
//    depletion of |g2,0>; channels are then still the weak-probe ones;
//  - rates_ceit_analytic: closed form on the EIT line delta_PL = 0;
//  - rates_free_space_eit: the same machinery for a three-level atom
//    without cavity, probe on |g2>-|e>.
//
// Rates are in 1/us.

#include "ceit/model.hpp"

#include <Eigen/Dense>

#include <optional>
#include <string>
#include <vector>

namespace ceit {

enum class RateMethod { Resolvent, CeitAnalytic, FreeSpaceEit };
enum class ProbeModel { Weak, Saturated };

std::string to_string(RateMethod method);
std::string to_string(ProbeModel probe);
ProbeModel probe_model_from_string(const std::string& s);

struct ChannelPair {
    double plus = 0.0;
    double minus = 0.0;
};

/// Per-channel breakdown of A+-. The diffusion term is common to both.
/// `repump` reports the part of each total that comes from excursions
/// through |g1,0> after a spontaneous decay into |g1>; it is already
/// contained in the three channels and is not added again.
struct RateChannels {
    double diffusion = 0.0;
    ChannelPair atomic;
    ChannelPair cavity;
    ChannelPair repump;
};

struct RateResult {
    double a_plus = 0.0;
    double a_minus = 0.0;
    RateChannels channels;
    double gamma_rate = 0.0;
    std::optional<double> m_st;
    Axis axis = Axis::Z;
    RateMethod method = RateMethod::Resolvent;
    ProbeModel probe = ProbeModel::Weak;
    /// Leading order in Omega_P: the sum of the channels. Equals (a_plus,
    /// a_minus) unless probe == Saturated.
    ChannelPair weak_probe;
    double omega = 0.0;  ///< trap frequency used
    bool divergent = false;
    std::string divergence_reason;
    std::vector<std::string> warnings;
};

/// First-order steady-state amplitudes over (|g1,0>, |g2,1>, |e,0>).
struct CarrierAmplitudes {
    Eigen::Vector3cd c = Eigen::Vector3cd::Zero();
    bool divergent = false;
};

CarrierAmplitudes carrier_amplitudes(const SystemParams& p);

/// Resolvent rates for motion along `axis` at trap frequency `omega`
/// (defaults to the trap frequency of that axis).
RateResult rates_resolvent(const SystemParams& p, Axis axis,
                           std::optional<double> omega = std::nullopt,
                           ProbeModel probe = ProbeModel::Weak);

/// Stationary state of the four internal levels without motion, exact in
/// the probe strength. Empty if the stationary state is not unique.
std::optional<Eigen::Matrix4cd> internal_steady_state(const SystemParams& p);

/// Spectrum S(nu) = 2 Re int_0^inf dt e^{i nu t} <F(t) F(0)> of the
/// mechanical coupling operator F of `axis` in the internal stationary
/// state. A+- = S(-+omega) + diffusion.
double force_spectrum(const SystemParams& p, Axis axis, double nu);

/// Closed-form rates on the EIT line (cavity axis). Throws
/// PreconditionError unless |delta_PL| <= 1e-9 * max(1, |Delta_LA|).
RateResult rates_ceit_analytic(const SystemParams& p,
                               std::optional<double> omega = std::nullopt);

struct EffectiveEit {
    double omega_eff = 0.0;
    double gamma_prime = 0.0;
};

/// Cavity-modified control Rabi frequency and atomic linewidth for
/// Delta_LA == Delta_CA.
EffectiveEit effective_eit_parameters(const SystemParams& p, double omega);

/// Free-space EIT cooling along y: probe Omega_P directly on |g2>-|e>,
/// mechanical coupling through the running-wave control laser. A non-zero
/// `probe_projection` adds the probe's own phase gradient along y (the
/// cosine of the angle between the probe wavevector and y).
RateResult rates_free_space_eit(const SystemParams& p,
                                std::optional<double> omega = std::nullopt,
                                double probe_projection = 0.0);

struct CoolingSummary {
    double gamma_rate = 0.0;
    std::optional<double> m_st;
};

/// Gamma = A- - A+; m_st = A+/Gamma if Gamma > 0.
CoolingSummary cooling_summary(double a_plus, double a_minus);

namespace detail {

/// Weak-drive scattering problem on an n-state excited block.
struct ScatteringProblem {
    Eigen::MatrixXcd h;       ///< non-Hermitian block in the probe frame
    Eigen::VectorXcd source;  ///< drive from the ground state into the block
    Eigen::MatrixXcd w;       ///< mechanical vertex (one power of eta)
    Eigen::VectorXcd ground_vertex;  ///< vertex straight from the ground state; may be empty
    int excited = 0;          ///< index of |e>
    int cavity = -1;          ///< index of the one-photon state, -1 if none
    int repump_entry = -1;    ///< index of |g1> reached by decay into |g1>
    double gamma = 0.0;
    double kappa = 0.0;
    double beta1 = 0.0;
    double diffusion_weight = 0.0;  ///< alpha * eta^2
    double omega = 0.0;
};

/// Evaluates A+- for a scattering problem; sets `divergent` on singular
/// resolvents rather than throwing.
RateResult solve_scattering(const ScatteringProblem& prob);

/// Solves A X - X B = C for small dense complex matrices.
Eigen::MatrixXcd solve_sylvester(const Eigen::MatrixXcd& a, const Eigen::MatrixXcd& b,
                                 const Eigen::MatrixXcd& c, double* rcond = nullptr);

}  // namespace detail

}  // namespace ceit
