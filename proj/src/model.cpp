#include "ceit/model.hpp"

#include "ceit/errors.hpp"
#include "ceit/units.hpp"

#include <cmath>
#include <complex>
#include <sstream>

namespace ceit {

namespace {

using cd = std::complex<double>;
constexpr cd kI{0.0, 1.0};

void require_positive(double value, const char* name)
{
    if (!(value > 0.0) || !std::isfinite(value)) {
        std::ostringstream os;
        os << name << " must be positive and finite (got " << value << ")";
        throw ParameterError(os.str());
    }
}

void require_finite(double value, const char* name)
{
    if (!std::isfinite(value)) {
        throw ParameterError(std::string(name) + " must be finite");
    }
}

}  // namespace

std::string to_string(Axis axis)
{
    return axis == Axis::Z ? "z" : "y";
}

Axis axis_from_string(const std::string& s)
{
    if (s == "z" || s == "Z") return Axis::Z;
    if (s == "y" || s == "Y") return Axis::Y;
    throw ParameterError("unknown axis '" + s + "' (expected z or y)");
}

SystemParams SystemParams::experiment_defaults()
{
    SystemParams p;
    p.g = mhz_to_angular(3.6);
    p.omega_l = mhz_to_angular(2.8);
    p.omega_p = mhz_to_angular(0.23);
    p.gamma = mhz_to_angular(2.6);
    p.kappa = mhz_to_angular(0.40);
    p.delta_ca = mhz_to_angular(16.0);
    p.delta_la = p.delta_ca;
    p.delta_pa = p.delta_ca;
    p.omega_z = mhz_to_angular(0.2);
    p.omega_y = mhz_to_angular(0.3);
    p.omega_rec = mhz_to_angular(2.07e-3);
    p.kx0 = kPi / 4.0;
    p.beta1 = 0.5;
    p.alpha_z = 0.4;
    p.alpha_y = 0.4;
    return p;
}

double SystemParams::g_eff() const
{
    return g * std::cos(kx0);
}

double SystemParams::cooperativity() const
{
    const double ge = g_eff();
    return ge * ge / (kappa * gamma);
}

double SystemParams::eta(Axis axis) const
{
    return lamb_dicke(trap_frequency(axis), omega_rec);
}

void SystemParams::validate() const
{
    require_positive(gamma, "gamma");
    require_positive(kappa, "kappa");
    require_positive(omega_z, "omega_z");
    require_positive(omega_y, "omega_y");
    require_positive(omega_rec, "omega_rec");
    require_finite(g, "g");
    require_finite(omega_l, "omega_l");
    require_finite(omega_p, "omega_p");
    require_finite(delta_ca, "delta_ca");
    require_finite(delta_la, "delta_la");
    require_finite(delta_pa, "delta_pa");
    require_finite(kx0, "kx0");
    if (g < 0.0 || omega_l < 0.0 || omega_p < 0.0) {
        throw ParameterError("couplings g, omega_l, omega_p must be non-negative");
    }
    if (!(beta1 >= 0.0 && beta1 <= 1.0)) {
        throw ParameterError("beta1 must lie in [0, 1]");
    }
    if (!(alpha_z >= 0.0) || !(alpha_y >= 0.0) || !std::isfinite(alpha_z) ||
        !std::isfinite(alpha_y)) {
        throw ParameterError("recoil projection factors must be non-negative");
    }
}

std::vector<std::string> SystemParams::warnings() const
{
    std::vector<std::string> out;
    for (Axis axis : {Axis::Z, Axis::Y}) {
        const double e = eta(axis);
        if (e >= 0.3) {
            std::ostringstream os;
            os << "Lamb-Dicke parameter eta_" << to_string(axis) << " = " << e
               << " >= 0.3: rate theory outside its range of validity";
            out.push_back(os.str());
        }
    }
    return out;
}

InternalOperator build_effective_hamiltonian(const SystemParams& p)
{
    p.validate();
    using namespace basis;
    InternalOperator op;
    op.label.kind = OperatorKind::Hamiltonian;
    auto& h = op.matrix;
    h(kG2Vac, kG2Vac) = 0.0;
    h(kG1Vac, kG1Vac) = -p.delta_pl();
    h(kEVac, kEVac) = -p.delta_pa - kI * p.gamma;
    h(kG2Photon, kG2Photon) = -p.delta_pc() - kI * p.kappa;
    h(kG1Vac, kEVac) = h(kEVac, kG1Vac) = 0.5 * p.omega_l;
    h(kG2Photon, kEVac) = h(kEVac, kG2Photon) = p.g_eff();
    return op;
}

InternalOperator build_drive(const SystemParams& p)
{
    p.validate();
    using namespace basis;
    InternalOperator op;
    op.label.kind = OperatorKind::Drive;
    op.matrix(kG2Vac, kG2Photon) = op.matrix(kG2Photon, kG2Vac) = 0.5 * p.omega_p;
    return op;
}

InternalOperator build_mech_coupling(const SystemParams& p, Axis axis)
{
    p.validate();
    using namespace basis;
    InternalOperator op;
    op.label.kind = OperatorKind::MechCoupling;
    op.label.axis = axis;
    const double eta = p.eta(axis);
    if (axis == Axis::Z) {
        // Gradient of the cavity mode function g cos(k x0 + k z).
        const double w = -eta * p.g * std::sin(p.kx0);
        op.matrix(kEVac, kG2Photon) = op.matrix(kG2Photon, kEVac) = w;
    } else {
        // Running-wave phase of the control laser along y.
        const cd w = kI * eta * 0.5 * p.omega_l;
        op.matrix(kEVac, kG1Vac) = w;
        op.matrix(kG1Vac, kEVac) = -w;
    }
    return op;
}

std::vector<InternalOperator> build_decay_channels(const SystemParams& p)
{
    p.validate();
    using namespace basis;
    std::vector<InternalOperator> out(3);
    out[0].label = {OperatorKind::DecayChannel, Axis::Z, DecayChannel::Cavity};
    out[0].matrix(kG2Vac, kG2Photon) = std::sqrt(2.0 * p.kappa);
    out[1].label = {OperatorKind::DecayChannel, Axis::Z, DecayChannel::AtomToG1};
    out[1].matrix(kG1Vac, kEVac) = std::sqrt(2.0 * p.gamma * p.beta1);
    out[2].label = {OperatorKind::DecayChannel, Axis::Z, DecayChannel::AtomToG2};
    out[2].matrix(kG2Vac, kEVac) = std::sqrt(2.0 * p.gamma * p.beta2());
    return out;
}

Eigen::Matrix3cd single_excitation_block(const SystemParams& p)
{
    Eigen::Matrix3cd m = probe_independent_block(p);
    m.diagonal().array() -= p.delta_pc();
    return m;
}

Eigen::Matrix3cd probe_independent_block(const SystemParams& p)
{
    p.validate();
    using namespace block;
    Eigen::Matrix3cd m = Eigen::Matrix3cd::Zero();
    m(kG1, kG1) = p.delta_lc();
    m(kCav, kCav) = -kI * p.kappa;
    m(kE, kE) = -p.delta_ca - kI * p.gamma;
    m(kG1, kE) = m(kE, kG1) = 0.5 * p.omega_l;
    m(kCav, kE) = m(kE, kCav) = p.g_eff();
    return m;
}

Eigen::Matrix3cd mech_coupling_block(const SystemParams& p, Axis axis)
{
    const auto full = build_mech_coupling(p, axis).matrix;
    const int map[3] = {basis::kG1Vac, basis::kG2Photon, basis::kEVac};
    Eigen::Matrix3cd w;
    for (int i = 0; i < 3; ++i) {
        for (int j = 0; j < 3; ++j) {
            w(i, j) = full(map[i], map[j]);
        }
    }
    return w;
}

double intracavity_photon_number(const SystemParams& p, bool with_atom)
{
    p.validate();
    const double drive = 0.5 * p.omega_p;
    if (!with_atom) {
        const double d = p.delta_pc();
        return drive * drive / (p.kappa * p.kappa + d * d);
    }
    Eigen::Vector3cd source = Eigen::Vector3cd::Zero();
    source(block::kCav) = drive;
    const Eigen::Matrix3cd h = single_excitation_block(p);
    const Eigen::Vector3cd c = (-h).fullPivLu().solve(source);
    return std::norm(c(block::kCav));
}

double lamb_dicke(double omega_trap, double omega_rec)
{
    if (!(omega_trap > 0.0) || !(omega_rec > 0.0)) {
        throw ParameterError("lamb_dicke: trap and recoil frequencies must be positive");
    }
    return std::sqrt(omega_rec / omega_trap);
}

}  // namespace ceit
