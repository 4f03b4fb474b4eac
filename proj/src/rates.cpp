#include "ceit/rates.hpp"

#include "ceit/errors.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <sstream>

namespace ceit {

namespace {

using cd = std::complex<double>;
constexpr cd kI{0.0, 1.0};
constexpr double kMinRcond = 1e-14;
constexpr double kEitTolerance = 1e-9;

void finish(RateResult& r)
{
    r.a_plus = r.channels.diffusion + r.channels.atomic.plus + r.channels.cavity.plus;
    r.a_minus = r.channels.diffusion + r.channels.atomic.minus + r.channels.cavity.minus;
    r.weak_probe = {r.a_plus, r.a_minus};
    const auto summary = cooling_summary(r.a_plus, r.a_minus);
    r.gamma_rate = summary.gamma_rate;
    r.m_st = summary.m_st;
}

RateResult divergent_result(std::string reason)
{
    RateResult r;
    r.divergent = true;
    r.divergence_reason = std::move(reason);
    r.a_plus = r.a_minus = std::numeric_limits<double>::quiet_NaN();
    r.gamma_rate = std::numeric_limits<double>::quiet_NaN();
    return r;
}

bool on_eit_line(const SystemParams& p)
{
    const double scale = std::max({1.0, std::abs(p.delta_la), std::abs(p.delta_pa)});
    return std::abs(p.delta_pl()) <= kEitTolerance * scale;
}

SystemParams with_trap_frequency(SystemParams p, Axis axis, std::optional<double> omega)
{
    if (omega) {
        if (!(*omega > 0.0)) {
            throw ParameterError("trap frequency must be positive");
        }
        (axis == Axis::Z ? p.omega_z : p.omega_y) = *omega;
    }
    return p;
}

using Matrix16cd = Eigen::Matrix<cd, 16, 16>;
using Vector16cd = Eigen::Matrix<cd, 16, 1>;

/// Internal Liouvillian on column-major vec(rho).
Matrix16cd internal_liouvillian(const SystemParams& p)
{
    const Eigen::Matrix4cd h =
        build_effective_hamiltonian(p).matrix + build_drive(p).matrix;
    const Eigen::Matrix4cd id = Eigen::Matrix4cd::Identity();
    Matrix16cd l = Matrix16cd::Zero();
    for (int a = 0; a < 4; ++a) {
        for (int b = 0; b < 4; ++b) {
            // rho -> -i h rho + i rho h^dagger
            l.block<4, 4>(4 * b, 4 * b) += -kI * id(a, b) * h;
            l.block<4, 4>(4 * a, 4 * b) += kI * std::conj(h(a, b)) * id;
        }
    }
    for (const auto& op : build_decay_channels(p)) {
        const Eigen::Matrix4cd& j = op.matrix;
        for (int a = 0; a < 4; ++a) {
            for (int b = 0; b < 4; ++b) {
                l.block<4, 4>(4 * a, 4 * b) += std::conj(j(a, b)) * j;
            }
        }
    }
    return l;
}

}  // namespace

std::optional<Eigen::Matrix4cd> internal_steady_state(const SystemParams& p)
{
    Matrix16cd a = internal_liouvillian(p);
    Eigen::FullPivLU<Matrix16cd> kernel(a);
    kernel.setThreshold(1e-10);
    if (kernel.dimensionOfKernel() != 1) return std::nullopt;
    a.row(0).setZero();
    for (int k = 0; k < 4; ++k) a(0, 5 * k) = 1.0;
    Eigen::PartialPivLU<Matrix16cd> lu(a);
    if (!(lu.rcond() > 1e-12)) return std::nullopt;
    Vector16cd rhs = Vector16cd::Zero();
    rhs(0) = 1.0;
    const Vector16cd v = lu.solve(rhs);
    Eigen::Matrix4cd rho = Eigen::Map<const Eigen::Matrix4cd>(v.data());
    return (0.5 * (rho + rho.adjoint())).eval();
}

double force_spectrum(const SystemParams& p, Axis axis, double nu)
{
    const auto rho = internal_steady_state(p);
    if (!rho) throw DegenerateKernelError(2);
    const Eigen::Matrix4cd f = build_mech_coupling(p, axis).matrix;
    const Eigen::Matrix4cd x = f * *rho;
    const Matrix16cd k = -kI * nu * Matrix16cd::Identity() - internal_liouvillian(p);
    const Vector16cd y = k.partialPivLu().solve(Eigen::Map<const Vector16cd>(x.data()));
    return 2.0 * (f * Eigen::Map<const Eigen::Matrix4cd>(y.data())).trace().real();
}

std::string to_string(ProbeModel probe)
{
    return probe == ProbeModel::Weak ? "weak" : "saturated";
}

ProbeModel probe_model_from_string(const std::string& s)
{
    if (s == "weak") return ProbeModel::Weak;
    if (s == "saturated") return ProbeModel::Saturated;
    throw ParameterError("unknown probe model '" + s + "' (weak or saturated)");
}

std::string to_string(RateMethod method)
{
    switch (method) {
    case RateMethod::Resolvent: return "resolvent";
    case RateMethod::CeitAnalytic: return "ceit_analytic";
    case RateMethod::FreeSpaceEit: return "free_space_eit";
    }
    return "?";
}

namespace detail {

Eigen::MatrixXcd solve_sylvester(const Eigen::MatrixXcd& a, const Eigen::MatrixXcd& b,
                                 const Eigen::MatrixXcd& c, double* rcond)
{
    const Eigen::Index n = a.rows();
    const Eigen::Index m = b.rows();
    // vec(A X - X B) = (I (x) A - B^T (x) I) vec(X), column-major vec.
    Eigen::MatrixXcd k = Eigen::MatrixXcd::Zero(n * m, n * m);
    for (Eigen::Index j = 0; j < m; ++j) {
        k.block(j * n, j * n, n, n) += a;
        for (Eigen::Index l = 0; l < m; ++l) {
            k.block(j * n, l * n, n, n).diagonal().array() -= b(l, j);
        }
    }
    Eigen::PartialPivLU<Eigen::MatrixXcd> lu(k);
    if (rcond != nullptr) *rcond = lu.rcond();
    const Eigen::VectorXcd x =
        lu.solve(Eigen::Map<const Eigen::VectorXcd>(c.data(), n * m));
    return Eigen::Map<const Eigen::MatrixXcd>(x.data(), n, m);
}

RateResult solve_scattering(const ScatteringProblem& prob)
{
    const Eigen::Index n = prob.h.rows();
    const Eigen::MatrixXcd id = Eigen::MatrixXcd::Identity(n, n);

    Eigen::PartialPivLU<Eigen::MatrixXcd> carrier_lu(-prob.h);
    if (!(carrier_lu.rcond() > kMinRcond)) {
        return divergent_result("carrier resolvent is singular");
    }
    const Eigen::VectorXcd c = carrier_lu.solve(prob.source);
    const double pop_e = std::norm(c(prob.excited));

    RateResult r;
    r.omega = prob.omega;
    double diffusion_pop = pop_e;

    // Sideband amplitudes c_pm = G(-+omega) W c.
    Eigen::VectorXcd wc = prob.w * c;
    if (prob.ground_vertex.size() == n) wc += prob.ground_vertex;
    Eigen::VectorXcd sides[2];
    for (int sign : {+1, -1}) {
        // sign +1: heating (m -> m+1), resolvent at -omega.
        const double delta = -sign * prob.omega;
        Eigen::PartialPivLU<Eigen::MatrixXcd> lu(delta * id - prob.h);
        if (!(lu.rcond() > kMinRcond)) {
            return divergent_result(sign > 0 ? "heating sideband resolvent is singular"
                                             : "cooling sideband resolvent is singular");
        }
        const Eigen::VectorXcd side = lu.solve(wc);
        sides[sign > 0 ? 0 : 1] = side;
        const double atomic = 2.0 * prob.gamma * std::norm(side(prob.excited));
        const double cavity =
            prob.cavity >= 0 ? 2.0 * prob.kappa * std::norm(side(prob.cavity)) : 0.0;
        (sign > 0 ? r.channels.atomic.plus : r.channels.atomic.minus) = atomic;
        (sign > 0 ? r.channels.cavity.plus : r.channels.cavity.minus) = cavity;
    }

    // Decay into |g1> leaves the system inside the block with unit amplitude;
    // the control laser brings it back. Each such excursion scatters further
    // photons and carries its own sideband amplitudes. Integrated
    // populations follow from Lyapunov equations of the decaying dynamics.
    const double start_rate = 2.0 * prob.gamma * prob.beta1 * pop_e;
    if (start_rate > 0.0 && prob.repump_entry >= 0) {
        const Eigen::MatrixXcd h_dag = prob.h.adjoint();
        Eigen::MatrixXcd seed = Eigen::MatrixXcd::Zero(n, n);
        seed(prob.repump_entry, prob.repump_entry) = -kI;
        double rc = 0.0;
        const Eigen::MatrixXcd a = solve_sylvester(prob.h, h_dag, seed, &rc);
        if (!(rc > kMinRcond)) {
            return divergent_result("no return from |g1>: repump excursion does not decay");
        }
        const double exc_pop_e = std::max(0.0, a(prob.excited, prob.excited).real());
        const double loop = 2.0 * prob.gamma * prob.beta1 * exc_pop_e;
        if (!(1.0 - loop > 1e-12)) {
            return divergent_result("optical pumping into |g1> is not repumped");
        }
        const double excursion_rate = start_rate / (1.0 - loop);
        diffusion_pop += excursion_rate * exc_pop_e;

        for (int sign : {+1, -1}) {
            const double delta = -sign * prob.omega;
            const Eigen::MatrixXcd k1 = prob.h - delta * id;
            const Eigen::MatrixXcd cross = solve_sylvester(k1, h_dag, -prob.w * a, &rc);
            if (!(rc > kMinRcond)) {
                return divergent_result("repump sideband resolvent is singular");
            }
            // A decay into |g1> out of the phonon-changed coherence (m+-1 on the
            // left, m on the right) keeps that coherence; the excursion it starts
            // interferes with the one started from the unchanged state.
            const Eigen::MatrixXcd rho10 =
                sides[sign > 0 ? 0 : 1] * c.adjoint() + excursion_rate * cross;
            const Eigen::MatrixXcd unit = solve_sylvester(k1, h_dag, seed, &rc);
            if (!(rc > kMinRcond)) {
                return divergent_result("repump sideband resolvent is singular");
            }
            const cd jump_loop = 2.0 * prob.gamma * prob.beta1 * unit(prob.excited, prob.excited);
            const cd kept = 2.0 * prob.gamma * prob.beta1 * rho10(prob.excited, prob.excited) /
                            (1.0 - jump_loop);
            const Eigen::MatrixXcd carried = kept * unit;

            const Eigen::MatrixXcd rhs =
                excursion_rate * (cross * prob.w.adjoint() - prob.w * cross.adjoint());
            const Eigen::MatrixXcd rhs_kept =
                carried * prob.w.adjoint() - prob.w * carried.adjoint();
            const Eigen::MatrixXcd side = solve_sylvester(k1, k1.adjoint(), rhs, &rc);
            const Eigen::MatrixXcd side_kept = solve_sylvester(k1, k1.adjoint(), rhs_kept, &rc);
            if (!(rc > kMinRcond)) {
                return divergent_result("repump sideband resolvent is singular");
            }
            const double atomic =
                2.0 * prob.gamma *
                (std::max(0.0, side(prob.excited, prob.excited).real()) +
                 side_kept(prob.excited, prob.excited).real());
            const double cavity =
                prob.cavity >= 0
                    ? 2.0 * prob.kappa *
                          (std::max(0.0, side(prob.cavity, prob.cavity).real()) +
                           side_kept(prob.cavity, prob.cavity).real())
                    : 0.0;
            (sign > 0 ? r.channels.atomic.plus : r.channels.atomic.minus) += atomic;
            (sign > 0 ? r.channels.cavity.plus : r.channels.cavity.minus) += cavity;
            (sign > 0 ? r.channels.repump.plus : r.channels.repump.minus) +=
                atomic + cavity + excursion_rate * exc_pop_e * 2.0 * prob.gamma *
                                      prob.diffusion_weight;
        }
    }

    r.channels.diffusion = 2.0 * prob.gamma * prob.diffusion_weight * diffusion_pop;
    finish(r);
    return r;
}

}  // namespace detail

CarrierAmplitudes carrier_amplitudes(const SystemParams& p)
{
    CarrierAmplitudes out;
    const Eigen::Matrix3cd h = single_excitation_block(p);
    Eigen::PartialPivLU<Eigen::Matrix3cd> lu(-h);
    if (!(lu.rcond() > kMinRcond)) {
        out.divergent = true;
        return out;
    }
    Eigen::Vector3cd source = Eigen::Vector3cd::Zero();
    source(block::kCav) = 0.5 * p.omega_p;
    out.c = lu.solve(source);
    return out;
}

RateResult rates_resolvent(const SystemParams& params, Axis axis, std::optional<double> omega,
                           ProbeModel probe)
{
    const SystemParams p = with_trap_frequency(params, axis, omega);
    p.validate();
    detail::ScatteringProblem prob;
    prob.h = single_excitation_block(p);
    prob.source = Eigen::VectorXcd::Zero(3);
    prob.source(block::kCav) = 0.5 * p.omega_p;
    prob.w = mech_coupling_block(p, axis);
    prob.excited = block::kE;
    prob.cavity = block::kCav;
    prob.repump_entry = block::kG1;
    prob.gamma = p.gamma;
    prob.kappa = p.kappa;
    prob.beta1 = p.beta1;
    const double eta = p.eta(axis);
    prob.diffusion_weight = p.alpha(axis) * eta * eta;
    prob.omega = p.trap_frequency(axis);

    RateResult r = detail::solve_scattering(prob);
    r.axis = axis;
    r.method = RateMethod::Resolvent;
    r.omega = prob.omega;
    r.warnings = p.warnings();
    if (probe == ProbeModel::Weak) return r;

    r.probe = ProbeModel::Saturated;
    const auto rho = internal_steady_state(p);
    if (!rho) {
        RateResult d = divergent_result("stationary internal state is not unique");
        d.axis = axis;
        d.method = RateMethod::Resolvent;
        d.probe = ProbeModel::Saturated;
        d.omega = prob.omega;
        return d;
    }
    if (r.divergent) {
        r.warnings.push_back("weak-probe channel breakdown unavailable: " +
                             r.divergence_reason);
        r.divergent = false;
        r.divergence_reason.clear();
        r.channels = {};
        r.weak_probe = {std::numeric_limits<double>::quiet_NaN(),
                        std::numeric_limits<double>::quiet_NaN()};
    }
    const double pop_e = std::max(0.0, (*rho)(basis::kEVac, basis::kEVac).real());
    const double diffusion = 2.0 * p.gamma * prob.diffusion_weight * pop_e;
    r.a_plus = std::max(0.0, force_spectrum(p, axis, -prob.omega)) + diffusion;
    r.a_minus = std::max(0.0, force_spectrum(p, axis, prob.omega)) + diffusion;
    const auto summary = cooling_summary(r.a_plus, r.a_minus);
    r.gamma_rate = summary.gamma_rate;
    r.m_st = summary.m_st;
    return r;
}

RateResult rates_ceit_analytic(const SystemParams& params, std::optional<double> omega_in)
{
    const SystemParams p = with_trap_frequency(params, Axis::Z, omega_in);
    p.validate();
    if (!on_eit_line(p)) {
        std::ostringstream os;
        os << "EIT resonance condition violated: delta_PC must equal Delta_LA - Delta_CA "
              "(delta_PL = "
           << p.delta_pl() << " rad/us)";
        throw PreconditionError(os.str());
    }
    const double omega = p.omega_z;
    const double eta = p.eta(Axis::Z);
    const double dpc = p.delta_pc();
    const double k2 = p.kappa * p.kappa;
    const double s = std::sin(p.kx0);
    const double prefactor = (p.omega_p * p.omega_p / 2.0) / (dpc * dpc + k2) * eta * eta *
                             s * s * p.g * p.g * p.gamma;
    const double coop = p.cooperativity();

    RateResult r;
    r.axis = Axis::Z;
    r.method = RateMethod::CeitAnalytic;
    r.omega = omega;
    for (int sign : {+1, -1}) {
        const double detuning = dpc - sign * omega;
        const double c_pm = coop * k2 / (k2 + detuning * detuning);
        const double shift = p.omega_l * p.omega_l / (4.0 * omega) - omega +
                             sign * p.delta_la +
                             p.gamma / p.kappa * c_pm * (omega - sign * dpc);
        const double denom =
            p.gamma * p.gamma * (1.0 + c_pm) * (1.0 + c_pm) + shift * shift;
        // Numerator 1 + C_pm: atom-scattered part plus cavity-scattered part.
        (sign > 0 ? r.channels.atomic.plus : r.channels.atomic.minus) = prefactor / denom;
        (sign > 0 ? r.channels.cavity.plus : r.channels.cavity.minus) =
            prefactor * c_pm / denom;
    }
    finish(r);
    r.warnings = p.warnings();
    return r;
}

EffectiveEit effective_eit_parameters(const SystemParams& p, double omega)
{
    p.validate();
    const double scale = std::max({1.0, std::abs(p.delta_la), std::abs(p.delta_ca)});
    if (std::abs(p.delta_la - p.delta_ca) > kEitTolerance * scale) {
        throw PreconditionError("effective_eit_parameters requires Delta_LA == Delta_CA");
    }
    const double k2 = p.kappa * p.kappa;
    EffectiveEit e;
    e.gamma_prime = p.gamma * (p.cooperativity() * k2 / (k2 + omega * omega) + 1.0);
    e.omega_eff = std::sqrt(p.omega_l * p.omega_l +
                            4.0 * omega * omega * (e.gamma_prime - p.gamma) / p.kappa);
    return e;
}

RateResult rates_free_space_eit(const SystemParams& params, std::optional<double> omega,
                                double probe_projection)
{
    const SystemParams p = with_trap_frequency(params, Axis::Y, omega);
    p.validate();
    constexpr int g1 = 0;
    constexpr int e = 1;
    detail::ScatteringProblem prob;
    prob.h = Eigen::MatrixXcd::Zero(2, 2);
    prob.h(g1, g1) = -p.delta_pl();
    prob.h(e, e) = -p.delta_pa - kI * p.gamma;
    prob.h(g1, e) = prob.h(e, g1) = 0.5 * p.omega_l;
    prob.source = Eigen::VectorXcd::Zero(2);
    prob.source(e) = 0.5 * p.omega_p;
    const double eta = p.eta(Axis::Y);
    prob.w = Eigen::MatrixXcd::Zero(2, 2);
    prob.w(e, g1) = kI * eta * 0.5 * p.omega_l;
    prob.w(g1, e) = -prob.w(e, g1);
    if (probe_projection != 0.0) {
        prob.ground_vertex = Eigen::VectorXcd::Zero(2);
        prob.ground_vertex(e) = kI * eta * probe_projection * 0.5 * p.omega_p;
    }
    prob.excited = e;
    prob.cavity = -1;
    prob.repump_entry = g1;
    prob.gamma = p.gamma;
    prob.kappa = 0.0;
    prob.beta1 = p.beta1;
    prob.diffusion_weight = p.alpha_y * eta * eta;
    prob.omega = p.omega_y;

    RateResult r = detail::solve_scattering(prob);
    r.axis = Axis::Y;
    r.method = RateMethod::FreeSpaceEit;
    r.omega = prob.omega;
    r.warnings = p.warnings();
    return r;
}

CoolingSummary cooling_summary(double a_plus, double a_minus)
{
    if (!(a_plus >= 0.0) || !(a_minus >= 0.0)) {
        throw ParameterError("cooling_summary: rates must be non-negative");
    }
    CoolingSummary s;
    s.gamma_rate = a_minus - a_plus;
    if (s.gamma_rate > 0.0) {
        s.m_st = a_plus / s.gamma_rate;
    }
    return s;
}

}  // namespace ceit
