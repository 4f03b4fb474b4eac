#include "ceit/oracle.hpp"

#include "ceit/errors.hpp"
#include "ceit/units.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/SparseLU>
#include <Eigen/SparseQR>
#include <unsupported/Eigen/KroneckerProduct>
#include <unsupported/Eigen/MatrixFunctions>

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace ceit {

namespace {

using cd = std::complex<double>;
constexpr cd kI{0.0, 1.0};

using Triplet = Eigen::Triplet<cd>;

SparseMatrixC sparse_identity(int n)
{
    SparseMatrixC m(n, n);
    m.setIdentity();
    return m;
}

SparseMatrixC to_sparse(const Eigen::MatrixXcd& m)
{
    return m.sparseView(1.0, 0.0);
}

/// Position quadrature b + b^dagger on the truncated Fock space.
Eigen::MatrixXcd position_operator(int levels)
{
    Eigen::MatrixXcd x = Eigen::MatrixXcd::Zero(levels, levels);
    for (int m = 1; m < levels; ++m) {
        x(m - 1, m) = x(m, m - 1) = std::sqrt(static_cast<double>(m));
    }
    return x;
}

/// exp(i * phase * x) expanded to the given order in phase.
Eigen::MatrixXcd phase_factor(const Eigen::MatrixXcd& x, double phase, int order)
{
    const auto n = x.rows();
    Eigen::MatrixXcd out = Eigen::MatrixXcd::Identity(n, n) + kI * phase * x;
    if (order >= 2) {
        out -= 0.5 * phase * phase * x * x;
    }
    return out;
}

Eigen::MatrixXcd internal_projector(int i, int j)
{
    Eigen::MatrixXcd m = Eigen::MatrixXcd::Zero(basis::kDim, basis::kDim);
    m(i, j) = 1.0;
    return m;
}

SparseMatrixC kron(const Eigen::MatrixXcd& internal, const Eigen::MatrixXcd& phonon)
{
    SparseMatrixC out;
    out = Eigen::kroneckerProduct(to_sparse(internal), to_sparse(phonon));
    return out;
}

// Observable helpers on vec(rho).
double diagonal_expectation(const Eigen::VectorXcd& v, int dim,
                            const std::vector<double>& weights)
{
    double s = 0.0;
    for (int k = 0; k < dim; ++k) {
        if (weights[k] != 0.0) s += weights[k] * v(k + dim * k).real();
    }
    return s;
}

cd trace_of(const Eigen::VectorXcd& v, int dim)
{
    cd s = 0.0;
    for (int k = 0; k < dim; ++k) s += v(k + dim * k);
    return s;
}

Eigen::MatrixXcd unvec(const Eigen::VectorXcd& v, int dim)
{
    return Eigen::Map<const Eigen::MatrixXcd>(v.data(), dim, dim);
}

struct Observables {
    std::vector<double> phonon;  // m per Hilbert index
    std::vector<double> excited;
    std::vector<double> photon;

    explicit Observables(int levels)
    {
        const int dim = 4 * levels;
        phonon.assign(dim, 0.0);
        excited.assign(dim, 0.0);
        photon.assign(dim, 0.0);
        for (int i = 0; i < 4; ++i) {
            for (int m = 0; m < levels; ++m) {
                const int k = i * levels + m;
                phonon[k] = m;
                excited[k] = i == basis::kEVac ? 1.0 : 0.0;
                photon[k] = i == basis::kG2Photon ? 1.0 : 0.0;
            }
        }
    }
};

std::vector<double> phonon_marginal(const Eigen::VectorXcd& v, int levels)
{
    const int dim = 4 * levels;
    std::vector<double> p(levels, 0.0);
    for (int i = 0; i < 4; ++i) {
        for (int m = 0; m < levels; ++m) {
            const int k = i * levels + m;
            p[m] += v(k + dim * k).real();
        }
    }
    return p;
}

// ---------------------------------------------------------------------------
// Dormand-Prince 5(4) with embedded error control for y' = L y.

class DormandPrince {
public:
    DormandPrince(const SparseMatrixC& l, double abs_tol, double rel_tol)
        : l_(l), atol_(abs_tol), rtol_(rel_tol)
    {
    }

    void advance(Eigen::VectorXcd& y, double t_span)
    {
        static constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
        static constexpr double a21 = 1.0 / 5;
        static constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
        static constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
        static constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187,
                                a53 = 64448.0 / 6561, a54 = -212.0 / 729;
        static constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247,
                                a64 = 49.0 / 176, a65 = -5103.0 / 18656;
        static constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192,
                                b5 = -2187.0 / 6784, b6 = 11.0 / 84;
        static constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920,
                                e5 = -17253.0 / 339200, e6 = 22.0 / 525, e7 = -1.0 / 40;
        (void)c2;
        (void)c3;
        (void)c4;
        (void)c5;

        double t = 0.0;
        if (h_ <= 0.0) h_ = std::min(t_span, 1e-3);
        if (k1_.size() != y.size()) k1_ = l_ * y;
        while (t < t_span) {
            double h = std::min(h_, t_span - t);
            const bool last = h >= t_span - t;
            Eigen::VectorXcd k2 = l_ * (y + h * a21 * k1_);
            Eigen::VectorXcd k3 = l_ * (y + h * (a31 * k1_ + a32 * k2));
            Eigen::VectorXcd k4 = l_ * (y + h * (a41 * k1_ + a42 * k2 + a43 * k3));
            Eigen::VectorXcd k5 =
                l_ * (y + h * (a51 * k1_ + a52 * k2 + a53 * k3 + a54 * k4));
            Eigen::VectorXcd k6 =
                l_ * (y + h * (a61 * k1_ + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5));
            Eigen::VectorXcd y_new =
                y + h * (b1 * k1_ + b3 * k3 + b4 * k4 + b5 * k5 + b6 * k6);
            Eigen::VectorXcd k7 = l_ * y_new;
            Eigen::VectorXcd err =
                h * (e1 * k1_ + e3 * k3 + e4 * k4 + e5 * k5 + e6 * k6 + e7 * k7);
            double sum = 0.0;
            for (Eigen::Index i = 0; i < y.size(); ++i) {
                const double sc =
                    atol_ + rtol_ * std::max(std::abs(y(i)), std::abs(y_new(i)));
                const double r = std::abs(err(i)) / sc;
                sum += r * r;
            }
            const double norm = std::sqrt(sum / static_cast<double>(y.size()));
            if (norm <= 1.0) {
                t = last ? t_span : t + h;
                y.swap(y_new);
                k1_.swap(k7);
                const double fac = norm == 0.0 ? 5.0 : 0.9 * std::pow(norm, -0.2);
                if (!last) h_ = h * std::clamp(fac, 0.2, 5.0);
                else h_ = std::max(h_, h * std::clamp(fac, 0.2, 5.0));
            } else {
                h_ = h * std::clamp(0.9 * std::pow(norm, -0.2), 0.1, 1.0);
                if (h_ < 1e-14 * std::max(1.0, t_span)) {
                    throw DivergenceError("adaptive integrator: step size underflow");
                }
            }
        }
    }

private:
    const SparseMatrixC& l_;
    double atol_;
    double rtol_;
    double h_ = -1.0;
    Eigen::VectorXcd k1_;
};

// ---------------------------------------------------------------------------
// Krylov approximation of exp(t L) v with adaptive substeps and the
// a-posteriori error estimate of Sidje's expv.

class KrylovExpm {
public:
    KrylovExpm(const SparseMatrixC& l, double abs_tol, double rel_tol)
        : l_(l), atol_(abs_tol), rtol_(rel_tol)
    {
        Eigen::VectorXd row_sums = Eigen::VectorXd::Zero(l.rows());
        for (int col = 0; col < l.outerSize(); ++col) {
            for (SparseMatrixC::InnerIterator it(l, col); it; ++it) {
                row_sums(it.row()) += std::abs(it.value());
            }
        }
        anorm_ = std::max(row_sums.maxCoeff(), 1e-300);
    }

    Eigen::VectorXcd apply(const Eigen::VectorXcd& v, double t_out)
    {
        constexpr int m_max = 30;
        constexpr double delta = 1.2;
        constexpr double safety = 0.9;
        const Eigen::Index n = v.size();
        const int m = static_cast<int>(std::min<Eigen::Index>(m_max, n - 1));
        Eigen::VectorXcd w = v;
        double beta = w.norm();
        if (beta == 0.0 || t_out == 0.0) return w;
        const double tol = std::max(atol_, rtol_ * beta);
        const double fact = std::pow((m + 1) / std::exp(1.0), m + 1) *
                            std::sqrt(2.0 * kPi * (m + 1));
        double t_new = (1.0 / anorm_) * std::pow((fact * tol) / (4.0 * beta * anorm_),
                                                 1.0 / m);
        double t_now = 0.0;
        Eigen::MatrixXcd basis(n, m + 1);
        int steps = 0;
        while (t_now < t_out) {
            if (++steps > 10000000) {
                throw DivergenceError("Krylov propagation: too many substeps");
            }
            double tau = std::min(t_out - t_now, t_new);
            Eigen::MatrixXcd hess = Eigen::MatrixXcd::Zero(m + 2, m + 2);
            basis.col(0) = w / beta;
            int mb = m;
            int k1 = 2;
            const double btol = 1e-14 * beta;
            for (int j = 0; j < m; ++j) {
                Eigen::VectorXcd p = l_ * basis.col(j);
                for (int i = 0; i <= j; ++i) {
                    const cd proj = basis.col(i).dot(p);
                    hess(i, j) = proj;
                    p -= proj * basis.col(i);
                }
                const double s = p.norm();
                if (s < btol) {
                    k1 = 0;
                    mb = j + 1;
                    tau = t_out - t_now;
                    break;
                }
                hess(j + 1, j) = s;
                basis.col(j + 1) = p / s;
            }
            double avnorm = 0.0;
            if (k1 != 0) {
                hess(m + 1, m) = 1.0;
                avnorm = (l_ * basis.col(m)).norm();
            }
            Eigen::MatrixXcd f;
            double err_loc = 0.0;
            double xm = 1.0 / m;
            for (int reject = 0;; ++reject) {
                const int mx = mb + k1;
                f = (tau * hess.topLeftCorner(mx, mx)).exp();
                if (k1 == 0) {
                    err_loc = btol;
                    break;
                }
                const double p1 = std::abs(f(m, 0)) * beta;
                const double p2 = std::abs(f(m + 1, 0)) * beta * avnorm;
                if (p1 > 10.0 * p2) {
                    err_loc = p2;
                    xm = 1.0 / m;
                } else if (p1 > p2) {
                    err_loc = p1 * p2 / (p1 - p2);
                    xm = 1.0 / m;
                } else {
                    err_loc = p1;
                    xm = 1.0 / (m - 1);
                }
                if (err_loc <= delta * tau * tol) break;
                if (reject > 60) {
                    throw DivergenceError("Krylov propagation: step size underflow");
                }
                tau = safety * tau * std::pow(tau * tol / err_loc, xm);
            }
            const int mx = mb + std::max(0, k1 - 1);
            w = basis.leftCols(mx) * (beta * f.col(0).head(mx));
            beta = w.norm();
            t_now += tau;
            t_new = safety * tau * std::pow(tau * tol / std::max(err_loc, 1e-300), xm);
            if (beta == 0.0) break;
        }
        return w;
    }

private:
    const SparseMatrixC& l_;
    double atol_;
    double rtol_;
    double anorm_ = 1.0;
};

double min_hermitian_eigenvalue(const Eigen::VectorXcd& v, int dim)
{
    const Eigen::MatrixXcd rho = unvec(v, dim);
    const Eigen::MatrixXcd herm = 0.5 * (rho + rho.adjoint());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(herm, Eigen::EigenvaluesOnly);
    return es.eigenvalues().minCoeff();
}

}  // namespace

std::string to_string(Integrator integrator)
{
    return integrator == Integrator::AdaptiveRk ? "adaptive_rk" : "expm_krylov";
}

Integrator integrator_from_string(const std::string& s)
{
    if (s == "adaptive_rk") return Integrator::AdaptiveRk;
    if (s == "expm_krylov") return Integrator::ExpmKrylov;
    throw ConfigError("unknown integrator '" + s + "' (adaptive_rk or expm_krylov)");
}

void OracleConfig::validate() const
{
    if (n_max < 3) throw ConfigError("oracle: n_max must be at least 3");
    if (ld_order != 1 && ld_order != 2) throw ConfigError("oracle: ld_order must be 1 or 2");
    if (!(abs_tol > 0.0) || !(rel_tol > 0.0)) {
        throw ConfigError("oracle: tolerances must be positive");
    }
    if (!(sample_dt > 0.0) || !(t_final >= 10.0 * sample_dt)) {
        throw ConfigError("oracle: need sample_dt > 0 and t_final >= 10 * sample_dt");
    }
    if (dimension() > max_dimension) {
        std::ostringstream os;
        os << "oracle: Hilbert-space dimension " << dimension() << " exceeds the cap "
           << max_dimension;
        throw ConfigError(os.str());
    }
}

OracleConfig rate_comparison_config(const RateResult& estimate, OracleConfig base)
{
    if (estimate.divergent || !(std::abs(estimate.gamma_rate) > 0.0)) {
        throw PreconditionError("rate_comparison_config: need a finite non-zero rate estimate");
    }
    const double g = std::abs(estimate.gamma_rate);
    base.axis = estimate.axis;
    base.t_final = estimate.gamma_rate > 0.0 ? 5.0 / g : 1.0 / g;
    base.sample_dt = base.t_final / 100.0;
    return base;
}

Liouvillian build_liouvillian(const SystemParams& p, const OracleConfig& cfg)
{
    p.validate();
    cfg.validate();
    using namespace basis;
    const int levels = cfg.phonon_levels();
    const int dim = cfg.dimension();
    const Axis axis = cfg.axis;
    const double omega = p.trap_frequency(axis);
    const double eta = p.eta(axis);

    const Eigen::MatrixXcd id_ph = Eigen::MatrixXcd::Identity(levels, levels);
    const Eigen::MatrixXcd x = position_operator(levels);
    Eigen::MatrixXcd number = Eigen::MatrixXcd::Zero(levels, levels);
    for (int m = 0; m < levels; ++m) number(m, m) = m;

    // Internal Hermitian part without the couplings that carry motion.
    Eigen::MatrixXcd h_int = Eigen::MatrixXcd::Zero(kDim, kDim);
    h_int(kG1Vac, kG1Vac) = -p.delta_pl();
    h_int(kEVac, kEVac) = -p.delta_pa;
    h_int(kG2Photon, kG2Photon) = -p.delta_pc();
    h_int(kG2Vac, kG2Photon) = h_int(kG2Photon, kG2Vac) = 0.5 * p.omega_p;

    SparseMatrixC h = kron(h_int, id_ph) + kron(Eigen::MatrixXcd::Identity(kDim, kDim),
                                                omega * number);
    const Eigen::MatrixXcd jc = internal_projector(kEVac, kG2Photon) +
                                internal_projector(kG2Photon, kEVac);
    const Eigen::MatrixXcd control_up = internal_projector(kEVac, kG1Vac);
    if (axis == Axis::Z) {
        // g cos(k x0 + eta x) to the requested order.
        Eigen::MatrixXcd mode = std::cos(p.kx0) * id_ph - eta * std::sin(p.kx0) * x;
        if (cfg.ld_order >= 2) mode -= 0.5 * eta * eta * std::cos(p.kx0) * x * x;
        h += kron(jc, p.g * mode);
        const Eigen::MatrixXcd ctrl =
            0.5 * p.omega_l * (control_up + control_up.adjoint());
        h += kron(ctrl, id_ph);
    } else {
        h += kron(p.g_eff() * jc, id_ph);
        const Eigen::MatrixXcd phase = phase_factor(x, eta, cfg.ld_order);
        h += kron(0.5 * p.omega_l * control_up, phase);
        h += kron(0.5 * p.omega_l * control_up.adjoint(), phase.adjoint());
    }

    std::vector<SparseMatrixC> jumps;
    jumps.push_back(kron(std::sqrt(2.0 * p.kappa) * internal_projector(kG2Vac, kG2Photon),
                         id_ph));
    const double u = std::sqrt(p.alpha(axis));
    for (const auto& [target, fraction] :
         {std::pair{kG1Vac, p.beta1}, std::pair{kG2Vac, p.beta2()}}) {
        if (fraction <= 0.0) continue;
        const Eigen::MatrixXcd lower = internal_projector(target, kEVac);
        if (cfg.recoil == RecoilModel::ProjectedKicks) {
            for (int s : {+1, -1}) {
                jumps.push_back(kron(std::sqrt(p.gamma * fraction) * lower,
                                     phase_factor(x, s * u * eta, cfg.ld_order)));
            }
        } else {
            jumps.push_back(kron(std::sqrt(2.0 * p.gamma * fraction) * lower, id_ph));
        }
    }

    SparseMatrixC h_eff = h;
    for (const auto& lk : jumps) {
        SparseMatrixC lk_dag = lk.adjoint();
        h_eff -= 0.5 * kI * (lk_dag * lk);
    }
    const SparseMatrixC id = sparse_identity(dim);
    const SparseMatrixC h_eff_conj = h_eff.conjugate();
    SparseMatrixC l = -kI * SparseMatrixC(Eigen::kroneckerProduct(id, h_eff)) +
                      kI * SparseMatrixC(Eigen::kroneckerProduct(h_eff_conj, id));
    for (const auto& lk : jumps) {
        const SparseMatrixC lk_conj = lk.conjugate();
        l += SparseMatrixC(Eigen::kroneckerProduct(lk_conj, lk));
    }
    l.prune(cd(0.0), 0.0);
    l.makeCompressed();

    Liouvillian out;
    out.matrix = std::move(l);
    out.dim = dim;
    out.phonon_levels = levels;
    out.omega = omega;
    out.eta = eta;
    out.axis = axis;
    return out;
}

Eigen::MatrixXcd fock_initial_state(int phonon_levels, int m0)
{
    if (m0 < 0 || m0 >= phonon_levels) throw ConfigError("initial Fock state outside cutoff");
    const int dim = 4 * phonon_levels;
    Eigen::MatrixXcd rho = Eigen::MatrixXcd::Zero(dim, dim);
    const int k = basis::kG2Vac * phonon_levels + m0;
    rho(k, k) = 1.0;
    return rho;
}

Eigen::MatrixXcd thermal_initial_state(int phonon_levels, double mean)
{
    if (!(mean >= 0.0)) throw ConfigError("thermal mean occupation must be non-negative");
    const int dim = 4 * phonon_levels;
    Eigen::MatrixXcd rho = Eigen::MatrixXcd::Zero(dim, dim);
    const double q = mean / (1.0 + mean);
    double norm = 0.0;
    for (int m = 0; m < phonon_levels; ++m) norm += std::pow(q, m);
    for (int m = 0; m < phonon_levels; ++m) {
        const int k = basis::kG2Vac * phonon_levels + m;
        rho(k, k) = std::pow(q, m) / norm;
    }
    return rho;
}

Eigen::VectorXcd propagate(const Liouvillian& L, const Eigen::VectorXcd& v, double t,
                           const OracleConfig& cfg)
{
    if (cfg.integrator == Integrator::AdaptiveRk) {
        DormandPrince rk(L.matrix, cfg.abs_tol, cfg.rel_tol);
        Eigen::VectorXcd y = v;
        rk.advance(y, t);
        return y;
    }
    KrylovExpm kx(L.matrix, cfg.abs_tol, cfg.rel_tol);
    return kx.apply(v, t);
}

OracleRun evolve(const Liouvillian& L, const Eigen::MatrixXcd& rho0, const OracleConfig& cfg)
{
    cfg.validate();
    const int dim = L.dim;
    if (rho0.rows() != dim || rho0.cols() != dim) {
        throw ConfigError("evolve: initial state has the wrong dimension");
    }
    if (std::abs(rho0.trace() - cd(1.0)) > 1e-10) {
        throw ConfigError("evolve: initial state must have unit trace");
    }
    if ((rho0 - rho0.adjoint()).norm() > 1e-10) {
        throw ConfigError("evolve: initial state must be Hermitian");
    }
    Eigen::VectorXcd v = Eigen::Map<const Eigen::VectorXcd>(rho0.data(), dim * dim);
    if (min_hermitian_eigenvalue(v, dim) < -1e-10) {
        throw ConfigError("evolve: initial state must be positive semidefinite");
    }

    OracleRun run;
    run.config = cfg;
    const Observables obs(L.phonon_levels);
    const int steps = static_cast<int>(std::llround(cfg.t_final / cfg.sample_dt));

    auto record = [&](double t) {
        TrajectorySample s;
        s.t = t;
        const cd tr = trace_of(v, dim);
        s.trace_err = std::abs(tr - cd(1.0));
        s.m_mean = diagonal_expectation(v, dim, obs.phonon);
        s.p_e = diagonal_expectation(v, dim, obs.excited);
        s.n_cav = diagonal_expectation(v, dim, obs.photon);
        run.trajectory.push_back(s);
        const auto marginal = phonon_marginal(v, L.phonon_levels);
        run.max_cutoff_population = std::max(run.max_cutoff_population, marginal.back());
        run.min_eigenvalue = std::min(run.min_eigenvalue, min_hermitian_eigenvalue(v, dim));
    };

    record(0.0);
    if (cfg.integrator == Integrator::AdaptiveRk) {
        DormandPrince rk(L.matrix, cfg.abs_tol, cfg.rel_tol);
        for (int k = 1; k <= steps; ++k) {
            rk.advance(v, cfg.sample_dt);
            record(k * cfg.sample_dt);
        }
    } else {
        KrylovExpm kx(L.matrix, cfg.abs_tol, cfg.rel_tol);
        for (int k = 1; k <= steps; ++k) {
            v = kx.apply(v, cfg.sample_dt);
            record(k * cfg.sample_dt);
        }
    }

    std::vector<double> ts;
    std::vector<double> ms;
    double worst_trace = 0.0;
    for (const auto& s : run.trajectory) {
        ts.push_back(s.t);
        ms.push_back(s.m_mean);
        worst_trace = std::max(worst_trace, s.trace_err);
    }
    bool ok = true;
    if (worst_trace > 1e-8) {
        run.diagnostics.push_back("trace drifted by " + std::to_string(worst_trace));
        ok = false;
    }
    if (run.min_eigenvalue < -1e-8) {
        run.diagnostics.push_back("density matrix lost positivity (min eigenvalue " +
                                  std::to_string(run.min_eigenvalue) + ")");
        ok = false;
    }
    if (run.max_cutoff_population > cfg.cutoff_threshold) {
        std::ostringstream os;
        os << "population " << run.max_cutoff_population << " at cutoff n_max=" << cfg.n_max
           << " exceeds " << cfg.cutoff_threshold << "; rerun with a larger n_max";
        run.diagnostics.push_back(os.str());
        ok = false;
    }
    try {
        const ExponentialFit fit = fit_exponential(ts, ms);
        run.gamma_fit = fit.rate;
        run.m_ss = fit.offset;
        run.m0_fit = fit.offset + fit.amplitude;
        run.fit_residual = fit.residual;
        if (!(fit.residual < cfg.fit_threshold)) {
            run.diagnostics.push_back("exponential fit residual " +
                                      std::to_string(fit.residual) + " above threshold");
            ok = false;
        }
    } catch (const std::exception& e) {
        run.diagnostics.push_back(std::string("fit failed: ") + e.what());
        run.fit_residual = std::numeric_limits<double>::infinity();
        ok = false;
    }
    run.converged = ok;
    return run;
}

ExponentialFit fit_exponential(const std::vector<double>& t, const std::vector<double>& y)
{
    const std::size_t n = t.size();
    if (n < 4 || y.size() != n) {
        throw ConfigError("fit_exponential: need at least 4 samples");
    }
    const double t0 = t.front();
    const double span = t.back() - t0;
    const auto [ymin, ymax] = std::minmax_element(y.begin(), y.end());
    const double range = *ymax - *ymin;
    if (!(span > 0.0)) throw ConfigError("fit_exponential: zero time span");
    if (!(range > 1e-12 * std::max(1.0, std::abs(*ymax)))) {
        throw ConfigError("fit_exponential: data is flat, rate is undetermined");
    }

    Eigen::VectorXd rhs(static_cast<Eigen::Index>(n));
    for (std::size_t i = 0; i < n; ++i) rhs(static_cast<Eigen::Index>(i)) = y[i];

    // For fixed rate the model is linear in (offset, amplitude).
    auto solve = [&](double rate, ExponentialFit& fit) {
        Eigen::MatrixXd a(static_cast<Eigen::Index>(n), 2);
        for (std::size_t i = 0; i < n; ++i) {
            a(static_cast<Eigen::Index>(i), 0) = 1.0;
            a(static_cast<Eigen::Index>(i), 1) = std::exp(-rate * (t[i] - t0));
        }
        const Eigen::Vector2d coef = a.colPivHouseholderQr().solve(rhs);
        const double sse = (a * coef - rhs).squaredNorm();
        fit.rate = rate;
        fit.offset = coef(0);
        fit.amplitude = coef(1);
        fit.residual = std::sqrt(sse / static_cast<double>(n)) / range;
        return sse;
    };

    std::vector<double> grid;
    for (int k = -240; k <= 240; ++k) {
        if (k == 0) continue;
        const double mag = std::pow(10.0, -3.0 + 6.0 * (std::abs(k) - 1) / 239.0) / span;
        if (k < 0 && mag * span > 50.0) continue;
        grid.push_back(k < 0 ? -mag : mag);
    }
    std::sort(grid.begin(), grid.end());
    std::size_t best = 0;
    double best_sse = std::numeric_limits<double>::infinity();
    ExponentialFit scratch;
    for (std::size_t i = 0; i < grid.size(); ++i) {
        const double sse = solve(grid[i], scratch);
        if (sse < best_sse) {
            best_sse = sse;
            best = i;
        }
    }
    double lo = grid[best > 0 ? best - 1 : 0];
    double hi = grid[std::min(best + 1, grid.size() - 1)];
    // Golden-section refinement between the neighbouring grid points.
    const double phi = 0.5 * (std::sqrt(5.0) - 1.0);
    double x1 = hi - phi * (hi - lo);
    double x2 = lo + phi * (hi - lo);
    double f1 = solve(x1, scratch);
    double f2 = solve(x2, scratch);
    for (int it = 0; it < 200 && (hi - lo) > 1e-12 * std::abs(hi) + 1e-300; ++it) {
        if (f1 < f2) {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - phi * (hi - lo);
            f1 = solve(x1, scratch);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + phi * (hi - lo);
            f2 = solve(x2, scratch);
        }
    }
    ExponentialFit fit;
    const double x_best = f1 < f2 ? x1 : x2;
    if (std::min(f1, f2) <= best_sse) {
        solve(x_best, fit);
    } else {
        solve(grid[best], fit);
    }
    return fit;
}

int kernel_dimension(const Liouvillian& L)
{
    SparseMatrixC m = L.matrix;
    m.makeCompressed();
    Eigen::SparseQR<SparseMatrixC, Eigen::COLAMDOrdering<int>> qr;
    qr.setPivotThreshold(1e-10 * std::max(1.0, m.norm()));
    qr.compute(m);
    if (qr.info() != Eigen::Success) {
        throw DivergenceError("kernel_dimension: sparse QR failed");
    }
    return static_cast<int>(m.cols() - qr.rank());
}

namespace {

SteadyState summarise_state(const Liouvillian& L, Eigen::VectorXcd v)
{
    const int dim = L.dim;
    v /= trace_of(v, dim);
    SteadyState out;
    out.rho = unvec(v, dim);
    out.rho = 0.5 * (out.rho + out.rho.adjoint()).eval();
    out.phonon_marginal = phonon_marginal(v, L.phonon_levels);
    const Observables obs(L.phonon_levels);
    out.mean_m = diagonal_expectation(v, dim, obs.phonon);
    out.p_e = diagonal_expectation(v, dim, obs.excited);
    out.n_cav = diagonal_expectation(v, dim, obs.photon);
    out.cutoff_population = out.phonon_marginal.back();
    out.physical = out.cutoff_population <= 1e-3;
    out.temperature_uk = out.mean_m > 0.0
                             ? quantum_temperature_uk(L.omega) / std::log1p(1.0 / out.mean_m)
                             : 0.0;
    return out;
}

Eigen::VectorXcd solve_with_trace_row(const SparseMatrixC& l, int dim, int replaced_diag,
                                      bool& ok)
{
    const int n = dim * dim;
    const int replaced_row = replaced_diag + dim * replaced_diag;
    std::vector<Triplet> trips;
    trips.reserve(static_cast<std::size_t>(l.nonZeros()) + static_cast<std::size_t>(dim));
    for (int col = 0; col < l.outerSize(); ++col) {
        for (SparseMatrixC::InnerIterator it(l, col); it; ++it) {
            if (it.row() != replaced_row) trips.emplace_back(it.row(), it.col(), it.value());
        }
    }
    for (int k = 0; k < dim; ++k) trips.emplace_back(replaced_row, k + dim * k, 1.0);
    SparseMatrixC a(n, n);
    a.setFromTriplets(trips.begin(), trips.end());
    a.makeCompressed();
    Eigen::SparseLU<SparseMatrixC, Eigen::COLAMDOrdering<int>> lu;
    lu.analyzePattern(a);
    lu.factorize(a);
    Eigen::VectorXcd rhs = Eigen::VectorXcd::Zero(n);
    rhs(replaced_row) = 1.0;
    if (lu.info() != Eigen::Success) {
        ok = false;
        return rhs;
    }
    Eigen::VectorXcd x = lu.solve(rhs);
    ok = lu.info() == Eigen::Success && x.allFinite();
    if (ok) {
        const double res = (l * x).norm() / std::max(1e-300, l.norm() * x.norm());
        ok = res < 1e-9;
    }
    return x;
}

}  // namespace

SteadyState steady_state(const Liouvillian& L)
{
    const int dim = L.dim;
    bool ok_first = false;
    bool ok_second = false;
    const Eigen::VectorXcd first = solve_with_trace_row(L.matrix, dim, 0, ok_first);
    const Eigen::VectorXcd second = solve_with_trace_row(L.matrix, dim, dim - 1, ok_second);
    if (ok_first && ok_second) {
        const double diff = (first - second).norm() / std::max(1e-300, first.norm());
        if (diff < 1e-6) {
            return summarise_state(L, first);
        }
    }
    const int kernel = kernel_dimension(L);
    if (kernel != 1) {
        throw DegenerateKernelError(kernel);
    }
    // Unique but badly conditioned: relax from the maximally mixed state.
    Eigen::VectorXcd v = Eigen::VectorXcd::Zero(dim * dim);
    for (int k = 0; k < dim; ++k) v(k + dim * k) = 1.0 / dim;
    KrylovExpm kx(L.matrix, 1e-12, 1e-10);
    double tau = 100.0;
    for (int it = 0; it < 30; ++it, tau *= 2.0) {
        const Eigen::VectorXcd next = kx.apply(v, tau);
        const double change = (next - v).norm();
        v = next;
        if (change < 1e-10) break;
    }
    SteadyState out = summarise_state(L, v);
    out.from_integration = true;
    return out;
}

}  // namespace ceit
