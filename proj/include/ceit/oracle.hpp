#pragma once

// Lindblad master-equation reference for the rate theory: the four internal
// states coupled to one truncated vibrational mode along a single axis.
//
// Density matrices live on internal (x) phonon, index i * (n_max + 1) + m.
// Superoperators act on the column-major vec(rho).

#include "ceit/model.hpp"
#include "ceit/rates.hpp"

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <complex>
#include <string>
#include <vector>

namespace ceit {

enum class Integrator { AdaptiveRk, ExpmKrylov };
enum class RecoilModel { ProjectedKicks, None };

std::string to_string(Integrator integrator);
Integrator integrator_from_string(const std::string& s);

struct OracleConfig {
    int n_max = 12;  ///< highest phonon number kept
    int ld_order = 1;  ///< order of the Lamb-Dicke expansion of all couplings
    Axis axis = Axis::Z;
    Integrator integrator = Integrator::AdaptiveRk;
    double abs_tol = 1e-10;
    double rel_tol = 1e-8;
    double t_final = 1000.0;  ///< us
    double sample_dt = 10.0;  ///< us
    RecoilModel recoil = RecoilModel::ProjectedKicks;
    int max_dimension = 256;  ///< cap on 4 * (n_max + 1)
    double fit_threshold = 0.02;  ///< accepted rms fit residual relative to the data range
    double cutoff_threshold = 1e-4;  ///< accepted population of level n_max

    void validate() const;
    int phonon_levels() const { return n_max + 1; }
    int dimension() const { return 4 * (n_max + 1); }
};

/// Window and sampling suited to extracting Gamma from a trajectory, given
/// the rate-theory estimate: 5/Gamma for cooling, 1/|Gamma| for heating.
OracleConfig rate_comparison_config(const RateResult& estimate, OracleConfig base = {});

using SparseMatrixC = Eigen::SparseMatrix<std::complex<double>>;

struct Liouvillian {
    SparseMatrixC matrix;
    int dim = 0;  ///< Hilbert-space dimension
    int phonon_levels = 0;
    double omega = 0.0;  ///< trap frequency of the simulated axis
    double eta = 0.0;
    Axis axis = Axis::Z;
};

Liouvillian build_liouvillian(const SystemParams& p, const OracleConfig& cfg);

/// |g2,0><g2,0| (x) |m0><m0|.
Eigen::MatrixXcd fock_initial_state(int phonon_levels, int m0);
/// |g2,0><g2,0| (x) thermal(mean), renormalised on the truncated space.
Eigen::MatrixXcd thermal_initial_state(int phonon_levels, double mean);

struct TrajectorySample {
    double t = 0.0;
    double m_mean = 0.0;
    double trace_err = 0.0;
    double p_e = 0.0;
    double n_cav = 0.0;
};

struct OracleRun {
    OracleConfig config;
    std::vector<TrajectorySample> trajectory;
    double gamma_fit = 0.0;  ///< 1/us
    double m_ss = 0.0;
    double m0_fit = 0.0;
    double fit_residual = 0.0;
    bool converged = false;
    double max_cutoff_population = 0.0;
    double min_eigenvalue = 0.0;  ///< smallest eigenvalue of rho seen along the run
    std::vector<std::string> diagnostics;
};

OracleRun evolve(const Liouvillian& L, const Eigen::MatrixXcd& rho0, const OracleConfig& cfg);

struct SteadyState {
    Eigen::MatrixXcd rho;
    std::vector<double> phonon_marginal;
    double mean_m = 0.0;
    double temperature_uk = 0.0;  ///< thermal distribution with the same mean
    double cutoff_population = 0.0;
    bool physical = true;  ///< false when the cutoff level holds more than 1e-3
    double p_e = 0.0;
    double n_cav = 0.0;
    bool from_integration = false;
};

/// Trace-one kernel vector of L. Throws DegenerateKernelError when the
/// kernel is not one-dimensional.
SteadyState steady_state(const Liouvillian& L);

/// Number of independent stationary states (kernel dimension of L).
int kernel_dimension(const Liouvillian& L);

/// Propagates vec(rho) by exp(t L). Used by evolve(); exposed for tests.
Eigen::VectorXcd propagate(const Liouvillian& L, const Eigen::VectorXcd& v, double t,
                           const OracleConfig& cfg);

struct ExponentialFit {
    double rate = 0.0;
    double offset = 0.0;     ///< value at t -> infinity
    double amplitude = 0.0;  ///< value at t = 0 minus offset
    double residual = 0.0;   ///< rms residual / data range
};

/// Least-squares fit y = offset + amplitude * exp(-rate * t).
ExponentialFit fit_exponential(const std::vector<double>& t, const std::vector<double>& y);

}  // namespace ceit
