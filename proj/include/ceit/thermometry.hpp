#pragma once

// Occupation numbers and temperatures from microwave sideband spectra and
// adiabatic-passage transfer probabilities, and synthetic sideband spectra.
//
// Trap and detuning frequencies are angular (rad/us), temperatures in uK.

#include <vector>

namespace ceit {

struct ThermalState {
    double omega = 0.0;
    double mean_m = 0.0;
    std::vector<double> p;  ///< occupation probabilities, normalised
    double temperature_uk = 0.0;
};

/// Geometric distribution with ratio mean/(1+mean), kept up to the level
/// where the remaining tail is below 1e-14 (or `cutoff` levels if given)
/// and renormalised.
ThermalState thermal_state(double omega, double mean_m, int cutoff = 0);
ThermalState thermal_state_from_temperature(double omega, double temperature_uk,
                                            int cutoff = 0);

/// T = (hbar omega / k_B) / ln(1 + 1/mean).
double temperature_from_mean_occ(double omega, double mean_m);
/// mean = 1 / (exp(hbar omega / k_B T) - 1).
double mean_occ_from_temperature(double omega, double temperature_uk);

/// <m> = r / (1 - r) for the red/blue sideband weight ratio r in [0, 1).
double mean_occ_from_sideband_ratio(double r);

/// Ground-state population p0 = 1 - P / efficiency, where `efficiency` is
/// the passage transfer probability for m >= 1 (1 = ideal).
double ground_state_from_passage(double p_transfer, double efficiency = 1.0);

/// Thermal temperature with ground-state population p0 in (0, 1).
double temperature_from_p0(double p0, double omega);

/// Square microwave pulse on the hyperfine transition.
struct PulseModel {
    double rabi = 0.0;            ///< carrier Rabi frequency
    double duration = 0.0;        ///< us
    double eta_mw = 0.0;          ///< effective Lamb-Dicke factor of the sidebands
    double carrier_offset = 0.0;  ///< position of the carrier on the delta_MW axis

    /// Carrier pi pulse with Rabi frequency 2pi 2 kHz, eta 0.02, carrier at
    /// -1 MHz.
    static PulseModel defaults();
};

struct SidebandSpectrum {
    std::vector<double> delta_mw;
    std::vector<double> p_transfer;
    PulseModel pulse;
    double omega = 0.0;  ///< trap frequency used for the sidebands
};

/// Transfer probability of a square pulse detuned by `detuning` with Rabi
/// frequency `rabi` and duration `t`.
double rabi_lineshape(double rabi, double detuning, double t);

/// First-order Lamb-Dicke spectrum: carrier plus red (m -> m-1, at
/// carrier - omega) and blue (m -> m+1, at carrier + omega) sidebands with
/// Rabi frequencies eta sqrt(m) and eta sqrt(m+1), averaged over the
/// thermal populations. `points` samples [carrier - 2 omega, carrier + 2 omega].
SidebandSpectrum synth_sideband_spectrum(const ThermalState& state, const PulseModel& pulse,
                                         int points = 8001);

/// Red/blue ratio of the sideband areas, each integrated over a window of
/// half-width omega/2 around its line after removing the carrier tail
/// predicted by the pulse model.
double sideband_ratio(const SidebandSpectrum& spectrum);

}  // namespace ceit
