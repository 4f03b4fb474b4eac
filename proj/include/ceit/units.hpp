#pragma once

// Unit conventions used throughout the library.
//
// Frequencies enter and leave the program as linear frequencies in MHz.
// Internally every frequency, detuning, coupling and decay rate is an
// angular frequency in rad/us, and time is measured in us. Rates of
// population change (A+-, Gamma) are therefore in 1/us; user-facing output
// converts them to 1/ms.

#include <numbers>

namespace ceit {

inline constexpr double kPi = std::numbers::pi;
inline constexpr double kTwoPi = 2.0 * std::numbers::pi;

constexpr double mhz_to_angular(double f_mhz) { return kTwoPi * f_mhz; }
constexpr double angular_to_mhz(double w) { return w / kTwoPi; }

constexpr double per_us_to_per_ms(double rate) { return rate * 1e3; }
constexpr double per_ms_to_per_us(double rate) { return rate * 1e-3; }

namespace constants {
// CODATA 2018 exact / recommended values, SI.
inline constexpr double kHbar = 1.054571817e-34;
inline constexpr double kBoltzmann = 1.380649e-23;
inline constexpr double kAtomicMassUnit = 1.66053906660e-27;
inline constexpr double kCesiumMassAmu = 132.905451961;
inline constexpr double kCesiumD2WavelengthM = 852.347e-9;
}  // namespace constants

/// Recoil angular frequency hbar k^2 / (2m) in rad/us for light of the given
/// wavelength scattered by a particle of the given mass.
double recoil_angular_frequency(double wavelength_m, double mass_kg);

/// hbar*omega/k_B in microkelvin for an angular frequency in rad/us.
double quantum_temperature_uk(double omega);

}  // namespace ceit
