#include "ceit/units.hpp"

namespace ceit {

double recoil_angular_frequency(double wavelength_m, double mass_kg)
{
    const double k = kTwoPi / wavelength_m;
    const double omega_si = constants::kHbar * k * k / (2.0 * mass_kg);  // rad/s
    return omega_si * 1e-6;
}

double quantum_temperature_uk(double omega)
{
    const double omega_si = omega * 1e6;
    return constants::kHbar * omega_si / constants::kBoltzmann * 1e6;
}

}  // namespace ceit
