#include "ceit/thermometry.hpp"

#include "ceit/errors.hpp"
#include "ceit/units.hpp"

#include <algorithm>
#include <cmath>

namespace ceit {

ThermalState thermal_state(double omega, double mean_m, int cutoff)
{
    if (!(omega > 0.0)) throw ParameterError("thermal_state: trap frequency must be positive");
    if (!(mean_m >= 0.0) || !std::isfinite(mean_m)) {
        throw ParameterError("thermal_state: mean occupation must be finite and >= 0");
    }
    ThermalState s;
    s.omega = omega;
    s.mean_m = mean_m;
    const double q = mean_m / (1.0 + mean_m);
    int levels = cutoff;
    if (levels <= 0) {
        // tail beyond level n is q^n
        levels = q > 0.0 ? static_cast<int>(std::ceil(std::log(1e-14) / std::log(q))) + 1 : 1;
        levels = std::max(levels, 1);
    }
    s.p.resize(levels);
    double norm = 0.0;
    double w = 1.0;
    for (int m = 0; m < levels; ++m) {
        s.p[m] = w;
        norm += w;
        w *= q;
    }
    for (double& x : s.p) x /= norm;
    s.temperature_uk = temperature_from_mean_occ(omega, mean_m);
    return s;
}

ThermalState thermal_state_from_temperature(double omega, double temperature_uk, int cutoff)
{
    return thermal_state(omega, mean_occ_from_temperature(omega, temperature_uk), cutoff);
}

double temperature_from_mean_occ(double omega, double mean_m)
{
    if (!(mean_m >= 0.0)) throw ParameterError("mean occupation must be >= 0");
    if (mean_m == 0.0) return 0.0;
    return quantum_temperature_uk(omega) / std::log1p(1.0 / mean_m);
}

double mean_occ_from_temperature(double omega, double temperature_uk)
{
    if (!(temperature_uk >= 0.0)) throw ParameterError("temperature must be >= 0");
    if (temperature_uk == 0.0) return 0.0;
    return 1.0 / std::expm1(quantum_temperature_uk(omega) / temperature_uk);
}

double mean_occ_from_sideband_ratio(double r)
{
    if (!(r >= 0.0)) throw ParameterError("sideband ratio must be >= 0");
    if (!(r < 1.0)) {
        throw ParameterError("sideband ratio must be below 1 (red >= blue is not thermal)");
    }
    return r / (1.0 - r);
}

double ground_state_from_passage(double p_transfer, double efficiency)
{
    if (!(efficiency > 0.0 && efficiency <= 1.0)) {
        throw ParameterError("passage efficiency must be in (0, 1]");
    }
    if (!(p_transfer >= 0.0 && p_transfer <= efficiency)) {
        throw ParameterError("transfer probability must be in [0, efficiency]");
    }
    return 1.0 - p_transfer / efficiency;
}

double temperature_from_p0(double p0, double omega)
{
    if (!(p0 > 0.0 && p0 < 1.0)) throw ParameterError("p0 must be strictly between 0 and 1");
    if (!(omega > 0.0)) throw ParameterError("trap frequency must be positive");
    return quantum_temperature_uk(omega) / -std::log1p(-p0);
}

PulseModel PulseModel::defaults()
{
    PulseModel p;
    p.rabi = mhz_to_angular(2e-3);
    p.duration = kPi / p.rabi;
    p.eta_mw = 0.02;
    p.carrier_offset = mhz_to_angular(-1.0);
    return p;
}

double rabi_lineshape(double rabi, double detuning, double t)
{
    const double w2 = rabi * rabi + detuning * detuning;
    if (w2 == 0.0) return 0.0;
    const double s = std::sin(0.5 * std::sqrt(w2) * t);
    return rabi * rabi / w2 * s * s;
}

SidebandSpectrum synth_sideband_spectrum(const ThermalState& state, const PulseModel& pulse,
                                         int points)
{
    if (points < 3) throw ParameterError("spectrum needs at least 3 points");
    if (!(pulse.rabi > 0.0) || !(pulse.duration > 0.0) || !(pulse.eta_mw >= 0.0)) {
        throw ParameterError("invalid pulse model");
    }
    SidebandSpectrum out;
    out.pulse = pulse;
    out.omega = state.omega;
    const double lo = pulse.carrier_offset - 2.0 * state.omega;
    const double hi = pulse.carrier_offset + 2.0 * state.omega;
    out.delta_mw.resize(points);
    out.p_transfer.resize(points);
    for (int i = 0; i < points; ++i) {
        const double d = lo + (hi - lo) * i / (points - 1);
        const double x = d - pulse.carrier_offset;
        const double carrier = rabi_lineshape(pulse.rabi, x, pulse.duration);
        double total = 0.0;
        for (std::size_t m = 0; m < state.p.size(); ++m) {
            const double red = m > 0 ? rabi_lineshape(pulse.eta_mw * pulse.rabi *
                                                          std::sqrt(static_cast<double>(m)),
                                                      x + state.omega, pulse.duration)
                                     : 0.0;
            const double blue = rabi_lineshape(
                pulse.eta_mw * pulse.rabi * std::sqrt(static_cast<double>(m + 1)),
                x - state.omega, pulse.duration);
            total += state.p[m] * std::min(1.0, carrier + red + blue);
        }
        out.delta_mw[i] = d;
        out.p_transfer[i] = std::clamp(total, 0.0, 1.0);
    }
    return out;
}

double sideband_ratio(const SidebandSpectrum& s)
{
    const auto& x = s.delta_mw;
    const auto& y = s.p_transfer;
    if (x.size() < 3 || y.size() != x.size()) throw ParameterError("malformed spectrum");
    auto area = [&](double centre) {
        const double half = 0.5 * s.omega;
        double a = 0.0;
        for (std::size_t i = 1; i < x.size(); ++i) {
            const double xm = 0.5 * (x[i - 1] + x[i]);
            if (std::abs(xm - centre) > half) continue;
            auto excess = [&](std::size_t k) {
                return y[k] - rabi_lineshape(s.pulse.rabi, x[k] - s.pulse.carrier_offset,
                                             s.pulse.duration);
            };
            a += 0.5 * (excess(i - 1) + excess(i)) * (x[i] - x[i - 1]);
        }
        return a;
    };
    const double red = area(s.pulse.carrier_offset - s.omega);
    const double blue = area(s.pulse.carrier_offset + s.omega);
    if (!(blue > 0.0)) throw ParameterError("spectrum has no blue sideband");
    return std::max(0.0, red) / blue;
}

}  // namespace ceit
