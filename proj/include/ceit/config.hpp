#pragma once

// Flat key/value parameter files and the JSON echo of a resolved
// parameter set. Keys are linear frequencies in MHz (suffix _mhz),
// k x0 in radians and dimensionless fractions.

#include "ceit/model.hpp"

#include <nlohmann/json.hpp>

#include <array>
#include <istream>
#include <string>
#include <string_view>

namespace ceit {

inline constexpr std::array<std::string_view, 15> kParamKeys = {
    "g_mhz",        "omega_l_mhz",  "omega_p_mhz", "gamma_mhz",   "kappa_mhz",
    "delta_ca_mhz", "delta_la_mhz", "delta_pa_mhz", "omega_z_mhz", "omega_y_mhz",
    "omega_rec_mhz", "kx0_rad",     "beta1",        "alpha_z",     "alpha_y",
};

/// Sets one field from its file key; throws ConfigError on unknown keys.
void set_param(SystemParams& p, std::string_view key, double value);

/// Reads the value of one field in file units.
double get_param(const SystemParams& p, std::string_view key);

/// Parses "key = value" lines ('#' starts a comment) on top of `base`.
/// Missing keys keep their value from `base`.
SystemParams read_params(std::istream& in, SystemParams base = SystemParams::experiment_defaults());
SystemParams load_params_file(const std::string& path,
                              SystemParams base = SystemParams::experiment_defaults());

/// Writes every key in file format, one per line.
std::string format_params_file(const SystemParams& p);

/// Every field in file units plus derived quantities.
nlohmann::json params_to_json(const SystemParams& p);
SystemParams params_from_json(const nlohmann::json& j,
                              SystemParams base = SystemParams::experiment_defaults());

}  // namespace ceit
