#include "ceit/config.hpp"

#include "ceit/errors.hpp"
#include "ceit/units.hpp"

#include <charconv>
#include <fstream>
#include <iomanip>
#include <sstream>

namespace ceit {

namespace {

double* field(SystemParams& p, std::string_view key, bool& angular)
{
    angular = true;
    if (key == "g_mhz") return &p.g;
    if (key == "omega_l_mhz") return &p.omega_l;
    if (key == "omega_p_mhz") return &p.omega_p;
    if (key == "gamma_mhz") return &p.gamma;
    if (key == "kappa_mhz") return &p.kappa;
    if (key == "delta_ca_mhz") return &p.delta_ca;
    if (key == "delta_la_mhz") return &p.delta_la;
    if (key == "delta_pa_mhz") return &p.delta_pa;
    if (key == "omega_z_mhz") return &p.omega_z;
    if (key == "omega_y_mhz") return &p.omega_y;
    if (key == "omega_rec_mhz") return &p.omega_rec;
    angular = false;
    if (key == "kx0_rad") return &p.kx0;
    if (key == "beta1") return &p.beta1;
    if (key == "alpha_z") return &p.alpha_z;
    if (key == "alpha_y") return &p.alpha_y;
    return nullptr;
}

std::string trim(std::string_view s)
{
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return std::string(s.substr(b, e - b + 1));
}

}  // namespace

void set_param(SystemParams& p, std::string_view key, double value)
{
    bool angular = false;
    double* f = field(p, key, angular);
    if (f == nullptr) {
        throw ConfigError("unknown parameter key '" + std::string(key) + "'");
    }
    *f = angular ? mhz_to_angular(value) : value;
}

double get_param(const SystemParams& p, std::string_view key)
{
    bool angular = false;
    double* f = field(const_cast<SystemParams&>(p), key, angular);
    if (f == nullptr) {
        throw ConfigError("unknown parameter key '" + std::string(key) + "'");
    }
    return angular ? angular_to_mhz(*f) : *f;
}

SystemParams read_params(std::istream& in, SystemParams base)
{
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (const auto hash = line.find('#'); hash != std::string::npos) {
            line.erase(hash);
        }
        const std::string body = trim(line);
        if (body.empty()) continue;
        const auto eq = body.find_first_of("=:");
        if (eq == std::string::npos) {
            throw ConfigError("line " + std::to_string(lineno) + ": expected key = value");
        }
        const std::string key = trim(std::string_view(body).substr(0, eq));
        const std::string value = trim(std::string_view(body).substr(eq + 1));
        double v = 0.0;
        const auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), v);
        if (ec != std::errc() || ptr != value.data() + value.size()) {
            throw ConfigError("line " + std::to_string(lineno) + ": bad number '" + value +
                              "' for key " + key);
        }
        set_param(base, key, v);
    }
    return base;
}

SystemParams load_params_file(const std::string& path, SystemParams base)
{
    std::ifstream in(path);
    if (!in) {
        throw ConfigError("cannot open parameter file '" + path + "'");
    }
    return read_params(in, base);
}

std::string format_params_file(const SystemParams& p)
{
    std::ostringstream os;
    os << std::setprecision(17);
    for (auto key : kParamKeys) {
        os << key << " = " << get_param(p, key) << '\n';
    }
    return os.str();
}

nlohmann::json params_to_json(const SystemParams& p)
{
    nlohmann::json j;
    for (auto key : kParamKeys) {
        j[std::string(key)] = get_param(p, key);
    }
    j["derived"] = {
        {"delta_pc_mhz", angular_to_mhz(p.delta_pc())},
        {"delta_pl_mhz", angular_to_mhz(p.delta_pl())},
        {"delta_lc_mhz", angular_to_mhz(p.delta_lc())},
        {"g_eff_mhz", angular_to_mhz(p.g_eff())},
        {"cooperativity", p.cooperativity()},
        {"eta_z", p.eta(Axis::Z)},
        {"eta_y", p.eta(Axis::Y)},
        {"beta2", p.beta2()},
    };
    return j;
}

SystemParams params_from_json(const nlohmann::json& j, SystemParams base)
{
    for (auto key : kParamKeys) {
        const std::string k(key);
        if (j.contains(k)) {
            set_param(base, key, j.at(k).get<double>());
        }
    }
    return base;
}

}  // namespace ceit
