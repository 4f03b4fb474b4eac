#include "ceit/cli.hpp"

#include "ceit/config.hpp"
#include "ceit/dressed.hpp"
#include "ceit/errors.hpp"
#include "ceit/oracle.hpp"
#include "ceit/rates.hpp"
#include "ceit/scan.hpp"
#include "ceit/thermometry.hpp"
#include "ceit/units.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <iostream>
#include <limits>
#include <optional>
#include <sstream>

namespace ceit {

namespace {

using nlohmann::json;

/// Raised for bad option values detected after CLI11 parsing.
class UsageError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct ParamFlags {
    std::optional<double> g, omega_l, omega_p, gamma, kappa;
    std::optional<double> delta_ca, delta_la, delta_pa, delta_pc;
    std::optional<double> omega_z, omega_y, omega_rec;
    std::optional<double> kx0, beta1, alpha_z, alpha_y;
    std::string config;
    bool defaults = false;
};

void add_param_flags(CLI::App* app, ParamFlags& f)
{
    auto grp = "System parameters (frequencies are linear, in MHz)";
    app->add_flag("--defaults", f.defaults,
                  "start from the built-in experiment parameters (also the default)")
        ->group(grp);
    app->add_option("--config", f.config, "parameter file with 'key = value' lines")
        ->check(CLI::ExistingFile)
        ->group(grp);
    app->add_option("--g-mhz", f.g, "atom-cavity coupling g at the antinode [MHz]")->group(grp);
    app->add_option("--omega-l-mhz", f.omega_l, "control Rabi frequency [MHz]")->group(grp);
    app->add_option("--omega-p-mhz", f.omega_p, "probe drive strength [MHz]")->group(grp);
    app->add_option("--gamma-mhz", f.gamma, "atomic dipole decay rate [MHz]")->group(grp);
    app->add_option("--kappa-mhz", f.kappa, "cavity field decay rate [MHz]")->group(grp);
    app->add_option("--delta-ca-mhz", f.delta_ca, "cavity-atom detuning [MHz]")->group(grp);
    app->add_option("--delta-la-mhz", f.delta_la, "control-atom detuning [MHz]")->group(grp);
    auto* pa = app->add_option("--delta-pa-mhz", f.delta_pa, "probe-atom detuning [MHz]")
                   ->group(grp);
    auto* pc = app->add_option("--delta-pc-mhz", f.delta_pc,
                               "probe-cavity detuning [MHz]; sets delta_PA = delta_CA + value")
                   ->group(grp);
    pc->excludes(pa);
    app->add_option("--omega-z-mhz", f.omega_z, "trap frequency along the cavity axis [MHz]")
        ->group(grp);
    app->add_option("--omega-y-mhz", f.omega_y, "trap frequency along the control axis [MHz]")
        ->group(grp);
    app->add_option("--omega-rec-mhz", f.omega_rec, "recoil frequency [MHz]")->group(grp);
    app->add_option("--kx0-rad", f.kx0, "trap position in the cavity mode, k x0 [rad]")
        ->group(grp);
    app->add_option("--beta1", f.beta1, "branching ratio of |e> into |g1>")->group(grp);
    app->add_option("--alpha-z", f.alpha_z, "recoil projection factor along z")->group(grp);
    app->add_option("--alpha-y", f.alpha_y, "recoil projection factor along y")->group(grp);
}

SystemParams apply_flags(const ParamFlags& f);

/// Names the first flag that on its own makes the defaults invalid.
std::string offending_flag(const ParamFlags& f)
{
    const std::pair<const char*, std::optional<double> ParamFlags::*> flags[] = {
        {"--g-mhz", &ParamFlags::g},           {"--omega-l-mhz", &ParamFlags::omega_l},
        {"--omega-p-mhz", &ParamFlags::omega_p}, {"--gamma-mhz", &ParamFlags::gamma},
        {"--kappa-mhz", &ParamFlags::kappa},   {"--delta-ca-mhz", &ParamFlags::delta_ca},
        {"--delta-la-mhz", &ParamFlags::delta_la}, {"--delta-pa-mhz", &ParamFlags::delta_pa},
        {"--delta-pc-mhz", &ParamFlags::delta_pc}, {"--omega-z-mhz", &ParamFlags::omega_z},
        {"--omega-y-mhz", &ParamFlags::omega_y}, {"--omega-rec-mhz", &ParamFlags::omega_rec},
        {"--kx0-rad", &ParamFlags::kx0},       {"--beta1", &ParamFlags::beta1},
        {"--alpha-z", &ParamFlags::alpha_z},   {"--alpha-y", &ParamFlags::alpha_y},
    };
    for (const auto& [name, member] : flags) {
        if (!(f.*member)) continue;
        ParamFlags single;
        single.*member = f.*member;
        try {
            apply_flags(single).validate();
        } catch (const ParameterError&) {
            return std::string(name) + ": ";
        }
    }
    return f.config.empty() ? "invalid parameter value: " : "--config: ";
}

SystemParams apply_flags(const ParamFlags& f)
{
    SystemParams p = SystemParams::experiment_defaults();
    if (!f.config.empty()) {
        try {
            p = load_params_file(f.config, p);
        } catch (const ConfigError& e) {
            throw UsageError(std::string("--config: ") + e.what());
        }
    }
    auto set = [](double& field, const std::optional<double>& v) {
        if (v) field = mhz_to_angular(*v);
    };
    set(p.g, f.g);
    set(p.omega_l, f.omega_l);
    set(p.omega_p, f.omega_p);
    set(p.gamma, f.gamma);
    set(p.kappa, f.kappa);
    set(p.delta_ca, f.delta_ca);
    set(p.delta_la, f.delta_la);
    set(p.delta_pa, f.delta_pa);
    set(p.omega_z, f.omega_z);
    set(p.omega_y, f.omega_y);
    set(p.omega_rec, f.omega_rec);
    if (f.delta_pc) p.set_delta_pc(mhz_to_angular(*f.delta_pc));
    if (f.kx0) p.kx0 = *f.kx0;
    if (f.beta1) p.beta1 = *f.beta1;
    if (f.alpha_z) p.alpha_z = *f.alpha_z;
    if (f.alpha_y) p.alpha_y = *f.alpha_y;
    return p;
}

SystemParams resolve_params(const ParamFlags& f)
{
    const SystemParams p = apply_flags(f);
    try {
        p.validate();
    } catch (const ParameterError& e) {
        throw UsageError(offending_flag(f) + e.what());
    }
    return p;
}

std::string command_line(int argc, const char* const* argv)
{
    std::string s;
    for (int i = 0; i < argc; ++i) {
        if (i) s += ' ';
        s += argv[i];
    }
    return s;
}

std::string number(double v)
{
    if (!std::isfinite(v)) return "nan";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.10g", v);
    return buf;
}

json finite_or_null(double v)
{
    return std::isfinite(v) ? json(v) : json(nullptr);
}

json pair_json(const ChannelPair& c)
{
    return {{"plus", finite_or_null(per_us_to_per_ms(c.plus))},
            {"minus", finite_or_null(per_us_to_per_ms(c.minus))}};
}

json rate_json(const RateResult& r)
{
    json j;
    j["method"] = to_string(r.method);
    j["axis"] = to_string(r.axis);
    j["probe"] = to_string(r.probe);
    j["units"] = "1/ms";
    j["omega_mhz"] = angular_to_mhz(r.omega);
    j["divergent"] = r.divergent;
    if (r.divergent) j["divergence_reason"] = r.divergence_reason;
    j["a_plus"] = finite_or_null(per_us_to_per_ms(r.a_plus));
    j["a_minus"] = finite_or_null(per_us_to_per_ms(r.a_minus));
    j["gamma_rate"] = finite_or_null(per_us_to_per_ms(r.gamma_rate));
    j["m_st"] = r.m_st ? json(*r.m_st) : json(nullptr);
    j["channels"] = {
        {"diffusion", finite_or_null(per_us_to_per_ms(r.channels.diffusion))},
        {"atomic", pair_json(r.channels.atomic)},
        {"cavity", pair_json(r.channels.cavity)},
        {"repump_share", pair_json(r.channels.repump)},
    };
    j["weak_probe"] = pair_json(r.weak_probe);
    j["warnings"] = r.warnings;
    return j;
}

/// Writes to --out (atomically) or to the output stream.
void emit(const std::string& path, const std::string& content, std::ostream& out)
{
    if (path.empty()) {
        out << content;
    } else {
        write_file_atomic(path, content);
    }
}

std::string csv_header(const json& provenance)
{
    return "# " + provenance.dump() + "\n";
}

json provenance(const std::string& cmd, const SystemParams& p)
{
    return {{"program", "ceit"}, {"version", kVersion}, {"command", cmd},
            {"params", params_to_json(p)}};
}

int default_workers()
{
    if (const char* env = std::getenv("CEIT_WORKERS")) {
        char* end = nullptr;
        const long v = std::strtol(env, &end, 10);
        if (end != env && *end == '\0' && v >= 1 && v <= 1024) return static_cast<int>(v);
    }
    return 1;
}

void diagnostic(std::ostream& err, const std::string& kind, const std::string& message)
{
    err << json{{"error", "computation"}, {"kind", kind}, {"message", message}}.dump() << "\n";
}

}  // namespace

int parse_and_dispatch(int argc, const char* const* argv, std::ostream& out, std::ostream& err)
{
    CLI::App app{"Cavity-assisted EIT cooling: dressed states, rates, maps and master-equation "
                 "checks"};
    app.name("ceit");
    app.require_subcommand(1, 1);
    app.set_version_flag("--version", kVersion);

    std::string format = "json";
    std::string out_path;
    auto add_output = [&](CLI::App* sub, const std::string& default_format) {
        sub->add_option("--format", format, "output format (csv or json), default " +
                                                default_format)
            ->check(CLI::IsMember({"csv", "json"}));
        sub->add_option("--out", out_path, "output file (default: standard output)");
    };

    ParamFlags pf;

    auto* params_cmd = app.add_subcommand("params", "print the resolved parameter set");
    add_param_flags(params_cmd, pf);
    add_output(params_cmd, "json");

    auto* dressed_cmd = app.add_subcommand("dressed", "dressed states and sideband resonances");
    add_param_flags(dressed_cmd, pf);
    add_output(dressed_cmd, "json");
    std::string dressed_axis = "z";
    dressed_cmd->add_option("--axis", dressed_axis, "trap axis for sideband positions (z or y)")
        ->check(CLI::IsMember({"z", "y"}));

    auto* spectrum_cmd =
        app.add_subcommand("spectrum", "weak-probe excitation spectrum over delta_PC");
    add_param_flags(spectrum_cmd, pf);
    add_output(spectrum_cmd, "csv");
    double spec_from = -30.0;
    double spec_to = 15.0;
    int spec_points = 451;
    spectrum_cmd->add_option("--from-mhz", spec_from, "first probe-cavity detuning [MHz]");
    spectrum_cmd->add_option("--to-mhz", spec_to, "last probe-cavity detuning [MHz]");
    spectrum_cmd->add_option("--points", spec_points, "number of points")
        ->check(CLI::Range(2, 10000000));

    auto* rates_cmd = app.add_subcommand("rates", "heating/cooling rates of one axis");
    add_param_flags(rates_cmd, pf);
    add_output(rates_cmd, "json");
    std::string rates_axis = "z";
    std::string rates_method = "resolvent";
    std::string probe_name = "weak";
    rates_cmd->add_option("--axis", rates_axis, "motional axis (z or y)")
        ->check(CLI::IsMember({"z", "y"}));
    rates_cmd->add_option("--method", rates_method, "resolvent, ceit or free-space")
        ->check(CLI::IsMember({"resolvent", "ceit", "free-space"}));
    rates_cmd->add_option("--probe", probe_name,
                          "resolvent probe treatment: weak (leading order) or saturated")
        ->check(CLI::IsMember({"weak", "saturated"}));

    auto* scan_cmd = app.add_subcommand("scan", "2-D map of cooling rates");
    add_param_flags(scan_cmd, pf);
    std::string preset;
    std::string scan_x;
    std::string scan_y;
    std::string scan_axes;
    std::string policy_name;
    int workers = default_workers();
    scan_cmd->add_option("--preset", preset, "fig2a or fig3a")
        ->check(CLI::IsMember({"fig2a", "fig3a"}));
    scan_cmd->add_option("--x", scan_x, "x axis as name:lo_mhz:hi_mhz:n, name one of "
                                        "delta_pc, delta_la, delta_pa");
    scan_cmd->add_option("--y", scan_y, "y axis, same syntax as --x");
    scan_cmd->add_option("--axes", scan_axes, "motional axes to compute: z or z,y");
    scan_cmd->add_option("--policy", policy_name,
                         "classification: z_only or z_and_y_veto (default: z_and_y_veto "
                         "when y is computed)")
        ->check(CLI::IsMember({"z_only", "z_and_y_veto"}));
    scan_cmd->add_option("--probe", probe_name, "weak or saturated")
        ->check(CLI::IsMember({"weak", "saturated"}));
    scan_cmd->add_option("--workers", workers,
                         "worker threads (default from CEIT_WORKERS, else 1)")
        ->check(CLI::Range(1, 1024));
    scan_cmd->add_option("--out", out_path, "CSV output file; a .json sidecar is written next "
                                            "to it (default: standard output)");

    auto* oracle_cmd =
        app.add_subcommand("oracle", "Lindblad master-equation run for one motional axis");
    add_param_flags(oracle_cmd, pf);
    OracleConfig ocfg;
    std::string oracle_axis = "z";
    std::string integrator = "adaptive_rk";
    std::string recoil = "projected_kicks";
    std::optional<double> t_final_us;
    std::optional<double> sample_dt_us;
    int m0 = 2;
    std::optional<double> thermal_mean;
    bool steady = false;
    oracle_cmd->add_option("--axis", oracle_axis, "motional axis (z or y)")
        ->check(CLI::IsMember({"z", "y"}));
    oracle_cmd->add_option("--n-max", ocfg.n_max, "highest phonon number kept");
    oracle_cmd->add_option("--ld-order", ocfg.ld_order, "Lamb-Dicke expansion order (1 or 2)");
    oracle_cmd->add_option("--integrator", integrator, "adaptive_rk or expm_krylov")
        ->check(CLI::IsMember({"adaptive_rk", "expm_krylov"}));
    oracle_cmd->add_option("--recoil", recoil, "projected_kicks or none")
        ->check(CLI::IsMember({"projected_kicks", "none"}));
    oracle_cmd->add_option("--abs-tol", ocfg.abs_tol, "absolute integration tolerance");
    oracle_cmd->add_option("--rel-tol", ocfg.rel_tol, "relative integration tolerance");
    oracle_cmd->add_option("--t-final-us", t_final_us,
                           "run length [us] (default: 5/Gamma, or 1/|Gamma| when heating)");
    oracle_cmd->add_option("--sample-dt-us", sample_dt_us,
                           "sampling interval [us] (default: run length / 100)");
    oracle_cmd->add_option("--m0", m0, "initial Fock state of the motion");
    oracle_cmd->add_option("--thermal-mean", thermal_mean,
                           "start from a thermal state with this mean instead of --m0");
    oracle_cmd->add_option("--max-dimension", ocfg.max_dimension,
                           "cap on the Hilbert-space dimension 4 (n_max + 1)");
    oracle_cmd->add_flag("--steady", steady, "solve for the steady state instead of evolving");
    oracle_cmd->add_option("--out", out_path,
                           "trajectory CSV file (summary JSON goes to standard output)");

    auto* thermo_cmd = app.add_subcommand("thermometry", "occupation and temperature estimates");
    thermo_cmd->require_subcommand(1, 1);
    double ratio_r = 0.0;
    auto* ratio_cmd = thermo_cmd->add_subcommand("ratio", "<m> from a red/blue sideband ratio");
    ratio_cmd->add_option("--r", ratio_r, "red/blue sideband weight ratio")->required();
    double passage_p = 0.0;
    double passage_eff = 1.0;
    std::optional<double> thermo_omega;
    auto* passage_cmd =
        thermo_cmd->add_subcommand("passage", "p0 and temperature from a passage transfer");
    passage_cmd->add_option("--p", passage_p, "transfer probability on m -> m-1")->required();
    passage_cmd->add_option("--omega-mhz", thermo_omega, "trap frequency [MHz]");
    passage_cmd->add_option("--efficiency", passage_eff, "passage efficiency for m >= 1");
    double synth_mean = 0.0;
    double synth_omega = 0.3;
    int synth_points = 8001;
    PulseModel pulse = PulseModel::defaults();
    double pulse_rabi_khz = angular_to_mhz(pulse.rabi) * 1e3;
    double pulse_offset_mhz = angular_to_mhz(pulse.carrier_offset);
    std::optional<double> pulse_duration;
    auto* synth_cmd = thermo_cmd->add_subcommand("synth", "synthetic microwave sideband spectrum");
    synth_cmd->add_option("--mean-m", synth_mean, "mean phonon number")->required();
    synth_cmd->add_option("--omega-mhz", synth_omega, "trap frequency [MHz]");
    synth_cmd->add_option("--points", synth_points, "number of detuning points")
        ->check(CLI::Range(3, 10000000));
    synth_cmd->add_option("--rabi-khz", pulse_rabi_khz, "carrier Rabi frequency [kHz]");
    synth_cmd->add_option("--duration-us", pulse_duration,
                          "pulse length [us] (default: carrier pi pulse)");
    synth_cmd->add_option("--eta-mw", pulse.eta_mw, "sideband Lamb-Dicke factor");
    synth_cmd->add_option("--carrier-mhz", pulse_offset_mhz, "carrier position [MHz]");
    for (auto* sub : {ratio_cmd, passage_cmd, synth_cmd}) add_output(sub, "json");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return 0;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return 0;
    } catch (const CLI::CallForVersion&) {
        out << kVersion << "\n";
        return 0;
    } catch (const CLI::ParseError& e) {
        err << "usage error: " << e.what() << "\n";
        err << "run 'ceit --help' for the list of options\n";
        return 2;
    }

    const std::string cmd = command_line(argc, argv);
    try {
        if (*params_cmd) {
            const SystemParams p = resolve_params(pf);
            if (format == "csv") {
                std::string s = "key,value\n";
                for (auto key : kParamKeys) {
                    s += std::string(key) + "," + number(get_param(p, key)) + "\n";
                }
                emit(out_path, s, out);
            } else {
                json j = provenance(cmd, p);
                emit(out_path, j.dump(2) + "\n", out);
            }
            return 0;
        }

        if (*dressed_cmd) {
            const SystemParams p = resolve_params(pf);
            const Axis axis = axis_from_string(dressed_axis);
            const DressedSet set = dressed_states(p);
            const auto sidebands = sideband_resonance_frequencies(p, p.trap_frequency(axis));
            if (format == "csv") {
                std::string s = csv_header(provenance(cmd, p));
                s += "label,frequency_mhz,linewidth_mhz,weight_g1,weight_cav,weight_e,"
                     "red_sideband_mhz,blue_sideband_mhz\n";
                for (std::size_t k = 0; k < 3; ++k) {
                    const auto& st = set.states[k];
                    s += to_string(st.label) + "," + number(angular_to_mhz(st.frequency)) + "," +
                         number(angular_to_mhz(st.linewidth)) + "," +
                         number(std::norm(st.vector(block::kG1))) + "," +
                         number(std::norm(st.vector(block::kCav))) + "," +
                         number(std::norm(st.vector(block::kE))) + "," +
                         number(angular_to_mhz(sidebands[k].red)) + "," +
                         number(angular_to_mhz(sidebands[k].blue)) + "\n";
                }
                emit(out_path, s, out);
            } else {
                json j = provenance(cmd, p);
                json states = json::array();
                for (std::size_t k = 0; k < 3; ++k) {
                    const auto& st = set.states[k];
                    states.push_back({
                        {"label", to_string(st.label)},
                        {"frequency_mhz", angular_to_mhz(st.frequency)},
                        {"linewidth_mhz", angular_to_mhz(st.linewidth)},
                        {"weights",
                         {{"g1_0", std::norm(st.vector(block::kG1))},
                          {"g2_1", std::norm(st.vector(block::kCav))},
                          {"e_0", std::norm(st.vector(block::kE))}}},
                        {"red_sideband_mhz", angular_to_mhz(sidebands[k].red)},
                        {"blue_sideband_mhz", angular_to_mhz(sidebands[k].blue)},
                    });
                }
                j["states"] = states;
                j["sideband_axis"] = dressed_axis;
                j["exceptional"] = set.exceptional;
                emit(out_path, j.dump(2) + "\n", out);
            }
            return 0;
        }

        if (*spectrum_cmd) {
            const SystemParams p = resolve_params(pf);
            std::vector<double> grid(spec_points);
            for (int i = 0; i < spec_points; ++i) {
                const double dpc = spec_from + (spec_to - spec_from) * i / (spec_points - 1);
                grid[i] = p.delta_ca + mhz_to_angular(dpc);
            }
            const auto points = excitation_spectrum(p, grid);
            if (format == "json") {
                json j = provenance(cmd, p);
                json rows = json::array();
                for (const auto& pt : points) {
                    rows.push_back({{"delta_pc_mhz", angular_to_mhz(pt.delta_pa - p.delta_ca)},
                                    {"delta_pa_mhz", angular_to_mhz(pt.delta_pa)},
                                    {"p_e", finite_or_null(pt.p_e)},
                                    {"n_cav", finite_or_null(pt.n_cav)},
                                    {"transmission", finite_or_null(pt.transmission)}});
                }
                j["spectrum"] = rows;
                emit(out_path, j.dump(2) + "\n", out);
            } else {
                std::string s = csv_header(provenance(cmd, p));
                s += "delta_pc_mhz,delta_pa_mhz,p_e,n_cav,transmission\n";
                for (const auto& pt : points) {
                    s += number(angular_to_mhz(pt.delta_pa - p.delta_ca)) + "," +
                         number(angular_to_mhz(pt.delta_pa)) + "," + number(pt.p_e) + "," +
                         number(pt.n_cav) + "," + number(pt.transmission) + "\n";
                }
                emit(out_path, s, out);
            }
            return 0;
        }

        if (*rates_cmd) {
            const SystemParams p = resolve_params(pf);
            const Axis axis = axis_from_string(rates_axis);
            RateResult r;
            if (rates_method == "resolvent") {
                r = rates_resolvent(p, axis, std::nullopt, probe_model_from_string(probe_name));
            } else if (rates_method == "ceit") {
                if (axis != Axis::Z) throw UsageError("--method ceit is defined for --axis z only");
                r = rates_ceit_analytic(p);
            } else {
                if (axis != Axis::Y) {
                    throw UsageError("--method free-space is defined for --axis y only");
                }
                r = rates_free_space_eit(p);
            }
            if (r.divergent) {
                diagnostic(err, "divergent_rate", r.divergence_reason);
                return 1;
            }
            json j = rate_json(r);
            if (format == "csv") {
                std::string s = csv_header(provenance(cmd, p));
                s += "method,axis,a_plus_per_ms,a_minus_per_ms,gamma_per_ms,m_st\n";
                s += to_string(r.method) + "," + to_string(r.axis) + "," +
                     number(per_us_to_per_ms(r.a_plus)) + "," +
                     number(per_us_to_per_ms(r.a_minus)) + "," +
                     number(per_us_to_per_ms(r.gamma_rate)) + "," +
                     (r.m_st ? number(*r.m_st) : std::string("nan")) + "\n";
                emit(out_path, s, out);
            } else {
                j["provenance"] = provenance(cmd, p);
                emit(out_path, j.dump(2) + "\n", out);
            }
            return 0;
        }

        if (*scan_cmd) {
            ScanGrid grid;
            try {
                if (!preset.empty()) {
                    grid = preset_grid(preset);
                    if (!scan_x.empty() || !scan_y.empty()) {
                        throw UsageError("--preset cannot be combined with --x/--y");
                    }
                } else {
                    if (scan_x.empty() || scan_y.empty()) {
                        throw UsageError("scan needs --preset or both --x and --y");
                    }
                    grid.x = parse_scan_axis(scan_x);
                    grid.y = parse_scan_axis(scan_y);
                }
                if (!scan_axes.empty()) {
                    if (scan_axes == "z") grid.axes = {Axis::Z};
                    else if (scan_axes == "z,y" || scan_axes == "y,z") grid.axes = {Axis::Z, Axis::Y};
                    else throw UsageError("--axes must be z or z,y");
                }
            } catch (const ConfigError& e) {
                throw UsageError(std::string("--x/--y: ") + e.what());
            }
            grid.baseline = resolve_params(pf);
            grid.probe = probe_model_from_string(probe_name);
            ClassPolicy policy = grid.has_axis(Axis::Y) ? ClassPolicy::ZAndYVeto
                                                        : ClassPolicy::ZOnly;
            if (!policy_name.empty()) policy = class_policy_from_string(policy_name);
            if (policy == ClassPolicy::ZAndYVeto && !grid.has_axis(Axis::Y)) {
                throw UsageError("--policy z_and_y_veto needs --axes z,y");
            }
            try {
                grid.validate();
            } catch (const ConfigError& e) {
                throw UsageError(std::string("scan grid: ") + e.what());
            }
            const ScanResult result = run_scan(grid, workers);
            const std::string csv = scan_csv(result, policy);
            if (out_path.empty()) {
                out << csv;
            } else {
                json side = scan_provenance(result, policy);
                side["command"] = cmd;
                side["argv"] = std::vector<std::string>(argv, argv + argc);
                side["workers"] = workers;
                side["csv"] = out_path;
                write_file_atomic(out_path, csv);
                write_file_atomic(out_path + ".json", side.dump(2) + "\n");
            }
            return 0;
        }

        if (*oracle_cmd) {
            const SystemParams p = resolve_params(pf);
            ocfg.axis = axis_from_string(oracle_axis);
            ocfg.integrator = integrator_from_string(integrator);
            ocfg.recoil = recoil == "none" ? RecoilModel::None : RecoilModel::ProjectedKicks;
            const RateResult estimate = rates_resolvent(p, ocfg.axis);
            try {
                if (!t_final_us && !estimate.divergent && estimate.gamma_rate != 0.0) {
                    const OracleConfig tuned = rate_comparison_config(estimate, ocfg);
                    ocfg.t_final = tuned.t_final;
                    ocfg.sample_dt = tuned.sample_dt;
                }
                if (t_final_us) {
                    ocfg.t_final = *t_final_us;
                    ocfg.sample_dt = ocfg.t_final / 100.0;
                }
                if (sample_dt_us) ocfg.sample_dt = *sample_dt_us;
                ocfg.validate();
            } catch (const ConfigError& e) {
                throw UsageError(e.what());
            }
            const Liouvillian L = build_liouvillian(p, ocfg);
            json j = provenance(cmd, p);
            j["n_max"] = ocfg.n_max;
            j["ld_order"] = ocfg.ld_order;
            j["axis"] = oracle_axis;
            j["rate_estimate"] = rate_json(estimate);
            if (steady) {
                const SteadyState ss = steady_state(L);
                j["steady_state"] = {{"mean_m", ss.mean_m},
                                     {"temperature_uk", ss.temperature_uk},
                                     {"cutoff_population", ss.cutoff_population},
                                     {"physical", ss.physical},
                                     {"p_e", ss.p_e},
                                     {"n_cav", ss.n_cav},
                                     {"phonon_marginal", ss.phonon_marginal},
                                     {"from_integration", ss.from_integration}};
                out << j.dump(2) << "\n";
                return 0;
            }
            Eigen::MatrixXcd rho0;
            try {
                rho0 = thermal_mean ? thermal_initial_state(ocfg.phonon_levels(), *thermal_mean)
                                    : fock_initial_state(ocfg.phonon_levels(), m0);
            } catch (const ConfigError& e) {
                throw UsageError(std::string("initial state: ") + e.what());
            }
            const OracleRun run = evolve(L, rho0, ocfg);
            j["integrator"] = integrator;
            j["t_final_us"] = ocfg.t_final;
            j["sample_dt_us"] = ocfg.sample_dt;
            j["gamma_fit_per_ms"] = per_us_to_per_ms(run.gamma_fit);
            j["m_ss"] = run.m_ss;
            j["residual"] = run.fit_residual;
            j["converged"] = run.converged;
            j["max_cutoff_population"] = run.max_cutoff_population;
            j["diagnostics"] = run.diagnostics;
            if (!out_path.empty()) {
                std::string s = csv_header(j);
                s += "t_us,m_mean,trace_err,p_e,n_cav\n";
                for (const auto& smp : run.trajectory) {
                    s += number(smp.t) + "," + number(smp.m_mean) + "," + number(smp.trace_err) +
                         "," + number(smp.p_e) + "," + number(smp.n_cav) + "\n";
                }
                write_file_atomic(out_path, s);
            }
            out << j.dump(2) << "\n";
            return 0;
        }

        if (*thermo_cmd) {
            json j{{"program", "ceit"}, {"version", kVersion}, {"command", cmd}};
            try {
                if (*ratio_cmd) {
                    j["r"] = ratio_r;
                    j["mean_m"] = mean_occ_from_sideband_ratio(ratio_r);
                } else if (*passage_cmd) {
                    const double p0 = ground_state_from_passage(passage_p, passage_eff);
                    j["p_transfer"] = passage_p;
                    j["efficiency"] = passage_eff;
                    j["p0"] = p0;
                    if (thermo_omega) {
                        const double w = mhz_to_angular(*thermo_omega);
                        j["omega_mhz"] = *thermo_omega;
                        j["temperature_uk"] = temperature_from_p0(p0, w);
                        j["mean_m"] = (1.0 - p0) / p0;
                    }
                } else {
                    pulse.rabi = mhz_to_angular(pulse_rabi_khz * 1e-3);
                    pulse.duration = pulse_duration ? *pulse_duration : kPi / pulse.rabi;
                    pulse.carrier_offset = mhz_to_angular(pulse_offset_mhz);
                    const ThermalState st = thermal_state(mhz_to_angular(synth_omega), synth_mean);
                    const SidebandSpectrum spec = synth_sideband_spectrum(st, pulse, synth_points);
                    j["mean_m"] = synth_mean;
                    j["omega_mhz"] = synth_omega;
                    j["pulse"] = {{"rabi_khz", pulse_rabi_khz},
                                  {"duration_us", pulse.duration},
                                  {"eta_mw", pulse.eta_mw},
                                  {"carrier_mhz", pulse_offset_mhz}};
                    const double r = sideband_ratio(spec);
                    j["sideband_ratio"] = r;
                    if (format == "csv" || !out_path.empty()) {
                        std::string s = csv_header(j);
                        s += "delta_mw_mhz,p_transfer\n";
                        for (std::size_t i = 0; i < spec.delta_mw.size(); ++i) {
                            s += number(angular_to_mhz(spec.delta_mw[i])) + "," +
                                 number(spec.p_transfer[i]) + "\n";
                        }
                        emit(out_path, s, out);
                        if (!out_path.empty()) out << j.dump(2) << "\n";
                        return 0;
                    }
                    json rows = json::array();
                    for (std::size_t i = 0; i < spec.delta_mw.size(); ++i) {
                        rows.push_back({angular_to_mhz(spec.delta_mw[i]), spec.p_transfer[i]});
                    }
                    j["spectrum"] = rows;
                }
            } catch (const ParameterError& e) {
                throw UsageError(e.what());
            }
            if (format == "csv") {
                std::string s = "key,value\n";
                for (auto& [k, v] : j.items()) {
                    if (v.is_number()) s += k + "," + number(v.get<double>()) + "\n";
                }
                emit(out_path, s, out);
            } else {
                emit(out_path, j.dump(2) + "\n", out);
            }
            return 0;
        }
    } catch (const UsageError& e) {
        err << "usage error: " << e.what() << "\n";
        return 2;
    } catch (const PreconditionError& e) {
        diagnostic(err, "precondition", e.what());
        return 1;
    } catch (const DegenerateKernelError& e) {
        diagnostic(err, "degenerate_kernel", e.what());
        return 1;
    } catch (const DivergenceError& e) {
        diagnostic(err, "divergence", e.what());
        return 1;
    } catch (const ScanError& e) {
        diagnostic(err, "scan_incomplete", e.what());
        return 1;
    } catch (const std::exception& e) {
        diagnostic(err, "error", e.what());
        return 1;
    }
    return 0;
}

int parse_and_dispatch(int argc, const char* const* argv)
{
    return parse_and_dispatch(argc, argv, std::cout, std::cerr);
}

}  // namespace ceit
