#include "ceit/scan.hpp"

#include "ceit/config.hpp"
#include "ceit/dressed.hpp"
#include "ceit/errors.hpp"
#include "ceit/units.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <mutex>
#include <sstream>
#include <thread>

namespace ceit {

namespace {

constexpr double kEitTolerance = 1e-9;

bool on_eit_line(const SystemParams& p)
{
    const double scale = std::max({1.0, std::abs(p.delta_la), std::abs(p.delta_pa)});
    return std::abs(p.delta_pl()) <= kEitTolerance * scale;
}

std::string number(double v)
{
    if (!std::isfinite(v)) return "nan";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.10g", v);
    return buf;
}

nlohmann::json axis_json(const ScanAxis& a)
{
    return {{"param", to_string(a.param)}, {"lo_mhz", a.lo_mhz}, {"hi_mhz", a.hi_mhz},
            {"n", a.n}};
}

}  // namespace

std::string to_string(ScanParam param)
{
    switch (param) {
    case ScanParam::DeltaPc: return "delta_pc";
    case ScanParam::DeltaLa: return "delta_la";
    case ScanParam::DeltaPa: return "delta_pa";
    }
    return "?";
}

ScanParam scan_param_from_string(const std::string& s)
{
    if (s == "delta_pc") return ScanParam::DeltaPc;
    if (s == "delta_la") return ScanParam::DeltaLa;
    if (s == "delta_pa") return ScanParam::DeltaPa;
    throw ConfigError("unknown scan parameter '" + s + "' (delta_pc, delta_la, delta_pa)");
}

double ScanAxis::value_mhz(int i) const
{
    if (i == n - 1) return hi_mhz;
    return lo_mhz + (hi_mhz - lo_mhz) * static_cast<double>(i) / static_cast<double>(n - 1);
}

ScanAxis parse_scan_axis(const std::string& spec)
{
    std::vector<std::string> parts;
    std::stringstream ss(spec);
    std::string item;
    while (std::getline(ss, item, ':')) parts.push_back(item);
    if (parts.size() != 4) {
        throw ConfigError("scan axis '" + spec + "' must look like name:lo:hi:n");
    }
    ScanAxis a;
    a.param = scan_param_from_string(parts[0]);
    try {
        std::size_t pos = 0;
        a.lo_mhz = std::stod(parts[1], &pos);
        if (pos != parts[1].size()) throw std::invalid_argument(parts[1]);
        a.hi_mhz = std::stod(parts[2], &pos);
        if (pos != parts[2].size()) throw std::invalid_argument(parts[2]);
        a.n = std::stoi(parts[3], &pos);
        if (pos != parts[3].size()) throw std::invalid_argument(parts[3]);
    } catch (const std::logic_error&) {
        throw ConfigError("scan axis '" + spec + "' has a malformed number");
    }
    return a;
}

void ScanGrid::validate() const
{
    for (const ScanAxis* a : {&x, &y}) {
        if (a->n < 2) throw ConfigError("scan axis needs at least 2 points");
        if (!std::isfinite(a->lo_mhz) || !std::isfinite(a->hi_mhz)) {
            throw ConfigError("scan axis range must be finite");
        }
    }
    if (x.param == y.param) throw ConfigError("scan x and y parameters must differ");
    const bool pc = x.param == ScanParam::DeltaPc || y.param == ScanParam::DeltaPc;
    const bool pa = x.param == ScanParam::DeltaPa || y.param == ScanParam::DeltaPa;
    if (pc && pa) {
        throw ConfigError("delta_pc and delta_pa both set the probe frequency; scan only one");
    }
    if (axes.empty()) throw ConfigError("scan needs at least one motional axis");
    if (!has_axis(Axis::Z)) throw ConfigError("scan must include the z axis");
    baseline.validate();
}

bool ScanGrid::has_axis(Axis axis) const
{
    return std::find(axes.begin(), axes.end(), axis) != axes.end();
}

SystemParams ScanGrid::params_at(int ix, int iy) const
{
    SystemParams p = baseline;
    auto apply = [&p](ScanParam param, double v_mhz) {
        const double v = mhz_to_angular(v_mhz);
        switch (param) {
        case ScanParam::DeltaPc: p.set_delta_pc(v); break;
        case ScanParam::DeltaLa: p.delta_la = v; break;
        case ScanParam::DeltaPa: p.delta_pa = v; break;
        }
    };
    apply(x.param, x.value_mhz(ix));
    apply(y.param, y.value_mhz(iy));
    return p;
}

ScanGrid preset_grid(const std::string& name)
{
    ScanGrid g;
    g.baseline = SystemParams::experiment_defaults();
    g.preset = name;
    const double dca = angular_to_mhz(g.baseline.delta_ca);
    if (name == "fig2a") {
        g.x = {ScanParam::DeltaPc, -30.0, 15.0, 100};
        g.y = {ScanParam::DeltaLa, dca - 25.0, dca + 20.0, 100};
        g.axes = {Axis::Z};
    } else if (name == "fig3a") {
        g.x = {ScanParam::DeltaPc, -1.0, 1.0, 100};
        g.y = {ScanParam::DeltaLa, dca - 1.0, dca + 1.0, 100};
        g.axes = {Axis::Z, Axis::Y};
    } else {
        throw ConfigError("unknown scan preset '" + name + "' (fig2a or fig3a)");
    }
    return g;
}

std::string to_string(PointClass c)
{
    switch (c) {
    case PointClass::Cooling: return "cooling";
    case PointClass::Heating: return "heating";
    case PointClass::Divergent: return "divergent";
    }
    return "?";
}

std::string to_string(ClassPolicy policy)
{
    return policy == ClassPolicy::ZOnly ? "z_only" : "z_and_y_veto";
}

ClassPolicy class_policy_from_string(const std::string& s)
{
    if (s == "z_only") return ClassPolicy::ZOnly;
    if (s == "z_and_y_veto") return ClassPolicy::ZAndYVeto;
    throw ConfigError("unknown classification policy '" + s + "' (z_only or z_and_y_veto)");
}

ScanPoint evaluate_point(const ScanGrid& grid, int ix, int iy)
{
    ScanPoint pt;
    pt.x_mhz = grid.x.value_mhz(ix);
    pt.y_mhz = grid.y.value_mhz(iy);
    const SystemParams p = grid.params_at(ix, iy);
    if (grid.probe == ProbeModel::Weak && on_eit_line(p)) {
        pt.z = rates_ceit_analytic(p);
        pt.analytic_z = true;
    } else {
        pt.z = rates_resolvent(p, Axis::Z, std::nullopt, grid.probe);
    }
    if (grid.has_axis(Axis::Y)) {
        pt.y = rates_resolvent(p, Axis::Y, std::nullopt, grid.probe);
    }
    const DressedSet set = dressed_states(p);
    for (int k = 0; k < 3; ++k) pt.dressed_mhz[k] = angular_to_mhz(set.states[k].frequency);
    return pt;
}

namespace detail {

void run_rows(int ny, int workers, const std::function<void(int)>& row)
{
    if (workers < 1) throw ConfigError("worker count must be at least 1");
    std::atomic<int> next_row{0};
    std::mutex failure_mutex;
    std::vector<int> failed_rows;
    std::string first_error;

    auto work = [&] {
        for (int iy = next_row.fetch_add(1); iy < ny; iy = next_row.fetch_add(1)) {
            try {
                row(iy);
            } catch (const std::exception& e) {
                std::lock_guard lock(failure_mutex);
                failed_rows.push_back(iy);
                if (first_error.empty()) first_error = e.what();
            }
        }
    };

    const int n_threads = std::max(1, std::min(workers, ny));
    if (n_threads == 1) {
        work();
    } else {
        std::vector<std::thread> pool;
        pool.reserve(n_threads);
        for (int t = 0; t < n_threads; ++t) pool.emplace_back(work);
        for (auto& th : pool) th.join();
    }
    if (!failed_rows.empty()) {
        std::sort(failed_rows.begin(), failed_rows.end());
        std::ostringstream os;
        os << "scan incomplete: " << failed_rows.size() << " of " << ny
           << " rows failed (first error: " << first_error << ")";
        throw ScanError(os.str(), failed_rows);
    }
}

}  // namespace detail

ScanResult run_scan(const ScanGrid& grid, int workers)
{
    grid.validate();
    if (workers < 1) throw ConfigError("worker count must be at least 1");
    ScanResult result;
    result.grid = grid;
    const int nx = grid.x.n;
    result.points.resize(static_cast<std::size_t>(nx) * static_cast<std::size_t>(grid.y.n));
    detail::run_rows(grid.y.n, workers, [&](int iy) {
        for (int ix = 0; ix < nx; ++ix) {
            result.points[static_cast<std::size_t>(iy) * nx + ix] = evaluate_point(grid, ix, iy);
        }
    });
    return result;
}

PointClass classify_point(const ScanPoint& pt, ClassPolicy policy)
{
    if (!pt.z || pt.z->divergent) return PointClass::Divergent;
    if (policy == ClassPolicy::ZAndYVeto) {
        if (!pt.y) throw ConfigError("z_and_y_veto needs y-axis rates");
        if (pt.y->divergent) return PointClass::Divergent;
        return pt.z->gamma_rate > 0.0 && pt.y->gamma_rate >= 0.0 ? PointClass::Cooling
                                                                  : PointClass::Heating;
    }
    return pt.z->gamma_rate > 0.0 ? PointClass::Cooling : PointClass::Heating;
}

std::vector<PointClass> classify(const ScanResult& result, ClassPolicy policy)
{
    if (policy == ClassPolicy::ZAndYVeto && !result.grid.has_axis(Axis::Y)) {
        throw ConfigError("z_and_y_veto needs a scan that computed the y axis");
    }
    std::vector<PointClass> out;
    out.reserve(result.points.size());
    for (const auto& pt : result.points) out.push_back(classify_point(pt, policy));
    return out;
}

nlohmann::json scan_provenance(const ScanResult& result, ClassPolicy policy)
{
    const ScanGrid& g = result.grid;
    nlohmann::json axes = nlohmann::json::array();
    for (Axis a : g.axes) axes.push_back(to_string(a));
    return {
        {"program", "ceit scan"},
        {"version", result.version},
        {"preset", g.preset.empty() ? nlohmann::json(nullptr) : nlohmann::json(g.preset)},
        {"x", axis_json(g.x)},
        {"y", axis_json(g.y)},
        {"axes", axes},
        {"probe", to_string(g.probe)},
        {"policy", to_string(policy)},
        {"params", params_to_json(g.baseline)},
    };
}

std::string scan_csv(const ScanResult& result, ClassPolicy policy)
{
    const auto classes = classify(result, policy);
    std::string out;
    out += "# " + scan_provenance(result, policy).dump() + "\n";
    out += "x_mhz,y_mhz,gamma_z_per_ms,m_st_z,gamma_y_per_ms,class\n";
    const double nan = std::numeric_limits<double>::quiet_NaN();
    for (std::size_t i = 0; i < result.points.size(); ++i) {
        const ScanPoint& pt = result.points[i];
        const double gz = pt.z && !pt.z->divergent ? per_us_to_per_ms(pt.z->gamma_rate) : nan;
        const double mz = pt.z && pt.z->m_st ? *pt.z->m_st : nan;
        const double gy = pt.y && !pt.y->divergent ? per_us_to_per_ms(pt.y->gamma_rate) : nan;
        out += number(pt.x_mhz) + ',' + number(pt.y_mhz) + ',' + number(gz) + ',' +
               number(mz) + ',' + number(gy) + ',' + to_string(classes[i]) + '\n';
    }
    return out;
}

void write_file_atomic(const std::string& path, const std::string& content)
{
    namespace fs = std::filesystem;
    const fs::path target(path);
    fs::path tmp = target;
    tmp += ".tmp";
    {
        std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
        if (!f) throw ConfigError("cannot open '" + tmp.string() + "' for writing");
        f << content;
        f.close();
        if (!f) {
            std::error_code ec;
            fs::remove(tmp, ec);
            throw ConfigError("failed writing '" + tmp.string() + "'");
        }
    }
    std::error_code ec;
    fs::rename(tmp, target, ec);
    if (ec) {
        fs::remove(tmp, ec);
        throw ConfigError("cannot move output into place at '" + path + "'");
    }
}

}  // namespace ceit
