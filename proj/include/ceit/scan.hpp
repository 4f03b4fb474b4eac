#pragma once

// Rates over 2-D parameter grids, cooling/heating classification and the
// CSV / JSON artifacts of a scan.
//
// Grid values are linear frequencies in MHz, like every user-facing
// number; points are stored row-major with y as the slow index.

#include "ceit/model.hpp"
#include "ceit/rates.hpp"

#include <nlohmann/json.hpp>

#include <array>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace ceit {

inline constexpr const char* kVersion = "0.1.0";

enum class ScanParam { DeltaPc, DeltaLa, DeltaPa };

std::string to_string(ScanParam param);
ScanParam scan_param_from_string(const std::string& s);

struct ScanAxis {
    ScanParam param = ScanParam::DeltaPc;
    double lo_mhz = 0.0;
    double hi_mhz = 0.0;
    int n = 2;

    double value_mhz(int i) const;
};

/// Parses "name:lo:hi:n", e.g. "delta_pc:-1:1:100".
ScanAxis parse_scan_axis(const std::string& spec);

struct ScanGrid {
    ScanAxis x;
    ScanAxis y;
    SystemParams baseline;
    std::vector<Axis> axes{Axis::Z};
    ProbeModel probe = ProbeModel::Weak;
    std::string preset;  ///< empty for a custom grid

    void validate() const;
    /// Baseline with the grid values of point (ix, iy) applied.
    SystemParams params_at(int ix, int iy) const;
    bool has_axis(Axis axis) const;
};

/// "fig2a": delta_PC in [-30, 15] MHz against Delta_LA spanning delta_LC in
/// [-25, 20] MHz, z only, 100 x 100. "fig3a": the region |delta_PC|,
/// |delta_LC| <= 1 MHz around the EIT point, z and y, 100 x 100. Both use the
/// experiment defaults (Delta_CA = 16 MHz, k x0 = pi/4).
ScanGrid preset_grid(const std::string& name);

enum class PointClass { Cooling, Heating, Divergent };
enum class ClassPolicy { ZOnly, ZAndYVeto };

std::string to_string(PointClass c);
std::string to_string(ClassPolicy policy);
ClassPolicy class_policy_from_string(const std::string& s);

struct ScanPoint {
    double x_mhz = 0.0;
    double y_mhz = 0.0;
    std::optional<RateResult> z;
    std::optional<RateResult> y;
    bool analytic_z = false;  ///< z rates from the closed form on the EIT line
    std::array<double, 3> dressed_mhz{};  ///< dressed frequencies, descending
};

struct ScanResult {
    ScanGrid grid;
    std::vector<ScanPoint> points;
    std::string version = kVersion;

    const ScanPoint& at(int ix, int iy) const { return points[iy * grid.x.n + ix]; }
};

/// Thrown when some rows could not be evaluated.
class ScanError : public std::runtime_error {
public:
    ScanError(const std::string& what, std::vector<int> rows)
        : std::runtime_error(what), rows_(std::move(rows))
    {
    }
    const std::vector<int>& incomplete_rows() const noexcept { return rows_; }

private:
    std::vector<int> rows_;
};

/// Evaluates every grid point; the result does not depend on `workers`.
ScanResult run_scan(const ScanGrid& grid, int workers = 1);

namespace detail {
/// Row queue behind run_scan: rows 0..ny-1 go to `workers` threads; rows
/// whose function throws are collected and reported in one ScanError.
void run_rows(int ny, int workers, const std::function<void(int)>& row);
}  // namespace detail

/// Single point of a scan, exactly as run_scan evaluates it.
ScanPoint evaluate_point(const ScanGrid& grid, int ix, int iy);

PointClass classify_point(const ScanPoint& pt, ClassPolicy policy);
std::vector<PointClass> classify(const ScanResult& result, ClassPolicy policy);

/// Provenance: resolved parameters, grid, policy and version.
nlohmann::json scan_provenance(const ScanResult& result, ClassPolicy policy);

/// CSV with a '#' provenance header and columns
/// x_mhz,y_mhz,gamma_z_per_ms,m_st_z,gamma_y_per_ms,class.
std::string scan_csv(const ScanResult& result, ClassPolicy policy);

/// Writes to a temporary file next to `path` and renames it into place.
void write_file_atomic(const std::string& path, const std::string& content);

}  // namespace ceit
