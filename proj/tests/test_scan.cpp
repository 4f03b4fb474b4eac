#include <doctest.h>

#include "ceit/errors.hpp"
#include "ceit/scan.hpp"
#include "ceit/units.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

using namespace ceit;

namespace {

ScanGrid small_grid()
{
    ScanGrid g = preset_grid("fig3a");
    g.preset.clear();
    g.x = parse_scan_axis("delta_pc:-1:1:17");
    g.y = parse_scan_axis("delta_la:15.2:16.6:9");
    return g;
}

ScanPoint point_with(double gz, std::optional<double> gy)
{
    ScanPoint pt;
    RateResult z;
    z.gamma_rate = gz;
    pt.z = z;
    if (gy) {
        RateResult y;
        y.gamma_rate = *gy;
        pt.y = y;
    }
    return pt;
}

}  // namespace

TEST_SUITE("scan") {

TEST_CASE("axis parsing")
{
    const auto a = parse_scan_axis("delta_pc:-1:1:100");
    CHECK(a.param == ScanParam::DeltaPc);
    CHECK(a.lo_mhz == -1.0);
    CHECK(a.hi_mhz == 1.0);
    CHECK(a.n == 100);
    CHECK(a.value_mhz(0) == -1.0);
    CHECK(a.value_mhz(99) == 1.0);
    CHECK_THROWS_AS(parse_scan_axis("delta_pc:-1:1"), ConfigError);
    CHECK_THROWS_AS(parse_scan_axis("delta_xx:-1:1:10"), ConfigError);
    CHECK_THROWS_AS(parse_scan_axis("delta_pc:a:1:10"), ConfigError);
    CHECK_THROWS_AS(parse_scan_axis("delta_pc:0:1:1.5"), ConfigError);
}

TEST_CASE("grid validation")
{
    auto g = small_grid();
    CHECK_NOTHROW(g.validate());
    g.x.n = 1;
    CHECK_THROWS_AS(g.validate(), ConfigError);
    g = small_grid();
    g.y.param = ScanParam::DeltaPc;
    CHECK_THROWS_AS(g.validate(), ConfigError);
    g = small_grid();
    g.y.param = ScanParam::DeltaPa;
    CHECK_THROWS_WITH_AS(g.validate(), doctest::Contains("delta_pa"), ConfigError);
    g = small_grid();
    g.x.hi_mhz = INFINITY;
    CHECK_THROWS_AS(g.validate(), ConfigError);
    CHECK_THROWS_AS(preset_grid("fig9"), ConfigError);
    CHECK_THROWS_AS(run_scan(small_grid(), 0), ConfigError);
}

TEST_CASE("presets")
{
    const auto a = preset_grid("fig2a");
    CHECK(a.x.param == ScanParam::DeltaPc);
    CHECK(a.x.lo_mhz == -30.0);
    CHECK(a.x.hi_mhz == 15.0);
    CHECK(a.y.param == ScanParam::DeltaLa);
    CHECK(a.y.lo_mhz == doctest::Approx(16.0 - 25.0));
    CHECK(a.y.hi_mhz == doctest::Approx(16.0 + 20.0));
    CHECK(a.x.n == 100);
    CHECK_FALSE(a.has_axis(Axis::Y));
    const auto b = preset_grid("fig3a");
    CHECK(b.has_axis(Axis::Y));
    CHECK(b.baseline.kx0 == doctest::Approx(M_PI / 4.0));
    CHECK(angular_to_mhz(b.baseline.delta_ca) == doctest::Approx(16.0));
    const auto p = b.params_at(0, b.y.n - 1);
    CHECK(angular_to_mhz(p.delta_pc()) == doctest::Approx(-1.0));
    CHECK(angular_to_mhz(p.delta_la) == doctest::Approx(b.y.hi_mhz));
}

TEST_CASE("result does not depend on the worker count")
{
    const auto g = small_grid();
    const auto r1 = run_scan(g, 1);
    const auto r4 = run_scan(g, 4);
    for (auto policy : {ClassPolicy::ZOnly, ClassPolicy::ZAndYVeto}) {
        CHECK(scan_csv(r1, policy) == scan_csv(r4, policy));
    }
    CHECK(scan_csv(r1, ClassPolicy::ZOnly) == scan_csv(run_scan(g, 3), ClassPolicy::ZOnly));
}

TEST_CASE("scan points equal single-point calls")
{
    auto g = small_grid();
    g.y = parse_scan_axis("delta_la:16:16.5:2");
    const auto r = run_scan(g, 2);
    int analytic = 0;
    for (int iy = 0; iy < g.y.n; ++iy) {
        for (int ix = 0; ix < g.x.n; ++ix) {
            const auto& pt = r.at(ix, iy);
            const auto p = g.params_at(ix, iy);
            const auto z = pt.analytic_z ? rates_ceit_analytic(p) : rates_resolvent(p, Axis::Z);
            const auto y = rates_resolvent(p, Axis::Y);
            CHECK(pt.z->a_plus == z.a_plus);
            CHECK(pt.z->a_minus == z.a_minus);
            CHECK(pt.y->gamma_rate == y.gamma_rate);
            if (pt.analytic_z) {
                ++analytic;
                CHECK(p.delta_pl() == doctest::Approx(0.0).epsilon(1e-9));
            }
        }
    }
    // delta_PC = 0 at Delta_LA = 16 lies on the grid
    CHECK(analytic >= 1);
}

TEST_CASE("classification")
{
    CHECK(classify_point(point_with(1.0, std::nullopt), ClassPolicy::ZOnly) == PointClass::Cooling);
    CHECK(classify_point(point_with(-1.0, std::nullopt), ClassPolicy::ZOnly) ==
          PointClass::Heating);
    CHECK(classify_point(point_with(1.0, -0.1), ClassPolicy::ZAndYVeto) == PointClass::Heating);
    CHECK(classify_point(point_with(1.0, -0.1), ClassPolicy::ZOnly) == PointClass::Cooling);
    // the veto is inert where y is neither heated nor cooled
    for (double gz : {-1.0, 1.0}) {
        CHECK(classify_point(point_with(gz, 0.0), ClassPolicy::ZAndYVeto) ==
              classify_point(point_with(gz, 0.0), ClassPolicy::ZOnly));
    }
    CHECK_THROWS_AS(classify_point(point_with(1.0, std::nullopt), ClassPolicy::ZAndYVeto),
                    ConfigError);
    auto div = point_with(1.0, 1.0);
    div.z->divergent = true;
    CHECK(classify_point(div, ClassPolicy::ZOnly) == PointClass::Divergent);

    // a grid that cools everywhere
    auto g = small_grid();
    g.x = parse_scan_axis("delta_pc:-0.01:0.01:5");
    g.y = parse_scan_axis("delta_la:15.995:16.005:3");
    g.axes = {Axis::Z};
    const auto r = run_scan(g, 1);
    for (auto c : classify(r, ClassPolicy::ZOnly)) CHECK(c == PointClass::Cooling);
    CHECK_THROWS_AS(classify(r, ClassPolicy::ZAndYVeto), ConfigError);
}

TEST_CASE("failed rows are reported")
{
    auto g = small_grid();
    g.baseline.kappa = -1.0;
    CHECK_THROWS_AS(run_scan(g, 2), ParameterError);

    for (int workers : {1, 3}) {
        std::vector<int> done(10, 0);
        try {
            detail::run_rows(10, workers, [&](int iy) {
                if (iy % 4 == 1) throw DivergenceError("row " + std::to_string(iy));
                done[iy] = 1;
            });
            FAIL("expected ScanError");
        } catch (const ScanError& e) {
            CHECK(e.incomplete_rows() == std::vector<int>{1, 5, 9});
            CHECK(std::string(e.what()).find("3 of 10") != std::string::npos);
        }
        // the other rows still ran
        CHECK(std::count(done.begin(), done.end(), 1) == 7);
    }
}

TEST_CASE("csv and provenance")
{
    const auto r = run_scan(small_grid(), 1);
    const std::string csv = scan_csv(r, ClassPolicy::ZAndYVeto);
    std::istringstream in(csv);
    std::string header, columns, row;
    std::getline(in, header);
    std::getline(in, columns);
    CHECK(header.rfind("# {", 0) == 0);
    CHECK(columns == "x_mhz,y_mhz,gamma_z_per_ms,m_st_z,gamma_y_per_ms,class");
    int rows = 0;
    while (std::getline(in, row)) ++rows;
    CHECK(rows == 17 * 9);
    const auto j = nlohmann::json::parse(header.substr(2));
    CHECK(j["version"] == kVersion);
    CHECK(j["policy"] == "z_and_y_veto");
    CHECK(j["params"]["kappa_mhz"].get<double>() == doctest::Approx(0.4));

    const auto path = std::filesystem::temp_directory_path() / "ceit_scan_test.csv";
    write_file_atomic(path.string(), csv);
    std::ifstream f(path);
    std::stringstream back;
    back << f.rdbuf();
    CHECK(back.str() == csv);
    std::filesystem::remove(path);
    CHECK_THROWS_AS(write_file_atomic("/nonexistent/dir/x.csv", csv), ConfigError);
}

}  // TEST_SUITE
