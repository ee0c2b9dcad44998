#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <unistd.h>

#include "qdtk/farfield/collection.hpp"
#include "qdtk/farfield/io.hpp"

using namespace qdtk;
using namespace qdtk::farfield;

namespace {

constexpr double kPi = std::numbers::pi;

FarFieldGrid uniform(int nt = 181, int np = 181) {
    auto g = FarFieldGrid::sample([](double, double) { return 1.0; }, nt, np);
    g.total_power = 2.0 * kPi;
    return g;
}

// cos^n lobe, total power over the hemisphere 2 pi / (n + 1)
FarFieldGrid lobe(double n, int nt = 181, int np = 181) {
    auto g = FarFieldGrid::sample([n](double t, double) { return std::pow(std::cos(t), n); }, nt, np);
    g.total_power = 2.0 * kPi / (n + 1.0);
    return g;
}

double lobe_fraction(double n, double na) { return 1.0 - std::pow(std::cos(std::asin(na)), n + 1.0); }

}  // namespace

TEST(LensPower, IsotropicClosedForm) {
    const auto g = uniform();
    EXPECT_NEAR(lens_power(g, 0.4) / (2.0 * kPi), 1.0 - std::cos(std::asin(0.4)), 1e-5);
    EXPECT_NEAR(lens_power(g, 0.4) / (2.0 * kPi), 0.0835, 1e-3);
    EXPECT_NEAR(lens_power(g, 0.999999), 2.0 * kPi, 2e-3 * 2.0 * kPi);
}

TEST(LensPower, CosSquaredLobe) {
    const auto g = lobe(2.0);
    const double c = std::cos(std::asin(0.65));
    const double want = 2.0 * kPi * (1.0 - c * c * c) / 3.0;
    EXPECT_NEAR(lens_power(g, 0.65), want, 1e-3 * want);
}

TEST(LensPower, AzimuthalStructure) {
    // cos^2(phi) integrates to pi over the circle
    const auto g = FarFieldGrid::sample([](double, double p) { return std::cos(p) * std::cos(p); }, 181, 90);
    EXPECT_NEAR(lens_power(g, 0.5), kPi * (1.0 - std::cos(std::asin(0.5))), 1e-4);
}

TEST(LensPower, MonotoneInNa) {
    const auto g = FarFieldGrid::sample(
        [](double t, double p) { return 1.0 + std::sin(3.0 * t) * std::cos(p) * std::cos(p); }, 91, 36);
    double prev = 0.0;
    for (double na = 0.2; na < 0.999; na += 0.01) {
        const double v = lens_power(g, na);
        EXPECT_GE(v, prev);
        prev = v;
    }
}

TEST(LensPower, ConvergesOnRefinement) {
    auto f = [](double t, double p) { return std::pow(std::cos(t), 4) * (1.0 + 0.3 * std::cos(2.0 * p)); };
    const double coarse = lens_power(FarFieldGrid::sample(f, 91, 36), 0.65);
    const double fine = lens_power(FarFieldGrid::sample(f, 181, 72), 0.65);
    EXPECT_LT(std::abs(fine - coarse), 2e-3 * fine);
}

TEST(LensPower, Errors) {
    EXPECT_THROW(lens_power(uniform(10, 8), 0.4), InputError);  // 3 samples in cone
    EXPECT_THROW(lens_power(uniform(), 0.0), InputError);
    EXPECT_THROW(lens_power(uniform(), 1.0), InputError);
    auto g = uniform();
    g.power(3, 3) = -1.0;
    EXPECT_THROW(lens_power(g, 0.4), InputError);
    auto half = FarFieldGrid::sample([](double, double) { return 1.0; }, 181, 10);
    half.theta_rad.resize(40);
    half.power.conservativeResize(40, 10);
    EXPECT_THROW(lens_power(half, 0.65), InputError);  // cone past the grid
}

TEST(Trion, Power) {
    EXPECT_EQ(trion_power(1.0, 1.0), 1.0);
    EXPECT_EQ(trion_power(2.0, 0.0), 1.0);
    EXPECT_THROW(trion_power(-1.0, 1.0), InputError);
}

TEST(Trion, ExtractionLimits) {
    const auto g = uniform();
    auto gp = g;
    gp.dipole = Dipole::phi;
    EXPECT_NEAR(trion_extraction(g, gp, 0.4), 0.0835, 1e-3);

    auto off = g;
    off.power.setZero();
    off.total_power = 0.0;
    EXPECT_NEAR(trion_extraction(g, off, 0.4), lens_power(g, 0.4) / g.total_power, 1e-15);
}

TEST(Trion, TargetExtraction) {
    // lobe exponent chosen so 62% of the power falls inside NA 0.4
    const double c = std::cos(std::asin(0.4));
    const double n = std::log(0.38) / std::log(c) - 1.0;
    ASSERT_NEAR(lobe_fraction(n, 0.4), 0.62, 1e-12);
    const auto gr = lobe(n);
    auto gp = lobe(n);
    gp.dipole = Dipole::phi;
    EXPECT_NEAR(lens_power(gr, 0.4) / gr.total_power, 0.62, 1e-3);
    EXPECT_NEAR(trion_extraction(gr, gp, 0.4), 0.62, 1e-3);
}

TEST(Trion, BoundedAndScaleInvariant) {
    const auto a = lobe(2.0);
    auto b = lobe(8.0);
    b.dipole = Dipole::phi;
    b.total_power *= 3.0;
    b.power *= 3.0;
    const double ea = lens_power(a, 0.5) / a.total_power;
    const double eb = lens_power(b, 0.5) / b.total_power;
    const double ec = trion_extraction(a, b, 0.5);
    EXPECT_GE(ec, std::min(ea, eb));
    EXPECT_LE(ec, std::max(ea, eb));
    auto a2 = a;
    auto b2 = b;
    for (auto* g : {&a2, &b2}) {
        g->power *= 7.5;
        g->total_power *= 7.5;
    }
    EXPECT_NEAR(trion_extraction(a2, b2, 0.5), ec, 1e-14);
}

TEST(Trion, MismatchedGrids) {
    auto a = uniform();
    auto b = uniform(91, 181);
    EXPECT_THROW(trion_extraction(a, b, 0.4), InputError);
    b = uniform();
    b.rho_um = 0.1;
    EXPECT_THROW(trion_extraction(a, b, 0.4), InputError);
}

TEST(Sweep, HalfWidthOfGaussianProfile) {
    std::vector<SweepRow> rows;
    const double f0 = 18.1;
    for (int k = 0; k <= 30; ++k) {
        const double rho = 0.01 * k;
        const double fp = f0 * std::exp(-std::log(2.0) * std::pow(rho / 0.1, 2));
        rows.push_back({rho, fp, fp, std::nullopt, std::nullopt});
    }
    const auto r = displacement_sweep(rows, 0.4, 1.0);
    ASSERT_TRUE(r.rho_half_um);
    EXPECT_NEAR(*r.rho_half_um, 0.100, 1e-9);  // a sample lands exactly on the half point
    EXPECT_NEAR(r.points.front().purcell, f0, 1e-12);
    EXPECT_FALSE(r.points.front().extraction);
}

TEST(Sweep, ConstantAndTwoRows) {
    std::vector<SweepRow> flat{{0.0, 2.0, 2.0, {}, {}}, {0.1, 2.0, 2.0, {}, {}}, {0.2, 2.0, 2.0, {}, {}}};
    EXPECT_FALSE(displacement_sweep(flat, 0.4, 1.0).rho_half_um);
    std::vector<SweepRow> two{{0.0, 10.0, 10.0, {}, {}}, {0.2, 2.0, 2.0, {}, {}}};
    // 10 -> 2 over 0.2 um; half (5) at 0.2 * 5/8
    EXPECT_NEAR(*displacement_sweep(two, 0.4, 1.0).rho_half_um, 0.125, 1e-12);
}

TEST(Sweep, GridsAndOrdering) {
    std::vector<SweepRow> rows;
    for (int k = 0; k < 6; ++k) {
        auto gr = lobe(2.0 + k, 91, 24);
        auto gp = lobe(2.0 + k, 91, 24);
        gr.rho_um = gp.rho_um = 0.05 * k;
        gp.dipole = Dipole::phi;
        rows.push_back({0.05 * k, gr.total_power, gp.total_power, gr, gp});
    }
    const auto serial = displacement_sweep(rows, 0.4, 1.0, 1);
    const auto par = displacement_sweep(rows, 0.4, 1.0, 4);
    for (std::size_t i = 0; i < rows.size(); ++i) {
        EXPECT_EQ(serial.points[i].rho_um, rows[i].rho_um);
        EXPECT_EQ(serial.points[i].extraction, par.points[i].extraction);
        EXPECT_NEAR(*serial.points[i].extraction, lobe_fraction(2.0 + static_cast<double>(i), 0.4), 2e-3);
    }
    rows[2].rho_um = rows[1].rho_um;
    EXPECT_THROW(displacement_sweep(rows, 0.4, 1.0), InputError);
    EXPECT_THROW(displacement_sweep({}, 0.4, 1.0), InputError);
}

TEST(FarFieldIo, RoundTripAndErrors) {
    auto g = lobe(3.0, 46, 12);
    g.dipole = Dipole::phi;
    g.rho_um = 0.05;
    const auto path = std::filesystem::temp_directory_path() / ("qdtk_ff_" + std::to_string(getpid()) + ".csv");
    write_farfield(g, path);
    const auto r = read_farfield(path);
    EXPECT_EQ(r.dipole, Dipole::phi);
    EXPECT_DOUBLE_EQ(r.rho_um, 0.05);
    EXPECT_DOUBLE_EQ(r.total_power, g.total_power);
    ASSERT_EQ(r.theta_rad.size(), g.theta_rad.size());
    EXPECT_NEAR(r.theta_rad[10], g.theta_rad[10], 1e-14);
    EXPECT_NEAR((r.power - g.power).cwiseAbs().maxCoeff(), 0.0, 1e-15);
    EXPECT_NEAR(lens_power(r, 0.4), lens_power(g, 0.4), 1e-12);

    {
        std::ofstream out(path);
        out << "theta_deg,0,90\n0,1,1\n10,1\n";
    }
    EXPECT_THROW(read_farfield(path), DataFormatError);
    {
        std::ofstream out(path);
        out << "angle,0,90\n0,1,1\n";
    }
    EXPECT_THROW(read_farfield(path), DataFormatError);
    {
        std::ofstream out(path);
        out << "theta_deg,0,90\n0,1,1\n10,1,1\n";
        std::ofstream side(farfield_sidecar(path));
        side << R"({"dipole": "z", "total_power": 1})";
    }
    EXPECT_THROW(read_farfield(path), DataFormatError);
    std::filesystem::remove(path);
    std::filesystem::remove(farfield_sidecar(path));
}
