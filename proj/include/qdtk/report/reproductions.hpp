#pragma once

// Deterministic reproductions of reference numbers. Each check records the
// computed value, the reference target and the tolerance applied.

#include <algorithm>
#include <cmath>
#include <functional>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "qdtk/farfield/collection.hpp"
#include "qdtk/imaging/psf.hpp"
#include "qdtk/localization/scale.hpp"
#include "qdtk/metrics/arrhenius.hpp"
#include "qdtk/metrics/efficiency.hpp"
#include "qdtk/metrics/spectra.hpp"
#include "qdtk/photon/g2.hpp"
#include "qdtk/photon/hom.hpp"
#include "qdtk/photon/presets.hpp"

namespace qdtk::report {

struct Check {
    std::string group;  // acceptance criterion number, or "extra"
    std::string name;
    double value = 0.0;
    double target = 0.0;
    double tolerance = 0.0;  // absolute; negative means "same digits when rounded"
    bool pass = false;
};

namespace detail {

inline Check near(std::string group, std::string name, double value, double target, double tol) {
    return {std::move(group), std::move(name), value, target, tol, std::abs(value - target) <= tol};
}

// equal once both are rounded to `decimals` places
inline Check printed(std::string group, std::string name, double value, double target, int decimals) {
    const double s = std::pow(10.0, decimals);
    const bool ok = std::llround(value * s) == std::llround(target * s);
    return {std::move(group), std::move(name), value, target, -0.5 / s, ok};
}

inline double round_sig(double x, int digits) {
    if (x == 0.0) return 0.0;
    const double s = std::pow(10.0, digits - 1 - static_cast<int>(std::floor(std::log10(std::abs(x)))));
    return std::round(x * s) / s;
}

inline double simpson(const std::function<double(double)>& f, double a, double b, int n) {
    if (n % 2) ++n;
    const double h = (b - a) / n;
    double s = f(a) + f(b);
    for (int i = 1; i < n; ++i) s += (i % 2 ? 4.0 : 2.0) * f(a + i * h);
    return s * h / 3.0;
}

}  // namespace detail

inline std::vector<Check> uncertainty_budget_checks() {
    using detail::near;
    struct Axis {
        const char* name;
        double spot, edge, scale, total;
    };
    const Axis axes[] = {{"#1 vertical", 61.0, 14.4, 19.9, 65.8},   {"#1 horizontal", 120.0, 29.0, 23.5, 125.7},
                         {"#2 vertical", 61.9, 12.7, 20.1, 66.3},   {"#2 horizontal", 115.7, 26.1, 20.2, 120.2},
                         {"#3 vertical", 112.2, 20.7, 12.0, 114.7}, {"#3 horizontal", 59.5, 19.5, 24.6, 67.2}};
    std::vector<Check> out;
    for (const auto& a : axes) {
        const double t = localization::PositionBudget{a.spot, a.edge, a.scale}.total();
        out.push_back(near("1", std::string("dQi ") + a.name + " [nm]", t, a.total, 0.1));
    }
    struct Device {
        const char* name;
        double h, v, dq, dr;
    };
    const Device devices[] = {
        {"#1", 125.7, 65.8, 141.9, 147.4}, {"#2", 120.2, 66.3, 137.3, 143.0}, {"#3", 67.2, 114.7, 132.9, 138.8}};
    for (const auto& d : devices) {
        const auto c = localization::combine_2d(d.h, d.v, 40.0);
        out.push_back(near("1", std::string("dQ ") + d.name + " [nm]", c.dq, d.dq, 0.1));
        out.push_back(near("1", std::string("dR ") + d.name + " [nm]", c.dr, d.dr, 0.1));
    }

    const double h = localization::PositionBudget{53.2, 24.1, 15.1}.total();
    const double v = localization::PositionBudget{37.0, 35.1, 15.1}.total();
    const auto c = localization::combine_2d(h, v, 40.0);
    out.push_back(near("2", "brightest-decile dQ [nm]", c.dq, 80.1, 1.5));
    out.push_back(near("2", "brightest-decile dR [nm]", c.dr, 90.3, 1.5));
    return out;
}

inline std::vector<Check> diffraction_checks() {
    imaging::PsfModel psf;
    psf.wavelength_um = 1.55;
    psf.na = 0.65;
    const double s = imaging::diffraction_sigma(psf);
    const double f = imaging::fwhm_from_sigma(s);
    return {{"3", "sigma_diff [um], 3 s.f.", s, 0.501, -1.0, detail::round_sig(s, 3) == 0.501},
            {"3", "FWHM_diff [um], 3 s.f.", f, 1.18, -1.0, detail::round_sig(f, 3) == 1.18}};
}

inline std::vector<Check> efficiency_checks() {
    using detail::near;
    using detail::printed;
    std::vector<Check> out;
    const auto chain = metrics::chain_efficiency(metrics::reference_setup());
    out.push_back(near("4", "setup transmission [%]", 100.0 * chain.value, 1.10, 0.01));
    out.push_back(near("4", "setup transmission sigma [%]", 100.0 * chain.sigma, 0.17, 0.01));

    const photon::Measured setup{0.0110, 0.0017};
    const auto e1 = metrics::extraction_efficiency(1.461e5, 80e6, setup);
    const auto e2 = metrics::extraction_efficiency(0.133 * 80e6 * 0.0110, 80e6, setup);
    out.push_back(printed("5", "eta #1 [%]", 100.0 * e1.eta.value, 16.6, 1));
    out.push_back(printed("5", "eta #1 sigma [%]", 100.0 * e1.eta.sigma, 2.7, 1));
    out.push_back(printed("5", "eta #2 [%]", 100.0 * e2.eta.value, 13.3, 1));
    out.push_back(printed("5", "eta #2 sigma [%]", 100.0 * e2.eta.sigma, 2.2, 1));

    const auto p1 = metrics::purcell_from_lifetimes({0.40, 0.01}, {1.99, 0.16});
    const auto p2 = metrics::purcell_from_lifetimes({0.53, 0.01}, {1.99, 0.16});
    out.push_back(printed("6", "F_P #1", p1.value, 5.0, 1));
    out.push_back(printed("6", "F_P #1 sigma", p1.sigma, 0.4, 1));
    out.push_back(printed("6", "F_P #2", p2.value, 3.75, 2));
    out.push_back(printed("6", "F_P #2 sigma", p2.sigma, 0.30, 2));
    return out;
}

inline std::vector<Check> g2_closed_form_checks() {
    using detail::near;
    std::vector<Check> out;
    for (const auto& col : photon::presets::kOffResonant) {
        const auto g = photon::g2_zero_fit(col.params, col.sigma);
        out.push_back(near("7", "g2(0) " + std::string(col.label), g.value, col.g2_zero.value, col.g2_zero.sigma));

        const auto& p = col.params;
        const double half = 0.5 * p.period_ns * 1e3;
        const int n = 200000;
        const double center =
            2.0 * detail::simpson([&](double t) { return p.center_scale * photon::detail::center_shape(t, p.tau_dec_ps, p.tau_cap_ps); },
                                  0.0, half, n);
        const double side =
            2.0 * detail::simpson([&](double t) { return p.side_height * std::exp(-t / p.tau_dec_ps); }, 0.0, half, n);
        const double rel = std::abs(photon::g2_zero_fit(p) / (center / side) - 1.0);
        out.push_back(near("7", "closed form vs quadrature " + std::string(col.label) + " (rel.)", rel, 0.0, 1e-6));
    }
    return out;
}

inline std::vector<Check> hom_area_checks() {
    const auto v = photon::visibility_from_areas({1.68, 0.05}, {2.08, 0.04});
    return {detail::printed("8", "V from printed A3 areas [%]", 100.0 * v.value, 19.3, 1),
            detail::printed("8", "V sigma from printed A3 areas [%]", 100.0 * v.sigma, 2.6, 1)};
}

inline std::vector<Check> property_checks() {
    using detail::near;
    std::vector<Check> out;

    double asym = 0.0;
    for (const auto& col : photon::presets::kOffResonant) {
        for (double t = 0.0; t <= 60000.0; t += 37.0) {
            asym = std::max(asym, std::abs(photon::g2_model(t, col.params) - photon::g2_model(-t, col.params)));
        }
    }
    for (const auto& col : photon::presets::kQuasiResonant) {
        const auto q = photon::presets::quasi_params(col, col.g2_fit);
        for (double t = 0.0; t <= 60000.0; t += 37.0) {
            asym = std::max(asym, std::abs(photon::g2_model(t, q) - photon::g2_model(-t, q)));
        }
    }
    out.push_back(near("11", "g2 models symmetric in tau (max diff)", asym, 0.0, 1e-9));

    double co_cross = 0.0;
    for (const auto& col : photon::presets::kHom) {
        auto p = col.co;
        p.v_ps = 0.0;
        for (double t = -photon::presets::kHomHalfSpanPs; t <= photon::presets::kHomHalfSpanPs; t += 41.0) {
            co_cross = std::max(co_cross, std::abs(photon::hom_model(t, p, photon::Polarization::co) -
                                                   photon::hom_model(t, p, photon::Polarization::cross)));
        }
    }
    out.push_back(near("11", "HOM co == cross at V_PS = 0 (max diff)", co_cross, 0.0, 1e-12));

    // a tilted field stretches every pixel distance by 1/cos; positions in um
    // and their uncertainties are unchanged
    {
        const double sep = 500.0, dist = 213.7, dm = 0.144, dqpx = 0.61;
        const std::vector<localization::EdgeSeparation> base{{sep, dm, dm}, {sep * 1.001, dm, dm}};
        const auto s0 = localization::scale_factor(base, 50.0);
        const auto r0 = localization::position_1d({50.0 + dist, dqpx}, {50.0, dm}, s0.p, s0.dp);
        double worst = 0.0;
        for (double deg : {0.5, 1.0, 2.0, 5.0}) {
            const double k = 1.0 / std::cos(deg * std::numbers::pi / 180.0);
            const std::vector<localization::EdgeSeparation> rot{{sep * k, dm, dm}, {sep * 1.001 * k, dm, dm}};
            const auto s = localization::scale_factor(rot, 50.0);
            const auto r = localization::position_1d({50.0 + dist * k, dqpx * k}, {50.0, dm * k}, s.p, s.dp);
            worst = std::max({worst, std::abs(r.q_um - r0.q_um), std::abs(r.dq_um - r0.dq_um)});
        }
        out.push_back(near("11", "rotation cancellation [um]", worst, 0.0, 1e-12));
    }

    int violations = 0;
    for (double a = 0.0; a <= 150.0; a += 10.0) {
        double prev_budget = -1.0;
        double prev_dr = -1.0;
        for (double b = 0.0; b <= 150.0; b += 7.5) {
            const double t = localization::PositionBudget{a, b, 20.0}.total();
            const double r = localization::combine_2d(a, b, 40.0).dr;
            violations += t < prev_budget;
            violations += r < prev_dr;
            prev_budget = t;
            prev_dr = r;
        }
    }
    out.push_back(near("11", "quadrature monotonicity violations", violations, 0.0, 0.0));

    {
        auto lobe = farfield::FarFieldGrid::sample([](double t, double) { return std::cos(t) * std::cos(t); }, 181, 72);
        lobe.total_power = 2.0 * std::numbers::pi / 3.0;
        int drops = 0;
        double prev = -1.0;
        for (double na = 0.1; na < 0.99; na += 0.02) {
            const double v = farfield::lens_power(lobe, na);
            drops += v < prev;
            prev = v;
        }
        out.push_back(near("11", "lens_power NA-monotonicity violations", drops, 0.0, 0.0));
    }
    auto g = farfield::FarFieldGrid::sample([](double, double) { return 1.0; }, 181, 72);
    g.total_power = 2.0 * std::numbers::pi;
    out.push_back(near("11", "isotropic fraction at NA 0.4", farfield::lens_power(g, 0.4) / g.total_power, 0.0835, 1e-3));

    auto chain = metrics::reference_setup();
    const auto ref = metrics::chain_efficiency(chain);
    std::mt19937 rng(11);
    double worst = 0.0;
    for (int k = 0; k < 50; ++k) {
        std::shuffle(chain.begin(), chain.end(), rng);
        const auto m = metrics::chain_efficiency(chain);
        worst = std::max({worst, std::abs(m.value / ref.value - 1.0), std::abs(m.sigma / ref.sigma - 1.0)});
    }
    out.push_back(near("11", "chain permutation invariance (rel.)", worst, 0.0, 1e-14));
    return out;
}

// reference numbers outside the numbered criteria
inline std::vector<Check> extra_checks() {
    using detail::near;
    std::vector<Check> out;
    out.push_back(detail::printed("extra", "random yield N=10, 2R0=1.294, F=50 [%]",
                                  100.0 * metrics::random_yield(10, 1.294, 50.0).value, 0.67, 2));

    std::vector<double> x;
    std::vector<double> y;
    for (int i = 0; i <= 400; ++i) {
        x.push_back(1530.0 + 0.1 * i);
        y.push_back(metrics::lorentzian(x.back(), 1550.0, 1550.0 / 194.0, 1000.0, 20.0));
    }
    out.push_back(near("extra", "cavity Q, noiseless Lorentzian", metrics::fit_lorentzian(x, y).q.value, 194.0, 1e-3));

    const metrics::ArrheniusParams truth{1e4, 10.0, 6.9, 800.0, 27.9};
    std::vector<double> t;
    std::vector<double> i;
    for (double k = 10.0; k <= 150.0; k += 10.0) {
        t.push_back(k);
        i.push_back(metrics::arrhenius(k, truth));
    }
    const auto a = metrics::fit_arrhenius(t, i);
    out.push_back(near("extra", "Arrhenius E1 recovery [meV]", a.e1_mev.value, 6.9, 1e-3));
    out.push_back(near("extra", "Arrhenius E2 recovery [meV]", a.e2_mev.value, 27.9, 1e-3));
    return out;
}

/// Every deterministic check, in criterion order.
inline std::vector<Check> deterministic_checks() {
    std::vector<Check> out;
    for (auto part : {uncertainty_budget_checks(), diffraction_checks(), efficiency_checks(), g2_closed_form_checks(),
                      hom_area_checks(), property_checks(), extra_checks()}) {
        out.insert(out.end(), part.begin(), part.end());
    }
    return out;
}

}  // namespace qdtk::report
