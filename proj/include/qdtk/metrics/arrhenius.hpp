#pragma once

// Thermal quenching with two activation processes, fitted in log intensity.

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "qdtk/errors.hpp"
#include "qdtk/numerics/least_squares.hpp"
#include "qdtk/photon/histogram.hpp"

namespace qdtk::metrics {

using photon::Measured;

inline constexpr double kBoltzmannMeVPerK = 0.0861733;

struct ArrheniusParams {
    double i0 = 1.0;
    double b1 = 0.0;
    double e1_mev = 1.0;
    double b2 = 0.0;
    double e2_mev = 1.0;
};

inline double arrhenius(double t_kelvin, const ArrheniusParams& p) {
    const double kt = kBoltzmannMeVPerK * t_kelvin;
    return p.i0 / (1.0 + p.b1 * std::exp(-p.e1_mev / kt) + p.b2 * std::exp(-p.e2_mev / kt));
}

struct ArrheniusFit {
    Measured i0;
    Measured b1;
    Measured e1_mev;
    Measured b2;
    Measured e2_mev;
    bool single_process = false;  // second channel not resolved
    bool converged = false;
    std::vector<std::string> warnings;
};

namespace detail {

// 1/I = c0 + c1 x1 + c2 x2 at fixed energies, weighted by I so that the
// residuals approximate log-intensity residuals.
inline double arrhenius_linear(std::span<const double> t, std::span<const double> y, double e1, double e2,
                               numerics::Vector& c) {
    const auto m = static_cast<numerics::Index>(t.size());
    numerics::Matrix a(m, 3);
    numerics::Vector b(m);
    for (numerics::Index i = 0; i < m; ++i) {
        const auto k = static_cast<std::size_t>(i);
        const double kt = kBoltzmannMeVPerK * t[k];
        a(i, 0) = y[k];
        a(i, 1) = y[k] * std::exp(-e1 / kt);
        a(i, 2) = y[k] * std::exp(-e2 / kt);
        b[i] = 1.0;
    }
    c = a.colPivHouseholderQr().solve(b);
    if (!c.allFinite() || c[0] <= 0.0) return std::numeric_limits<double>::infinity();
    return (a * c - b).squaredNorm();
}

}  // namespace detail

inline ArrheniusFit fit_arrhenius(std::span<const double> t_kelvin, std::span<const double> intensity) {
    if (t_kelvin.size() != intensity.size()) throw InputError("temperature and intensity lengths differ");
    if (t_kelvin.size() < 6) throw InputError("need at least 6 temperature points");
    for (std::size_t i = 0; i < t_kelvin.size(); ++i) {
        if (!(t_kelvin[i] > 0.0)) throw InputError("temperatures must be positive");
        if (!(intensity[i] > 0.0)) throw InputError("intensities must be positive for a log-space fit");
    }
    const auto [lo_it, hi_it] = std::minmax_element(intensity.begin(), intensity.end());
    if (*hi_it < 10.0 * *lo_it) throw InputError("intensity must drop at least tenfold over the temperature range");

    // start: grid over both energies, linear solve for the prefactors
    std::vector<double> grid;
    for (int k = 0; k < 40; ++k) grid.push_back(0.3 * std::pow(200.0 / 0.3, k / 39.0));
    double best = std::numeric_limits<double>::infinity();
    numerics::Vector c;
    double e1s = 1.0;
    double e2s = 10.0;
    numerics::Vector cs = numerics::Vector::Zero(3);
    for (std::size_t a = 0; a < grid.size(); ++a) {
        for (std::size_t b = a + 1; b < grid.size(); ++b) {
            const double r = detail::arrhenius_linear(t_kelvin, intensity, grid[a], grid[b], c);
            if (r < best && c[1] >= 0.0 && c[2] >= 0.0) {
                best = r;
                e1s = grid[a];
                e2s = grid[b];
                cs = c;
            }
        }
    }
    if (!std::isfinite(best)) throw FitError("no admissible start values for the Arrhenius fit");

    std::vector<double> logy(intensity.size());
    for (std::size_t i = 0; i < logy.size(); ++i) logy[i] = std::log(intensity[i]);
    // parameters: ln I0, ln B1, E1, ln B2, E2
    auto model = [&](const numerics::Vector& p, numerics::Vector& out) {
        const ArrheniusParams q{std::exp(p[0]), std::exp(p[1]), p[2], std::exp(p[3]), p[4]};
        for (std::size_t i = 0; i < t_kelvin.size(); ++i) {
            out[static_cast<numerics::Index>(i)] = std::log(arrhenius(t_kelvin[i], q));
        }
    };
    const double floor_b = 1e-12;
    numerics::Vector x0(5);
    x0 << -std::log(cs[0]), std::log(std::max(cs[1] / cs[0], floor_b)), e1s, std::log(std::max(cs[2] / cs[0], floor_b)),
        e2s;
    numerics::CurveFitOptions opt;
    opt.lower = numerics::Vector(5);
    opt.upper = numerics::Vector(5);
    *opt.lower << -1e300, std::log(floor_b), 1e-3, std::log(floor_b), 1e-3;
    *opt.upper << 1e300, 60.0, 1e4, 60.0, 1e4;
    const auto fit = numerics::fit_curve(model, logy, x0, opt);

    ArrheniusFit out;
    out.converged = fit.converged;
    out.warnings = fit.warnings;
    if (!fit.converged) throw FitError("Arrhenius fit did not converge after " + std::to_string(fit.iterations) + " iterations");
    auto p = fit.params;
    const auto& e = fit.std_errors;
    Measured i0{std::exp(p[0]), std::exp(p[0]) * e[0]};
    Measured b1{std::exp(p[1]), std::exp(p[1]) * e[1]};
    Measured b2{std::exp(p[3]), std::exp(p[3]) * e[3]};
    Measured e1{p[2], e[2]};
    Measured e2{p[4], e[4]};
    if (e1.value > e2.value) {
        std::swap(b1, b2);
        std::swap(e1, e2);
    }
    out.i0 = i0;
    out.b1 = b1;
    out.b2 = b2;
    out.e1_mev = e1;
    out.e2_mev = e2;
    // a channel that never reaches 1% of the denominator is not resolved
    const double tmax = *std::max_element(t_kelvin.begin(), t_kelvin.end());
    const double kt = kBoltzmannMeVPerK * tmax;
    if (std::min(b1.value * std::exp(-e1.value / kt), b2.value * std::exp(-e2.value / kt)) < 1e-2 || fit.singular) {
        out.single_process = true;
        out.warnings.push_back("only one activation process resolved");
    }
    return out;
}

}  // namespace qdtk::metrics
