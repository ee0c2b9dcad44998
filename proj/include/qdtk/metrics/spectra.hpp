#pragma once

// Cavity-mode quality factor from a Lorentzian line fit.

#include <algorithm>
#include <cmath>
#include <span>
#include <string>

#include "qdtk/errors.hpp"
#include "qdtk/numerics/least_squares.hpp"
#include "qdtk/photon/histogram.hpp"

namespace qdtk::metrics {

using photon::Measured;

inline double lorentzian(double x, double center, double fwhm, double height, double background) {
    const double h = 0.5 * fwhm;
    return background + height * h * h / ((x - center) * (x - center) + h * h);
}

struct LorentzianFit {
    Measured center_nm;
    Measured fwhm_nm;
    Measured height;
    Measured background;
    Measured q;
    bool converged = false;
};

/// Fits one dominant Lorentzian on a flat background. `sigma` (optional)
/// weights the points; without it the residual scatter sets the errors.
inline LorentzianFit fit_lorentzian(std::span<const double> wavelength_nm, std::span<const double> intensity,
                                    std::span<const double> sigma = {}) {
    if (wavelength_nm.size() != intensity.size()) throw InputError("wavelength and intensity lengths differ");
    if (wavelength_nm.size() < 5) throw InputError("spectrum needs at least 5 points");
    const auto n = wavelength_nm.size();
    const auto imax = static_cast<std::size_t>(std::max_element(intensity.begin(), intensity.end()) - intensity.begin());
    const double bg0 = std::min(intensity.front(), intensity.back());
    const double top = intensity[imax] - bg0;
    if (!(top > 0.0)) throw InputError("spectrum has no peak above its ends");
    // half-maximum crossings for the start width
    std::size_t l = imax;
    std::size_t r = imax;
    while (l > 0 && intensity[l] - bg0 > 0.5 * top) --l;
    while (r + 1 < n && intensity[r] - bg0 > 0.5 * top) ++r;
    const double w0 = std::max(std::abs(wavelength_nm[r] - wavelength_nm[l]),
                               std::abs(wavelength_nm[std::min(imax + 1, n - 1)] - wavelength_nm[imax]));

    numerics::Vector x0(4);
    x0 << wavelength_nm[imax], w0, top, bg0;
    numerics::CurveFitOptions opt;
    opt.lower = numerics::Vector(4);
    opt.upper = numerics::Vector(4);
    const double span = std::abs(wavelength_nm.back() - wavelength_nm.front());
    *opt.lower << std::min(wavelength_nm.front(), wavelength_nm.back()), 1e-9 * span, 0.0, -1e300;
    *opt.upper << std::max(wavelength_nm.front(), wavelength_nm.back()), 10.0 * span, 1e300, 1e300;
    if (!sigma.empty()) opt.sigma.assign(sigma.begin(), sigma.end());
    const auto fit = numerics::fit_function(
        [](double x, const numerics::Vector& p) { return lorentzian(x, p[0], p[1], p[2], p[3]); }, wavelength_nm,
        intensity, x0, opt);
    if (!fit.converged) {
        throw FitError("Lorentzian fit did not converge after " + std::to_string(fit.iterations) + " iterations");
    }
    LorentzianFit out;
    const auto& p = fit.params;
    const auto& e = fit.std_errors;
    out.center_nm = {p[0], e[0]};
    out.fwhm_nm = {p[1], e[1]};
    out.height = {p[2], e[2]};
    out.background = {p[3], e[3]};
    const double q = p[0] / p[1];
    const double var = q * q * (fit.covariance(0, 0) / (p[0] * p[0]) + fit.covariance(1, 1) / (p[1] * p[1]) -
                                2.0 * fit.covariance(0, 1) / (p[0] * p[1]));
    out.q = {q, std::sqrt(std::max(var, 0.0))};
    out.converged = true;
    return out;
}

}  // namespace qdtk::metrics
