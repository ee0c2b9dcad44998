#pragma once

// Single-exponential decay with flat background, fitted after the rise.

#include <algorithm>
#include <cmath>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "qdtk/errors.hpp"
#include "qdtk/numerics/stats.hpp"
#include "qdtk/photon/histogram.hpp"

namespace qdtk::photon {

struct LifetimeOptions {
    std::optional<double> start_ps;  // default: the maximum of the trace
    double start_offset_ps = 0.0;    // added to the start
};

struct LifetimeFit {
    Measured tau_ps;
    Measured amplitude;
    Measured background;
    double start_ps = 0.0;
    bool converged = false;
    int iterations = 0;
};

inline LifetimeFit fit_lifetime(std::span<const double> t_ps, std::span<const double> counts,
                                const LifetimeOptions& opt = {}) {
    if (t_ps.size() != counts.size()) throw InputError("time and count columns differ in length");
    if (t_ps.size() < 5) throw InputError("decay trace needs at least 5 points");
    for (std::size_t i = 1; i < t_ps.size(); ++i) {
        if (!(t_ps[i] > t_ps[i - 1])) throw InputError("decay trace times must increase");
    }
    double start = opt.start_ps.value_or(t_ps[static_cast<std::size_t>(
        std::max_element(counts.begin(), counts.end()) - counts.begin())]);
    start += opt.start_offset_ps;

    std::vector<double> t;
    std::vector<double> y;
    for (std::size_t i = 0; i < t_ps.size(); ++i) {
        if (t_ps[i] >= start) {
            t.push_back(t_ps[i] - start);
            y.push_back(counts[i]);
        }
    }
    if (t.size() < 5) throw InputError("fewer than 5 points after the start offset");

    // start values: background from the last tenth, decay from the log-slope
    // of points well above it
    const std::size_t tail = std::max<std::size_t>(t.size() / 10, 1);
    const double bg0 = numerics::mean(std::span<const double>(y).last(tail));
    std::vector<double> lx;
    std::vector<double> ly;
    const double peak = *std::max_element(y.begin(), y.end());
    for (std::size_t i = 0; i < t.size(); ++i) {
        const double v = y[i] - bg0;
        if (v > 0.05 * (peak - bg0) && v > 0.0) {
            lx.push_back(t[i]);
            ly.push_back(std::log(v));
        }
    }
    double tau0 = 0.3 * t.back();
    if (lx.size() >= 3) {
        const auto line = numerics::fit_line(lx, ly);
        if (line.slope < 0.0) tau0 = -1.0 / line.slope;
    }

    using numerics::Index;
    using numerics::Vector;
    auto model = [&t](const Vector& p, Vector& out) {
        for (std::size_t i = 0; i < t.size(); ++i) out[static_cast<Index>(i)] = p[0] * std::exp(-t[i] / p[1]) + p[2];
    };
    auto jac = [&t](const Vector& p, numerics::Matrix& j) {
        for (std::size_t i = 0; i < t.size(); ++i) {
            const double e = std::exp(-t[i] / p[1]);
            const auto r = static_cast<Index>(i);
            j(r, 0) = e;
            j(r, 1) = p[0] * e * t[i] / (p[1] * p[1]);
            j(r, 2) = 1.0;
        }
    };
    Vector x0(3);
    x0 << std::max(peak - bg0, 1e-12), std::max(tau0, 1e-3), std::max(bg0, 0.0);
    Vector lo(3);
    Vector hi(3);
    lo << 0.0, 1e-3, 0.0;
    hi << 1e300, 1e300, 1e300;
    const auto fit = detail::fit_counts(model, jac, y, x0, lo, hi);
    if (!fit.converged) {
        throw FitError("lifetime fit did not converge after " + std::to_string(fit.iterations) + " iterations");
    }
    LifetimeFit out;
    const auto sd = fit.covariance.diagonal().cwiseMax(0.0).cwiseSqrt();
    out.amplitude = {fit.params[0], sd[0]};
    out.tau_ps = {fit.params[1], sd[1]};
    out.background = {fit.params[2], sd[2]};
    out.start_ps = start;
    out.converged = fit.converged;
    out.iterations = fit.iterations;
    if (!(out.amplitude.value > 3.0 * out.amplitude.sigma)) {
        throw FitError("no significant decay above the background");
    }
    if (t.back() < 3.0 * out.tau_ps.value) {
        throw InputError("trace covers less than three decay times after the start");
    }
    return out;
}

}  // namespace qdtk::photon
