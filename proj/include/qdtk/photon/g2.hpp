#pragma once

// Pulsed second-order autocorrelation: histogram models, the fitted g2(0)
// and the two fitters (off-resonant with recapture, quasi-resonant).

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "qdtk/errors.hpp"
#include "qdtk/numerics/least_squares.hpp"
#include "qdtk/numerics/stats.hpp"
#include "qdtk/photon/histogram.hpp"

namespace qdtk::photon {

/// Off-resonant pulsed histogram: background, recapture-shaped center peak
/// and an exponential side-peak comb. Times in ps except the period.
struct OffResonantG2 {
    double background = 0.0;
    double center_scale = 0.0;
    double side_height = 0.0;
    double tau_dec_ps = 700.0;
    double tau_cap_ps = 300.0;
    double period_ns = 13.15;

    void validate() const {
        if (!(tau_dec_ps > 0.0 && tau_cap_ps > 0.0 && period_ns > 0.0)) throw InputError("g2 times must be positive");
        if (background < 0.0 || center_scale < 0.0 || side_height < 0.0) {
            throw InputError("g2 amplitudes must be non-negative");
        }
    }
};

/// Quasi-resonant pulsed histogram: no background, no recapture.
struct QuasiResonantG2 {
    double scale = 1.0;
    double g2_zero = 0.0;
    double tau_dec_ps = 600.0;
    double period_ns = 12.49;

    void validate() const {
        if (!(tau_dec_ps > 0.0 && period_ns > 0.0)) throw InputError("g2 times must be positive");
        if (scale < 0.0 || g2_zero < 0.0) throw InputError("g2 amplitudes must be non-negative");
    }
};

struct CombWindow {
    int half_width = 10;  // explicit peaks per side
    bool tail = true;     // add the exact geometric remainder beyond the window
};

/// Relative separation of the decay and capture times below which the
/// center peak switches to its first-order expansion.
inline constexpr double kDegenerateSeparation = 0.01;

namespace detail {

/// Sum over n != 0 of exp(-|t - n T| / tau) for t >= 0.
inline double comb(double t, double period, double tau, const CombWindow& w) {
    t = std::abs(t);
    const int reach = static_cast<int>(std::floor(t / period)) + 1;
    const int nmax = std::max(w.half_width, w.tail ? reach : 0);
    double s = 0.0;
    for (int n = 1; n <= nmax; ++n) {
        s += std::exp(-std::abs(t - n * period) / tau);
        s += std::exp(-(t + n * period) / tau);
    }
    if (w.tail) {
        // n > nmax: both sides decay geometrically with ratio q
        const double q = std::exp(-period / tau);
        const double qn = std::pow(q, nmax + 1) / (1.0 - q);
        s += qn * (std::exp(t / tau) + std::exp(-t / tau));
    }
    return s;
}

inline double center_shape(double t, double tau_dec, double tau_cap) {
    t = std::abs(t);
    const double mean = 0.5 * (tau_dec + tau_cap);
    if (std::abs(tau_dec - tau_cap) < kDegenerateSeparation * mean) {
        return (tau_dec - tau_cap) * t / (mean * mean) * std::exp(-t / mean);
    }
    return std::exp(-t / tau_dec) - std::exp(-t / tau_cap);
}

}  // namespace detail

inline double g2_model(double tau_ps, const OffResonantG2& p, const CombWindow& w = {}) {
    const double t = std::abs(tau_ps);
    return p.background + p.center_scale * detail::center_shape(t, p.tau_dec_ps, p.tau_cap_ps) +
           p.side_height * detail::comb(t, p.period_ns * 1e3, p.tau_dec_ps, w);
}

inline double g2_model(double tau_ps, const QuasiResonantG2& p, const CombWindow& w = {}) {
    const double t = std::abs(tau_ps);
    return p.scale * (p.g2_zero * std::exp(-t / p.tau_dec_ps) + detail::comb(t, p.period_ns * 1e3, p.tau_dec_ps, w));
}

/// True when the capture and decay times are closer than the degeneracy
/// threshold.
inline bool degenerate_capture(const OffResonantG2& p) {
    return std::abs(p.tau_dec_ps - p.tau_cap_ps) < kDegenerateSeparation * 0.5 * (p.tau_dec_ps + p.tau_cap_ps);
}

/// Center-peak area over side-peak area, both integrated over one period
/// around their peak.
inline double g2_zero_fit(const OffResonantG2& p) {
    p.validate();
    if (p.side_height <= 0.0) throw InputError("side-peak height is zero; g2(0) has no normalization");
    const double half = 0.5 * p.period_ns * 1e3;
    auto area = [half](double tau) { return tau * -std::expm1(-half / tau); };
    return p.center_scale * (area(p.tau_dec_ps) - area(p.tau_cap_ps)) / (p.side_height * area(p.tau_dec_ps));
}

/// Half-period of the comb is shorter than five decay times.
inline bool short_period(const OffResonantG2& p) { return 0.5 * p.period_ns * 1e3 < 5.0 * p.tau_dec_ps; }

/// g2_zero_fit with independent input uncertainties.
inline Measured g2_zero_fit(const OffResonantG2& p, const OffResonantG2& sigma) {
    numerics::Vector x(6);
    x << p.background, p.center_scale, p.side_height, p.tau_dec_ps, p.tau_cap_ps, p.period_ns;
    numerics::Vector s(6);
    s << sigma.background, sigma.center_scale, sigma.side_height, sigma.tau_dec_ps, sigma.tau_cap_ps, sigma.period_ns;
    auto f = [](const numerics::Vector& v) {
        return g2_zero_fit(OffResonantG2{v[0], v[1], v[2], v[3], v[4], v[5]});
    };
    const numerics::Matrix cov = s.cwiseAbs2().asDiagonal();
    return {f(x), std::sqrt(numerics::propagate_variance(f, x, cov))};
}

template <class Params>
struct G2Fit {
    Params params;
    Params sigma;
    Measured g2_zero;
    double mean_residual = 0.0;  // mean |data - model| / side-peak height
    bool converged = false;
    int iterations = 0;
    numerics::Matrix covariance;
    std::vector<std::string> warnings;
};

namespace detail {

// Max count within a quarter period of each side peak |n| <= k.
inline std::vector<double> side_peak_maxima(const CoincidenceHistogram& h, int k) {
    const double period = h.period_ns * 1e3;
    std::vector<double> out;
    for (int n = -k; n <= k; ++n) {
        if (n == 0) continue;
        const double c = n * period;
        if (std::abs(c) + 0.25 * period > h.half_span_ps()) continue;
        double best = 0.0;
        for (std::size_t i = 0; i < h.size(); ++i) {
            if (std::abs(h.tau_ps[i] - c) <= 0.25 * period) best = std::max(best, h.counts[i]);
        }
        out.push_back(best);
    }
    return out;
}

// Decay time from the log-slope of the outer flank of the first side peak.
inline double flank_decay(const CoincidenceHistogram& h, double background, double height) {
    const double period = h.period_ns * 1e3;
    std::vector<double> x;
    std::vector<double> y;
    for (std::size_t i = 0; i < h.size(); ++i) {
        const double d = h.tau_ps[i] - period;
        if (d > h.bin_ps && d < 0.3 * period) {
            const double v = h.counts[i] - background;
            if (v > 0.1 * height) {
                x.push_back(d);
                y.push_back(std::log(v));
            }
        }
    }
    if (x.size() < 3) return 0.05 * period;
    const auto line = numerics::fit_line(x, y);
    return line.slope < 0.0 ? std::clamp(-1.0 / line.slope, 10.0, 0.4 * period) : 0.05 * period;
}

inline double midpoint_level(const CoincidenceHistogram& h) {
    const double period = h.period_ns * 1e3;
    std::vector<double> v;
    for (std::size_t i = 0; i < h.size(); ++i) {
        const double frac = std::abs(h.tau_ps[i]) / period - std::floor(std::abs(h.tau_ps[i]) / period);
        if (std::abs(frac - 0.5) < 0.05) v.push_back(h.counts[i]);
    }
    return v.empty() ? 0.0 : numerics::median(v);
}

// d(model)/d(scale, g2, decay, period) for the quasi-resonant model.
inline void quasi_jacobian(const std::vector<double>& tau_ps, const numerics::Vector& v, const CombWindow& win,
                           numerics::Matrix& j) {
    using numerics::Index;
    const double c = v[0];
    const double g = v[1];
    const double tau = v[2];
    const double per = v[3] * 1e3;
    const int nmax = win.half_width;
    for (std::size_t i = 0; i < tau_ps.size(); ++i) {
        const double t = std::abs(tau_ps[i]);
        const double e0 = std::exp(-t / tau);
        double comb = 0.0;
        double dcomb_tau = 0.0;
        double dcomb_per = 0.0;
        const int reach = std::max(nmax, static_cast<int>(std::floor(t / per)) + 1);
        for (int n = 1; n <= reach; ++n) {
            const double a = t - n * per;
            const double ea = std::exp(-std::abs(a) / tau);
            const double b = t + n * per;
            const double eb = std::exp(-b / tau);
            comb += ea + eb;
            dcomb_tau += ea * std::abs(a) / (tau * tau) + eb * b / (tau * tau);
            dcomb_per += ea * (a > 0 ? n : -n) / tau - eb * n / tau;
        }
        const double q = std::exp(-per / tau);
        const double tail = std::pow(q, reach + 1) / (1.0 - q);
        const double ep = std::exp(t / tau);
        comb += tail * (ep + e0);
        // d tail / d tau and d tail / d per
        const double dlnq_tau = per / (tau * tau);
        const double dlnq_per = -1.0 / tau;
        const double dtail_lnq = tail * ((reach + 1) + q / (1.0 - q));
        dcomb_tau += dtail_lnq * dlnq_tau * (ep + e0) + tail * (-t / (tau * tau) * ep + t / (tau * tau) * e0);
        dcomb_per += dtail_lnq * dlnq_per * (ep + e0);
        const auto r = static_cast<Index>(i);
        j(r, 0) = g * e0 + comb;
        j(r, 1) = c * e0;
        j(r, 2) = c * (g * e0 * t / (tau * tau) + dcomb_tau);
        j(r, 3) = c * dcomb_per * 1e3;
    }
}

template <class Params, class Model>
double mean_abs_residual(const CoincidenceHistogram& h, const Params& p, Model&& model, double norm) {
    double s = 0.0;
    for (std::size_t i = 0; i < h.size(); ++i) s += std::abs(h.counts[i] - model(h.tau_ps[i], p));
    return norm > 0.0 ? s / (static_cast<double>(h.size()) * norm) : 0.0;
}

}  // namespace detail

/// Fits the off-resonant model. The capture time is fitted as a fraction of
/// the decay time, so it never exceeds it. `covariance` refers to
/// (B, A (1 - r), H, tau_dec, r, period), r = tau_cap / tau_dec.
inline G2Fit<OffResonantG2> fit_g2_off_resonant(const CoincidenceHistogram& h,
                                                 std::optional<OffResonantG2> start = std::nullopt) {
    h.validate();
    using numerics::Index;
    using numerics::Vector;
    const double period = h.period_ns * 1e3;

    OffResonantG2 p0;
    if (start) {
        p0 = *start;
    } else {
        p0.period_ns = h.period_ns;
        const auto peaks = detail::side_peak_maxima(h, 10);
        if (peaks.empty()) throw InputError("no side peaks inside the histogram span");
        p0.background = detail::midpoint_level(h);
        p0.side_height = std::max(numerics::median(peaks) - p0.background, 1.0);
        p0.tau_dec_ps = detail::flank_decay(h, p0.background, p0.side_height);
        p0.tau_cap_ps = 0.5 * p0.tau_dec_ps;
        double center = 0.0;
        for (std::size_t i = 0; i < h.size(); ++i) {
            if (std::abs(h.tau_ps[i]) < 0.25 * period) center = std::max(center, h.counts[i]);
        }
        // peak of exp(-t/d) - exp(-2t/d) is 1/4
        p0.center_scale = std::max(4.0 * (center - p0.background), 0.0);
    }

    // Fitted as (B, K, H, tau_dec, r, period) with r = tau_cap / tau_dec and
    // K = A (1 - r): near r = 1 only K is constrained, and A would run away.
    const CombWindow win;
    auto unpack = [](const Vector& v) {
        const double a = v[4] < 1.0 ? v[1] / (1.0 - v[4]) : 0.0;
        return OffResonantG2{v[0], a, v[2], v[3], v[4] * v[3], v[5]};
    };
    auto model = [&](const Vector& v, Vector& out) {
        const double td = v[3];
        const double r = v[4];
        const double mean = 0.5 * td * (1.0 + r);
        const bool degenerate = 1.0 - r < kDegenerateSeparation * 0.5 * (1.0 + r);
        for (std::size_t i = 0; i < h.size(); ++i) {
            const double t = std::abs(h.tau_ps[i]);
            const double center = degenerate ? td * t / (mean * mean) * std::exp(-t / mean)
                                             : (std::exp(-t / td) - std::exp(-t / (r * td))) / (1.0 - r);
            out[static_cast<Index>(i)] =
                v[0] + v[1] * center + v[2] * detail::comb(t, v[5] * 1e3, td, win);
        }
    };
    Vector x0(6);
    const double r0 = std::clamp(p0.tau_cap_ps / p0.tau_dec_ps, 0.01, 0.95);
    x0 << p0.background, p0.center_scale * (1.0 - r0), p0.side_height, p0.tau_dec_ps, r0, p0.period_ns;
    Vector lo(6);
    Vector hi(6);
    lo << 0.0, 0.0, 0.0, 1.0, 1e-3, 0.98 * h.period_ns;
    hi << 1e300, 1e300, 1e300, 0.5 * period, 0.999, 1.02 * h.period_ns;
    x0 = x0.cwiseMax(lo).cwiseMin(hi);
    const auto fit = detail::fit_counts(model, numerics::JacobianFn{}, h.counts, x0, lo, hi);

    G2Fit<OffResonantG2> out;
    out.params = unpack(fit.params);
    const auto& c = fit.covariance;
    auto sd = [&](auto&& f) { return std::sqrt(numerics::propagate_variance(f, fit.params, c)); };
    out.sigma = OffResonantG2{std::sqrt(c(0, 0)), sd([&](const Vector& v) { return unpack(v).center_scale; }),
                              std::sqrt(c(2, 2)), std::sqrt(c(3, 3)),
                              sd([&](const Vector& v) { return v[4] * v[3]; }), std::sqrt(c(5, 5))};
    out.converged = fit.converged;
    out.iterations = fit.iterations;
    out.covariance = fit.covariance;
    out.warnings = fit.warnings;
    if (out.params.side_height > 0.0) {
        auto g = [&unpack](const Vector& v) { return g2_zero_fit(unpack(v)); };
        out.g2_zero = {g(fit.params), sd(g)};
    } else {
        out.warnings.push_back("side-peak height fitted to zero");
    }
    if (short_period(out.params)) out.warnings.push_back("half period below five decay times");
    if (degenerate_capture(out.params)) out.warnings.push_back("capture and decay times degenerate");
    out.mean_residual = detail::mean_abs_residual(
        h, out.params, [&](double t, const OffResonantG2& p) { return g2_model(t, p, win); },
        out.params.side_height);
    return out;
}

inline G2Fit<QuasiResonantG2> fit_g2_quasi_resonant(const CoincidenceHistogram& h,
                                                     std::optional<QuasiResonantG2> start = std::nullopt) {
    h.validate();
    using numerics::Index;
    using numerics::Vector;
    const double period = h.period_ns * 1e3;

    QuasiResonantG2 p0;
    if (start) {
        p0 = *start;
    } else {
        p0.period_ns = h.period_ns;
        const auto peaks = detail::side_peak_maxima(h, 10);
        if (peaks.empty()) throw InputError("no side peaks inside the histogram span");
        p0.scale = std::max(numerics::median(peaks), 1.0);
        p0.tau_dec_ps = detail::flank_decay(h, 0.0, p0.scale);
        double center = 0.0;
        double side = 0.0;
        for (std::size_t i = 0; i < h.size(); ++i) {
            const double t = std::abs(h.tau_ps[i]);
            if (t < 0.5 * period) center += h.counts[i];
            if (std::abs(t - period) < 0.5 * period) side += 0.5 * h.counts[i];
        }
        p0.g2_zero = side > 0.0 ? std::clamp(center / side, 0.0, 2.0) : 0.0;
    }

    const CombWindow win;
    auto unpack = [](const Vector& v) { return QuasiResonantG2{v[0], v[1], v[2], v[3]}; };
    auto model = [&](const Vector& v, Vector& out) {
        const auto p = unpack(v);
        for (std::size_t i = 0; i < h.size(); ++i) out[static_cast<Index>(i)] = g2_model(h.tau_ps[i], p, win);
    };
    auto jac = [&](const Vector& v, numerics::Matrix& j) { detail::quasi_jacobian(h.tau_ps, v, win, j); };
    Vector x0(4);
    x0 << p0.scale, p0.g2_zero, p0.tau_dec_ps, p0.period_ns;
    Vector lo(4);
    Vector hi(4);
    lo << 0.0, 0.0, 1.0, 0.98 * h.period_ns;
    hi << 1e300, 10.0, 0.5 * period, 1.02 * h.period_ns;
    x0 = x0.cwiseMax(lo).cwiseMin(hi);
    const auto fit = detail::fit_counts(model, jac, h.counts, x0, lo, hi);

    G2Fit<QuasiResonantG2> out;
    out.params = unpack(fit.params);
    const auto& c = fit.covariance;
    out.sigma = QuasiResonantG2{std::sqrt(c(0, 0)), std::sqrt(c(1, 1)), std::sqrt(c(2, 2)), std::sqrt(c(3, 3))};
    out.g2_zero = {out.params.g2_zero, out.sigma.g2_zero};
    out.converged = fit.converged;
    out.iterations = fit.iterations;
    out.covariance = fit.covariance;
    out.warnings = fit.warnings;
    out.mean_residual = detail::mean_abs_residual(
        h, out.params, [&](double t, const QuasiResonantG2& p) { return g2_model(t, p, win); }, out.params.scale);
    return out;
}

}  // namespace qdtk::photon
