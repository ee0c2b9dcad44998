#pragma once

// Model-free purity from window sums, and the blinking check on the side-peak
// comb.

#include <cmath>
#include <vector>

#include "qdtk/errors.hpp"
#include "qdtk/numerics/stats.hpp"
#include "qdtk/photon/histogram.hpp"

namespace qdtk::photon {

struct RawG2 {
    double value = 0.0;
    double sigma = 0.0;
    int side_peaks = 0;
    double center_sum = 0.0;
    double side_mean = 0.0;
};

/// Center-window sum over the mean side-window sum. Only side peaks whose
/// whole window lies inside the span are used.
inline RawG2 g2_zero_raw(const CoincidenceHistogram& h, double window_ns = 6.0) {
    h.validate(1.0);
    if (!(window_ns > 0.0)) throw InputError("integration window must be positive");
    if (h.period_ns < 2.0 * window_ns) {
        throw InputError("window of +-" + std::to_string(window_ns) + " ns overlaps neighbouring peaks at period " +
                         std::to_string(h.period_ns) + " ns");
    }
    const double w = window_ns * 1e3;
    const double period = h.period_ns * 1e3;
    const double reach = h.half_span_ps() + 0.5 * h.bin_ps;
    auto window_sum = [&](double c) {
        double s = 0.0;
        for (std::size_t i = 0; i < h.size(); ++i) {
            if (std::abs(h.tau_ps[i] - c) <= w) s += h.counts[i];
        }
        return s;
    };
    std::vector<double> sides;
    const int nmax = static_cast<int>(std::floor(reach / period)) + 1;
    for (int n = -nmax; n <= nmax; ++n) {
        if (n == 0) continue;
        const double c = n * period;
        if (std::abs(c) + w > reach) continue;
        sides.push_back(window_sum(c));
    }
    if (sides.size() < 10) {
        throw InputError("need at least 10 side peaks inside the span, found " + std::to_string(sides.size()));
    }
    RawG2 out;
    out.side_peaks = static_cast<int>(sides.size());
    out.center_sum = window_sum(0.0);
    out.side_mean = numerics::mean(sides);
    if (!(out.side_mean > 0.0)) throw InputError("side-peak windows are empty");
    out.value = out.center_sum / out.side_mean;
    // counting noise of the center, inflated by the side-sum dispersion, plus
    // the error of the mean side sum
    const double s = numerics::sample_std(sides);
    const double dispersion = std::max(s * s / out.side_mean, 1.0);
    const double sigma_mean = s / std::sqrt(static_cast<double>(sides.size()));
    const double a = std::max(out.center_sum, 1.0) * dispersion / (out.side_mean * out.side_mean);
    const double b = out.value * sigma_mean / out.side_mean;
    out.sigma = std::sqrt(a + b * b);
    return out;
}

struct BlinkingCheck {
    std::vector<double> heights;  // peak maxima for n = 1, 2, ... over their mean
    double slope = 0.0;           // per peak
    double slope_lo = 0.0;        // 95% interval
    double slope_hi = 0.0;
    double decay_per_100 = 0.0;   // relative drop over 100 peaks
    bool blinking = false;
};

inline constexpr int kBlinkingMinPeaks = 100;

/// Peak maxima of the positive-delay comb against peak index. Blinking shows
/// as a significant fall of more than 1% per 100 peaks.
inline BlinkingCheck blinking_check(const CoincidenceHistogram& h) {
    h.validate(1.0);
    const double period = h.period_ns * 1e3;
    const double q = 0.25 * period;
    const int n_peaks = static_cast<int>(std::floor((h.half_span_ps() - q) / period));
    if (n_peaks < kBlinkingMinPeaks) {
        throw InputError("blinking check needs at least " + std::to_string(kBlinkingMinPeaks) + " side peaks, found " +
                         std::to_string(std::max(n_peaks, 0)));
    }
    BlinkingCheck out;
    out.heights.assign(static_cast<std::size_t>(n_peaks), 0.0);
    const double t0 = h.tau_ps.front();
    for (int n = 1; n <= n_peaks; ++n) {
        const double c = n * period;
        const auto first = static_cast<std::size_t>(std::max(0.0, std::ceil((c - q - t0) / h.bin_ps)));
        double best = 0.0;
        for (std::size_t i = first; i < h.size() && h.tau_ps[i] <= c + q; ++i) best = std::max(best, h.counts[i]);
        out.heights[static_cast<std::size_t>(n - 1)] = best;
    }
    const double m = numerics::mean(out.heights);
    if (!(m > 0.0)) throw InputError("side peaks are empty");
    std::vector<double> x(out.heights.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        out.heights[i] /= m;
        x[i] = static_cast<double>(i + 1);
    }
    const auto line = numerics::fit_line(x, out.heights);
    out.slope = line.slope;
    out.slope_lo = line.slope - 1.96 * line.slope_sigma;
    out.slope_hi = line.slope + 1.96 * line.slope_sigma;
    out.decay_per_100 = -100.0 * line.slope;
    out.blinking = out.slope_hi < 0.0 && out.decay_per_100 > 0.01;
    return out;
}

}  // namespace qdtk::photon
