#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <span>
#include <vector>

#include "qdtk/errors.hpp"

namespace qdtk::numerics {

inline double mean(std::span<const double> v) {
    if (v.empty()) throw InputError("mean of empty sample");
    return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

/// Sample standard deviation (n-1 denominator).
inline double sample_std(std::span<const double> v) {
    if (v.size() < 2) throw InputError("sample standard deviation needs at least two values");
    const double m = mean(v);
    double ss = 0.0;
    for (double x : v) ss += (x - m) * (x - m);
    return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

/// Linear-interpolated percentile, q in [0, 100].
inline double percentile(std::span<const double> v, double q) {
    if (v.empty()) throw InputError("percentile of empty sample");
    if (q < 0.0 || q > 100.0) throw InputError("percentile outside [0, 100]");
    std::vector<double> s(v.begin(), v.end());
    std::sort(s.begin(), s.end());
    const double pos = q / 100.0 * static_cast<double>(s.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = std::min(lo + 1, s.size() - 1);
    const double frac = pos - static_cast<double>(lo);
    return s[lo] + frac * (s[hi] - s[lo]);
}

inline double median(std::span<const double> v) { return percentile(v, 50.0); }

/// Median absolute deviation scaled to a Gaussian sigma.
inline double mad_sigma(std::span<const double> v) {
    const double med = median(v);
    std::vector<double> dev;
    dev.reserve(v.size());
    for (double x : v) dev.push_back(std::abs(x - med));
    return 1.4826 * median(dev);
}

/// Ordinary least-squares line y = a + b x with standard errors.
struct LineFit {
    double intercept = 0.0;
    double slope = 0.0;
    double intercept_sigma = 0.0;
    double slope_sigma = 0.0;
};

inline LineFit fit_line(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size()) throw InputError("fit_line: x and y lengths differ");
    if (x.size() < 3) throw InputError("fit_line: need at least three points");
    const double n = static_cast<double>(x.size());
    const double mx = mean(x);
    const double my = mean(y);
    double sxx = 0.0;
    double sxy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
    }
    if (sxx <= 0.0) throw InputError("fit_line: x values are all equal");
    LineFit f;
    f.slope = sxy / sxx;
    f.intercept = my - f.slope * mx;
    double rss = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double r = y[i] - f.intercept - f.slope * x[i];
        rss += r * r;
    }
    const double s2 = rss / (n - 2.0);
    f.slope_sigma = std::sqrt(s2 / sxx);
    f.intercept_sigma = std::sqrt(s2 * (1.0 / n + mx * mx / sxx));
    return f;
}

}  // namespace qdtk::numerics
