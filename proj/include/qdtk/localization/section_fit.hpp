#pragma once

// Three-peak analysis of a cross-section: the two field-edge ridges and the
// emitter spot, each fitted locally as a Gaussian on a constant offset.

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "qdtk/errors.hpp"
#include "qdtk/imaging/psf.hpp"
#include "qdtk/localization/cross_section.hpp"
#include "qdtk/numerics/least_squares.hpp"
#include "qdtk/numerics/stats.hpp"

namespace qdtk::localization {

/// Profile lacks a spot or one of the two edge ridges.
class MissingPeakError : public Error {
public:
    using Error::Error;
};

struct Estimate {
    double value = 0.0;
    double sigma = 0.0;
};

struct GaussianFitResult {
    Estimate center;  // px along the profile axis (absolute pixel index)
    Estimate width;   // Gaussian sigma, px
    Estimate amplitude;
    Estimate offset;
    bool converged = false;
    bool saturated = false;
    int samples = 0;

    double fwhm() const { return imaging::kFwhmPerSigma * width.value; }
    double fwhm_sigma() const { return imaging::kFwhmPerSigma * width.sigma; }
};

struct SectionOptions {
    double expected_fwhm_px = 16.0;
    std::optional<double> spot_hint;  // absolute pixel index of the spot
    double saturation_level = 65535.0;
    double detection_sigmas = 5.0;
    double spot_sigmas = 3.0;  // detection level for a hinted spot
    bool correlated_errors = true;
};

struct SectionFit {
    Axis axis = Axis::horizontal;
    GaussianFitResult lower;  // edge with the smaller coordinate
    GaussianFitResult upper;
    GaussianFitResult spot;
    double snr = 0.0;
    double background = 0.0;
    double noise = 0.0;  // residual std in the spot-free margin
    std::vector<std::string> warnings;

    bool converged() const { return lower.converged && upper.converged && spot.converged; }
    Estimate m_lower() const { return lower.center; }
    Estimate m_upper() const { return upper.center; }
    Estimate q() const { return spot.center; }
};

namespace detail {

inline std::vector<double> boxcar(const std::vector<double>& v, int len) {
    const int n = static_cast<int>(v.size());
    const int half = len / 2;
    std::vector<double> out(v.size());
    for (int i = 0; i < n; ++i) {
        const int a = std::max(0, i - half);
        const int b = std::min(n - 1, i + half);
        double s = 0.0;
        for (int k = a; k <= b; ++k) s += v[static_cast<std::size_t>(k)];
        out[static_cast<std::size_t>(i)] = s / (b - a + 1);
    }
    return out;
}

// Local maxima above `threshold`, thinned so no two lie within `min_sep`.
inline std::vector<int> find_peaks(const std::vector<double>& s, double threshold, double min_sep) {
    const int n = static_cast<int>(s.size());
    std::vector<int> raw;
    for (int i = 1; i + 1 < n; ++i) {
        const double v = s[static_cast<std::size_t>(i)];
        if (v > threshold && v > s[static_cast<std::size_t>(i - 1)] && v >= s[static_cast<std::size_t>(i + 1)]) {
            raw.push_back(i);
        }
    }
    std::stable_sort(raw.begin(), raw.end(),
                     [&](int a, int b) { return s[static_cast<std::size_t>(a)] > s[static_cast<std::size_t>(b)]; });
    std::vector<int> kept;
    for (int i : raw) {
        bool clear = true;
        for (int k : kept) clear = clear && std::abs(i - k) >= min_sep;
        if (clear) kept.push_back(i);
    }
    std::sort(kept.begin(), kept.end());
    return kept;
}

// Autocovariance of the quiet (peak-free) samples, each contiguous run
// centered on its own mean.
inline std::vector<double> quiet_autocovariance(const std::vector<double>& profile, const std::vector<bool>& quiet,
                                                int max_lag) {
    const int n = static_cast<int>(profile.size());
    std::vector<double> centered(profile.size(), 0.0);
    std::vector<int> run_id(profile.size(), -1);
    int runs = 0;
    int total = 0;
    for (int i = 0; i < n;) {
        if (!quiet[static_cast<std::size_t>(i)]) {
            ++i;
            continue;
        }
        int j = i;
        double sum = 0.0;
        while (j < n && quiet[static_cast<std::size_t>(j)]) sum += profile[static_cast<std::size_t>(j++)];
        if (j - i > max_lag) {
            const double m = sum / (j - i);
            for (int k = i; k < j; ++k) {
                centered[static_cast<std::size_t>(k)] = profile[static_cast<std::size_t>(k)] - m;
                run_id[static_cast<std::size_t>(k)] = runs;
            }
            total += j - i;
            ++runs;
        }
        i = j;
    }
    if (total < 4 * max_lag) return {};
    std::vector<double> gamma(static_cast<std::size_t>(max_lag) + 1, 0.0);
    for (int lag = 0; lag <= max_lag; ++lag) {
        double s = 0.0;
        for (int i = 0; i + lag < n; ++i) {
            const auto a = static_cast<std::size_t>(i);
            const auto b = static_cast<std::size_t>(i + lag);
            if (run_id[a] >= 0 && run_id[a] == run_id[b]) s += centered[a] * centered[b];
        }
        gamma[static_cast<std::size_t>(lag)] = s / total;
    }
    return gamma;
}

struct PeakWindow {
    int lo = 0;
    int hi = 0;
    double center = 0.0;
    bool saturated = false;
};

inline GaussianFitResult fit_peak(const std::vector<double>& profile, const PeakWindow& w, double background,
                                  double expected_sigma, double saturation_threshold,
                                  const std::vector<double>& gamma, std::vector<double>* residual_out = nullptr,
                                  std::vector<long>* index_out = nullptr) {
    using numerics::Index;
    using numerics::Matrix;
    using numerics::Vector;
    std::vector<long> idx;
    std::vector<double> y;
    for (int i = w.lo; i <= w.hi; ++i) {
        const double v = profile[static_cast<std::size_t>(i)];
        if (w.saturated && v >= saturation_threshold) continue;
        idx.push_back(i);
        y.push_back(v);
    }
    if (y.size() < 6) throw MissingPeakError("too few samples to fit a peak near pixel " + std::to_string(w.center));

    double peak = -1e300;
    for (double v : y) peak = std::max(peak, v);
    Vector p0(4);
    p0 << std::max(peak - background, 1e-9), w.center, expected_sigma, background;

    auto model = [&idx](const Vector& p, Vector& out) {
        for (std::size_t i = 0; i < idx.size(); ++i) {
            const double u = (static_cast<double>(idx[i]) - p[1]) / p[2];
            out[static_cast<Index>(i)] = p[3] + p[0] * std::exp(-0.5 * u * u);
        }
    };
    auto jac = [&idx](const Vector& p, Matrix& j) {
        for (std::size_t i = 0; i < idx.size(); ++i) {
            const double u = (static_cast<double>(idx[i]) - p[1]) / p[2];
            const double e = std::exp(-0.5 * u * u);
            const auto r = static_cast<Index>(i);
            j(r, 0) = e;
            j(r, 1) = p[0] * e * u / p[2];
            j(r, 2) = p[0] * e * u * u / p[2];
            j(r, 3) = 1.0;
        }
    };
    numerics::CurveFitOptions opt;
    Vector lo(4);
    Vector hi(4);
    // a clipped ridge keeps only one slope; its center may lie past the window
    const double reach = w.saturated ? 3.0 * expected_sigma : 0.0;
    lo << 0.0, w.lo - reach, 0.3, -1e300;
    hi << 1e300, w.hi + reach, 6.0 * expected_sigma, 1e300;
    opt.lower = lo;
    opt.upper = hi;
    p0[1] = std::clamp(p0[1], lo[1], hi[1]);
    auto fit = numerics::fit_curve(model, y, p0, opt, jac);

    GaussianFitResult r;
    r.converged = fit.converged;
    r.saturated = w.saturated;
    r.samples = static_cast<int>(y.size());
    Vector se = fit.std_errors;
    if (!gamma.empty()) {
        Matrix cov = numerics::sandwich_covariance(fit.jacobian, gamma, idx);
        for (Index k = 0; k < 4; ++k) se[k] = std::max(se[k], std::sqrt(std::max(cov(k, k), 0.0)));
    }
    r.amplitude = {fit.params[0], se[0]};
    r.center = {fit.params[1], se[1]};
    r.width = {fit.params[2], se[2]};
    r.offset = {fit.params[3], se[3]};
    if (residual_out) {
        Vector pred(static_cast<Index>(y.size()));
        model(fit.params, pred);
        residual_out->clear();
        for (std::size_t i = 0; i < y.size(); ++i) residual_out->push_back(y[i] - pred[static_cast<Index>(i)]);
    }
    if (index_out) *index_out = idx;
    return r;
}

}  // namespace detail

/// Locates and fits both edges and the spot of one cross-section.
inline SectionFit fit_section(const CrossSection& cs, const SectionOptions& opt = {}) {
    const auto& prof = cs.profile;
    const int n = static_cast<int>(prof.size());
    if (n < 16) throw InputError("cross-section profile too short");
    if (!(opt.expected_fwhm_px > 0.0)) throw InputError("expected FWHM must be positive");
    const double fw = opt.expected_fwhm_px;
    const double sigma0 = fw / imaging::kFwhmPerSigma;

    const auto smooth = detail::boxcar(prof, 5);
    const double bg = numerics::median(smooth);
    double noise = numerics::mad_sigma(smooth);
    double scale = 0.0;
    for (double v : prof) scale = std::max(scale, std::abs(v));
    noise = std::max(noise, 1e-9 * std::max(scale, 1.0));

    auto peaks = detail::find_peaks(smooth, bg + opt.detection_sigmas * noise, fw);
    const int o = cs.origin;

    int spot_idx = -1;
    if (opt.spot_hint) {
        const double h = *opt.spot_hint - o;
        const int a = std::max(1, static_cast<int>(std::floor(h - 0.5 * fw)));
        const int b = std::min(n - 2, static_cast<int>(std::ceil(h + 0.5 * fw)));
        double best = bg + opt.spot_sigmas * noise;
        for (int i = a; i <= b; ++i) {
            if (smooth[static_cast<std::size_t>(i)] > best) {
                best = smooth[static_cast<std::size_t>(i)];
                spot_idx = i;
            }
        }
        if (spot_idx < 0) throw MissingPeakError("no spot above background near the hinted position");
    } else {
        if (peaks.size() < 3) {
            throw MissingPeakError("profile shows " + std::to_string(peaks.size()) +
                                   " peaks; need two edges and a spot");
        }
        double best = -1e300;
        for (std::size_t k = 1; k + 1 < peaks.size(); ++k) {
            if (smooth[static_cast<std::size_t>(peaks[k])] > best) {
                best = smooth[static_cast<std::size_t>(peaks[k])];
                spot_idx = peaks[k];
            }
        }
    }

    int lower_idx = -1;
    int upper_idx = -1;
    for (int p : peaks) {
        if (p < spot_idx - fw && lower_idx < 0) lower_idx = p;
        if (p > spot_idx + fw) upper_idx = p;
    }
    if (lower_idx < 0 || upper_idx < 0) throw MissingPeakError("edge ridge missing on one side of the spot");

    std::vector<int> others;
    for (int p : peaks) {
        if (p != lower_idx && p != upper_idx && std::abs(p - spot_idx) >= fw) others.push_back(p);
    }

    SectionFit out;
    out.axis = cs.axis;
    out.background = bg;

    // spot window, kept clear of the edges and of neighbouring spots
    detail::PeakWindow sw;
    sw.center = spot_idx;
    double slo = spot_idx - 2.5 * fw;
    double shi = spot_idx + 2.5 * fw;
    slo = std::max(slo, lower_idx + 1.5 * fw);
    shi = std::min(shi, upper_idx - 1.5 * fw);
    for (int p : others) {
        if (p < spot_idx) slo = std::max(slo, p + 1.5 * fw);
        if (p > spot_idx) shi = std::min(shi, p - 1.5 * fw);
    }
    sw.lo = std::max(0, static_cast<int>(std::ceil(slo)));
    sw.hi = std::min(n - 1, static_cast<int>(std::floor(shi)));
    if (sw.hi - sw.lo < static_cast<int>(2 * fw)) out.warnings.push_back("spot window truncated by neighbours");

    const double sat = 0.95 * opt.saturation_level;
    auto edge_window = [&](int c, bool is_lower) {
        detail::PeakWindow w;
        w.center = c;
        double lo = c - 2.0 * fw;
        double hi = c + 2.0 * fw;
        if (is_lower) {
            hi = std::min(hi, spot_idx - 1.5 * fw);
        } else {
            lo = std::max(lo, spot_idx + 1.5 * fw);
        }
        double peak = 0.0;
        for (int i = std::max(0, c - 2); i <= std::min(n - 1, c + 2); ++i) peak = std::max(peak, prof[static_cast<std::size_t>(i)]);
        if (peak >= sat) {
            w.saturated = true;
            if (is_lower) {
                lo = c;
            } else {
                hi = c;
            }
        }
        w.lo = std::max(0, static_cast<int>(std::ceil(lo)));
        w.hi = std::min(n - 1, static_cast<int>(std::floor(hi)));
        return w;
    };
    const auto lw = edge_window(lower_idx, true);
    const auto uw = edge_window(upper_idx, false);

    std::vector<double> gamma;
    if (opt.correlated_errors) {
        std::vector<bool> quiet(prof.size(), true);
        std::vector<int> all = peaks;
        all.push_back(spot_idx);
        for (int i = 0; i < n; ++i) {
            for (int p : all) {
                if (std::abs(i - p) <= 2.5 * fw) quiet[static_cast<std::size_t>(i)] = false;
            }
        }
        gamma = detail::quiet_autocovariance(prof, quiet, static_cast<int>(std::ceil(1.5 * fw)));
        if (gamma.empty()) out.warnings.push_back("too few quiet samples; white-noise errors used");
    }

    std::vector<double> resid;
    std::vector<long> ridx;
    out.spot = detail::fit_peak(prof, sw, bg, sigma0, sat, gamma, &resid, &ridx);
    out.lower = detail::fit_peak(prof, lw, bg, sigma0, sat, gamma);
    out.upper = detail::fit_peak(prof, uw, bg, sigma0, sat, gamma);

    std::vector<double> margin;
    const double mu = out.spot.center.value;
    for (std::size_t i = 0; i < resid.size(); ++i) {
        if (std::abs(static_cast<double>(ridx[i]) - mu) > 1.5 * fw) margin.push_back(resid[i]);
    }
    if (margin.size() < 5) margin = resid;
    double ss = 0.0;
    for (double r : margin) ss += r * r;
    out.noise = std::sqrt(ss / static_cast<double>(margin.size()));
    out.snr = out.noise > 0.0 ? out.spot.amplitude.value / out.noise : std::numeric_limits<double>::infinity();

    for (auto* g : {&out.lower, &out.upper, &out.spot}) {
        g->center.value += o;
    }
    if (!out.converged()) out.warnings.push_back("a peak fit did not converge");
    if (!(out.lower.center.value < out.spot.center.value && out.spot.center.value < out.upper.center.value)) {
        throw MissingPeakError("fitted centers out of order (edge, spot, edge)");
    }
    return out;
}

}  // namespace qdtk::localization
