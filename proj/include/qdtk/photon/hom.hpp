#pragma once

// Two-photon interference with an unbalanced interferometer: five-peak
// clusters every laser period, and a dip in the central peak when the
// interfering photons are co-polarized.

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "qdtk/errors.hpp"
#include "qdtk/numerics/least_squares.hpp"
#include "qdtk/photon/histogram.hpp"

namespace qdtk::photon {

struct HomParams {
    std::array<double, 5> center{1.0, 2.0, 2.0, 2.0, 1.0};  // central cluster peak heights
    std::array<double, 5> outer{1.0, 4.0, 6.0, 4.0, 1.0};   // mean heights of the other clusters
    double tau_ps = 550.0;                                  // emission lifetime
    double coherence_ps = 100.0;
    double v_ps = 0.0;  // post-selected visibility
    double period_ns = 12.5;
    std::array<double, 5> delays_ns{-8.0, -4.0, 0.0, 4.0, 8.0};
    int clusters = 10;  // outer clusters per side

    void validate() const {
        if (!(tau_ps > 0.0 && coherence_ps > 0.0 && period_ns > 0.0)) throw InputError("HOM times must be positive");
        if (!(v_ps >= 0.0 && v_ps <= 1.0)) throw InputError("post-selected visibility must lie in [0, 1]");
        for (double a : center) {
            if (!(a >= 0.0)) throw InputError("HOM peak heights must be non-negative");
        }
        for (double b : outer) {
            if (!(b >= 0.0)) throw InputError("HOM peak heights must be non-negative");
        }
    }
};

namespace detail {

// Terms further than this many lifetimes from a peak are dropped.
inline constexpr double kHomReach = 40.0;

inline double peak(double d, double tau) {
    const double a = std::abs(d);
    return a > kHomReach * tau ? 0.0 : std::exp(-a / tau);
}

}  // namespace detail

inline double hom_model(double tau_ps, const HomParams& p, Polarization pol) {
    const double tau = p.tau_ps;
    double s = 0.0;
    for (int i = 0; i < 5; ++i) {
        const double d = tau_ps + p.delays_ns[static_cast<std::size_t>(i)] * 1e3;
        if (i == 2) {
            double c = p.center[2] * detail::peak(d, tau);
            if (pol == Polarization::co) c *= 1.0 - p.v_ps * std::exp(-std::abs(d) / p.coherence_ps);
            s += c;
        } else {
            s += p.center[static_cast<std::size_t>(i)] * detail::peak(d, tau);
        }
    }
    for (int n = -p.clusters; n <= p.clusters; ++n) {
        if (n == 0) continue;
        for (int i = 0; i < 5; ++i) {
            const double d = tau_ps + p.delays_ns[static_cast<std::size_t>(i)] * 1e3 + n * p.period_ns * 1e3;
            s += p.outer[static_cast<std::size_t>(i)] * detail::peak(d, tau);
        }
    }
    return s;
}

/// Visibility from central-peak areas of co- and cross-polarized data.
inline Measured visibility_from_areas(Measured co, Measured cross) {
    if (!(std::abs(cross.value) > 0.0)) throw InputError("cross-polarized central area is zero");
    const double r = co.value / cross.value;
    const double s = std::hypot(co.sigma / cross.value, r * cross.sigma / cross.value);
    return {1.0 - r, s};
}

/// Visibility from the central peak against its two neighbours, which come
/// from photons that did not interfere. May be negative.
inline double hom_sidepeak_visibility(const HomParams& p) {
    const double side = p.center[1] + p.center[3];
    if (!(side > 0.0)) throw InputError("neighbouring central-cluster peaks are empty");
    const double v = 1.0 - 2.0 * p.center[2] / side;
    return v == 0.0 ? 0.0 : v;
}

struct HomFit {
    HomParams params;  // heights in counts per bin
    HomParams sigma;
    std::array<Measured, 5> center_norm{};  // heights over the first central peak
    std::array<Measured, 5> outer_norm{};
    double mean_residual = 0.0;  // mean |data - model| in units of the first central peak
    bool converged = false;
    int iterations = 0;
    numerics::Matrix covariance;
    std::vector<std::string> warnings;
};

struct HomPairFit {
    HomFit co;
    HomFit cross;
    Measured visibility;
    Measured post_selected;
};

namespace detail {

// Parameter layout: 5 central heights, 5 outer heights, lifetime, then for
// co-polarized data coherence time and post-selected visibility.
inline HomParams unpack_hom(const numerics::Vector& v, const HomParams& shape, bool co) {
    HomParams p = shape;
    for (int i = 0; i < 5; ++i) {
        p.center[static_cast<std::size_t>(i)] = v[i];
        p.outer[static_cast<std::size_t>(i)] = v[5 + i];
    }
    p.tau_ps = v[10];
    if (co) {
        p.coherence_ps = v[11];
        p.v_ps = v[12];
    } else {
        p.v_ps = 0.0;
    }
    return p;
}

// Basis functions that multiply each height, for fixed times. Column 2 is the
// undipped central peak; `dip` (optional) is the extra central column for
// co-polarized data, e^{-|t|/tau} e^{-|t|/T2}.
inline numerics::Matrix hom_basis(const std::vector<double>& t, const HomParams& p, bool with_dip) {
    const auto m = static_cast<numerics::Index>(t.size());
    numerics::Matrix x = numerics::Matrix::Zero(m, with_dip ? 11 : 10);
    for (numerics::Index r = 0; r < m; ++r) {
        const double tau = t[static_cast<std::size_t>(r)];
        for (int i = 0; i < 5; ++i) {
            const double d = tau + p.delays_ns[static_cast<std::size_t>(i)] * 1e3;
            x(r, i) = peak(d, p.tau_ps);
            if (i == 2 && with_dip) x(r, 10) = -x(r, i) * std::exp(-std::abs(d) / p.coherence_ps);
            for (int n = -p.clusters; n <= p.clusters; ++n) {
                if (n == 0) continue;
                x(r, 5 + i) += peak(d + n * p.period_ns * 1e3, p.tau_ps);
            }
        }
    }
    return x;
}

inline void hom_jacobian(const std::vector<double>& t, const numerics::Vector& v, const HomParams& shape, bool co,
                         numerics::Matrix& j) {
    const auto p = unpack_hom(v, shape, co);
    const double tau = p.tau_ps;
    j.setZero();
    for (std::size_t r = 0; r < t.size(); ++r) {
        const auto row = static_cast<numerics::Index>(r);
        double dtau = 0.0;
        for (int i = 0; i < 5; ++i) {
            const double d = t[r] + p.delays_ns[static_cast<std::size_t>(i)] * 1e3;
            const double e = peak(d, tau);
            const double de = e * std::abs(d) / (tau * tau);
            if (i == 2 && co) {
                const double g = std::exp(-std::abs(d) / p.coherence_ps);
                const double f = 1.0 - p.v_ps * g;
                j(row, i) = e * f;
                dtau += p.center[2] * de * f;
                j(row, 11) = -p.center[2] * e * p.v_ps * g * std::abs(d) / (p.coherence_ps * p.coherence_ps);
                j(row, 12) = -p.center[2] * e * g;
            } else {
                j(row, i) = e;
                dtau += p.center[static_cast<std::size_t>(i)] * de;
            }
            double sum = 0.0;
            double dsum = 0.0;
            for (int n = -p.clusters; n <= p.clusters; ++n) {
                if (n == 0) continue;
                const double dn = d + n * p.period_ns * 1e3;
                const double en = peak(dn, tau);
                sum += en;
                dsum += en * std::abs(dn) / (tau * tau);
            }
            j(row, 5 + i) = sum;
            dtau += p.outer[static_cast<std::size_t>(i)] * dsum;
        }
        j(row, 10) = dtau;
    }
}

// Weighted linear least squares for the heights at fixed times; returns
// chi-square and the coefficients (clamped at zero).
inline double linear_heights(const numerics::Matrix& x, const std::vector<double>& y, numerics::Vector& coef) {
    const auto m = x.rows();
    numerics::Vector w(m);
    numerics::Vector yy(m);
    for (numerics::Index r = 0; r < m; ++r) {
        w[r] = 1.0 / std::sqrt(std::max(y[static_cast<std::size_t>(r)], 1.0));
        yy[r] = y[static_cast<std::size_t>(r)] * w[r];
    }
    const numerics::Matrix xw = w.asDiagonal() * x;
    coef = (xw.transpose() * xw).ldlt().solve(xw.transpose() * yy);
    if (!coef.allFinite()) {
        coef = numerics::Vector::Zero(x.cols());
        return std::numeric_limits<double>::infinity();
    }
    return (xw * coef - yy).squaredNorm();
}

inline std::vector<double> log_grid(double lo, double hi, int n) {
    std::vector<double> g;
    for (int k = 0; k < n; ++k) g.push_back(lo * std::pow(hi / lo, static_cast<double>(k) / (n - 1)));
    return g;
}

inline HomFit fit_hom_one(const CoincidenceHistogram& h, const HomParams& shape, bool co,
                          std::optional<double> tau_hint) {
    using numerics::Index;
    using numerics::Vector;
    const auto& t = h.tau_ps;

    // start: grid over the times, heights by linear least squares
    HomParams trial = shape;
    double best = std::numeric_limits<double>::infinity();
    Vector x0(co ? 13 : 11);
    const auto taus = tau_hint ? std::vector<double>{*tau_hint} : log_grid(150.0, 3000.0, 25);
    const auto t2s = co ? log_grid(10.0, std::min(3000.0, 2.0 * taus.front()), 20) : std::vector<double>{1.0};
    for (double tau : taus) {
        for (double t2 : t2s) {
            trial.tau_ps = tau;
            trial.coherence_ps = t2;
            Vector coef;
            const double chi = linear_heights(hom_basis(t, trial, co), h.counts, coef);
            if (chi < best) {
                best = chi;
                for (int i = 0; i < 10; ++i) x0[i] = std::max(coef[i], 0.0);
                x0[10] = tau;
                if (co) {
                    x0[11] = t2;
                    x0[12] = coef[2] > 0.0 ? std::clamp(coef[10] / coef[2], 0.0, 1.0) : 0.0;
                }
            }
        }
    }

    Vector lo = Vector::Zero(x0.size());
    Vector hi = Vector::Constant(x0.size(), 1e300);
    lo[10] = 10.0;
    hi[10] = 1e4;
    if (co) {
        lo[11] = 1.0;
        // T2 <= 2 T1; a wider dip is degenerate with the central height
        hi[11] = 2.0 * (tau_hint ? *tau_hint : hi[10]);
        hi[12] = 1.0;
    }
    auto model = [&](const Vector& v, Vector& out) {
        const auto p = unpack_hom(v, shape, co);
        const auto pol = co ? Polarization::co : Polarization::cross;
        for (std::size_t i = 0; i < t.size(); ++i) out[static_cast<Index>(i)] = hom_model(t[i], p, pol);
    };
    auto jac = [&](const Vector& v, numerics::Matrix& j) { hom_jacobian(t, v, shape, co, j); };
    const auto fit = fit_counts(model, jac, h.counts, x0, lo, hi);

    HomFit out;
    out.params = unpack_hom(fit.params, shape, co);
    Vector sd = fit.covariance.diagonal().cwiseMax(0.0).cwiseSqrt();
    out.sigma = unpack_hom(sd, shape, co);
    if (!co) out.sigma.coherence_ps = 0.0;
    out.converged = fit.converged;
    out.iterations = fit.iterations;
    out.covariance = fit.covariance;
    out.warnings = fit.warnings;

    const double a1 = fit.params[0];
    if (a1 > 0.0) {
        for (int i = 0; i < 10; ++i) {
            const double r = fit.params[i] / a1;
            const double var = fit.covariance(i, i) / (a1 * a1) + r * r * fit.covariance(0, 0) / (a1 * a1) -
                               2.0 * r * fit.covariance(i, 0) / (a1 * a1);
            const Measured m{r, std::sqrt(std::max(var, 0.0))};
            if (i < 5) {
                out.center_norm[static_cast<std::size_t>(i)] = m;
            } else {
                out.outer_norm[static_cast<std::size_t>(i - 5)] = m;
            }
        }
        Vector pred(static_cast<Index>(t.size()));
        model(fit.params, pred);
        double s = 0.0;
        for (std::size_t i = 0; i < t.size(); ++i) s += std::abs(h.counts[i] - pred[static_cast<Index>(i)]);
        out.mean_residual = s / (static_cast<double>(t.size()) * a1);
    } else {
        out.warnings.push_back("first central peak fitted to zero");
    }
    return out;
}

}  // namespace detail

/// Fits cross-polarized data first, then co-polarized data starting from
/// the cross lifetime. Visibility compares the central-peak heights, each
/// normalized to its first central peak.
inline HomPairFit fit_hom_pair(const CoincidenceHistogram& co, const CoincidenceHistogram& cross,
                               const HomParams& shape = {}) {
    co.validate(1.0);
    cross.validate(1.0);
    if (co.size() != cross.size() || std::abs(co.bin_ps - cross.bin_ps) > 1e-9 * co.bin_ps) {
        throw InputError("co and cross histograms must share one binning");
    }
    if (std::abs(co.period_ns - cross.period_ns) > 1e-9 * co.period_ns) {
        throw InputError("co and cross histograms must share one laser period");
    }
    HomParams s = shape;
    s.period_ns = co.period_ns;

    HomPairFit out;
    out.cross = detail::fit_hom_one(cross, s, false, std::nullopt);
    if (!out.cross.converged) {
        throw FitError("cross-polarized HOM fit did not converge after " + std::to_string(out.cross.iterations) +
                       " iterations");
    }
    out.co = detail::fit_hom_one(co, s, true, out.cross.params.tau_ps);
    if (!out.co.converged) {
        throw FitError("co-polarized HOM fit did not converge after " + std::to_string(out.co.iterations) +
                       " iterations");
    }
    const auto& cr = out.cross.center_norm[2];
    const double a3 = out.cross.params.center[2];
    const double a3_sigma = out.cross.sigma.center[2];
    if (!(cr.value > 1e-3) || a3 < 2.0 * a3_sigma) throw FitError("cross-polarized central peak is empty");
    out.visibility = visibility_from_areas(out.co.center_norm[2], cr);
    out.post_selected = {out.co.params.v_ps, out.co.sigma.v_ps};
    return out;
}

}  // namespace qdtk::photon
