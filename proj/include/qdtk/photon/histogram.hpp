#pragma once

// Start-stop coincidence histograms on a uniform, zero-centered delay grid.

#include <cmath>
#include <string>
#include <string_view>
#include <vector>

#include "qdtk/errors.hpp"
#include "qdtk/numerics/least_squares.hpp"

namespace qdtk::photon {

enum class Excitation { off_resonant, quasi_resonant };
enum class Polarization { none, co, cross };

inline const char* to_string(Excitation e) { return e == Excitation::off_resonant ? "off-resonant" : "quasi-resonant"; }

inline const char* to_string(Polarization p) {
    switch (p) {
        case Polarization::co: return "co";
        case Polarization::cross: return "cross";
        default: return "none";
    }
}

inline Excitation parse_excitation(std::string_view s) {
    if (s == "off-resonant") return Excitation::off_resonant;
    if (s == "quasi-resonant") return Excitation::quasi_resonant;
    throw InputError("unknown excitation '" + std::string(s) + "'");
}

inline Polarization parse_polarization(std::string_view s) {
    if (s == "co") return Polarization::co;
    if (s == "cross") return Polarization::cross;
    if (s == "none") return Polarization::none;
    throw InputError("unknown polarization '" + std::string(s) + "'");
}

struct CoincidenceHistogram {
    double bin_ps = 50.0;
    double period_ns = 12.5;
    Excitation excitation = Excitation::off_resonant;
    Polarization polarization = Polarization::none;
    std::vector<double> tau_ps;  // bin centers
    std::vector<double> counts;

    std::size_t size() const { return tau_ps.size(); }
    double half_span_ps() const { return tau_ps.empty() ? 0.0 : tau_ps.back(); }

    /// Uniform symmetric grid from -half_span to +half_span (rounded to bins).
    static CoincidenceHistogram grid(double bin_ps, double half_span_ps, double period_ns) {
        if (!(bin_ps > 0.0) || !(half_span_ps > 0.0)) throw InputError("bin width and span must be positive");
        if (!(period_ns > 0.0)) throw InputError("laser period must be positive");
        CoincidenceHistogram h;
        h.bin_ps = bin_ps;
        h.period_ns = period_ns;
        const long k = std::lround(half_span_ps / bin_ps);
        for (long i = -k; i <= k; ++i) h.tau_ps.push_back(static_cast<double>(i) * bin_ps);
        h.counts.assign(h.tau_ps.size(), 0.0);
        return h;
    }

    /// Throws DataFormatError unless the grid is uniform and counts are valid.
    /// `min_periods` is the required half-span in laser periods.
    void validate(double min_periods = 5.0) const {
        if (tau_ps.size() != counts.size()) throw DataFormatError("delay and count columns differ in length", "", "counts");
        if (tau_ps.size() < 3) throw DataFormatError("histogram needs at least 3 bins", "", "tau_ps");
        if (!(bin_ps > 0.0)) throw DataFormatError("bin width must be positive", "", "bin_ps");
        if (!(period_ns > 0.0)) throw DataFormatError("laser period must be positive", "", "period_ns");
        for (std::size_t i = 1; i < tau_ps.size(); ++i) {
            if (std::abs(tau_ps[i] - tau_ps[i - 1] - bin_ps) > 1e-6 * bin_ps) {
                throw DataFormatError("bins are not uniform at index " + std::to_string(i), "", "tau_ps");
            }
        }
        if (std::abs(tau_ps.front() + tau_ps.back()) > 1e-6 * bin_ps) {
            throw DataFormatError("delay grid is not symmetric about zero", "", "tau_ps");
        }
        for (double c : counts) {
            if (!(c >= 0.0) || !std::isfinite(c)) throw DataFormatError("counts must be finite and non-negative", "", "counts");
        }
        if (tau_ps.back() < min_periods * period_ns * 1e3 - 0.5 * bin_ps) {
            throw DataFormatError("delay span shorter than " + std::to_string(min_periods) + " laser periods", "",
                                  "tau_ps");
        }
    }

    double total() const {
        double s = 0.0;
        for (double c : counts) s += c;
        return s;
    }
};

/// Parameter with its standard error.
struct Measured {
    double value = 0.0;
    double sigma = 0.0;
};

namespace detail {

// Poisson-weighted fit: one pass with sqrt(max(y,1)) weights, then a refit
// weighted by the first-pass model. The covariance is the unscaled inverse
// Fisher matrix.
template <class Model, class Jac>
numerics::FitResult fit_counts(Model&& model, Jac&& jac, const std::vector<double>& counts,
                               const numerics::Vector& initial, const numerics::Vector& lower,
                               const numerics::Vector& upper, int max_iterations = 200) {
    numerics::CurveFitOptions opt;
    opt.lower = lower;
    opt.upper = upper;
    opt.max_iterations = max_iterations;
    opt.tolerance = 1e-9;
    opt.sigma.resize(counts.size());
    for (std::size_t i = 0; i < counts.size(); ++i) opt.sigma[i] = std::sqrt(std::max(counts[i], 1.0));
    auto first = numerics::fit_curve(model, counts, initial, opt, jac);
    numerics::Vector pred(static_cast<numerics::Index>(counts.size()));
    model(first.params, pred);
    for (std::size_t i = 0; i < counts.size(); ++i) {
        opt.sigma[i] = std::sqrt(std::max(pred[static_cast<numerics::Index>(i)], 1.0));
    }
    auto second = numerics::fit_curve(model, counts, first.params, opt, jac);
    second.iterations += first.iterations;
    // Poisson variance is known: undo the residual-variance scaling
    const auto m = static_cast<double>(counts.size());
    const auto p = static_cast<double>(initial.size());
    const double s2 = m > p ? second.rss / (m - p) : 0.0;
    if (s2 > 0.0) {
        second.covariance /= s2;
        second.std_errors = second.covariance.diagonal().cwiseMax(0.0).cwiseSqrt();
    }
    return second;
}

}  // namespace detail

}  // namespace qdtk::photon
