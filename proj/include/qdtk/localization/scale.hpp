#pragma once

// Pixel-to-micrometre scaling and the position uncertainty budget.

#include <cmath>
#include <span>
#include <vector>

#include "qdtk/errors.hpp"
#include "qdtk/localization/section_fit.hpp"
#include "qdtk/numerics/stats.hpp"

namespace qdtk::localization {

struct ScaleFactor {
    double p = 0.0;   // px / um
    double dp = 0.0;  // standard error of the mean, px / um
    int n_sections = 0;
    std::vector<double> per_section;
    std::vector<double> per_section_sigma;  // propagated single-section diagnostic
};

struct EdgeSeparation {
    double separation_px = 0.0;
    double lower_sigma_px = 0.0;
    double upper_sigma_px = 0.0;
};

/// Field-size uncertainty from lithography alignment and over-etch allowance.
inline double field_size_uncertainty(double dc_um, double dx_um) { return std::hypot(dc_um, 2.0 * dx_um); }

inline ScaleFactor scale_factor(std::span<const EdgeSeparation> sections, double field_um, double dc_um = 0.04,
                                double dx_um = 0.04) {
    if (!(field_um > 0.0)) throw InputError("field size must be positive");
    if (sections.size() < 2) throw InputError("scale factor needs at least two cross-sections");
    ScaleFactor s;
    s.n_sections = static_cast<int>(sections.size());
    const double df = field_size_uncertainty(dc_um, dx_um);
    for (const auto& e : sections) {
        const double sep = std::abs(e.separation_px);
        s.per_section.push_back(sep / field_um);
        s.per_section_sigma.push_back(std::sqrt(std::pow(e.upper_sigma_px / field_um, 2) +
                                                std::pow(e.lower_sigma_px / field_um, 2) +
                                                std::pow(sep * df / (field_um * field_um), 2)));
    }
    s.p = numerics::mean(s.per_section);
    s.dp = numerics::sample_std(s.per_section) / std::sqrt(static_cast<double>(s.n_sections));
    return s;
}

inline ScaleFactor scale_factor(std::span<const SectionFit> fits, double field_um, double dc_um = 0.04,
                                double dx_um = 0.04) {
    std::vector<EdgeSeparation> seps;
    for (const auto& f : fits) {
        seps.push_back({f.upper.center.value - f.lower.center.value, f.lower.center.sigma, f.upper.center.sigma});
    }
    return scale_factor(seps, field_um, dc_um, dx_um);
}

/// The three contributions to a one-dimensional position uncertainty, um.
struct PositionBudget {
    double spot_term = 0.0;   // dQpx / P
    double edge_term = 0.0;   // dMl / P
    double scale_term = 0.0;  // (Qpx - Ml) dP / P^2

    double total() const { return std::sqrt(spot_term * spot_term + edge_term * edge_term + scale_term * scale_term); }
};

struct Position1D {
    double q_um = 0.0;
    double dq_um = 0.0;
    PositionBudget budget;
};

/// Position from pixel quantities: spot center, lower-edge center, scale.
inline Position1D position_1d(Estimate spot_px, Estimate lower_px, double p, double dp) {
    if (!(p > 0.0)) throw InputError("scale factor must be positive");
    if (spot_px.sigma < 0.0 || lower_px.sigma < 0.0 || dp < 0.0) throw InputError("uncertainties must be non-negative");
    Position1D r;
    const double dist = spot_px.value - lower_px.value;
    r.q_um = dist / p;
    r.budget.spot_term = spot_px.sigma / p;
    r.budget.edge_term = lower_px.sigma / p;
    r.budget.scale_term = std::abs(dist) * dp / (p * p);
    r.dq_um = r.budget.total();
    return r;
}

inline Position1D position_1d(const SectionFit& fit, const ScaleFactor& scale) {
    return position_1d(fit.q(), fit.m_lower(), scale.p, scale.dp);
}

struct Combined {
    double dq = 0.0;
    double dr = 0.0;
};

inline Combined combine_2d(double dq_h, double dq_v, double dc) {
    if (dq_h < 0.0 || dq_v < 0.0 || dc < 0.0) throw InputError("uncertainties must be non-negative");
    Combined c;
    c.dq = std::hypot(dq_h, dq_v);
    c.dr = std::hypot(c.dq, dc);
    return c;
}

}  // namespace qdtk::localization
