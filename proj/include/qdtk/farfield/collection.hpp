#pragma once

// Lens-collected power from tabulated dipole far fields, the trion average
// of the radial and azimuthal dipoles, and displacement sweeps.

#include <Eigen/Dense>

#include <cmath>
#include <limits>
#include <numbers>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "qdtk/errors.hpp"
#include "qdtk/parallel.hpp"

namespace qdtk::farfield {

enum class Dipole { r, phi };

inline const char* to_string(Dipole d) { return d == Dipole::r ? "r" : "phi"; }

inline Dipole parse_dipole(std::string_view s) {
    if (s == "r") return Dipole::r;
    if (s == "phi") return Dipole::phi;
    throw InputError("unknown dipole '" + std::string(s) + "'");
}

struct FarFieldGrid {
    std::vector<double> theta_rad;  // [0, pi/2]
    std::vector<double> phi_rad;    // [0, 2 pi)
    Eigen::MatrixXd power;          // per unit solid angle, rows theta, columns phi
    double total_power = 1.0;
    Dipole dipole = Dipole::r;
    double rho_um = 0.0;

    void validate() const {
        if (theta_rad.size() < 2 || phi_rad.empty()) throw InputError("far-field grid needs at least 2 theta and 1 phi samples");
        if (power.rows() != static_cast<Eigen::Index>(theta_rad.size()) ||
            power.cols() != static_cast<Eigen::Index>(phi_rad.size())) {
            throw InputError("far-field matrix shape does not match its angle grids");
        }
        for (std::size_t i = 1; i < theta_rad.size(); ++i) {
            if (!(theta_rad[i] > theta_rad[i - 1])) throw InputError("theta samples must increase strictly");
        }
        for (std::size_t i = 1; i < phi_rad.size(); ++i) {
            if (!(phi_rad[i] > phi_rad[i - 1])) throw InputError("phi samples must increase strictly");
        }
        if (theta_rad.front() < 0.0 || theta_rad.back() > 0.5 * std::numbers::pi + 1e-9) {
            throw InputError("theta samples must lie in [0, pi/2]");
        }
        if (phi_rad.front() < 0.0 || phi_rad.back() >= 2.0 * std::numbers::pi) {
            throw InputError("phi samples must lie in [0, 2 pi)");
        }
        if (!(power.array() >= 0.0).all() || !power.allFinite()) throw InputError("far-field power must be finite and non-negative");
        // zero is allowed so a switched-off dipole component can be passed
        if (!(total_power >= 0.0)) throw InputError("total emitted power must be non-negative");
    }

    /// Uniform grid, theta in [0, pi/2] with both ends, phi over [0, 2 pi).
    template <class F>
    static FarFieldGrid sample(F&& f, int n_theta, int n_phi) {
        FarFieldGrid g;
        for (int i = 0; i < n_theta; ++i) g.theta_rad.push_back(0.5 * std::numbers::pi * i / (n_theta - 1));
        for (int j = 0; j < n_phi; ++j) g.phi_rad.push_back(2.0 * std::numbers::pi * j / n_phi);
        g.power.resize(n_theta, n_phi);
        for (int i = 0; i < n_theta; ++i) {
            for (int j = 0; j < n_phi; ++j) g.power(i, j) = f(g.theta_rad[static_cast<std::size_t>(i)], g.phi_rad[static_cast<std::size_t>(j)]);
        }
        return g;
    }
};

inline constexpr int kMinConeSamples = 8;

namespace detail {

// periodic trapezoid weights over [0, 2 pi)
inline std::vector<double> phi_weights(const std::vector<double>& phi) {
    const std::size_t n = phi.size();
    std::vector<double> w(n, 0.0);
    if (n == 1) {
        w[0] = 2.0 * std::numbers::pi;
        return w;
    }
    for (std::size_t j = 0; j < n; ++j) {
        const double next = j + 1 < n ? phi[j + 1] : phi[0] + 2.0 * std::numbers::pi;
        const double gap = next - phi[j];
        w[j] += 0.5 * gap;
        w[(j + 1) % n] += 0.5 * gap;
    }
    return w;
}

}  // namespace detail

/// Power into the cone theta < asin(NA): trapezoid over theta on
/// P sin(theta), with the last partial interval interpolated linearly.
inline double lens_power(const FarFieldGrid& g, double na) {
    g.validate();
    if (!(na > 0.0 && na < 1.0)) throw InputError("numerical aperture must lie in (0, 1)");
    const double tmax = std::asin(na);
    if (tmax > g.theta_rad.back() + 1e-12) throw InputError("collection cone exceeds the theta grid");
    const auto w = detail::phi_weights(g.phi_rad);
    auto ring = [&](std::size_t i) {
        double s = 0.0;
        for (std::size_t j = 0; j < w.size(); ++j) s += w[j] * g.power(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
        return s * std::sin(g.theta_rad[i]);
    };
    int inside = 0;
    for (double t : g.theta_rad) inside += t <= tmax;
    if (inside < kMinConeSamples) {
        throw InputError("only " + std::to_string(inside) + " theta samples inside the collection cone, need " +
                         std::to_string(kMinConeSamples));
    }
    double total = 0.0;
    double prev = ring(0);
    for (std::size_t i = 1; i < g.theta_rad.size(); ++i) {
        const double t0 = g.theta_rad[i - 1];
        const double t1 = g.theta_rad[i];
        if (t0 >= tmax) break;
        const double cur = ring(i);
        if (t1 <= tmax) {
            total += 0.5 * (prev + cur) * (t1 - t0);
        } else {
            const double f = (tmax - t0) / (t1 - t0);
            total += 0.5 * (prev + (prev + f * (cur - prev))) * (tmax - t0);
        }
        prev = cur;
    }
    return total;
}

/// Circular trion dipole as the mean of its two linear components.
inline double trion_power(double p_r, double p_phi) {
    if (!(p_r >= 0.0 && p_phi >= 0.0)) throw InputError("dipole powers must be non-negative");
    return 0.5 * (p_r + p_phi);
}

inline void require_matching(const FarFieldGrid& a, const FarFieldGrid& b) {
    if (a.theta_rad != b.theta_rad || a.phi_rad != b.phi_rad) throw InputError("far-field grids differ in their angles");
    if (std::abs(a.rho_um - b.rho_um) > 1e-9) throw InputError("far-field grids belong to different displacements");
}

inline double trion_extraction(const FarFieldGrid& g_r, const FarFieldGrid& g_phi, double na) {
    require_matching(g_r, g_phi);
    const double total = g_r.total_power + g_phi.total_power;
    if (!(total > 0.0)) throw InputError("both dipole components have zero total power");
    return (lens_power(g_r, na) + lens_power(g_phi, na)) / total;
}

struct SweepRow {
    double rho_um = 0.0;
    double p_r = 0.0;
    double p_phi = 0.0;
    std::optional<FarFieldGrid> g_r;  // without grids only the Purcell factor is computed
    std::optional<FarFieldGrid> g_phi;
};

struct SweepPoint {
    double rho_um = 0.0;
    double purcell = 0.0;
    std::optional<double> extraction;
};

struct SweepResult {
    std::vector<SweepPoint> points;
    std::optional<double> rho_half_um;  // Purcell factor at half its rho = 0 value
};

inline SweepResult displacement_sweep(const std::vector<SweepRow>& rows, double na, double bulk_power,
                                      unsigned jobs = 1) {
    if (rows.empty()) throw InputError("sweep has no rows");
    if (!(bulk_power > 0.0)) throw InputError("bulk power must be positive");
    if (rows.front().rho_um != 0.0) throw InputError("sweep must start at rho = 0");
    for (std::size_t i = 1; i < rows.size(); ++i) {
        if (!(rows[i].rho_um > rows[i - 1].rho_um)) throw InputError("sweep displacements must increase strictly");
    }
    SweepResult out;
    out.points.resize(rows.size());
    parallel_for(rows.size(), jobs, [&](std::size_t i) {
        const auto& r = rows[i];
        auto& p = out.points[i];
        p.rho_um = r.rho_um;
        p.purcell = trion_power(r.p_r, r.p_phi) / bulk_power;
        if (r.g_r && r.g_phi) p.extraction = trion_extraction(*r.g_r, *r.g_phi, na);
    });
    const double half = 0.5 * out.points.front().purcell;
    for (std::size_t i = 1; i < out.points.size(); ++i) {
        const auto& a = out.points[i - 1];
        const auto& b = out.points[i];
        if (b.purcell <= half && a.purcell > half) {
            out.rho_half_um = a.rho_um + (a.purcell - half) / (a.purcell - b.purcell) * (b.rho_um - a.rho_um);
            break;
        }
    }
    return out;
}

}  // namespace qdtk::farfield
