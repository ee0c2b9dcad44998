#pragma once

// Reference fit parameters and count levels for synthetic test data.

#include <array>
#include <string_view>

#include "qdtk/photon/g2.hpp"
#include "qdtk/photon/hom.hpp"
#include "qdtk/photon/synth.hpp"

namespace qdtk::photon::presets {

struct OffResonantColumn {
    std::string_view label;
    OffResonantG2 params;
    OffResonantG2 sigma;
    Measured g2_zero;
};

inline const std::array<OffResonantColumn, 2> kOffResonant{{
    {"0.5 Psat", {14.4, 54.0, 187.0, 678.0, 544.0, 13.15}, {2.0, 15.0, 10.0, 5.0, 76.0, 0.0}, {0.05, 0.02}},
    {"Psat", {10.2, 67.0, 288.0, 721.0, 196.0, 13.14}, {0.7, 19.0, 3.0, 10.0, 98.0, 0.0}, {0.17, 0.03}},
}};

struct QuasiResonantColumn {
    std::string_view label;
    double tau_dec_ps;
    double g2_fit;
    Measured g2_raw;  // sigma 0 where none is printed
};

inline constexpr double kQuasiPeriodNs = 12.49;
// total counts over +-80 ns at 50 ps bins; gives the printed raw-g2 error
inline constexpr double kQuasiTotalCounts = 1.07e5;

inline const std::array<QuasiResonantColumn, 3> kQuasiResonant{{
    {"0.02 Psat", 606.0, 5.6e-3, {4.2e-3, 0.2e-3}},
    {"0.04 Psat", 584.0, 4.7e-3, {3.2e-3, 0.6e-3}},
    {"Psat", 591.0, 9.81e-2, {8.75e-2, 0.0}},
}};

inline QuasiResonantG2 quasi_params(const QuasiResonantColumn& c, double g2_zero) {
    return {1.0, g2_zero, c.tau_dec_ps, kQuasiPeriodNs};
}

struct HomColumn {
    std::string_view label;
    HomParams co;             // cross data use the same heights with center[2] = cross_center
    double cross_center;
    Measured coherence_ps;
    Measured visibility;
    double mfr_co;
    double mfr_cross;
    double total_co;  // expected counts per histogram over +-140 ns
    double total_cross;
};

inline constexpr double kHomHalfSpanPs = 140000.0;

inline HomParams hom_params(std::array<double, 5> a, std::array<double, 5> b, double tau, double t2, double v) {
    HomParams p;
    p.center = a;
    p.outer = b;
    p.tau_ps = tau;
    p.coherence_ps = t2;
    p.v_ps = v;
    p.period_ns = 12.5;
    return p;
}

inline const std::array<HomColumn, 3> kHom{{
    {"0.02 Psat", hom_params({1.00, 2.08, 1.77, 2.14, 1.38}, {1.00, 4.23, 6.66, 4.55, 1.27}, 559.0, 176.0, 0.80),
     2.28, {176.0, 9.0}, {0.221, 0.089}, 0.0812, 0.0280, 1.6e4, 1.6e4},
    {"0.04 Psat", hom_params({1.00, 1.84, 1.68, 1.95, 1.03}, {1.00, 3.76, 5.69, 3.75, 1.03}, 553.0, 103.0, 0.99),
     2.08, {103.0, 13.0}, {0.193, 0.026}, 0.0286, 0.0280, 1.23e5, 1.23e5},
    {"Psat", hom_params({1.00, 1.96, 2.02, 1.92, 0.95}, {1.00, 3.78, 5.68, 3.75, 0.98}, 563.0, 74.0, 0.84),
     2.27, {74.0, 6.0}, {0.113, 0.023}, 0.0158, 0.0526, 5.12e5, 5.12e5},
}};

inline HomParams hom_cross_params(const HomColumn& c) {
    HomParams p = c.co;
    p.center[2] = c.cross_center;
    p.v_ps = 0.0;
    return p;
}

/// Co/cross pair for one column, seeds `seed` and `seed + 1`.
inline std::pair<CoincidenceHistogram, CoincidenceHistogram> hom_pair(const HomColumn& c, std::uint64_t seed,
                                                                      double count_scale = 1.0) {
    SynthOptions o;
    o.half_span_ps = kHomHalfSpanPs;
    o.total_counts = c.total_co * count_scale;
    o.seed = seed;
    auto co = synth_histogram(c.co, Polarization::co, o);
    o.total_counts = c.total_cross * count_scale;
    o.seed = seed + 1;
    auto cross = synth_histogram(hom_cross_params(c), Polarization::cross, o);
    return {std::move(co), std::move(cross)};
}

}  // namespace qdtk::photon::presets
