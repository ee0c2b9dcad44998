#pragma once

// Setup calibration, extraction efficiency, Purcell factor, placement yield.

#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "qdtk/errors.hpp"
#include "qdtk/photon/histogram.hpp"

namespace qdtk::metrics {

using photon::Measured;

struct ChainElement {
    std::string name;
    double transmission = 1.0;
    double sigma = 0.0;
};

using TransmissionChain = std::vector<ChainElement>;

inline void validate(const TransmissionChain& chain) {
    if (chain.empty()) throw InputError("transmission chain is empty");
    for (const auto& e : chain) {
        if (!(e.transmission > 0.0 && e.transmission <= 1.0)) {
            throw InputError("transmission of '" + e.name + "' must lie in (0, 1]");
        }
        if (!(e.sigma >= 0.0)) throw InputError("transmission error of '" + e.name + "' must be non-negative");
    }
}

/// Product of the transmissions; relative errors add in quadrature.
inline Measured chain_efficiency(const TransmissionChain& chain) {
    validate(chain);
    double eta = 1.0;
    double rel2 = 0.0;
    for (const auto& e : chain) {
        eta *= e.transmission;
        rel2 += (e.sigma / e.transmission) * (e.sigma / e.transmission);
    }
    return {eta, eta * std::sqrt(rel2)};
}

/// The calibrated detection path of the reference setup.
inline TransmissionChain reference_setup() {
    return {{"cryostat window", 0.90, 0.02},
            {"microscope objective", 0.55, 0.03},
            {"beam splitter", 0.38, 0.02},
            {"mirrors", 0.85, 0.05},
            {"focusing lens and long-pass filter", 0.93, 0.02},
            {"monochromator", 0.27, 0.05},
            {"signal coupling mirrors", 0.96, 0.02},
            {"fiber in-coupling", 0.41, 0.10},
            {"fibers and connections", 0.80, 0.10},
            {"SNSPD", 0.87, 0.03}};
}

struct EfficiencyResult {
    Measured eta;
    Measured count_rate;  // detected counts per second
    double rep_rate_hz = 0.0;
    Measured setup;
    double g2_correction = 1.0;  // sqrt(1 - g2(0)), 1 without a g2 value
    bool unity_internal_qe = true;
};

inline constexpr double kDefaultCountRateSigma = 1000.0;

/// Photons per pulse leaving the device, assuming one photon emitted per
/// pulse. With `g2_zero` the multi-photon part is removed.
inline EfficiencyResult extraction_efficiency(double count_rate, double rep_rate_hz, Measured setup,
                                              std::optional<double> g2_zero = std::nullopt,
                                              double count_rate_sigma = kDefaultCountRateSigma) {
    if (!(rep_rate_hz > 0.0)) throw InputError("repetition rate must be positive");
    if (!(setup.value > 0.0)) throw InputError("setup efficiency must be positive");
    if (!(count_rate >= 0.0)) throw InputError("count rate must be non-negative");
    if (!(setup.sigma >= 0.0) || !(count_rate_sigma >= 0.0)) throw InputError("uncertainties must be non-negative");
    EfficiencyResult r;
    if (g2_zero) {
        if (!(*g2_zero >= 0.0 && *g2_zero < 1.0)) throw InputError("g2(0) must lie in [0, 1)");
        r.g2_correction = std::sqrt(1.0 - *g2_zero);
    }
    r.count_rate = {count_rate, count_rate_sigma};
    r.rep_rate_hz = rep_rate_hz;
    r.setup = setup;
    const double k = r.g2_correction / rep_rate_hz;
    r.eta.value = k * count_rate / setup.value;
    r.eta.sigma = k * std::hypot(count_rate_sigma / setup.value, count_rate * setup.sigma / (setup.value * setup.value));
    return r;
}

/// tau_ref / tau_cav with relative errors in quadrature.
inline Measured purcell_from_lifetimes(Measured tau_cav, Measured tau_ref) {
    if (!(tau_cav.value > 0.0 && tau_ref.value > 0.0)) throw InputError("lifetimes must be positive");
    if (!(tau_cav.sigma >= 0.0 && tau_ref.sigma >= 0.0)) throw InputError("uncertainties must be non-negative");
    const double f = tau_ref.value / tau_cav.value;
    return {f, f * std::hypot(tau_ref.sigma / tau_ref.value, tau_cav.sigma / tau_cav.value)};
}

struct YieldResult {
    double value = 0.0;
    std::vector<std::string> warnings;
};

/// Chance that a mesa of diameter `mesa_um` placed at random covers one of
/// `emitters` emitters in a field of side `field_um`.
inline YieldResult random_yield(double emitters, double mesa_um, double field_um) {
    if (!(emitters >= 0.0)) throw InputError("emitter count must be non-negative");
    if (!(mesa_um > 0.0 && field_um > 0.0)) throw InputError("mesa diameter and field size must be positive");
    if (mesa_um > field_um) throw InputError("mesa diameter exceeds the field size");
    YieldResult r;
    const double a = mesa_um / field_um;
    r.value = emitters * a * a;
    if (r.value > 1.0) r.warnings.push_back("estimate exceeds 1; the small-coverage approximation does not hold");
    return r;
}

}  // namespace qdtk::metrics
