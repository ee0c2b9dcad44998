#pragma once

// Poisson-sampled coincidence histograms around the analytic models.

#include <cstdint>
#include <random>

#include "qdtk/errors.hpp"
#include "qdtk/photon/g2.hpp"
#include "qdtk/photon/histogram.hpp"
#include "qdtk/photon/hom.hpp"

namespace qdtk::photon {

struct SynthOptions {
    double total_counts = 1e5;  // expected sum over all bins
    double bin_ps = 50.0;
    double half_span_ps = 80000.0;
    std::uint64_t seed = 1;
};

/// Expected counts of `model` on the grid of `h`, scaled to `total`.
template <class Model>
void fill_expected(CoincidenceHistogram& h, Model&& model, double total) {
    double s = 0.0;
    for (std::size_t i = 0; i < h.size(); ++i) {
        h.counts[i] = std::max(model(h.tau_ps[i]), 0.0);
        s += h.counts[i];
    }
    if (!(s > 0.0)) throw InputError("model is zero on the whole grid");
    for (double& c : h.counts) c *= total / s;
}

template <class Model>
CoincidenceHistogram sample_histogram(Model&& model, double period_ns, const SynthOptions& o) {
    if (!(o.total_counts > 0.0)) throw InputError("total counts must be positive");
    auto h = CoincidenceHistogram::grid(o.bin_ps, o.half_span_ps, period_ns);
    fill_expected(h, model, o.total_counts);
    std::mt19937_64 rng(o.seed);
    for (double& c : h.counts) {
        if (c <= 0.0) continue;
        std::poisson_distribution<long long> draw(c);
        c = static_cast<double>(draw(rng));
    }
    return h;
}

inline CoincidenceHistogram synth_histogram(const OffResonantG2& p, const SynthOptions& o) {
    p.validate();
    auto h = sample_histogram([&p](double t) { return g2_model(t, p); }, p.period_ns, o);
    h.excitation = Excitation::off_resonant;
    return h;
}

inline CoincidenceHistogram synth_histogram(const QuasiResonantG2& p, const SynthOptions& o) {
    p.validate();
    auto h = sample_histogram([&p](double t) { return g2_model(t, p); }, p.period_ns, o);
    h.excitation = Excitation::quasi_resonant;
    return h;
}

inline CoincidenceHistogram synth_histogram(const HomParams& p, Polarization pol, const SynthOptions& o) {
    p.validate();
    if (pol == Polarization::none) throw InputError("HOM histograms need co or cross polarization");
    auto h = sample_histogram([&](double t) { return hom_model(t, p, pol); }, p.period_ns, o);
    h.excitation = Excitation::quasi_resonant;
    h.polarization = pol;
    return h;
}

}  // namespace qdtk::photon
