#pragma once

// Seeded Monte Carlo runs that compare fits of synthetic data with the
// reference values used to generate them.

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "qdtk/imaging/campaign.hpp"
#include "qdtk/localization/pipeline.hpp"
#include "qdtk/numerics/stats.hpp"
#include "qdtk/parallel.hpp"
#include "qdtk/photon/hom.hpp"
#include "qdtk/photon/presets.hpp"
#include "qdtk/photon/raw.hpp"

namespace qdtk::report {

struct Coverage {
    int hits = 0;
    int trials = 0;
    double fraction() const { return trials > 0 ? static_cast<double>(hits) / trials : 0.0; }
};

inline bool within_sigmas(double value, double sigma, double target, double k = 2.0) {
    return std::abs(value - target) <= k * sigma;
}

struct HomRecovery {
    Coverage visibility;
    Coverage coherence;
    double median_visibility = 0.0;
    double median_coherence_ps = 0.0;
    int failed_fits = 0;  // counted as misses
};

/// Fits `seeds` synthetic co/cross pairs of one preset column and counts
/// how often V and T2 land within two reported sigmas of the preset values.
inline HomRecovery hom_recovery(const photon::presets::HomColumn& col, int seeds, std::uint64_t seed0,
                                unsigned jobs = 1) {
    struct Slot {
        bool ok = false;
        double v = 0.0, sv = 0.0, t2 = 0.0, st2 = 0.0;
    };
    std::vector<Slot> slots(static_cast<std::size_t>(seeds));
    parallel_for(slots.size(), jobs, [&](std::size_t i) {
        const auto [co, cross] = photon::presets::hom_pair(col, seed0 + 2 * i);
        try {
            const auto f = photon::fit_hom_pair(co, cross);
            slots[i] = {true, f.visibility.value, f.visibility.sigma, f.co.params.coherence_ps, f.co.sigma.coherence_ps};
        } catch (const FitError&) {
            slots[i].ok = false;
        }
    });
    HomRecovery r;
    std::vector<double> v;
    std::vector<double> t2;
    for (const auto& s : slots) {
        ++r.visibility.trials;
        ++r.coherence.trials;
        if (!s.ok) {
            ++r.failed_fits;
            continue;
        }
        r.visibility.hits += within_sigmas(s.v, s.sv, col.visibility.value);
        r.coherence.hits += within_sigmas(s.t2, s.st2, col.coherence_ps.value);
        v.push_back(s.v);
        t2.push_back(s.t2);
    }
    if (!v.empty()) {
        r.median_visibility = numerics::median(v);
        r.median_coherence_ps = numerics::median(t2);
    }
    return r;
}

struct RawG2Recovery {
    Coverage coverage;
    double median_value = 0.0;
    double median_sigma = 0.0;
};

/// Raw g2(0) of quasi-resonant histograms generated at `g2_zero` with the
/// preset total counts.
inline RawG2Recovery raw_g2_recovery(double g2_zero, int seeds, std::uint64_t seed0, unsigned jobs = 1) {
    const auto& col = photon::presets::kQuasiResonant[1];
    std::vector<photon::RawG2> out(static_cast<std::size_t>(seeds));
    parallel_for(out.size(), jobs, [&](std::size_t i) {
        photon::SynthOptions o;
        o.total_counts = photon::presets::kQuasiTotalCounts;
        o.seed = seed0 + i;
        out[i] = photon::g2_zero_raw(photon::synth_histogram(photon::presets::quasi_params(col, g2_zero), o));
    });
    RawG2Recovery r;
    std::vector<double> v;
    std::vector<double> s;
    for (const auto& x : out) {
        ++r.coverage.trials;
        r.coverage.hits += within_sigmas(x.value, x.sigma, g2_zero);
        v.push_back(x.value);
        s.push_back(x.sigma);
    }
    r.median_value = numerics::median(v);
    r.median_sigma = numerics::median(s);
    return r;
}

struct CampaignSummary {
    int fields = 0;
    int emitters = 0;
    int records = 0;
    int matched = 0;
    double mean_snr = 0.0;
    double median_fwhm_um = 0.0;     // both axes pooled
    double decile_snr = 0.0;         // 90th percentile of the mean SNR
    double decile_median_dq_nm = 0.0;
    int decile_size = 0;
    Coverage coverage_2d;  // |Q - truth| <= 2 dQ in the plane
};

/// Synthetic multi-field campaign with the default preset (log-normal SNR
/// around the reference value), localized and matched to ground truth.
inline CampaignSummary localization_campaign(int fields, std::uint64_t seed0, unsigned jobs = 1,
                                             const imaging::CampaignPreset& preset = {}) {
    struct Hit {
        double fwhm_h, fwhm_v, dq_nm, snr;
        bool covered;
    };
    struct Slot {
        int emitters = 0;
        int records = 0;
        std::vector<Hit> hits;
    };
    std::vector<Slot> slots(static_cast<std::size_t>(fields));
    parallel_for(slots.size(), jobs, [&](std::size_t k) {
        const std::uint64_t seed = seed0 + k;
        const auto truth = imaging::random_truth(preset, seed);
        imaging::NoiseModel n = preset.noise;
        n.seed = seed;
        const auto field = imaging::synthesize_field(truth, preset.psf, n, preset.geometry);
        const auto res = localization::localize_field(field.image, preset.field_um, 0.04);
        auto& s = slots[k];
        s.emitters = static_cast<int>(truth.emitters.size());
        s.records = static_cast<int>(res.records.size());
        const double pitch = preset.geometry.pixel_pitch_um;
        for (const auto& r : res.records) {
            double best = 1e9;
            const imaging::Emitter* hit = nullptr;
            for (const auto& e : truth.emitters) {
                const auto [x, y] = truth.to_image(e.x_um, e.y_um);
                const double d = std::hypot(x / pitch - r.spot.col, y / pitch - r.spot.row);
                if (d < best) {
                    best = d;
                    hit = &e;
                }
            }
            if (!hit || best >= 10.0) continue;
            const double err = std::hypot(r.x.q_um - hit->x_um, r.y.q_um - hit->y_um);
            s.hits.push_back({r.fwhm_h_um(), r.fwhm_v_um(), 1e3 * r.dq_um, r.mean_snr(), err <= 2.0 * r.dq_um});
        }
    });

    CampaignSummary out;
    out.fields = fields;
    std::vector<double> fwhm;
    std::vector<double> snr;
    std::vector<Hit> all;
    for (const auto& s : slots) {
        out.emitters += s.emitters;
        out.records += s.records;
        for (const auto& h : s.hits) {
            all.push_back(h);
            fwhm.push_back(h.fwhm_h);
            fwhm.push_back(h.fwhm_v);
            snr.push_back(h.snr);
            ++out.coverage_2d.trials;
            out.coverage_2d.hits += h.covered;
        }
    }
    out.matched = static_cast<int>(all.size());
    if (all.empty()) return out;
    out.mean_snr = numerics::mean(snr);
    out.median_fwhm_um = numerics::median(fwhm);
    out.decile_snr = numerics::percentile(snr, 90.0);
    std::vector<double> dq;
    for (const auto& h : all) {
        if (h.snr >= out.decile_snr) dq.push_back(h.dq_nm);
    }
    out.decile_size = static_cast<int>(dq.size());
    if (!dq.empty()) out.decile_median_dq_nm = numerics::median(dq);
    return out;
}

}  // namespace qdtk::report
