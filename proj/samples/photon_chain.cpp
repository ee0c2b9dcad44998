// Purity, indistinguishability, efficiency and Purcell factor for one
// synthetic device.

#include <cstdio>

#include "qdtk/metrics/efficiency.hpp"
#include "qdtk/photon/g2.hpp"
#include "qdtk/photon/hom.hpp"
#include "qdtk/photon/presets.hpp"
#include "qdtk/photon/raw.hpp"
#include "qdtk/photon/synth.hpp"

int main() {
    using namespace qdtk;
    namespace pre = photon::presets;

    photon::SynthOptions o;
    o.total_counts = pre::kQuasiTotalCounts;
    o.seed = 7;
    const auto g2h = photon::synth_histogram(pre::quasi_params(pre::kQuasiResonant[1], 3.2e-3), o);
    const auto g2 = photon::fit_g2_quasi_resonant(g2h);
    const auto raw = photon::g2_zero_raw(g2h);
    std::printf("g2(0) fit  %.2e +- %.1e (%s)\n", g2.g2_zero.value, g2.g2_zero.sigma,
                g2.converged ? "converged" : "not converged");
    std::printf("g2(0) raw  %.2e +- %.1e over %d side peaks\n", raw.value, raw.sigma, raw.side_peaks);

    const auto [co, cross] = pre::hom_pair(pre::kHom[1], 11);
    const auto hom = photon::fit_hom_pair(co, cross);
    std::printf("V          %.1f +- %.1f %%\n", 100.0 * hom.visibility.value, 100.0 * hom.visibility.sigma);
    std::printf("V_PS       %.2f +- %.2f\n", hom.post_selected.value, hom.post_selected.sigma);
    std::printf("T2         %.0f +- %.0f ps\n", hom.co.params.coherence_ps, hom.co.sigma.coherence_ps);

    const auto setup = metrics::chain_efficiency(metrics::reference_setup());
    const auto eta = metrics::extraction_efficiency(1.461e5, 80e6, setup, raw.value);
    std::printf("setup      %.2f +- %.2f %%\n", 100.0 * setup.value, 100.0 * setup.sigma);
    std::printf("eta        %.1f +- %.1f %% (lower limit, unity internal QE)\n", 100.0 * eta.eta.value,
                100.0 * eta.eta.sigma);

    const auto fp = metrics::purcell_from_lifetimes({0.40, 0.01}, {1.99, 0.16});
    std::printf("F_P        %.2f +- %.2f\n", fp.value, fp.sigma);
}
