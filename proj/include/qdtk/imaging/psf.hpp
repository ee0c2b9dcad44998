#pragma once

#include <cmath>
#include <numbers>

#include "qdtk/errors.hpp"

namespace qdtk::imaging {

enum class PsfKind { gaussian, airy };

/// Ratio between FWHM and standard deviation of a Gaussian.
inline constexpr double kFwhmPerSigma = 2.3548200450309493;  // 2 sqrt(2 ln 2)

struct PsfModel {
    PsfKind kind = PsfKind::gaussian;
    double wavelength_um = 1.55;
    double na = 0.65;
    double broadening = 1.36;

    void validate() const {
        if (!(na > 0.0 && na < 1.0)) throw InputError("numerical aperture must lie in (0, 1)");
        if (!(wavelength_um > 0.0)) throw InputError("wavelength must be positive");
        if (!(broadening >= 1.0)) throw InputError("PSF broadening factor must be >= 1");
    }
};

/// Gaussian sigma that best matches the diffraction-limited spot.
inline double diffraction_sigma(const PsfModel& psf) {
    psf.validate();
    return 0.21 * psf.wavelength_um / psf.na;
}

inline double fwhm_from_sigma(double sigma) {
    if (!(sigma > 0.0)) throw InputError("sigma must be positive");
    return kFwhmPerSigma * sigma;
}

inline double sigma_from_fwhm(double fwhm) {
    if (!(fwhm > 0.0)) throw InputError("FWHM must be positive");
    return fwhm / kFwhmPerSigma;
}

/// Sigma of the rendered spot (diffraction sigma times broadening).
inline double spot_sigma(const PsfModel& psf) { return diffraction_sigma(psf) * psf.broadening; }

/// Peak-normalized PSF at radius r (um).
inline double psf_value(const PsfModel& psf, double r_um) {
    if (psf.kind == PsfKind::gaussian) {
        const double s = spot_sigma(psf);
        return std::exp(-0.5 * r_um * r_um / (s * s));
    }
    const double v = 2.0 * std::numbers::pi * psf.na * r_um / (psf.wavelength_um * psf.broadening);
    if (std::abs(v) < 1e-8) return 1.0;
    const double a = 2.0 * std::cyl_bessel_j(1.0, std::abs(v)) / std::abs(v);
    return a * a;
}

/// Radius beyond which the PSF is not rendered.
inline double psf_support(const PsfModel& psf) {
    const double s = spot_sigma(psf);
    return psf.kind == PsfKind::gaussian ? 6.0 * s : 12.0 * s;
}

}  // namespace qdtk::imaging
