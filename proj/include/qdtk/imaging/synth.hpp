#pragma once

// Synthetic wide-field maps: a square field outlined by four scattering
// ridges, point emitters inside it, and a detector noise model.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "qdtk/errors.hpp"
#include "qdtk/imaging/image.hpp"
#include "qdtk/imaging/psf.hpp"

namespace qdtk::imaging {

struct Emitter {
    double x_um = 0.0;  // field frame, from the lower-left field corner
    double y_um = 0.0;
    double amplitude = 0.0;  // peak counts
};

struct GroundTruth {
    std::vector<Emitter> emitters;
    double field_um = 50.0;
    double origin_x_um = 0.0;  // lower-left field corner in the image frame (unrotated)
    double origin_y_um = 0.0;
    double rotation_deg = 0.0;  // about the field center
    double edge_amplitude = 0.0;

    void validate() const {
        if (!(field_um > 0.0)) throw InputError("field size must be positive");
        if (std::abs(rotation_deg) > 5.0) throw InputError("field rotation must stay within 5 degrees");
        for (const auto& e : emitters) {
            if (e.x_um < 0.0 || e.x_um > field_um || e.y_um < 0.0 || e.y_um > field_um) {
                throw InputError("emitter outside the field");
            }
            if (!(e.amplitude >= 0.0)) throw InputError("emitter amplitude must be non-negative");
        }
        if (!(edge_amplitude >= 0.0)) throw InputError("edge amplitude must be non-negative");
    }

    double center_x_um() const { return origin_x_um + 0.5 * field_um; }
    double center_y_um() const { return origin_y_um + 0.5 * field_um; }

    /// Field-frame point mapped into the image frame.
    std::pair<double, double> to_image(double u, double v) const {
        const double phi = rotation_deg * std::numbers::pi / 180.0;
        const double du = u - 0.5 * field_um;
        const double dv = v - 0.5 * field_um;
        return {center_x_um() + std::cos(phi) * du - std::sin(phi) * dv,
                center_y_um() + std::sin(phi) * du + std::cos(phi) * dv};
    }

    /// Image-frame point mapped into the field frame.
    std::pair<double, double> to_field(double x, double y) const {
        const double phi = rotation_deg * std::numbers::pi / 180.0;
        const double dx = x - center_x_um();
        const double dy = y - center_y_um();
        return {0.5 * field_um + std::cos(phi) * dx + std::sin(phi) * dy,
                0.5 * field_um - std::sin(phi) * dx + std::cos(phi) * dy};
    }
};

struct NoiseModel {
    double dark_rate = 100.0;  // counts / pixel / s
    double read_noise = 10.0;  // counts
    bool shot_noise = true;
    // Spatially correlated background fluctuation: pixel std (counts) and
    // kernel lengths along x and y (px).
    double texture_sigma = 7.0;
    double texture_length_x_px = 5.0;
    double texture_length_y_px = 5.0;
    std::uint64_t seed = 0;

    static NoiseModel none() { return {0.0, 0.0, false, 0.0, 0.0, 0.0, 0}; }

    bool enabled() const { return shot_noise || read_noise > 0.0 || texture_sigma > 0.0; }

    void validate() const {
        if (!(dark_rate >= 0.0) || !(read_noise >= 0.0)) throw InputError("noise rates must be non-negative");
        if (!(texture_sigma >= 0.0)) throw InputError("texture amplitude must be non-negative");
        if (texture_sigma > 0.0 && !(texture_length_x_px > 0.0 && texture_length_y_px > 0.0)) {
            throw InputError("texture noise needs positive correlation lengths");
        }
    }
};

struct Geometry {
    int width = 560;
    int height = 560;
    double pixel_pitch_um = 0.1;
    double integration_time_s = 1.0;
};

struct SyntheticField {
    PixelImage image;
    bool overlapping = false;  // some emitters closer than 2 FWHM
};

/// Ground truth with the field centered in `geometry`.
inline GroundTruth centered_truth(const Geometry& geometry, double field_um = 50.0) {
    GroundTruth t;
    t.field_um = field_um;
    t.origin_x_um = 0.5 * ((geometry.width - 1) * geometry.pixel_pitch_um - field_um);
    t.origin_y_um = 0.5 * ((geometry.height - 1) * geometry.pixel_pitch_um - field_um);
    return t;
}

namespace detail {

inline std::vector<double> gaussian_kernel(double length_px, double& norm2) {
    const int half = static_cast<int>(std::ceil(4.0 * length_px));
    std::vector<double> k(static_cast<std::size_t>(2 * half + 1));
    norm2 = 0.0;
    for (int i = -half; i <= half; ++i) {
        k[static_cast<std::size_t>(i + half)] = std::exp(-0.5 * i * i / (length_px * length_px));
        norm2 += k[static_cast<std::size_t>(i + half)] * k[static_cast<std::size_t>(i + half)];
    }
    return k;
}

// White Gaussian field smoothed by a separable Gaussian kernel (lengths along
// x and y) and rescaled to unit pixel standard deviation.
inline PixelImage::Data correlated_field(int width, int height, double length_x, double length_y,
                                         std::mt19937_64& rng) {
    std::normal_distribution<double> n01(0.0, 1.0);
    double nx = 0.0;
    double ny = 0.0;
    const auto kx = gaussian_kernel(length_x, nx);
    const auto ky = gaussian_kernel(length_y, ny);
    const int hx = static_cast<int>(kx.size() / 2);
    const int hy = static_cast<int>(ky.size() / 2);
    const int pw = width + 2 * hx;
    const int ph = height + 2 * hy;
    PixelImage::Data white(ph, pw);
    for (int r = 0; r < ph; ++r) {
        for (int c = 0; c < pw; ++c) white(r, c) = n01(rng);
    }
    PixelImage::Data rows(ph, width);
    for (int r = 0; r < ph; ++r) {
        for (int c = 0; c < width; ++c) {
            double s = 0.0;
            for (std::size_t k = 0; k < kx.size(); ++k) s += kx[k] * white(r, c + static_cast<int>(k));
            rows(r, c) = s;
        }
    }
    const double norm = std::sqrt(nx * ny);
    PixelImage::Data out(height, width);
    for (int r = 0; r < height; ++r) {
        for (int c = 0; c < width; ++c) {
            double s = 0.0;
            for (std::size_t k = 0; k < ky.size(); ++k) s += ky[k] * rows(r + static_cast<int>(k), c);
            out(r, c) = s / norm;
        }
    }
    return out;
}

inline double segment_taper(double along, double length, double sigma) {
    const double s = std::sqrt(2.0) * sigma;
    return 0.5 * (std::erf(along / s) - std::erf((along - length) / s));
}

}  // namespace detail

/// Renders the noiseless scene (background excluded).
inline PixelImage render_signal(const GroundTruth& truth, const PsfModel& psf, const Geometry& geometry) {
    PixelImage img(geometry.width, geometry.height, geometry.pixel_pitch_um, geometry.integration_time_s);
    const double pitch = geometry.pixel_pitch_um;
    auto& data = img.data();

    const double support = psf_support(psf);
    for (const auto& e : truth.emitters) {
        if (e.amplitude == 0.0) continue;
        const auto [ex, ey] = truth.to_image(e.x_um, e.y_um);
        const double cx = ex / pitch;
        const double cy = ey / pitch;
        const double reach = support / pitch;
        const int c0 = std::max(0, static_cast<int>(std::floor(cx - reach)));
        const int c1 = std::min(geometry.width - 1, static_cast<int>(std::ceil(cx + reach)));
        const int r0 = std::max(0, static_cast<int>(std::floor(cy - reach)));
        const int r1 = std::min(geometry.height - 1, static_cast<int>(std::ceil(cy + reach)));
        for (int r = r0; r <= r1; ++r) {
            for (int c = c0; c <= c1; ++c) {
                const double dr = std::hypot(c - cx, r - cy) * pitch;
                if (dr <= support) data(r, c) += e.amplitude * psf_value(psf, dr);
            }
        }
    }

    if (truth.edge_amplitude > 0.0) {
        const double s = spot_sigma(psf);
        const double f = truth.field_um;
        const double reach = 6.0 * s;
        for (int r = 0; r < geometry.height; ++r) {
            for (int c = 0; c < geometry.width; ++c) {
                const auto [u, v] = truth.to_field(c * pitch, r * pitch);
                double sum = 0.0;
                // left/right edges run along v, lower/upper along u
                for (double d : {u, u - f}) {
                    if (std::abs(d) < reach) sum += std::exp(-0.5 * d * d / (s * s)) * detail::segment_taper(v, f, s);
                }
                for (double d : {v, v - f}) {
                    if (std::abs(d) < reach) sum += std::exp(-0.5 * d * d / (s * s)) * detail::segment_taper(u, f, s);
                }
                data(r, c) += truth.edge_amplitude * sum;
            }
        }
    }
    return img;
}

/// Full synthetic map: signal, dark background, correlated texture, shot
/// and read noise. Deterministic for a fixed seed.
inline SyntheticField synthesize_field(const GroundTruth& truth, const PsfModel& psf, const NoiseModel& noise,
                                       const Geometry& geometry) {
    truth.validate();
    psf.validate();
    noise.validate();
    const double pitch = geometry.pixel_pitch_um;
    if (!(pitch > 0.0)) throw InputError("pixel pitch must be positive");

    const double margin_um = 20.0 * pitch;
    for (double u : {0.0, truth.field_um}) {
        for (double v : {0.0, truth.field_um}) {
            const auto [x, y] = truth.to_image(u, v);
            if (x < margin_um || y < margin_um || x > (geometry.width - 1) * pitch - margin_um ||
                y > (geometry.height - 1) * pitch - margin_um) {
                throw InputError("geometry too small for the field outline plus a 20 px margin");
            }
        }
    }

    SyntheticField out{render_signal(truth, psf, geometry), false};

    const double fwhm = fwhm_from_sigma(spot_sigma(psf));
    for (std::size_t i = 0; i < truth.emitters.size(); ++i) {
        for (std::size_t j = i + 1; j < truth.emitters.size(); ++j) {
            const double d = std::hypot(truth.emitters[i].x_um - truth.emitters[j].x_um,
                                        truth.emitters[i].y_um - truth.emitters[j].y_um);
            if (d < 2.0 * fwhm) out.overlapping = true;
        }
    }

    auto& data = out.image.data();
    const double background = noise.dark_rate * geometry.integration_time_s;
    data.array() += background;

    std::mt19937_64 rng(noise.seed);
    if (noise.texture_sigma > 0.0) {
        auto tex = detail::correlated_field(geometry.width, geometry.height, noise.texture_length_x_px,
                                            noise.texture_length_y_px, rng);
        data += noise.texture_sigma * tex;
        data = data.cwiseMax(0.0);
    }
    if (noise.shot_noise) {
        for (int r = 0; r < geometry.height; ++r) {
            for (int c = 0; c < geometry.width; ++c) {
                const double mean = data(r, c);
                if (mean > 0.0) {
                    std::poisson_distribution<long long> pd(mean);
                    data(r, c) = static_cast<double>(pd(rng));
                }
            }
        }
    }
    if (noise.read_noise > 0.0) {
        std::normal_distribution<double> read(0.0, noise.read_noise);
        for (int r = 0; r < geometry.height; ++r) {
            for (int c = 0; c < geometry.width; ++c) data(r, c) += read(rng);
        }
        data = data.cwiseMax(0.0);
    }
    return out;
}

}  // namespace qdtk::imaging
