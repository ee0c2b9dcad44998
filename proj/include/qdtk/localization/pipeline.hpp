#pragma once

// Whole-map localization: find the field outline and the emitter spots, cut
// two sections per spot, derive the map scale and every position budget.

#include <algorithm>
#include <array>
#include <cmath>
#include <optional>
#include <span>
#include <string>
#include <tuple>
#include <vector>

#include "qdtk/errors.hpp"
#include "qdtk/imaging/image.hpp"
#include "qdtk/localization/cross_section.hpp"
#include "qdtk/localization/scale.hpp"
#include "qdtk/localization/section_fit.hpp"
#include "qdtk/numerics/stats.hpp"

namespace qdtk::localization {

class OutlineNotFound : public Error {
public:
    using Error::Error;
};

struct LocalizeConfig {
    std::string field_id = "field";
    int section_width = 10;
    double expected_fwhm_um = 1.6;
    double saturation_level = 65535.0;
    double detection_sigmas = 5.0;
    double edge_clearance_fwhm = 2.5;  // minimum spot distance from the outline
    double isolation_fwhm = 2.0;       // minimum spot separation
    double overetch_um = 0.04;
    bool correlated_errors = true;
};

struct Spot {
    double col = 0.0;
    double row = 0.0;
    double height = 0.0;  // smoothed peak above background
};

struct Outline {
    double left = 0.0;  // column of the left edge ridge
    double right = 0.0;
    double bottom = 0.0;  // row of the lower edge ridge
    double top = 0.0;
};

struct LocalizationRecord {
    std::string field_id;
    Spot spot;
    SectionFit horizontal;
    SectionFit vertical;
    Position1D x;  // along the horizontal section, from the left edge
    Position1D y;  // along the vertical section, from the lower edge
    double dq_um = 0.0;
    double dr_um = 0.0;
    double dc_um = 0.0;
    double p = 0.0;
    double dp = 0.0;

    double snr_h() const { return horizontal.snr; }
    double snr_v() const { return vertical.snr; }
    double mean_snr() const { return 0.5 * (horizontal.snr + vertical.snr); }
    double fwhm_h_um() const { return horizontal.spot.fwhm() / p; }
    double fwhm_v_um() const { return vertical.spot.fwhm() / p; }
};

struct FieldResult {
    std::string field_id;
    Outline outline;
    ScaleFactor scale;
    std::vector<LocalizationRecord> records;
    std::vector<std::string> notes;  // rejected spots and other diagnostics
};

namespace detail {

inline imaging::PixelImage::Data smooth3(const imaging::PixelImage::Data& d) {
    const auto h = d.rows();
    const auto w = d.cols();
    imaging::PixelImage::Data out(h, w);
    for (Eigen::Index r = 0; r < h; ++r) {
        for (Eigen::Index c = 0; c < w; ++c) {
            double s = 0.0;
            int n = 0;
            for (Eigen::Index dr = -1; dr <= 1; ++dr) {
                for (Eigen::Index dc = -1; dc <= 1; ++dc) {
                    const auto rr = r + dr;
                    const auto cc = c + dc;
                    if (rr >= 0 && rr < h && cc >= 0 && cc < w) {
                        s += d(rr, cc);
                        ++n;
                    }
                }
            }
            out(r, c) = s / n;
        }
    }
    return out;
}

// Outermost strong peaks of a mean profile.
inline std::pair<double, double> outline_pair(const std::vector<double>& profile, double fwhm_px, const char* what) {
    const auto smooth = boxcar(profile, 5);
    const double bg = numerics::median(smooth);
    double noise = numerics::mad_sigma(smooth);
    double scale = 0.0;
    for (double v : profile) scale = std::max(scale, std::abs(v));
    noise = std::max(noise, 1e-9 * std::max(scale, 1.0));
    const auto peaks = find_peaks(smooth, bg + 5.0 * noise, fwhm_px);
    if (peaks.size() < 2) throw OutlineNotFound(std::string("field outline not found along ") + what);
    return {peaks.front(), peaks.back()};
}

}  // namespace detail

inline Outline find_outline(const imaging::PixelImage& img, double fwhm_px) {
    std::vector<double> cols(static_cast<std::size_t>(img.width()));
    std::vector<double> rows(static_cast<std::size_t>(img.height()));
    for (int c = 0; c < img.width(); ++c) cols[static_cast<std::size_t>(c)] = img.data().col(c).mean();
    for (int r = 0; r < img.height(); ++r) rows[static_cast<std::size_t>(r)] = img.data().row(r).mean();
    Outline o;
    std::tie(o.left, o.right) = detail::outline_pair(cols, fwhm_px, "x");
    std::tie(o.bottom, o.top) = detail::outline_pair(rows, fwhm_px, "y");
    if (o.right - o.left < 4.0 * fwhm_px || o.top - o.bottom < 4.0 * fwhm_px) {
        throw OutlineNotFound("field outline too small");
    }
    return o;
}

/// Spot candidates: local maxima of the 3x3-smoothed map above
/// background + k*noise, strongest first, ties in raster order.
/// Background and noise come from `stats_box` (col0, row0, col1, row1) when
/// given, otherwise from the whole map.
inline std::vector<Spot> detect_spots(const imaging::PixelImage& img, double detection_sigmas, double min_sep_px,
                                      std::optional<std::array<int, 4>> stats_box = std::nullopt) {
    const auto s = detail::smooth3(img.data());
    std::vector<double> flat;
    if (stats_box) {
        const auto [c0, r0, c1, r1] = *stats_box;
        for (int r = std::max(0, r0); r <= std::min<int>(r1, static_cast<int>(s.rows()) - 1); ++r) {
            for (int c = std::max(0, c0); c <= std::min<int>(c1, static_cast<int>(s.cols()) - 1); ++c) {
                flat.push_back(s(r, c));
            }
        }
    }
    if (flat.size() < 100) flat.assign(s.data(), s.data() + s.size());
    const double bg = numerics::median(flat);
    double noise = numerics::mad_sigma(flat);
    noise = std::max(noise, 1e-9 * std::max(s.cwiseAbs().maxCoeff(), 1.0));
    const double thr = bg + detection_sigmas * noise;
    std::vector<Spot> raw;
    for (Eigen::Index r = 1; r + 1 < s.rows(); ++r) {
        for (Eigen::Index c = 1; c + 1 < s.cols(); ++c) {
            const double v = s(r, c);
            if (v <= thr) continue;
            bool is_max = true;
            for (int dr = -1; dr <= 1 && is_max; ++dr) {
                for (int dc = -1; dc <= 1; ++dc) {
                    if (dr == 0 && dc == 0) continue;
                    const double u = s(r + dr, c + dc);
                    // strict against earlier raster neighbours, non-strict against later ones
                    if (u > v || (u == v && (dr < 0 || (dr == 0 && dc < 0)))) {
                        is_max = false;
                        break;
                    }
                }
            }
            if (is_max) raw.push_back({static_cast<double>(c), static_cast<double>(r), v - bg});
        }
    }
    std::stable_sort(raw.begin(), raw.end(), [](const Spot& a, const Spot& b) { return a.height > b.height; });
    std::vector<Spot> kept;
    for (const auto& sp : raw) {
        bool clear = true;
        for (const auto& k : kept) clear = clear && std::hypot(sp.col - k.col, sp.row - k.row) >= min_sep_px;
        if (clear) kept.push_back(sp);
    }
    return kept;
}

/// Localizes every usable spot of one map. Records are ordered by
/// descending mean SNR of the two sections.
inline FieldResult localize_field(const imaging::PixelImage& img, double field_um, double dc_um,
                                  const LocalizeConfig& cfg = {}) {
    if (!(field_um > 0.0)) throw InputError("field size must be positive");
    if (!(dc_um >= 0.0)) throw InputError("alignment uncertainty must be non-negative");
    const double fwhm_px = cfg.expected_fwhm_um / img.pixel_pitch();

    FieldResult out;
    out.field_id = cfg.field_id;
    out.outline = find_outline(img, fwhm_px);
    const auto& ol = out.outline;

    // ridges themselves are local maxima; keep only candidates well inside
    const double clear = cfg.edge_clearance_fwhm * fwhm_px;
    std::vector<Spot> inside;
    const std::array<int, 4> box{static_cast<int>(std::ceil(ol.left + clear)), static_cast<int>(std::ceil(ol.bottom + clear)),
                                 static_cast<int>(std::floor(ol.right - clear)), static_cast<int>(std::floor(ol.top - clear))};
    for (const auto& sp : detect_spots(img, cfg.detection_sigmas, fwhm_px, box)) {
        if (sp.col - ol.left < clear || ol.right - sp.col < clear || sp.row - ol.bottom < clear ||
            ol.top - sp.row < clear) {
            continue;
        }
        inside.push_back(sp);
    }

    struct Pending {
        Spot spot;
        SectionFit h;
        SectionFit v;
    };
    std::vector<Pending> pending;
    for (std::size_t i = 0; i < inside.size(); ++i) {
        const auto& sp = inside[i];
        bool isolated = true;
        for (std::size_t j = 0; j < inside.size(); ++j) {
            if (i != j && std::hypot(sp.col - inside[j].col, sp.row - inside[j].row) < cfg.isolation_fwhm * fwhm_px) {
                isolated = false;
            }
        }
        const std::string where = "spot at (" + std::to_string(static_cast<int>(sp.col)) + ", " +
                                  std::to_string(static_cast<int>(sp.row)) + ")";
        if (!isolated) {
            out.notes.push_back(where + " rejected: neighbour closer than isolation distance");
            continue;
        }
        try {
            SectionOptions so;
            so.expected_fwhm_px = fwhm_px;
            so.saturation_level = cfg.saturation_level;
            so.detection_sigmas = cfg.detection_sigmas;
            so.correlated_errors = cfg.correlated_errors;
            so.spot_hint = sp.col;
            auto h = fit_section(extract_cross_section(img, sp.col, sp.row, Axis::horizontal, cfg.section_width), so);
            so.spot_hint = sp.row;
            auto v = fit_section(extract_cross_section(img, sp.col, sp.row, Axis::vertical, cfg.section_width), so);
            if (!h.converged() || !v.converged()) {
                out.notes.push_back(where + " rejected: section fit did not converge");
                continue;
            }
            if (std::abs(h.spot.center.value - sp.col) > fwhm_px || std::abs(v.spot.center.value - sp.row) > fwhm_px) {
                out.notes.push_back(where + " rejected: fitted center far from detection");
                continue;
            }
            pending.push_back({sp, std::move(h), std::move(v)});
        } catch (const Error& e) {
            out.notes.push_back(where + " rejected: " + e.what());
        }
    }
    if (pending.empty()) return out;
    if (pending.size() == 1) {
        out.notes.push_back("single spot: scale uses its two sections only");
    }

    std::vector<SectionFit> all;
    for (const auto& p : pending) {
        all.push_back(p.h);
        all.push_back(p.v);
    }
    out.scale = scale_factor(std::span<const SectionFit>(all), field_um, dc_um, cfg.overetch_um);

    for (auto& p : pending) {
        LocalizationRecord rec;
        rec.field_id = cfg.field_id;
        rec.spot = p.spot;
        rec.x = position_1d(p.h, out.scale);
        rec.y = position_1d(p.v, out.scale);
        const auto c = combine_2d(rec.x.dq_um, rec.y.dq_um, dc_um);
        rec.dq_um = c.dq;
        rec.dr_um = c.dr;
        rec.dc_um = dc_um;
        rec.p = out.scale.p;
        rec.dp = out.scale.dp;
        rec.horizontal = std::move(p.h);
        rec.vertical = std::move(p.v);
        out.records.push_back(std::move(rec));
    }
    std::stable_sort(out.records.begin(), out.records.end(),
                     [](const LocalizationRecord& a, const LocalizationRecord& b) { return a.mean_snr() > b.mean_snr(); });
    return out;
}

}  // namespace qdtk::localization
