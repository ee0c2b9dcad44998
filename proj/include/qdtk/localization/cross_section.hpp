#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "qdtk/errors.hpp"
#include "qdtk/imaging/image.hpp"

namespace qdtk::localization {

enum class Axis { horizontal, vertical };

inline const char* to_string(Axis a) { return a == Axis::horizontal ? "horizontal" : "vertical"; }

/// Band-averaged profile through a spot. A horizontal section runs along x
/// (columns) and averages `width` rows around the spot.
struct CrossSection {
    Axis axis = Axis::horizontal;
    int width = 10;
    int origin = 0;  // pixel index of profile[0] along the axis
    int band_start = 0;  // first perpendicular pixel averaged
    std::vector<double> profile;
};

inline CrossSection extract_cross_section(const imaging::PixelImage& img, double spot_col, double spot_row,
                                          Axis axis, int width = 10) {
    if (width < 1) throw InputError("cross-section width must be at least 1");
    if (spot_col < 0.0 || spot_row < 0.0 || spot_col > img.width() - 1 || spot_row > img.height() - 1) {
        throw InputError("spot outside the image");
    }
    const int extent_perp = axis == Axis::horizontal ? img.height() : img.width();
    const int along = axis == Axis::horizontal ? img.width() : img.height();
    width = std::min(width, extent_perp);
    const int center = static_cast<int>(std::lround(axis == Axis::horizontal ? spot_row : spot_col));
    const int start = center - width / 2;
    if (start < 0 || start + width > extent_perp) {
        throw InputError("spot within half the section width of the image edge");
    }
    CrossSection cs;
    cs.axis = axis;
    cs.width = width;
    cs.origin = 0;
    cs.band_start = start;
    cs.profile.assign(static_cast<std::size_t>(along), 0.0);
    for (int k = 0; k < along; ++k) {
        double s = 0.0;
        for (int j = start; j < start + width; ++j) s += axis == Axis::horizontal ? img(j, k) : img(k, j);
        cs.profile[static_cast<std::size_t>(k)] = s / width;
    }
    return cs;
}

}  // namespace qdtk::localization
