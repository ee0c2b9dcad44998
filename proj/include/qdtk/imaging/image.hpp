#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <string>

#include "qdtk/errors.hpp"

namespace qdtk::imaging {

/// Row-major intensity map. Pixel (col, row) has its center at
/// (col * pitch, row * pitch) in the image frame; row 0 is the lower edge.
class PixelImage {
public:
    using Data = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

    PixelImage() = default;
    PixelImage(int width, int height, double pixel_pitch_um, double integration_time_s = 1.0)
        : pitch_(pixel_pitch_um), integration_(integration_time_s), data_(Data::Zero(height, width)) {
        check_shape(width, height, pixel_pitch_um);
    }
    PixelImage(Data data, double pixel_pitch_um, double integration_time_s = 1.0)
        : pitch_(pixel_pitch_um), integration_(integration_time_s), data_(std::move(data)) {
        check_shape(static_cast<int>(data_.cols()), static_cast<int>(data_.rows()), pixel_pitch_um);
        validate_values();
    }

    int width() const { return static_cast<int>(data_.cols()); }
    int height() const { return static_cast<int>(data_.rows()); }
    double pixel_pitch() const { return pitch_; }
    double integration_time() const { return integration_; }

    double operator()(int row, int col) const { return data_(row, col); }
    double& operator()(int row, int col) { return data_(row, col); }

    const Data& data() const { return data_; }
    Data& data() { return data_; }

    /// Throws if any intensity is negative or not finite.
    void validate_values() const {
        if (!data_.allFinite()) throw InputError("image contains non-finite intensities");
        if (data_.size() > 0 && data_.minCoeff() < 0.0) throw InputError("image contains negative intensities");
    }

private:
    static void check_shape(int w, int h, double pitch) {
        if (w < 16 || h < 16) {
            throw InputError("image must be at least 16x16 pixels, got " + std::to_string(w) + "x" +
                             std::to_string(h));
        }
        if (!(pitch > 0.0) || !std::isfinite(pitch)) throw InputError("pixel pitch must be positive");
    }

    double pitch_ = 0.1;
    double integration_ = 1.0;
    Data data_;
};

}  // namespace qdtk::imaging
