#include "svt/grid.hpp"

#include <cmath>
#include <string>

namespace svt {

namespace {

void check_dims(int height, int width) {
    if (height <= 0 || width <= 0)
        throw InvalidArgument("grid dimensions must be positive, got " +
                              std::to_string(height) + "x" + std::to_string(width));
}

}  // namespace

ScalarField::ScalarField(int height, int width, double fill)
    : height_(height), width_(width) {
    check_dims(height, width);
    data_.assign(static_cast<std::size_t>(height) * static_cast<std::size_t>(width), fill);
}

ScalarField::ScalarField(int height, int width, std::vector<double> data)
    : height_(height), width_(width), data_(std::move(data)) {
    check_dims(height, width);
    if (data_.size() != static_cast<std::size_t>(height) * static_cast<std::size_t>(width))
        throw InvalidArgument("scalar field data length does not match dimensions");
}

ImageField::ImageField(int height, int width, int channels, double fill)
    : height_(height), width_(width), channels_(channels) {
    check_dims(height, width);
    if (channels != 1 && channels != 3)
        throw InvalidArgument("image must have 1 or 3 channels");
    data_.assign(static_cast<std::size_t>(height) * width * channels, fill);
}

ImageField::ImageField(int height, int width, int channels, std::vector<double> data)
    : height_(height), width_(width), channels_(channels), data_(std::move(data)) {
    check_dims(height, width);
    if (channels != 1 && channels != 3)
        throw InvalidArgument("image must have 1 or 3 channels");
    if (data_.size() != static_cast<std::size_t>(height) * width * channels)
        throw InvalidArgument("image data length does not match dimensions");
}

ScalarField ImageField::channel(int c) const {
    if (c < 0 || c >= channels_) throw InvalidArgument("channel index out of range");
    ScalarField out(height_, width_);
    for (int j = 0; j < height_; ++j)
        for (int i = 0; i < width_; ++i) out(i, j) = (*this)(i, j, c);
    return out;
}

ImageField ImageField::from_scalar(const ScalarField& field) {
    return ImageField(field.height(), field.width(), 1,
                      std::vector<double>(field.values().begin(), field.values().end()));
}

Mask::Mask(ScalarField field) : field_(std::move(field)) {
    bool any = false;
    for (double v : field_.values()) {
        if (v != 0.0 && v != 1.0) throw InvalidArgument("mask values must be exactly 0 or 1");
        any = any || v == 1.0;
    }
    if (!any) throw InvalidArgument("mask has no foreground pixel");
}

Mask Mask::threshold(const ScalarField& field, double level) {
    ScalarField binary(field.height(), field.width());
    for (std::size_t k = 0; k < field.size(); ++k)
        binary.values()[k] = field.values()[k] >= level ? 1.0 : 0.0;
    return Mask(std::move(binary));
}

std::size_t Mask::count() const {
    std::size_t n = 0;
    for (double v : field_.values()) n += v != 0.0;
    return n;
}

Stats masked_stats(const ScalarField& field, const Mask& mask) {
    if (!mask.same_shape(field)) throw InvalidArgument("masked_stats: mask/field shape mismatch");
    if (mask.count() < 2)
        throw DegenerateError("masked_stats: need at least two foreground pixels");
    double sum = 0.0;
    std::size_t n = 0;
    const auto values = field.values();
    const auto m = mask.field().values();
    for (std::size_t k = 0; k < values.size(); ++k) {
        if (m[k] == 0.0) continue;
        sum += values[k];
        ++n;
    }
    const double mean = sum / static_cast<double>(n);
    double ss = 0.0;
    for (std::size_t k = 0; k < values.size(); ++k) {
        if (m[k] == 0.0) continue;
        const double d = values[k] - mean;
        ss += d * d;
    }
    return {mean, std::sqrt(ss / static_cast<double>(n))};
}

bool interior_foreground(const Mask& mask, int i, int j) {
    if (i <= 0 || j <= 0 || i >= mask.width() - 1 || j >= mask.height() - 1) return false;
    return mask(i, j) && mask(i - 1, j) && mask(i + 1, j) && mask(i, j - 1) && mask(i, j + 1);
}

bool all_finite(std::span<const double> values) {
    for (double v : values)
        if (!std::isfinite(v)) return false;
    return true;
}

}  // namespace svt
