#pragma once

// Dense row-major grids. Convention everywhere: i is the column (u / x),
// j is the row (v / y), origin at the top-left pixel.

#include <cstddef>
#include <span>
#include <utility>
#include <vector>

#include "svt/error.hpp"

namespace svt {

class ScalarField {
public:
    ScalarField() = default;
    ScalarField(int height, int width, double fill = 0.0);
    ScalarField(int height, int width, std::vector<double> data);

    int height() const { return height_; }
    int width() const { return width_; }
    std::size_t size() const { return data_.size(); }
    bool empty() const { return data_.empty(); }

    double& operator()(int i, int j) { return data_[index(i, j)]; }
    double operator()(int i, int j) const { return data_[index(i, j)]; }

    std::span<double> values() { return data_; }
    std::span<const double> values() const { return data_; }

    bool same_shape(const ScalarField& other) const {
        return height_ == other.height_ && width_ == other.width_;
    }

    bool operator==(const ScalarField&) const = default;

private:
    std::size_t index(int i, int j) const {
        return static_cast<std::size_t>(j) * static_cast<std::size_t>(width_) +
               static_cast<std::size_t>(i);
    }

    int height_ = 0;
    int width_ = 0;
    std::vector<double> data_;
};

/// Channel-interleaved image. Values are expected in [0,1] when persisted;
/// in memory they are unconstrained (cotangents, normals).
class ImageField {
public:
    ImageField() = default;
    ImageField(int height, int width, int channels, double fill = 0.0);
    ImageField(int height, int width, int channels, std::vector<double> data);

    int height() const { return height_; }
    int width() const { return width_; }
    int channels() const { return channels_; }
    std::size_t size() const { return data_.size(); }

    double& operator()(int i, int j, int c) { return data_[index(i, j, c)]; }
    double operator()(int i, int j, int c) const { return data_[index(i, j, c)]; }

    std::span<double> values() { return data_; }
    std::span<const double> values() const { return data_; }

    bool same_shape(const ImageField& other) const {
        return height_ == other.height_ && width_ == other.width_ &&
               channels_ == other.channels_;
    }

    /// Single-channel view of channel `c` as a copy.
    ScalarField channel(int c) const;
    static ImageField from_scalar(const ScalarField& field);

    bool operator==(const ImageField&) const = default;

private:
    std::size_t index(int i, int j, int c) const {
        return (static_cast<std::size_t>(j) * static_cast<std::size_t>(width_) +
                static_cast<std::size_t>(i)) *
                   static_cast<std::size_t>(channels_) +
               static_cast<std::size_t>(c);
    }

    int height_ = 0;
    int width_ = 0;
    int channels_ = 0;
    std::vector<double> data_;
};

/// Strictly binary foreground mask with at least one foreground pixel.
class Mask {
public:
    Mask() = default;
    /// Throws InvalidArgument if any value is not exactly 0 or 1, or if
    /// there is no foreground pixel.
    explicit Mask(ScalarField field);
    /// Thresholds `field` at 0.5.
    static Mask threshold(const ScalarField& field, double level = 0.5);

    int height() const { return field_.height(); }
    int width() const { return field_.width(); }
    bool operator()(int i, int j) const { return field_(i, j) != 0.0; }
    const ScalarField& field() const { return field_; }
    std::size_t count() const;

    bool same_shape(const ScalarField& f) const { return field_.same_shape(f); }

private:
    ScalarField field_;
};

struct Stats {
    double mean = 0.0;
    double std = 0.0;
};

/// Mean and population standard deviation over foreground pixels.
Stats masked_stats(const ScalarField& field, const Mask& mask);

/// True when all four 4-neighbours and the pixel itself are foreground.
bool interior_foreground(const Mask& mask, int i, int j);

bool all_finite(std::span<const double> values);

}  // namespace svt
