#pragma once

// Virtual-texture rendering and view synthesis.

#include "svt/conformal.hpp"
#include "svt/grid.hpp"
#include "svt/warpfield.hpp"

namespace svt {

/// Orthographic view rotated by azimuth (about the vertical image axis) and
/// elevation (about the horizontal image axis). Angles in degrees.
class Camera {
public:
    static constexpr double kMaxAngle = 45.0;

    Camera() = default;
    /// Throws InvalidArgument when |azimuth| or |elevation| exceeds 45.
    Camera(double azimuth_deg, double elevation_deg);

    double azimuth() const { return azimuth_; }
    double elevation() const { return elevation_; }

private:
    double azimuth_ = 0.0;
    double elevation_ = 0.0;
};

/// 1 where floor(i/cell) + floor(j/cell) is even, else 0.
ImageField checkerboard(int height, int width, int cell, int channels = 1);

/// Bilinear lookup of `texture` at (uv.u, uv.v), clamped to the border.
ImageField sample_bilinear(const ImageField& texture, const TexCoords& uv);

struct SampleGradients {
    TexCoords uv;
    ImageField texture;
};

/// Backward of sample_bilinear for an upstream gradient on its output.
/// The uv derivative is the analytic piecewise-constant one and is zero
/// where the coordinate was clamped.
SampleGradients sample_bilinear_backward(const ImageField& texture, const TexCoords& uv,
                                         const ImageField& grad_out);

/// mask * (alpha * input + (1 - alpha) * warped).
ImageField blend(const ImageField& input, const ImageField& warped, const Mask& mask, double alpha);
/// Gradient w.r.t. `warped`: (1 - alpha) * mask * grad_out.
ImageField blend_backward(const Mask& mask, double alpha, const ImageField& grad_out);

/// Unit normals normalize(-dD/di, -dD/dj, 1); central differences inside,
/// one-sided at the border.
ImageField normals_from_depth(const ScalarField& depth);

/// Texture-space image: inverts the monotone per-axis coordinate maps
/// (rows for u, then columns for v) and samples the input there. Texels
/// outside the image of the map, or whose footprint has no foreground
/// weight, are 0. Throws on folded uv.
ImageField resample_inverse(const ImageField& input, const TexCoords& uv, const Mask& mask);

/// Z-buffered rasterization of the foreground mesh (i - cx, j - cy, D - mean)
/// after rotation by `cam`; greater z is closer. Background is 0.
ImageField rasterize_ortho(const ScalarField& depth, const ImageField& colors, const Mask& mask,
                           const Camera& cam);

}  // namespace svt
