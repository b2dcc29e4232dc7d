#pragma once

// Analytic primitive-shape dataset and depth/normal metrics.

#include <array>
#include <optional>
#include <string>

#include "svt/grid.hpp"

namespace svt {

enum class PrimitiveKind { sphere, cube, pyramid, cylinder };
enum class CueVariant { silhouette, shaded, regular_texture, natural_texture };

inline constexpr std::array<PrimitiveKind, 4> kAllKinds{PrimitiveKind::sphere, PrimitiveKind::cube,
                                                        PrimitiveKind::pyramid, PrimitiveKind::cylinder};
inline constexpr std::array<CueVariant, 4> kAllVariants{CueVariant::silhouette, CueVariant::shaded,
                                                        CueVariant::regular_texture,
                                                        CueVariant::natural_texture};

std::string to_string(PrimitiveKind kind);
std::string to_string(CueVariant variant);
std::optional<PrimitiveKind> parse_kind(const std::string& name);
/// Accepts "silhouette", "shaded", "shaded+regular_texture" (or "regular"),
/// "shaded+natural_texture" (or "natural").
std::optional<CueVariant> parse_variant(const std::string& name);

struct PrimitiveSpec {
    PrimitiveKind kind = PrimitiveKind::sphere;
    CueVariant variant = CueVariant::shaded;
    int resolution = 64;
    /// Radius (sphere, cylinder) or half-extent (cube, pyramid) in pixels;
    /// 0 selects 3/8 of the resolution.
    double extent = 0.0;
    std::array<double, 3> light_dir = default_light();

    static std::array<double, 3> default_light();
    double effective_extent() const;
    /// Throws InvalidArgument unless the shape fits with a 2-pixel margin.
    void validate() const;
};

struct Primitive {
    ImageField image;  ///< 3 channels, background 0
    ScalarField depth;  ///< height toward the viewer, 0 on the background
    Mask mask;          ///< exactly the support of depth > 0
};

/// Depth profiles (image axis i horizontal, centre at (res-1)/2):
///   sphere    sqrt(r^2 - dx^2 - dy^2)
///   cylinder  sqrt(r^2 - dx^2) for |dy| <= r (vertical axis)
///   cube      w - |dx| for |dy| <= w (two faces meeting at a vertical ridge)
///   pyramid   min(w - |dx|, w - |dy|)
Primitive gen_primitive(const PrimitiveSpec& spec);

/// MSE over the foreground after rescaling pred to the ground-truth mean and
/// standard deviation. Throws DegenerateError for a constant prediction or
/// ground truth.
double depth_mse(const ScalarField& pred, const ScalarField& gt, const Mask& mask);

/// Per-component MSE of normals (mean over interior foreground pixels of
/// |n_pred - n_gt|^2 / 3), with pred rescaled as in depth_mse.
double normal_mse(const ScalarField& pred, const ScalarField& gt, const Mask& mask);

/// normal_mse without the affine rescaling of pred.
double normal_error(const ScalarField& pred, const ScalarField& gt, const Mask& mask);

/// pred rescaled to the foreground statistics of gt.
ScalarField rescale_to(const ScalarField& pred, const ScalarField& gt, const Mask& mask);

}  // namespace svt
