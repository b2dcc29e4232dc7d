#pragma once

// Foldover-free texture-coordinate parametrization.
//
//   WarpStack --synthesize--> GradField (>= 0) --integrate--> TexCoords
//
// The stack holds per-axis coordinate increments at N dyadic scales. The
// synthesized increments are clamped at zero so the integrated coordinates
// are monotone along each axis.

#include <array>
#include <filesystem>
#include <span>
#include <vector>

#include "svt/grid.hpp"

namespace svt {

/// Paired fields (V_u, V_v): increments of W_u along i and of W_v along j.
struct GradField {
    ScalarField u;
    ScalarField v;

    GradField() = default;
    GradField(int height, int width, double fill = 0.0)
        : u(height, width, fill), v(height, width, fill) {}
    GradField(ScalarField u_, ScalarField v_);

    int height() const { return u.height(); }
    int width() const { return u.width(); }
};

/// Absolute texture coordinates (W_u, W_v) in texture pixel units.
struct TexCoords {
    ScalarField u;
    ScalarField v;

    TexCoords() = default;
    TexCoords(int height, int width, double fill = 0.0)
        : u(height, width, fill), v(height, width, fill) {}
    TexCoords(ScalarField u_, ScalarField v_);

    int height() const { return u.height(); }
    int width() const { return u.width(); }

    /// W_u(i,j) = i, W_v(i,j) = j.
    static TexCoords identity(int height, int width);
    /// W_u non-decreasing along i and W_v non-decreasing along j.
    bool monotone() const;
    /// Monotonicity restricted to neighbour pairs inside the mask.
    bool monotone(const Mask& mask) const;
};

/// Multiscale pyramid of gradient fields; level j is (H/2^j) x (W/2^j).
class WarpStack {
public:
    WarpStack() = default;
    /// Throws InvalidArgument unless level dimensions halve consistently.
    explicit WarpStack(std::vector<GradField> levels);
    /// Zero stack for an H x W target with `scales` levels.
    WarpStack(int height, int width, int scales);

    int scales() const { return static_cast<int>(levels_.size()); }
    int height() const { return levels_.front().height(); }
    int width() const { return levels_.front().width(); }
    const GradField& level(int j) const { return levels_[static_cast<std::size_t>(j)]; }
    GradField& level(int j) { return levels_[static_cast<std::size_t>(j)]; }

    /// Total number of scalar parameters.
    std::size_t parameter_count() const;
    /// Concatenates all levels (u then v per level, finest first).
    std::vector<double> pack() const;
    void unpack(std::span<const double> flat);

private:
    std::vector<GradField> levels_;
};

/// The 5-tap pyramid kernel 1.4 * [1, 4, 6, 4, 1] / 16.
std::array<double, 5> pyramid_kernel();

/// Dyadic upsampling: zero insertion followed by separable convolution with
/// twice the pyramid kernel along each axis, reflect padding.
ScalarField upsample(const ScalarField& coarse);
/// Exact adjoint of upsample().
ScalarField upsample_adjoint(const ScalarField& fine);

/// Coarse-to-fine upsample-and-add, before clamping.
GradField synthesize_linear(const WarpStack& stack);
/// Adjoint of synthesize_linear(): distributes a full-resolution gradient
/// over the levels of a stack shaped like `shape`.
WarpStack synthesize_linear_adjoint(const GradField& grad, int scales);

GradField relu(const GradField& pre);
/// Subgradient at exactly zero is zero.
GradField relu_backward(const GradField& pre, const GradField& grad);

/// relu(synthesize_linear(stack)).
GradField synthesize(const WarpStack& stack);
/// Gradient of a loss w.r.t. the stack given its gradient w.r.t. synthesize().
WarpStack synthesize_backward(const WarpStack& stack, const GradField& grad);

/// Cumulative sums with W_u(0,j) = 0 and W_v(i,0) = 0. Throws
/// InvalidArgument on negative increments.
TexCoords integrate(const GradField& grad);
/// Reverse cumulative sum; the first column of V_u and first row of V_v
/// receive zero gradient.
GradField integrate_backward(const TexCoords& grad);

struct GradFieldLoss {
    double value = 0.0;
    GradField grad;
};

/// mean(|V_u| + |V_v|) over pixels.
GradFieldLoss l1_reg(const GradField& grad);

/// Squared 2x2 stencil residual (twice the discrete curl dV_v/dx - dV_u/dy)
/// summed over all fully valid stencils and divided by H*W.
GradFieldLoss integrability_loss(const GradField& grad);

/// Stack whose synthesis is 1 everywhere: zero fine levels and a constant
/// coarsest level calibrated by probing the synthesis with ones.
WarpStack init_identity(int height, int width, int scales);

/// Persists one 3-channel PFM per level (V_u, V_v, 0) and a text manifest.
void save_warpstack(const WarpStack& stack, const std::filesystem::path& dir);
WarpStack load_warpstack(const std::filesystem::path& dir);

/// Texture coordinates as a 3-channel PFM (W_u, W_v, 0).
void write_texcoords(const TexCoords& uv, const std::filesystem::path& path);
TexCoords read_texcoords(const std::filesystem::path& path);

}  // namespace svt
