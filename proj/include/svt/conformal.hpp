#pragma once

// Least-squares conformal energy over the depth-grid triangle mesh. Every
// foreground pixel (i, j) is a vertex at (i, j, D(i, j)) carrying texture
// coordinates (W_u(i, j), W_v(i, j)).

#include <array>
#include <cstddef>
#include <vector>

#include "svt/grid.hpp"
#include "svt/warpfield.hpp"

namespace svt {

inline constexpr double kDegenerateArea = 1e-12;

struct Pixel {
    int i = 0;
    int j = 0;
    bool operator==(const Pixel&) const = default;
};

using Triangle = std::array<Pixel, 3>;

/// Foreground triangles of the pixel grid. Each quad contributes
/// ((i,j),(i+1,j),(i,j+1)) and ((i+1,j),(i+1,j+1),(i,j+1)) when all three
/// vertices of the respective triangle are foreground.
class TriangleSet {
public:
    TriangleSet() = default;
    TriangleSet(int height, int width, std::vector<Triangle> triangles);

    int height() const { return height_; }
    int width() const { return width_; }
    std::size_t size() const { return triangles_.size(); }
    const Triangle& operator[](std::size_t k) const { return triangles_[k]; }
    const std::vector<Triangle>& triangles() const { return triangles_; }

    /// Copy without triangle `k`.
    TriangleSet without(std::size_t k) const;

private:
    int height_ = 0;
    int width_ = 0;
    std::vector<Triangle> triangles_;
};

/// Row-major quad order. Throws DegenerateError when no triangle survives.
TriangleSet triangulate(const Mask& mask);

struct Point3 {
    double x = 0.0;
    double y = 0.0;
    double z = 0.0;
};

/// Triangle in its own plane: vertex 1 at the origin, edge 1->2 along +x,
/// y axis e1 x n with n the normal of (P2-P1) x (P3-P1).
struct LocalFrame {
    std::array<double, 3> x{};
    std::array<double, 3> y{};
    double signed_area = 0.0;
    double area = 0.0;
};

/// Throws DegenerateError when the area is at most kDegenerateArea.
LocalFrame local_frame(const Point3& p1, const Point3& p2, const Point3& p3);

enum class LscmGradients { none, uv, depth, both };

struct LscmEvaluation {
    double energy = 0.0;
    std::size_t skipped = 0;  ///< degenerate triangles left out of the sum
    TexCoords grad_uv;        ///< filled when requested
    ScalarField grad_depth;   ///< filled when requested
};

/// Sum over triangles of ((u_x + v_y)^2 + (u_y - v_x)^2) * A, with the
/// texture-map derivatives taken in each triangle's local frame.
LscmEvaluation lscm_energy(const ScalarField& depth, const TexCoords& uv, const TriangleSet& tris,
                           LscmGradients want = LscmGradients::none);

/// Triangles whose texture-space orientation is not positive (the pixel
/// grid orientation); 0 means the map is foldover-free on the mesh.
std::size_t folded_triangles(const TexCoords& uv, const TriangleSet& tris);

/// Contribution of a single triangle; 0 for a degenerate one.
double triangle_energy(const ScalarField& depth, const TexCoords& uv, const Triangle& tri);

struct DepthLoss {
    double value = 0.0;
    ScalarField grad;
};

/// sum |Laplacian(D)| over pixels whose 4-neighbourhood is foreground,
/// divided by the total pixel count.
DepthLoss laplacian_l1(const ScalarField& depth, const Mask& mask);

/// Mean |Laplacian(D)| over the same pixels (snapshot smoothness score).
double mean_abs_laplacian(const ScalarField& depth, const Mask& mask);

}  // namespace svt
