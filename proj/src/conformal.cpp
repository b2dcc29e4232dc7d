#include "svt/conformal.hpp"

#include <cmath>

namespace svt {

namespace {

Point3 sub(const Point3& a, const Point3& b) { return {a.x - b.x, a.y - b.y, a.z - b.z}; }
double dot(const Point3& a, const Point3& b) { return a.x * b.x + a.y * b.y + a.z * b.z; }
Point3 cross(const Point3& a, const Point3& b) {
    return {a.y * b.z - a.z * b.y, a.z * b.x - a.x * b.z, a.x * b.y - a.y * b.x};
}
Point3 scale(const Point3& a, double s) { return {a.x * s, a.y * s, a.z * s}; }
double norm(const Point3& a) { return std::sqrt(dot(a, a)); }

Point3 vertex(const ScalarField& depth, const Pixel& p) {
    return {static_cast<double>(p.i), static_cast<double>(p.j), depth(p.i, p.j)};
}

double frame_energy(const LocalFrame& f, const std::array<double, 3>& u,
                    const std::array<double, 3>& v) {
    const auto& x = f.x;
    const auto& y = f.y;
    const double k = 0.5 / f.signed_area;
    const double ux = k * ((y[1] - y[2]) * u[0] + (y[2] - y[0]) * u[1] + (y[0] - y[1]) * u[2]);
    const double uy = k * ((x[2] - x[1]) * u[0] + (x[0] - x[2]) * u[1] + (x[1] - x[0]) * u[2]);
    const double vx = k * ((y[1] - y[2]) * v[0] + (y[2] - y[0]) * v[1] + (y[0] - y[1]) * v[2]);
    const double vy = k * ((x[2] - x[1]) * v[0] + (x[0] - x[2]) * v[1] + (x[1] - x[0]) * v[2]);
    const double p = ux + vy;
    const double q = uy - vx;
    return (p * p + q * q) * f.area;
}

// Gradient of one triangle's energy. With a = P2-P1, b = P3-P1 the frame
// reduces to x2 = |a|, x3 = a.b/|a|, y3 = -|a x b|/|a|, and the energy to
//   E = (alpha^2 + beta^2) / (2 |a|^2 |a x b|)
//   alpha = S du2 - |a|^2 dv3 + G dv2,  beta = -|a|^2 du3 + G du2 - S dv2
// where S = |a x b|, G = a.b, du_k = u_k - u_1, dv_k = v_k - v_1.
void accumulate_gradient(const Point3& a, const Point3& b, const std::array<double, 3>& u,
                         const std::array<double, 3>& v, const Triangle& tri, TexCoords* grad_uv,
                         ScalarField* grad_depth) {
    const Point3 axb = cross(a, b);
    const double s = norm(axb);
    const double n2 = dot(a, a);
    const double g = dot(a, b);
    const double du2 = u[1] - u[0], du3 = u[2] - u[0];
    const double dv2 = v[1] - v[0], dv3 = v[2] - v[0];
    const double alpha = s * du2 - n2 * dv3 + g * dv2;
    const double beta = -n2 * du3 + g * du2 - s * dv2;
    const double denom = n2 * s;
    const double energy = (alpha * alpha + beta * beta) / (2.0 * denom);

    if (grad_uv != nullptr) {
        const double ea = alpha / denom;
        const double eb = beta / denom;
        const double g_du2 = ea * s + eb * g;
        const double g_du3 = -eb * n2;
        const double g_dv2 = ea * g - eb * s;
        const double g_dv3 = -ea * n2;
        grad_uv->u(tri[1].i, tri[1].j) += g_du2;
        grad_uv->u(tri[2].i, tri[2].j) += g_du3;
        grad_uv->u(tri[0].i, tri[0].j) -= g_du2 + g_du3;
        grad_uv->v(tri[1].i, tri[1].j) += g_dv2;
        grad_uv->v(tri[2].i, tri[2].j) += g_dv3;
        grad_uv->v(tri[0].i, tri[0].j) -= g_dv2 + g_dv3;
    }
    if (grad_depth != nullptr) {
        const double e_n2 = -(alpha * dv3 + beta * du3) / denom - energy / n2;
        const double e_g = (alpha * dv2 + beta * du2) / denom;
        const double e_s = (alpha * du2 - beta * dv2) / denom - energy / s;
        // dS/da = b x n, dS/db = n x a with n = (a x b)/S.
        const Point3 n = scale(axb, 1.0 / s);
        const Point3 ds_da = cross(b, n);
        const Point3 ds_db = cross(n, a);
        // Only the z components depend on depth.
        const double ga = e_n2 * 2.0 * a.z + e_g * b.z + e_s * ds_da.z;
        const double gb = e_g * a.z + e_s * ds_db.z;
        (*grad_depth)(tri[1].i, tri[1].j) += ga;
        (*grad_depth)(tri[2].i, tri[2].j) += gb;
        (*grad_depth)(tri[0].i, tri[0].j) -= ga + gb;
    }
}

double laplacian_at(const ScalarField& d, int i, int j) {
    return d(i + 1, j) + d(i - 1, j) + d(i, j + 1) + d(i, j - 1) - 4.0 * d(i, j);
}

}  // namespace

TriangleSet::TriangleSet(int height, int width, std::vector<Triangle> triangles)
    : height_(height), width_(width), triangles_(std::move(triangles)) {}

TriangleSet TriangleSet::without(std::size_t k) const {
    std::vector<Triangle> rest = triangles_;
    rest.erase(rest.begin() + static_cast<std::ptrdiff_t>(k));
    return TriangleSet(height_, width_, std::move(rest));
}

TriangleSet triangulate(const Mask& mask) {
    std::vector<Triangle> tris;
    for (int j = 0; j + 1 < mask.height(); ++j) {
        for (int i = 0; i + 1 < mask.width(); ++i) {
            const bool a = mask(i, j), b = mask(i + 1, j), c = mask(i, j + 1), d = mask(i + 1, j + 1);
            if (a && b && c) tris.push_back({Pixel{i, j}, Pixel{i + 1, j}, Pixel{i, j + 1}});
            if (b && d && c) tris.push_back({Pixel{i + 1, j}, Pixel{i + 1, j + 1}, Pixel{i, j + 1}});
        }
    }
    if (tris.empty()) throw DegenerateError("triangulate: mask yields no triangles");
    return TriangleSet(mask.height(), mask.width(), std::move(tris));
}

std::size_t folded_triangles(const TexCoords& uv, const TriangleSet& tris) {
    std::size_t folded = 0;
    for (const Triangle& t : tris.triangles()) {
        const double au = uv.u(t[1].i, t[1].j) - uv.u(t[0].i, t[0].j);
        const double av = uv.v(t[1].i, t[1].j) - uv.v(t[0].i, t[0].j);
        const double bu = uv.u(t[2].i, t[2].j) - uv.u(t[0].i, t[0].j);
        const double bv = uv.v(t[2].i, t[2].j) - uv.v(t[0].i, t[0].j);
        if (!(au * bv - av * bu > 0.0)) ++folded;
    }
    return folded;
}

LocalFrame local_frame(const Point3& p1, const Point3& p2, const Point3& p3) {
    const Point3 a = sub(p2, p1);
    const Point3 b = sub(p3, p1);
    const Point3 axb = cross(a, b);
    const double la = norm(a);
    const double lc = norm(axb);
    if (la == 0.0 || lc * 0.5 <= kDegenerateArea) throw DegenerateError("local_frame: degenerate triangle");
    const Point3 e1 = scale(a, 1.0 / la);
    const Point3 n = scale(axb, 1.0 / lc);
    const Point3 e2 = cross(e1, n);

    LocalFrame f;
    const Point3 rel[3] = {Point3{}, a, b};
    for (int k = 0; k < 3; ++k) {
        f.x[k] = dot(rel[k], e1);
        f.y[k] = dot(rel[k], e2);
    }
    f.signed_area = ((f.x[1] - f.x[0]) * (f.y[2] - f.y[0]) - (f.x[2] - f.x[0]) * (f.y[1] - f.y[0])) / 2.0;
    f.area = std::abs(f.signed_area);
    if (f.area <= kDegenerateArea) throw DegenerateError("local_frame: degenerate triangle");
    return f;
}

double triangle_energy(const ScalarField& depth, const TexCoords& uv, const Triangle& tri) {
    const Point3 p1 = vertex(depth, tri[0]), p2 = vertex(depth, tri[1]), p3 = vertex(depth, tri[2]);
    LocalFrame f;
    try {
        f = local_frame(p1, p2, p3);
    } catch (const DegenerateError&) {
        return 0.0;
    }
    const std::array<double, 3> u{uv.u(tri[0].i, tri[0].j), uv.u(tri[1].i, tri[1].j),
                                  uv.u(tri[2].i, tri[2].j)};
    const std::array<double, 3> v{uv.v(tri[0].i, tri[0].j), uv.v(tri[1].i, tri[1].j),
                                  uv.v(tri[2].i, tri[2].j)};
    return frame_energy(f, u, v);
}

LscmEvaluation lscm_energy(const ScalarField& depth, const TexCoords& uv, const TriangleSet& tris,
                           LscmGradients want) {
    if (!depth.same_shape(uv.u) || depth.height() != tris.height() || depth.width() != tris.width())
        throw InvalidArgument("lscm_energy: depth, texcoords and triangles disagree in shape");
    if (tris.size() == 0) throw DegenerateError("lscm_energy: no triangles");

    LscmEvaluation out;
    const bool want_uv = want == LscmGradients::uv || want == LscmGradients::both;
    const bool want_depth = want == LscmGradients::depth || want == LscmGradients::both;
    if (want_uv) out.grad_uv = TexCoords(depth.height(), depth.width());
    if (want_depth) out.grad_depth = ScalarField(depth.height(), depth.width());

    for (const Triangle& tri : tris.triangles()) {
        const Point3 p1 = vertex(depth, tri[0]), p2 = vertex(depth, tri[1]), p3 = vertex(depth, tri[2]);
        const Point3 a = sub(p2, p1);
        const Point3 b = sub(p3, p1);
        if (0.5 * norm(cross(a, b)) <= kDegenerateArea || norm(a) == 0.0) {
            ++out.skipped;
            continue;
        }
        const std::array<double, 3> u{uv.u(tri[0].i, tri[0].j), uv.u(tri[1].i, tri[1].j),
                                      uv.u(tri[2].i, tri[2].j)};
        const std::array<double, 3> v{uv.v(tri[0].i, tri[0].j), uv.v(tri[1].i, tri[1].j),
                                      uv.v(tri[2].i, tri[2].j)};
        out.energy += frame_energy(local_frame(p1, p2, p3), u, v);
        if (want_uv || want_depth)
            accumulate_gradient(a, b, u, v, tri, want_uv ? &out.grad_uv : nullptr,
                                want_depth ? &out.grad_depth : nullptr);
    }
    if (out.skipped == tris.size()) throw DegenerateError("lscm_energy: every triangle is degenerate");
    return out;
}

DepthLoss laplacian_l1(const ScalarField& depth, const Mask& mask) {
    if (!mask.same_shape(depth)) throw InvalidArgument("laplacian_l1: mask/depth shape mismatch");
    const double norm = 1.0 / static_cast<double>(depth.size());
    DepthLoss out{0.0, ScalarField(depth.height(), depth.width())};
    for (int j = 1; j + 1 < depth.height(); ++j) {
        for (int i = 1; i + 1 < depth.width(); ++i) {
            if (!interior_foreground(mask, i, j)) continue;
            const double lap = laplacian_at(depth, i, j);
            out.value += std::abs(lap);
            const double s = (lap > 0.0 ? 1.0 : lap < 0.0 ? -1.0 : 0.0) * norm;
            out.grad(i + 1, j) += s;
            out.grad(i - 1, j) += s;
            out.grad(i, j + 1) += s;
            out.grad(i, j - 1) += s;
            out.grad(i, j) -= 4.0 * s;
        }
    }
    out.value *= norm;
    return out;
}

double mean_abs_laplacian(const ScalarField& depth, const Mask& mask) {
    if (!mask.same_shape(depth)) throw InvalidArgument("mean_abs_laplacian: mask/depth shape mismatch");
    double sum = 0.0;
    std::size_t n = 0;
    for (int j = 1; j + 1 < depth.height(); ++j)
        for (int i = 1; i + 1 < depth.width(); ++i) {
            if (!interior_foreground(mask, i, j)) continue;
            sum += std::abs(laplacian_at(depth, i, j));
            ++n;
        }
    return n == 0 ? 0.0 : sum / static_cast<double>(n);
}

}  // namespace svt
