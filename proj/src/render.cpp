#include "svt/render.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <optional>
#include <vector>

namespace svt {

namespace {

struct Cell {
    int x0 = 0;
    int y0 = 0;
    double fx = 0.0;
    double fy = 0.0;
    bool clamped_u = false;
    bool clamped_v = false;
};

// Locates the bilinear cell for one axis; the upper index is x0 + 1 unless
// the texture is a single texel wide.
void locate(double coord, int extent, int& x0, double& f, bool& clamped) {
    const double hi = static_cast<double>(extent - 1);
    clamped = coord < 0.0 || coord > hi;
    const double c = std::clamp(coord, 0.0, hi);
    if (extent == 1) {
        x0 = 0;
        f = 0.0;
        return;
    }
    x0 = std::min(static_cast<int>(std::floor(c)), extent - 2);
    f = c - x0;
}

Cell cell_at(const ImageField& tex, double u, double v) {
    Cell c;
    locate(u, tex.width(), c.x0, c.fx, c.clamped_u);
    locate(v, tex.height(), c.y0, c.fy, c.clamped_v);
    return c;
}

double texel(const ImageField& tex, int i, int j, int ch) {
    return tex(std::min(i, tex.width() - 1), std::min(j, tex.height() - 1), ch);
}

// Piecewise-linear inverse of a non-decreasing sequence: position p with
// f(p) == target, or nullopt outside [f.front(), f.back()].
std::optional<double> invert_monotone(const std::vector<double>& f, double target) {
    const std::size_t n = f.size();
    if (n == 0 || target < f.front() || target > f.back()) return std::nullopt;
    if (n == 1) return 0.0;
    const auto it = std::upper_bound(f.begin(), f.end(), target);
    std::size_t k = it == f.begin() ? 0 : static_cast<std::size_t>(it - f.begin()) - 1;
    if (k >= n - 1) {
        // target == f.back(); fall back to the first sample with that value.
        k = static_cast<std::size_t>(std::lower_bound(f.begin(), f.end(), target) - f.begin());
        if (k == n - 1) return static_cast<double>(n - 1);
        return static_cast<double>(k);
    }
    const double span = f[k + 1] - f[k];
    const double t = span > 0.0 ? (target - f[k]) / span : 0.0;
    return static_cast<double>(k) + t;
}

double lerp_at(const std::vector<double>& f, double p) {
    const std::size_t k = std::min(static_cast<std::size_t>(p), f.size() - 1);
    const double t = p - static_cast<double>(k);
    if (t == 0.0 || k + 1 >= f.size()) return f[k];
    return (1.0 - t) * f[k] + t * f[k + 1];
}

}  // namespace

Camera::Camera(double azimuth_deg, double elevation_deg)
    : azimuth_(azimuth_deg), elevation_(elevation_deg) {
    if (!(std::abs(azimuth_deg) <= kMaxAngle) || !(std::abs(elevation_deg) <= kMaxAngle))
        throw InvalidArgument("camera angles must lie within +-45 degrees");
}

ImageField checkerboard(int height, int width, int cell, int channels) {
    if (cell < 1) throw InvalidArgument("checkerboard cell must be >= 1");
    ImageField out(height, width, channels);
    for (int j = 0; j < height; ++j)
        for (int i = 0; i < width; ++i) {
            const double value = ((i / cell + j / cell) % 2 == 0) ? 1.0 : 0.0;
            for (int c = 0; c < channels; ++c) out(i, j, c) = value;
        }
    return out;
}

ImageField sample_bilinear(const ImageField& texture, const TexCoords& uv) {
    ImageField out(uv.height(), uv.width(), texture.channels());
    for (int j = 0; j < uv.height(); ++j)
        for (int i = 0; i < uv.width(); ++i) {
            const Cell c = cell_at(texture, uv.u(i, j), uv.v(i, j));
            for (int ch = 0; ch < texture.channels(); ++ch) {
                const double t00 = texel(texture, c.x0, c.y0, ch);
                const double t10 = texel(texture, c.x0 + 1, c.y0, ch);
                const double t01 = texel(texture, c.x0, c.y0 + 1, ch);
                const double t11 = texel(texture, c.x0 + 1, c.y0 + 1, ch);
                out(i, j, ch) = (1.0 - c.fy) * ((1.0 - c.fx) * t00 + c.fx * t10) +
                                c.fy * ((1.0 - c.fx) * t01 + c.fx * t11);
            }
        }
    return out;
}

SampleGradients sample_bilinear_backward(const ImageField& texture, const TexCoords& uv,
                                         const ImageField& grad_out) {
    if (grad_out.height() != uv.height() || grad_out.width() != uv.width() ||
        grad_out.channels() != texture.channels())
        throw InvalidArgument("sample_bilinear_backward: gradient shape mismatch");
    SampleGradients g{TexCoords(uv.height(), uv.width()),
                      ImageField(texture.height(), texture.width(), texture.channels())};
    const int tw = texture.width();
    const int th = texture.height();
    for (int j = 0; j < uv.height(); ++j)
        for (int i = 0; i < uv.width(); ++i) {
            const Cell c = cell_at(texture, uv.u(i, j), uv.v(i, j));
            const int x1 = std::min(c.x0 + 1, tw - 1);
            const int y1 = std::min(c.y0 + 1, th - 1);
            double gu = 0.0;
            double gv = 0.0;
            for (int ch = 0; ch < texture.channels(); ++ch) {
                const double go = grad_out(i, j, ch);
                if (go == 0.0) continue;
                const double t00 = texture(c.x0, c.y0, ch);
                const double t10 = texture(x1, c.y0, ch);
                const double t01 = texture(c.x0, y1, ch);
                const double t11 = texture(x1, y1, ch);
                gu += go * ((1.0 - c.fy) * (t10 - t00) + c.fy * (t11 - t01));
                gv += go * ((1.0 - c.fx) * (t01 - t00) + c.fx * (t11 - t10));
                g.texture(c.x0, c.y0, ch) += go * (1.0 - c.fx) * (1.0 - c.fy);
                g.texture(x1, c.y0, ch) += go * c.fx * (1.0 - c.fy);
                g.texture(c.x0, y1, ch) += go * (1.0 - c.fx) * c.fy;
                g.texture(x1, y1, ch) += go * c.fx * c.fy;
            }
            g.uv.u(i, j) = c.clamped_u ? 0.0 : gu;
            g.uv.v(i, j) = c.clamped_v ? 0.0 : gv;
        }
    return g;
}

ImageField blend(const ImageField& input, const ImageField& warped, const Mask& mask, double alpha) {
    if (!input.same_shape(warped) || input.height() != mask.height() || input.width() != mask.width())
        throw InvalidArgument("blend: dimension mismatch");
    if (!(alpha >= 0.0 && alpha <= 1.0)) throw InvalidArgument("blend: alpha must lie in [0,1]");
    ImageField out(input.height(), input.width(), input.channels());
    for (int j = 0; j < input.height(); ++j)
        for (int i = 0; i < input.width(); ++i) {
            if (!mask(i, j)) continue;
            for (int c = 0; c < input.channels(); ++c)
                out(i, j, c) = alpha * input(i, j, c) + (1.0 - alpha) * warped(i, j, c);
        }
    return out;
}

ImageField blend_backward(const Mask& mask, double alpha, const ImageField& grad_out) {
    if (grad_out.height() != mask.height() || grad_out.width() != mask.width())
        throw InvalidArgument("blend_backward: dimension mismatch");
    ImageField g(grad_out.height(), grad_out.width(), grad_out.channels());
    for (int j = 0; j < g.height(); ++j)
        for (int i = 0; i < g.width(); ++i) {
            if (!mask(i, j)) continue;
            for (int c = 0; c < g.channels(); ++c) g(i, j, c) = (1.0 - alpha) * grad_out(i, j, c);
        }
    return g;
}

ImageField normals_from_depth(const ScalarField& depth) {
    const int h = depth.height();
    const int w = depth.width();
    if (h < 2 || w < 2) throw InvalidArgument("normals_from_depth needs at least 2x2");
    ImageField n(h, w, 3);
    for (int j = 0; j < h; ++j)
        for (int i = 0; i < w; ++i) {
            double di = 0.0;
            if (i == 0)
                di = depth(1, j) - depth(0, j);
            else if (i == w - 1)
                di = depth(w - 1, j) - depth(w - 2, j);
            else
                di = 0.5 * (depth(i + 1, j) - depth(i - 1, j));
            double dj = 0.0;
            if (j == 0)
                dj = depth(i, 1) - depth(i, 0);
            else if (j == h - 1)
                dj = depth(i, h - 1) - depth(i, h - 2);
            else
                dj = 0.5 * (depth(i, j + 1) - depth(i, j - 1));
            // (1, 0, di) x (0, 1, dj) = (-di, -dj, 1)
            const double len = std::sqrt(di * di + dj * dj + 1.0);
            n(i, j, 0) = -di / len;
            n(i, j, 1) = -dj / len;
            n(i, j, 2) = 1.0 / len;
        }
    return n;
}

ImageField resample_inverse(const ImageField& input, const TexCoords& uv, const Mask& mask) {
    const int h = input.height();
    const int w = input.width();
    if (uv.height() != h || uv.width() != w || mask.height() != h || mask.width() != w)
        throw InvalidArgument("resample_inverse: dimension mismatch");
    if (!uv.monotone()) throw InvalidArgument("resample_inverse: texture coordinates are folded");
    const int channels = input.channels();

    // Rows: invert W_u along i for every texel column. Values are
    // interpolated from the unmasked input; the mask is interpolated alongside
    // and a texel with no foreground weight is background.
    ImageField row_pass(h, w, channels);
    std::vector<std::vector<double>> carried_v(static_cast<std::size_t>(w),
                                               std::vector<double>(static_cast<std::size_t>(h)));
    std::vector<std::vector<char>> covered(static_cast<std::size_t>(w),
                                           std::vector<char>(static_cast<std::size_t>(h), 0));
    std::vector<std::vector<double>> weight(static_cast<std::size_t>(w),
                                            std::vector<double>(static_cast<std::size_t>(h), 0.0));
    std::vector<double> wu(static_cast<std::size_t>(w)), wv(static_cast<std::size_t>(w)),
        src(static_cast<std::size_t>(w)), msk(static_cast<std::size_t>(w));
    for (int j = 0; j < h; ++j) {
        for (int i = 0; i < w; ++i) {
            wu[static_cast<std::size_t>(i)] = uv.u(i, j);
            wv[static_cast<std::size_t>(i)] = uv.v(i, j);
            msk[static_cast<std::size_t>(i)] = mask(i, j) ? 1.0 : 0.0;
        }
        for (int tu = 0; tu < w; ++tu) {
            const auto p = invert_monotone(wu, static_cast<double>(tu));
            if (!p) continue;
            const auto tuz = static_cast<std::size_t>(tu);
            const auto jz = static_cast<std::size_t>(j);
            covered[tuz][jz] = 1;
            weight[tuz][jz] = lerp_at(msk, *p);
            carried_v[tuz][jz] = lerp_at(wv, *p);
            for (int c = 0; c < channels; ++c) {
                for (int i = 0; i < w; ++i) src[static_cast<std::size_t>(i)] = input(i, j, c);
                row_pass(tu, j, c) = lerp_at(src, *p);
            }
        }
    }

    // Columns: invert the carried W_v along j.
    ImageField out(h, w, channels);
    std::vector<double> fv, col;
    for (int tu = 0; tu < w; ++tu) {
        const auto tuz = static_cast<std::size_t>(tu);
        fv.clear();
        std::vector<int> rows;
        std::vector<double> wcol;
        for (int j = 0; j < h; ++j) {
            if (!covered[tuz][static_cast<std::size_t>(j)]) continue;
            const double value = carried_v[tuz][static_cast<std::size_t>(j)];
            // The separable approximation can break monotonicity slightly.
            fv.push_back(fv.empty() ? value : std::max(value, fv.back()));
            rows.push_back(j);
            wcol.push_back(weight[tuz][static_cast<std::size_t>(j)]);
        }
        if (fv.empty()) continue;
        for (int tv = 0; tv < h; ++tv) {
            const auto p = invert_monotone(fv, static_cast<double>(tv));
            if (!p) continue;
            if (!(lerp_at(wcol, *p) > 0.0)) continue;
            for (int c = 0; c < channels; ++c) {
                col.assign(rows.size(), 0.0);
                for (std::size_t r = 0; r < rows.size(); ++r) col[r] = row_pass(tu, rows[r], c);
                out(tu, tv, c) = lerp_at(col, *p);
            }
        }
    }
    return out;
}

ImageField rasterize_ortho(const ScalarField& depth, const ImageField& colors, const Mask& mask,
                           const Camera& cam) {
    const int h = depth.height();
    const int w = depth.width();
    if (colors.height() != h || colors.width() != w || mask.height() != h || mask.width() != w)
        throw InvalidArgument("rasterize_ortho: dimension mismatch");
    const TriangleSet tris = triangulate(mask);
    const double mean = masked_stats(depth, mask).mean;
    const double cx = 0.5 * (w - 1);
    const double cy = 0.5 * (h - 1);
    const double az = cam.azimuth() * std::numbers::pi / 180.0;
    const double el = cam.elevation() * std::numbers::pi / 180.0;
    const double ca = std::cos(az), sa = std::sin(az), ce = std::cos(el), se = std::sin(el);

    std::vector<Point3> screen(static_cast<std::size_t>(h) * w);
    for (int j = 0; j < h; ++j)
        for (int i = 0; i < w; ++i) {
            const double x = i - cx, y = j - cy, z = depth(i, j) - mean;
            const double x1 = x * ca + z * sa;
            const double z1 = -x * sa + z * ca;
            const double y2 = y * ce - z1 * se;
            const double z2 = y * se + z1 * ce;
            screen[static_cast<std::size_t>(j) * w + i] = {x1 + cx, y2 + cy, z2};
        }

    ImageField out(h, w, colors.channels());
    std::vector<double> zbuf(static_cast<std::size_t>(h) * w, -std::numeric_limits<double>::infinity());
    for (const Triangle& tri : tris.triangles()) {
        const Point3& p0 = screen[static_cast<std::size_t>(tri[0].j) * w + tri[0].i];
        const Point3& p1 = screen[static_cast<std::size_t>(tri[1].j) * w + tri[1].i];
        const Point3& p2 = screen[static_cast<std::size_t>(tri[2].j) * w + tri[2].i];
        const double area = (p1.x - p0.x) * (p2.y - p0.y) - (p2.x - p0.x) * (p1.y - p0.y);
        if (std::abs(area) < 1e-12) continue;
        const int xmin = std::max(0, static_cast<int>(std::ceil(std::min({p0.x, p1.x, p2.x}) - 1e-9)));
        const int xmax = std::min(w - 1, static_cast<int>(std::floor(std::max({p0.x, p1.x, p2.x}) + 1e-9)));
        const int ymin = std::max(0, static_cast<int>(std::ceil(std::min({p0.y, p1.y, p2.y}) - 1e-9)));
        const int ymax = std::min(h - 1, static_cast<int>(std::floor(std::max({p0.y, p1.y, p2.y}) + 1e-9)));
        for (int py = ymin; py <= ymax; ++py)
            for (int px = xmin; px <= xmax; ++px) {
                const double e0 = (p1.x - px) * (p2.y - py) - (p2.x - px) * (p1.y - py);
                const double e1 = (p2.x - px) * (p0.y - py) - (p0.x - px) * (p2.y - py);
                const double e2 = (p0.x - px) * (p1.y - py) - (p1.x - px) * (p0.y - py);
                const double b0 = e0 / area, b1 = e1 / area, b2 = e2 / area;
                constexpr double tol = -1e-9;
                if (b0 < tol || b1 < tol || b2 < tol) continue;
                const double z = b0 * p0.z + b1 * p1.z + b2 * p2.z;
                double& zb = zbuf[static_cast<std::size_t>(py) * w + px];
                if (!(z > zb)) continue;
                zb = z;
                for (int c = 0; c < colors.channels(); ++c)
                    out(px, py, c) = b0 * colors(tri[0].i, tri[0].j, c) +
                                     b1 * colors(tri[1].i, tri[1].j, c) +
                                     b2 * colors(tri[2].i, tri[2].j, c);
            }
    }
    return out;
}

}  // namespace svt
