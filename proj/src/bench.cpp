#include "svt/bench.hpp"

#include <cmath>
#include <cstdint>
#include <numbers>

#include "svt/render.hpp"

namespace svt {

namespace {

std::uint64_t hash64(std::uint64_t x) {
    x ^= x >> 33;
    x *= 0xff51afd7ed558ccdULL;
    x ^= x >> 33;
    x *= 0xc4ceb9fe1a85ec53ULL;
    x ^= x >> 33;
    return x;
}

double lattice(std::uint64_t seed, int x, int y) {
    const std::uint64_t h = hash64(seed ^ hash64(static_cast<std::uint64_t>(x) * 0x9E3779B1ULL +
                                                 static_cast<std::uint64_t>(y) * 0x85EBCA77ULL));
    return static_cast<double>(h >> 11) * 0x1.0p-53;
}

// Bilinear value noise in [0, 1) with lattice spacing `cell` pixels.
double value_noise(std::uint64_t seed, double x, double y, double cell) {
    const double fx = x / cell, fy = y / cell;
    const int x0 = static_cast<int>(std::floor(fx)), y0 = static_cast<int>(std::floor(fy));
    const double tx = fx - x0, ty = fy - y0;
    const double sx = tx * tx * (3.0 - 2.0 * tx), sy = ty * ty * (3.0 - 2.0 * ty);
    const double a = lattice(seed, x0, y0), b = lattice(seed, x0 + 1, y0);
    const double c = lattice(seed, x0, y0 + 1), d = lattice(seed, x0 + 1, y0 + 1);
    return (1 - sy) * ((1 - sx) * a + sx * b) + sy * ((1 - sx) * c + sx * d);
}

std::uint64_t spec_seed(const PrimitiveSpec& spec) {
    std::uint64_t s = hash64(static_cast<std::uint64_t>(spec.kind) + 1);
    s = hash64(s ^ (static_cast<std::uint64_t>(spec.variant) + 17));
    s = hash64(s ^ static_cast<std::uint64_t>(spec.resolution));
    s = hash64(s ^ static_cast<std::uint64_t>(std::llround(spec.effective_extent() * 1000.0)));
    return s;
}

}  // namespace

std::string to_string(PrimitiveKind kind) {
    switch (kind) {
        case PrimitiveKind::sphere: return "sphere";
        case PrimitiveKind::cube: return "cube";
        case PrimitiveKind::pyramid: return "pyramid";
        case PrimitiveKind::cylinder: return "cylinder";
    }
    return "unknown";
}

std::string to_string(CueVariant variant) {
    switch (variant) {
        case CueVariant::silhouette: return "silhouette";
        case CueVariant::shaded: return "shaded";
        case CueVariant::regular_texture: return "shaded+regular_texture";
        case CueVariant::natural_texture: return "shaded+natural_texture";
    }
    return "unknown";
}

std::optional<PrimitiveKind> parse_kind(const std::string& name) {
    for (PrimitiveKind k : kAllKinds)
        if (to_string(k) == name) return k;
    return std::nullopt;
}

std::optional<CueVariant> parse_variant(const std::string& name) {
    for (CueVariant v : kAllVariants)
        if (to_string(v) == name) return v;
    if (name == "regular" || name == "regular_texture") return CueVariant::regular_texture;
    if (name == "natural" || name == "natural_texture") return CueVariant::natural_texture;
    return std::nullopt;
}

std::array<double, 3> PrimitiveSpec::default_light() {
    const double n = std::sqrt(0.3 * 0.3 + 0.5 * 0.5 + 0.8 * 0.8);
    return {0.3 / n, -0.5 / n, 0.8 / n};
}

double PrimitiveSpec::effective_extent() const {
    return extent > 0.0 ? extent : 0.375 * resolution;
}

void PrimitiveSpec::validate() const {
    if (resolution < 8) throw InvalidArgument("primitive resolution must be >= 8");
    const double e = effective_extent();
    const double c = 0.5 * (resolution - 1);
    if (!(e >= 2.0) || c - e < 2.0 || c + e > resolution - 3.0)
        throw InvalidArgument("primitive does not fit with a 2-pixel margin");
    const double len = std::sqrt(light_dir[0] * light_dir[0] + light_dir[1] * light_dir[1] +
                                 light_dir[2] * light_dir[2]);
    if (!(std::abs(len - 1.0) < 1e-6)) throw InvalidArgument("light_dir must be a unit vector");
}

Primitive gen_primitive(const PrimitiveSpec& spec) {
    spec.validate();
    const int n = spec.resolution;
    const double c = 0.5 * (n - 1);
    const double e = spec.effective_extent();

    ScalarField depth(n, n);
    for (int j = 0; j < n; ++j)
        for (int i = 0; i < n; ++i) {
            const double dx = i - c, dy = j - c;
            double d = 0.0;
            switch (spec.kind) {
                case PrimitiveKind::sphere:
                    if (dx * dx + dy * dy < e * e) d = std::sqrt(e * e - dx * dx - dy * dy);
                    break;
                case PrimitiveKind::cylinder:
                    if (std::abs(dx) < e && std::abs(dy) <= e) d = std::sqrt(e * e - dx * dx);
                    break;
                case PrimitiveKind::cube:
                    if (std::abs(dx) < e && std::abs(dy) <= e) d = e - std::abs(dx);
                    break;
                case PrimitiveKind::pyramid:
                    if (std::abs(dx) < e && std::abs(dy) < e)
                        d = std::min(e - std::abs(dx), e - std::abs(dy));
                    break;
            }
            depth(i, j) = d;
        }

    ScalarField support(n, n);
    for (std::size_t k = 0; k < depth.size(); ++k) support.values()[k] = depth.values()[k] > 0.0 ? 1.0 : 0.0;
    Mask mask(std::move(support));

    const ImageField normals = normals_from_depth(depth);
    const auto& l = spec.light_dir;
    const std::uint64_t seed = spec_seed(spec);
    ImageField image(n, n, 3);
    for (int j = 0; j < n; ++j)
        for (int i = 0; i < n; ++i) {
            if (!mask(i, j)) continue;
            const double shading = std::max(
                0.0, normals(i, j, 0) * l[0] + normals(i, j, 1) * l[1] + normals(i, j, 2) * l[2]);
            std::array<double, 3> rgb{};
            switch (spec.variant) {
                case CueVariant::silhouette:
                    rgb = {0.8, 0.8, 0.8};
                    break;
                case CueVariant::shaded:
                    rgb = {0.9 * shading, 0.9 * shading, 0.9 * shading};
                    break;
                case CueVariant::regular_texture: {
                    const double albedo = ((i / 6 + j / 6) % 2 == 0) ? 0.9 : 0.45;
                    rgb = {albedo * shading, albedo * shading, albedo * shading};
                    break;
                }
                case CueVariant::natural_texture: {
                    // Wood: distorted rings around an off-centre axis.
                    const double x = i - c + 0.7 * e, y = 0.35 * (j - c);
                    const double rings = std::sqrt(x * x + y * y) / 4.0 +
                                         1.5 * value_noise(seed, i, j, 8.0);
                    const double grain = 0.5 + 0.5 * std::sin(2.0 * std::numbers::pi * rings);
                    const double fine = value_noise(seed ^ 0x5bd1e995ULL, i, j, 2.0);
                    const double albedo = 0.45 + 0.3 * grain + 0.1 * fine;
                    rgb = {albedo * shading, 0.72 * albedo * shading, 0.45 * albedo * shading};
                    break;
                }
            }
            for (int ch = 0; ch < 3; ++ch) image(i, j, ch) = std::clamp(rgb[ch], 0.0, 1.0);
        }
    return {std::move(image), std::move(depth), std::move(mask)};
}

ScalarField rescale_to(const ScalarField& pred, const ScalarField& gt, const Mask& mask) {
    if (!pred.same_shape(gt) || !mask.same_shape(gt)) throw InvalidArgument("metrics: shape mismatch");
    const Stats ps = masked_stats(pred, mask);
    const Stats gs = masked_stats(gt, mask);
    if (!(gs.std > 0.0)) throw DegenerateError("metrics: ground truth is constant over the foreground");
    if (!(ps.std > 0.0)) throw DegenerateError("metrics: prediction is constant over the foreground");
    ScalarField out(pred.height(), pred.width());
    for (std::size_t k = 0; k < pred.size(); ++k)
        out.values()[k] = (pred.values()[k] - ps.mean) / ps.std * gs.std + gs.mean;
    return out;
}

double depth_mse(const ScalarField& pred, const ScalarField& gt, const Mask& mask) {
    const ScalarField scaled = rescale_to(pred, gt, mask);
    double sum = 0.0;
    std::size_t n = 0;
    for (std::size_t k = 0; k < gt.size(); ++k) {
        if (mask.field().values()[k] == 0.0) continue;
        const double d = scaled.values()[k] - gt.values()[k];
        sum += d * d;
        ++n;
    }
    return sum / static_cast<double>(n);
}

double normal_error(const ScalarField& pred, const ScalarField& gt, const Mask& mask) {
    if (!pred.same_shape(gt) || !mask.same_shape(gt)) throw InvalidArgument("metrics: shape mismatch");
    const ImageField np = normals_from_depth(pred);
    const ImageField ng = normals_from_depth(gt);
    double sum = 0.0;
    std::size_t n = 0;
    for (int j = 0; j < gt.height(); ++j)
        for (int i = 0; i < gt.width(); ++i) {
            if (!interior_foreground(mask, i, j)) continue;
            double d2 = 0.0;
            for (int ch = 0; ch < 3; ++ch) {
                const double d = np(i, j, ch) - ng(i, j, ch);
                d2 += d * d;
            }
            sum += d2 / 3.0;
            ++n;
        }
    if (n == 0) throw DegenerateError("normal metrics: mask has no interior pixel");
    return sum / static_cast<double>(n);
}

double normal_mse(const ScalarField& pred, const ScalarField& gt, const Mask& mask) {
    return normal_error(rescale_to(pred, gt, mask), gt, mask);
}

}  // namespace svt
