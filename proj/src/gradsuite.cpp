#include "svt/gradsuite.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "svt/conformal.hpp"
#include "svt/render.hpp"
#include "svt/warpfield.hpp"

namespace svt {

namespace {

class Uniform {
public:
    explicit Uniform(std::uint64_t seed) : rng_(seed) {}
    double operator()(double lo, double hi) {
        return lo + (hi - lo) * static_cast<double>(rng_() >> 11) * 0x1.0p-53;
    }
    bool coin() { return (rng_() >> 63) != 0; }

private:
    std::mt19937_64 rng_;
};

double dot(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) s += a[k] * b[k];
    return s;
}

std::vector<double> concat(const ScalarField& a, const ScalarField& b) {
    std::vector<double> out(a.values().begin(), a.values().end());
    out.insert(out.end(), b.values().begin(), b.values().end());
    return out;
}

GradField grad_field(int n, std::span<const double> x) {
    const std::size_t half = x.size() / 2;
    return {ScalarField(n, n, std::vector<double>(x.begin(), x.begin() + static_cast<std::ptrdiff_t>(half))),
            ScalarField(n, n, std::vector<double>(x.begin() + static_cast<std::ptrdiff_t>(half), x.end()))};
}

TexCoords texcoords(int n, std::span<const double> x) {
    GradField g = grad_field(n, x);
    return {std::move(g.u), std::move(g.v)};
}

std::vector<double> random_vector(Uniform& rnd, std::size_t n, double lo, double hi) {
    std::vector<double> v(n);
    for (double& x : v) x = rnd(lo, hi);
    return v;
}

Mask full_mask(int n) { return Mask(ScalarField(n, n, 1.0)); }

}  // namespace

const std::vector<std::string>& grad_case_names() {
    static const std::vector<std::string> names{
        "synthesize",    "integrate", "l1-reg",     "integrability", "sample-bilinear",
        "sample-texture", "blend",    "lscm-uv",    "lscm-depth",    "laplacian-l1"};
    return names;
}

GradCase make_grad_case(const std::string& name, std::uint64_t seed, int n) {
    if (n < 4 || n % 2 != 0) throw InvalidArgument("gradcheck size must be even and >= 4");
    Uniform rnd(seed * 0x9E3779B97F4A7C15ULL + std::hash<std::string>{}(name));
    const std::size_t cells = static_cast<std::size_t>(n) * static_cast<std::size_t>(n);
    GradCase c;
    c.name = name;

    if (name == "synthesize") {
        WarpStack stack = init_identity(n, n, 2);
        for (int level = 0; level < 2; ++level)
            for (ScalarField* f : {&stack.level(level).u, &stack.level(level).v})
                for (double& x : f->values()) x += rnd(-0.8, 0.8);
        // Keep every pre-activation clear of the ReLU kink; the finest level
        // adds to the output unfiltered.
        const GradField pre = synthesize_linear(stack);
        for (std::size_t k = 0; k < cells; ++k) {
            if (std::abs(pre.u.values()[k]) < 0.05) stack.level(0).u.values()[k] += 0.1;
            if (std::abs(pre.v.values()[k]) < 0.05) stack.level(0).v.values()[k] += 0.1;
        }
        const std::vector<double> w = random_vector(rnd, 2 * cells, -1.0, 1.0);
        c.tolerance = 1e-6;
        c.input = stack.pack();
        const WarpStack shape = stack;
        c.op.value = [shape, w](std::span<const double> x) {
            WarpStack s = shape;
            s.unpack(x);
            const GradField g = synthesize(s);
            return dot(concat(g.u, g.v), w);
        };
        c.op.gradient = [shape, w, n](std::span<const double> x) {
            WarpStack s = shape;
            s.unpack(x);
            return synthesize_backward(s, grad_field(n, w)).pack();
        };
    } else if (name == "integrate") {
        // Positive weights keep the suffix sums (the gradient) away from zero.
        const std::vector<double> w = random_vector(rnd, 2 * cells, 0.5, 1.0);
        c.tolerance = 1e-6;
        c.input = random_vector(rnd, 2 * cells, 0.1, 2.0);
        c.op.value = [w, n](std::span<const double> x) {
            const TexCoords t = integrate(grad_field(n, x));
            return dot(concat(t.u, t.v), w);
        };
        c.op.gradient = [w, n](std::span<const double>) {
            const GradField g = integrate_backward(texcoords(n, w));
            return concat(g.u, g.v);
        };
    } else if (name == "l1-reg") {
        c.input = random_vector(rnd, 2 * cells, 0.1, 1.0);
        for (double& x : c.input)
            if (rnd.coin()) x = -x;
        c.op.value = [n](std::span<const double> x) { return l1_reg(grad_field(n, x)).value; };
        c.op.gradient = [n](std::span<const double> x) {
            const GradField g = l1_reg(grad_field(n, x)).grad;
            return concat(g.u, g.v);
        };
    } else if (name == "integrability") {
        c.tolerance = 1e-6;
        c.input = random_vector(rnd, 2 * cells, 0.0, 2.0);
        c.op.value = [n](std::span<const double> x) { return integrability_loss(grad_field(n, x)).value; };
        c.op.gradient = [n](std::span<const double> x) {
            const GradField g = integrability_loss(grad_field(n, x)).grad;
            return concat(g.u, g.v);
        };
    } else if (name == "sample-bilinear" || name == "sample-texture") {
        ImageField texture(n, n, 3);
        for (double& x : texture.values()) x = rnd(0.0, 1.0);
        std::vector<double> uv(2 * cells);
        // Interior coordinates with fractional parts in [0.1, 0.9].
        for (double& x : uv) x = std::floor(rnd(0.0, n - 1.0)) + rnd(0.1, 0.9);
        for (double& x : uv) x = std::min(x, n - 1.1);
        const std::vector<double> w = random_vector(rnd, texture.size(), -1.0, 1.0);
        const ImageField wimg(n, n, 3, w);
        if (name == "sample-bilinear") {
            c.input = uv;
            c.op.value = [texture, w, n](std::span<const double> x) {
                return dot(sample_bilinear(texture, texcoords(n, x)).values(), w);
            };
            c.op.gradient = [texture, wimg, n](std::span<const double> x) {
                const TexCoords g = sample_bilinear_backward(texture, texcoords(n, x), wimg).uv;
                return concat(g.u, g.v);
            };
        } else {
            c.tolerance = 1e-6;
            c.input.assign(texture.values().begin(), texture.values().end());
            const TexCoords at = texcoords(n, uv);
            c.op.value = [at, w, n](std::span<const double> x) {
                const ImageField tex(n, n, 3, std::vector<double>(x.begin(), x.end()));
                return dot(sample_bilinear(tex, at).values(), w);
            };
            c.op.gradient = [at, wimg, n](std::span<const double> x) {
                const ImageField tex(n, n, 3, std::vector<double>(x.begin(), x.end()));
                const ImageField g = sample_bilinear_backward(tex, at, wimg).texture;
                return std::vector<double>(g.values().begin(), g.values().end());
            };
        }
    } else if (name == "blend") {
        ImageField input(n, n, 3);
        for (double& x : input.values()) x = rnd(0.0, 1.0);
        ScalarField m(n, n, 1.0);
        for (int k = 0; k < n; ++k) m(k, 0) = 0.0;  // exercise the background
        const Mask mask(m);
        const std::vector<double> w = random_vector(rnd, input.size(), -1.0, 1.0);
        const ImageField wimg(n, n, 3, w);
        c.tolerance = 1e-6;
        c.input = random_vector(rnd, input.size(), 0.0, 1.0);
        c.op.value = [input, mask, w, n](std::span<const double> x) {
            const ImageField warped(n, n, 3, std::vector<double>(x.begin(), x.end()));
            return dot(blend(input, warped, mask, 0.5).values(), w);
        };
        c.op.gradient = [mask, wimg](std::span<const double>) {
            const ImageField g = blend_backward(mask, 0.5, wimg);
            return std::vector<double>(g.values().begin(), g.values().end());
        };
    } else if (name == "lscm-uv" || name == "lscm-depth") {
        const TriangleSet tris = triangulate(full_mask(n));
        ScalarField depth(n, n);
        for (double& x : depth.values()) x = rnd(-2.0, 2.0);
        TexCoords uv = TexCoords::identity(n, n);
        for (double& x : uv.u.values()) x += rnd(-0.3, 0.3);
        for (double& x : uv.v.values()) x += rnd(-0.3, 0.3);
        if (name == "lscm-uv") {
            c.input = concat(uv.u, uv.v);
            c.op.value = [depth, tris, n](std::span<const double> x) {
                return lscm_energy(depth, texcoords(n, x), tris).energy;
            };
            c.op.gradient = [depth, tris, n](std::span<const double> x) {
                const TexCoords g = lscm_energy(depth, texcoords(n, x), tris, LscmGradients::uv).grad_uv;
                return concat(g.u, g.v);
            };
        } else {
            c.input.assign(depth.values().begin(), depth.values().end());
            c.op.value = [uv, tris, n](std::span<const double> x) {
                return lscm_energy(ScalarField(n, n, std::vector<double>(x.begin(), x.end())), uv, tris).energy;
            };
            c.op.gradient = [uv, tris, n](std::span<const double> x) {
                const ScalarField d(n, n, std::vector<double>(x.begin(), x.end()));
                const ScalarField g = lscm_energy(d, uv, tris, LscmGradients::depth).grad_depth;
                return std::vector<double>(g.values().begin(), g.values().end());
            };
        }
    } else if (name == "laplacian-l1") {
        const Mask mask = full_mask(n);
        ScalarField depth(n, n);
        for (double& x : depth.values()) x = rnd(-2.0, 2.0);
        // Push every interior Laplacian at least 1e-3 away from the kink.
        for (int j = 1; j + 1 < n; ++j)
            for (int i = 1; i + 1 < n; ++i) {
                const double lap = depth(i + 1, j) + depth(i - 1, j) + depth(i, j + 1) + depth(i, j - 1) -
                                   4.0 * depth(i, j);
                if (std::abs(lap) < 1e-2) depth(i, j) += 0.01;
            }
        c.input.assign(depth.values().begin(), depth.values().end());
        c.op.value = [mask, n](std::span<const double> x) {
            return laplacian_l1(ScalarField(n, n, std::vector<double>(x.begin(), x.end())), mask).value;
        };
        c.op.gradient = [mask, n](std::span<const double> x) {
            const ScalarField g =
                laplacian_l1(ScalarField(n, n, std::vector<double>(x.begin(), x.end())), mask).grad;
            return std::vector<double>(g.values().begin(), g.values().end());
        };
    } else {
        throw InvalidArgument("unknown gradcheck op '" + name + "'");
    }
    return c;
}

GradReport run_grad_case(const GradCase& c, std::uint64_t seed) {
    const GradCheckResult r = grad_check(c.op, c.input, 1e-5, seed);
    return {c.name, r.max_relative_error, c.tolerance, r.coordinates};
}

}  // namespace svt
