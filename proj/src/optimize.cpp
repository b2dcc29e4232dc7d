#include "svt/optimize.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <random>
#include <string>

#include "svt/render.hpp"

namespace svt {

namespace {

void check_progress(double loss, std::span<const double> params, const char* stage, int iteration) {
    if (!std::isfinite(loss) || loss > kDivergenceLoss || !all_finite(params))
        throw DivergenceError(std::string(stage) + " diverged at iteration " + std::to_string(iteration) +
                              " (loss " + std::to_string(loss) + ")");
}

std::vector<double> pack(const TexCoords& uv) {
    std::vector<double> flat(uv.u.values().begin(), uv.u.values().end());
    flat.insert(flat.end(), uv.v.values().begin(), uv.v.values().end());
    return flat;
}

void unpack(std::span<const double> flat, TexCoords& uv) {
    const std::size_t n = uv.u.size();
    std::copy(flat.begin(), flat.begin() + static_cast<std::ptrdiff_t>(n), uv.u.values().begin());
    std::copy(flat.begin() + static_cast<std::ptrdiff_t>(n), flat.end(), uv.v.values().begin());
}

void axpy(double a, const ScalarField& x, ScalarField& y) {
    auto yv = y.values();
    const auto xv = x.values();
    for (std::size_t k = 0; k < yv.size(); ++k) yv[k] += a * xv[k];
}

}  // namespace

void adam_step(std::span<double> params, std::span<const double> grads, AdamState& state) {
    if (params.size() != grads.size() || state.m.size() != params.size() || state.v.size() != params.size())
        throw InvalidArgument("adam_step: parameter, gradient and state sizes differ");
    if (!all_finite(grads)) throw DivergenceError("adam_step: non-finite gradient");
    const AdamHyper& h = state.hyper;
    ++state.step;
    const double t = static_cast<double>(state.step);
    const double c1 = 1.0 - std::pow(h.beta1, t);
    const double c2 = 1.0 - std::pow(h.beta2, t);
    for (std::size_t k = 0; k < params.size(); ++k) {
        const double g = grads[k];
        params[k] -= h.lr * h.weight_decay * params[k];
        state.m[k] = h.beta1 * state.m[k] + (1.0 - h.beta1) * g;
        state.v[k] = h.beta2 * state.v[k] + (1.0 - h.beta2) * g * g;
        const double mhat = state.m[k] / c1;
        const double vhat = state.v[k] / c2;
        params[k] -= h.lr * mhat / (std::sqrt(vhat) + h.eps);
    }
}

void StageConfig::validate() const {
    if (iterations < 1) throw InvalidArgument("iterations must be >= 1");
    if (snapshot_interval < 1 || iterations % snapshot_interval != 0)
        throw InvalidArgument("snapshot_interval must divide iterations");
    if (!(lr > 0.0)) throw InvalidArgument("lr must be positive");
    if (!(alpha >= 0.0 && alpha <= 1.0)) throw InvalidArgument("alpha must lie in [0,1]");
    if (!(lambda1 >= 0.0 && lambda2 >= 0.0 && lambda3 >= 0.0 && mu >= 0.0))
        throw InvalidArgument("regularization weights must be non-negative");
    if (scales < 1 || scales > 12) throw InvalidArgument("scales must lie in [1,12]");
    if (!(weight_decay >= 0.0)) throw InvalidArgument("weight_decay must be non-negative");
}

StageConfig StageConfig::stage1_defaults() { return StageConfig{}; }

StageConfig StageConfig::stage2_defaults() {
    StageConfig cfg;
    cfg.iterations = 2000;
    cfg.snapshot_interval = 2000;
    cfg.lr = 1e-3;
    return cfg;
}

StageConfig StageConfig::forward_defaults() {
    StageConfig cfg;
    cfg.iterations = 20000;
    cfg.snapshot_interval = 20000;
    cfg.lr = 1e-3;
    return cfg;
}

double unit_scale(int height, int width) {
    return 2.0 / static_cast<double>(std::max(std::max(height, width) - 1, 1));
}

double pixel_lr(double lr, int height, int width) { return lr / unit_scale(height, width); }

std::vector<Snapshot> stage1(const ImageField& input, const Mask& mask, const ImageField& texture,
                             Guidance& guidance, const StageConfig& cfg, const Stage1Observer& observer,
                             const WarpStack* init) {
    cfg.validate();
    const int h = input.height();
    const int w = input.width();
    if (mask.height() != h || mask.width() != w)
        throw InvalidArgument("stage1: mask and input differ in shape");
    if (texture.channels() != input.channels())
        throw InvalidArgument("stage1: texture and input differ in channel count");

    WarpStack stack = init ? *init : init_identity(h, w, cfg.scales);
    if (stack.scales() != cfg.scales || stack.height() != h || stack.width() != w)
        throw InvalidArgument("stage1: initial stack does not match the configuration");
    std::vector<double> params = stack.pack();
    AdamState adam(params.size(), AdamHyper{pixel_lr(cfg.lr, h, w), 0.9, 0.999, 1e-8, cfg.weight_decay});
    const double s = unit_scale(h, w);

    std::vector<Snapshot> snapshots;
    for (int it = 0; it < cfg.iterations; ++it) {
        const GradField pre = synthesize_linear(stack);
        const GradField grad = relu(pre);
        const TexCoords uv = integrate(grad);
        const ImageField warped = sample_bilinear(texture, uv);
        GuidanceRequest request{blend(input, warped, mask, cfg.alpha),
                                static_cast<std::uint64_t>(it), cfg.seed};
        GuidanceResponse response;
        try {
            response = guidance.gradient(request);
        } catch (const GuidanceError& e) {
            throw GuidanceError(e.kind(), "stage1 iteration " + std::to_string(it) + ": " + e.what());
        }

        const ImageField g_warped = blend_backward(mask, cfg.alpha, response.cotangent);
        const TexCoords g_uv = sample_bilinear_backward(texture, uv, g_warped).uv;
        GradField g_grad = integrate_backward(g_uv);
        // Regularizers are evaluated on normalized gradients s * V.
        const GradFieldLoss l1 = l1_reg(grad);
        const GradFieldLoss integ = integrability_loss(grad);
        const double l1_value = s * l1.value;
        const double int_value = s * s * integ.value;
        axpy(cfg.lambda1 * s, l1.grad.u, g_grad.u);
        axpy(cfg.lambda1 * s, l1.grad.v, g_grad.v);
        axpy(cfg.lambda2 * s * s, integ.grad.u, g_grad.u);
        axpy(cfg.lambda2 * s * s, integ.grad.v, g_grad.v);
        const WarpStack g_stack = synthesize_linear_adjoint(relu_backward(pre, g_grad), cfg.scales);

        if (observer) observer({it, response.diagnostic_loss, l1_value, int_value, &uv});

        const double loss = std::max(response.diagnostic_loss, 0.0) + cfg.lambda1 * l1_value +
                            cfg.lambda2 * int_value;
        check_progress(loss, params, "stage1", it);
        adam_step(params, g_stack.pack(), adam);
        stack.unpack(params);

        if ((it + 1) % cfg.snapshot_interval == 0) {
            Snapshot snap;
            snap.iteration = it + 1;
            snap.texcoords = integrate(synthesize(stack));
            snapshots.push_back(std::move(snap));
        }
    }
    return snapshots;
}

ScalarField stage2(const TexCoords& texcoords, const Mask& mask, const ScalarField& init_depth,
                   const StageConfig& cfg, const Stage2Observer& observer) {
    cfg.validate();
    if (!init_depth.same_shape(texcoords.u) || !mask.same_shape(init_depth))
        throw InvalidArgument("stage2: texcoords, mask and depth differ in shape");
    if (!texcoords.monotone(mask)) throw InvalidArgument("stage2: texture coordinates are folded");
    const TriangleSet tris = triangulate(mask);

    ScalarField depth = init_depth;
    AdamState adam(depth.size(), AdamHyper{pixel_lr(cfg.lr, depth.height(), depth.width()), 0.9, 0.999,
                                           1e-8, cfg.weight_decay});
    const double s = unit_scale(depth.height(), depth.width());
    for (int it = 0; it < cfg.iterations; ++it) {
        // Normalized units: the energy scales with s^2, the Laplacian with s.
        const LscmEvaluation e = lscm_energy(depth, texcoords, tris, LscmGradients::depth);
        const DepthLoss lap = laplacian_l1(depth, mask);
        const double energy = s * s * e.energy;
        const double loss = energy + cfg.lambda3 * s * lap.value;
        if (observer) observer({it, loss, energy});
        check_progress(loss, depth.values(), "stage2", it);
        ScalarField grad = e.grad_depth;
        axpy(cfg.lambda3 / s, lap.grad, grad);
        adam_step(depth.values(), grad.values(), adam);
    }

    const double mean = masked_stats(depth, mask).mean;
    for (int j = 0; j < depth.height(); ++j)
        for (int i = 0; i < depth.width(); ++i) depth(i, j) = mask(i, j) ? depth(i, j) - mean : 0.0;
    return depth;
}

TexCoords forward_lscm(const ScalarField& depth, const Mask& mask, const StageConfig& cfg,
                       const Stage2Observer& observer) {
    cfg.validate();
    if (!mask.same_shape(depth)) throw InvalidArgument("forward_lscm: mask and depth differ in shape");
    if (!all_finite(depth.values())) throw InvalidArgument("forward_lscm: depth is not finite");
    const TriangleSet tris = triangulate(mask);
    const TexCoords identity = TexCoords::identity(depth.height(), depth.width());

    TexCoords uv = identity;
    std::vector<double> params = pack(uv);
    AdamState adam(params.size(), AdamHyper{pixel_lr(cfg.lr, depth.height(), depth.width()), 0.9, 0.999,
                                            1e-8, cfg.weight_decay});
    const double anchor_scale = 1.0 / static_cast<double>(params.size());
    const double s2 = std::pow(unit_scale(depth.height(), depth.width()), 2);
    const std::vector<double> id = pack(identity);
    for (int it = 0; it < cfg.iterations; ++it) {
        const LscmEvaluation e = lscm_energy(depth, uv, tris, LscmGradients::uv);
        std::vector<double> grad = pack(e.grad_uv);
        double anchor = 0.0;
        for (std::size_t k = 0; k < params.size(); ++k) {
            const double d = params[k] - id[k];
            anchor += d * d;
            grad[k] += cfg.mu * 2.0 * d * anchor_scale;
        }
        // Both terms scale with s^2 in normalized units.
        const double loss = s2 * (e.energy + cfg.mu * anchor * anchor_scale);
        if (observer) observer({it, loss, s2 * e.energy});
        check_progress(loss, params, "forward_lscm", it);
        adam_step(params, grad, adam);
        unpack(params, uv);
    }
    return uv;
}

ScalarField spherical_init(const Mask& mask) {
    double ci = 0.0, cj = 0.0;
    std::size_t n = 0;
    for (int j = 0; j < mask.height(); ++j)
        for (int i = 0; i < mask.width(); ++i)
            if (mask(i, j)) {
                ci += i;
                cj += j;
                ++n;
            }
    ci /= static_cast<double>(n);
    cj /= static_cast<double>(n);
    double r2 = 0.0;
    for (int j = 0; j < mask.height(); ++j)
        for (int i = 0; i < mask.width(); ++i)
            if (mask(i, j)) r2 = std::max(r2, (i - ci) * (i - ci) + (j - cj) * (j - cj));
    const double radius = std::sqrt(r2) + 1.0;
    ScalarField depth(mask.height(), mask.width());
    for (int j = 0; j < mask.height(); ++j)
        for (int i = 0; i < mask.width(); ++i)
            if (mask(i, j))
                depth(i, j) = std::sqrt(radius * radius - (i - ci) * (i - ci) - (j - cj) * (j - cj));
    return depth;
}

PipelineResult run_pipeline(const ImageField& input, const Mask& mask, Guidance& guidance,
                            const PipelineConfig& cfg, const Stage1Observer& observer) {
    using clock = std::chrono::steady_clock;
    const ImageField texture = pipeline_texture(input, cfg.checker_cell);
    PipelineResult out;
    const auto t0 = clock::now();
    out.snapshots = stage1(input, mask, texture, guidance, cfg.stage1, observer);
    const auto t1 = clock::now();
    const ScalarField init = spherical_init(mask);
    for (Snapshot& snap : out.snapshots) {
        snap.depth = stage2(snap.texcoords, mask, init, cfg.stage2);
        snap.smoothness = mean_abs_laplacian(snap.depth, mask);
    }
    out.selected = select_snapshot_index(out.snapshots);
    out.stage1_seconds = std::chrono::duration<double>(t1 - t0).count();
    out.stage2_seconds = std::chrono::duration<double>(clock::now() - t1).count();
    return out;
}

ImageField pipeline_texture(const ImageField& input, int checker_cell) {
    return checkerboard(input.height(), input.width(), checker_cell, input.channels());
}

ImageField oracle_target(const ImageField& input, const ScalarField& depth, const Mask& mask,
                         const ImageField& texture, double alpha, const StageConfig& forward) {
    const TexCoords uv = forward_lscm(depth, mask, forward);
    return blend(input, sample_bilinear(texture, uv), mask, alpha);
}

std::size_t select_snapshot_index(std::span<const Snapshot> snapshots) {
    if (snapshots.empty()) throw InvalidArgument("select_snapshot: no snapshots");
    std::size_t best = 0;
    for (std::size_t k = 1; k < snapshots.size(); ++k)
        if (snapshots[k].smoothness < snapshots[best].smoothness) best = k;
    return best;
}

Snapshot select_snapshot(std::span<const Snapshot> snapshots) {
    return snapshots[select_snapshot_index(snapshots)];
}

GradCheckResult grad_check(const DifferentiableOp& op, std::span<const double> input, double step,
                           std::uint64_t seed, std::size_t max_coordinates) {
    std::vector<double> x(input.begin(), input.end());
    const std::vector<double> analytic = op.gradient(x);
    if (analytic.size() != x.size()) throw InvalidArgument("grad_check: gradient size mismatch");

    std::vector<std::size_t> coords(x.size());
    std::iota(coords.begin(), coords.end(), std::size_t{0});
    if (coords.size() > max_coordinates) {
        std::mt19937_64 rng(seed);
        // Partial Fisher-Yates with an explicit modulus keeps the subsample
        // identical across standard libraries.
        for (std::size_t k = 0; k < max_coordinates; ++k) {
            const std::size_t pick = k + static_cast<std::size_t>(rng() % (coords.size() - k));
            std::swap(coords[k], coords[pick]);
        }
        coords.resize(max_coordinates);
    }

    GradCheckResult result;
    for (std::size_t c : coords) {
        const double saved = x[c];
        x[c] = saved + step;
        const double fp = op.value(x);
        x[c] = saved - step;
        const double fm = op.value(x);
        x[c] = saved;
        const double numeric = (fp - fm) / (2.0 * step);
        const double denom = std::max({std::abs(analytic[c]), std::abs(numeric), 1e-8});
        result.max_relative_error = std::max(result.max_relative_error, std::abs(analytic[c] - numeric) / denom);
        ++result.coordinates;
    }
    return result;
}

}  // namespace svt
