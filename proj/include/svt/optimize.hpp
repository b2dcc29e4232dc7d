#pragma once

// Optimizers and the two optimization stages.
//
// Stage I deforms the virtual texture: texture coordinates are synthesized
// from a WarpStack, the warped checkerboard is blended over the input and a
// Guidance scores it. Stage II recovers depth from frozen texture
// coordinates by minimizing the conformal energy plus a Laplacian penalty.

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "svt/conformal.hpp"
#include "svt/guidance.hpp"
#include "svt/warpfield.hpp"

namespace svt {

struct AdamHyper {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 0.0;
};

struct AdamState {
    AdamHyper hyper;
    std::vector<double> m;
    std::vector<double> v;
    std::int64_t step = 0;

    AdamState() = default;
    AdamState(std::size_t n, AdamHyper h) : hyper(h), m(n, 0.0), v(n, 0.0) {}
};

/// One AdamW update (decoupled weight decay, bias-corrected moments).
/// Throws DivergenceError on a non-finite gradient.
void adam_step(std::span<double> params, std::span<const double> grads, AdamState& state);

/// Hyperparameters of one optimization stage. Learning rates and loss
/// weights refer to normalized image units (the image half-extent is 1);
/// the stages work in pixels and convert with unit_scale().
struct StageConfig {
    int iterations = 10000;
    int snapshot_interval = 1000;
    double lr = 5e-5;
    double lambda1 = 10.0;
    double lambda2 = 1e4;
    double lambda3 = 0.01;
    double alpha = 0.5;
    double mu = 1e-3;
    int scales = 4;
    std::uint64_t seed = 0;
    double weight_decay = 0.0;

    /// Throws InvalidArgument on inconsistent values.
    void validate() const;

    static StageConfig stage1_defaults();
    static StageConfig stage2_defaults();
    static StageConfig forward_defaults();
};

/// Length of one pixel in normalized units, 2 / (max(H, W) - 1).
double unit_scale(int height, int width);

/// Converts a normalized learning rate into pixel units for an H x W grid.
double pixel_lr(double lr, int height, int width);

struct Snapshot {
    int iteration = 0;
    TexCoords texcoords;
    ScalarField depth;         ///< empty until Stage II ran
    double smoothness = 0.0;   ///< mean |Laplacian(D)| over the foreground
};

struct Stage1Progress {
    int iteration = 0;
    double diagnostic_loss = 0.0;
    double l1 = 0.0;              ///< normalized units
    double integrability = 0.0;   ///< normalized units
    const TexCoords* texcoords = nullptr;  ///< coordinates rendered this iteration
};

struct Stage2Progress {
    int iteration = 0;
    double loss = 0.0;  ///< conformal energy + weighted Laplacian, normalized units
    double energy = 0.0;
};

using Stage1Observer = std::function<void(const Stage1Progress&)>;
using Stage2Observer = std::function<void(const Stage2Progress&)>;

/// Divergence guard threshold on any stage loss.
inline constexpr double kDivergenceLoss = 1e6;

/// Stage I. Starts from `init` (identity when null) and returns one snapshot
/// (texture coordinates only) every `snapshot_interval` iterations. Guidance failures are rethrown with the
/// failing iteration in the message.
std::vector<Snapshot> stage1(const ImageField& input, const Mask& mask, const ImageField& texture,
                             Guidance& guidance, const StageConfig& cfg,
                             const Stage1Observer& observer = {}, const WarpStack* init = nullptr);

/// Stage II. Returns the optimized depth shifted to zero foreground mean,
/// background set to zero.
ScalarField stage2(const TexCoords& texcoords, const Mask& mask, const ScalarField& init_depth,
                   const StageConfig& cfg, const Stage2Observer& observer = {});

/// Texture coordinates of a given depth: minimizes the conformal energy plus
/// mu * mean((W - identity)^2) starting from the identity.
TexCoords forward_lscm(const ScalarField& depth, const Mask& mask, const StageConfig& cfg,
                       const Stage2Observer& observer = {});

/// Hemisphere over the mask: centred at the foreground centroid with radius
/// one pixel beyond the farthest foreground pixel. Background is zero.
ScalarField spherical_init(const Mask& mask);

/// Index of the snapshot with the smallest smoothness; earliest on ties.
/// Throws InvalidArgument on an empty list.
std::size_t select_snapshot_index(std::span<const Snapshot> snapshots);
Snapshot select_snapshot(std::span<const Snapshot> snapshots);

/// Full pipeline settings: Stage I, the per-snapshot Stage II and the
/// checkerboard cell size of the virtual texture.
struct PipelineConfig {
    StageConfig stage1 = StageConfig::stage1_defaults();
    StageConfig stage2 = StageConfig::stage2_defaults();
    int checker_cell = 8;
};

struct PipelineResult {
    std::vector<Snapshot> snapshots;  ///< depth and smoothness filled in
    std::size_t selected = 0;
    double stage1_seconds = 0.0;
    double stage2_seconds = 0.0;

    const Snapshot& best() const { return snapshots[selected]; }
};

/// Stage I, a fresh Stage II from the spherical init for every snapshot,
/// then select_snapshot().
PipelineResult run_pipeline(const ImageField& input, const Mask& mask, Guidance& guidance,
                            const PipelineConfig& cfg, const Stage1Observer& observer = {});

/// The virtual texture of the pipeline: a checkerboard with the input's
/// channel count.
ImageField pipeline_texture(const ImageField& input, int checker_cell);

/// Oracle target for a known depth: the input blended with the texture
/// warped by forward_lscm(depth).
ImageField oracle_target(const ImageField& input, const ScalarField& depth, const Mask& mask,
                         const ImageField& texture, double alpha,
                         const StageConfig& forward = StageConfig::forward_defaults());

/// A scalar function with an analytic gradient, for finite-difference checks.
struct DifferentiableOp {
    std::function<double(std::span<const double>)> value;
    std::function<std::vector<double>(std::span<const double>)> gradient;
};

struct GradCheckResult {
    double max_relative_error = 0.0;
    std::size_t coordinates = 0;
};

/// Central differences on a seeded random subsample of at most
/// `max_coordinates` inputs. Relative error uses the denominator
/// max(|analytic|, |numeric|, 1e-8).
GradCheckResult grad_check(const DifferentiableOp& op, std::span<const double> input,
                           double step = 1e-5, std::uint64_t seed = 0,
                           std::size_t max_coordinates = 256);

}  // namespace svt
