// Copyright Contributors to the scaffold-rf Project
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <optional>
#include <span>
#include <vector>

#include "srf/camera.hpp"
#include "srf/image.hpp"
#include "srf/nets.hpp"
#include "srf/rng.hpp"
#include "srf/tape.hpp"
#include "srf/voxel.hpp"

namespace srf {

struct RenderConfig {
  int n_stratified = 64;   // paper setting: 128
  int n_importance = 64;   // paper setting: 128
  // Samples for occupancy-only silhouette projection. Per-sample alpha
  // compositing is calibrated to steps of a couple of voxels; 0 derives the
  // count from the grid resolution.
  int n_silhouette = 0;
  int rays_per_batch = 128;
  Rgb background{1.0, 1.0, 1.0};
  double pdf_floor = 0.01;
  uint64_t rng_seed = 0;
  bool midpoint_sampling = false;  // deterministic quadrature for tests
};

struct QuadratureBatch {
  std::vector<double> t;      // strictly increasing within [t_near, t_far]
  std::vector<double> delta;  // delta_k = t_{k+1}-t_k, last = t_far - t_K
  double t_near = 0.0;
  double t_far = 0.0;
};

struct RadianceSample {
  Rgb c;
  double sigma = 0.0;
};

struct CompositeResult {
  Rgb color;
  double acc_alpha = 0.0;
};

// One uniform draw per equal-width bin of [t_near, t_far]; null rng selects
// bin midpoints.
QuadratureBatch stratified_samples(const Ray& ray, int n, Pcg32* rng);

// Piecewise-constant PDF over the coarse bins with weight max(alpha, floor);
// n inverse-CDF draws merged and sorted with the coarse batch.
QuadratureBatch importance_samples(const Ray& ray, const QuadratureBatch& coarse,
                                   std::span<const double> alpha_at_coarse, int n,
                                   double pdf_floor, Pcg32* rng);

CompositeResult composite(std::span<const RadianceSample> samples, const QuadratureBatch& batch,
                          const Rgb& background);

// ---- batched differentiable rendering ----

// Scaffold handle for rendering. grid == nullptr realizes the no-scaffold
// variant: alpha pinned to 1, bounds the unit box.
struct GraphScaffold {
  Var grid;  // flat occupancy values, layout x + nx*(y + ny*z)
  GridMeta meta;

  static GraphScaffold none() { return {nullptr, GridMeta{0, 0, 0, unit_box()}}; }
  static GraphScaffold from_grid_const(const VoxelGrid& g) {
    return {make_leaf({g.nx * g.ny * g.nz}, g.values, false), GridMeta{g.nx, g.ny, g.nz, g.bounds}};
  }
};

// Frozen quadrature for a batch of rays. Sample positions are constants in
// the backward pass; gradients flow through ray origins/directions only.
struct RayBatchPlan {
  std::vector<Ray> rays;       // bounds set for hits; misses have empty segments
  RaySegments seg;
  std::vector<double> t;       // all sample positions
  std::vector<int> ray_index;  // per sample
  size_t sample_count() const { return t.size(); }
};

// ray_streams gives the RNG stream id per ray (typically the pixel index) so
// quadrature draws are independent of batching; empty means the ray's
// position in the batch.
RayBatchPlan plan_rays(std::span<const Ray> rays, const GraphScaffold& scaffold,
                       const RenderConfig& cfg, Pcg32* rng,
                       std::span<const uint64_t> ray_streams = {});

struct RaysVars {
  Var origins;  // [R,3]
  Var dirs;     // [R,3] unit rows
};
RaysVars rays_to_vars(Tape&, std::span<const Ray> rays);

// Differentiable camera: R = exp(skew(omega)) * R0, t = t0 + tau.
struct CameraDelta {
  Var omega;  // [3]
  Var tau;    // [3]
};
Camera apply_camera_delta(const Camera& base, const Vec3& omega, const Vec3& tau);
RaysVars camera_rays_graph(Tape&, const Camera& base, const CameraDelta& delta,
                           std::span<const std::pair<double, double>> pixels);

struct RenderGraphResult {
  Var colors;  // [R,3]
  Var acc;     // [R]
};
RenderGraphResult render_rays_graph(Tape&, const AppearanceNetwork& appearance,
                                    const GraphScaffold& scaffold, const Var& phi,
                                    const RayBatchPlan& plan, const RaysVars& rays,
                                    const Rgb& background);

// ---- whole-image wrappers ----

Rgb render_pixel(const AppearanceNetwork& appearance, const VoxelGrid* scaffold, const Var& phi,
                 const Camera& camera, double px, double py, const RenderConfig& cfg, Pcg32* rng);

Image render_image(const AppearanceNetwork& appearance, const VoxelGrid* scaffold, const Var& phi,
                   const Camera& camera, const RenderConfig& cfg);

// Occupancy-only compositing of the grid along stratified samples.
Image project_silhouette(const VoxelGrid& grid, const Camera& camera, const RenderConfig& cfg);
// Differentiable version over all pixels of the camera.
Var project_silhouette_graph(Tape&, const Var& grid, const GridMeta& meta, const Camera& camera,
                             const RenderConfig& cfg);

}  // namespace srf
