// Copyright Contributors to the scaffold-rf Project
// SPDX-License-Identifier: Apache-2.0
#include "srf/renderer.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "srf/threading.hpp"

namespace srf {

namespace {

double flat_trilinear(std::span<const double> values, const GridMeta& meta, const Vec3& p) {
  const TrilinearStencil st = trilinear_stencil(meta.nx, meta.ny, meta.nz, meta.bounds, p);
  if (!st.inside) return 0.0;
  double v = 0.0;
  for (int k = 0; k < 8; ++k)
    if (st.corner[k] >= 0) v += st.weight[k] * values[st.corner[k]];
  return v;
}

void finalize_deltas(QuadratureBatch& batch) {
  const size_t n = batch.t.size();
  batch.delta.resize(n);
  for (size_t k = 0; k + 1 < n; ++k) batch.delta[k] = batch.t[k + 1] - batch.t[k];
  if (n > 0) batch.delta[n - 1] = batch.t_far - batch.t[n - 1];
}

}  // namespace

QuadratureBatch stratified_samples(const Ray& ray, int n, Pcg32* rng) {
  if (n < 1) throw std::invalid_argument("stratified_samples: n must be >= 1");
  QuadratureBatch batch;
  batch.t_near = ray.t_near;
  batch.t_far = ray.t_far;
  batch.t.resize(n);
  const double w = (ray.t_far - ray.t_near) / n;
  for (int k = 0; k < n; ++k) {
    const double u = rng ? rng->next_double() : 0.5;
    batch.t[k] = ray.t_near + (k + u) * w;
  }
  finalize_deltas(batch);
  return batch;
}

QuadratureBatch importance_samples(const Ray& ray, const QuadratureBatch& coarse,
                                   std::span<const double> alpha_at_coarse, int n,
                                   double pdf_floor, Pcg32* rng) {
  const int nc = static_cast<int>(coarse.t.size());
  if (static_cast<int>(alpha_at_coarse.size()) != nc)
    throw std::invalid_argument("importance_samples: one alpha per coarse sample required");

  QuadratureBatch out;
  out.t_near = coarse.t_near;
  out.t_far = coarse.t_far;
  out.t = coarse.t;
  if (n > 0) {
    // piecewise-constant PDF over the equal-width coarse bins
    std::vector<double> cum(nc + 1, 0.0);
    for (int k = 0; k < nc; ++k) cum[k + 1] = cum[k] + std::max(alpha_at_coarse[k], pdf_floor);
    const double total = cum[nc];
    const double w = (coarse.t_far - coarse.t_near) / nc;
    for (int j = 0; j < n; ++j) {
      double tj;
      if (total <= 0.0) {  // fully degenerate PDF: fall back to uniform
        tj = coarse.t_near + (rng ? rng->next_double() : (j + 0.5) / n) * (coarse.t_far - coarse.t_near);
      } else {
        const double u = (rng ? rng->next_double() : (j + 0.5) / n) * total;
        const auto it = std::upper_bound(cum.begin(), cum.end(), u);
        int bin = static_cast<int>(it - cum.begin()) - 1;
        bin = std::clamp(bin, 0, nc - 1);
        const double seg = cum[bin + 1] - cum[bin];
        const double frac = seg > 0.0 ? (u - cum[bin]) / seg : 0.5;
        tj = coarse.t_near + (bin + frac) * w;
      }
      out.t.push_back(std::min(tj, coarse.t_far));
    }
    std::sort(out.t.begin(), out.t.end());
    // keep strictly increasing: nudge exact duplicates forward
    for (size_t k = 1; k < out.t.size(); ++k)
      if (out.t[k] <= out.t[k - 1])
        out.t[k] = std::nextafter(out.t[k - 1], std::numeric_limits<double>::infinity());
  }
  finalize_deltas(out);
  return out;
}

CompositeResult composite(std::span<const RadianceSample> samples, const QuadratureBatch& batch,
                          const Rgb& background) {
  if (samples.size() != batch.t.size())
    throw std::invalid_argument("composite: samples/quadrature length mismatch");
  Tape tape;
  tape.recording = false;
  const int n = static_cast<int>(samples.size());
  std::vector<double> sig(n), rgb(3 * n);
  for (int k = 0; k < n; ++k) {
    sig[k] = samples[k].sigma;
    rgb[3 * k] = samples[k].c.x;
    rgb[3 * k + 1] = samples[k].c.y;
    rgb[3 * k + 2] = samples[k].c.z;
  }
  RaySegments seg;
  seg.n_rays = 1;
  seg.offset = {0, n};
  seg.delta = batch.delta;
  const auto vars = composite_rays(tape, make_leaf({n}, std::move(sig), false),
                                   make_leaf({n, 3}, std::move(rgb), false), seg, background);
  return {{vars.color->val[0], vars.color->val[1], vars.color->val[2]}, vars.acc->val[0]};
}

// ---- batched path ----

RayBatchPlan plan_rays(std::span<const Ray> rays, const GraphScaffold& scaffold,
                       const RenderConfig& cfg, Pcg32* rng,
                       std::span<const uint64_t> ray_streams) {
  RayBatchPlan plan;
  plan.rays.assign(rays.begin(), rays.end());
  plan.seg.n_rays = static_cast<int>(rays.size());
  plan.seg.offset.assign(rays.size() + 1, 0);

  const Aabb bounds = scaffold.meta.nx > 0 ? scaffold.meta.bounds : unit_box();
  for (size_t r = 0; r < rays.size(); ++r) {
    Ray& ray = plan.rays[r];
    const auto hit = aabb_intersect(ray, bounds);
    plan.seg.offset[r] = static_cast<int>(plan.t.size());
    if (!hit) continue;
    ray.t_near = hit->first;
    ray.t_far = hit->second;
    const uint64_t stream = ray_streams.empty() ? static_cast<uint64_t>(r) : ray_streams[r];
    Pcg32 ray_rng = rng ? rng->fork(stream) : Pcg32(0);
    Pcg32* rp = (rng && !cfg.midpoint_sampling) ? &ray_rng : nullptr;
    QuadratureBatch batch = stratified_samples(ray, cfg.n_stratified, rp);
    if (cfg.n_importance > 0) {
      std::vector<double> alpha(batch.t.size(), 1.0);
      if (scaffold.grid)
        for (size_t k = 0; k < batch.t.size(); ++k)
          alpha[k] = flat_trilinear(scaffold.grid->val, scaffold.meta, ray.at(batch.t[k]));
      batch = importance_samples(ray, batch, alpha, cfg.n_importance, cfg.pdf_floor, rp);
    }
    for (size_t k = 0; k < batch.t.size(); ++k) {
      plan.t.push_back(batch.t[k]);
      plan.seg.delta.push_back(batch.delta[k]);
      plan.ray_index.push_back(static_cast<int>(r));
    }
  }
  plan.seg.offset[rays.size()] = static_cast<int>(plan.t.size());
  return plan;
}

RaysVars rays_to_vars(Tape& tape, std::span<const Ray> rays) {
  std::vector<double> o, d;
  o.reserve(rays.size() * 3);
  d.reserve(rays.size() * 3);
  for (const Ray& r : rays) {
    o.push_back(r.origin.x);
    o.push_back(r.origin.y);
    o.push_back(r.origin.z);
    d.push_back(r.direction.x);
    d.push_back(r.direction.y);
    d.push_back(r.direction.z);
  }
  const int n = static_cast<int>(rays.size());
  return {constant(tape, {n, 3}, std::move(o)), constant(tape, {n, 3}, std::move(d))};
}

Camera apply_camera_delta(const Camera& base, const Vec3& omega, const Vec3& tau) {
  Camera out = base;
  out.rotation = Mat3::exp(omega) * base.rotation;
  out.translation = base.translation + tau;
  return out;
}

RaysVars camera_rays_graph(Tape& tape, const Camera& base, const CameraDelta& delta,
                           std::span<const std::pair<double, double>> pixels) {
  // rotation: R = (I + a K + b K^2) R0 with K = skew(omega),
  // a = sin(th)/th, b = (1-cos(th))/th^2, series near th = 0
  const Var wx = slice_scalar(tape, delta.omega, 0);
  const Var wy = slice_scalar(tape, delta.omega, 1);
  const Var wz = slice_scalar(tape, delta.omega, 2);
  const Var s = sum(tape, mul(tape, delta.omega, delta.omega));  // th^2
  Var a, b;
  if (s->val[0] < 1e-8) {
    const Var s2 = mul(tape, s, s);
    a = add_scalar(tape, add(tape, scale(tape, s, -1.0 / 6.0), scale(tape, s2, 1.0 / 120.0)), 1.0);
    b = add_scalar(tape, add(tape, scale(tape, s, -1.0 / 24.0), scale(tape, s2, 1.0 / 720.0)), 0.5);
  } else {
    const Var th = sqrt_ew(tape, s);
    a = div(tape, sin_ew(tape, th), th);
    b = div(tape, add_scalar(tape, scale(tape, cos_ew(tape, th), -1.0), 1.0), s);
  }
  const Var zero = constant_scalar(tape, 0.0);
  const Var k = pack_scalars(
      tape, {zero, scale(tape, wz, -1.0), wy, wz, zero, scale(tape, wx, -1.0),
             scale(tape, wy, -1.0), wx, zero});
  const Var k2 = mat3_mul(tape, k, k);
  const Var eye = constant(tape, {9}, {1, 0, 0, 0, 1, 0, 0, 0, 1});
  const Var e = add(tape, eye, add(tape, scale_by(tape, k, a), scale_by(tape, k2, b)));
  const Var r0 = constant(tape, {9}, {base.rotation.m.begin(), base.rotation.m.end()});
  const Var rot = mat3_mul(tape, e, r0);

  const Var t0 = constant(tape, {3}, {base.translation.x, base.translation.y, base.translation.z});
  const Var t_total = reshape(tape, add(tape, delta.tau, t0), {1, 3});
  const Var origin_row = scale(tape, rows_mat3(tape, t_total, rot, /*transpose_a=*/true), -1.0);

  const int n = static_cast<int>(pixels.size());
  std::vector<double> cam_dirs;
  cam_dirs.reserve(3 * n);
  for (const auto& [px, py] : pixels) {
    cam_dirs.push_back((px - base.cx) / base.fx);
    cam_dirs.push_back((py - base.cy) / base.fy);
    cam_dirs.push_back(1.0);
  }
  const Var dirs_cam = constant(tape, {n, 3}, std::move(cam_dirs));
  const Var dirs = normalize_rows(tape, rows_mat3(tape, dirs_cam, rot, /*transpose_a=*/true));
  const Var origins = gather_rows(tape, origin_row, std::vector<int>(n, 0));
  return {origins, dirs};
}

RenderGraphResult render_rays_graph(Tape& tape, const AppearanceNetwork& appearance,
                                    const GraphScaffold& scaffold, const Var& phi,
                                    const RayBatchPlan& plan, const RaysVars& rays,
                                    const Rgb& background) {
  const int n = static_cast<int>(plan.sample_count());
  RenderGraphResult out;
  if (n == 0) {
    // every ray missed: background color, zero coverage
    const int nr = plan.seg.n_rays;
    std::vector<double> bg(3 * static_cast<size_t>(nr));
    for (int r = 0; r < nr; ++r) {
      bg[3 * r] = background.x;
      bg[3 * r + 1] = background.y;
      bg[3 * r + 2] = background.z;
    }
    out.colors = constant(tape, {nr, 3}, std::move(bg));
    out.acc = constant(tape, {nr}, std::vector<double>(nr, 0.0));
    return out;
  }

  const Var sample_dirs = gather_rows(tape, rays.dirs, plan.ray_index);
  const Var points = add(tape, gather_rows(tape, rays.origins, plan.ray_index),
                         scale_rows(tape, sample_dirs, plan.t));
  Var alpha;
  if (scaffold.grid)
    alpha = trilinear(tape, scaffold.grid, scaffold.meta, points);
  else
    alpha = constant(tape, {n}, std::vector<double>(n, 1.0));

  const auto radiance = appearance.eval_graph(tape, points, sample_dirs, alpha, phi);
  const auto comp = composite_rays(tape, radiance.sigma, radiance.rgb, plan.seg, background);
  return {comp.color, comp.acc};
}

// ---- whole-image wrappers ----

namespace {

Rgb render_ray_batch_into(const AppearanceNetwork& appearance, const GraphScaffold& scaffold,
                          const Var& phi, std::span<const Ray> rays, const RenderConfig& cfg,
                          Pcg32* rng, Image* target, std::span<const int> pixel_at,
                          std::span<const uint64_t> ray_streams = {}) {
  Tape tape;
  tape.recording = false;
  const RayBatchPlan plan = plan_rays(rays, scaffold, cfg, rng, ray_streams);
  const RaysVars vars = rays_to_vars(tape, plan.rays);
  const auto result = render_rays_graph(tape, appearance, scaffold, phi, plan, vars,
                                        cfg.background);
  Rgb last;
  for (size_t r = 0; r < rays.size(); ++r) {
    last = {result.colors->val[3 * r], result.colors->val[3 * r + 1],
            result.colors->val[3 * r + 2]};
    if (target) {
      const int pix = pixel_at[r];
      target->set_pixel(pix / target->width, pix % target->width, last);
    }
  }
  return last;
}

}  // namespace

Rgb render_pixel(const AppearanceNetwork& appearance, const VoxelGrid* scaffold, const Var& phi,
                 const Camera& camera, double px, double py, const RenderConfig& cfg, Pcg32* rng) {
  const GraphScaffold gs =
      scaffold ? GraphScaffold::from_grid_const(*scaffold) : GraphScaffold::none();
  const Ray ray = camera_ray(camera, px, py);
  Pcg32 local = rng ? *rng : Pcg32(cfg.rng_seed);
  return render_ray_batch_into(appearance, gs, phi, std::span<const Ray>(&ray, 1), cfg,
                               cfg.midpoint_sampling ? nullptr : &local, nullptr, {});
}

Image render_image(const AppearanceNetwork& appearance, const VoxelGrid* scaffold, const Var& phi,
                   const Camera& camera, const RenderConfig& cfg) {
  const GraphScaffold gs =
      scaffold ? GraphScaffold::from_grid_const(*scaffold) : GraphScaffold::none();
  Image img(camera.width, camera.height, 3);
  const int total = camera.width * camera.height;
  const int batch = std::max(1, cfg.rays_per_batch);
  Pcg32 base_rng(cfg.rng_seed);
  for (int start = 0; start < total; start += batch) {
    const int count = std::min(batch, total - start);
    std::vector<Ray> rays(count);
    std::vector<int> pixel_at(count);
    std::vector<uint64_t> streams(count);
    for (int i = 0; i < count; ++i) {
      const int pix = start + i;
      const int y = pix / camera.width;
      const int x = pix % camera.width;
      rays[i] = camera_ray(camera, x + 0.5, y + 0.5);
      pixel_at[i] = pix;
      streams[i] = static_cast<uint64_t>(pix);  // per-pixel stream, batch-size independent
    }
    render_ray_batch_into(appearance, gs, phi, rays, cfg,
                          cfg.midpoint_sampling ? nullptr : &base_rng, &img, pixel_at, streams);
  }
  return img;
}

Var project_silhouette_graph(Tape& tape, const Var& grid, const GridMeta& meta,
                             const Camera& camera, const RenderConfig& cfg) {
  const int n_samples =
      cfg.n_silhouette > 0 ? cfg.n_silhouette : std::max(8, (meta.nx + meta.ny + meta.nz) / 4);
  const int total = camera.width * camera.height;
  std::vector<Ray> rays(total);
  for (int pix = 0; pix < total; ++pix)
    rays[pix] = camera_ray(camera, pix % camera.width + 0.5, pix / camera.width + 0.5);

  // stratified samples only, against the grid bounds
  RaySegments seg;
  seg.n_rays = total;
  seg.offset.assign(total + 1, 0);
  std::vector<double> t;
  std::vector<int> ray_index;
  Pcg32 rng(cfg.rng_seed);
  for (int r = 0; r < total; ++r) {
    seg.offset[r] = static_cast<int>(t.size());
    const auto hit = aabb_intersect(rays[r], meta.bounds);
    if (!hit) continue;
    rays[r].t_near = hit->first;
    rays[r].t_far = hit->second;
    Pcg32 ray_rng = rng.fork(r);
    QuadratureBatch batch =
        stratified_samples(rays[r], n_samples, cfg.midpoint_sampling ? nullptr : &ray_rng);
    for (size_t k = 0; k < batch.t.size(); ++k) {
      t.push_back(batch.t[k]);
      seg.delta.push_back(batch.delta[k]);
      ray_index.push_back(r);
    }
  }
  seg.offset[total] = static_cast<int>(t.size());

  std::vector<double> pts(t.size() * 3);
  for (size_t k = 0; k < t.size(); ++k) {
    const Vec3 p = rays[ray_index[k]].at(t[k]);
    pts[3 * k] = p.x;
    pts[3 * k + 1] = p.y;
    pts[3 * k + 2] = p.z;
  }
  const Var points = constant(tape, {static_cast<int>(t.size()), 3}, std::move(pts));
  const Var alpha = trilinear(tape, grid, meta, points);
  return silhouette_rays(tape, alpha, seg);
}

Image project_silhouette(const VoxelGrid& grid, const Camera& camera, const RenderConfig& cfg) {
  Tape tape;
  tape.recording = false;
  const Var grid_var = make_leaf({grid.nx * grid.ny * grid.nz}, grid.values, false);
  const GridMeta meta{grid.nx, grid.ny, grid.nz, grid.bounds};
  const Var acc = project_silhouette_graph(tape, grid_var, meta, camera, cfg);
  Image mask(camera.width, camera.height, 1);
  mask.data = acc->val;
  return mask;
}

}  // namespace srf
