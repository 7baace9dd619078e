// Copyright Contributors to the scaffold-rf Project
// SPDX-License-Identifier: Apache-2.0
#include "srf/inference.hpp"

#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "json.hpp"
#include "srf/adam.hpp"
#include "srf/binary_io.hpp"

namespace srf {

const char* variant_name(Variant v) {
  switch (v) {
    case Variant::ConditionalNeRF: return "conditional-nerf";
    case Variant::ShapeFromNR: return "shape-from-nr";
    case Variant::ShapeFromMask: return "shape-from-mask";
    case Variant::ShapeFromGT: return "shape-from-gt";
  }
  return "shape-from-nr";
}

Variant variant_from_name(const std::string& name) {
  if (name == "v1" || name == "conditional-nerf") return Variant::ConditionalNeRF;
  if (name == "v2" || name == "shape-from-nr") return Variant::ShapeFromNR;
  if (name == "v3" || name == "shape-from-mask") return Variant::ShapeFromMask;
  if (name == "v4" || name == "shape-from-gt") return Variant::ShapeFromGT;
  throw std::invalid_argument("unknown variant: " + name);
}

FitState make_fit_state(const Model& checkpoint, const Camera& camera, uint64_t seed) {
  FitState state;
  state.shape = checkpoint.shape.clone();
  state.appearance = checkpoint.appearance.clone();
  Pcg32 rng(hash_combine(seed, 0xf17));
  state.theta = make_latent(state.shape.cfg.latent_dim, rng);
  state.phi = make_latent(state.appearance.cfg.latent_dim, rng);
  state.camera = camera;
  return state;
}

Camera mirrored_camera(const Camera& camera) {
  // Conjugation by the x-reflection: R' = D R M with D (camera space) and M
  // (world space) both diag(-1,1,1); valid rotation since det = +1. Exact for
  // a centered principal point.
  Mat3 d = Mat3::identity();
  d(0, 0) = -1.0;
  Camera out = camera;
  out.rotation = d * camera.rotation * d;  // M equals D numerically
  out.translation = d * camera.translation;
  return out;
}

std::vector<FitTarget> make_targets(const Image& image, const Camera& camera, bool symmetry) {
  std::vector<FitTarget> targets;
  targets.push_back({image, camera});
  if (symmetry) targets.push_back({flip_horizontal(image), mirrored_camera(camera)});
  return targets;
}

Image mask_from_background(const Image& image, const Rgb& background, double tol) {
  Image mask(image.width, image.height, 1);
  for (int y = 0; y < image.height; ++y)
    for (int x = 0; x < image.width; ++x) {
      const Rgb c = image.pixel(y, x);
      const Rgb d{std::fabs(c.x - background.x), std::fabs(c.y - background.y),
                  std::fabs(c.z - background.z)};
      mask.at(y, x, 0) = d.max_coeff() > tol ? 1.0 : 0.0;
    }
  return mask;
}

namespace {

struct TargetBatch {
  std::vector<Ray> rays;
  std::vector<uint64_t> streams;
  std::vector<double> colors;  // 3 per ray
};

TargetBatch sample_target_batch(const FitTarget& target, int n_rays, Pcg32& rng) {
  TargetBatch batch;
  batch.rays.reserve(n_rays);
  batch.streams.reserve(n_rays);
  batch.colors.reserve(3 * n_rays);
  const Image& img = target.image;
  for (int r = 0; r < n_rays; ++r) {
    const int pix = static_cast<int>(rng.next_below(static_cast<uint32_t>(img.pixel_count())));
    const int y = pix / img.width;
    const int x = pix % img.width;
    batch.rays.push_back(camera_ray(target.camera, x + 0.5, y + 0.5));
    batch.streams.push_back(static_cast<uint64_t>(pix));
    const Rgb c = img.pixel(y, x);
    batch.colors.push_back(c.x);
    batch.colors.push_back(c.y);
    batch.colors.push_back(c.z);
  }
  return batch;
}

// Photometric term over all targets: mean of the per-ray squared error over
// the union of sampled rays.
Var photometric_over_targets(Tape& tape, const AppearanceNetwork& appearance,
                             const GraphScaffold& scaffold, const Var& phi,
                             const std::vector<FitTarget>& targets, int rays_per_step,
                             const RenderConfig& render_cfg, Pcg32& rng) {
  const int per_target = std::max(1, rays_per_step / static_cast<int>(targets.size()));
  const int total = per_target * static_cast<int>(targets.size());
  Var loss;
  for (const FitTarget& target : targets) {
    TargetBatch batch = sample_target_batch(target, per_target, rng);
    Pcg32 quad_rng = rng.fork(0x9a7);
    const RayBatchPlan plan =
        plan_rays(batch.rays, scaffold, render_cfg,
                  render_cfg.midpoint_sampling ? nullptr : &quad_rng, batch.streams);
    const RaysVars ray_vars = rays_to_vars(tape, plan.rays);
    const auto rendered = render_rays_graph(tape, appearance, scaffold, phi, plan, ray_vars,
                                            render_cfg.background);
    Var term = photometric_graph(tape, rendered.colors, std::move(batch.colors));
    term = scale(tape, term, static_cast<double>(per_target) / total);
    loss = loss ? add(tape, loss, term) : term;
  }
  return loss;
}

[[noreturn]] void abort_non_finite(const char* where, int step, double loss) {
  throw std::runtime_error(std::string(where) + ": non-finite loss at step " +
                           std::to_string(step) + " (" + std::to_string(loss) + ")");
}

}  // namespace

void stage1_fit(FitState& state, const std::vector<FitTarget>& targets, FitMode mode,
                int iterations, const FitConfig& cfg, const RenderConfig& render_cfg,
                const LossConfig& loss_cfg) {
  state.appearance.set_trainable(false);
  state.shape.set_trainable(mode == FitMode::CodePlusNetwork);
  state.theta->requires_grad = true;
  state.theta->ensure_grad();
  state.phi->requires_grad = true;
  state.phi->ensure_grad();

  const AdamConfig latent_adam{cfg.lr_latent};
  AdamOptimizer latent_opt(latent_adam);
  latent_opt.add_param(state.theta);
  latent_opt.add_param(state.phi);
  AdamOptimizer net_opt(AdamConfig{cfg.lr});
  if (mode == FitMode::CodePlusNetwork) net_opt.add_params(state.shape.params());

  Pcg32 master(hash_combine(cfg.seed, 0x57a6e1));
  const GridMeta meta = state.shape.grid_meta();
  for (int step = 0; step < iterations; ++step) {
    Pcg32 rng = master.fork(step);
    Tape tape;
    latent_opt.zero_grad();
    net_opt.zero_grad();

    const Var grid = state.shape.decode_graph(tape, state.theta);
    const GraphScaffold scaffold{grid, meta};
    Var loss = photometric_over_targets(tape, state.appearance, scaffold, state.phi, targets,
                                        cfg.rays_per_step, render_cfg, rng);
    if (loss_cfg.w_sym_inference > 0.0)
      loss = add(tape, loss,
                 scale(tape, symmetry_penalty_graph(tape, grid, meta), loss_cfg.w_sym_inference));
    const double loss_val = loss->val[0];
    if (!std::isfinite(loss_val)) abort_non_finite("stage1_fit", step, loss_val);
    tape.backward(loss);
    latent_opt.step();
    if (mode == FitMode::CodePlusNetwork) net_opt.step();
    state.loss_history.push_back(loss_val);
  }
}

void stage2_fit(FitState& state, const std::vector<FitTarget>& targets,
                const VoxelGrid* scaffold, FitMode mode, int iterations, const FitConfig& cfg,
                const RenderConfig& render_cfg) {
  state.shape.set_trainable(false);
  state.theta->requires_grad = false;
  state.appearance.set_trainable(mode == FitMode::CodePlusNetwork);
  state.phi->requires_grad = true;
  state.phi->ensure_grad();

  AdamOptimizer latent_opt(AdamConfig{cfg.lr_latent});
  latent_opt.add_param(state.phi);
  AdamOptimizer net_opt(AdamConfig{cfg.lr});
  if (mode == FitMode::CodePlusNetwork) net_opt.add_params(state.appearance.params());

  const GraphScaffold gs =
      scaffold ? GraphScaffold::from_grid_const(*scaffold) : GraphScaffold::none();
  Pcg32 master(hash_combine(cfg.seed, 0x57a6e2));
  for (int step = 0; step < iterations; ++step) {
    Pcg32 rng = master.fork(step);
    Tape tape;
    latent_opt.zero_grad();
    net_opt.zero_grad();
    const Var loss = photometric_over_targets(tape, state.appearance, gs, state.phi, targets,
                                              cfg.rays_per_step, render_cfg, rng);
    const double loss_val = loss->val[0];
    if (!std::isfinite(loss_val)) abort_non_finite("stage2_fit", step, loss_val);
    tape.backward(loss);
    latent_opt.step();
    if (mode == FitMode::CodePlusNetwork) net_opt.step();
    state.loss_history.push_back(loss_val);
  }
}

void shape_from_mask_fit(FitState& state, const Image& mask, const Camera& camera, FitMode mode,
                         int iterations, const FitConfig& cfg, const RenderConfig& render_cfg,
                         const LossConfig& loss_cfg) {
  if (mask.channels != 1) throw std::invalid_argument("shape_from_mask_fit: mask must be 1-channel");
  bool any_on = false;
  for (const double v : mask.data) any_on = any_on || v > 0.0;
  if (!any_on)
    std::fprintf(stderr, "shape_from_mask_fit: all-zero mask, fitting a degenerate shape\n");

  state.appearance.set_trainable(false);
  state.shape.set_trainable(mode == FitMode::CodePlusNetwork);
  state.theta->requires_grad = true;
  state.theta->ensure_grad();

  AdamOptimizer latent_opt(AdamConfig{cfg.lr_latent});
  latent_opt.add_param(state.theta);
  AdamOptimizer net_opt(AdamConfig{cfg.lr});
  if (mode == FitMode::CodePlusNetwork) net_opt.add_params(state.shape.params());

  Pcg32 master(hash_combine(cfg.seed, 0x57a6e3));
  const GridMeta meta = state.shape.grid_meta();
  for (int step = 0; step < iterations; ++step) {
    Tape tape;
    latent_opt.zero_grad();
    net_opt.zero_grad();
    const Var grid = state.shape.decode_graph(tape, state.theta);
    RenderConfig step_cfg = render_cfg;
    step_cfg.rng_seed = hash_combine(master.fork(step).next_u32(), step);
    const Var proj = project_silhouette_graph(tape, grid, meta, camera, step_cfg);
    const Var diff = sub(tape, proj, constant(tape, proj->dims, mask.data));
    Var loss = scale(tape, sum_sq(tape, diff), 1.0 / proj->size());
    if (loss_cfg.w_sym > 0.0)
      loss =
          add(tape, loss, scale(tape, symmetry_penalty_graph(tape, grid, meta), loss_cfg.w_sym));
    const double loss_val = loss->val[0];
    if (!std::isfinite(loss_val)) abort_non_finite("shape_from_mask_fit", step, loss_val);
    tape.backward(loss);
    latent_opt.step();
    if (mode == FitMode::CodePlusNetwork) net_opt.step();
    state.loss_history.push_back(loss_val);
  }
}

namespace {

double initial_objective(const FitState& state, const std::vector<FitTarget>& targets,
                         const GraphScaffold& scaffold, const FitConfig& cfg,
                         const RenderConfig& render_cfg) {
  Tape tape;
  tape.recording = false;
  Pcg32 rng(hash_combine(cfg.seed, 0x1417));
  const Var loss = photometric_over_targets(tape, state.appearance, scaffold, state.phi, targets,
                                            cfg.rays_per_step, render_cfg, rng);
  return loss->val[0];
}

}  // namespace

FitResult invert(const Image& image, const std::optional<Camera>& camera, Variant variant,
                 FitMode mode, bool symmetry, const Model& checkpoint, const FitConfig& cfg,
                 const RenderConfig& render_cfg, const LossConfig& loss_cfg,
                 const VoxelGrid* gt_voxels, const Image* mask,
                 const std::vector<GalleryEntry>* gallery) {
  if (variant == Variant::ShapeFromMask && !mask)
    throw std::invalid_argument("invert: shape-from-mask requires a mask");
  if (variant == Variant::ShapeFromGT && !gt_voxels)
    throw std::invalid_argument("invert: shape-from-gt requires gt voxels");

  Camera cam;
  if (camera) {
    cam = *camera;
  } else {
    if (!gallery || gallery->empty())
      throw std::invalid_argument("invert: camera absent and no retrieval gallery given");
    cam = retrieve_camera(image, *gallery);
    cam = estimate_camera(image, checkpoint, cam, cfg, render_cfg, loss_cfg);
  }

  FitState state = make_fit_state(checkpoint, cam, cfg.seed);
  const std::vector<FitTarget> targets = make_targets(image, cam, symmetry);

  FitResult result;
  result.variant = variant;
  result.mode = mode;
  result.symmetry = symmetry;
  result.iterations = cfg.iterations;
  result.camera = cam;

  const int stage1_iters =
      static_cast<int>(std::lround(cfg.stage1_fraction * cfg.iterations));
  const int stage2_iters = cfg.iterations - stage1_iters;

  switch (variant) {
    case Variant::ConditionalNeRF: {
      state.loss_history.push_back(
          initial_objective(state, targets, GraphScaffold::none(), cfg, render_cfg));
      stage2_fit(state, targets, nullptr, mode, cfg.iterations, cfg, render_cfg);
      result.has_scaffold = false;
      break;
    }
    case Variant::ShapeFromNR: {
      {
        const VoxelGrid initial = shape_decode(state.shape, state.theta);
        state.loss_history.push_back(initial_objective(
            state, targets, GraphScaffold::from_grid_const(initial), cfg, render_cfg));
      }
      stage1_fit(state, targets, mode, stage1_iters, cfg, render_cfg, loss_cfg);
      result.scaffold = shape_decode(state.shape, state.theta);
      result.has_scaffold = true;
      stage2_fit(state, targets, &result.scaffold, mode, stage2_iters, cfg, render_cfg);
      break;
    }
    case Variant::ShapeFromMask: {
      state.loss_history.push_back(0.0);  // replaced below by the mask objective
      shape_from_mask_fit(state, *mask, cam, mode, stage1_iters, cfg, render_cfg, loss_cfg);
      if (!state.loss_history.empty() && state.loss_history.size() > 1)
        state.loss_history[0] = state.loss_history[1];
      result.scaffold = shape_decode(state.shape, state.theta);
      result.has_scaffold = true;
      stage2_fit(state, targets, &result.scaffold, mode, stage2_iters, cfg, render_cfg);
      break;
    }
    case Variant::ShapeFromGT: {
      result.scaffold = *gt_voxels;
      result.has_scaffold = true;
      state.loss_history.push_back(initial_objective(
          state, targets, GraphScaffold::from_grid_const(result.scaffold), cfg, render_cfg));
      stage2_fit(state, targets, &result.scaffold, mode, cfg.iterations, cfg, render_cfg);
      break;
    }
  }

  result.theta = state.theta;
  result.phi = state.phi;
  result.shape = std::move(state.shape);
  result.appearance = std::move(state.appearance);
  result.loss_history = std::move(state.loss_history);
  result.final_loss = result.loss_history.back();
  return result;
}

Camera estimate_camera(const Image& image, const Model& checkpoint, const Camera& k_init,
                       const FitConfig& cfg, const RenderConfig& render_cfg,
                       const LossConfig& loss_cfg) {
  FitState state = make_fit_state(checkpoint, k_init, cfg.seed);
  state.shape.set_trainable(false);
  state.appearance.set_trainable(false);
  state.theta->requires_grad = true;
  state.theta->ensure_grad();
  state.phi->requires_grad = true;
  state.phi->ensure_grad();

  const Var omega = make_param({3}, {0.0, 0.0, 0.0});
  const Var tau = make_param({3}, {0.0, 0.0, 0.0});
  AdamOptimizer cam_opt(AdamConfig{cfg.lr_camera});
  cam_opt.add_param(omega);
  cam_opt.add_param(tau);
  AdamOptimizer latent_opt(AdamConfig{cfg.lr_latent});
  latent_opt.add_param(state.theta);
  latent_opt.add_param(state.phi);

  const GridMeta meta = state.shape.grid_meta();
  Pcg32 master(hash_combine(cfg.seed, 0xca3e5a));
  std::vector<double> history;
  for (int step = 0; step < cfg.iterations; ++step) {
    Pcg32 rng = master.fork(step);
    Tape tape;
    cam_opt.zero_grad();
    latent_opt.zero_grad();

    const Var grid = state.shape.decode_graph(tape, state.theta);
    const GraphScaffold scaffold{grid, meta};
    const Camera current =
        apply_camera_delta(k_init, {omega->val[0], omega->val[1], omega->val[2]},
                           {tau->val[0], tau->val[1], tau->val[2]});

    // sample pixels; quadrature is planned with the current camera and held
    // constant, gradients reach the camera through ray origins/directions
    const int n_rays = cfg.rays_per_step;
    std::vector<std::pair<double, double>> pixels;
    std::vector<uint64_t> streams;
    std::vector<Ray> plan_rays_in;
    std::vector<double> target;
    pixels.reserve(n_rays);
    for (int r = 0; r < n_rays; ++r) {
      const int pix = static_cast<int>(rng.next_below(static_cast<uint32_t>(image.pixel_count())));
      const int y = pix / image.width;
      const int x = pix % image.width;
      pixels.emplace_back(x + 0.5, y + 0.5);
      streams.push_back(static_cast<uint64_t>(pix));
      plan_rays_in.push_back(camera_ray(current, x + 0.5, y + 0.5));
      const Rgb c = image.pixel(y, x);
      target.push_back(c.x);
      target.push_back(c.y);
      target.push_back(c.z);
    }
    Pcg32 quad_rng = rng.fork(0x9a7);
    const RayBatchPlan plan =
        plan_rays(plan_rays_in, scaffold, render_cfg,
                  render_cfg.midpoint_sampling ? nullptr : &quad_rng, streams);
    CameraDelta delta{omega, tau};
    const RaysVars ray_vars = camera_rays_graph(tape, k_init, delta, pixels);
    const auto rendered = render_rays_graph(tape, state.appearance, scaffold, state.phi, plan,
                                            ray_vars, render_cfg.background);
    Var loss = photometric_graph(tape, rendered.colors, std::move(target));
    if (loss_cfg.w_sym_inference > 0.0)
      loss = add(tape, loss,
                 scale(tape, symmetry_penalty_graph(tape, grid, meta), loss_cfg.w_sym_inference));
    const double loss_val = loss->val[0];
    if (!std::isfinite(loss_val)) abort_non_finite("estimate_camera", step, loss_val);
    history.push_back(loss_val);
    if (step >= 100 && loss_val > 10.0 * history[step - 100])
      throw std::runtime_error("estimate_camera: diverged (loss " + std::to_string(loss_val) +
                               " > 10x loss 100 steps ago)");
    tape.backward(loss);
    cam_opt.step();
    latent_opt.step();
  }
  return apply_camera_delta(k_init, {omega->val[0], omega->val[1], omega->val[2]},
                            {tau->val[0], tau->val[1], tau->val[2]});
}

Image render_novel_view(const FitResult& fit, const Camera& camera, const RenderConfig& cfg) {
  return render_image(fit.appearance, fit.has_scaffold ? &fit.scaffold : nullptr, fit.phi, camera,
                      cfg);
}

void save_fit_result(const std::string& path_prefix, const FitResult& fit) {
  std::vector<ParamTensor> tensors = fit.shape.to_tensors();
  const auto ft = fit.appearance.to_tensors();
  tensors.insert(tensors.end(), ft.begin(), ft.end());
  tensors.push_back(ParamTensor{"theta/fit", fit.theta->dims, fit.theta->val});
  tensors.push_back(ParamTensor{"phi/fit", fit.phi->dims, fit.phi->val});
  save_srft(path_prefix + ".srft", tensors);
  if (fit.has_scaffold) save_vxg(path_prefix + ".vxg", fit.scaffold);

  nlohmann::json j;
  j["variant"] = variant_name(fit.variant);
  j["mode"] = fit.mode == FitMode::CodeOnly ? "code-only" : "code-plus-network";
  j["symmetry"] = fit.symmetry;
  j["iterations"] = fit.iterations;
  j["final_loss"] = fit.final_loss;
  j["camera"] = nlohmann::json::parse(camera_to_json(fit.camera));
  io::atomic_write_file(path_prefix + ".json", j.dump(2));
}

FitResult load_fit_result(const std::string& path_prefix) {
  FitResult fit;
  const auto tensors = load_srft(path_prefix + ".srft");
  fit.shape.init_zero(ShapeNetConfig{});
  fit.appearance.init_zero(AppearanceNetConfig{});
  fit.shape.from_tensors(tensors);
  fit.appearance.from_tensors(tensors);
  const ParamTensor* th = find_tensor(tensors, "theta/fit");
  const ParamTensor* ph = find_tensor(tensors, "phi/fit");
  if (!th || !ph) throw std::runtime_error("fit result missing latent tensors");
  fit.theta = make_param(th->dims, th->values);
  fit.phi = make_param(ph->dims, ph->values);

  std::ifstream is(path_prefix + ".json");
  if (!is) throw std::runtime_error("missing fit sidecar: " + path_prefix + ".json");
  std::ostringstream ss;
  ss << is.rdbuf();
  const auto j = nlohmann::json::parse(ss.str());
  fit.variant = variant_from_name(j.at("variant").get<std::string>());
  fit.mode = j.at("mode").get<std::string>() == "code-only" ? FitMode::CodeOnly
                                                            : FitMode::CodePlusNetwork;
  fit.symmetry = j.at("symmetry").get<bool>();
  fit.iterations = j.at("iterations").get<int>();
  fit.final_loss = j.at("final_loss").get<double>();
  fit.camera = camera_from_json(j.at("camera").dump());

  std::ifstream vxg(path_prefix + ".vxg");
  if (vxg.good()) {
    fit.scaffold = load_vxg(path_prefix + ".vxg");
    fit.has_scaffold = true;
  }
  return fit;
}

}  // namespace srf
