// Copyright Contributors to the scaffold-rf Project
// SPDX-License-Identifier: Apache-2.0
#include "srf/training.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <stdexcept>

#include "json.hpp"

namespace srf {

namespace {

using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
}

[[noreturn]] void abort_non_finite(const char* phase, int step, double loss) {
  throw std::runtime_error("train_glo: non-finite loss in " + std::string(phase) + " at step " +
                           std::to_string(step) + " (" + std::to_string(loss) + ")");
}

// Uniform pixel draw, returns (pixel index, target color).
int draw_pixel(Pcg32& rng, const Image& img) {
  return static_cast<int>(rng.next_below(static_cast<uint32_t>(img.pixel_count())));
}

}  // namespace

TrainResult train_glo(const Dataset& dataset, const ShapeNetConfig& shape_cfg,
                      const AppearanceNetConfig& appearance_cfg, const TrainConfig& train_cfg,
                      const RenderConfig& render_cfg, const LossConfig& loss_cfg) {
  if (dataset.objects.empty()) throw std::invalid_argument("train_glo: empty dataset");
  for (const ObjectData& obj : dataset.objects) {
    if (obj.views.empty()) throw std::invalid_argument("train_glo: object without views");
    if (obj.gt_voxels.cell_count() == 0)
      throw std::invalid_argument("train_glo: object without GT voxels");
  }

  const int n_objects = static_cast<int>(dataset.objects.size());
  Pcg32 master(train_cfg.seed);

  TrainResult result;
  Model& model = result.model;
  {
    Pcg32 init_rng = master.fork(1);
    model.shape.init(shape_cfg, init_rng);
    model.appearance.init(appearance_cfg, init_rng);
    Pcg32 latent_rng = master.fork(2);
    for (const ObjectData& obj : dataset.objects) {
      model.theta[obj.id()] = make_latent(shape_cfg.latent_dim, latent_rng);
      model.phi[obj.id()] = make_latent(appearance_cfg.latent_dim, latent_rng);
    }
  }

  const AdamConfig net_adam{train_cfg.lr, train_cfg.beta1, train_cfg.beta2, train_cfg.eps};
  const AdamConfig latent_adam{train_cfg.lr_latent, train_cfg.beta1, train_cfg.beta2,
                               train_cfg.eps};
  AdamOptimizer shape_opt(net_adam);
  shape_opt.add_params(model.shape.params());
  AdamOptimizer app_opt(net_adam);
  app_opt.add_params(model.appearance.params());
  std::vector<AdamOptimizer> theta_opts, phi_opts;
  for (const ObjectData& obj : dataset.objects) {
    theta_opts.emplace_back(latent_adam);
    theta_opts.back().add_param(model.theta.at(obj.id()));
    phi_opts.emplace_back(latent_adam);
    phi_opts.back().add_param(model.phi.at(obj.id()));
  }

  std::ofstream log;
  if (!train_cfg.log_path.empty()) {
    log.open(train_cfg.log_path, std::ios::trunc);
    if (!log) throw std::runtime_error("cannot open training log: " + train_cfg.log_path);
  }
  auto emit = [&](int step, const char* phase, double loss, double wall_ms) {
    result.history.push_back({step, phase, loss, wall_ms});
    if (log) {
      nlohmann::json j{{"step", step}, {"phase", phase}, {"loss", loss}, {"wall_ms", wall_ms}};
      log << j.dump() << "\n";
    }
  };

  auto views_of = [&](const ObjectData& obj) {
    const int n = static_cast<int>(obj.views.size());
    return train_cfg.views_per_object > 0 ? std::min(train_cfg.views_per_object, n) : n;
  };

  // ---- Phase A: shape network + theta on the three-term shape loss ----
  const int shape_iters =
      train_cfg.shape_iterations >= 0 ? train_cfg.shape_iterations : train_cfg.iterations / 2;
  model.shape.set_trainable(true);
  model.appearance.set_trainable(false);
  for (int step = 0; step < shape_iters; ++step) {
    const auto t0 = Clock::now();
    Pcg32 rng = master.fork((1ull << 32) + step);
    const int oi = static_cast<int>(rng.next_below(n_objects));
    const ObjectData& obj = dataset.objects[oi];
    const Var& theta = model.theta.at(obj.id());

    Tape tape;
    shape_opt.zero_grad();
    theta_opts[oi].zero_grad();
    const Var grid = model.shape.decode_graph(tape, theta);

    // two random projection views per step
    const int nv = views_of(obj);
    SilhouetteTarget sil[2];
    for (int j = 0; j < 2; ++j) {
      const View& view = obj.views[rng.next_below(nv)];
      sil[j] = {&view.mask, view.camera};
    }
    const Var loss = shape_loss_graph(tape, grid, model.shape.grid_meta(), obj.gt_voxels,
                                      std::span<const SilhouetteTarget>(sil, 2), loss_cfg,
                                      render_cfg);
    const double loss_val = loss->val[0];
    if (!std::isfinite(loss_val)) abort_non_finite("shape", step, loss_val);
    tape.backward(loss);
    shape_opt.step();
    theta_opts[oi].step();
    emit(step, "shape", loss_val, ms_since(t0));
  }

  // ---- Phase B: appearance network + phi on the photometric loss ----
  const int app_iters = train_cfg.iterations;
  const int pretrain_iters =
      static_cast<int>(std::lround(train_cfg.pretrain_fraction * app_iters));
  model.shape.set_trainable(false);
  model.appearance.set_trainable(true);

  // decoded scaffolds are frozen during fine-tuning; cache per object
  std::vector<VoxelGrid> decoded(n_objects);
  auto ensure_decoded = [&](int oi) {
    if (decoded[oi].cell_count() == 0)
      decoded[oi] = shape_decode(model.shape, model.theta.at(dataset.objects[oi].id()));
    return &decoded[oi];
  };

  for (int step = 0; step < app_iters; ++step) {
    const auto t0 = Clock::now();
    const bool pretrain = step < pretrain_iters;
    Pcg32 rng = master.fork((2ull << 32) + step);
    const int oi = static_cast<int>(rng.next_below(n_objects));
    const ObjectData& obj = dataset.objects[oi];
    const View& view = obj.views[rng.next_below(views_of(obj))];
    const Var& phi = model.phi.at(obj.id());

    const VoxelGrid* scaffold = pretrain ? &obj.gt_voxels : ensure_decoded(oi);
    const GraphScaffold gs = GraphScaffold::from_grid_const(*scaffold);

    std::vector<Ray> rays(train_cfg.rays_per_step);
    std::vector<uint64_t> streams(train_cfg.rays_per_step);
    std::vector<double> target;
    target.reserve(3 * train_cfg.rays_per_step);
    for (int r = 0; r < train_cfg.rays_per_step; ++r) {
      const int pix = draw_pixel(rng, view.image);
      const int y = pix / view.image.width;
      const int x = pix % view.image.width;
      rays[r] = camera_ray(view.camera, x + 0.5, y + 0.5);
      streams[r] = static_cast<uint64_t>(pix);
      const Rgb c = view.image.pixel(y, x);
      target.push_back(c.x);
      target.push_back(c.y);
      target.push_back(c.z);
    }

    Tape tape;
    app_opt.zero_grad();
    phi_opts[oi].zero_grad();
    Pcg32 quad_rng = rng.fork(0x9a7);
    const RayBatchPlan plan = plan_rays(rays, gs, render_cfg,
                                        render_cfg.midpoint_sampling ? nullptr : &quad_rng,
                                        streams);
    const RaysVars ray_vars = rays_to_vars(tape, plan.rays);
    const auto rendered =
        render_rays_graph(tape, model.appearance, gs, phi, plan, ray_vars, render_cfg.background);
    const Var loss = photometric_graph(tape, rendered.colors, std::move(target));
    const double loss_val = loss->val[0];
    if (!std::isfinite(loss_val))
      abort_non_finite(pretrain ? "app-pretrain" : "app-finetune", step, loss_val);
    tape.backward(loss);
    app_opt.step();
    phi_opts[oi].step();
    emit(step, pretrain ? "app-pretrain" : "app-finetune", loss_val, ms_since(t0));
  }

  model.shape.set_trainable(true);
  model.appearance.set_trainable(true);
  return result;
}

}  // namespace srf
