// Copyright Contributors to the scaffold-rf Project
// SPDX-License-Identifier: Apache-2.0
#include "srf/losses.hpp"

#include <stdexcept>

namespace srf {

double photometric_loss(std::span<const Rgb> predicted, std::span<const Rgb> target) {
  if (predicted.size() != target.size())
    throw std::invalid_argument("photometric_loss: length mismatch");
  if (predicted.empty()) return 0.0;
  double s = 0.0;
  for (size_t i = 0; i < predicted.size(); ++i) {
    const Rgb d = predicted[i] - target[i];
    s += d.dot(d);
  }
  return s / static_cast<double>(predicted.size());
}

Var photometric_graph(Tape& tape, const Var& predicted, std::vector<double> target) {
  if (predicted->size() != target.size())
    throw std::invalid_argument("photometric_graph: length mismatch");
  const int rays = predicted->rows();
  const Var diff =
      sub(tape, predicted, constant(tape, predicted->dims, std::move(target)));
  return scale(tape, sum_sq(tape, diff), 1.0 / std::max(1, rays));
}

Var symmetry_penalty_graph(Tape& tape, const Var& grid, const GridMeta& meta) {
  const Var diff = sub(tape, grid, mirror_x(tape, grid, meta));
  return scale(tape, sum_sq(tape, diff), 1.0 / static_cast<double>(grid->size()));
}

Var shape_loss_graph(Tape& tape, const Var& grid, const GridMeta& meta, const VoxelGrid& gt,
                     std::span<const SilhouetteTarget> silhouettes, const LossConfig& cfg,
                     const RenderConfig& render_cfg) {
  if (grid->size() != gt.values.size())
    throw std::invalid_argument("shape_loss: dimension mismatch");
  Var loss = bce_grid(tape, grid, gt.values, cfg.gamma);
  if (cfg.w_sym > 0.0)
    loss = add(tape, loss, scale(tape, symmetry_penalty_graph(tape, grid, meta), cfg.w_sym));
  for (const SilhouetteTarget& target : silhouettes) {
    if (!target.mask || target.mask->channels != 1)
      throw std::invalid_argument("shape_loss: silhouette targets must be 1-channel masks");
    const Var proj = project_silhouette_graph(tape, grid, meta, target.camera, render_cfg);
    const Var diff = sub(tape, proj, constant(tape, proj->dims, target.mask->data));
    loss = add(tape, loss,
               scale(tape, scale(tape, sum_sq(tape, diff), 1.0 / proj->size()), cfg.w_proj));
  }
  return loss;
}

double shape_loss(const VoxelGrid& predicted, const VoxelGrid& gt,
                  std::span<const SilhouetteTarget> silhouettes, const LossConfig& cfg,
                  const RenderConfig& render_cfg) {
  Tape tape;
  tape.recording = false;
  const Var grid = make_leaf({predicted.nx * predicted.ny * predicted.nz}, predicted.values, false);
  const GridMeta meta{predicted.nx, predicted.ny, predicted.nz, predicted.bounds};
  return shape_loss_graph(tape, grid, meta, gt, silhouettes, cfg, render_cfg)->val[0];
}

}  // namespace srf
