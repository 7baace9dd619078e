// Copyright Contributors to the scaffold-rf Project
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <span>
#include <vector>

#include "srf/camera.hpp"
#include "srf/image.hpp"
#include "srf/renderer.hpp"
#include "srf/tape.hpp"
#include "srf/voxel.hpp"

namespace srf {

struct LossConfig {
  double gamma = 0.8;           // BCE false-negative weight
  double w_sym = 0.1;           // voxel symmetry weight (training)
  double w_proj = 1.0;          // silhouette projection weight
  double w_sym_inference = 0.1; // symmetry weight of the inversion objective
};

// Mean over rays of the squared color error ||C - C_hat||^2.
double photometric_loss(std::span<const Rgb> predicted, std::span<const Rgb> target);
// Graph version: pred [R,3] against a flat target buffer of the same size.
Var photometric_graph(Tape&, const Var& predicted, std::vector<double> target);

// Three-term shape objective: weighted BCE against the ground-truth grid,
// mirror-symmetry penalty, and silhouette projection error on the given
// views.
struct SilhouetteTarget {
  const Image* mask = nullptr;  // 1-channel, values in [0,1]
  Camera camera;
};
Var shape_loss_graph(Tape&, const Var& grid, const GridMeta& meta, const VoxelGrid& gt,
                     std::span<const SilhouetteTarget> silhouettes, const LossConfig& cfg,
                     const RenderConfig& render_cfg);
double shape_loss(const VoxelGrid& predicted, const VoxelGrid& gt,
                  std::span<const SilhouetteTarget> silhouettes, const LossConfig& cfg,
                  const RenderConfig& render_cfg);

// Mean squared difference between the grid and its mirror image.
Var symmetry_penalty_graph(Tape&, const Var& grid, const GridMeta& meta);

}  // namespace srf
