// Copyright Contributors to the scaffold-rf Project
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <vector>

#include "srf/adam.hpp"
#include "srf/dataset.hpp"
#include "srf/losses.hpp"
#include "srf/nets.hpp"
#include "srf/renderer.hpp"

namespace srf {

struct TrainConfig {
  double lr = 1e-3;         // shared by network and latent optimizers
  double lr_latent = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  int iterations = 2000;       // appearance budget (pretrain + fine-tune)
  int shape_iterations = -1;   // -1: iterations / 2
  double pretrain_fraction = 0.5;
  int rays_per_step = 128;
  int views_per_object = -1;   // cap on training views; -1 uses all
  uint64_t seed = 0;
  std::string log_path;        // optional JSONL {step, phase, loss, wall_ms}
};

struct TrainStepRecord {
  int step = 0;
  std::string phase;  // "shape", "app-pretrain", "app-finetune"
  double loss = 0.0;
  double wall_ms = 0.0;
};

struct TrainResult {
  Model model;
  std::vector<TrainStepRecord> history;
};

// Generative latent optimization: Phase A fits the shape network and
// per-object shape codes to GT voxels; Phase B fits the appearance network
// and per-object appearance codes on the photometric loss, first against the
// GT voxel scaffold then against the decoded scaffold.
TrainResult train_glo(const Dataset& dataset, const ShapeNetConfig& shape_cfg,
                      const AppearanceNetConfig& appearance_cfg, const TrainConfig& train_cfg,
                      const RenderConfig& render_cfg, const LossConfig& loss_cfg);

}  // namespace srf
