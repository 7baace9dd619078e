// Copyright Contributors to the scaffold-rf Project
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>

#include "srf/dataset.hpp"
#include "srf/inference.hpp"
#include "srf/losses.hpp"
#include "srf/nets.hpp"
#include "srf/renderer.hpp"
#include "srf/training.hpp"

namespace srf {

// Flat dotted-key configuration covering every module; command-line
// overrides win over the config file.
struct AppConfig {
  DatasetConfig data;
  ShapeNetConfig shape;
  AppearanceNetConfig appearance;
  RenderConfig render;
  LossConfig loss;
  TrainConfig train;
  FitConfig fit;
  int threads = 0;  // 0: hardware concurrency
};

// Applies "key=value" (value parsed as JSON, bare words as strings). Unknown
// keys are rejected with a listing of valid keys.
void apply_override(AppConfig& cfg, const std::string& key, const std::string& value);
void load_config_file(AppConfig& cfg, const std::string& path);
// Routes one seed to every module RNG.
void set_global_seed(AppConfig& cfg, uint64_t seed);

std::string config_canonical_json(const AppConfig& cfg);
uint64_t config_hash(const AppConfig& cfg);

}  // namespace srf
