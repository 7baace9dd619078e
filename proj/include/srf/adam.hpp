// Copyright Contributors to the scaffold-rf Project
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <vector>

#include "srf/tape.hpp"

namespace srf {

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Standard Adam with bias correction. One instance owns the moment state for
// the parameter set it was given; step() consumes the accumulated gradients.
class AdamOptimizer {
 public:
  explicit AdamOptimizer(AdamConfig cfg = {}) : cfg_(cfg) {}

  void add_param(const Var& p) {
    params_.push_back(p);
    m_.emplace_back(p->size(), 0.0);
    v_.emplace_back(p->size(), 0.0);
  }
  void add_params(const std::vector<Var>& ps) {
    for (const auto& p : ps) add_param(p);
  }

  void step();
  void zero_grad() {
    for (const auto& p : params_) p->zero_grad();
  }
  int64_t step_count() const { return t_; }

 private:
  AdamConfig cfg_;
  std::vector<Var> params_;
  std::vector<std::vector<double>> m_, v_;
  int64_t t_ = 0;
};

}  // namespace srf
