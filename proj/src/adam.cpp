// Copyright Contributors to the scaffold-rf Project
// SPDX-License-Identifier: Apache-2.0
#include "srf/adam.hpp"

#include <cmath>

namespace srf {

void AdamOptimizer::step() {
  ++t_;
  const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
  for (size_t i = 0; i < params_.size(); ++i) {
    VarData& p = *params_[i];
    if (p.grad.size() != p.val.size()) continue;  // never touched by a graph
    auto& m = m_[i];
    auto& v = v_[i];
    for (size_t k = 0; k < p.val.size(); ++k) {
      const double g = p.grad[k];
      m[k] = cfg_.beta1 * m[k] + (1.0 - cfg_.beta1) * g;
      v[k] = cfg_.beta2 * v[k] + (1.0 - cfg_.beta2) * g * g;
      const double mhat = m[k] / bc1;
      const double vhat = v[k] / bc2;
      p.val[k] -= cfg_.lr * mhat / (std::sqrt(vhat) + cfg_.eps);
    }
  }
}

}  // namespace srf
