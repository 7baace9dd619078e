// Copyright Contributors to the scaffold-rf Project
// SPDX-License-Identifier: Apache-2.0
#include "srf/geometry.hpp"

#include <algorithm>
#include <limits>

namespace srf {

std::optional<std::pair<double, double>> aabb_intersect(const Ray& ray, const Aabb& box) {
  double t0 = 0.0;  // entry clipped to the ray start
  double t1 = std::numeric_limits<double>::infinity();
  for (int a = 0; a < 3; ++a) {
    const double o = ray.origin[a];
    const double d = ray.direction[a];
    if (d == 0.0) {
      if (o < box.min[a] || o > box.max[a]) return std::nullopt;
      continue;
    }
    const double inv = 1.0 / d;
    double ta = (box.min[a] - o) * inv;
    double tb = (box.max[a] - o) * inv;
    if (ta > tb) std::swap(ta, tb);
    t0 = std::max(t0, ta);
    t1 = std::min(t1, tb);
    if (t0 > t1) return std::nullopt;
  }
  if (t1 - t0 < 1e-9) return std::nullopt;
  return std::make_pair(t0, t1);
}

}  // namespace srf
