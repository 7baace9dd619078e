// Copyright Contributors to the scaffold-rf Project
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <optional>
#include <utility>

#include "srf/vec.hpp"

namespace srf {

struct Aabb {
  Vec3 min{-0.5, -0.5, -0.5};
  Vec3 max{0.5, 0.5, 0.5};

  bool contains(const Vec3& p) const {
    return p.x >= min.x && p.x <= max.x && p.y >= min.y && p.y <= max.y && p.z >= min.z &&
           p.z <= max.z;
  }
  Vec3 extent() const { return max - min; }
};

inline Aabb unit_box() { return Aabb{{-0.5, -0.5, -0.5}, {0.5, 0.5, 0.5}}; }

struct Ray {
  Vec3 origin;
  Vec3 direction;  // unit norm
  double t_near = 0.0;
  double t_far = 0.0;

  Vec3 at(double t) const { return origin + direction * t; }
};

// Slab test clipped to t >= 0. Degenerate grazing hits (span < 1e-9) count as
// a miss.
std::optional<std::pair<double, double>> aabb_intersect(const Ray& ray, const Aabb& box);

}  // namespace srf
