// Copyright Contributors to the scaffold-rf Project
// SPDX-License-Identifier: Apache-2.0
#include "srf/encoding.hpp"

#include <cmath>
#include <stdexcept>

namespace srf {

std::vector<double> positional_encode(const Vec3& p, int frequencies) {
  if (frequencies < 1) throw std::invalid_argument("positional_encode: frequencies must be >= 1");
  std::vector<double> out;
  out.reserve(positional_encode_length(frequencies));
  out.push_back(p.x);
  out.push_back(p.y);
  out.push_back(p.z);
  double freq = M_PI;  // 2^0 * pi
  for (int l = 0; l < frequencies; ++l) {
    for (int a = 0; a < 3; ++a) out.push_back(std::sin(freq * p[a]));
    for (int a = 0; a < 3; ++a) out.push_back(std::cos(freq * p[a]));
    freq *= 2.0;
  }
  return out;
}

}  // namespace srf
