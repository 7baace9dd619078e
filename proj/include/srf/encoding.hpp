// Copyright Contributors to the scaffold-rf Project
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <vector>

#include "srf/vec.hpp"

namespace srf {

constexpr int kDefaultEncodingFrequencies = 6;

inline int positional_encode_length(int frequencies) { return 3 + 6 * frequencies; }

// NeRF-style encoding with the raw point kept in front:
// [p, sin(2^0 pi p), cos(2^0 pi p), ..., sin(2^{L-1} pi p), cos(2^{L-1} pi p)],
// each sin/cos applied componentwise.
std::vector<double> positional_encode(const Vec3& p, int frequencies = kDefaultEncodingFrequencies);

}  // namespace srf
