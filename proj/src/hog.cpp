// Copyright Contributors to the scaffold-rf Project
// SPDX-License-Identifier: Apache-2.0
#include "srf/hog.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace srf {

namespace {

constexpr int kSize = 64;
constexpr int kCell = 8;
constexpr int kCells = kSize / kCell;  // 8
constexpr int kBins = 9;
constexpr double kEps = 1e-6;

}  // namespace

std::vector<double> hog_features(const Image& image) {
  const Image gray = resize_bilinear(to_grayscale(image), kSize, kSize);

  auto px = [&](int y, int x) {
    return gray.at(std::clamp(y, 0, kSize - 1), std::clamp(x, 0, kSize - 1), 0);
  };

  // cell histograms with linear interpolation between orientation bins
  std::vector<double> cell_hist(kCells * kCells * kBins, 0.0);
  for (int y = 0; y < kSize; ++y)
    for (int x = 0; x < kSize; ++x) {
      const double gx = px(y, x + 1) - px(y, x - 1);
      const double gy = px(y + 1, x) - px(y - 1, x);
      const double mag = std::sqrt(gx * gx + gy * gy);
      if (mag == 0.0) continue;
      double angle = std::atan2(gy, gx);  // unsigned orientation in [0, pi)
      if (angle < 0.0) angle += M_PI;
      if (angle >= M_PI) angle -= M_PI;
      const double pos = angle / M_PI * kBins - 0.5;
      int b0 = static_cast<int>(std::floor(pos));
      const double frac = pos - b0;
      b0 = (b0 + kBins) % kBins;
      const int b1 = (b0 + 1) % kBins;
      double* hist = &cell_hist[((y / kCell) * kCells + (x / kCell)) * kBins];
      hist[b0] += mag * (1.0 - frac);
      hist[b1] += mag * frac;
    }

  // overlapping 2x2-cell blocks, L2-normalized
  std::vector<double> out;
  out.reserve((kCells - 1) * (kCells - 1) * 4 * kBins);
  for (int by = 0; by + 1 < kCells; ++by)
    for (int bx = 0; bx + 1 < kCells; ++bx) {
      double block[4 * kBins];
      int idx = 0;
      for (int dy = 0; dy < 2; ++dy)
        for (int dx = 0; dx < 2; ++dx)
          for (int b = 0; b < kBins; ++b)
            block[idx++] = cell_hist[((by + dy) * kCells + (bx + dx)) * kBins + b];
      double norm = 0.0;
      for (const double v : block) norm += v * v;
      const double inv = 1.0 / std::sqrt(norm + kEps);
      for (const double v : block) out.push_back(v * inv);
    }
  return out;
}

double hog_distance(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) throw std::invalid_argument("hog_distance: length mismatch");
  double s = 0.0;
  for (size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return std::sqrt(s);
}

Camera retrieve_camera(const Image& query, const std::vector<GalleryEntry>& gallery) {
  if (gallery.empty()) throw std::invalid_argument("retrieve_camera: empty gallery");
  const auto qf = hog_features(query);
  double best = std::numeric_limits<double>::infinity();
  size_t best_idx = 0;
  for (size_t i = 0; i < gallery.size(); ++i) {
    const double d = hog_distance(qf, hog_features(gallery[i].image));
    if (d < best) {
      best = d;
      best_idx = i;
    }
  }
  return gallery[best_idx].camera;
}

}  // namespace srf
