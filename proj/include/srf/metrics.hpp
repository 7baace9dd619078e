// Copyright Contributors to the scaffold-rf Project
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <optional>
#include <string>
#include <vector>

#include "srf/image.hpp"

namespace srf {

// 10*log10(1/MSE) on [0,1] images, MSE over all pixels and channels; exact
// matches cap at 99 dB.
double psnr(const Image& a, const Image& b);

// Mean local SSIM on luma with an 11x11 Gaussian window (sigma 1.5),
// C1 = 0.01^2, C2 = 0.03^2. Images smaller than the window are rejected.
double ssim(const Image& a, const Image& b);

struct MetricsReport {
  std::vector<std::string> names;
  std::vector<double> psnr_values;
  std::vector<double> ssim_values;
  std::optional<double> voxel_iou;

  double mean_psnr() const;
  double mean_ssim() const;
  std::string to_json() const;
  std::string to_table() const;
};

}  // namespace srf
