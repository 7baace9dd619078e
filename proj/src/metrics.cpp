// Copyright Contributors to the scaffold-rf Project
// SPDX-License-Identifier: Apache-2.0
#include "srf/metrics.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace srf {

double psnr(const Image& a, const Image& b) {
  const double mse = image_mse(a, b);
  if (mse <= 0.0) return 99.0;
  return std::min(99.0, 10.0 * std::log10(1.0 / mse));
}

namespace {

constexpr int kWindow = 11;
constexpr double kSigma = 1.5;
constexpr double kC1 = 0.01 * 0.01;
constexpr double kC2 = 0.03 * 0.03;

const std::vector<double>& gaussian_kernel() {
  static const std::vector<double> kernel = [] {
    std::vector<double> k(kWindow);
    double s = 0.0;
    for (int i = 0; i < kWindow; ++i) {
      const double d = i - (kWindow - 1) / 2.0;
      k[i] = std::exp(-d * d / (2.0 * kSigma * kSigma));
      s += k[i];
    }
    for (auto& v : k) v /= s;
    return k;
  }();
  return kernel;
}

// separable Gaussian filter, valid region only
Image filter_valid(const Image& img) {
  const auto& k = gaussian_kernel();
  const int vw = img.width - kWindow + 1;
  const int vh = img.height - kWindow + 1;
  Image tmp(vw, img.height, 1);
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < vw; ++x) {
      double s = 0.0;
      for (int i = 0; i < kWindow; ++i) s += k[i] * img.at(y, x + i, 0);
      tmp.at(y, x, 0) = s;
    }
  Image out(vw, vh, 1);
  for (int y = 0; y < vh; ++y)
    for (int x = 0; x < vw; ++x) {
      double s = 0.0;
      for (int i = 0; i < kWindow; ++i) s += k[i] * tmp.at(y + i, x, 0);
      out.at(y, x, 0) = s;
    }
  return out;
}

Image cwise_mul(const Image& a, const Image& b) {
  Image out(a.width, a.height, 1);
  for (size_t i = 0; i < out.data.size(); ++i) out.data[i] = a.data[i] * b.data[i];
  return out;
}

}  // namespace

double ssim(const Image& a, const Image& b) {
  if (a.width != b.width || a.height != b.height)
    throw std::invalid_argument("ssim: dimension mismatch");
  if (a.width < kWindow || a.height < kWindow)
    throw std::invalid_argument("ssim: images smaller than the filter window");
  const Image x = to_grayscale(a);
  const Image y = to_grayscale(b);

  const Image mu_x = filter_valid(x);
  const Image mu_y = filter_valid(y);
  const Image xx = filter_valid(cwise_mul(x, x));
  const Image yy = filter_valid(cwise_mul(y, y));
  const Image xy = filter_valid(cwise_mul(x, y));

  double total = 0.0;
  for (size_t i = 0; i < mu_x.data.size(); ++i) {
    const double mx = mu_x.data[i], my = mu_y.data[i];
    const double var_x = xx.data[i] - mx * mx;
    const double var_y = yy.data[i] - my * my;
    const double cov = xy.data[i] - mx * my;
    total += ((2.0 * mx * my + kC1) * (2.0 * cov + kC2)) /
             ((mx * mx + my * my + kC1) * (var_x + var_y + kC2));
  }
  return total / static_cast<double>(mu_x.data.size());
}

double MetricsReport::mean_psnr() const {
  if (psnr_values.empty()) return 0.0;
  double s = 0.0;
  for (const double v : psnr_values) s += v;
  return s / psnr_values.size();
}

double MetricsReport::mean_ssim() const {
  if (ssim_values.empty()) return 0.0;
  double s = 0.0;
  for (const double v : ssim_values) s += v;
  return s / ssim_values.size();
}

std::string MetricsReport::to_json() const {
  nlohmann::json j;
  auto& views = j["views"] = nlohmann::json::array();
  for (size_t i = 0; i < names.size(); ++i) {
    nlohmann::json v;
    v["name"] = names[i];
    v["psnr"] = psnr_values[i];
    v["ssim"] = ssim_values[i];
    views.push_back(v);
  }
  j["mean_psnr"] = mean_psnr();
  j["mean_ssim"] = mean_ssim();
  if (voxel_iou) j["voxel_iou"] = *voxel_iou;
  return j.dump(2);
}

std::string MetricsReport::to_table() const {
  std::ostringstream os;
  char line[128];
  std::snprintf(line, sizeof(line), "%-24s %10s %10s\n", "view", "psnr(dB)", "ssim");
  os << line;
  for (size_t i = 0; i < names.size(); ++i) {
    std::snprintf(line, sizeof(line), "%-24s %10.3f %10.4f\n", names[i].c_str(), psnr_values[i],
                  ssim_values[i]);
    os << line;
  }
  std::snprintf(line, sizeof(line), "%-24s %10.3f %10.4f\n", "mean", mean_psnr(), mean_ssim());
  os << line;
  if (voxel_iou) {
    std::snprintf(line, sizeof(line), "%-24s %10.4f\n", "voxel_iou", *voxel_iou);
    os << line;
  }
  return os.str();
}

}  // namespace srf
