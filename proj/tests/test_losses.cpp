// Copyright Contributors to the scaffold-rf Project
// SPDX-License-Identifier: Apache-2.0
#include <cmath>

#include "doctest.h"
#include "srf/losses.hpp"
#include "srf/scene.hpp"
#include "test_util.hpp"

using namespace srf;

TEST_SUITE("losses") {

TEST_CASE("photometric_loss examples") {
  const std::vector<Rgb> target = {{1, 0, 0}, {0.5, 0.5, 0.5}};
  CHECK(photometric_loss(target, target) == 0.0);

  const std::vector<Rgb> pred1 = {{0, 0, 0}};
  const std::vector<Rgb> targ1 = {{1, 0, 0}};
  CHECK(photometric_loss(pred1, targ1) == doctest::Approx(1.0));

  // permutation invariance
  Pcg32 rng(3);
  std::vector<Rgb> a(16), b(16);
  for (int i = 0; i < 16; ++i) {
    a[i] = {rng.next_double(), rng.next_double(), rng.next_double()};
    b[i] = {rng.next_double(), rng.next_double(), rng.next_double()};
  }
  const double base = photometric_loss(a, b);
  std::vector<Rgb> ap(a.rbegin(), a.rend()), bp(b.rbegin(), b.rend());
  CHECK(photometric_loss(ap, bp) == doctest::Approx(base).epsilon(1e-12));

  const std::vector<Rgb> wrong(3);
  CHECK_THROWS_AS(photometric_loss(pred1, wrong), std::invalid_argument);
}

TEST_CASE("shape_loss vanishes at the binary fixed point") {
  LossConfig cfg;
  RenderConfig rc;
  rc.n_stratified = 16;
  rc.midpoint_sampling = true;
  const SceneDef scene = generate_scene(21, 2);
  const VoxelGrid gt = voxelize_scene(scene, 8);

  // predicted = clamped GT, mirror-symmetric by construction of the scene
  VoxelGrid pred = gt;
  for (auto& v : pred.values) v = v > 0.5 ? 1.0 - 1e-9 : 1e-9;

  const Camera cam = look_at({0, 0.4, -2}, {0, 0, 0}, {0, 1, 0}, 16.0, 16, 16);
  const Image mask = project_silhouette(pred, cam, rc);
  const SilhouetteTarget sil{&mask, cam};
  const double loss = shape_loss(pred, gt, std::span<const SilhouetteTarget>(&sil, 1), cfg, rc);
  CHECK(loss < 1e-5);
}

TEST_CASE("shape_loss BCE hand value at uniform half prediction") {
  LossConfig cfg;
  cfg.w_sym = 0.0;
  cfg.w_proj = 0.0;
  RenderConfig rc;
  VoxelGrid gt(4, 4, 4);
  for (auto& v : gt.values) v = 1.0;
  VoxelGrid pred(4, 4, 4);
  for (auto& v : pred.values) v = 0.5;
  const double loss = shape_loss(pred, gt, {}, cfg, rc);
  CHECK(loss == doctest::Approx(0.8 * std::log(2.0)).epsilon(1e-9));
}

TEST_CASE("symmetry term is exactly zero on a mirror-symmetric grid") {
  Tape tape;
  VoxelGrid g(4, 2, 2);
  Pcg32 rng(7);
  for (int z = 0; z < 2; ++z)
    for (int y = 0; y < 2; ++y)
      for (int x = 0; x < 2; ++x) {
        const double v = rng.next_double();
        g.at(x, y, z) = v;
        g.at(3 - x, y, z) = v;
      }
  const Var gv = make_leaf({16}, g.values, false);
  const Var term = symmetry_penalty_graph(tape, gv, GridMeta{4, 2, 2, g.bounds});
  CHECK(term->val[0] == 0.0);
}

TEST_CASE("symmetry term on a 2-voxel asymmetric grid") {
  Tape tape;
  const Var gv = make_leaf({2}, {0.9, 0.1}, false);
  const Var term = symmetry_penalty_graph(tape, gv, GridMeta{2, 1, 1, unit_box()});
  CHECK(term->val[0] == doctest::Approx(0.64).epsilon(1e-12));
}

TEST_CASE("BCE per-voxel minimizer matches the stationarity formula") {
  const double gamma = 0.8;
  Pcg32 rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    const double alpha = rng.next_double();
    const double opt = gamma * alpha / (gamma * alpha + (1.0 - gamma) * (1.0 - alpha));
    const Var pred = make_param({1}, {std::clamp(opt, 1e-6, 1.0 - 1e-6)});
    auto eval = [&] {
      Tape t;
      t.recording = false;
      return bce_grid(t, pred, {alpha}, gamma)->val[0];
    };
    const double fd = testutil::central_diff(eval, &pred->val[0], 1e-6);
    CHECK(std::fabs(fd) < 1e-5);  // stationary point
  }
}

TEST_CASE("shape_loss gradient flows through all three terms") {
  LossConfig cfg;
  RenderConfig rc;
  rc.n_stratified = 8;
  rc.midpoint_sampling = true;
  const SceneDef scene = generate_scene(31, 2);
  const VoxelGrid gt = voxelize_scene(scene, 8);
  Pcg32 rng(13);
  std::vector<double> init(gt.values.size());
  for (auto& v : init) v = 0.2 + 0.6 * rng.next_double();
  const Var pred = make_param({static_cast<int>(init.size())}, init);

  const Camera cam = look_at({0.3, 0.5, -1.9}, {0, 0, 0}, {0, 1, 0}, 8.0, 8, 8);
  VoxelGrid mask_src = gt;
  const Image mask = project_silhouette(mask_src, cam, rc);
  const SilhouetteTarget sil{&mask, cam};

  auto build = [&](Tape& t) {
    return shape_loss_graph(t, pred, GridMeta{8, 8, 8, gt.bounds}, gt,
                            std::span<const SilhouetteTarget>(&sil, 1), cfg, rc);
  };
  Tape tape;
  pred->zero_grad();
  tape.backward(build(tape));
  auto eval = [&] {
    Tape t;
    t.recording = false;
    return build(t)->val[0];
  };
  Pcg32 pick(17);
  for (int trial = 0; trial < 12; ++trial) {
    const size_t i = pick.next_below(static_cast<uint32_t>(pred->size()));
    const double fd = testutil::central_diff(eval, &pred->val[i], 1e-6);
    CHECK(testutil::rel_err(pred->grad[i], fd, 1e-8) < 1e-4);
  }
}

TEST_CASE("losses are non-negative") {
  Pcg32 rng(19);
  std::vector<Rgb> a(8), b(8);
  for (int i = 0; i < 8; ++i) {
    a[i] = {rng.next_double(), rng.next_double(), rng.next_double()};
    b[i] = {rng.next_double(), rng.next_double(), rng.next_double()};
  }
  CHECK(photometric_loss(a, b) >= 0.0);

  LossConfig cfg;
  RenderConfig rc;
  VoxelGrid gt(4, 4, 4);
  VoxelGrid pred(4, 4, 4);
  for (auto& v : gt.values) v = rng.next_double() < 0.5 ? 0.0 : 1.0;
  for (auto& v : pred.values) v = 0.05 + 0.9 * rng.next_double();
  CHECK(shape_loss(pred, gt, {}, cfg, rc) >= 0.0);
}

}  // TEST_SUITE
