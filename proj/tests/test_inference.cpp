// Copyright Contributors to the scaffold-rf Project
// SPDX-License-Identifier: Apache-2.0
#include <cmath>
#include <filesystem>

#include "doctest.h"
#include "srf/dataset.hpp"
#include "srf/inference.hpp"
#include "srf/training.hpp"

using namespace srf;

namespace {

struct TinyWorld {
  Dataset data;
  Model model;
  RenderConfig render;
  LossConfig loss;
  FitConfig fit;
};

TinyWorld make_world() {
  TinyWorld w;
  DatasetConfig dc;
  dc.n_objects = 2;
  dc.n_views = 4;
  dc.resolution = 8;
  dc.image_size = 16;
  dc.complexity = 2;
  dc.oracle_samples = 64;
  dc.seed = 31;
  w.data = build_dataset(dc);

  ShapeNetConfig sc;
  sc.latent_dim = 6;
  sc.resolution = 8;
  sc.hidden = 16;
  AppearanceNetConfig ac;
  ac.latent_dim = 6;
  ac.width = 12;
  ac.frequencies = 2;
  TrainConfig tc;
  tc.iterations = 6;
  tc.shape_iterations = 4;
  tc.rays_per_step = 16;
  tc.seed = 7;
  w.render.n_stratified = 8;
  w.render.n_importance = 4;
  w.model = train_glo(w.data, sc, ac, tc, w.render, w.loss).model;

  w.fit.iterations = 4;
  w.fit.rays_per_step = 16;
  w.fit.seed = 13;
  return w;
}

std::vector<ParamTensor> net_tensors(const ShapeNetwork& g, const AppearanceNetwork& f) {
  auto t = g.to_tensors();
  const auto ft = f.to_tensors();
  t.insert(t.end(), ft.begin(), ft.end());
  return t;
}

}  // namespace

TEST_SUITE("inference") {

TEST_CASE("mask_from_background examples") {
  const Image white = Image::constant(8, 8, {1, 1, 1});
  const Image zero = mask_from_background(white, {1, 1, 1});
  for (const double v : zero.data) CHECK(v == 0.0);

  Image one_dot = white;
  one_dot.set_pixel(3, 4, {0, 0, 0});
  const Image mask = mask_from_background(one_dot, {1, 1, 1});
  double total = 0.0;
  for (const double v : mask.data) total += v;
  CHECK(total == 1.0);
  CHECK(mask.at(3, 4, 0) == 1.0);

  // tol = 0 on exact background stays empty
  const Image strict = mask_from_background(white, {1, 1, 1}, 0.0);
  for (const double v : strict.data) CHECK(v == 0.0);
}

TEST_CASE("hog descriptor basics") {
  const Image flat = Image::constant(40, 40, {0.5, 0.5, 0.5});
  const auto zero_desc = hog_features(flat);
  CHECK(zero_desc.size() == 7 * 7 * 4 * 9);
  for (const double v : zero_desc) CHECK(v == 0.0);

  Pcg32 rng(3);
  Image textured(64, 64, 3);
  for (auto& v : textured.data) v = rng.next_double();
  const auto d1 = hog_features(textured);
  const auto d2 = hog_features(textured);
  CHECK(d1 == d2);
  for (const double v : d1) CHECK(v >= 0.0);
}

TEST_CASE("retrieve_camera picks the matching gallery view") {
  DatasetConfig dc;
  dc.n_objects = 1;
  dc.n_views = 6;
  dc.resolution = 8;
  dc.image_size = 32;
  dc.oracle_samples = 64;
  dc.seed = 17;
  const Dataset data = build_dataset(dc);
  std::vector<GalleryEntry> gallery;
  for (const View& v : data.objects[0].views) gallery.push_back({v.image, v.camera});

  // query present in the gallery returns its own camera
  for (size_t q = 0; q < gallery.size(); ++q) {
    const Camera cam = retrieve_camera(gallery[q].image, gallery);
    CHECK(rotation_angle_between(cam.rotation, gallery[q].camera.rotation) < 1e-12);
  }
  // gallery of one returns that camera
  const std::vector<GalleryEntry> single = {gallery[2]};
  const Camera cam = retrieve_camera(gallery[0].image, single);
  CHECK(rotation_angle_between(cam.rotation, gallery[2].camera.rotation) < 1e-12);

  CHECK_THROWS_AS(retrieve_camera(gallery[0].image, {}), std::invalid_argument);
}

TEST_CASE("mirrored camera renders the flipped view of a symmetric scene") {
  const SceneDef scene = generate_scene(9, 3);  // symmetric by construction
  const Camera cam = look_at({0.8, 0.7, -1.5}, {0, 0, 0}, {0, 1, 0}, 35.2, 32, 32);
  const OracleView direct = oracle_render(scene, cam, 128);
  const OracleView mirrored = oracle_render(scene, mirrored_camera(cam), 128);
  const Image flipped = flip_horizontal(direct.image);
  // discretized edges may differ on a few pixels; overall agreement is near
  // exact
  double mse = image_mse(flipped, mirrored.image);
  CHECK(mse < 2e-3);
}

TEST_CASE("stage fits with zero iterations change nothing") {
  const TinyWorld w = make_world();
  const View& view = w.data.objects[0].views[0];
  FitState state = make_fit_state(w.model, view.camera, 3);
  const std::vector<double> theta0 = state.theta->val;
  const std::vector<double> phi0 = state.phi->val;
  const auto nets0 = net_tensors(state.shape, state.appearance);

  const auto targets = make_targets(view.image, view.camera, false);
  stage1_fit(state, targets, FitMode::CodePlusNetwork, 0, w.fit, w.render, w.loss);
  stage2_fit(state, targets, &w.data.objects[0].gt_voxels, FitMode::CodePlusNetwork, 0, w.fit,
             w.render);
  shape_from_mask_fit(state, view.mask, view.camera, FitMode::CodePlusNetwork, 0, w.fit, w.render,
                      w.loss);

  CHECK(state.theta->val == theta0);
  CHECK(state.phi->val == phi0);
  const auto nets1 = net_tensors(state.shape, state.appearance);
  for (size_t i = 0; i < nets0.size(); ++i) CHECK(nets0[i].values == nets1[i].values);
  CHECK(state.loss_history.empty());
}

TEST_CASE("stage discipline: stage 2 never touches theta or the shape net") {
  const TinyWorld w = make_world();
  const View& view = w.data.objects[0].views[0];
  const auto targets = make_targets(view.image, view.camera, false);

  FitState state = make_fit_state(w.model, view.camera, 5);
  stage1_fit(state, targets, FitMode::CodePlusNetwork, 3, w.fit, w.render, w.loss);
  const std::vector<double> theta_after_s1 = state.theta->val;
  const auto shape_after_s1 = state.shape.to_tensors();
  const VoxelGrid scaffold = shape_decode(state.shape, state.theta);

  stage2_fit(state, targets, &scaffold, FitMode::CodePlusNetwork, 3, w.fit, w.render);
  CHECK(state.theta->val == theta_after_s1);
  const auto shape_after_s2 = state.shape.to_tensors();
  for (size_t i = 0; i < shape_after_s1.size(); ++i)
    CHECK(shape_after_s1[i].values == shape_after_s2[i].values);
  // phi did move
  CHECK(state.loss_history.size() == 6);
}

TEST_CASE("code_only leaves every network tensor bit-identical to the checkpoint") {
  const TinyWorld w = make_world();
  const View& view = w.data.objects[1].views[1];
  FitConfig fc = w.fit;
  fc.iterations = 6;
  const FitResult fit = invert(view.image, view.camera, Variant::ShapeFromNR, FitMode::CodeOnly,
                               false, w.model, fc, w.render, w.loss);
  const auto fitted = net_tensors(fit.shape, fit.appearance);
  const auto original = net_tensors(w.model.shape, w.model.appearance);
  REQUIRE(fitted.size() == original.size());
  for (size_t i = 0; i < fitted.size(); ++i) CHECK(fitted[i].values == original[i].values);
  CHECK_FALSE(fit.loss_history.empty());
}

TEST_CASE("invert dispatches variants and validates inputs") {
  const TinyWorld w = make_world();
  const ObjectData& obj = w.data.objects[0];
  const View& view = obj.views[0];
  FitConfig fc = w.fit;
  fc.iterations = 2;

  CHECK_THROWS_AS(invert(view.image, view.camera, Variant::ShapeFromMask, FitMode::CodeOnly,
                         false, w.model, fc, w.render, w.loss),
                  std::invalid_argument);
  CHECK_THROWS_AS(invert(view.image, view.camera, Variant::ShapeFromGT, FitMode::CodeOnly, false,
                         w.model, fc, w.render, w.loss),
                  std::invalid_argument);

  // V4 with zero iterations keeps the provided scaffold bit-exact
  FitConfig zero = fc;
  zero.iterations = 0;
  const FitResult v4 = invert(view.image, view.camera, Variant::ShapeFromGT, FitMode::CodeOnly,
                              false, w.model, zero, w.render, w.loss, &obj.gt_voxels);
  CHECK(v4.has_scaffold);
  CHECK(v4.scaffold.values == obj.gt_voxels.values);

  const FitResult v1 = invert(view.image, view.camera, Variant::ConditionalNeRF,
                              FitMode::CodeOnly, false, w.model, fc, w.render, w.loss);
  CHECK_FALSE(v1.has_scaffold);

  const FitResult v3 = invert(view.image, view.camera, Variant::ShapeFromMask, FitMode::CodeOnly,
                              false, w.model, fc, w.render, w.loss, nullptr, &view.mask);
  CHECK(v3.has_scaffold);
}

TEST_CASE("estimate_camera: zero iterations returns the init, rotation stays orthonormal") {
  const TinyWorld w = make_world();
  const View& view = w.data.objects[0].views[0];
  FitConfig fc = w.fit;
  fc.iterations = 0;
  const Camera out = estimate_camera(view.image, w.model, view.camera, fc, w.render, w.loss);
  for (int i = 0; i < 9; ++i) CHECK(out.rotation.m[i] == view.camera.rotation.m[i]);

  fc.iterations = 5;
  const Camera refined = estimate_camera(view.image, w.model, view.camera, fc, w.render, w.loss);
  const Mat3 rtr = refined.rotation.transposed() * refined.rotation;
  const Mat3 eye = Mat3::identity();
  for (int i = 0; i < 9; ++i) CHECK(std::fabs(rtr.m[i] - eye.m[i]) < 1e-9);
  CHECK(refined.rotation.det() == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("fit result save/load round trip") {
  namespace fs = std::filesystem;
  const TinyWorld w = make_world();
  const ObjectData& obj = w.data.objects[0];
  const View& view = obj.views[2];
  FitConfig fc = w.fit;
  fc.iterations = 2;
  const FitResult fit = invert(view.image, view.camera, Variant::ShapeFromGT, FitMode::CodeOnly,
                               true, w.model, fc, w.render, w.loss, &obj.gt_voxels);

  const fs::path dir = fs::temp_directory_path() / "srf-test-fit";
  fs::create_directories(dir);
  const std::string prefix = (dir / "fit").string();
  save_fit_result(prefix, fit);
  const FitResult back = load_fit_result(prefix);
  CHECK(back.variant == fit.variant);
  CHECK(back.mode == fit.mode);
  CHECK(back.symmetry == fit.symmetry);
  CHECK(back.final_loss == fit.final_loss);
  CHECK(back.theta->val == fit.theta->val);
  CHECK(back.phi->val == fit.phi->val);
  CHECK(back.scaffold.values == fit.scaffold.values);

  // identical rendering from the reloaded fit
  RenderConfig rc = w.render;
  rc.midpoint_sampling = true;
  const Image a = render_novel_view(fit, view.camera, rc);
  const Image b = render_novel_view(back, view.camera, rc);
  CHECK(a.data == b.data);
  fs::remove_all(dir);
}

TEST_CASE("variant names round trip") {
  for (const Variant v : {Variant::ConditionalNeRF, Variant::ShapeFromNR, Variant::ShapeFromMask,
                          Variant::ShapeFromGT})
    CHECK(variant_from_name(variant_name(v)) == v);
  CHECK(variant_from_name("v1") == Variant::ConditionalNeRF);
  CHECK(variant_from_name("v4") == Variant::ShapeFromGT);
  CHECK_THROWS_AS(variant_from_name("v9"), std::invalid_argument);
}

}  // TEST_SUITE
