// Copyright Contributors to the scaffold-rf Project
// SPDX-License-Identifier: Apache-2.0
#include "srf/selftest.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "srf/adam.hpp"
#include "srf/camera.hpp"
#include "srf/encoding.hpp"
#include "srf/metrics.hpp"
#include "srf/nets.hpp"
#include "srf/renderer.hpp"
#include "srf/scene.hpp"
#include "srf/tensor.hpp"
#include "srf/voxel.hpp"

namespace srf {

namespace {

struct Runner {
  int failures = 0;
  void check(const char* name, const std::function<bool()>& fn) {
    bool ok = false;
    std::string err;
    try {
      ok = fn();
    } catch (const std::exception& e) {
      err = e.what();
    }
    std::printf("%s %s%s%s\n", ok ? "ok  " : "FAIL", name, err.empty() ? "" : ": ",
                err.c_str());
    if (!ok) ++failures;
  }
};

bool near(double a, double b, double tol) { return std::fabs(a - b) <= tol; }

}  // namespace

int run_selftest() {
  Runner r;

  r.check("camera pinhole ray", [] {
    Camera cam;
    cam.fx = cam.fy = 100.0;
    cam.cx = cam.cy = 50.0;
    cam.width = cam.height = 100;
    const Ray ray = camera_ray(cam, 150.0, 50.0);
    const double s = 1.0 / std::sqrt(2.0);
    return near(ray.direction.x, s, 1e-9) && near(ray.direction.y, 0.0, 1e-9) &&
           near(ray.direction.z, s, 1e-9);
  });

  r.check("aabb slab test", [] {
    Ray ray{{0, 0, -2}, {0, 0, 1}};
    const auto hit = aabb_intersect(ray, unit_box());
    return hit && near(hit->first, 1.5, 1e-12) && near(hit->second, 2.5, 1e-12);
  });

  r.check("positional encoding", [] {
    const auto enc = positional_encode({0.5, 0, 0}, 1);
    return enc.size() == 9 && near(enc[0], 0.5, 1e-15) && near(enc[3], 1.0, 1e-12) &&
           near(enc[6], 0.0, 1e-12);
  });

  r.check("trilinear center and outside", [] {
    VoxelGrid g(2, 2, 2);
    g.at(1, 0, 0) = 0.7;
    return near(trilinear_sample(g, g.center_of(1, 0, 0)), 0.7, 1e-12) &&
           trilinear_sample(g, {2.0, 0.0, 0.0}) == 0.0;
  });

  r.check("composite hand example", [] {
    QuadratureBatch batch;
    batch.t = {0.0, 0.5};
    batch.delta = {0.5, 0.5};
    batch.t_far = 1.0;
    const std::vector<RadianceSample> samples = {{{1, 0, 0}, 1.0}, {{0, 1, 0}, 2.0}};
    const auto res = composite(samples, batch, {0, 0, 0});
    return near(res.color.x, 0.3935, 2e-4) && near(res.color.y, 0.3834, 2e-4) &&
           near(res.acc_alpha, 0.7769, 2e-4);
  });

  r.check("adam first step", [] {
    const Var p = make_param({1}, {1.0});
    AdamOptimizer opt(AdamConfig{0.1});
    opt.add_param(p);
    p->grad[0] = 2.0;
    opt.step();
    return near(p->val[0], 0.9, 1e-6);
  });

  r.check("render gradient vs finite differences", [] {
    Pcg32 rng(7);
    AppearanceNetConfig cfg;
    cfg.latent_dim = 8;
    cfg.width = 16;
    cfg.frequencies = 2;
    AppearanceNetwork net;
    net.init(cfg, rng);
    const Var phi = make_latent(cfg.latent_dim, rng, 0.5);

    VoxelGrid grid(4, 4, 4);
    for (auto& v : grid.values) v = rng.next_double();
    const GraphScaffold scaffold = GraphScaffold::from_grid_const(grid);

    Camera cam = look_at({0, 0, -2}, {0, 0, 0}, {0, 1, 0}, 8.0, 8, 8);
    RenderConfig rc;
    rc.n_stratified = 8;
    rc.n_importance = 4;
    rc.midpoint_sampling = true;
    std::vector<Ray> rays = {camera_ray(cam, 4.1, 3.7), camera_ray(cam, 2.5, 5.5)};
    const RayBatchPlan plan = plan_rays(rays, scaffold, rc, nullptr);
    const std::vector<double> target = {0.2, 0.4, 0.6, 0.8, 0.1, 0.3};

    auto eval = [&](bool with_grad) {
      Tape tape;
      tape.recording = with_grad;
      const RaysVars vars = rays_to_vars(tape, plan.rays);
      const auto res = render_rays_graph(tape, net, scaffold, phi, plan, vars, {1, 1, 1});
      const Var diff = sub(tape, res.colors, constant(tape, res.colors->dims, target));
      const Var loss = scale(tape, sum_sq(tape, diff), 0.5);
      if (with_grad) tape.backward(loss);
      return loss->val[0];
    };
    phi->zero_grad();
    eval(true);
    const double g = phi->grad[3];
    const double h = 1e-5;
    const double base = phi->val[3];
    phi->val[3] = base + h;
    const double up = eval(false);
    phi->val[3] = base - h;
    const double dn = eval(false);
    phi->val[3] = base;
    const double fd = (up - dn) / (2 * h);
    return near(g, fd, 1e-6 * std::max(1.0, std::fabs(fd)));
  });

  r.check("vxg and srft round trips", [] {
    namespace fs = std::filesystem;
    const fs::path dir = fs::temp_directory_path() / "srf-selftest";
    fs::create_directories(dir);
    VoxelGrid g(3, 2, 1);
    for (size_t i = 0; i < g.values.size(); ++i) g.values[i] = i % 2 ? 1.0 : 0.25;
    save_vxg((dir / "g.vxg").string(), g);
    const VoxelGrid g2 = load_vxg((dir / "g.vxg").string());
    save_srft((dir / "t.srft").string(), {ParamTensor{"x", {2, 2}, {1, 2, 3, 4}}});
    const auto tensors = load_srft((dir / "t.srft").string());
    fs::remove_all(dir);
    return g2.values == g.values && tensors.size() == 1 && tensors[0].values[3] == 4.0;
  });

  r.check("psnr and ssim basics", [] {
    Image a = Image::constant(16, 16, {0.5, 0.5, 0.5});
    Image b = a;
    b.at(0, 0, 0) = 0.6;
    return psnr(a, a) == 99.0 && near(ssim(a, a), 1.0, 1e-12) && psnr(a, b) < 99.0;
  });

  r.check("oracle scene occupancy", [] {
    const SceneDef scene = generate_scene(11, 3);
    for (const Primitive& p : scene.primitives) {
      Primitive probe = p;
      probe.center.x = -p.center.x;
      if (scene_hit(scene, probe.center) < 0 && scene_hit(scene, p.center) >= 0) return false;
    }
    return true;
  });

  std::printf("%s (%d failure%s)\n", r.failures == 0 ? "selftest passed" : "selftest FAILED",
              r.failures, r.failures == 1 ? "" : "s");
  return r.failures;
}

}  // namespace srf
