// Copyright Contributors to the scaffold-rf Project
// SPDX-License-Identifier: Apache-2.0
#include "srf/nets.hpp"

#include <cmath>
#include <stdexcept>

namespace srf {

namespace {

// Kaiming-style fan-in uniform init.
Var uniform_param(std::vector<int> dims, int fan_in, Pcg32& rng) {
  size_t n = 1;
  for (const int d : dims) n *= static_cast<size_t>(d);
  const double bound = std::sqrt(6.0 / std::max(1, fan_in));
  std::vector<double> v(n);
  for (auto& x : v) x = (2.0 * rng.next_double() - 1.0) * bound;
  return make_param(std::move(dims), std::move(v));
}

Var zero_param(std::vector<int> dims) {
  size_t n = 1;
  for (const int d : dims) n *= static_cast<size_t>(d);
  return make_param(std::move(dims), std::vector<double>(n, 0.0));
}

ParamTensor tensor_of(const std::string& name, const Var& v) {
  return ParamTensor{name, v->dims, v->val};
}

void load_into(const std::vector<ParamTensor>& tensors, const std::string& name, Var& dst) {
  const ParamTensor* t = find_tensor(tensors, name);
  if (!t) throw std::runtime_error("checkpoint missing tensor: " + name);
  dst = make_param(t->dims, t->values);
}

}  // namespace

// ---- shape network ----

void ShapeNetwork::init(const ShapeNetConfig& c, Pcg32& rng) {
  if (c.resolution % 8 != 0 || c.resolution < 8)
    throw std::invalid_argument("shape resolution must be a positive multiple of 8");
  cfg = c;
  const int base = c.resolution / 8;
  const int seed_n = base * base * base * 8;
  fc1_w = uniform_param({c.hidden, c.latent_dim}, c.latent_dim, rng);
  fc1_b = zero_param({c.hidden});
  fc2_w = uniform_param({seed_n, c.hidden}, c.hidden, rng);
  fc2_b = zero_param({seed_n});
  const int chans[4] = {8, 8, 4, 4};
  for (int i = 0; i < 3; ++i) {
    conv_w[i] = uniform_param({chans[i + 1], chans[i], 3, 3, 3}, chans[i] * 27, rng);
    conv_b[i] = zero_param({chans[i + 1]});
  }
  proj_w = uniform_param({1, 4}, 4, rng);
  proj_b = zero_param({1});
}

void ShapeNetwork::init_zero(const ShapeNetConfig& c) {
  Pcg32 rng(0);
  init(c, rng);
  for (const auto& p : params()) std::fill(p->val.begin(), p->val.end(), 0.0);
}

std::vector<Var> ShapeNetwork::params() const {
  return {fc1_w,     fc1_b,     fc2_w,     fc2_b,     conv_w[0], conv_b[0],
          conv_w[1], conv_b[1], conv_w[2], conv_b[2], proj_w,    proj_b};
}

void ShapeNetwork::set_trainable(bool trainable) {
  for (const auto& p : params()) {
    p->requires_grad = trainable;
    if (trainable) p->ensure_grad();
  }
}

Var ShapeNetwork::decode_graph(Tape& tape, const Var& theta) const {
  if (static_cast<int>(theta->size()) != cfg.latent_dim)
    throw std::invalid_argument("shape_decode: latent size mismatch");
  const int base = cfg.resolution / 8;
  Var x = reshape(tape, theta, {1, cfg.latent_dim});
  x = relu(tape, linear(tape, x, fc1_w, fc1_b));
  x = linear(tape, x, fc2_w, fc2_b);
  x = reshape(tape, x, {8, base, base, base});
  for (int i = 0; i < 3; ++i) {
    x = upsample_nearest2(tape, x);
    x = relu(tape, conv3d(tape, x, conv_w[i], conv_b[i]));
  }
  x = logistic(tape, conv1x1(tape, x, proj_w, proj_b));
  // feature layout {1, z, y, x} matches the grid layout x + nx*(y + ny*z)
  const int r = cfg.resolution;
  return reshape(tape, x, {r * r * r});
}

std::vector<ParamTensor> ShapeNetwork::to_tensors() const {
  std::vector<ParamTensor> out;
  out.push_back(tensor_of("G/fc1/w", fc1_w));
  out.push_back(tensor_of("G/fc1/b", fc1_b));
  out.push_back(tensor_of("G/fc2/w", fc2_w));
  out.push_back(tensor_of("G/fc2/b", fc2_b));
  for (int i = 0; i < 3; ++i) {
    const std::string p = "G/conv" + std::to_string(i);
    out.push_back(tensor_of(p + "/w", conv_w[i]));
    out.push_back(tensor_of(p + "/b", conv_b[i]));
  }
  out.push_back(tensor_of("G/proj/w", proj_w));
  out.push_back(tensor_of("G/proj/b", proj_b));
  return out;
}

void ShapeNetwork::from_tensors(const std::vector<ParamTensor>& tensors) {
  load_into(tensors, "G/fc1/w", fc1_w);
  load_into(tensors, "G/fc1/b", fc1_b);
  load_into(tensors, "G/fc2/w", fc2_w);
  load_into(tensors, "G/fc2/b", fc2_b);
  for (int i = 0; i < 3; ++i) {
    const std::string p = "G/conv" + std::to_string(i);
    load_into(tensors, p + "/w", conv_w[i]);
    load_into(tensors, p + "/b", conv_b[i]);
  }
  load_into(tensors, "G/proj/w", proj_w);
  load_into(tensors, "G/proj/b", proj_b);
  cfg.latent_dim = fc1_w->dims[1];
  cfg.hidden = fc1_w->dims[0];
  // fc2 emits 8 channels over a base^3 volume
  const int base = static_cast<int>(std::lround(std::cbrt(fc2_w->dims[0] / 8.0)));
  cfg.resolution = base * 8;
}

ShapeNetwork ShapeNetwork::clone() const {
  ShapeNetwork c;
  c.cfg = cfg;
  c.fc1_w = clone_var(fc1_w);
  c.fc1_b = clone_var(fc1_b);
  c.fc2_w = clone_var(fc2_w);
  c.fc2_b = clone_var(fc2_b);
  for (int i = 0; i < 3; ++i) {
    c.conv_w[i] = clone_var(conv_w[i]);
    c.conv_b[i] = clone_var(conv_b[i]);
  }
  c.proj_w = clone_var(proj_w);
  c.proj_b = clone_var(proj_b);
  return c;
}

// ---- appearance network ----

void AppearanceNetwork::init(const AppearanceNetConfig& c, Pcg32& rng) {
  cfg = c;
  const int in = c.input_dim();
  const int w = c.width;
  in_w = uniform_param({w, in}, in, rng);
  in_b = zero_param({w});
  for (int b = 0; b < 2; ++b)
    for (int l = 0; l < 2; ++l) {
      blk_w[b][l] = uniform_param({w, w}, w, rng);
      blk_b[b][l] = zero_param({w});
    }
  color_w = uniform_param({3, w}, w, rng);
  color_b = zero_param({3});
  sigma_w = uniform_param({1, w}, w, rng);
  sigma_b = zero_param({1});
}

void AppearanceNetwork::init_zero(const AppearanceNetConfig& c) {
  Pcg32 rng(0);
  init(c, rng);
  for (const auto& p : params()) std::fill(p->val.begin(), p->val.end(), 0.0);
}

std::vector<Var> AppearanceNetwork::params() const {
  std::vector<Var> out = {in_w, in_b};
  for (int b = 0; b < 2; ++b)
    for (int l = 0; l < 2; ++l) {
      out.push_back(blk_w[b][l]);
      out.push_back(blk_b[b][l]);
    }
  out.push_back(color_w);
  out.push_back(color_b);
  out.push_back(sigma_w);
  out.push_back(sigma_b);
  return out;
}

void AppearanceNetwork::set_trainable(bool trainable) {
  for (const auto& p : params()) {
    p->requires_grad = trainable;
    if (trainable) p->ensure_grad();
  }
}

AppearanceNetwork::Radiance AppearanceNetwork::eval_graph(Tape& tape, const Var& pts,
                                                          const Var& dirs, const Var& alpha,
                                                          const Var& phi) const {
  const int n = pts->rows();
  if (static_cast<int>(phi->size()) != cfg.latent_dim)
    throw std::invalid_argument("appearance_eval: latent size mismatch");
  Var alpha_col = alpha->dims.size() == 2 ? alpha : reshape(tape, alpha, {n, 1});
  Var input = concat_cols(tape, {posenc(tape, pts, cfg.frequencies), dirs, alpha_col,
                                 broadcast_rows(tape, phi, n)});
  Var h = relu(tape, linear(tape, input, in_w, in_b));
  for (int b = 0; b < 2; ++b) {
    Var t = relu(tape, linear(tape, h, blk_w[b][0], blk_b[b][0]));
    t = linear(tape, t, blk_w[b][1], blk_b[b][1]);
    h = relu(tape, add(tape, h, t));
  }
  Radiance out;
  out.rgb = logistic(tape, linear(tape, h, color_w, color_b));
  out.sigma = reshape(tape, softplus(tape, linear(tape, h, sigma_w, sigma_b)), {n});
  return out;
}

std::vector<ParamTensor> AppearanceNetwork::to_tensors() const {
  std::vector<ParamTensor> out;
  out.push_back(ParamTensor{"F/meta/frequencies", {1}, {static_cast<double>(cfg.frequencies)}});
  out.push_back(tensor_of("F/in/w", in_w));
  out.push_back(tensor_of("F/in/b", in_b));
  for (int b = 0; b < 2; ++b)
    for (int l = 0; l < 2; ++l) {
      const std::string p = "F/blk" + std::to_string(b) + "/fc" + std::to_string(l);
      out.push_back(tensor_of(p + "/w", blk_w[b][l]));
      out.push_back(tensor_of(p + "/b", blk_b[b][l]));
    }
  out.push_back(tensor_of("F/color/w", color_w));
  out.push_back(tensor_of("F/color/b", color_b));
  out.push_back(tensor_of("F/sigma/w", sigma_w));
  out.push_back(tensor_of("F/sigma/b", sigma_b));
  return out;
}

void AppearanceNetwork::from_tensors(const std::vector<ParamTensor>& tensors) {
  if (const ParamTensor* meta = find_tensor(tensors, "F/meta/frequencies"))
    cfg.frequencies = static_cast<int>(meta->values.at(0));
  load_into(tensors, "F/in/w", in_w);
  load_into(tensors, "F/in/b", in_b);
  for (int b = 0; b < 2; ++b)
    for (int l = 0; l < 2; ++l) {
      const std::string p = "F/blk" + std::to_string(b) + "/fc" + std::to_string(l);
      load_into(tensors, p + "/w", blk_w[b][l]);
      load_into(tensors, p + "/b", blk_b[b][l]);
    }
  load_into(tensors, "F/color/w", color_w);
  load_into(tensors, "F/color/b", color_b);
  load_into(tensors, "F/sigma/w", sigma_w);
  load_into(tensors, "F/sigma/b", sigma_b);
  cfg.width = in_w->dims[0];
  // input = posenc(3 + 6L) + dir(3) + alpha(1) + latent
  cfg.latent_dim = in_w->dims[1] - (3 + 6 * cfg.frequencies) - 4;
  if (cfg.latent_dim <= 0) throw std::runtime_error("appearance checkpoint: bad input width");
}

AppearanceNetwork AppearanceNetwork::clone() const {
  AppearanceNetwork c;
  c.cfg = cfg;
  c.in_w = clone_var(in_w);
  c.in_b = clone_var(in_b);
  for (int b = 0; b < 2; ++b)
    for (int l = 0; l < 2; ++l) {
      c.blk_w[b][l] = clone_var(blk_w[b][l]);
      c.blk_b[b][l] = clone_var(blk_b[b][l]);
    }
  c.color_w = clone_var(color_w);
  c.color_b = clone_var(color_b);
  c.sigma_w = clone_var(sigma_w);
  c.sigma_b = clone_var(sigma_b);
  return c;
}

// ---- helpers ----

Var make_latent(int dim, Pcg32& rng, double stddev) {
  std::vector<double> v(dim);
  for (auto& x : v) x = rng.normal() * stddev;
  return make_param({dim}, std::move(v));
}

VoxelGrid shape_decode(const ShapeNetwork& net, const Var& theta) {
  Tape tape;
  tape.recording = false;
  const Var grid = net.decode_graph(tape, theta);
  VoxelGrid out(net.cfg.resolution, net.cfg.resolution, net.cfg.resolution, unit_box());
  out.values = grid->val;
  return out;
}

void appearance_eval(const AppearanceNetwork& net, const Vec3& p, const Vec3& d, double alpha_p,
                     const Var& phi, Rgb* color, double* sigma) {
  Tape tape;
  tape.recording = false;
  const Var pts = constant(tape, {1, 3}, {p.x, p.y, p.z});
  const Var dirs = constant(tape, {1, 3}, {d.x, d.y, d.z});
  const Var alpha = constant(tape, {1, 1}, {alpha_p});
  const auto rad = net.eval_graph(tape, pts, dirs, alpha, phi);
  if (color) *color = {rad.rgb->val[0], rad.rgb->val[1], rad.rgb->val[2]};
  if (sigma) *sigma = rad.sigma->val[0];
}

// ---- model ----

void Model::save(const std::string& path) const {
  std::vector<ParamTensor> tensors = shape.to_tensors();
  const auto ft = appearance.to_tensors();
  tensors.insert(tensors.end(), ft.begin(), ft.end());
  for (const auto& [id, code] : theta) tensors.push_back(ParamTensor{"theta/" + id, code->dims, code->val});
  for (const auto& [id, code] : phi) tensors.push_back(ParamTensor{"phi/" + id, code->dims, code->val});
  save_srft(path, tensors);
}

Model Model::load(const std::string& path) {
  const auto tensors = load_srft(path);
  Model m;
  m.shape.init_zero(ShapeNetConfig{});
  m.appearance.init_zero(AppearanceNetConfig{});
  m.shape.from_tensors(tensors);
  m.appearance.from_tensors(tensors);
  for (const auto& t : tensors) {
    if (t.name.rfind("theta/", 0) == 0) m.theta[t.name.substr(6)] = make_param(t.dims, t.values);
    if (t.name.rfind("phi/", 0) == 0) m.phi[t.name.substr(4)] = make_param(t.dims, t.values);
  }
  return m;
}

Model Model::clone() const {
  Model m;
  m.shape = shape.clone();
  m.appearance = appearance.clone();
  for (const auto& [id, code] : theta) m.theta[id] = clone_var(code);
  for (const auto& [id, code] : phi) m.phi[id] = clone_var(code);
  return m;
}

}  // namespace srf
