// Copyright Contributors to the scaffold-rf Project
// SPDX-License-Identifier: Apache-2.0
#include "srf/config.hpp"

#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <stdexcept>

#include "json.hpp"
#include "srf/rng.hpp"

namespace srf {

namespace {

using nlohmann::json;
using Setter = std::function<void(AppConfig&, const json&)>;
using Getter = std::function<json(const AppConfig&)>;

struct Entry {
  Setter set;
  Getter get;
};

const std::map<std::string, Entry>& registry() {
  static const std::map<std::string, Entry> reg = [] {
    std::map<std::string, Entry> r;
    auto add = [&](const std::string& key, Setter s, Getter g) { r[key] = {std::move(s), std::move(g)}; };

#define SRF_FIELD(key, expr, type)                                          \
  add(key, [](AppConfig& c, const json& v) { c.expr = v.get<type>(); },    \
      [](const AppConfig& c) { return json(c.expr); })

    SRF_FIELD("data.n_objects", data.n_objects, int);
    SRF_FIELD("data.n_views", data.n_views, int);
    SRF_FIELD("data.resolution", data.resolution, int);
    SRF_FIELD("data.image_size", data.image_size, int);
    SRF_FIELD("data.complexity", data.complexity, int);
    SRF_FIELD("data.camera_radius", data.camera_radius, double);
    SRF_FIELD("data.focal_scale", data.focal_scale, double);
    SRF_FIELD("data.oracle_samples", data.oracle_samples, int);
    SRF_FIELD("data.color_gain", data.color_gain, double);
    SRF_FIELD("data.seed", data.seed, uint64_t);

    SRF_FIELD("shape.latent_dim", shape.latent_dim, int);
    SRF_FIELD("shape.resolution", shape.resolution, int);
    SRF_FIELD("shape.hidden", shape.hidden, int);

    SRF_FIELD("appearance.latent_dim", appearance.latent_dim, int);
    SRF_FIELD("appearance.width", appearance.width, int);
    SRF_FIELD("appearance.frequencies", appearance.frequencies, int);

    SRF_FIELD("render.n_stratified", render.n_stratified, int);
    SRF_FIELD("render.n_importance", render.n_importance, int);
    SRF_FIELD("render.n_silhouette", render.n_silhouette, int);
    SRF_FIELD("render.rays_per_batch", render.rays_per_batch, int);
    SRF_FIELD("render.pdf_floor", render.pdf_floor, double);
    SRF_FIELD("render.rng_seed", render.rng_seed, uint64_t);
    SRF_FIELD("render.midpoint_sampling", render.midpoint_sampling, bool);
    add("render.background",
        [](AppConfig& c, const json& v) {
          if (!v.is_array() || v.size() != 3)
            throw std::invalid_argument("render.background expects [r,g,b]");
          c.render.background = {v[0].get<double>(), v[1].get<double>(), v[2].get<double>()};
        },
        [](const AppConfig& c) {
          return json::array(
              {c.render.background.x, c.render.background.y, c.render.background.z});
        });

    SRF_FIELD("loss.gamma", loss.gamma, double);
    SRF_FIELD("loss.w_sym", loss.w_sym, double);
    SRF_FIELD("loss.w_proj", loss.w_proj, double);
    SRF_FIELD("loss.w_sym_inference", loss.w_sym_inference, double);

    SRF_FIELD("train.lr", train.lr, double);
    SRF_FIELD("train.lr_latent", train.lr_latent, double);
    SRF_FIELD("train.beta1", train.beta1, double);
    SRF_FIELD("train.beta2", train.beta2, double);
    SRF_FIELD("train.eps", train.eps, double);
    SRF_FIELD("train.iterations", train.iterations, int);
    SRF_FIELD("train.shape_iterations", train.shape_iterations, int);
    SRF_FIELD("train.pretrain_fraction", train.pretrain_fraction, double);
    SRF_FIELD("train.rays_per_step", train.rays_per_step, int);
    SRF_FIELD("train.views_per_object", train.views_per_object, int);
    SRF_FIELD("train.seed", train.seed, uint64_t);

    SRF_FIELD("fit.iterations", fit.iterations, int);
    SRF_FIELD("fit.stage1_fraction", fit.stage1_fraction, double);
    SRF_FIELD("fit.lr", fit.lr, double);
    SRF_FIELD("fit.lr_latent", fit.lr_latent, double);
    SRF_FIELD("fit.lr_camera", fit.lr_camera, double);
    SRF_FIELD("fit.rays_per_step", fit.rays_per_step, int);
    SRF_FIELD("fit.seed", fit.seed, uint64_t);

    SRF_FIELD("threads", threads, int);
#undef SRF_FIELD
    return r;
  }();
  return reg;
}

[[noreturn]] void unknown_key(const std::string& key) {
  std::ostringstream os;
  os << "unknown config key '" << key << "'. Valid keys:";
  for (const auto& [k, _] : registry()) os << "\n  " << k;
  throw std::invalid_argument(os.str());
}

json parse_value(const std::string& text) {
  try {
    return json::parse(text);
  } catch (const json::parse_error&) {
    return json(text);  // bare string
  }
}

}  // namespace

void apply_override(AppConfig& cfg, const std::string& key, const std::string& value) {
  const auto it = registry().find(key);
  if (it == registry().end()) unknown_key(key);
  it->second.set(cfg, parse_value(value));
}

void load_config_file(AppConfig& cfg, const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open config: " + path);
  json j;
  is >> j;
  if (!j.is_object()) throw std::runtime_error("config must be a JSON object of dotted keys");
  for (const auto& [key, value] : j.items()) {
    const auto it = registry().find(key);
    if (it == registry().end()) unknown_key(key);
    it->second.set(cfg, value);
  }
}

void set_global_seed(AppConfig& cfg, uint64_t seed) {
  cfg.data.seed = seed;
  cfg.train.seed = hash_combine(seed, 1);
  cfg.fit.seed = hash_combine(seed, 2);
  cfg.render.rng_seed = hash_combine(seed, 3);
}

std::string config_canonical_json(const AppConfig& cfg) {
  json j;
  for (const auto& [key, entry] : registry()) j[key] = entry.get(cfg);
  return j.dump();
}

uint64_t config_hash(const AppConfig& cfg) {
  const std::string s = config_canonical_json(cfg);
  return fnv1a64(s.data(), s.size());
}

}  // namespace srf
