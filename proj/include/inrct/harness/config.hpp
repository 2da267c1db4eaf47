#pragma once

#include "inrct/baselines.hpp"
#include "inrct/bayes.hpp"
#include "inrct/classical.hpp"
#include "inrct/data_sim.hpp"
#include "inrct/recon_single.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <fstream>
#include <optional>
#include <set>

namespace inrct::harness {

using json = nlohmann::json;

struct ConfigError : Error {
  using Error::Error;
};

// Typed view of one JSON object that remembers its path, so every error
// names the offending field, and rejects keys nobody asked for.
class Block {
 public:
  Block(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(where() + ": expected an object");
  }

  bool has(const std::string& key) const { return j_.contains(key); }
  void mark(const std::string& key) { seen_.insert(key); }

  template <class T>
  T get(const std::string& key, T fallback) {
    seen_.insert(key);
    if (!j_.contains(key)) return fallback;
    return convert<T>(key);
  }

  template <class T>
  T required(const std::string& key) {
    seen_.insert(key);
    if (!j_.contains(key)) throw ConfigError(field(key) + ": missing required field");
    return convert<T>(key);
  }

  Block child(const std::string& key) {
    seen_.insert(key);
    if (!j_.contains(key)) throw ConfigError(field(key) + ": missing required block");
    return Block(j_.at(key), field(key));
  }

  std::string field(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }
  std::string where() const { return path_.empty() ? "<root>" : path_; }

  void check(bool ok, const std::string& key, const std::string& what) const {
    if (!ok) throw ConfigError(field(key) + ": " + what);
  }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it)
      if (!seen_.count(it.key())) throw ConfigError(field(it.key()) + ": unknown field");
  }

 private:
  template <class T>
  T convert(const std::string& key) const {
    const json& v = j_.at(key);
    try {
      if constexpr (std::is_same_v<T, bool>) {
        if (!v.is_boolean()) throw ConfigError(field(key) + ": expected a boolean");
      } else if constexpr (std::is_integral_v<T>) {
        if (!v.is_number_integer()) throw ConfigError(field(key) + ": expected an integer");
        if constexpr (std::is_unsigned_v<T>)
          if (!v.is_number_unsigned()) throw ConfigError(field(key) + ": expected a non-negative integer");
      } else if constexpr (std::is_floating_point_v<T>) {
        if (!v.is_number()) throw ConfigError(field(key) + ": expected a number");
      } else if constexpr (std::is_same_v<T, std::string>) {
        if (!v.is_string()) throw ConfigError(field(key) + ": expected a string");
      }
      return v.get<T>();
    } catch (const json::exception& e) {
      throw ConfigError(field(key) + ": " + e.what());
    }
  }

  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

inline const std::vector<std::string>& method_names() {
  static const std::vector<std::string> names{"fbp",     "sirt",    "single-inr", "fedavg",
                                              "maml",    "inrwild", "inr-bayes",  "bayes-adapt"};
  return names;
}

struct DatasetBlock {
  std::string kind = "phantom";  // phantom | disk | images
  PhantomFamilySpec phantom;
  double disk_radius = 0.5;
  std::string directory;
  int holdout = 1;  // bayes-adapt: fresh members reconstructed with the frozen prior
  bool seed_set = false;
};

struct GeometryBlock {
  int angles = 20;
  double arc_degrees = 180;
  int detectors = 0;
};

struct MethodBlock {
  std::string name;
  FbpFilter filter = FbpFilter::RamLak;
  int sirt_iterations = 500;
  bool nonneg = true;
  MetaConfig meta;
  bool adaptation_set = false;
  WildConfig wild;
  bayes::BayesConfig bayes;
  bool em_rounds_set = false;
  bool bayes_lr_set = false;
  int uncertainty_samples = 0;
};

struct RunBlock {
  int iterations = 2000;
  double lr = 1e-3;
  std::uint64_t seed = 0;
  std::string output = "runs/default";
  int log_every = 25;
  bool double_precision = false;
  bool previews = true;
};

struct ExperimentConfig {
  DatasetBlock dataset;
  GeometryBlock geometry;
  std::optional<NoiseSpec> noise;
  bool noise_seed_set = false;
  MethodBlock method;
  NetSpec net;
  RunBlock run;

  bool is_inr() const { return method.name != "fbp" && method.name != "sirt"; }

  TrainConfig train_config() const {
    TrainConfig t;
    t.iterations = run.iterations;
    t.lr = run.lr;
    t.seed = run.seed;
    t.log_every = run.log_every;
    t.net = net;
    return t;
  }

  // Meta-learning budget: unless set explicitly, adaptation fills what the
  // outer loop leaves of run.iterations.
  MetaConfig meta_config() const {
    MetaConfig m = method.meta;
    m.seed = run.seed;
    if (!method.adaptation_set)
      m.adaptation_iterations = std::max(run.iterations - m.outer_iterations * m.inner_steps, 0);
    return m;
  }

  bayes::BayesConfig bayes_config() const {
    bayes::BayesConfig b = method.bayes;
    b.seed = run.seed;
    b.log_every = run.log_every;
    if (!method.bayes_lr_set) b.lr = run.lr;
    if (!method.em_rounds_set) b.em_rounds = std::max(1, (run.iterations + b.e_steps - 1) / b.e_steps);
    return b;
  }

  std::uint64_t dataset_seed() const { return dataset.seed_set ? dataset.phantom.seed : mix_seed(run.seed, 0xDA7A); }
  std::uint64_t noise_seed() const { return noise_seed_set ? noise->seed : mix_seed(run.seed, 0x9015E); }
};

inline std::string filter_name(FbpFilter f) { return f == FbpFilter::Hann ? "hann" : "ram-lak"; }

// Parses a config document. Relative dataset paths resolve against base_dir.
inline ExperimentConfig parse_config(const json& doc, const std::filesystem::path& base_dir = {}) {
  ExperimentConfig c;
  Block root(doc, "");

  {
    Block d = root.child("dataset");
    auto& ds = c.dataset;
    ds.kind = d.get<std::string>("kind", "phantom");
    if (ds.kind == "phantom") {
      ds.phantom.side = d.get("side", 64);
      ds.phantom.count = d.get("count", 10);
      ds.phantom.jitter = d.get("jitter", 0.1);
      ds.phantom.supersample = d.get("supersample", 4);
      ds.seed_set = d.has("seed");
      ds.phantom.seed = d.get<std::uint64_t>("seed", 0);
      d.check(ds.phantom.side >= 8, "side", "must be >= 8");
      d.check(ds.phantom.count >= 1, "count", "must be >= 1");
      d.check(ds.phantom.jitter >= 0, "jitter", "must be >= 0");
      d.check(ds.phantom.supersample >= 1, "supersample", "must be >= 1");
    } else if (ds.kind == "disk") {
      ds.phantom.side = d.get("side", 128);
      ds.phantom.count = 1;
      ds.disk_radius = d.get("radius", 0.5);
      d.check(ds.phantom.side >= 8, "side", "must be >= 8");
      d.check(ds.disk_radius > 0 && ds.disk_radius <= 1, "radius", "must lie in (0, 1]");
    } else if (ds.kind == "images") {
      std::filesystem::path dir = d.required<std::string>("directory");
      if (dir.is_relative() && !base_dir.empty()) dir = base_dir / dir;
      d.check(std::filesystem::is_directory(dir), "directory", "no such directory: " + dir.string());
      ds.directory = dir.string();
    } else {
      throw ConfigError("dataset.kind: expected phantom, disk or images, got '" + ds.kind + "'");
    }
    ds.holdout = d.get("holdout", 1);
    d.check(ds.holdout >= 1, "holdout", "must be >= 1");
    d.finish();
  }

  {
    Block g = root.child("geometry");
    c.geometry.angles = g.get("angles", 20);
    c.geometry.arc_degrees = g.get("arc_degrees", 180.0);
    c.geometry.detectors = g.get("detectors", 0);
    g.check(c.geometry.angles >= 1, "angles", "must be >= 1");
    g.check(c.geometry.arc_degrees > 0 && c.geometry.arc_degrees <= 360, "arc_degrees", "must lie in (0, 360]");
    g.check(c.geometry.detectors >= 0, "detectors", "must be >= 0 (0 picks the default)");
    g.finish();
  }

  if (root.has("noise") && !doc.at("noise").is_null()) {
    Block n = root.child("noise");
    NoiseSpec ns;
    ns.photon_count = n.get("photon_count", ns.photon_count);
    ns.gamma_abs = n.get("gamma", ns.gamma_abs);
    ns.max_attenuation = n.get("max_attenuation", ns.max_attenuation);
    c.noise_seed_set = n.has("seed");
    ns.seed = n.get<std::uint64_t>("seed", 0);
    n.check(ns.photon_count > 0, "photon_count", "must be > 0");
    n.check(ns.gamma_abs > 0 && ns.gamma_abs <= 1, "gamma", "must lie in (0, 1]");
    n.finish();
    c.noise = ns;
  } else {
    root.mark("noise");
  }

  {
    Block r = root.child("run");
    c.run.iterations = r.get("iterations", c.run.iterations);
    c.run.lr = r.get("lr", c.run.lr);
    c.run.seed = r.get<std::uint64_t>("seed", 0);
    c.run.output = r.get<std::string>("output", c.run.output);
    c.run.log_every = r.get("log_every", c.run.log_every);
    c.run.previews = r.get("previews", true);
    const auto precision = r.get<std::string>("precision", "float");
    r.check(precision == "float" || precision == "double", "precision", "expected float or double");
    c.run.double_precision = precision == "double";
    r.check(c.run.iterations >= 1, "iterations", "must be >= 1");
    r.check(c.run.lr > 0, "lr", "must be > 0");
    r.check(c.run.log_every >= 1, "log_every", "must be >= 1");
    r.check(!c.run.output.empty(), "output", "must not be empty");
    r.finish();
  }

  if (root.has("net")) {
    Block n = root.child("net");
    c.net.depth = n.get("depth", c.net.depth);
    c.net.width = n.get("width", c.net.width);
    c.net.frequencies = n.get("frequencies", c.net.frequencies);
    c.net.fourier_scale = n.get("fourier_scale", c.net.fourier_scale);
    c.net.omega0 = n.get("omega0", c.net.omega0);
    n.check(c.net.depth >= 1, "depth", "must be >= 1");
    n.check(c.net.width >= 1, "width", "must be >= 1");
    n.check(c.net.frequencies >= 1, "frequencies", "must be >= 1");
    n.check(c.net.fourier_scale > 0, "fourier_scale", "must be > 0");
    n.check(c.net.omega0 > 0, "omega0", "must be > 0");
    n.finish();
  }

  {
    Block m = root.child("method");
    auto& mb = c.method;
    mb.name = m.required<std::string>("name");
    const auto& names = method_names();
    if (std::find(names.begin(), names.end(), mb.name) == names.end())
      throw ConfigError("method.name: unknown method '" + mb.name + "'");
    if (mb.name == "fbp") {
      try {
        mb.filter = parse_fbp_filter(m.get<std::string>("filter", "ram-lak"));
      } catch (const Error& e) {
        throw ConfigError(std::string("method.filter: ") + e.what());
      }
    } else if (mb.name == "sirt") {
      mb.sirt_iterations = m.get("iterations", mb.sirt_iterations);
      mb.nonneg = m.get("nonneg", true);
      m.check(mb.sirt_iterations >= 1, "iterations", "must be >= 1");
    } else if (mb.name == "fedavg" || mb.name == "maml") {
      auto& mc = mb.meta;
      if (mb.name == "maml") mc = MetaConfig::maml();
      mc.inner_steps = m.get("inner_steps", mc.inner_steps);
      mc.inner_lr = m.get("inner_lr", mc.inner_lr);
      mc.outer_iterations = m.get("outer_iterations", mc.outer_iterations);
      mc.outer_lr = m.get("outer_lr", mc.outer_lr);
      mb.adaptation_set = m.has("adaptation_iterations");
      mc.adaptation_iterations = m.get("adaptation_iterations", mc.adaptation_iterations);
      m.check(mc.inner_steps >= 1, "inner_steps", "must be >= 1");
      m.check(mc.inner_lr > 0, "inner_lr", "must be > 0");
      m.check(mc.outer_iterations >= 0, "outer_iterations", "must be >= 0");
      m.check(mc.outer_lr >= 0, "outer_lr", "must be >= 0");
      m.check(mc.adaptation_iterations >= 0, "adaptation_iterations", "must be >= 0");
    } else if (mb.name == "inrwild") {
      auto& w = mb.wild;
      w.static_depth = m.get("static_depth", w.static_depth);
      w.static_width = m.get("static_width", w.static_width);
      w.feature_dim = m.get("feature_dim", w.feature_dim);
      w.transient_depth = m.get("transient_depth", w.transient_depth);
      w.transient_width = m.get("transient_width", w.transient_width);
      w.code_dim = m.get("code_dim", w.code_dim);
      w.code_init_std = m.get("code_init_std", w.code_init_std);
      m.check(w.static_depth >= 1, "static_depth", "must be >= 1");
      m.check(w.transient_depth >= 1, "transient_depth", "must be >= 1");
      m.check(w.static_width >= 1 && w.transient_width >= 1, "static_width", "widths must be >= 1");
      m.check(w.feature_dim >= 0, "feature_dim", "must be >= 0");
      m.check(w.code_dim >= 0, "code_dim", "must be >= 0");
      m.check(w.code_init_std >= 0, "code_init_std", "must be >= 0");
    } else if (mb.name == "inr-bayes" || mb.name == "bayes-adapt") {
      auto& b = mb.bayes;
      b.beta = m.get("beta", b.beta);
      mb.em_rounds_set = m.has("em_rounds");
      b.em_rounds = m.get("em_rounds", b.em_rounds);
      b.e_steps = m.get("e_steps", b.e_steps);
      mb.bayes_lr_set = m.has("lr");
      b.lr = m.get("lr", b.lr);
      b.sigma_floor = m.get("sigma_floor", b.sigma_floor);
      b.initial_variance = m.get("initial_variance", b.initial_variance);
      b.prior_variance = m.get("prior_variance", b.prior_variance);
      b.shared_init = m.get("shared_init", b.shared_init);
      b.learn_variance = m.get("learn_variance", b.learn_variance);
      mb.uncertainty_samples = m.get("uncertainty_samples", 0);
      m.check(b.beta >= 0, "beta", "must be >= 0");
      m.check(b.em_rounds >= 1, "em_rounds", "must be >= 1");
      m.check(b.e_steps >= 1, "e_steps", "must be >= 1");
      m.check(b.lr > 0, "lr", "must be > 0");
      m.check(b.sigma_floor > 0, "sigma_floor", "must be > 0");
      m.check(b.initial_variance > 0, "initial_variance", "must be > 0");
      m.check(b.prior_variance > 0, "prior_variance", "must be > 0");
      m.check(mb.uncertainty_samples == 0 || mb.uncertainty_samples >= 2, "uncertainty_samples",
              "must be 0 or >= 2");
    }
    m.finish();
  }

  root.finish();
  if (c.dataset.kind != "phantom" && c.method.name == "bayes-adapt")
    throw ConfigError("method.name: bayes-adapt needs a phantom dataset to draw fresh members");
  return c;
}

inline json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path);
  try {
    return json::parse(in, nullptr, true, /*ignore_comments=*/true);
  } catch (const json::parse_error& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

inline ExperimentConfig load_config(const std::string& path) {
  return parse_config(read_json_file(path), std::filesystem::path(path).parent_path());
}

// Fully resolved config: every default filled in and every derived seed
// written out, so feeding it back reproduces the run.
inline json echo(const ExperimentConfig& c) {
  json ds;
  ds["kind"] = c.dataset.kind;
  if (c.dataset.kind == "phantom") {
    ds["side"] = c.dataset.phantom.side;
    ds["count"] = c.dataset.phantom.count;
    ds["jitter"] = c.dataset.phantom.jitter;
    ds["supersample"] = c.dataset.phantom.supersample;
    ds["seed"] = c.dataset_seed();
  } else if (c.dataset.kind == "disk") {
    ds["side"] = c.dataset.phantom.side;
    ds["radius"] = c.dataset.disk_radius;
  } else {
    ds["directory"] = c.dataset.directory;
  }
  ds["holdout"] = c.dataset.holdout;

  json geo{{"angles", c.geometry.angles}, {"arc_degrees", c.geometry.arc_degrees},
           {"detectors", c.geometry.detectors}};

  json noise = nullptr;
  if (c.noise)
    noise = {{"photon_count", c.noise->photon_count},
             {"gamma", c.noise->gamma_abs},
             {"max_attenuation", c.noise->max_attenuation},
             {"seed", c.noise_seed()}};

  json m{{"name", c.method.name}};
  if (c.method.name == "fbp") {
    m["filter"] = filter_name(c.method.filter);
  } else if (c.method.name == "sirt") {
    m["iterations"] = c.method.sirt_iterations;
    m["nonneg"] = c.method.nonneg;
  } else if (c.method.name == "fedavg" || c.method.name == "maml") {
    const auto mc = c.meta_config();
    m["inner_steps"] = mc.inner_steps;
    m["inner_lr"] = mc.inner_lr;
    m["outer_iterations"] = mc.outer_iterations;
    m["outer_lr"] = mc.outer_lr;
    m["adaptation_iterations"] = mc.adaptation_iterations;
  } else if (c.method.name == "inrwild") {
    const auto& w = c.method.wild;
    m["static_depth"] = w.static_depth;
    m["static_width"] = w.static_width;
    m["feature_dim"] = w.feature_dim;
    m["transient_depth"] = w.transient_depth;
    m["transient_width"] = w.transient_width;
    m["code_dim"] = w.code_dim;
    m["code_init_std"] = w.code_init_std;
  } else if (c.method.name == "inr-bayes" || c.method.name == "bayes-adapt") {
    const auto b = c.bayes_config();
    m["beta"] = b.beta;
    m["em_rounds"] = b.em_rounds;
    m["e_steps"] = b.e_steps;
    m["lr"] = b.lr;
    m["sigma_floor"] = b.sigma_floor;
    m["initial_variance"] = b.initial_variance;
    m["prior_variance"] = b.prior_variance;
    m["shared_init"] = b.shared_init;
    m["learn_variance"] = b.learn_variance;
    m["uncertainty_samples"] = c.method.uncertainty_samples;
  }

  json net{{"depth", c.net.depth},
           {"width", c.net.width},
           {"frequencies", c.net.frequencies},
           {"fourier_scale", c.net.fourier_scale},
           {"omega0", c.net.omega0}};

  json run{{"iterations", c.run.iterations}, {"lr", c.run.lr},
           {"seed", c.run.seed},             {"output", c.run.output},
           {"log_every", c.run.log_every},   {"precision", c.run.double_precision ? "double" : "float"},
           {"previews", c.run.previews}};

  return {{"dataset", ds}, {"geometry", geo}, {"noise", noise}, {"method", m}, {"net", net}, {"run", run}};
}

}  // namespace inrct::harness
