#pragma once

#include "inrct/harness/config.hpp"
#include "inrct/image_io.hpp"
#include "inrct/metrics.hpp"
#include "inrct/nn/weights_io.hpp"

#include <chrono>
#include <cstdlib>
#include <iomanip>
#include <sstream>

namespace inrct::harness {

namespace fs = std::filesystem;

struct NodeReport {
  int node = 0;
  double psnr = 0;
  double ssim = 0;
  double mse = 0;
  bool diverged = false;
  std::string image;
  std::string trace;
};

struct RunReport {
  std::string method;
  std::vector<NodeReport> nodes;
  metrics::Summary psnr;
  metrics::Summary ssim;
  double wall_seconds = 0;
  json config;
  std::vector<std::string> artifacts;
  std::string output_dir;
  bool diverged = false;
  std::string message;

  bool ok() const { return !diverged; }
};

// Output directory after the INRCT_OUTPUT_DIR override.
inline std::string output_dir_for(const ExperimentConfig& cfg) {
  if (const char* env = std::getenv("INRCT_OUTPUT_DIR"); env && *env) return env;
  return cfg.run.output;
}

inline std::string node_name(std::size_t j) {
  std::ostringstream s;
  s << "node_" << std::setw(2) << std::setfill('0') << j;
  return s.str();
}

// Fixed formatting so metric files are byte-stable.
inline std::string fmt(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  if (std::isnan(v)) return "nan";
  std::ostringstream s;
  s << std::setprecision(10) << v;
  return s.str();
}

inline json num(double v) {
  if (std::isfinite(v)) return v;
  return fmt(v);
}

struct Dataset {
  std::vector<ImageGrid> truths;    // reconstructed objects
  std::vector<ImageGrid> held_out;  // bayes-adapt only
};

inline Dataset build_dataset(const ExperimentConfig& cfg) {
  Dataset d;
  const auto& ds = cfg.dataset;
  if (ds.kind == "phantom") {
    PhantomFamilySpec spec = ds.phantom;
    spec.seed = cfg.dataset_seed();
    d.truths = make_phantom_family(spec);
    if (cfg.method.name == "bayes-adapt") {
      PhantomFamilySpec fresh = spec;
      fresh.seed = mix_seed(spec.seed, 0x401D);
      fresh.count = ds.holdout;
      d.held_out = make_phantom_family(fresh);
    }
  } else if (ds.kind == "disk") {
    d.truths.push_back(make_disk(ds.phantom.side, ds.disk_radius));
  } else {
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(ds.directory)) {
      const auto ext = inrct::detail::extension_of(e.path().string());
      if (e.is_regular_file() && (ext == "png" || ext == "pgm")) files.push_back(e.path());
    }
    std::sort(files.begin(), files.end());
    require(!files.empty(), "dataset.directory: no .png or .pgm images in " + ds.directory);
    for (const auto& f : files) {
      d.truths.push_back(load_grayscale(f.string()));
      require_shape(d.truths.back().side() == d.truths.front().side(),
                    "dataset.directory: images differ in size (" + f.string() + ")");
    }
  }
  return d;
}

inline std::vector<Sinogram> measure(const std::vector<ImageGrid>& images, const ProjectionOperator& op,
                                     const ExperimentConfig& cfg, std::uint64_t stream) {
  std::vector<Sinogram> out;
  for (std::size_t j = 0; j < images.size(); ++j) {
    Sinogram y = op.project(images[j]);
    if (cfg.noise) {
      NoiseSpec ns = *cfg.noise;
      ns.seed = mix_seed(mix_seed(cfg.noise_seed(), stream), j);
      y = apply_poisson_noise(y, ns).sinogram;
    }
    out.push_back(std::move(y));
  }
  return out;
}

namespace detail {

struct RunContext {
  const ExperimentConfig& cfg;
  fs::path dir;
  RunReport& report;

  std::string rel(const fs::path& p) const { return fs::relative(p, dir).generic_string(); }

  fs::path sub(const std::string& name) const {
    fs::create_directories(dir / name);
    return dir / name;
  }

  void add(const fs::path& p) { report.artifacts.push_back(rel(p)); }

  // 16-bit image (clamped to [0, 1]) plus the exact values as raw
  // little-endian float64, so metrics can be recomputed from disk.
  void write_image(const ImageGrid& img, const fs::path& p) {
    save_grayscale(img, p.string(), 16);
    add(p);
    fs::path raw = p;
    raw.replace_extension(".f64");
    std::ofstream out(raw, std::ios::binary);
    out.write(reinterpret_cast<const char*>(img.values().data()),
              static_cast<std::streamsize>(img.values().size() * sizeof(double)));
    add(raw);
    if (cfg.run.previews) {
      fs::path pre = p;
      pre.replace_filename(p.stem().string() + "_preview.png");
      save_preview(img, pre.string());
      add(pre);
    }
  }

  // Records one reconstruction against its ground truth.
  void node(std::size_t j, const ImageGrid& recon, const ImageGrid& truth, const std::vector<TracePoint>* trace,
            const std::string& prefix = "") {
    NodeReport n;
    n.node = static_cast<int>(j);
    const double range = metrics::data_range_of(truth);
    n.mse = metrics::mse(recon, truth);
    n.psnr = metrics::psnr(recon, truth, range);
    metrics::SsimConfig sc;
    sc.data_range = range;
    n.ssim = recon.side() >= sc.window ? metrics::ssim(recon, truth, sc) : std::nan("");
    const auto img = sub("recon") / (prefix + node_name(j) + ".png");
    write_image(recon, img);
    n.image = rel(img);
    if (trace) {
      const auto t = sub("traces") / (prefix + node_name(j) + ".csv");
      write_trace_csv(*trace, t.string());
      add(t);
      n.trace = rel(t);
    }
    report.nodes.push_back(n);
  }

  void diverged(std::size_t j, const std::string& why, const std::vector<TracePoint>& trace) {
    NodeReport n;
    n.node = static_cast<int>(j);
    n.psnr = n.ssim = n.mse = std::nan("");
    n.diverged = true;
    const auto t = sub("traces") / (node_name(j) + ".csv");
    write_trace_csv(trace, t.string());
    add(t);
    n.trace = rel(t);
    report.nodes.push_back(n);
    report.diverged = true;
    report.message += why + "\n";
  }
};

template <class Real>
void save_prior(RunContext& ctx, const nn::SirenArch& arch, const bayes::LatentPrior<Real>& prior,
                const nn::FourierEmbedding<Real>& emb, const GridSpec& grid) {
  const auto dir = ctx.sub("prior");
  nn::save_weights((dir / "omega.inrw").string(), arch, prior.omega);
  nn::save_weights((dir / "sigma.inrw").string(), arch, prior.sigma);
  nn::save_embedding((dir / "embedding.femb").string(), emb);
  json manifest{{"omega", "omega.inrw"},
                {"sigma", "sigma.inrw"},
                {"embedding", "embedding.femb"},
                {"side", grid.side},
                {"parameters", arch.parameter_count()}};
  std::ofstream((dir / "prior.json").string()) << manifest.dump(2) << "\n";
  for (const char* f : {"omega.inrw", "sigma.inrw", "embedding.femb", "prior.json"}) ctx.add(dir / f);
}

template <class Real>
void run_inr(RunContext& ctx, const Dataset& data, const std::shared_ptr<ProjectionOperator>& op) {
  const auto& cfg = ctx.cfg;
  const auto& name = cfg.method.name;
  const GridSpec grid = data.truths.front().spec();
  const auto emb = make_embedding<Real>(cfg.net, cfg.run.seed);
  const auto sinos = measure(data.truths, *op, cfg, 0);
  const std::size_t J = data.truths.size();
  {
    const auto dir = ctx.sub("sinograms");
    for (std::size_t j = 0; j < J; ++j) {
      save_sinogram(sinos[j], (dir / (node_name(j) + ".sino")).string());
      ctx.add(dir / (node_name(j) + ".sino"));
    }
  }
  std::vector<DataTerm<Real>> terms;
  terms.reserve(J);
  for (std::size_t j = 0; j < J; ++j) terms.emplace_back(op, sinos[j], emb);
  std::vector<const DataTerm<Real>*> tp;
  std::vector<const ImageGrid*> truths;
  for (std::size_t j = 0; j < J; ++j) {
    tp.push_back(&terms[j]);
    truths.push_back(&data.truths[j]);
  }
  const TrainConfig train = cfg.train_config();
  const auto arch = cfg.net.arch();

  if (name == "single-inr") {
    std::vector<std::optional<ReconResult<Real>>> results(J);
    std::vector<std::optional<DivergenceError>> errors(J);
    parallel_for(J, [&](std::size_t j) {
      try {
        results[j] = train_single_inr(terms[j], train, truths[j]);
      } catch (const DivergenceError& e) {
        errors[j] = e;
      }
    });
    for (std::size_t j = 0; j < J; ++j) {
      if (errors[j])
        ctx.diverged(j, node_name(j) + ": " + errors[j]->what(), errors[j]->trace);
      else
        ctx.node(j, results[j]->image, data.truths[j], &results[j]->trace);
    }
  } else if (name == "fedavg" || name == "maml") {
    const auto meta = cfg.meta_config();
    auto res = name == "fedavg" ? train_fedavg(tp, arch, meta, train, truths)
                                : train_maml_first_order(tp, arch, meta, train, truths);
    for (std::size_t j = 0; j < J; ++j) {
      const bool dropped = std::find(res.excluded.begin(), res.excluded.end(), static_cast<int>(j)) !=
                           res.excluded.end();
      if (dropped)
        ctx.diverged(j, node_name(j) + ": diverged during meta-training", res.nodes[j].trace);
      else
        ctx.node(j, res.nodes[j].image, data.truths[j], &res.nodes[j].trace);
    }
    const auto w = ctx.sub("weights") / "theta.inrw";
    nn::save_weights(w.string(), arch, res.theta);
    ctx.add(w);
  } else if (name == "inrwild") {
    try {
      auto res = train_inrwild(tp, cfg.method.wild, train, truths);
      for (std::size_t j = 0; j < J; ++j) ctx.node(j, res.nodes[j].image, data.truths[j], &res.nodes[j].trace);
      const auto w = ctx.sub("weights") / "static.inrw";
      nn::save_weights(w.string(), cfg.method.wild.static_arch(cfg.net), res.static_weights);
      ctx.add(w);
      ctx.write_image(res.static_image, ctx.sub("weights") / "static_intensity.png");
    } catch (const DivergenceError& e) {
      ctx.diverged(0, e.what(), e.trace);
    }
  } else {  // inr-bayes, bayes-adapt
    const auto bc = cfg.bayes_config();
    auto res = bayes::train_inr_bayes(tp, arch, bc, truths);
    save_prior(ctx, arch, res.prior, emb, grid);
    {
      const auto p = ctx.dir / "elbo.csv";
      std::ofstream out(p);
      out << "round,data,kl,elbo\n";
      for (const auto& e : res.elbo)
        out << e.round << ',' << fmt(e.data) << ',' << fmt(e.kl) << ',' << fmt(e.elbo) << '\n';
      ctx.add(p);
    }
    auto uncertainty = [&](const bayes::VariationalNode<Real>& node, const Mat<Real>& features,
                           const std::string& stem, std::uint64_t stream) {
      if (cfg.method.uncertainty_samples < 2) return;
      std::mt19937_64 rng(mix_seed(cfg.run.seed, stream));
      auto u = bayes::posterior_uncertainty(node, arch, features, grid, cfg.method.uncertainty_samples, rng);
      const auto dir = ctx.sub("uncertainty");
      ctx.write_image(u.mean, dir / (stem + "_mean.png"));
      ctx.write_image(u.variance, dir / (stem + "_variance.png"));
    };
    if (name == "inr-bayes") {
      for (std::size_t j = 0; j < J; ++j) {
        const bool dropped =
            std::find(res.diverged.begin(), res.diverged.end(), static_cast<int>(j)) != res.diverged.end();
        if (dropped) {
          ctx.diverged(j, node_name(j) + ": diverged during EM", res.nodes[j].trace);
          continue;
        }
        ctx.node(j, res.nodes[j].image, data.truths[j], &res.nodes[j].trace);
        uncertainty(res.posteriors[j], terms[j].features(), node_name(j), 0x7000 + j);
      }
    } else {
      // The prior nodes are training data; the report covers the held-out
      // members reconstructed with the prior frozen.
      const auto fresh = measure(data.held_out, *op, cfg, 1);
      for (std::size_t h = 0; h < data.held_out.size(); ++h) {
        DataTerm<Real> term(op, fresh[h], emb);
        bayes::BayesConfig ac = bc;
        ac.seed = mix_seed(bc.seed, 0xADA0 + h);
        bayes::VariationalNode<Real> post(0, res.prior.omega, bc.initial_variance, 0);
        auto r = bayes::adapt_with_frozen_prior(term, res.prior, arch, ac, cfg.run.iterations, &data.held_out[h],
                                                &post);
        ctx.write_image(data.held_out[h], ctx.sub("truth") / ("heldout_" + node_name(h) + ".png"));
        ctx.node(h, r.image, data.held_out[h], &r.trace, "heldout_");
        uncertainty(post, term.features(), "heldout_" + node_name(h), 0x8000 + h);
      }
    }
  }
}

}  // namespace detail

inline void write_reports(const RunReport& r, const fs::path& dir) {
  {
    std::ofstream out(dir / "metrics.csv");
    out << "node,psnr,ssim,mse,diverged\n";
    for (const auto& n : r.nodes)
      out << n.node << ',' << fmt(n.psnr) << ',' << fmt(n.ssim) << ',' << fmt(n.mse) << ',' << (n.diverged ? 1 : 0)
          << '\n';
  }
  json nodes = json::array();
  for (const auto& n : r.nodes)
    nodes.push_back({{"node", n.node},
                     {"psnr", num(n.psnr)},
                     {"ssim", num(n.ssim)},
                     {"mse", num(n.mse)},
                     {"diverged", n.diverged},
                     {"image", n.image},
                     {"trace", n.trace}});
  json j{{"method", r.method},
         {"status", r.diverged ? "diverged" : "ok"},
         {"message", r.message},
         {"nodes", nodes},
         {"aggregate",
          {{"psnr_mean", num(r.psnr.mean)},
           {"psnr_se", num(r.psnr.standard_error)},
           {"ssim_mean", num(r.ssim.mean)},
           {"ssim_se", num(r.ssim.standard_error)}}},
         {"wall_seconds", r.wall_seconds},
         {"artifacts", r.artifacts},
         {"config", r.config}};
  std::ofstream(dir / "report.json") << j.dump(2) << "\n";

  std::ofstream txt(dir / "report.txt");
  txt << "method      " << r.method << "\n";
  txt << "status      " << (r.diverged ? "DIVERGED" : "ok") << "\n";
  txt << "output      " << r.output_dir << "\n";
  txt << "wall time   " << std::fixed << std::setprecision(2) << r.wall_seconds << " s\n";
  txt.unsetf(std::ios::floatfield);
  txt << "\nnode   psnr(dB)     ssim\n";
  for (const auto& n : r.nodes)
    txt << std::setw(4) << n.node << "   " << std::setw(8) << fmt(n.psnr) << "   " << std::setw(8) << fmt(n.ssim)
        << (n.diverged ? "   diverged" : "") << "\n";
  txt << "\nmean PSNR " << fmt(r.psnr.mean) << " dB (se " << fmt(r.psnr.standard_error) << ")\n";
  txt << "mean SSIM " << fmt(r.ssim.mean) << " (se " << fmt(r.ssim.standard_error) << ")\n";
  if (!r.message.empty()) txt << "\n" << r.message;
  txt << "\nconfig\n" << r.config.dump(2) << "\n";
}

// Runs one experiment end to end and writes every artifact under the output
// directory (cfg.run.output, taken as is). Divergence is recorded in the report (report.ok() is false).
inline RunReport run_experiment(const ExperimentConfig& cfg) {
  const auto t0 = std::chrono::steady_clock::now();
  RunReport report;
  report.method = cfg.method.name;
  report.config = echo(cfg);
  report.output_dir = cfg.run.output;
  const fs::path dir = report.output_dir;
  fs::create_directories(dir);
  std::ofstream(dir / "config.json") << report.config.dump(2) << "\n";

  const Dataset data = build_dataset(cfg);
  const GridSpec grid = data.truths.front().spec();
  const auto geom =
      ProjectionGeometry::parallel(cfg.geometry.angles, grid, cfg.geometry.arc_degrees, cfg.geometry.detectors);
  detail::RunContext ctx{cfg, dir, report};
  ctx.add(dir / "config.json");
  for (std::size_t j = 0; j < data.truths.size(); ++j)
    ctx.write_image(data.truths[j], ctx.sub("truth") / (node_name(j) + ".png"));

  if (cfg.is_inr()) {
    auto op = std::make_shared<ProjectionOperator>(geom, grid);
    if (cfg.run.double_precision)
      detail::run_inr<double>(ctx, data, op);
    else
      detail::run_inr<float>(ctx, data, op);
  } else {
    std::optional<ProjectionOperator> op;
    if (cfg.method.name == "sirt") op.emplace(geom, grid);
    for (std::size_t j = 0; j < data.truths.size(); ++j) {
      Sinogram y = forward_project(data.truths[j], geom);
      if (cfg.noise) {
        NoiseSpec ns = *cfg.noise;
        ns.seed = mix_seed(mix_seed(cfg.noise_seed(), 0), j);
        y = apply_poisson_noise(y, ns).sinogram;
      }
      const auto sp = ctx.sub("sinograms") / (node_name(j) + ".sino");
      save_sinogram(y, sp.string());
      ctx.add(sp);
      ImageGrid recon = cfg.method.name == "fbp"
                            ? fbp(y, geom, grid, cfg.method.filter)
                            : sirt(y, *op, SirtOptions{cfg.method.sirt_iterations, cfg.method.nonneg, {}});
      ctx.node(j, recon, data.truths[j], nullptr);
    }
  }

  std::vector<double> ps, ss;
  for (const auto& n : report.nodes) {
    if (n.diverged) continue;
    ps.push_back(n.psnr);
    if (std::isfinite(n.ssim)) ss.push_back(n.ssim);
  }
  const double nan = std::nan("");
  report.psnr = ps.empty() ? metrics::Summary{nan, nan} : metrics::aggregate(ps);
  report.ssim = ss.empty() ? metrics::Summary{nan, nan} : metrics::aggregate(ss);
  report.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  report.artifacts.push_back("metrics.csv");
  report.artifacts.push_back("report.txt");
  report.artifacts.push_back("report.json");
  write_reports(report, dir);
  return report;
}

inline RunReport run_experiment(const std::string& config_path) {
  auto cfg = load_config(config_path);
  cfg.run.output = output_dir_for(cfg);
  return run_experiment(cfg);
}

inline const std::vector<std::string>& sweep_axes() {
  static const std::vector<std::string> axes{"angles", "nodes", "beta", "iterations"};
  return axes;
}

// Sets one sweep axis in a raw config document.
inline void apply_axis(json& doc, const std::string& axis, const std::string& value) {
  auto as_int = [&] {
    std::size_t used = 0;
    int v = 0;
    try {
      v = std::stoi(value, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != value.size()) throw ConfigError("sweep value '" + value + "' for axis " + axis + " is not an integer");
    return v;
  };
  if (axis == "angles") {
    doc["geometry"]["angles"] = as_int();
  } else if (axis == "nodes") {
    doc["dataset"]["count"] = as_int();
  } else if (axis == "iterations") {
    doc["run"]["iterations"] = as_int();
  } else if (axis == "beta") {
    std::size_t used = 0;
    double v = 0;
    try {
      v = std::stod(value, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != value.size()) throw ConfigError("sweep value '" + value + "' for axis beta is not a number");
    doc["method"]["beta"] = v;
  } else {
    throw ConfigError("sweep axis must be one of angles, nodes, beta, iterations (got '" + axis + "')");
  }
}

struct SweepResult {
  std::vector<std::string> values;
  std::vector<std::optional<RunReport>> reports;
  std::vector<std::string> errors;  // empty on success
  std::string csv_path;
};

// One run per value, each in <output>/<axis>-<value>, sharing the base seed.
// A failing point is recorded and the sweep moves on.
inline SweepResult run_sweep(const std::string& config_path, const std::string& axis,
                             const std::vector<std::string>& values) {
  const auto& axes = sweep_axes();
  if (std::find(axes.begin(), axes.end(), axis) == axes.end())
    throw ConfigError("sweep axis must be one of angles, nodes, beta, iterations (got '" + axis + "')");
  require(!values.empty(), "sweep needs at least one value");
  const json base = read_json_file(config_path);
  const auto base_cfg = parse_config(base, fs::path(config_path).parent_path());
  const fs::path root = output_dir_for(base_cfg);
  fs::create_directories(root);
  SweepResult out;
  out.csv_path = (root / ("sweep_" + axis + ".csv")).string();
  std::ofstream csv(out.csv_path);
  csv << axis << ",method,mean_psnr,se_psnr,mean_ssim,se_ssim,status\n";
  for (const auto& v : values) {
    out.values.push_back(v);
    std::string error;
    std::optional<RunReport> rep;
    try {
      json doc = base;
      apply_axis(doc, axis, v);
      auto cfg = parse_config(doc, fs::path(config_path).parent_path());
      cfg.run.output = (root / (axis + "-" + v)).string();
      rep = run_experiment(cfg);
    } catch (const std::exception& e) {
      error = e.what();
    }
    if (rep) {
      csv << v << ',' << rep->method << ',' << fmt(rep->psnr.mean) << ',' << fmt(rep->psnr.standard_error) << ','
          << fmt(rep->ssim.mean) << ',' << fmt(rep->ssim.standard_error) << ','
          << (rep->diverged ? "diverged" : "ok") << '\n';
    } else {
      csv << v << ',' << base_cfg.method.name << ",nan,nan,nan,nan,failed\n";
    }
    csv.flush();
    out.reports.push_back(std::move(rep));
    out.errors.push_back(error);
  }
  return out;
}

}  // namespace inrct::harness
