#include "inrct/harness/run.hpp"
#include "inrct/inrct.hpp"

#include <CLI11.hpp>

#include <iostream>

namespace fs = std::filesystem;
using namespace inrct;

namespace {

std::vector<std::string> split_values(const std::string& list) {
  std::vector<std::string> out;
  std::stringstream ss(list);
  std::string item;
  while (std::getline(ss, item, ','))
    if (!item.empty()) out.push_back(item);
  return out;
}

void print_summary(const harness::RunReport& r) {
  std::cout << r.method << ": " << r.nodes.size() << " node(s), mean PSNR " << harness::fmt(r.psnr.mean)
            << " dB (se " << harness::fmt(r.psnr.standard_error) << "), mean SSIM " << harness::fmt(r.ssim.mean)
            << ", " << std::fixed << std::setprecision(1) << r.wall_seconds << " s -> " << r.output_dir << "\n";
  std::cout.unsetf(std::ios::floatfield);
  if (r.diverged) std::cerr << r.message;
}

int render_prior(const std::string& prior_path, const std::string& out, const std::string& embedding, int side) {
  fs::path weights = prior_path;
  fs::path emb_path = embedding;
  if (fs::path(prior_path).extension() == ".json") {
    const auto manifest = harness::read_json_file(prior_path);
    const fs::path dir = fs::path(prior_path).parent_path();
    weights = dir / manifest.at("omega").get<std::string>();
    if (emb_path.empty()) emb_path = dir / manifest.at("embedding").get<std::string>();
    if (side <= 0) side = manifest.at("side").get<int>();
  }
  require(!emb_path.empty(), "render-prior: --embedding is required for a bare weight file");
  require(side > 0, "render-prior: --side is required for a bare weight file");
  const auto loaded = nn::load_weights<double>(weights.string());
  const auto emb = nn::load_embedding<double>(emb_path.string());
  require(emb.output_dim() == loaded.arch.input_dim, "render-prior: embedding does not match the network input");
  const auto img = inr_render(loaded.arch, loaded.weights, emb, GridSpec::unit_square(side));
  save_grayscale(img, out, 16);
  std::cout << "wrote " << out << " (" << side << "x" << side << ", range [" << img.values().minCoeff() << ", "
            << img.values().maxCoeff() << "])\n";
  return 0;
}

int compare(const std::string& a, const std::string& b) {
  const auto x = load_grayscale(a);
  const auto y = load_grayscale(b);
  require_shape(x.side() == y.side(), "metrics: images differ in size");
  const double range = metrics::data_range_of(y);
  metrics::SsimConfig sc;
  sc.data_range = range;
  std::cout << "mse  " << harness::fmt(metrics::mse(x, y)) << "\n";
  std::cout << "psnr " << harness::fmt(metrics::psnr(x, y, range)) << " dB\n";
  if (x.side() >= sc.window) std::cout << "ssim " << harness::fmt(metrics::ssim(x, y, sc)) << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"INR computed-tomography reconstruction experiments"};
  app.require_subcommand(1);

  std::string config;
  auto* run = app.add_subcommand("run", "Run one experiment config");
  run->add_option("config", config, "Experiment config (JSON)")->required()->check(CLI::ExistingFile);

  std::string axis, values;
  auto* sweep = app.add_subcommand("sweep", "Run a config once per value of one axis");
  sweep->add_option("config", config, "Experiment config (JSON)")->required()->check(CLI::ExistingFile);
  sweep->add_option("--axis", axis, "angles | nodes | beta | iterations")->required();
  sweep->add_option("--values", values, "Comma-separated values")->required();

  std::string prior, out, embedding;
  int side = 0;
  auto* render = app.add_subcommand("render-prior", "Render the mean network of a stored prior");
  render->add_option("prior", prior, "prior.json manifest or .inrw weight file")->required()->check(CLI::ExistingFile);
  render->add_option("--out", out, "Output image (.png or .pgm)")->required();
  render->add_option("--embedding", embedding, "Embedding file (bare weight files only)");
  render->add_option("--side", side, "Image side (defaults to the manifest)");

  std::string img_a, img_b;
  auto* met = app.add_subcommand("metrics", "PSNR/SSIM of an image against a reference");
  met->add_option("image", img_a, "Image to score")->required()->check(CLI::ExistingFile);
  met->add_option("reference", img_b, "Reference image")->required()->check(CLI::ExistingFile);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run) {
      const auto report = harness::run_experiment(config);
      print_summary(report);
      return report.ok() ? 0 : 3;
    }
    if (*sweep) {
      const auto res = harness::run_sweep(config, axis, split_values(values));
      int failures = 0;
      for (std::size_t i = 0; i < res.values.size(); ++i) {
        std::cout << axis << "=" << res.values[i] << "  ";
        if (res.reports[i]) {
          print_summary(*res.reports[i]);
          failures += res.reports[i]->ok() ? 0 : 1;
        } else {
          std::cout << "failed: " << res.errors[i] << "\n";
          ++failures;
        }
      }
      std::cout << "combined table: " << res.csv_path << "\n";
      return failures ? 3 : 0;
    }
    if (*render) return render_prior(prior, out, embedding, side);
    if (*met) return compare(img_a, img_b);
  } catch (const harness::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
