#pragma once

#include "inrct/core.hpp"
#include "inrct/metrics.hpp"
#include "inrct/nn/adam.hpp"
#include "inrct/nn/fourier.hpp"
#include "inrct/nn/siren.hpp"
#include "inrct/projector.hpp"

#include <fstream>
#include <iomanip>
#include <memory>
#include <optional>

namespace inrct {

// Network and encoding hyperparameters shared by every INR method.
struct NetSpec {
  int depth = 4;
  int width = 64;
  int frequencies = 32;
  double fourier_scale = 0.5;
  double omega0 = 15.0;

  nn::SirenArch arch(int output_dim = 1) const {
    return {2 * frequencies, width, depth, output_dim, omega0};
  }
};

struct TrainConfig {
  int iterations = 2000;
  double lr = 1e-3;
  std::uint64_t seed = 0;
  int log_every = 25;
  NetSpec net;

  void validate() const {
    require(iterations >= 1, "iterations must be >= 1");
    require(lr > 0, "learning rate must be > 0");
    require(log_every >= 1, "log_every must be >= 1");
  }
};

// Seed streams derived from a run seed.
namespace seeds {
inline std::uint64_t embedding(std::uint64_t s) { return mix_seed(s, 0xE3B); }
inline std::uint64_t init(std::uint64_t s) { return mix_seed(s, 0x1A1); }
inline std::uint64_t node_init(std::uint64_t s, std::size_t j) { return mix_seed(mix_seed(s, 0x40DE), j); }
inline std::uint64_t node_noise(std::uint64_t s, std::size_t j) { return mix_seed(mix_seed(s, 0x5A3), j); }
}  // namespace seeds

template <class Real>
nn::FourierEmbedding<Real> make_embedding(const NetSpec& net, std::uint64_t seed) {
  return nn::FourierEmbedding<Real>::random(net.frequencies, net.fourier_scale, seeds::embedding(seed));
}

struct TracePoint {
  int iteration = 0;
  double loss = 0;
  std::optional<double> psnr;
  std::optional<double> ssim;
};

template <class Real>
struct ReconResult {
  ImageGrid image;
  WeightVector<Real> weights;
  std::vector<TracePoint> trace;
  int skipped_steps = 0;
};

struct DivergenceError : Error {
  DivergenceError(const std::string& what, std::vector<TracePoint> t) : Error(what), trace(std::move(t)) {}
  std::vector<TracePoint> trace;
};

inline void write_trace_csv(const std::vector<TracePoint>& trace, const std::string& path) {
  std::ofstream out(path);
  require(static_cast<bool>(out), "cannot open " + path);
  out << "iteration,loss,psnr,ssim\n";
  for (const auto& p : trace) {
    out << p.iteration << ',' << std::setprecision(10) << p.loss << ',';
    if (p.psnr) out << std::setprecision(8) << *p.psnr;
    out << ',';
    if (p.ssim) out << std::setprecision(8) << *p.ssim;
    out << '\n';
  }
}

template <class Real>
ImageGrid to_image(const GridSpec& grid, const Vec<Real>& v) {
  return ImageGrid(grid, v.template cast<double>());
}

// F_w(C): the network evaluated at every pixel center.
template <class Real>
ImageGrid inr_render(const nn::SirenArch& arch, const WeightVector<Real>& w, const Mat<Real>& features,
                     const GridSpec& grid) {
  require_shape(features.cols() == static_cast<Eigen::Index>(grid.pixels()),
                "inr_render: feature count does not match grid");
  return to_image(grid, nn::siren_forward(arch, w, features).intensities());
}

template <class Real>
ImageGrid inr_render(const nn::SirenArch& arch, const WeightVector<Real>& w, const nn::FourierEmbedding<Real>& emb,
                     const GridSpec& grid) {
  return inr_render(arch, w, emb.embed(pixel_coordinates(grid)), grid);
}

template <class Real>
struct LossAndGrad {
  double loss = 0;
  WeightVector<Real> grad;
  ImageGrid image;  // F_w(C) at the evaluated weights
};

// One object's measurement problem ||A F_w(C) - y||^2 with the embedded
// pixel coordinates cached.
template <class Real>
class DataTerm {
 public:
  DataTerm(std::shared_ptr<const ProjectionOperator> op, Sinogram y, const nn::FourierEmbedding<Real>& emb)
      : op_(std::move(op)), y_(std::move(y)), features_(emb.embed(pixel_coordinates(op_->grid()))) {
    require_shape(y_.geometry == op_->geometry(), "DataTerm: sinogram geometry mismatch");
  }

  const ProjectionOperator& op() const { return *op_; }
  const Sinogram& measurement() const { return y_; }
  const Mat<Real>& features() const { return features_; }
  const GridSpec& grid() const { return op_->grid(); }

  double loss_of_image(const VecD& image) const { return (op_->apply(image) - y_.values).squaredNorm(); }

  // Loss and gradient 2 J^T A^T (A F_w(C) - y): the residual is
  // back-projected through the adjoint, then pulled through the network.
  LossAndGrad<Real> evaluate(const nn::SirenArch& arch, const WeightVector<Real>& w) const {
    const auto tape = nn::siren_forward(arch, w, features_);
    VecD image = tape.intensities().template cast<double>();
    const VecD residual = op_->apply(image) - y_.values;
    const double loss = residual.squaredNorm();
    if (!std::isfinite(loss)) return {loss, WeightVector<Real>::Zero(w.size()), ImageGrid(grid())};
    const Vec<Real> pixel_grad = (2.0 * op_->adjoint(residual)).template cast<Real>();
    auto grad = nn::siren_backward(arch, w, tape, pixel_grad);
    return {loss, std::move(grad), ImageGrid(grid(), std::move(image))};
  }

 private:
  std::shared_ptr<const ProjectionOperator> op_;
  Sinogram y_;
  Mat<Real> features_;
};

template <class Real>
LossAndGrad<Real> data_loss_and_grad(const nn::SirenArch& arch, const WeightVector<Real>& w,
                                     const nn::FourierEmbedding<Real>& emb, const ProjectionGeometry& geom,
                                     const Sinogram& sino, const GridSpec& grid) {
  DataTerm<Real> term(std::make_shared<ProjectionOperator>(geom, grid), sino, emb);
  return term.evaluate(arch, w);
}

// Records (iteration, loss, metrics) at iteration 1, every log_every-th
// iteration and the last one.
class TraceLogger {
 public:
  TraceLogger(const ImageGrid* truth, int log_every, int last_iteration)
      : truth_(truth), log_every_(log_every), last_(last_iteration) {}

  bool due(int iteration) const { return iteration == 1 || iteration % log_every_ == 0 || iteration == last_; }

  void record(int iteration, double loss, const ImageGrid& image) {
    TracePoint p{iteration, loss, std::nullopt, std::nullopt};
    if (truth_) {
      const double range = metrics::data_range_of(*truth_);
      p.psnr = metrics::psnr(image, *truth_, range);
      metrics::SsimConfig cfg;
      cfg.data_range = range;
      if (image.side() >= cfg.window) p.ssim = metrics::ssim(image, *truth_, cfg);
    }
    trace_.push_back(p);
  }

  void set_last(int last) { last_ = last; }
  const std::vector<TracePoint>& trace() const { return trace_; }
  std::vector<TracePoint>& trace() { return trace_; }

 private:
  const ImageGrid* truth_;
  int log_every_;
  int last_;
  std::vector<TracePoint> trace_;
};

// Adam on the data loss of a single network. Each step evaluates the loss
// at the current weights, logs it when due, then updates.
template <class Real>
class InrTrainer {
 public:
  InrTrainer(const DataTerm<Real>& term, nn::SirenArch arch, WeightVector<Real> init, double lr,
             const ImageGrid* truth, int log_every, int planned_iterations)
      : term_(&term),
        arch_(arch),
        w_(std::move(init)),
        adam_(w_.size()),
        lr_(lr),
        log_(truth, log_every, planned_iterations) {
    require_shape(w_.size() == arch_.parameter_count(), "InrTrainer: init length mismatch");
  }

  double step() {
    ++iteration_;
    auto lg = term_->evaluate(arch_, w_);
    if (!std::isfinite(lg.loss))
      throw DivergenceError("training diverged at iteration " + std::to_string(iteration_), log_.trace());
    if (log_.due(iteration_)) log_.record(iteration_, lg.loss, lg.image);
    if (!nn::adam_step(adam_, w_, lg.grad, lr_)) ++skipped_;
    return lg.loss;
  }

  void run(int steps) {
    for (int i = 0; i < steps; ++i) step();
  }

  const WeightVector<Real>& weights() const { return w_; }
  WeightVector<Real>& weights() { return w_; }
  const nn::AdamState<Real>& adam() const { return adam_; }
  int iteration() const { return iteration_; }
  TraceLogger& logger() { return log_; }

  ReconResult<Real> result() const {
    return {inr_render(arch_, w_, term_->features(), term_->grid()), w_, log_.trace(), skipped_};
  }

 private:
  const DataTerm<Real>* term_;
  nn::SirenArch arch_;
  WeightVector<Real> w_;
  nn::AdamState<Real> adam_;
  double lr_;
  TraceLogger log_;
  int iteration_ = 0;
  int skipped_ = 0;
};

// SingleINR from an explicit initialization.
template <class Real>
ReconResult<Real> train_from_init(const DataTerm<Real>& term, const nn::SirenArch& arch, WeightVector<Real> init,
                                  const TrainConfig& cfg, const ImageGrid* truth = nullptr) {
  cfg.validate();
  InrTrainer<Real> trainer(term, arch, std::move(init), cfg.lr, truth, cfg.log_every, cfg.iterations);
  trainer.run(cfg.iterations);
  return trainer.result();
}

// SingleINR: one network per object, initialized from the run seed.
template <class Real>
ReconResult<Real> train_single_inr(const DataTerm<Real>& term, const TrainConfig& cfg,
                                   const ImageGrid* truth = nullptr) {
  const auto arch = cfg.net.arch();
  return train_from_init(term, arch, nn::init_siren<Real>(arch, seeds::init(cfg.seed)), cfg, truth);
}

template <class Real>
ReconResult<Real> train_single_inr(const Sinogram& sino, const GridSpec& grid, const TrainConfig& cfg,
                                   const ImageGrid* truth = nullptr) {
  const auto emb = make_embedding<Real>(cfg.net, cfg.seed);
  DataTerm<Real> term(std::make_shared<ProjectionOperator>(sino.geometry, grid), sino, emb);
  return train_single_inr(term, cfg, truth);
}

// Peak PSNR recorded in a trace, or -inf when none was recorded.
inline double peak_psnr(const std::vector<TracePoint>& trace) {
  double best = -std::numeric_limits<double>::infinity();
  for (const auto& p : trace)
    if (p.psnr) best = std::max(best, *p.psnr);
  return best;
}

// First logged iteration whose PSNR reaches the target, or -1.
inline int iterations_to_reach(const std::vector<TracePoint>& trace, double target_psnr) {
  for (const auto& p : trace)
    if (p.psnr && *p.psnr >= target_psnr) return p.iteration;
  return -1;
}

}  // namespace inrct
