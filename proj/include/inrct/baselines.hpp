#pragma once

#include "inrct/core.hpp"
#include "inrct/nn/adam.hpp"
#include "inrct/nn/siren.hpp"
#include "inrct/recon_single.hpp"

#include <algorithm>
#include <random>

namespace inrct {

// Defaults are the FedAvg schedule (average every 100 steps); maml()
// gives the first-order MAML schedule.
struct MetaConfig {
  int inner_steps = 100;      // K
  double inner_lr = 3e-5;     // eta (MAML inner SGD); 1e-3 diverges on the unnormalized loss
  int outer_iterations = 10;  // T
  double outer_lr = 3e-5;     // alpha (MAML)
  int adaptation_iterations = 1000;
  std::uint64_t seed = 0;

  static MetaConfig maml() {
    MetaConfig m;
    m.inner_steps = 10;
    m.outer_iterations = 100;
    return m;
  }

  void validate() const {
    require(inner_steps >= 1, "inner_steps must be >= 1");
    require(outer_iterations >= 0, "outer_iterations must be >= 0");
    require(adaptation_iterations >= 0, "adaptation_iterations must be >= 0");
    require(inner_lr > 0, "inner learning rate must be > 0");
    require(outer_lr >= 0, "outer learning rate must be >= 0");
  }
};

template <class Real>
struct MetaResult {
  WeightVector<Real> theta;
  std::vector<ReconResult<Real>> nodes;
  std::vector<int> excluded;  // nodes dropped from aggregation after diverging
};

namespace detail {

template <class Real>
WeightVector<Real> mean_of(const std::vector<WeightVector<Real>>& ws, const std::vector<char>& use) {
  WeightVector<Real> acc;
  int n = 0;
  for (std::size_t j = 0; j < ws.size(); ++j) {
    if (!use[j]) continue;
    if (n == 0)
      acc = ws[j];
    else
      acc += ws[j];
    ++n;
  }
  require(n > 0, "every node diverged");
  return acc / static_cast<Real>(n);
}

}  // namespace detail

// FedAvg meta-initialization: every round each node starts from theta, takes
// K local Adam steps (its optimizer state persists across rounds), and theta
// becomes the mean of the local weights. Afterwards each node adapts from
// theta for adaptation_iterations. Node traces span both phases.
template <class Real>
MetaResult<Real> train_fedavg(const std::vector<const DataTerm<Real>*>& terms, const nn::SirenArch& arch,
                              const MetaConfig& meta, const TrainConfig& train,
                              const std::vector<const ImageGrid*>& truths = {}) {
  meta.validate();
  train.validate();
  require(!terms.empty(), "train_fedavg: needs at least one node");
  const std::size_t J = terms.size();
  const int planned = meta.outer_iterations * meta.inner_steps + meta.adaptation_iterations;
  WeightVector<Real> theta = nn::init_siren<Real>(arch, seeds::init(meta.seed));
  std::vector<InrTrainer<Real>> nodes;
  nodes.reserve(J);
  for (std::size_t j = 0; j < J; ++j)
    nodes.emplace_back(*terms[j], arch, theta, train.lr, truths.empty() ? nullptr : truths[j], train.log_every,
                       std::max(planned, 1));
  std::vector<char> alive(J, 1);
  MetaResult<Real> out;
  auto run_phase = [&](int steps) {
    std::vector<char> failed(J, 0);
    parallel_for(J, [&](std::size_t j) {
      if (!alive[j]) return;
      nodes[j].weights() = theta;
      try {
        nodes[j].run(steps);
      } catch (const DivergenceError&) {
        failed[j] = 1;
      }
    });
    for (std::size_t j = 0; j < J; ++j)
      if (failed[j]) {
        alive[j] = 0;
        out.excluded.push_back(static_cast<int>(j));
      }
  };
  for (int t = 0; t < meta.outer_iterations; ++t) {
    run_phase(meta.inner_steps);
    std::vector<WeightVector<Real>> local;
    for (auto& n : nodes) local.push_back(n.weights());
    theta = detail::mean_of(local, alive);
  }
  run_phase(meta.adaptation_iterations);
  out.theta = theta;
  for (std::size_t j = 0; j < J; ++j) out.nodes.push_back(nodes[j].result());
  return out;
}

// One first-order MAML outer update: each node takes K plain SGD steps from
// theta, and theta moves by -alpha times the mean gradient at the adapted
// weights (the inner-loop Jacobian is taken as the identity). Nodes whose
// inner loop diverges are skipped and flagged in `failed`.
template <class Real>
WeightVector<Real> maml_outer_step(const std::vector<const DataTerm<Real>*>& terms, const nn::SirenArch& arch,
                                   const WeightVector<Real>& theta, const MetaConfig& meta,
                                   std::vector<char>* failed = nullptr) {
  const std::size_t J = terms.size();
  std::vector<WeightVector<Real>> grads(J);
  std::vector<char> ok(J, 1);
  parallel_for(J, [&](std::size_t j) {
    WeightVector<Real> w = theta;
    for (int k = 0; k < meta.inner_steps; ++k) {
      auto lg = terms[j]->evaluate(arch, w);
      if (!std::isfinite(lg.loss) || !lg.grad.allFinite()) {
        ok[j] = 0;
        return;
      }
      w -= static_cast<Real>(meta.inner_lr) * lg.grad;
    }
    auto lg = terms[j]->evaluate(arch, w);
    if (!std::isfinite(lg.loss) || !lg.grad.allFinite()) {
      ok[j] = 0;
      return;
    }
    grads[j] = std::move(lg.grad);
  });
  if (failed) *failed = ok;
  return theta - static_cast<Real>(meta.outer_lr) * detail::mean_of(grads, ok);
}

// First-order MAML meta-initialization followed by per-node Adam adaptation.
template <class Real>
MetaResult<Real> train_maml_first_order(const std::vector<const DataTerm<Real>*>& terms, const nn::SirenArch& arch,
                                        const MetaConfig& meta, const TrainConfig& train,
                                        const std::vector<const ImageGrid*>& truths = {}) {
  meta.validate();
  train.validate();
  require(!terms.empty(), "train_maml_first_order: needs at least one node");
  const std::size_t J = terms.size();
  MetaResult<Real> out;
  WeightVector<Real> theta = nn::init_siren<Real>(arch, seeds::init(meta.seed));
  std::vector<char> alive(J, 1);
  for (int t = 0; t < meta.outer_iterations; ++t) {
    std::vector<const DataTerm<Real>*> live;
    std::vector<std::size_t> ids;
    for (std::size_t j = 0; j < J; ++j)
      if (alive[j]) {
        live.push_back(terms[j]);
        ids.push_back(j);
      }
    std::vector<char> ok;
    theta = maml_outer_step(live, arch, theta, meta, &ok);
    for (std::size_t i = 0; i < ids.size(); ++i)
      if (!ok[i]) {
        alive[ids[i]] = 0;
        out.excluded.push_back(static_cast<int>(ids[i]));
      }
  }
  out.theta = theta;
  out.nodes.resize(J);
  parallel_for(J, [&](std::size_t j) {
    TrainConfig adapt = train;
    adapt.iterations = std::max(meta.adaptation_iterations, 1);
    out.nodes[j] = train_from_init(*terms[j], arch, theta, adapt, truths.empty() ? nullptr : truths[j]);
  });
  return out;
}

// Static/transient composition: a shared static network G maps encoded
// coordinates to [r, features]; each node's transient network H maps
// [code_j, features] to an intensity and renders H + r.
struct WildConfig {
  int static_depth = 8;
  int static_width = 64;
  int feature_dim = 16;  // channels of G beyond the static intensity
  int transient_depth = 4;
  int transient_width = 32;
  int code_dim = 16;
  double code_init_std = 0.1;  // b_j ~ N(0, 0.01)
  bool freeze_transients = false;
  bool zero_transient_output = false;
  bool shared_transient_init = false;  // every node gets node 0's transient weights and code

  void validate() const {
    require(static_depth >= 1 && transient_depth >= 1, "depths must be >= 1");
    require(feature_dim >= 0 && code_dim >= 0, "feature and code dims must be >= 0");
    require(code_init_std >= 0, "code_init_std must be >= 0");
  }

  nn::SirenArch static_arch(const NetSpec& net) const {
    return {2 * net.frequencies, static_width, static_depth, 1 + feature_dim, net.omega0};
  }
  nn::SirenArch transient_arch(const NetSpec& net) const {
    return {code_dim + feature_dim, transient_width, transient_depth, 1, net.omega0};
  }
};

template <class Real>
struct WildResult {
  WeightVector<Real> static_weights;
  std::vector<WeightVector<Real>> transient_weights;
  std::vector<Vec<Real>> codes;
  std::vector<ReconResult<Real>> nodes;
  ImageGrid static_image;  // G^r alone
};

template <class Real>
class WildModel {
 public:
  WildModel(const WildConfig& cfg, const NetSpec& net, std::size_t nodes, std::uint64_t seed)
      : cfg_(cfg), g_arch_(cfg.static_arch(net)), h_arch_(cfg.transient_arch(net)) {
    cfg.validate();
    phi = nn::init_siren<Real>(g_arch_, seeds::init(seed));
    for (std::size_t j = 0; j < nodes; ++j) {
      const std::size_t k = cfg.shared_transient_init ? 0 : j;
      WeightVector<Real> w = nn::init_siren<Real>(h_arch_, seeds::node_init(seed, k));
      if (cfg.zero_transient_output) {
        const auto last = h_arch_.layers().back();
        w.segment(last.offset, w.size() - last.offset).setZero();
      }
      transients.push_back(std::move(w));
      std::mt19937_64 rng(seeds::node_noise(seed, k));
      std::normal_distribution<double> n(0.0, cfg.code_init_std);
      Vec<Real> b(cfg.code_dim);
      for (Eigen::Index i = 0; i < b.size(); ++i) b[i] = static_cast<Real>(n(rng));
      codes.push_back(std::move(b));
    }
  }

  const nn::SirenArch& static_arch() const { return g_arch_; }
  const nn::SirenArch& transient_arch() const { return h_arch_; }

  Mat<Real> transient_input(const Mat<Real>& static_out, std::size_t j) const {
    Mat<Real> in(cfg_.code_dim + cfg_.feature_dim, static_out.cols());
    in.topRows(cfg_.code_dim) = codes[j].replicate(1, static_out.cols());
    in.bottomRows(cfg_.feature_dim) = static_out.bottomRows(cfg_.feature_dim);
    return in;
  }

  Vec<Real> render(const Mat<Real>& features, std::size_t j) const {
    const auto g = nn::siren_forward(g_arch_, phi, features);
    const auto h = nn::siren_forward(h_arch_, transients[j], transient_input(g.output, j));
    return (h.output.row(0) + g.output.row(0)).transpose();
  }

  Vec<Real> render_static(const Mat<Real>& features) const {
    return nn::siren_forward(g_arch_, phi, features).output.row(0).transpose();
  }

  WeightVector<Real> phi;
  std::vector<WeightVector<Real>> transients;
  std::vector<Vec<Real>> codes;

 private:
  WildConfig cfg_;
  nn::SirenArch g_arch_;
  nn::SirenArch h_arch_;
};

// Jointly minimizes sum_j ||A_j (H_j(b_j, G^{\r}(C)) + G^r(C)) - y_j||^2
// over the static weights, every transient network and every code with
// Adam. All nodes must share one coordinate set (same grid and embedding).
template <class Real>
WildResult<Real> train_inrwild(const std::vector<const DataTerm<Real>*>& terms, const WildConfig& wild,
                               const TrainConfig& train, const std::vector<const ImageGrid*>& truths = {}) {
  train.validate();
  require(terms.size() >= 1, "train_inrwild: needs at least one node");
  const std::size_t J = terms.size();
  const Mat<Real>& features = terms.front()->features();
  for (const auto* t : terms) require_shape(t->features().cols() == features.cols(), "train_inrwild: grids differ");
  WildModel<Real> model(wild, train.net, J, train.seed);
  const auto& g_arch = model.static_arch();
  const auto& h_arch = model.transient_arch();
  nn::AdamState<Real> adam_phi(model.phi.size());
  std::vector<nn::AdamState<Real>> adam_w, adam_b;
  std::vector<TraceLogger> logs;
  for (std::size_t j = 0; j < J; ++j) {
    adam_w.emplace_back(model.transients[j].size());
    adam_b.emplace_back(model.codes[j].size());
    logs.emplace_back(truths.empty() ? nullptr : truths[j], train.log_every, train.iterations);
  }
  const Eigen::Index N = features.cols();
  const int F = wild.feature_dim;
  const int D = wild.code_dim;
  for (int it = 1; it <= train.iterations; ++it) {
    const auto g_tape = nn::siren_forward(g_arch, model.phi, features);
    std::vector<Mat<Real>> static_grads(J);
    std::vector<WeightVector<Real>> w_grads(J);
    std::vector<Vec<Real>> b_grads(J);
    std::vector<double> losses(J);
    parallel_for(J, [&](std::size_t j) {
      const auto h_tape = nn::siren_forward(h_arch, model.transients[j], model.transient_input(g_tape.output, j));
      VecD image = (h_tape.output.row(0) + g_tape.output.row(0)).transpose().template cast<double>();
      const VecD residual = terms[j]->op().apply(image) - terms[j]->measurement().values;
      losses[j] = residual.squaredNorm();
      if (!std::isfinite(losses[j])) return;
      if (logs[j].due(it)) logs[j].record(it, losses[j], ImageGrid(terms[j]->grid(), image));
      const Mat<Real> pix = (2.0 * terms[j]->op().adjoint(residual)).transpose().template cast<Real>();
      Mat<Real> input_grad;
      w_grads[j] = nn::siren_backward(h_arch, model.transients[j], h_tape, pix, &input_grad);
      b_grads[j] = input_grad.topRows(D).rowwise().sum();
      Mat<Real> sg(1 + F, N);
      sg.row(0) = pix;
      sg.bottomRows(F) = input_grad.bottomRows(F);
      static_grads[j] = std::move(sg);
    });
    for (std::size_t j = 0; j < J; ++j)
      if (!std::isfinite(losses[j]))
        throw DivergenceError("inrwild: node " + std::to_string(j) + " diverged at iteration " + std::to_string(it),
                              logs[j].trace());
    Mat<Real> total = static_grads[0];
    for (std::size_t j = 1; j < J; ++j) total += static_grads[j];
    const auto phi_grad = nn::siren_backward(g_arch, model.phi, g_tape, total);
    nn::adam_step(adam_phi, model.phi, phi_grad, train.lr);
    if (!wild.freeze_transients) {
      for (std::size_t j = 0; j < J; ++j) {
        nn::adam_step(adam_w[j], model.transients[j], w_grads[j], train.lr);
        if (D > 0) nn::adam_step(adam_b[j], model.codes[j], b_grads[j], train.lr);
      }
    }
  }
  WildResult<Real> out;
  const GridSpec& grid = terms.front()->grid();
  for (std::size_t j = 0; j < J; ++j)
    out.nodes.push_back({to_image(grid, model.render(features, j)), model.transients[j], logs[j].trace(), 0});
  out.static_image = to_image(grid, model.render_static(features));
  out.static_weights = model.phi;
  out.transient_weights = model.transients;
  out.codes = model.codes;
  return out;
}

}  // namespace inrct
