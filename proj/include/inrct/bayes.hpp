#pragma once

#include "inrct/core.hpp"
#include "inrct/nn/adam.hpp"
#include "inrct/nn/siren.hpp"
#include "inrct/recon_single.hpp"

#include <random>

namespace inrct::bayes {

// softplus(x) = log(1 + e^x), evaluated without overflow.
template <class Real>
Real softplus(Real x) {
  return x > Real(20) ? x : std::log1p(std::exp(x));
}

template <class Real>
Real sigmoid(Real x) {
  return Real(1) / (Real(1) + std::exp(-x));
}

// Inverse of softplus for positive y.
inline double softplus_inverse(double y) {
  require(y > 0, "softplus_inverse: argument must be positive");
  return y > 20 ? y : std::log(std::expm1(y));
}

template <class Real>
Vec<Real> softplus(const Vec<Real>& x) {
  return x.unaryExpr([](Real v) { return softplus(v); });
}

// Axis-aligned Gaussian posterior q(w_j) = N(mu, softplus(pi)) of one node.
template <class Real>
struct VariationalNode {
  int id = 0;
  WeightVector<Real> mu;
  WeightVector<Real> pi;
  nn::AdamState<Real> adam_mu;
  nn::AdamState<Real> adam_pi;
  std::mt19937_64 rng;

  VariationalNode() = default;
  VariationalNode(int node_id, WeightVector<Real> mean, double initial_variance, std::uint64_t noise_seed)
      : id(node_id),
        mu(std::move(mean)),
        pi(WeightVector<Real>::Constant(mu.size(), static_cast<Real>(softplus_inverse(initial_variance)))),
        adam_mu(mu.size()),
        adam_pi(mu.size()),
        rng(noise_seed) {}

  Vec<Real> variance() const { return softplus(pi); }
};

// Shared prior N(omega, sigma) over the flat weight vector; sigma holds
// element-wise variances.
template <class Real>
struct LatentPrior {
  WeightVector<Real> omega;
  WeightVector<Real> sigma;

  static LatentPrior standard(Eigen::Index n, double variance = 1.0) {
    return {WeightVector<Real>::Zero(n), WeightVector<Real>::Constant(n, static_cast<Real>(variance))};
  }
};

template <class Real>
struct KlResult {
  double value = 0;
  Vec<Real> grad_mean;      // d KL / d mu_q
  Vec<Real> grad_variance;  // d KL / d rho_q
};

// KL(N(mu_q, rho_q) || N(mu_p, sigma_p)) for diagonal Gaussians
// parameterized by variances, with its analytic gradient in (mu_q, rho_q).
// Accumulated in double.
template <class Real>
KlResult<Real> kl_diag_gauss(const Vec<Real>& mu_q, const Vec<Real>& rho_q, const Vec<Real>& mu_p,
                             const Vec<Real>& sigma_p) {
  const Eigen::Index n = mu_q.size();
  require_shape(rho_q.size() == n && mu_p.size() == n && sigma_p.size() == n, "kl_diag_gauss: length mismatch");
  KlResult<Real> r{0.0, Vec<Real>(n), Vec<Real>(n)};
  for (Eigen::Index i = 0; i < n; ++i) {
    const double rq = rho_q[i], sp = sigma_p[i];
    require(rq > 0 && sp > 0, "kl_diag_gauss: variances must be positive");
    const double d = static_cast<double>(mu_q[i]) - static_cast<double>(mu_p[i]);
    r.value += 0.5 * (std::log(sp / rq) + (rq + d * d) / sp - 1.0);
    r.grad_mean[i] = static_cast<Real>(d / sp);
    r.grad_variance[i] = static_cast<Real>(0.5 * (1.0 / sp - 1.0 / rq));
  }
  return r;
}

template <class Real>
struct WeightSample {
  WeightVector<Real> weights;
  Vec<Real> noise;  // the standard normal draw
};

// Reparameterized draw w = mu + sqrt(softplus(pi)) * eps.
template <class Real>
WeightSample<Real> sample_weights(VariationalNode<Real>& node) {
  std::normal_distribution<double> n(0.0, 1.0);
  Vec<Real> eps(node.mu.size());
  for (Eigen::Index i = 0; i < eps.size(); ++i) eps[i] = static_cast<Real>(n(node.rng));
  WeightVector<Real> w = node.mu + (node.variance().array().sqrt() * eps.array()).matrix();
  return {std::move(w), std::move(eps)};
}

// Gradients of data(w) + beta * KL(q || prior) at a fixed noise draw, given
// the data gradient at w = mu + sqrt(softplus(pi)) * eps.
template <class Real>
struct NodeGradient {
  WeightVector<Real> mu;
  WeightVector<Real> pi;
  double kl = 0;
};

template <class Real>
NodeGradient<Real> node_gradient(const VariationalNode<Real>& node, const LatentPrior<Real>& prior,
                                 const WeightVector<Real>& data_grad, const Vec<Real>& eps, double beta) {
  const Vec<Real> rho = node.variance();
  const auto kl = kl_diag_gauss(node.mu, rho, prior.omega, prior.sigma);
  const Real b = static_cast<Real>(beta);
  NodeGradient<Real> g;
  g.kl = kl.value;
  g.mu = data_grad + b * kl.grad_mean;
  const Vec<Real> dsig = node.pi.unaryExpr([](Real p) { return sigmoid(p); });
  // d sqrt(rho) / d pi = sigmoid(pi) / (2 sqrt(rho))
  const Vec<Real> dsd = (dsig.array() / (Real(2) * rho.array().sqrt())).matrix();
  g.pi = (data_grad.array() * eps.array() * dsd.array() + b * kl.grad_variance.array() * dsig.array()).matrix();
  return g;
}

struct BayesConfig {
  int em_rounds = 20;
  int e_steps = 100;
  double beta = 1e-7;  // grid-searched on a held-out family
  double lr = 1e-3;
  std::uint64_t seed = 0;
  double sigma_floor = 1e-12;
  double initial_variance = 1e-10;  // softplus(pi) at initialization
  double prior_variance = 1.0;     // sigma before the first M-step (omega starts at 0)
  bool shared_init = true;         // all mu_j start from the same network
  bool learn_variance = true;
  int log_every = 25;

  void validate() const {
    require(em_rounds >= 1 && e_steps >= 1, "em_rounds and e_steps must be >= 1");
    require(beta >= 0, "beta must be >= 0");
    require(lr > 0, "learning rate must be > 0");
    require(sigma_floor > 0, "sigma_floor must be > 0");
    require(initial_variance > 0 && prior_variance > 0, "variances must be > 0");
    require(log_every >= 1, "log_every must be >= 1");
  }
};

template <class Real>
struct EStepStats {
  double last_data_loss = 0;
  double last_kl = 0;
};

// T Adam steps on (mu, pi) of one node against a fixed prior, one
// reparameterized sample per step. `first_iteration` numbers the steps in
// the node's trace; metrics are logged for the mode (mu) rendering.
template <class Real>
EStepStats<Real> e_step(VariationalNode<Real>& node, const LatentPrior<Real>& prior, const DataTerm<Real>& term,
                        const nn::SirenArch& arch, double beta, int steps, double lr, TraceLogger* log = nullptr,
                        int first_iteration = 1, bool learn_variance = true) {
  EStepStats<Real> stats;
  for (int t = 0; t < steps; ++t) {
    const int iteration = first_iteration + t;
    auto s = sample_weights(node);
    auto lg = term.evaluate(arch, s.weights);
    if (!std::isfinite(lg.loss)) {
      throw DivergenceError("node " + std::to_string(node.id) + " diverged at iteration " + std::to_string(iteration),
                            log ? log->trace() : std::vector<TracePoint>{});
    }
    auto g = node_gradient(node, prior, lg.grad, s.noise, beta);
    if (log && log->due(iteration)) log->record(iteration, lg.loss, inr_render(arch, node.mu, term.features(), term.grid()));
    nn::adam_step(node.adam_mu, node.mu, g.mu, lr);
    if (learn_variance) nn::adam_step(node.adam_pi, node.pi, g.pi, lr);
    stats.last_data_loss = lg.loss;
    stats.last_kl = g.kl;
  }
  return stats;
}

// Closed-form maximizer of sum_j E_q[log p(w_j | omega, sigma)]:
// omega = mean mu_j, sigma = mean (rho_j + (mu_j - omega)^2), floored.
// Nodes are summed in the given order.
template <class Real>
LatentPrior<Real> m_step(std::span<const VariationalNode<Real>> nodes, double sigma_floor) {
  require(!nodes.empty(), "m_step: no nodes");
  const Eigen::Index n = nodes.front().mu.size();
  Vec<double> omega = Vec<double>::Zero(n);
  for (const auto& node : nodes) omega += node.mu.template cast<double>();
  omega /= static_cast<double>(nodes.size());
  Vec<double> sigma = Vec<double>::Zero(n);
  for (const auto& node : nodes) {
    const Vec<double> d = node.mu.template cast<double>() - omega;
    sigma += node.variance().template cast<double>() + d.cwiseAbs2();
  }
  sigma /= static_cast<double>(nodes.size());
  sigma = sigma.cwiseMax(sigma_floor);
  return {omega.cast<Real>(), sigma.cast<Real>()};
}

template <class Real>
LatentPrior<Real> m_step(const std::vector<VariationalNode<Real>>& nodes, double sigma_floor) {
  return m_step(std::span<const VariationalNode<Real>>(nodes), sigma_floor);
}

struct ElboPoint {
  int round = 0;
  double data = 0;  // sum of single-sample data losses
  double kl = 0;    // sum of KL(q_j || prior) after the M-step
  double elbo = 0;  // -(data + beta * kl)
};

template <class Real>
struct BayesResult {
  std::vector<ReconResult<Real>> nodes;
  std::vector<VariationalNode<Real>> posteriors;
  LatentPrior<Real> prior;
  std::vector<ElboPoint> elbo;
  std::vector<int> diverged;  // ids of nodes dropped after divergence
};

// Variational EM over J nodes: each round runs the E-steps (concurrently,
// against the prior of the previous round), then the closed-form M-step.
// Final images are rendered at the posterior means.
template <class Real>
BayesResult<Real> train_inr_bayes(const std::vector<const DataTerm<Real>*>& terms, const nn::SirenArch& arch,
                                  const BayesConfig& cfg, const std::vector<const ImageGrid*>& truths = {}) {
  cfg.validate();
  require(!terms.empty(), "train_inr_bayes: needs at least one node");
  require(truths.empty() || truths.size() == terms.size(), "train_inr_bayes: truth count mismatch");
  const std::size_t J = terms.size();
  const int total = cfg.em_rounds * cfg.e_steps;
  std::vector<VariationalNode<Real>> nodes;
  std::vector<TraceLogger> logs;
  nodes.reserve(J);
  for (std::size_t j = 0; j < J; ++j) {
    const auto init_seed = cfg.shared_init ? seeds::init(cfg.seed) : seeds::node_init(cfg.seed, j);
    nodes.emplace_back(static_cast<int>(j), nn::init_siren<Real>(arch, init_seed), cfg.initial_variance,
                       seeds::node_noise(cfg.seed, j));
    logs.emplace_back(truths.empty() ? nullptr : truths[j], cfg.log_every, total);
  }
  std::vector<char> alive(J, 1);
  std::vector<EStepStats<Real>> stats(J);
  auto prior = LatentPrior<Real>::standard(arch.parameter_count(), cfg.prior_variance);
  BayesResult<Real> out;
  for (int r = 0; r < cfg.em_rounds; ++r) {
    std::vector<char> failed(J, 0);
    parallel_for(J, [&](std::size_t j) {
      if (!alive[j]) return;
      try {
        stats[j] = e_step(nodes[j], prior, *terms[j], arch, cfg.beta, cfg.e_steps, cfg.lr, &logs[j],
                          r * cfg.e_steps + 1, cfg.learn_variance);
      } catch (const DivergenceError&) {
        failed[j] = 1;
      }
    });
    std::vector<VariationalNode<Real>> live;
    for (std::size_t j = 0; j < J; ++j) {
      if (failed[j]) {
        alive[j] = 0;
        out.diverged.push_back(static_cast<int>(j));
      }
      if (alive[j]) live.push_back(nodes[j]);
    }
    if (live.empty()) throw Error("train_inr_bayes: every node diverged");
    prior = m_step(live, cfg.sigma_floor);
    ElboPoint e{r + 1, 0, 0, 0};
    for (std::size_t j = 0; j < J; ++j) {
      if (!alive[j]) continue;
      e.data += stats[j].last_data_loss;
      e.kl += kl_diag_gauss(nodes[j].mu, nodes[j].variance(), prior.omega, prior.sigma).value;
    }
    e.elbo = -(e.data + cfg.beta * e.kl);
    out.elbo.push_back(e);
  }
  for (std::size_t j = 0; j < J; ++j) {
    out.nodes.push_back({inr_render(arch, nodes[j].mu, terms[j]->features(), terms[j]->grid()), nodes[j].mu,
                         logs[j].trace(), 0});
  }
  out.posteriors = std::move(nodes);
  out.prior = std::move(prior);
  return out;
}

// Reconstructs a new object with a learned prior held fixed: mu starts at
// omega and only the node's posterior is optimized, for `iterations` steps.
template <class Real>
ReconResult<Real> adapt_with_frozen_prior(const DataTerm<Real>& term, const LatentPrior<Real>& prior,
                                          const nn::SirenArch& arch, const BayesConfig& cfg, int iterations,
                                          const ImageGrid* truth = nullptr,
                                          VariationalNode<Real>* posterior_out = nullptr) {
  cfg.validate();
  require(iterations >= 1, "adapt_with_frozen_prior: iterations must be >= 1");
  require_shape(prior.omega.size() == arch.parameter_count(), "adapt_with_frozen_prior: prior does not fit arch");
  VariationalNode<Real> node(0, prior.omega, cfg.initial_variance, seeds::node_noise(cfg.seed, 0));
  TraceLogger log(truth, cfg.log_every, iterations);
  e_step(node, prior, term, arch, cfg.beta, iterations, cfg.lr, &log, 1, cfg.learn_variance);
  ReconResult<Real> res{inr_render(arch, node.mu, term.features(), term.grid()), node.mu, log.trace(), 0};
  if (posterior_out) *posterior_out = std::move(node);
  return res;
}

struct UncertaintyImages {
  ImageGrid mean;
  ImageGrid variance;  // unbiased, pixelwise
};

inline constexpr int kDefaultUncertaintySamples = 10;

// Renders n weight draws from the node's posterior and returns their
// pixelwise mean and unbiased variance. Draws come from `rng`.
template <class Real>
UncertaintyImages posterior_uncertainty(const VariationalNode<Real>& node, const nn::SirenArch& arch,
                                        const Mat<Real>& features, const GridSpec& grid, int n_samples,
                                        std::mt19937_64& rng) {
  require(n_samples >= 2, "posterior_uncertainty: needs at least two samples");
  const Vec<Real> sd = node.variance().array().sqrt();
  std::normal_distribution<double> normal(0.0, 1.0);
  VecD sum = VecD::Zero(static_cast<Eigen::Index>(grid.pixels()));
  VecD sum_sq = sum;
  for (int s = 0; s < n_samples; ++s) {
    WeightVector<Real> w = node.mu;
    for (Eigen::Index i = 0; i < w.size(); ++i) w[i] += sd[i] * static_cast<Real>(normal(rng));
    const VecD img = inr_render(arch, w, features, grid).values();
    sum += img;
    sum_sq += img.cwiseAbs2();
  }
  const double n = n_samples;
  VecD mean = sum / n;
  VecD var = ((sum_sq - n * mean.cwiseAbs2()) / (n - 1)).cwiseMax(0.0);
  return {ImageGrid(grid, std::move(mean)), ImageGrid(grid, std::move(var))};
}

}  // namespace inrct::bayes
