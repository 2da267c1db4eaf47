// Acceptance checks. Usage: inrct_acceptance [criterion...]
// Prints one PASS/FAIL line per criterion; exit status 1 if any failed.

#include "inrct/baselines.hpp"
#include "inrct/bayes.hpp"
#include "inrct/classical.hpp"
#include "inrct/data_sim.hpp"
#include "inrct/harness/run.hpp"
#include "inrct/metrics.hpp"
#include "inrct/recon_single.hpp"

#include <chrono>
#include <cstdio>
#include <functional>
#include <iostream>
#include <map>
#include <random>
#include <sstream>

using namespace inrct;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fixed(double v, int digits = 3) {
  std::ostringstream s;
  s.setf(std::ios::fixed);
  s.precision(digits);
  s << v;
  return s.str();
}

std::string sci(double v) {
  std::ostringstream s;
  s.precision(3);
  s << std::scientific << v;
  return s.str();
}

void note(const std::string& s) { std::cerr << "  " << s << std::endl; }

VecD random_vec(Eigen::Index n, std::mt19937_64& rng) {
  std::normal_distribution<double> g;
  VecD v(n);
  for (auto& x : v) x = g(rng);
  return v;
}

double rel(const VecD& a, const VecD& b) { return (a - b).norm() / std::max(b.norm(), 1e-300); }

// 1. adjointness
Outcome adjointness() {
  const auto t0 = Clock::now();
  const auto grid = GridSpec::unit_square(32);
  const auto g = ProjectionGeometry::parallel(20, grid);
  std::mt19937_64 rng(1);
  double worst = 0;
  for (int t = 0; t < 100; ++t) {
    const ImageGrid x(grid, random_vec(grid.pixels(), rng));
    const Sinogram y(g, random_vec(static_cast<Eigen::Index>(g.bins()), rng));
    const double lhs = forward_project(x, g).values.dot(y.values);
    const double rhs = x.values().dot(back_project(y, g, grid).values());
    worst = std::max(worst, std::abs(lhs - rhs) / std::max(std::abs(lhs), std::abs(rhs)));
  }
  const double dt = seconds_since(t0);
  return {worst < 1e-9 && dt < 10,
          "max normalized discrepancy " + sci(worst) + " (< 1e-9), " + fixed(dt, 2) + " s (< 10 s)"};
}

// 2. dense oracle
Outcome dense_oracle() {
  std::mt19937_64 rng(2);
  double worst = 0;
  int instances = 0;
  for (int side : {1, 2, 3, 4, 5, 8, 11, 16, 23, 32})
    for (int n_angles : {1, 3, 20})
      for (double arc : {180.0, 360.0}) {
        const auto grid = GridSpec::unit_square(side);
        const auto g = ProjectionGeometry::parallel(n_angles, grid, arc);
        const MatD A = build_dense_operator(g, grid);
        const ProjectionOperator op(g, grid);
        const ImageGrid x(grid, random_vec(grid.pixels(), rng));
        const Sinogram y(g, random_vec(static_cast<Eigen::Index>(g.bins()), rng));
        const VecD ax = A * x.values(), aty = A.transpose() * y.values;
        worst = std::max({worst, rel(forward_project(x, g).values, ax), rel(back_project(y, g, grid).values(), aty),
                          rel(op.apply(x.values()), ax), rel(op.adjoint(y.values), aty)});
        ++instances;
      }
  return {worst < 1e-10, std::to_string(instances) + " instances, max relative error " + sci(worst) + " (< 1e-10)"};
}

// 3. end-to-end gradient
Outcome network_gradient() {
  const auto t0 = Clock::now();
  struct Case {
    int depth, width, frequencies;
    double omega0;
  };
  const std::vector<Case> cases{{1, 8, 2, 30}, {2, 12, 3, 30}, {3, 16, 4, 15}, {4, 10, 2, 30}, {4, 16, 4, 15},
                                {2, 5, 6, 20}};
  const auto grid = GridSpec::unit_square(12);
  const auto g = ProjectionGeometry::parallel(5, grid);
  PhantomFamilySpec ps;
  ps.side = 12;
  ps.count = 1;
  const auto y = forward_project(make_phantom_family(ps)[0], g);
  auto op = std::make_shared<ProjectionOperator>(g, grid);
  double worst = 0;
  int idx = 0;
  for (const auto& c : cases) {
    NetSpec net;
    net.depth = c.depth;
    net.width = c.width;
    net.frequencies = c.frequencies;
    net.omega0 = c.omega0;
    const auto arch = net.arch();
    DataTerm<double> term(op, y, make_embedding<double>(net, 40 + idx));
    const VecD w = nn::init_siren<double>(arch, 50 + idx);
    const VecD grad = term.evaluate(arch, w).grad;
    VecD fd(w.size());
    const double h = 1e-6;
    for (Eigen::Index i = 0; i < w.size(); ++i) {
      VecD wp = w, wm = w;
      wp[i] += h;
      wm[i] -= h;
      fd[i] = (term.evaluate(arch, wp).loss - term.evaluate(arch, wm).loss) / (2 * h);
    }
    const double e = rel(grad, fd);
    note("arch depth " + std::to_string(c.depth) + " width " + std::to_string(c.width) + " P " +
         std::to_string(arch.parameter_count()) + ": " + sci(e));
    worst = std::max(worst, e);
    ++idx;
  }
  const double dt = seconds_since(t0);
  return {worst < 1e-5 && dt < 60, std::to_string(cases.size()) + " architectures, max relative error " + sci(worst) +
                                       " (< 1e-5), " + fixed(dt, 2) + " s (< 60 s)"};
}

// 4. KL oracle
Outcome kl_oracle() {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> pos(0.2, 3.0);
  std::normal_distribution<double> gauss;
  const int dim = 50, samples = 1000000;
  double worst_z = 0;
  bool self_zero = true;
  for (int inst = 0; inst < 20; ++inst) {
    VecD mq = random_vec(dim, rng), mp = random_vec(dim, rng), rq(dim), rp(dim);
    for (int i = 0; i < dim; ++i) rq[i] = pos(rng), rp[i] = pos(rng);
    const double exact = bayes::kl_diag_gauss(mq, rq, mp, rp).value;
    self_zero = self_zero && bayes::kl_diag_gauss(mq, rq, mq, rq).value == 0.0;
    const VecD sq = rq.cwiseSqrt();
    double s = 0, s2 = 0;
    for (int k = 0; k < samples; ++k) {
      double v = 0;
      for (int i = 0; i < dim; ++i) {
        const double z = gauss(rng);
        const double zp = (mq[i] + sq[i] * z - mp[i]);
        v += -0.5 * std::log(rq[i]) - 0.5 * z * z + 0.5 * std::log(rp[i]) + zp * zp / (2 * rp[i]);
      }
      s += v;
      s2 += v * v;
    }
    const double mean = s / samples;
    const double se = std::sqrt((s2 / samples - mean * mean) / samples);
    worst_z = std::max(worst_z, std::abs(mean - exact) / se);
  }
  return {worst_z < 3 && self_zero, "20 instances, worst |MC - exact| = " + fixed(worst_z, 2) +
                                        " standard errors (< 3), KL(q||q) == 0: " + (self_zero ? "yes" : "no")};
}

// E_q[log N(w | omega, sigma)] summed over nodes, constants dropped.
double mstep_objective(const std::vector<bayes::VariationalNode<double>>& nodes, const VecD& omega,
                       const VecD& sigma) {
  double acc = 0;
  for (const auto& n : nodes) {
    const VecD rho = n.variance();
    for (Eigen::Index i = 0; i < omega.size(); ++i) {
      const double d = n.mu[i] - omega[i];
      acc += -0.5 * std::log(sigma[i]) - (rho[i] + d * d) / (2 * sigma[i]);
    }
  }
  return acc;
}

// 5. M-step optimality
Outcome mstep_optimality() {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> pos(0.2, 3.0);
  std::normal_distribution<double> perturb(0, 0.1);
  auto node = [&](int id, int dim) {
    bayes::VariationalNode<double> n(id, random_vec(dim, rng), 1.0, 1);
    for (auto& p : n.pi) p = bayes::softplus_inverse(pos(rng));
    return n;
  };
  int beaten = 0;
  double min_margin = 1e300;
  for (int set = 0; set < 10; ++set) {
    std::vector<bayes::VariationalNode<double>> nodes;
    for (int j = 0; j < 2 + set; ++j) nodes.push_back(node(j, 16));
    const auto p = bayes::m_step(nodes, 1e-12);
    const double best = mstep_objective(nodes, p.omega, p.sigma);
    for (int k = 0; k < 1000; ++k) {
      VecD o = p.omega, s = p.sigma;
      for (Eigen::Index i = 0; i < o.size(); ++i) {
        o[i] += perturb(rng);
        s[i] *= std::exp(perturb(rng));
      }
      const double v = mstep_objective(nodes, o, s);
      if (v > best) ++beaten;
      min_margin = std::min(min_margin, best - v);
    }
  }
  const auto single = node(0, 40);
  const auto p1 = bayes::m_step(std::vector<bayes::VariationalNode<double>>{single}, 1e-12);
  const bool exact = p1.omega == single.mu && p1.sigma == single.variance();
  return {beaten == 0 && exact, "10 node sets x 1000 perturbations, perturbations beating closed form: " +
                                    std::to_string(beaten) + " (min margin " + sci(min_margin) +
                                    "), J = 1 exact: " + (exact ? "yes" : "no")};
}

// 6. noise model
Outcome noise_model() {
  const int bins = 100000;
  ProjectionGeometry g;
  g.angles = {0.0};
  g.detector_count = bins;
  g.detector_spacing = 1.0;
  double worst = 0;
  std::uint64_t seed = 60;
  for (double y0 : {0.0, 0.5, 2.0, 6.0}) {
    NoiseSpec ns;
    ns.photon_count = 5000;
    ns.gamma_abs = 0.5;
    ns.max_attenuation = 0;
    ns.seed = seed++;
    const auto noisy = apply_poisson_noise(Sinogram(g, VecD::Constant(bins, y0)), ns);
    const double lambda = expected_counts(y0, ns);
    double m = 0, m2 = 0;
    for (double y : noisy.sinogram.values) {
      const double counts = ns.photon_count * std::exp(-ns.gamma_abs * y);
      m += counts;
      m2 += counts * counts;
    }
    m /= bins;
    const double var = m2 / bins - m * m;
    note("y " + fixed(y0, 1) + " lambda " + fixed(lambda, 1) + " mean " + fixed(m, 2) + " var " + fixed(var, 2));
    worst = std::max({worst, std::abs(m / lambda - 1), std::abs(var / lambda - 1)});
  }
  return {worst < 0.02, "I0 5000, 4 attenuation levels x 1e5 bins, worst relative moment error " + fixed(100 * worst, 3) +
                            "% (< 2%)"};
}

// 7. classical sanity
Outcome classical() {
  const auto t0 = Clock::now();
  const auto disk = make_disk(128, 0.5);
  auto run = [&](int angles) {
    const auto g = ProjectionGeometry::parallel(angles, disk.spec());
    return metrics::psnr(fbp(forward_project(disk, g), g, disk.spec()), disk, metrics::data_range_of(disk));
  };
  const double p180 = run(180), p40 = run(40);
  const double dt = seconds_since(t0);
  return {p180 >= 25 && p40 < p180 && dt < 30, "FBP 128x128 disk: 180 angles " + fixed(p180) + " dB (>= 25), 40 angles " +
                                                   fixed(p40) + " dB (< 180-angle), " + fixed(dt, 2) + " s (< 30 s)"};
}

// Shared setup for the joint-reconstruction criteria.
constexpr int kFamily = 10;
constexpr int kIterations = 2000;

struct JointProblem {
  std::uint64_t seed;
  std::vector<ImageGrid> truth;  // kFamily members plus one held out
  TrainConfig cfg;
  nn::FourierEmbedding<float> emb;
  std::shared_ptr<ProjectionOperator> op;
  std::vector<DataTerm<float>> terms;

  JointProblem(std::uint64_t s, const std::optional<double>& photons, int iterations)
      : seed(s), cfg(make_cfg(s, iterations)), emb(make_embedding<float>(cfg.net, s)) {
    PhantomFamilySpec ps;
    ps.side = 64;
    ps.count = kFamily + 1;
    ps.jitter = 0.1;
    ps.seed = s;
    truth = make_phantom_family(ps);
    op = std::make_shared<ProjectionOperator>(ProjectionGeometry::parallel(20, truth[0].spec()), truth[0].spec());
    terms.reserve(truth.size());
    for (std::size_t j = 0; j < truth.size(); ++j) {
      Sinogram y = op->project(truth[j]);
      if (photons) {
        NoiseSpec ns;
        ns.photon_count = *photons;
        ns.seed = mix_seed(s, 0x5000 + j);
        y = apply_poisson_noise(y, ns).sinogram;
      }
      terms.emplace_back(op, y, emb);
    }
  }

  static TrainConfig make_cfg(std::uint64_t s, int iterations) {
    TrainConfig c;
    c.net.width = 32;
    c.iterations = iterations;
    c.seed = s;
    c.log_every = 10;
    return c;
  }

  bayes::BayesConfig bayes_cfg() const {
    bayes::BayesConfig b;
    b.seed = seed;
    b.lr = cfg.lr;
    b.log_every = cfg.log_every;
    b.em_rounds = cfg.iterations / b.e_steps;
    return b;
  }

  std::vector<const DataTerm<float>*> family_terms() const {
    std::vector<const DataTerm<float>*> p;
    for (int j = 0; j < kFamily; ++j) p.push_back(&terms[j]);
    return p;
  }
  std::vector<const ImageGrid*> family_truths() const {
    std::vector<const ImageGrid*> p;
    for (int j = 0; j < kFamily; ++j) p.push_back(&truth[j]);
    return p;
  }
};

double final_psnr(const ImageGrid& img, const ImageGrid& truth) {
  return metrics::psnr(img, truth, metrics::data_range_of(truth));
}

// Problems and INR-Bayes runs are reused across criteria within a process.
std::map<std::uint64_t, std::unique_ptr<JointProblem>> g_problems;
std::map<std::uint64_t, bayes::BayesResult<float>> g_bayes;

JointProblem& noiseless(std::uint64_t seed) {
  auto& p = g_problems[seed];
  if (!p) p = std::make_unique<JointProblem>(seed, std::nullopt, kIterations);
  return *p;
}

const bayes::BayesResult<float>& noiseless_bayes(std::uint64_t seed) {
  auto it = g_bayes.find(seed);
  if (it != g_bayes.end()) return it->second;
  auto& p = noiseless(seed);
  const auto t0 = Clock::now();
  auto res = bayes::train_inr_bayes(p.family_terms(), p.cfg.net.arch(), p.bayes_cfg(), p.family_truths());
  note("seed " + std::to_string(seed) + " inr-bayes trained in " + fixed(seconds_since(t0), 1) + " s");
  return g_bayes.emplace(seed, std::move(res)).first->second;
}

// 8. joint beats single
Outcome joint_beats_single() {
  const auto t0 = Clock::now();
  bool all = true;
  std::string detail;
  for (std::uint64_t seed : {1, 2, 3}) {
    auto& p = noiseless(seed);
    double single = 0, joint = 0;
    for (int j = 0; j < kFamily; ++j)
      single += final_psnr(train_single_inr(p.terms[j], p.cfg, &p.truth[j]).image, p.truth[j]) / kFamily;
    const auto& res = noiseless_bayes(seed);
    for (int j = 0; j < kFamily; ++j) joint += final_psnr(res.nodes[j].image, p.truth[j]) / kFamily;
    note("seed " + std::to_string(seed) + ": single " + fixed(single) + " dB, inr-bayes " + fixed(joint) + " dB");
    all = all && joint > single;
    detail += "seed " + std::to_string(seed) + " bayes " + fixed(joint) + " vs single " + fixed(single) + " dB; ";
  }
  return {all, detail + fixed(seconds_since(t0) / 60, 1) + " min"};
}

// 9. overfitting robustness
Outcome overfitting() {
  const std::uint64_t seed = 1;
  JointProblem p(seed, 5000.0, 2 * kIterations);
  const auto res = bayes::train_inr_bayes(p.family_terms(), p.cfg.net.arch(), p.bayes_cfg(), p.family_truths());
  double worst_drop = -1e300, mean_final = 0, mean_peak = 0;
  for (int j = 0; j < kFamily; ++j) {
    const double fin = final_psnr(res.nodes[j].image, p.truth[j]);
    const double peak = std::max(peak_psnr(res.nodes[j].trace), fin);
    worst_drop = std::max(worst_drop, peak - fin);
    mean_final += fin / kFamily;
    mean_peak += peak / kFamily;
  }
  double s_final = 0, s_peak = 0;
  for (int j = 0; j < kFamily; ++j) {
    const auto r = train_single_inr(p.terms[j], p.cfg, &p.truth[j]);
    const double fin = final_psnr(r.image, p.truth[j]);
    s_final += fin / kFamily;
    s_peak += std::max(peak_psnr(r.trace), fin) / kFamily;
  }
  return {worst_drop <= 1.0, "I0 5000, " + std::to_string(2 * kIterations) + " iterations: inr-bayes peak " +
                                 fixed(mean_peak) + " final " + fixed(mean_final) + " dB, worst node drop " +
                                 fixed(worst_drop) + " dB (<= 1.0); single-inr (reported only) peak " + fixed(s_peak) +
                                 " final " + fixed(s_final) + " dB, drop " + fixed(s_peak - s_final) + " dB"};
}

// 10. frozen-prior adaptation
Outcome frozen_prior() {
  bool all = true;
  std::string detail;
  for (std::uint64_t seed : {1, 2, 3}) {
    auto& p = noiseless(seed);
    const auto& prior = noiseless_bayes(seed).prior;
    const auto& term = p.terms[kFamily];
    const auto& truth = p.truth[kFamily];
    auto bc = p.bayes_cfg();
    bc.seed = mix_seed(seed, 0xADA0);
    const auto adapted = bayes::adapt_with_frozen_prior(term, prior, p.cfg.net.arch(), bc, p.cfg.iterations, &truth);
    const auto scratch = train_single_inr(term, p.cfg, &truth);
    const double s_final = final_psnr(scratch.image, truth);
    const double a_final = final_psnr(adapted.image, truth);
    const int it_a = iterations_to_reach(adapted.trace, s_final - 1);
    const int it_s = iterations_to_reach(scratch.trace, s_final - 1);
    const bool ok = it_a > 0 && it_a < it_s && a_final >= s_final;
    all = all && ok;
    detail += "seed " + std::to_string(seed) + " adapt " + fixed(a_final) + " dB @" + std::to_string(it_a) +
              " vs scratch " + fixed(s_final) + " dB @" + std::to_string(it_s) + "; ";
  }
  return {all, detail};
}

// 11. EM trend
Outcome em_trend() {
  const auto& elbo = noiseless_bayes(1).elbo;
  const std::size_t n = elbo.size();
  const std::size_t limit = (n * 8) / 10;
  std::vector<double> avg;
  for (std::size_t r = 2; r < limit; ++r) avg.push_back((elbo[r - 2].elbo + elbo[r - 1].elbo + elbo[r].elbo) / 3);
  int decreases = 0;
  for (std::size_t k = 1; k < avg.size(); ++k)
    if (avg[k] < avg[k - 1]) ++decreases;
  std::string trace;
  for (double a : avg) trace += " " + fixed(a, 3);
  return {!avg.empty() && decreases == 0, std::to_string(n) + " rounds, window-3 moving average over first " +
                                              std::to_string(limit) + ":" + trace + "; decreases: " +
                                              std::to_string(decreases)};
}

// 12. baseline parity
Outcome baseline_parity() {
  NetSpec net;
  net.depth = 3;
  net.width = 12;
  net.frequencies = 4;
  const auto arch = net.arch();
  PhantomFamilySpec ps;
  ps.side = 16;
  ps.count = 3;
  ps.seed = 12;
  const auto fam = make_phantom_family(ps);
  auto op = std::make_shared<ProjectionOperator>(ProjectionGeometry::parallel(8, fam[0].spec()), fam[0].spec());
  const auto emb = make_embedding<double>(net, 12);
  std::vector<DataTerm<double>> terms;
  for (const auto& f : fam) terms.emplace_back(op, op->project(f), emb);
  TrainConfig tc;
  tc.net = net;
  tc.iterations = 1;
  tc.seed = 9;
  tc.log_every = 1;

  // FedAvg with one node
  MetaConfig m;
  m.inner_steps = 7;
  m.outer_iterations = 4;
  m.adaptation_iterations = 12;
  m.seed = 9;
  const auto fed = train_fedavg<double>({&terms[0]}, arch, m, tc, {&fam[0]});
  auto sc = tc;
  sc.iterations = 4 * 7 + 12;
  const auto single = train_single_inr(terms[0], sc, &fam[0]);
  bool fed_ok = fed.nodes[0].weights == single.weights && fed.nodes[0].trace.size() == single.trace.size();
  for (std::size_t i = 0; fed_ok && i < single.trace.size(); ++i)
    fed_ok = fed.nodes[0].trace[i].iteration == single.trace[i].iteration &&
             fed.nodes[0].trace[i].loss == single.trace[i].loss && fed.nodes[0].trace[i].psnr == single.trace[i].psnr &&
             fed.nodes[0].trace[i].ssim == single.trace[i].ssim;

  // MAML with zero outer rate
  MetaConfig mm;
  mm.inner_steps = 3;
  mm.outer_iterations = 5;
  mm.outer_lr = 0;
  mm.adaptation_iterations = 2;
  mm.seed = 4;
  std::vector<const DataTerm<double>*> all{&terms[0], &terms[1], &terms[2]};
  auto mc = tc;
  mc.seed = 4;
  const auto maml = train_maml_first_order(all, arch, mm, mc);
  const bool maml_ok = maml.theta == nn::init_siren<double>(arch, seeds::init(4));

  // INRWild with identical nodes
  std::vector<DataTerm<double>> same;
  for (int j = 0; j < 3; ++j) same.emplace_back(op, terms[0].measurement(), emb);
  WildConfig w;
  w.static_depth = 3;
  w.static_width = 12;
  w.feature_dim = 4;
  w.transient_depth = 2;
  w.transient_width = 8;
  w.code_dim = 3;
  w.shared_transient_init = true;
  auto wc = tc;
  wc.iterations = 25;
  const auto wild = train_inrwild<double>({&same[0], &same[1], &same[2]}, w, wc);
  bool wild_ok = true;
  for (int j = 1; j < 3; ++j)
    wild_ok = wild_ok && wild.transient_weights[j] == wild.transient_weights[0] && wild.codes[j] == wild.codes[0] &&
              wild.nodes[j].image.values() == wild.nodes[0].image.values();

  auto yn = [](bool b) { return std::string(b ? "yes" : "no"); };
  return {fed_ok && maml_ok && wild_ok, "fedavg J=1 == single-inr traces: " + yn(fed_ok) +
                                            ", maml alpha=0 keeps theta: " + yn(maml_ok) +
                                            ", inrwild identical nodes -> identical transients: " + yn(wild_ok)};
}

// 13. determinism
Outcome determinism() {
  namespace fs = std::filesystem;
  const fs::path root = fs::temp_directory_path() / "inrct_acceptance_determinism";
  fs::remove_all(root);
  std::vector<std::string> differing;
  int compared = 0;
  for (const auto& method : harness::method_names()) {
    harness::json doc = harness::json::parse(R"({
      "dataset": {"kind": "phantom", "side": 24, "count": 3, "jitter": 0.1},
      "geometry": {"angles": 10},
      "noise": {"photon_count": 5000},
      "net": {"depth": 3, "width": 16, "frequencies": 8},
      "run": {"iterations": 60, "seed": 13, "log_every": 10, "previews": false}
    })");
    doc["method"] = {{"name", method}};
    if (method == "fedavg" || method == "maml") doc["method"].update({{"inner_steps", 5}, {"outer_iterations", 4}});
    if (method == "inr-bayes" || method == "bayes-adapt") doc["method"]["e_steps"] = 20;
    if (method == "sirt") doc["method"]["iterations"] = 50;
    std::string first;
    for (int rep = 0; rep < 2; ++rep) {
      doc["run"]["output"] = (root / (method + "_" + std::to_string(rep))).string();
      harness::run_experiment(harness::parse_config(doc));
      std::string bytes;
      for (const auto& e : fs::recursive_directory_iterator(doc["run"]["output"].get<std::string>())) {
        if (e.path().extension() != ".csv") continue;
        std::ifstream in(e.path(), std::ios::binary);
        bytes += e.path().filename().string() + "\n" + std::string(std::istreambuf_iterator<char>(in), {});
      }
      if (rep == 0)
        first = bytes;
      else if (bytes != first)
        differing.push_back(method);
    }
    ++compared;
  }
  std::string which;
  for (const auto& d : differing) which += " " + d;
  fs::remove_all(root);
  return {differing.empty(), std::to_string(compared) + " methods re-run with the same seed, csv files differing:" +
                                 (which.empty() ? std::string(" none") : which)};
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::function<Outcome()>> criteria{
      adjointness,  dense_oracle, network_gradient,   kl_oracle,    mstep_optimality,
      noise_model,  classical,    joint_beats_single, overfitting,  frozen_prior,
      em_trend,     baseline_parity, determinism};
  std::vector<int> pick;
  for (int i = 1; i < argc; ++i) {
    const int c = std::atoi(argv[i]);
    if (c < 1 || c > static_cast<int>(criteria.size())) {
      std::cerr << "unknown criterion '" << argv[i] << "' (expected 1-" << criteria.size() << ")\n";
      return 2;
    }
    pick.push_back(c);
  }
  if (pick.empty())
    for (int c = 1; c <= static_cast<int>(criteria.size()); ++c) pick.push_back(c);
  int failed = 0;
  for (int c : pick) {
    const auto t0 = Clock::now();
    Outcome o;
    try {
      o = criteria[c - 1]();
    } catch (const std::exception& e) {
      o = {false, std::string("error: ") + e.what()};
    }
    if (!o.pass) ++failed;
    std::cout << "criterion " << c << ": " << (o.pass ? "PASS" : "FAIL") << "  " << o.detail << "  ["
              << fixed(seconds_since(t0), 1) << " s]" << std::endl;
  }
  return failed ? 1 : 0;
}
