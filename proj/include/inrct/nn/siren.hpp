#pragma once

#include "inrct/core.hpp"

#include <cstring>
#include <random>

namespace inrct::nn {

// Fully connected sine network: `depth` affine layers mapping
// input_dim -> width -> ... -> width -> output_dim. Every layer except the
// last is followed by sin(omega * .), with omega = omega0 on the first layer
// and 1 on the others. The last layer is affine.
struct SirenArch {
  int input_dim = 64;
  int width = 64;
  int depth = 4;
  int output_dim = 1;
  double omega0 = 30.0;

  struct Layer {
    int in;
    int out;
    Eigen::Index offset;  // weights (out x in, column-major) then bias (out)
    double omega;         // 0 for the final affine layer
  };

  void validate() const {
    require(input_dim >= 1 && width >= 1 && output_dim >= 1, "SIREN dimensions must be positive");
    require(depth >= 1, "SIREN depth must be >= 1");
    require(omega0 > 0, "omega0 must be positive");
  }

  std::vector<Layer> layers() const {
    validate();
    std::vector<Layer> ls;
    Eigen::Index off = 0;
    for (int l = 0; l < depth; ++l) {
      const int in = l == 0 ? input_dim : width;
      const int out = l == depth - 1 ? output_dim : width;
      const double omega = l == depth - 1 ? 0.0 : (l == 0 ? omega0 : 1.0);
      ls.push_back({in, out, off, omega});
      off += static_cast<Eigen::Index>(in) * out + out;
    }
    return ls;
  }

  Eigen::Index parameter_count() const {
    const auto ls = layers();
    return ls.back().offset + static_cast<Eigen::Index>(ls.back().in) * ls.back().out + ls.back().out;
  }

  friend bool operator==(const SirenArch&, const SirenArch&) = default;
};

template <class Real>
std::uint64_t fingerprint(const WeightVector<Real>& w) {
  std::uint64_t h = 1469598103934665603ULL;
  const auto* p = reinterpret_cast<const unsigned char*>(w.data());
  for (std::size_t i = 0; i < static_cast<std::size_t>(w.size()) * sizeof(Real); ++i) {
    h ^= p[i];
    h *= 1099511628211ULL;
  }
  return h ^ static_cast<std::uint64_t>(w.size());
}

// Layer-wise uniform initialization: first layer U(-1/in, 1/in), later
// hidden layers U(-sqrt(6/in), sqrt(6/in)), final layer the same bound
// divided by omega0. Biases U(-1/sqrt(in), 1/sqrt(in)).
template <class Real>
WeightVector<Real> init_siren(const SirenArch& arch, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  WeightVector<Real> w(arch.parameter_count());
  const auto ls = arch.layers();
  for (std::size_t l = 0; l < ls.size(); ++l) {
    const auto& L = ls[l];
    double bound;
    if (l == 0)
      bound = 1.0 / L.in;
    else if (l + 1 == ls.size())
      bound = std::sqrt(6.0 / L.in) / arch.omega0;
    else
      bound = std::sqrt(6.0 / L.in);
    if (ls.size() == 1) bound = 1.0 / L.in;
    std::uniform_real_distribution<double> uw(-bound, bound);
    const Eigen::Index nw = static_cast<Eigen::Index>(L.in) * L.out;
    for (Eigen::Index i = 0; i < nw; ++i) w[L.offset + i] = static_cast<Real>(uw(rng));
    const double bb = 1.0 / std::sqrt(static_cast<double>(L.in));
    std::uniform_real_distribution<double> ub(-bb, bb);
    for (Eigen::Index i = 0; i < L.out; ++i) w[L.offset + nw + i] = static_cast<Real>(ub(rng));
  }
  return w;
}

// Intermediate values retained by siren_forward for siren_backward.
template <class Real>
struct SirenTape {
  std::vector<Mat<Real>> inputs;  // input of each layer, in_l x N
  std::vector<Mat<Real>> slopes;  // omega * cos(omega * z) of each hidden layer
  Mat<Real> output;               // output_dim x N
  std::uint64_t weights_fingerprint = 0;
  SirenArch arch;

  Eigen::Index points() const { return output.cols(); }
  // First output channel as a vector of per-point intensities.
  Vec<Real> intensities() const { return output.row(0).transpose(); }
};

struct StaleTapeError : Error {
  using Error::Error;
};

template <class Real>
SirenTape<Real> siren_forward(const SirenArch& arch, const WeightVector<Real>& w, const Mat<Real>& features) {
  require_shape(w.size() == arch.parameter_count(), "siren_forward: weight vector length mismatch");
  require_shape(features.rows() == arch.input_dim, "siren_forward: feature width " +
                                                        std::to_string(features.rows()) + " != input_dim " +
                                                        std::to_string(arch.input_dim));
  const auto ls = arch.layers();
  SirenTape<Real> tape;
  tape.arch = arch;
  tape.weights_fingerprint = fingerprint(w);
  tape.inputs.reserve(ls.size());
  tape.slopes.reserve(ls.size() - 1);
  Mat<Real> x = features;
  for (std::size_t l = 0; l < ls.size(); ++l) {
    const auto& L = ls[l];
    Eigen::Map<const Mat<Real>> W(w.data() + L.offset, L.out, L.in);
    Eigen::Map<const Vec<Real>> b(w.data() + L.offset + static_cast<Eigen::Index>(L.in) * L.out, L.out);
    Mat<Real> z = W * x;
    z.colwise() += b;
    tape.inputs.push_back(std::move(x));
    if (l + 1 == ls.size()) {
      tape.output = std::move(z);
      break;
    }
    const Real omega = static_cast<Real>(L.omega);
    z *= omega;
    tape.slopes.push_back(omega * z.array().cos().matrix());
    x = z.array().sin().matrix();
  }
  return tape;
}

// Gradient of sum_{c,i} output_grads(c, i) * output(c, i) with respect to
// the flat weights. When input_grads is non-null it receives the gradient
// with respect to the layer-0 input (input_dim x N).
template <class Real>
WeightVector<Real> siren_backward(const SirenArch& arch, const WeightVector<Real>& w, const SirenTape<Real>& tape,
                                  const Mat<Real>& output_grads, Mat<Real>* input_grads = nullptr) {
  if (!(tape.arch == arch) || tape.weights_fingerprint != fingerprint(w))
    throw StaleTapeError("siren_backward: tape was not produced by these weights");
  require_shape(output_grads.rows() == arch.output_dim && output_grads.cols() == tape.points(),
                "siren_backward: output gradient shape mismatch");
  const auto ls = arch.layers();
  WeightVector<Real> grad(w.size());
  Mat<Real> delta = output_grads;
  for (std::size_t li = ls.size(); li-- > 0;) {
    const auto& L = ls[li];
    if (li + 1 < ls.size()) delta.array() *= tape.slopes[li].array();
    Eigen::Map<Mat<Real>> dW(grad.data() + L.offset, L.out, L.in);
    Eigen::Map<Vec<Real>> db(grad.data() + L.offset + static_cast<Eigen::Index>(L.in) * L.out, L.out);
    dW.noalias() = delta * tape.inputs[li].transpose();
    db = delta.rowwise().sum();
    if (li > 0 || input_grads) {
      Eigen::Map<const Mat<Real>> W(w.data() + L.offset, L.out, L.in);
      Mat<Real> next = W.transpose() * delta;
      if (li == 0)
        *input_grads = std::move(next);
      else
        delta = std::move(next);
    }
  }
  return grad;
}

template <class Real>
WeightVector<Real> siren_backward(const SirenArch& arch, const WeightVector<Real>& w, const SirenTape<Real>& tape,
                                  const Vec<Real>& output_grads) {
  require_shape(arch.output_dim == 1, "siren_backward: vector gradient needs a single-output network");
  return siren_backward(arch, w, tape, Mat<Real>(output_grads.transpose()));
}

}  // namespace inrct::nn
