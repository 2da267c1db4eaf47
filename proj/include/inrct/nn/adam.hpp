#pragma once

#include "inrct/core.hpp"

namespace inrct::nn {

template <class Real>
struct AdamState {
  Vec<Real> m;
  Vec<Real> v;
  long step = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

  AdamState() = default;
  explicit AdamState(Eigen::Index n) : m(Vec<Real>::Zero(n)), v(Vec<Real>::Zero(n)) {}
};

// One bias-corrected Adam update. Returns false, leaving params and state
// untouched, when grads contain non-finite entries.
template <class Real>
bool adam_step(AdamState<Real>& state, WeightVector<Real>& params, const WeightVector<Real>& grads, double lr) {
  require_shape(params.size() == grads.size() && state.m.size() == params.size() && state.v.size() == params.size(),
                "adam_step: length mismatch");
  if (!grads.allFinite()) return false;
  ++state.step;
  const Real b1 = static_cast<Real>(state.beta1);
  const Real b2 = static_cast<Real>(state.beta2);
  state.m = b1 * state.m + (Real(1) - b1) * grads;
  state.v = b2 * state.v + (Real(1) - b2) * grads.cwiseAbs2();
  const double c1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
  const Real step_size = static_cast<Real>(lr / c1);
  const Real inv_c2 = static_cast<Real>(1.0 / c2);
  const Real eps = static_cast<Real>(state.eps);
  params.array() -= step_size * state.m.array() / ((state.v.array() * inv_c2).sqrt() + eps);
  return true;
}

}  // namespace inrct::nn
