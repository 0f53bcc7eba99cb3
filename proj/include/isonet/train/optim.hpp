// optim.hpp -- SGD and Adam parameter updates.
//
// Both steps are pure: they return the new parameter vector and never touch
// their inputs.  Adam keeps its moment accumulators in f64 regardless of the
// parameter scalar type, with the usual bias correction
//
//   m' = b1*m + (1-b1)*g,  v' = b2*v + (1-b2)*g^2,  t' = t+1
//   theta' = theta - eta * (m'/(1-b1^t')) / (sqrt(v'/(1-b2^t')) + eps)
#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "isonet/common.hpp"

namespace isonet {

struct AdamState {
  std::vector<double> m;
  std::vector<double> v;
  std::int64_t t = 0;

  AdamState() = default;
  explicit AdamState(std::size_t n) : m(n, 0.0), v(n, 0.0) {}
};

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;

  void validate() const {
    if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0))
      throw validation_error("adam: betas must lie in [0, 1)");
    if (!(epsilon > 0.0)) throw validation_error("adam: epsilon must be positive");
  }
};

template <class T>
std::vector<T> sgd_step(std::span<const T> theta, std::span<const T> grad, double eta) {
  if (theta.size() != grad.size())
    throw validation_error("sgd_step: theta has " + std::to_string(theta.size()) +
                           " entries but grad has " + std::to_string(grad.size()));
  std::vector<T> next(theta.size());
  for (std::size_t i = 0; i < theta.size(); ++i)
    next[i] = static_cast<T>(static_cast<double>(theta[i]) - eta * static_cast<double>(grad[i]));
  return next;
}

template <class T>
std::vector<T> sgd_step(const std::vector<T>& theta, const std::vector<T>& grad, double eta) {
  return sgd_step(std::span<const T>(theta), std::span<const T>(grad), eta);
}

template <class T>
std::vector<T> adam_step(std::span<const T> theta, std::span<const T> grad, AdamState& state,
                         double eta, const AdamConfig& cfg = {}) {
  cfg.validate();
  if (theta.size() != grad.size())
    throw validation_error("adam_step: theta has " + std::to_string(theta.size()) +
                           " entries but grad has " + std::to_string(grad.size()));
  if (state.m.empty() && state.v.empty() && state.t == 0) {
    state.m.assign(theta.size(), 0.0);
    state.v.assign(theta.size(), 0.0);
  }
  if (state.m.size() != theta.size() || state.v.size() != theta.size())
    throw validation_error("adam_step: moment accumulators not shaped like theta");

  state.t += 1;
  const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.t));
  const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.t));
  std::vector<T> next(theta.size());
  for (std::size_t i = 0; i < theta.size(); ++i) {
    const double g = static_cast<double>(grad[i]);
    state.m[i] = cfg.beta1 * state.m[i] + (1.0 - cfg.beta1) * g;
    state.v[i] = cfg.beta2 * state.v[i] + (1.0 - cfg.beta2) * g * g;
    const double mhat = state.m[i] / bc1;
    const double vhat = state.v[i] / bc2;
    next[i] =
        static_cast<T>(static_cast<double>(theta[i]) - eta * mhat / (std::sqrt(vhat) + cfg.epsilon));
  }
  return next;
}

template <class T>
std::vector<T> adam_step(const std::vector<T>& theta, const std::vector<T>& grad, AdamState& state,
                         double eta, const AdamConfig& cfg = {}) {
  return adam_step(std::span<const T>(theta), std::span<const T>(grad), state, eta, cfg);
}

}  // namespace isonet
