// batchnorm.hpp -- per-channel batch normalization over (batch x length) statistics.
#pragma once

#include <cmath>
#include <span>
#include <vector>

#include "isonet/common.hpp"
#include "isonet/feature_map.hpp"

namespace isonet {

/// gamma/beta are trainable, running mean/var are f64 state updated in train
/// mode as running <- momentum*running + (1-momentum)*batch_stat. Variances
/// are population (divide by M) throughout.
template <class T>
struct BatchNormParams {
  int channels = 0;
  T momentum = T(0.9);
  T epsilon = T(1e-5);
  std::span<const T> gamma;
  std::span<const T> beta;
  std::span<double> running_mean;
  std::span<double> running_var;

  void validate() const {
    if (epsilon <= T(0)) throw validation_error("batchnorm: epsilon must be positive");
    const auto n = static_cast<std::size_t>(channels);
    if (gamma.size() != n || beta.size() != n || running_mean.size() != n || running_var.size() != n)
      throw validation_error("batchnorm: parameter span size mismatch");
    for (double v : running_var)
      if (v < 0.0) throw validation_error("batchnorm: running_var must be non-negative");
  }
};

template <class T>
struct BatchNormTrace {
  Mode mode = Mode::train;
  std::vector<FeatureMap<T>> xhat;  // normalized inputs (train mode)
  std::vector<double> invstd;       // per channel, 1/sqrt(var + eps)
  long long count = 0;              // M = batch * length
};

/// Normalizes the batch in place.
template <class T>
void batchnorm_forward(std::vector<FeatureMap<T>>& batch, const BatchNormParams<T>& p, Mode mode,
                       BatchNormTrace<T>* trace = nullptr) {
  p.validate();
  if (batch.empty()) throw validation_error("batchnorm: empty batch");
  if (mode == Mode::train && batch.size() < 2)
    throw validation_error("batchnorm: train mode requires batch size >= 2");
  const int L = batch.front().length;
  for (const auto& m : batch)
    if (m.channels != p.channels || m.length != L)
      throw validation_error("batchnorm: inconsistent batch shapes");

  const long long M = static_cast<long long>(batch.size()) * L;
  std::vector<double> mean(p.channels), invstd(p.channels);

  if (mode == Mode::train) {
    for (int c = 0; c < p.channels; ++c) {
      double s = 0.0;
      for (const auto& m : batch)
        for (T x : m.channel(c)) s += static_cast<double>(x);
      mean[c] = s / M;
      double sq = 0.0;
      for (const auto& m : batch)
        for (T x : m.channel(c)) {
          const double d = static_cast<double>(x) - mean[c];
          sq += d * d;
        }
      const double var = sq / M;
      invstd[c] = 1.0 / std::sqrt(var + static_cast<double>(p.epsilon));
      const double mom = static_cast<double>(p.momentum);
      p.running_mean[c] = mom * p.running_mean[c] + (1.0 - mom) * mean[c];
      p.running_var[c] = mom * p.running_var[c] + (1.0 - mom) * var;
    }
  } else {
    for (int c = 0; c < p.channels; ++c) {
      mean[c] = p.running_mean[c];
      invstd[c] = 1.0 / std::sqrt(p.running_var[c] + static_cast<double>(p.epsilon));
    }
  }

  if (trace) {
    trace->mode = mode;
    trace->invstd = invstd;
    trace->count = M;
    trace->xhat.clear();
    if (mode == Mode::train) trace->xhat.resize(batch.size());
  }
  for (std::size_t b = 0; b < batch.size(); ++b) {
    if (trace && mode == Mode::train) trace->xhat[b] = FeatureMap<T>(p.channels, L);
    for (int c = 0; c < p.channels; ++c) {
      auto ch = batch[b].channel(c);
      const double g = static_cast<double>(p.gamma[c]);
      const double be = static_cast<double>(p.beta[c]);
      for (int i = 0; i < L; ++i) {
        const double xh = (static_cast<double>(ch[i]) - mean[c]) * invstd[c];
        if (trace && mode == Mode::train) trace->xhat[b].at(c, i) = static_cast<T>(xh);
        ch[i] = static_cast<T>(g * xh + be);
      }
    }
  }
}

/// Backward through train-mode normalization (full Jacobian of the batch
/// statistics) or infer-mode scaling. Upstream gradients are transformed in
/// place into input gradients; gamma/beta gradients are accumulated.
template <class T>
void batchnorm_backward_acc(const BatchNormTrace<T>& trace, const BatchNormParams<T>& p,
                            std::vector<FeatureMap<T>>& upstream, std::span<T> grad_gamma,
                            std::span<T> grad_beta) {
  p.validate();
  if (grad_gamma.size() != p.gamma.size() || grad_beta.size() != p.beta.size())
    throw validation_error("batchnorm backward: gradient span shape mismatch");

  if (trace.mode == Mode::infer) {
    for (int c = 0; c < p.channels; ++c) {
      const double scale = static_cast<double>(p.gamma[c]) * trace.invstd[c];
      for (auto& g : upstream)
        for (T& v : g.channel(c)) v = static_cast<T>(static_cast<double>(v) * scale);
    }
    return;
  }

  const double M = static_cast<double>(trace.count);
  for (int c = 0; c < p.channels; ++c) {
    double sum_g = 0.0, sum_gx = 0.0;
    for (std::size_t b = 0; b < upstream.size(); ++b) {
      auto g = upstream[b].channel(c);
      auto xh = trace.xhat[b].channel(c);
      for (std::size_t i = 0; i < g.size(); ++i) {
        sum_g += static_cast<double>(g[i]);
        sum_gx += static_cast<double>(g[i]) * static_cast<double>(xh[i]);
      }
    }
    grad_beta[c] += static_cast<T>(sum_g);
    grad_gamma[c] += static_cast<T>(sum_gx);
    const double gamma = static_cast<double>(p.gamma[c]);
    const double k = gamma * trace.invstd[c];
    for (std::size_t b = 0; b < upstream.size(); ++b) {
      auto g = upstream[b].channel(c);
      auto xh = trace.xhat[b].channel(c);
      for (std::size_t i = 0; i < g.size(); ++i) {
        const double gi = static_cast<double>(g[i]);
        const double xi = static_cast<double>(xh[i]);
        g[i] = static_cast<T>(k * (gi - sum_g / M - xi * sum_gx / M));
      }
    }
  }
}

}  // namespace isonet
