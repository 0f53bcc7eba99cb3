// local.hpp -- locally-connected (unshared) convolution: one kernel per position.
#pragma once

#include <span>
#include <vector>

#include "isonet/common.hpp"
#include "isonet/feature_map.hpp"

namespace isonet {

/// Position-dependent sliding window over a single-channel input. Kernels
/// are laid out [position][tap]; output length equals input length
/// (stride 1, zero padding). Tap accumulation order matches conv1d_forward,
/// so tying all position kernels together reproduces the shared convolution
/// bit for bit.
template <class T>
struct LocalParams {
  int length = 0;
  int kernel_size = 3;
  std::span<const T> kernels;  // length x kernel_size
  std::span<const T> bias;     // length

  void validate() const {
    if (kernel_size < 1 || kernel_size % 2 == 0)
      throw validation_error("local: kernel_size must be odd and positive");
    if (kernels.size() != static_cast<std::size_t>(length) * kernel_size)
      throw validation_error("local: kernel span size mismatch");
    if (bias.size() != static_cast<std::size_t>(length))
      throw validation_error("local: bias span size mismatch");
  }
};

template <class T>
struct LocalTrace {
  FeatureMap<T> input;
};

template <class T>
FeatureMap<T> local_forward(const FeatureMap<T>& input, const LocalParams<T>& p,
                            LocalTrace<T>* trace = nullptr) {
  p.validate();
  if (input.channels != 1)
    throw validation_error("local: expects a single-channel input");
  if (input.length != p.length)
    throw validation_error("local: input length " + std::to_string(input.length) +
                           " does not match configured length " + std::to_string(p.length));
  const int L = p.length;
  const int K = p.kernel_size;
  const int off = (K - 1) / 2;
  FeatureMap<T> out(1, L);
  const T* x = input.data.data();
  for (int q = 0; q < L; ++q) {
    const int base = q - off;
    const int t0 = base < 0 ? -base : 0;
    const int t1 = base + K > L ? L - base : K;
    const T* k = p.kernels.data() + static_cast<std::size_t>(q) * K;
    double acc = static_cast<double>(p.bias[q]);
    for (int t = t0; t < t1; ++t)
      acc += static_cast<double>(k[t]) * static_cast<double>(x[base + t]);
    out.data[q] = static_cast<T>(acc);
  }
  if (trace) trace->input = input;
  return out;
}

template <class T>
struct LocalGrads {
  FeatureMap<T> input;
  std::vector<T> kernels;
  std::vector<T> bias;
};

template <class T>
FeatureMap<T> local_backward_acc(const LocalTrace<T>& trace, const LocalParams<T>& p,
                                 const FeatureMap<T>& upstream, std::span<T> grad_kernels,
                                 std::span<T> grad_bias) {
  p.validate();
  if (upstream.channels != 1 || upstream.length != p.length)
    throw validation_error("local backward: upstream shape mismatch");
  if (grad_kernels.size() != p.kernels.size() || grad_bias.size() != p.bias.size())
    throw validation_error("local backward: gradient span shape mismatch");
  const int L = p.length;
  const int K = p.kernel_size;
  const int off = (K - 1) / 2;
  FeatureMap<T> gx(1, L);
  const T* x = trace.input.data.data();
  for (int q = 0; q < L; ++q) {
    const double g = static_cast<double>(upstream.data[q]);
    const int base = q - off;
    const int t0 = base < 0 ? -base : 0;
    const int t1 = base + K > L ? L - base : K;
    const T* k = p.kernels.data() + static_cast<std::size_t>(q) * K;
    T* gk = grad_kernels.data() + static_cast<std::size_t>(q) * K;
    grad_bias[q] += static_cast<T>(g);
    for (int t = t0; t < t1; ++t) {
      gk[t] += static_cast<T>(g * static_cast<double>(x[base + t]));
      gx.data[base + t] += static_cast<T>(g * static_cast<double>(k[t]));
    }
  }
  return gx;
}

template <class T>
LocalGrads<T> local_backward(const LocalTrace<T>& trace, const LocalParams<T>& p,
                             const FeatureMap<T>& upstream) {
  LocalGrads<T> g;
  g.kernels.assign(p.kernels.size(), T(0));
  g.bias.assign(p.bias.size(), T(0));
  g.input = local_backward_acc(trace, p, upstream, std::span<T>(g.kernels), std::span<T>(g.bias));
  return g;
}

/// Trainable parameter count of a locally-connected layer of this shape.
inline long long local_param_count(int length, int kernel_size) {
  return static_cast<long long>(length) * kernel_size + length;
}

}  // namespace isonet
