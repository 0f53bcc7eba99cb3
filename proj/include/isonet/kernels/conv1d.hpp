// conv1d.hpp -- shared-weight 1D convolution, optionally strided, with exact backward.
//
// Padding convention: zero ("same"-style) padding with output length
// ceil(L / stride); output position p is centered on input index p*stride.
// This is the convention under which two stridings of 5 and 3 take a
// 27286-bin spectrum to 5458 and then 1820 bins.
#pragma once

#include <span>
#include <vector>

#include "isonet/common.hpp"
#include "isonet/feature_map.hpp"
#include "isonet/kernels/activations.hpp"

namespace isonet {

/// Parameters of a shared convolution. Kernels are laid out
/// [out_channel][in_channel][tap]; an empty bias span means the layer has no
/// bias term (used by projection shortcuts, whose bias is fixed at zero).
template <class T>
struct ConvParams {
  int in_channels = 1;
  int out_channels = 1;
  int kernel_size = 3;
  int stride = 1;
  Activation activation = Activation::identity;
  std::span<const T> kernels;
  std::span<const T> bias;

  void validate() const {
    if (kernel_size < 1 || kernel_size % 2 == 0)
      throw validation_error("conv1d: kernel_size must be odd and positive");
    if (stride < 1) throw validation_error("conv1d: stride must be >= 1");
    if (kernels.size() != static_cast<std::size_t>(out_channels) * in_channels * kernel_size)
      throw validation_error("conv1d: kernel span size mismatch");
    if (!bias.empty() && bias.size() != static_cast<std::size_t>(out_channels))
      throw validation_error("conv1d: bias span size mismatch");
    if (activation == Activation::softmax)
      throw validation_error("conv1d: softmax is not a convolution activation");
  }
};

inline int conv_output_length(int length, int stride) { return (length + stride - 1) / stride; }

template <class T>
struct Conv1dTrace {
  FeatureMap<T> input;
  FeatureMap<T> pre;  // pre-activation; kept only when the activation needs it
};

template <class T>
FeatureMap<T> conv1d_forward(const FeatureMap<T>& input, const ConvParams<T>& p,
                             Conv1dTrace<T>* trace = nullptr) {
  p.validate();
  if (input.channels != p.in_channels)
    throw validation_error("conv1d: input has " + std::to_string(input.channels) +
                           " channels, params expect " + std::to_string(p.in_channels));
  const int L = input.length;
  const int Lo = conv_output_length(L, p.stride);
  const int K = p.kernel_size;
  const int off = (K - 1) / 2;
  FeatureMap<T> out(p.out_channels, Lo);

  for (int j = 0; j < p.out_channels; ++j) {
    T* dst = out.data.data() + static_cast<std::size_t>(j) * Lo;
    const T* kj = p.kernels.data() + static_cast<std::size_t>(j) * p.in_channels * K;
    const double bj = p.bias.empty() ? 0.0 : static_cast<double>(p.bias[j]);
    for (int q = 0; q < Lo; ++q) {
      const int base = q * p.stride - off;
      const int t0 = base < 0 ? -base : 0;
      const int t1 = base + K > L ? L - base : K;
      double acc = bj;
      for (int c = 0; c < p.in_channels; ++c) {
        const T* x = input.data.data() + static_cast<std::size_t>(c) * L + base;
        const T* k = kj + static_cast<std::size_t>(c) * K;
        for (int t = t0; t < t1; ++t) acc += static_cast<double>(k[t]) * static_cast<double>(x[t]);
      }
      dst[q] = static_cast<T>(acc);
    }
  }

  if (trace) {
    trace->input = input;
    trace->pre = (p.activation == Activation::relu) ? out : FeatureMap<T>{};
  }
  if (p.activation == Activation::relu) relu_inplace(std::span<T>(out.data));
  return out;
}

template <class T>
struct Conv1dGrads {
  FeatureMap<T> input;
  std::vector<T> kernels;
  std::vector<T> bias;
};

/// Accumulating backward: parameter gradients are added into grad_kernels /
/// grad_bias (callers sum over a batch), the input gradient is returned.
/// grad_bias may be empty for bias-free layers.
template <class T>
FeatureMap<T> conv1d_backward_acc(const Conv1dTrace<T>& trace, const ConvParams<T>& p,
                                  const FeatureMap<T>& upstream, std::span<T> grad_kernels,
                                  std::span<T> grad_bias) {
  p.validate();
  const int L = trace.input.length;
  const int Lo = conv_output_length(L, p.stride);
  const int K = p.kernel_size;
  const int off = (K - 1) / 2;
  if (upstream.channels != p.out_channels || upstream.length != Lo)
    throw validation_error("conv1d backward: upstream shape mismatch with trace");
  if (grad_kernels.size() != p.kernels.size() || grad_bias.size() != p.bias.size())
    throw validation_error("conv1d backward: gradient span shape mismatch");

  FeatureMap<T> gx(p.in_channels, L);
  std::vector<T> gpre_row(Lo);
  for (int j = 0; j < p.out_channels; ++j) {
    const T* up = upstream.data.data() + static_cast<std::size_t>(j) * Lo;
    for (int q = 0; q < Lo; ++q) gpre_row[q] = up[q];
    if (p.activation == Activation::relu)
      relu_backward_inplace(std::span<T>(gpre_row), trace.pre.channel(j));

    if (!grad_bias.empty()) {
      double gb = 0.0;
      for (int q = 0; q < Lo; ++q) gb += static_cast<double>(gpre_row[q]);
      grad_bias[j] += static_cast<T>(gb);
    }
    const T* kj = p.kernels.data() + static_cast<std::size_t>(j) * p.in_channels * K;
    T* gkj = grad_kernels.data() + static_cast<std::size_t>(j) * p.in_channels * K;
    for (int c = 0; c < p.in_channels; ++c) {
      const T* x = trace.input.data.data() + static_cast<std::size_t>(c) * L;
      T* gxc = gx.data.data() + static_cast<std::size_t>(c) * L;
      const T* k = kj + static_cast<std::size_t>(c) * K;
      T* gk = gkj + static_cast<std::size_t>(c) * K;
      for (int t = 0; t < K; ++t) {
        double acc = 0.0;
        const double kt = static_cast<double>(k[t]);
        for (int q = 0; q < Lo; ++q) {
          const int i = q * p.stride + t - off;
          if (i < 0 || i >= L) continue;
          const double g = static_cast<double>(gpre_row[q]);
          acc += g * static_cast<double>(x[i]);
          gxc[i] += static_cast<T>(kt * g);
        }
        gk[t] += static_cast<T>(acc);
      }
    }
  }
  return gx;
}

/// Value-returning variant matching the one-call-per-layer unit tests.
template <class T>
Conv1dGrads<T> conv1d_backward(const Conv1dTrace<T>& trace, const ConvParams<T>& p,
                               const FeatureMap<T>& upstream) {
  Conv1dGrads<T> g;
  g.kernels.assign(p.kernels.size(), T(0));
  g.bias.assign(p.bias.size(), T(0));
  g.input = conv1d_backward_acc(trace, p, upstream, std::span<T>(g.kernels), std::span<T>(g.bias));
  return g;
}

}  // namespace isonet
