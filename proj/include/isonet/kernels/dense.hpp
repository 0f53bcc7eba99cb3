// dense.hpp -- fully connected layer zeta(Wx + b).
#pragma once

#include <span>
#include <vector>

#include "isonet/common.hpp"
#include "isonet/kernels/activations.hpp"

namespace isonet {

template <class T>
struct DenseParams {
  int in_dim = 0;
  int out_dim = 0;
  Activation activation = Activation::identity;
  std::span<const T> weights;  // out_dim x in_dim, row-major
  std::span<const T> bias;     // out_dim

  void validate() const {
    if (weights.size() != static_cast<std::size_t>(out_dim) * in_dim)
      throw validation_error("dense: weight span size mismatch");
    if (bias.size() != static_cast<std::size_t>(out_dim))
      throw validation_error("dense: bias span size mismatch");
  }
};

template <class T>
struct DenseTrace {
  std::vector<T> input;
  std::vector<T> pre;     // pre-activation (relu)
  std::vector<T> output;  // post-activation (softmax)
};

template <class T>
std::vector<T> dense_forward(std::span<const T> input, const DenseParams<T>& p,
                             DenseTrace<T>* trace = nullptr) {
  p.validate();
  if (input.size() != static_cast<std::size_t>(p.in_dim))
    throw validation_error("dense: input dimension " + std::to_string(input.size()) +
                           " does not match in_dim " + std::to_string(p.in_dim));
  std::vector<T> z(p.out_dim);
  for (int o = 0; o < p.out_dim; ++o) {
    const T* w = p.weights.data() + static_cast<std::size_t>(o) * p.in_dim;
    double acc = static_cast<double>(p.bias[o]);
    for (int i = 0; i < p.in_dim; ++i)
      acc += static_cast<double>(w[i]) * static_cast<double>(input[i]);
    z[o] = static_cast<T>(acc);
  }
  std::vector<T> out;
  switch (p.activation) {
    case Activation::identity: out = z; break;
    case Activation::relu: out = relu(std::span<const T>(z)); break;
    case Activation::softmax: out = softmax(std::span<const T>(z)); break;
  }
  if (trace) {
    trace->input.assign(input.begin(), input.end());
    trace->pre = (p.activation == Activation::relu) ? z : std::vector<T>{};
    trace->output = (p.activation == Activation::softmax) ? out : std::vector<T>{};
  }
  return out;
}

template <class T>
struct DenseGrads {
  std::vector<T> input;
  std::vector<T> weights;
  std::vector<T> bias;
};

/// Backward from a gradient already in pre-activation (logit) space.
template <class T>
std::vector<T> dense_backward_pre_acc(const DenseTrace<T>& trace, const DenseParams<T>& p,
                                      std::span<const T> upstream_pre, std::span<T> grad_weights,
                                      std::span<T> grad_bias) {
  p.validate();
  if (upstream_pre.size() != static_cast<std::size_t>(p.out_dim))
    throw validation_error("dense backward: upstream dimension mismatch");
  if (grad_weights.size() != p.weights.size() || grad_bias.size() != p.bias.size())
    throw validation_error("dense backward: gradient span shape mismatch");
  std::vector<T> gx(p.in_dim, T(0));
  for (int o = 0; o < p.out_dim; ++o) {
    const double g = static_cast<double>(upstream_pre[o]);
    grad_bias[o] += static_cast<T>(g);
    const T* w = p.weights.data() + static_cast<std::size_t>(o) * p.in_dim;
    T* gw = grad_weights.data() + static_cast<std::size_t>(o) * p.in_dim;
    for (int i = 0; i < p.in_dim; ++i) {
      gw[i] += static_cast<T>(g * static_cast<double>(trace.input[i]));
      gx[i] += static_cast<T>(g * static_cast<double>(w[i]));
    }
  }
  return gx;
}

/// Backward from a gradient in output space; applies the activation
/// Jacobian (identity pass-through, ReLU mask, or full softmax Jacobian).
template <class T>
DenseGrads<T> dense_backward(const DenseTrace<T>& trace, const DenseParams<T>& p,
                             std::span<const T> upstream) {
  std::vector<T> gpre(upstream.begin(), upstream.end());
  switch (p.activation) {
    case Activation::identity: break;
    case Activation::relu:
      relu_backward_inplace(std::span<T>(gpre), std::span<const T>(trace.pre));
      break;
    case Activation::softmax:
      gpre = softmax_backward(std::span<const T>(trace.output), upstream);
      break;
  }
  DenseGrads<T> g;
  g.weights.assign(p.weights.size(), T(0));
  g.bias.assign(p.bias.size(), T(0));
  g.input = dense_backward_pre_acc(trace, p, std::span<const T>(gpre), std::span<T>(g.weights),
                                   std::span<T>(g.bias));
  return g;
}

}  // namespace isonet
