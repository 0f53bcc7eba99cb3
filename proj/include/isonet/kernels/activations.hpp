// activations.hpp -- ReLU and softmax with their derivatives.
#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

#include "isonet/common.hpp"
#include "isonet/feature_map.hpp"

namespace isonet {

/// max(0, t) elementwise, in place.
template <class T>
void relu_inplace(std::span<T> v) {
  for (T& x : v)
    if (x < T(0)) x = T(0);
}

template <class T>
std::vector<T> relu(std::span<const T> v) {
  std::vector<T> out(v.begin(), v.end());
  relu_inplace(std::span<T>(out));
  return out;
}

/// Backward through ReLU: upstream masked by (pre > 0). The subgradient at
/// exactly 0 is taken as 0.
template <class T>
void relu_backward_inplace(std::span<T> upstream, std::span<const T> pre) {
  for (std::size_t i = 0; i < upstream.size(); ++i)
    if (!(pre[i] > T(0))) upstream[i] = T(0);
}

/// Numerically stable softmax: exp(z - max z) / sum.
template <class T>
std::vector<T> softmax(std::span<const T> z) {
  std::vector<T> out(z.size());
  T zmax = *std::max_element(z.begin(), z.end());
  double sum = 0.0;
  for (std::size_t i = 0; i < z.size(); ++i) {
    double e = std::exp(static_cast<double>(z[i] - zmax));
    out[i] = static_cast<T>(e);
    sum += e;
  }
  for (T& x : out) x = static_cast<T>(static_cast<double>(x) / sum);
  return out;
}

/// Pulls a post-softmax gradient back to logit space:
///   g_pre_m = p_m * (g_m - <g, p>).
template <class T>
std::vector<T> softmax_backward(std::span<const T> probs, std::span<const T> upstream) {
  double dot = 0.0;
  for (std::size_t i = 0; i < probs.size(); ++i)
    dot += static_cast<double>(upstream[i]) * static_cast<double>(probs[i]);
  std::vector<T> out(probs.size());
  for (std::size_t i = 0; i < probs.size(); ++i)
    out[i] = static_cast<T>(static_cast<double>(probs[i]) * (static_cast<double>(upstream[i]) - dot));
  return out;
}

}  // namespace isonet
