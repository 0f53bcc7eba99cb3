// dropout.hpp -- inverted dropout: survivors are rescaled by 1/(1-rate) so
// infer mode is the identity.
#pragma once

#include <random>
#include <span>
#include <vector>

#include "isonet/common.hpp"

namespace isonet {

template <class T>
struct DropoutTrace {
  std::vector<T> scale;  // 0 for dropped units, 1/(1-rate) for kept ones
};

template <class T>
void dropout_forward(std::span<T> x, double rate, Mode mode, std::mt19937_64& rng,
                     DropoutTrace<T>* trace = nullptr) {
  if (rate < 0.0 || rate >= 1.0) throw validation_error("dropout: rate must be in [0, 1)");
  if (mode == Mode::infer || rate == 0.0) {
    if (trace) trace->scale.assign(x.size(), T(1));
    return;
  }
  const T keep_scale = static_cast<T>(1.0 / (1.0 - rate));
  std::uniform_real_distribution<double> u(0.0, 1.0);
  if (trace) trace->scale.resize(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const T s = u(rng) < rate ? T(0) : keep_scale;
    if (trace) trace->scale[i] = s;
    x[i] *= s;
  }
}

template <class T>
void dropout_backward(const DropoutTrace<T>& trace, std::span<T> upstream) {
  if (trace.scale.size() != upstream.size())
    throw validation_error("dropout backward: trace size mismatch");
  for (std::size_t i = 0; i < upstream.size(); ++i) upstream[i] *= trace.scale[i];
}

}  // namespace isonet
