// loss.hpp -- negative log-likelihood with L2 penalty on the parameter vector.
#pragma once

#include <cmath>
#include <span>
#include <vector>

#include "isonet/common.hpp"

namespace isonet {

template <class T>
struct NllResult {
  double loss = 0.0;              // -(1/N) sum y.log(p) + lambda * |theta|^2
  std::vector<T> grad_logits;     // (p - y)/N, row-major N x C
  long long clamped = 0;          // rows whose target probability hit the floor
};

inline constexpr double kProbFloor = 1e-12;

/// probs and onehot are row-major N x C. The gradient is taken with respect to
/// the softmax logits; the L2 term contributes 2*lambda*theta at the update
/// step, not here.
template <class T>
NllResult<T> nll_loss(std::span<const T> probs, std::span<const T> onehot, std::size_t n_rows,
                      std::size_t n_classes, double lambda, double theta_norm_sq) {
  if (n_rows == 0 || n_classes == 0) throw validation_error("nll_loss: empty batch");
  if (probs.size() != n_rows * n_classes || onehot.size() != probs.size())
    throw validation_error("nll_loss: shape mismatch");
  if (lambda < 0.0) throw validation_error("nll_loss: lambda must be non-negative");

  NllResult<T> r;
  r.grad_logits.resize(probs.size());
  double nll = 0.0;
  for (std::size_t n = 0; n < n_rows; ++n) {
    for (std::size_t c = 0; c < n_classes; ++c) {
      const std::size_t i = n * n_classes + c;
      const double y = static_cast<double>(onehot[i]);
      if (y != 0.0) {
        double p = static_cast<double>(probs[i]);
        if (p < kProbFloor) {
          p = kProbFloor;
          ++r.clamped;
        }
        nll -= y * std::log(p);
      }
      r.grad_logits[i] =
          static_cast<T>((static_cast<double>(probs[i]) - y) / static_cast<double>(n_rows));
    }
  }
  r.loss = nll / static_cast<double>(n_rows) + lambda * theta_norm_sq;
  if (!std::isfinite(r.loss)) throw numeric_error("nll_loss: non-finite loss");
  return r;
}

}  // namespace isonet
