// normalize.hpp -- total-ion-count normalization and one-hot label encoding.
#pragma once

#include <string>
#include <vector>

#include "isonet/common.hpp"
#include "isonet/data/types.hpp"

namespace isonet {

/// Scales every row to unit sum. Idempotent; invariant to positive row
/// scaling; relative peak ratios within a row are unchanged.
inline void tic_normalize(SpectraMatrix& spectra) {
  for (std::int64_t i = 0; i < spectra.n; ++i) {
    auto r = spectra.row(i);
    double sum = 0.0;
    for (float v : r) sum += v;
    if (!(sum > 0.0))
      throw validation_error("tic_normalize: spectrum " + std::to_string(i) +
                             " has non-positive total ion count " + std::to_string(sum));
    for (float& v : r) v = static_cast<float>(v / sum);
  }
  spectra.normalized = true;
}

template <class T = float>
std::vector<T> one_hot(int label, int n_classes) {
  if (label < 0 || label >= n_classes)
    throw validation_error("one_hot: label " + std::to_string(label) + " out of range [0, " +
                           std::to_string(n_classes) + ")");
  std::vector<T> y(n_classes, T(0));
  y[label] = T(1);
  return y;
}

}  // namespace isonet
