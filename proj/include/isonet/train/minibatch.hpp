// minibatch.hpp -- random partition of sample indices into mini-batches.
#pragma once

#include <algorithm>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "isonet/common.hpp"

namespace isonet {

// Shuffles {0,...,n-1} with the supplied generator and cuts the permutation
// into consecutive batches of `batch_size`; the last batch keeps whatever
// remains (callers that feed batch norm merge a trailing singleton into its
// predecessor, see trainer.hpp).
inline std::vector<std::vector<std::size_t>> minibatch_partition(std::size_t n,
                                                                 std::size_t batch_size,
                                                                 std::mt19937_64& rng) {
  if (n < 2) throw validation_error("minibatch_partition: need at least 2 samples, got " +
                                    std::to_string(n));
  if (batch_size == 0) throw validation_error("minibatch_partition: batch_size must be positive");
  if (n < batch_size)
    throw validation_error("minibatch_partition: n=" + std::to_string(n) +
                           " smaller than batch_size=" + std::to_string(batch_size));

  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  std::shuffle(perm.begin(), perm.end(), rng);

  std::vector<std::vector<std::size_t>> batches;
  batches.reserve((n + batch_size - 1) / batch_size);
  for (std::size_t start = 0; start < n; start += batch_size) {
    const std::size_t stop = std::min(n, start + batch_size);
    batches.emplace_back(perm.begin() + static_cast<std::ptrdiff_t>(start),
                         perm.begin() + static_cast<std::ptrdiff_t>(stop));
  }
  return batches;
}

}  // namespace isonet
