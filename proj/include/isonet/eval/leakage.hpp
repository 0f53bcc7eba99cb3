// leakage.hpp -- audit trail of the spectrum ids a fitting procedure reads.
//
// Every training-side data access (row assembly, bin ranking, covariance
// fitting, sigma computation) records the spectrum id it touched; the
// cross-validation harness then proves the recorded set is disjoint from the
// fold's test ids and folds the sorted set into a single hash for reports.
#pragma once

#include <algorithm>
#include <cstdint>
#include <span>
#include <vector>

#include "isonet/common.hpp"

namespace isonet {

struct TouchRecorder {
  std::vector<std::int64_t> ids;

  void touch(std::int64_t id) { ids.push_back(id); }

  std::vector<std::int64_t> sorted_unique() const {
    std::vector<std::int64_t> s = ids;
    std::sort(s.begin(), s.end());
    s.erase(std::unique(s.begin(), s.end()), s.end());
    return s;
  }

  std::uint64_t hash() const {
    const auto s = sorted_unique();
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (std::int64_t id : s) h = fnv1a(&id, sizeof(id), h);
    return h;
  }

  /// True when no recorded id appears in `other`.
  bool disjoint(std::span<const std::int64_t> other) const {
    const auto s = sorted_unique();
    for (std::int64_t id : other)
      if (std::binary_search(s.begin(), s.end(), id)) return false;
    return true;
  }
};

}  // namespace isonet
