// mww.hpp -- Mann-Whitney-Wilcoxon statistic in probability-of-superiority
// (AUC) form: P(a < b) with ties counted one half.
//
// Computed from average ranks, so it matches the brute-force pairwise count
// exactly: all intermediate quantities are half-integers, which IEEE doubles
// represent without rounding at any realistic group size.
#pragma once

#include <algorithm>
#include <span>
#include <vector>

#include "isonet/common.hpp"

namespace isonet {

template <class T>
double mww_statistic(std::span<const T> a, std::span<const T> b) {
  if (a.empty() || b.empty()) throw validation_error("mww: both groups must be non-empty");
  const std::size_t na = a.size(), nb = b.size();

  struct Entry {
    double value;
    bool from_a;
  };
  std::vector<Entry> all;
  all.reserve(na + nb);
  for (T v : a) all.push_back({static_cast<double>(v), true});
  for (T v : b) all.push_back({static_cast<double>(v), false});
  std::sort(all.begin(), all.end(), [](const Entry& x, const Entry& y) { return x.value < y.value; });

  // Average ranks within tie groups; accumulate the rank sum of group a.
  double rank_sum_a = 0.0;
  std::size_t i = 0;
  while (i < all.size()) {
    std::size_t j = i;
    while (j < all.size() && all[j].value == all[i].value) ++j;
    const double avg_rank = 0.5 * (static_cast<double>(i + 1) + static_cast<double>(j));
    for (std::size_t k = i; k < j; ++k)
      if (all[k].from_a) rank_sum_a += avg_rank;
    i = j;
  }

  // U_a = #(a > b) + ties/2; the statistic is its complement as a fraction.
  const double u_a = rank_sum_a - 0.5 * static_cast<double>(na) * static_cast<double>(na + 1);
  const double den = static_cast<double>(na) * static_cast<double>(nb);
  return (den - u_a) / den;
}

template <class T>
double mww_statistic(const std::vector<T>& a, const std::vector<T>& b) {
  return mww_statistic(std::span<const T>(a), std::span<const T>(b));
}

}  // namespace isonet
