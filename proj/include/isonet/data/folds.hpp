// folds.hpp -- randomized TMA-level cross-validation folds, stratified by the
// class signature of each TMA.
#pragma once

#include <algorithm>
#include <map>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "isonet/common.hpp"
#include "isonet/data/types.hpp"

namespace isonet {

/// Partitions the TMAs into n_folds test groups. TMAs are grouped by the set
/// of classes they contain, each group is shuffled under the seed, and groups
/// are dealt round-robin with a running fold counter so fold sizes stay
/// balanced while every fold's test set samples each signature when possible.
inline FoldPlan make_fold_plan(const CohortMeta& meta, int n_folds, std::uint64_t seed) {
  if (n_folds < 2) throw validation_error("fold plan: n_folds must be at least 2");
  meta.validate();

  std::map<std::string, std::set<int>> tma_classes;
  for (const auto& s : meta.spectra) tma_classes[s.tma_id].insert(s.label);
  if (static_cast<int>(tma_classes.size()) < n_folds)
    throw validation_error("fold plan: " + std::to_string(tma_classes.size()) +
                           " TMAs cannot fill " + std::to_string(n_folds) + " folds");

  for (int c = 0; c < meta.n_classes(); ++c) {
    int with_class = 0;
    for (const auto& [tma, classes] : tma_classes) with_class += classes.count(c);
    if (with_class < n_folds)
      throw validation_error("fold plan: class \"" + meta.class_names[c] + "\" appears in " +
                             std::to_string(with_class) + " TMAs, need at least " +
                             std::to_string(n_folds) + " for stratification");
  }

  // Signature key -> member TMAs, in sorted order for determinism.
  std::map<std::string, std::vector<std::string>> groups;
  for (const auto& [tma, classes] : tma_classes) {
    std::string key;
    for (int c : classes) key += std::to_string(c) + ",";
    groups[key].push_back(tma);
  }

  std::mt19937_64 rng(mix_seed(seed, fnv1a(std::string("fold-plan"))));
  FoldPlan plan;
  plan.test_tmas.resize(n_folds);
  std::size_t deal = 0;
  for (auto& [key, members] : groups) {
    std::shuffle(members.begin(), members.end(), rng);
    for (auto& tma : members) plan.test_tmas[deal++ % n_folds].push_back(std::move(tma));
  }
  for (auto& fold : plan.test_tmas) std::sort(fold.begin(), fold.end());
  for (const auto& [tma, classes] : tma_classes) plan.tmas.push_back(tma);
  plan.validate();
  return plan;
}

/// Rows of the dataset whose TMA is in `tmas`, in dataset order.
inline std::vector<std::size_t> rows_for_tmas(const CohortMeta& meta,
                                              const std::vector<std::string>& tmas) {
  std::vector<std::size_t> rows;
  for (std::size_t i = 0; i < meta.spectra.size(); ++i)
    if (std::binary_search(tmas.begin(), tmas.end(), meta.spectra[i].tma_id)) rows.push_back(i);
  return rows;
}

}  // namespace isonet
