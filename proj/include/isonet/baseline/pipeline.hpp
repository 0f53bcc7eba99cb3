// pipeline.hpp -- the ROC/LDA reference classifier: per-bin MWW ranking on
// the training TMAs, top-K feature selection, LDA fit, spot- and core-level
// evaluation per fold, and worst/best aggregation over the K grid.
#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <iomanip>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "isonet/baseline/lda.hpp"
#include "isonet/baseline/mww.hpp"
#include "isonet/common.hpp"
#include "isonet/data/folds.hpp"
#include "isonet/data/types.hpp"
#include "isonet/eval/leakage.hpp"
#include "isonet/eval/metrics.hpp"

namespace isonet {

struct RocRanking {
  std::vector<double> auc;    // per bin, P(class0 value < class1 value)
  std::vector<double> score;  // |auc - 0.5|
  std::vector<int> order;     // bin indices by score descending, ties by lower bin
};

inline RocRanking rank_bins(const Dataset& ds, const std::vector<std::size_t>& train_rows,
                            TouchRecorder* recorder = nullptr) {
  if (train_rows.empty()) throw validation_error("rank_bins: no training rows");
  std::vector<float> a, b;
  RocRanking ranking;
  const auto d = static_cast<std::size_t>(ds.spectra.d);
  ranking.auc.resize(d);
  ranking.score.resize(d);

  for (std::size_t row : train_rows) {
    const int label = ds.meta.spectra[row].label;
    if (label != 0 && label != 1)
      throw validation_error("rank_bins: ranking is defined for 2-class data");
    if (recorder != nullptr) recorder->touch(ds.meta.spectra[row].spectrum_id);
  }

  for (std::size_t bin = 0; bin < d; ++bin) {
    a.clear();
    b.clear();
    for (std::size_t row : train_rows) {
      const float v = ds.spectra.at(static_cast<std::int64_t>(row), static_cast<std::int64_t>(bin));
      (ds.meta.spectra[row].label == 0 ? a : b).push_back(v);
    }
    if (a.empty() || b.empty())
      throw validation_error("rank_bins: training rows cover only one class");
    ranking.auc[bin] = mww_statistic(a, b);
    ranking.score[bin] = std::abs(ranking.auc[bin] - 0.5);
  }

  ranking.order.resize(d);
  std::iota(ranking.order.begin(), ranking.order.end(), 0);
  std::stable_sort(ranking.order.begin(), ranking.order.end(), [&](int x, int y) {
    if (ranking.score[static_cast<std::size_t>(x)] != ranking.score[static_cast<std::size_t>(y)])
      return ranking.score[static_cast<std::size_t>(x)] >
             ranking.score[static_cast<std::size_t>(y)];
    return x < y;
  });
  return ranking;
}

inline std::vector<int> select_top_k(const RocRanking& ranking, int k) {
  if (k < 1 || k > static_cast<int>(ranking.order.size()))
    throw validation_error("select_top_k: K=" + std::to_string(k) + " outside [1, " +
                           std::to_string(ranking.order.size()) + "]");
  return {ranking.order.begin(), ranking.order.begin() + k};
}

inline Eigen::MatrixXd extract_features(const Dataset& ds, const std::vector<std::size_t>& rows,
                                        const std::vector<int>& bins,
                                        TouchRecorder* recorder = nullptr) {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(rows.size()),
                      static_cast<Eigen::Index>(bins.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (recorder != nullptr) recorder->touch(ds.meta.spectra[rows[i]].spectrum_id);
    for (std::size_t j = 0; j < bins.size(); ++j)
      out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
          ds.spectra.at(static_cast<std::int64_t>(rows[i]), bins[j]);
  }
  return out;
}

struct BaselineCell {
  int fold = 0;
  int k = 0;
  double spot_bal_acc = 0.0;
  double core_bal_acc = 0.0;
};

struct BaselineReport {
  std::vector<int> k_grid;
  std::vector<BaselineCell> cells;  // fold-major, K inner
  std::vector<double> spot_by_k;    // pooled over folds, per K
  std::vector<double> core_by_k;
  double worst_spot = 0.0, best_spot = 0.0;
  double worst_core = 0.0, best_core = 0.0;
  long long core_ties = 0;
  std::vector<std::uint64_t> fold_train_hashes;

  std::string to_table() const {
    std::ostringstream out;
    out << std::setprecision(17);
    out << "fold\tK\tlevel\tbalanced_accuracy\n";
    for (const auto& c : cells) {
      out << c.fold << '\t' << c.k << "\tspot\t" << c.spot_bal_acc << '\n';
      out << c.fold << '\t' << c.k << "\tcore\t" << c.core_bal_acc << '\n';
    }
    return out.str();
  }
};

inline BaselineReport roc_lda_pipeline(const Dataset& ds, const FoldPlan& plan,
                                       std::vector<int> k_grid = {5, 10, 20, 50, 100},
                                       double shrinkage = 0.1) {
  if (ds.meta.class_names.size() != 2)
    throw validation_error("roc_lda_pipeline: requires a 2-class dataset");
  if (k_grid.empty()) throw validation_error("roc_lda_pipeline: empty K grid");
  plan.validate();

  BaselineReport report;
  report.k_grid = k_grid;
  std::vector<ConfusionCounts> pooled_spot(k_grid.size());
  std::vector<ConfusionCounts> pooled_core(k_grid.size());

  for (int fold = 0; fold < plan.n_folds(); ++fold) {
    const auto train_rows = rows_for_tmas(ds.meta, plan.train_tmas(fold));
    const auto test_rows = rows_for_tmas(ds.meta, plan.test_tmas[static_cast<std::size_t>(fold)]);
    if (train_rows.empty() || test_rows.empty())
      throw validation_error("roc_lda_pipeline: fold " + std::to_string(fold) +
                             " has an empty train or test side");

    TouchRecorder recorder;
    auto ranking = rank_bins(ds, train_rows, &recorder);

    std::vector<int> train_labels, test_labels;
    for (std::size_t r : train_rows) train_labels.push_back(ds.meta.spectra[r].label);
    std::vector<SpectrumMeta> test_meta;
    std::vector<std::int64_t> test_ids;
    for (std::size_t r : test_rows) {
      test_labels.push_back(ds.meta.spectra[r].label);
      test_meta.push_back(ds.meta.spectra[r]);
      test_ids.push_back(ds.meta.spectra[r].spectrum_id);
    }

    for (std::size_t ki = 0; ki < k_grid.size(); ++ki) {
      const auto bins = select_top_k(ranking, k_grid[ki]);
      auto train_x = extract_features(ds, train_rows, bins, &recorder);
      auto model = lda_fit(train_x, train_labels, 2, shrinkage, bins);
      auto preds = lda_predict(model, extract_features(ds, test_rows, bins));

      ConfusionCounts spot;
      for (std::size_t i = 0; i < preds.size(); ++i) spot.add(test_labels[i], preds[i]);
      auto votes = core_majority_vote(preds, test_meta, 2);
      ConfusionCounts core;
      for (std::size_t i = 0; i < votes.vote.size(); ++i) core.add(votes.truth[i], votes.vote[i]);
      report.core_ties += votes.ties;

      report.cells.push_back(
          {fold, k_grid[ki], balanced_accuracy(spot), balanced_accuracy(core)});
      pooled_spot[ki] += spot;
      pooled_core[ki] += core;
    }

    if (!recorder.disjoint(test_ids))
      throw validation_error("roc_lda_pipeline: leakage audit failed on fold " +
                             std::to_string(fold));
    report.fold_train_hashes.push_back(recorder.hash());
  }

  for (std::size_t ki = 0; ki < k_grid.size(); ++ki) {
    report.spot_by_k.push_back(balanced_accuracy(pooled_spot[ki]));
    report.core_by_k.push_back(balanced_accuracy(pooled_core[ki]));
  }
  report.worst_spot = *std::min_element(report.spot_by_k.begin(), report.spot_by_k.end());
  report.best_spot = *std::max_element(report.spot_by_k.begin(), report.spot_by_k.end());
  report.worst_core = *std::min_element(report.core_by_k.begin(), report.core_by_k.end());
  report.best_core = *std::max_element(report.core_by_k.begin(), report.core_by_k.end());
  return report;
}

}  // namespace isonet
