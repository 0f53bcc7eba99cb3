// cross_validate.hpp -- TMA-level cross-validation orchestration. A trainer
// callback is fitted once per (run, fold), audited against the fold's test
// spectrum ids, and evaluated at spot and core level; run-level balanced
// accuracies are pooled over folds and aggregated as median + IQR.
#pragma once

#include <cstdint>
#include <functional>
#include <iomanip>
#include <sstream>
#include <string>
#include <vector>

#include "isonet/common.hpp"
#include "isonet/data/folds.hpp"
#include "isonet/data/types.hpp"
#include "isonet/eval/leakage.hpp"
#include "isonet/eval/metrics.hpp"

namespace isonet {

/// A fitted model: maps dataset rows to predicted class indices, one per row.
using Predictor =
    std::function<std::vector<int>(const Dataset&, const std::vector<std::size_t>&)>;

/// Fits a model on the given train rows only. `seed` is unique per
/// (run, fold). The trainer must record every spectrum id it reads in the
/// recorder; the audit checks the recorded set against the fold's test ids.
using FoldTrainer = std::function<Predictor(
    const Dataset&, const std::vector<std::size_t>& train_rows, std::uint64_t seed,
    TouchRecorder&)>;

struct FoldEval {
  ConfusionCounts spot;
  ConfusionCounts core;
  long long core_ties = 0;
};

/// Runs the predictor on the fold's test rows and tallies spot-level counts
/// over spectra plus core-level counts over majority-voted cores.
inline FoldEval evaluate_fold(const Predictor& predict, const Dataset& ds,
                              const std::vector<std::size_t>& test_rows, int n_classes) {
  if (test_rows.empty()) throw validation_error("evaluate_fold: empty test set");
  const auto preds = predict(ds, test_rows);
  if (preds.size() != test_rows.size())
    throw validation_error("evaluate_fold: predictor returned " +
                           std::to_string(preds.size()) + " labels for " +
                           std::to_string(test_rows.size()) + " rows");
  FoldEval out;
  std::vector<SpectrumMeta> metas;
  metas.reserve(test_rows.size());
  for (std::size_t i = 0; i < test_rows.size(); ++i) {
    const auto& m = ds.meta.spectra[test_rows[i]];
    out.spot.add(m.label, preds[i]);
    metas.push_back(m);
  }
  const auto votes = core_majority_vote(preds, metas, n_classes);
  for (std::size_t i = 0; i < votes.vote.size(); ++i) out.core.add(votes.truth[i], votes.vote[i]);
  out.core_ties = votes.ties;
  return out;
}

struct CvCell {
  int run = 0;
  int fold = 0;
  double spot_bal_acc = 0.0;
  double core_bal_acc = 0.0;
  long long core_ties = 0;
};

struct CvReport {
  int n_runs = 0;
  int n_folds = 0;
  std::vector<CvCell> cells;      // run-major, fold inner
  std::vector<double> run_spot;   // per run, confusion pooled over folds
  std::vector<double> run_core;
  double spot_median = 0.0, spot_iqr = 0.0;
  double core_median = 0.0, core_iqr = 0.0;
  long long core_ties = 0;
  std::vector<std::uint64_t> train_hashes;  // audit hash per (run, fold), run-major

  std::string to_table() const {
    std::ostringstream out;
    out << std::setprecision(17);
    out << "run\tfold\tlevel\tbalanced_accuracy\n";
    for (const auto& c : cells) {
      out << c.run << '\t' << c.fold << "\tspot\t" << c.spot_bal_acc << '\n';
      out << c.run << '\t' << c.fold << "\tcore\t" << c.core_bal_acc << '\n';
    }
    return out.str();
  }

  std::string summary() const {
    std::ostringstream out;
    out << std::fixed << std::setprecision(4);
    out << "cross-validation: " << n_folds << " folds x " << n_runs << " runs\n";
    out << "level   median      iqr\n";
    out << "spot    " << spot_median << "   " << spot_iqr << '\n';
    out << "core    " << core_median << "   " << core_iqr << '\n';
    for (std::size_t r = 0; r < run_spot.size(); ++r)
      out << "run " << r << "   spot " << run_spot[r] << "   core " << run_core[r] << '\n';
    out << "tied core votes: " << core_ties << '\n';
    return out.str();
  }
};

inline CvReport cross_validate(const Dataset& ds, const FoldPlan& plan,
                               const FoldTrainer& trainer, int n_runs = 4,
                               std::uint64_t master_seed = 0) {
  if (n_runs < 1) throw validation_error("cross_validate: n_runs must be at least 1");
  plan.validate();
  const int n_classes = static_cast<int>(ds.meta.class_names.size());

  CvReport report;
  report.n_runs = n_runs;
  report.n_folds = plan.n_folds();
  for (int run = 0; run < n_runs; ++run) {
    const std::uint64_t run_seed =
        mix_seed(master_seed, {fnv1a("run"), static_cast<std::uint64_t>(run)});
    ConfusionCounts pooled_spot, pooled_core;
    for (int fold = 0; fold < plan.n_folds(); ++fold) {
      const auto train_rows = rows_for_tmas(ds.meta, plan.train_tmas(fold));
      const auto test_rows =
          rows_for_tmas(ds.meta, plan.test_tmas[static_cast<std::size_t>(fold)]);
      if (train_rows.empty() || test_rows.empty())
        throw validation_error("cross_validate: fold " + std::to_string(fold) +
                               " has an empty train or test side");

      const std::uint64_t fold_seed =
          mix_seed(run_seed, {fnv1a("fold"), static_cast<std::uint64_t>(fold)});
      TouchRecorder recorder;
      const auto predictor = trainer(ds, train_rows, fold_seed, recorder);

      std::vector<std::int64_t> test_ids;
      test_ids.reserve(test_rows.size());
      for (std::size_t r : test_rows) test_ids.push_back(ds.meta.spectra[r].spectrum_id);
      if (!recorder.disjoint(test_ids))
        throw validation_error("cross_validate: leakage audit failed on run " +
                               std::to_string(run) + ", fold " + std::to_string(fold));
      report.train_hashes.push_back(recorder.hash());

      const auto ev = evaluate_fold(predictor, ds, test_rows, n_classes);
      report.cells.push_back({run, fold, balanced_accuracy(ev.spot),
                              balanced_accuracy(ev.core), ev.core_ties});
      pooled_spot += ev.spot;
      pooled_core += ev.core;
      report.core_ties += ev.core_ties;
    }
    report.run_spot.push_back(balanced_accuracy(pooled_spot));
    report.run_core.push_back(balanced_accuracy(pooled_core));
  }
  report.spot_median = median(report.run_spot);
  report.spot_iqr = iqr(report.run_spot);
  report.core_median = median(report.run_core);
  report.core_iqr = iqr(report.run_core);
  return report;
}

}  // namespace isonet
