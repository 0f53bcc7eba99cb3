// metrics.hpp -- balanced accuracy, core-level majority voting, and the
// median/IQR aggregation used for repeated-run reporting.
//
// Class index 0 is the "positive" class throughout; balanced accuracy is
// symmetric under swapping the two classes, so the choice only affects which
// count is called TP.
#pragma once

#include <algorithm>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "isonet/common.hpp"
#include "isonet/data/types.hpp"

namespace isonet {

struct ConfusionCounts {
  long long tp = 0;
  long long fn = 0;
  long long tn = 0;
  long long fp = 0;

  long long positives() const { return tp + fn; }
  long long negatives() const { return tn + fp; }
  long long total() const { return tp + fn + tn + fp; }

  // truth/pred are class indices; class 0 is positive, anything else negative.
  void add(int truth, int pred) {
    if (truth == 0)
      (pred == 0 ? tp : fn) += 1;
    else
      (pred == truth ? tn : fp) += 1;
  }

  ConfusionCounts& operator+=(const ConfusionCounts& o) {
    tp += o.tp;
    fn += o.fn;
    tn += o.tn;
    fp += o.fp;
    return *this;
  }
};

inline double balanced_accuracy(const ConfusionCounts& c) {
  if (c.positives() == 0 || c.negatives() == 0)
    throw validation_error("balanced accuracy: needs at least one unit of each class");
  return 0.5 * (static_cast<double>(c.tp) / static_cast<double>(c.positives()) +
                static_cast<double>(c.tn) / static_cast<double>(c.negatives()));
}

struct CoreVotes {
  std::vector<std::string> core_ids;  // sorted
  std::vector<int> vote;              // modal predicted class per core
  std::vector<int> truth;             // core label from the metadata
  std::vector<long long> spots;       // spot count per core
  long long ties = 0;                 // cores whose modal class was tied
};

/// Majority vote over the spots of each core. `preds[i]` is the predicted
/// class of the spectrum described by `metas[i]`. Exact ties go to the lowest
/// tied class index and are counted.
inline CoreVotes core_majority_vote(std::span<const int> preds,
                                    std::span<const SpectrumMeta> metas, int n_classes) {
  if (preds.size() != metas.size())
    throw validation_error("core vote: predictions and metadata disagree in length");
  if (preds.empty()) throw validation_error("core vote: empty prediction set");
  std::map<std::string, std::vector<long long>> tallies;
  std::map<std::string, int> labels;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    if (preds[i] < 0 || preds[i] >= n_classes)
      throw validation_error("core vote: prediction out of range");
    auto& t = tallies[metas[i].core_id];
    if (t.empty()) t.assign(static_cast<std::size_t>(n_classes), 0);
    t[static_cast<std::size_t>(preds[i])] += 1;
    labels[metas[i].core_id] = metas[i].label;
  }
  CoreVotes out;
  for (const auto& [core, tally] : tallies) {
    int best = 0;
    bool tied = false;
    for (int c = 1; c < n_classes; ++c) {
      if (tally[static_cast<std::size_t>(c)] > tally[static_cast<std::size_t>(best)]) {
        best = c;
        tied = false;
      } else if (tally[static_cast<std::size_t>(c)] == tally[static_cast<std::size_t>(best)]) {
        tied = true;
      }
    }
    long long n_spots = 0;
    for (long long v : tally) n_spots += v;
    out.core_ids.push_back(core);
    out.vote.push_back(best);
    out.truth.push_back(labels[core]);
    out.spots.push_back(n_spots);
    if (tied) out.ties += 1;
  }
  return out;
}

inline double median(std::vector<double> v) {
  if (v.empty()) throw validation_error("median: empty sample");
  std::sort(v.begin(), v.end());
  const std::size_t m = v.size() / 2;
  return v.size() % 2 == 1 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

/// Interquartile range from Tukey hinges: the hinges are medians of the lower
/// and upper halves, with the overall median included in both when n is odd.
inline double iqr(std::vector<double> v) {
  if (v.empty()) throw validation_error("iqr: empty sample");
  if (v.size() == 1) return 0.0;
  std::sort(v.begin(), v.end());
  const std::size_t half = (v.size() + 1) / 2;
  std::vector<double> lower(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(half));
  std::vector<double> upper(v.end() - static_cast<std::ptrdiff_t>(half), v.end());
  return median(upper) - median(lower);
}

}  // namespace isonet
