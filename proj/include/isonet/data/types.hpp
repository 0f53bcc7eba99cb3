// types.hpp -- dataset containers: m/z axis, intensity matrix, cohort metadata.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "isonet/common.hpp"

namespace isonet {

/// The m/z grid. Metadata only: layers operate on bin indices, the axis is
/// carried through for reporting (peak tables, sensitivity maps).
struct MzAxis {
  std::vector<double> values;

  std::size_t size() const { return values.size(); }

  void validate() const {
    for (std::size_t i = 1; i < values.size(); ++i)
      if (!(values[i] > values[i - 1]))
        throw validation_error("mz axis: values must be strictly increasing (index " +
                               std::to_string(i) + ")");
  }
};

/// N x d intensity matrix, f32 storage, row-major.
struct SpectraMatrix {
  std::int64_t n = 0;
  std::int64_t d = 0;
  std::vector<float> values;
  bool normalized = false;

  std::span<const float> row(std::int64_t i) const {
    return {values.data() + i * d, static_cast<std::size_t>(d)};
  }
  std::span<float> row(std::int64_t i) {
    return {values.data() + i * d, static_cast<std::size_t>(d)};
  }
  float at(std::int64_t i, std::int64_t j) const { return values[i * d + j]; }

  void validate() const {
    if (n < 0 || d < 0 || values.size() != static_cast<std::size_t>(n) * static_cast<std::size_t>(d))
      throw validation_error("spectra: storage size does not match n x d");
    if (!all_finite(values)) throw validation_error("spectra: non-finite intensity");
    if (normalized)
      for (std::int64_t i = 0; i < n; ++i) {
        double s = 0.0;
        for (float v : row(i)) s += v;
        if (std::abs(s - 1.0) > 1e-5)
          throw validation_error("spectra: normalized flag set but row " + std::to_string(i) +
                                 " sums to " + std::to_string(s));
      }
  }
};

struct SpectrumMeta {
  std::int64_t spectrum_id = 0;
  std::string patient_id;
  std::string core_id;
  std::string tma_id;
  bool roi = true;
  int label = 0;

  bool operator==(const SpectrumMeta&) const = default;
};

/// Per-spectrum labels and the TMA -> core -> spot hierarchy.
struct CohortMeta {
  std::vector<std::string> class_names;
  std::vector<SpectrumMeta> spectra;

  int n_classes() const { return static_cast<int>(class_names.size()); }

  void validate() const {
    std::map<std::string, std::pair<std::string, int>> core_to;
    for (const auto& s : spectra) {
      if (s.label < 0 || s.label >= n_classes())
        throw validation_error("meta: spectrum " + std::to_string(s.spectrum_id) +
                               " has class index " + std::to_string(s.label) + " with only " +
                               std::to_string(n_classes()) + " class names");
      auto [it, inserted] = core_to.try_emplace(s.core_id, s.tma_id, s.label);
      if (!inserted && (it->second.first != s.tma_id || it->second.second != s.label))
        throw validation_error("meta: core " + s.core_id +
                               " maps to more than one tma_id or label");
    }
  }

  std::vector<std::string> tma_ids() const {
    std::set<std::string> ids;
    for (const auto& s : spectra) ids.insert(s.tma_id);
    return {ids.begin(), ids.end()};
  }
};

struct Dataset {
  MzAxis axis;
  SpectraMatrix spectra;
  CohortMeta meta;

  void validate() const {
    axis.validate();
    spectra.validate();
    meta.validate();
    if (static_cast<std::int64_t>(axis.size()) != spectra.d)
      throw validation_error("dataset: axis length " + std::to_string(axis.size()) +
                             " != spectra dimension " + std::to_string(spectra.d));
    if (static_cast<std::int64_t>(meta.spectra.size()) != spectra.n)
      throw validation_error("dataset: meta has " + std::to_string(meta.spectra.size()) +
                             " records for " + std::to_string(spectra.n) + " spectra");
  }
};

/// TMA-level cross-validation plan: test sets partition the TMA universe.
struct FoldPlan {
  std::vector<std::string> tmas;                    // every TMA, sorted
  std::vector<std::vector<std::string>> test_tmas;  // per fold, sorted

  int n_folds() const { return static_cast<int>(test_tmas.size()); }

  std::vector<std::string> train_tmas(int fold) const {
    const auto& test = test_tmas.at(fold);
    std::vector<std::string> train;
    std::set_difference(tmas.begin(), tmas.end(), test.begin(), test.end(),
                        std::back_inserter(train));
    return train;
  }

  void validate() const {
    std::vector<std::string> merged;
    for (const auto& fold : test_tmas) {
      if (!std::is_sorted(fold.begin(), fold.end()))
        throw validation_error("fold plan: test sets must be sorted");
      merged.insert(merged.end(), fold.begin(), fold.end());
    }
    std::sort(merged.begin(), merged.end());
    if (merged != tmas)
      throw validation_error("fold plan: test sets must partition the TMA set exactly once");
  }
};

}  // namespace isonet
