// sensitivity.hpp -- input-gradient sensitivity maps: the per-bin standard
// deviation of the training inputs times the gradient of a class probability
// with respect to the input, averaged over a spectrum set. Positive entries
// mean raising that bin's intensity raises the class probability.
#pragma once

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "isonet/common.hpp"
#include "isonet/data/types.hpp"
#include "isonet/model/network.hpp"

namespace isonet {

struct SensitivityMap {
  int cls = 0;
  std::vector<double> values;  // signed, length d
  std::vector<double> sigma;   // per-bin population std over the sample set
  long long n_samples = 0;
};

/// Per-bin population (divide-by-N) standard deviation over the given
/// spectra, taken in the network's input space (i.e. after normalization).
template <class T>
std::vector<double> compute_sigma(const std::vector<std::span<const T>>& rows) {
  if (rows.size() < 2)
    throw validation_error("compute_sigma: need at least two spectra");
  const std::size_t d = rows[0].size();
  for (const auto& r : rows)
    if (r.size() != d) throw validation_error("compute_sigma: rows differ in length");
  const double n = static_cast<double>(rows.size());
  std::vector<double> mean(d, 0.0);
  for (const auto& r : rows)
    for (std::size_t k = 0; k < d; ++k) mean[k] += static_cast<double>(r[k]);
  for (auto& m : mean) m /= n;
  std::vector<double> sigma(d, 0.0);
  for (const auto& r : rows)
    for (std::size_t k = 0; k < d; ++k) {
      const double dev = static_cast<double>(r[k]) - mean[k];
      sigma[k] += dev * dev;
    }
  for (auto& s : sigma) s = std::sqrt(s / n);
  return sigma;
}

/// sigma ⊙ d f_cls / d x at a single spectrum, infer mode.
template <class T>
std::vector<double> sample_sensitivity(const NetworkPlan& plan, NetworkState<T>& state,
                                       std::span<const T> x, int cls,
                                       std::span<const double> sigma) {
  if (sigma.size() != x.size())
    throw validation_error("sample_sensitivity: sigma length " + std::to_string(sigma.size()) +
                           " != input length " + std::to_string(x.size()));
  const auto grad = backward_input(plan, state, x, cls);
  std::vector<double> out(x.size());
  for (std::size_t k = 0; k < out.size(); ++k)
    out[k] = sigma[k] == 0.0 ? 0.0 : sigma[k] * static_cast<double>(grad[k]);
  return out;
}

/// Arithmetic mean of sample_sensitivity over the given spectra with an
/// externally fitted sigma. Summation order is fixed, so the result is
/// bit-reproducible for a given model and spectrum set.
template <class T>
SensitivityMap mean_sensitivity(const NetworkPlan& plan, NetworkState<T>& state,
                                const std::vector<std::span<const T>>& rows, int cls,
                                std::vector<double> sigma) {
  if (rows.empty()) throw validation_error("mean_sensitivity: empty spectrum set");
  SensitivityMap map;
  map.cls = cls;
  map.sigma = std::move(sigma);
  map.values.assign(rows[0].size(), 0.0);
  for (const auto& r : rows) {
    const auto s = sample_sensitivity(plan, state, r, cls, map.sigma);
    for (std::size_t k = 0; k < s.size(); ++k) map.values[k] += s[k];
  }
  const double n = static_cast<double>(rows.size());
  for (auto& v : map.values) v /= n;
  map.n_samples = static_cast<long long>(rows.size());
  return map;
}

/// Convenience: sigma fitted on the same spectra the mean runs over.
template <class T>
SensitivityMap mean_sensitivity(const NetworkPlan& plan, NetworkState<T>& state,
                                const std::vector<std::span<const T>>& rows, int cls) {
  return mean_sensitivity(plan, state, rows, cls, compute_sigma(rows));
}

/// Indices of the top-n entries by |value|, descending; ties by lower bin.
inline std::vector<int> top_bins(const std::vector<double>& values, int n) {
  std::vector<int> order(values.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    return std::abs(values[static_cast<std::size_t>(a)]) >
           std::abs(values[static_cast<std::size_t>(b)]);
  });
  order.resize(std::min<std::size_t>(order.size(), static_cast<std::size_t>(n)));
  return order;
}

/// Writes a gnuplot-friendly map: '#' comment lines carry a ranked peak
/// table (top-n bins by |value|), then one "m/z <tab> value" row per bin.
inline void export_map(const SensitivityMap& map, const MzAxis& axis, const std::string& path,
                       int top_n = 10) {
  if (axis.size() != map.values.size() || map.values.size() != map.sigma.size())
    throw validation_error("export_map: axis, values, and sigma lengths disagree");
  std::ofstream out(path);
  if (!out) throw io_error("export_map: cannot open " + path);
  out << std::setprecision(17);
  out << "# sensitivity map: class " << map.cls << ", " << map.n_samples << " spectra\n";
  out << "# rank\tmz\tvalue\n";
  const auto peaks = top_bins(map.values, top_n);
  for (std::size_t i = 0; i < peaks.size(); ++i) {
    const auto b = static_cast<std::size_t>(peaks[i]);
    out << "# " << (i + 1) << '\t' << axis.values[b] << '\t' << map.values[b] << '\n';
  }
  for (std::size_t k = 0; k < map.values.size(); ++k)
    out << axis.values[k] << '\t' << map.values[k] << '\n';
  if (!out) throw io_error("export_map: write failed for " + path);
}

}  // namespace isonet
