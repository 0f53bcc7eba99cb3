// synth.hpp -- synthetic cohort generation with planted peaks and confounders.
//
// Desk-scale stand-in for an imaging-MS cohort: a TMA -> core -> spot
// hierarchy whose spot spectra are baseline + class-specific isotope-envelope
// markers + optional per-TMA broadband confounder + non-negative noise.
#pragma once

#include <cmath>
#include <random>
#include <string>
#include <vector>

#include "isonet/common.hpp"
#include "isonet/data/types.hpp"

namespace isonet {

/// One planted marker: a Gaussian isotope envelope of envelope_len peaks at
/// 1 Da spacing starting at center_bin, amplitudes decaying geometrically.
struct SynthMarker {
  int center_bin = 0;
  int envelope_len = 3;
  float amplitude = 1.0f;
  int sign = +1;
};

/// Broadband per-TMA bias over [lo_bin, hi_bin], applied to TMAs whose
/// assigned class equals target_class. Correlates with the label when labels
/// are assigned per TMA, planting a confounder the models may latch onto.
struct SynthConfounder {
  int lo_bin = 0;
  int hi_bin = 0;
  float amplitude = 0.0f;
  int target_class = 1;
};

struct SynthSpec {
  int d = 150;
  int classes = 2;
  std::vector<std::string> class_names;              // defaults to class0, class1, ...
  std::vector<std::vector<SynthMarker>> markers;     // per class
  std::vector<SynthConfounder> confounders;
  float noise_sigma = 0.01f;
  float baseline_amp = 0.0f;
  int peak_width_bins = 2;
  double mz_start = 300.0;
  double da_per_bin = 0.25;
  bool labels_per_tma = false;  // false: cores alternate classes within a TMA
  std::uint64_t seed = 0;

  int envelope_spacing() const {
    return std::max(1, static_cast<int>(std::lround(1.0 / da_per_bin)));
  }

  void validate() const {
    if (d < 1) throw validation_error("synth: d must be positive");
    if (classes < 2) throw validation_error("synth: need at least two classes");
    if (static_cast<int>(markers.size()) != classes)
      throw validation_error("synth: markers must list one entry per class");
    if (!class_names.empty() && static_cast<int>(class_names.size()) != classes)
      throw validation_error("synth: class_names length mismatch");
    if (peak_width_bins < 1) throw validation_error("synth: peak_width_bins must be positive");
    if (noise_sigma < 0.0f || baseline_amp < 0.0f)
      throw validation_error("synth: noise_sigma and baseline_amp must be non-negative");
    const int spacing = envelope_spacing();
    const int support = 3 * peak_width_bins;
    for (const auto& per_class : markers)
      for (const auto& m : per_class) {
        if (m.center_bin < 0 || m.center_bin >= d)
          throw validation_error("synth: marker center bin " + std::to_string(m.center_bin) +
                                 " outside [0, " + std::to_string(d) + ")");
        if (m.envelope_len < 1) throw validation_error("synth: envelope_len must be positive");
        const int last = m.center_bin + (m.envelope_len - 1) * spacing;
        if (m.center_bin - support < 0 || last + support >= d)
          throw validation_error("synth: envelope at bin " + std::to_string(m.center_bin) +
                                 " (length " + std::to_string(m.envelope_len) +
                                 ") exceeds the axis range");
      }
    for (const auto& c : confounders) {
      if (c.lo_bin < 0 || c.hi_bin >= d || c.lo_bin > c.hi_bin)
        throw validation_error("synth: confounder band outside the axis");
      if (c.target_class < 0 || c.target_class >= classes)
        throw validation_error("synth: confounder target class out of range");
    }
  }
};

struct SynthResult {
  Dataset dataset;
  std::vector<std::vector<int>> marker_bins;  // per class, envelope peak centers
};

/// Peaks are rendered with compact support (truncated at 3 widths), so with
/// zero noise and zero baseline the class means differ exactly on the
/// envelope supports and nowhere else.
inline SynthResult synth_cohort(const SynthSpec& spec, int n_tmas, int cores_per_tma,
                                int spots_per_core) {
  spec.validate();
  if (n_tmas < 1 || cores_per_tma < 1 || spots_per_core < 1)
    throw validation_error("synth: cohort shape must be positive");

  SynthResult result;
  Dataset& ds = result.dataset;
  ds.axis.values.resize(spec.d);
  for (int b = 0; b < spec.d; ++b) ds.axis.values[b] = spec.mz_start + spec.da_per_bin * b;

  ds.meta.class_names = spec.class_names;
  if (ds.meta.class_names.empty())
    for (int c = 0; c < spec.classes; ++c) ds.meta.class_names.push_back("class" + std::to_string(c));

  result.marker_bins.resize(spec.classes);
  const int spacing = spec.envelope_spacing();
  for (int c = 0; c < spec.classes; ++c)
    for (const auto& m : spec.markers[c])
      for (int e = 0; e < m.envelope_len; ++e)
        result.marker_bins[c].push_back(m.center_bin + e * spacing);

  const std::int64_t n = static_cast<std::int64_t>(n_tmas) * cores_per_tma * spots_per_core;
  ds.spectra.n = n;
  ds.spectra.d = spec.d;
  ds.spectra.values.resize(static_cast<std::size_t>(n) * spec.d);

  const double sigma = spec.peak_width_bins;
  const int support = 3 * spec.peak_width_bins;
  const double decay = 0.6;

  // Class template: markers only, computed once per class.
  std::vector<std::vector<double>> tmpl(spec.classes, std::vector<double>(spec.d, 0.0));
  for (int c = 0; c < spec.classes; ++c)
    for (const auto& m : spec.markers[c]) {
      double amp = static_cast<double>(m.amplitude) * m.sign;
      for (int e = 0; e < m.envelope_len; ++e, amp *= decay) {
        const int center = m.center_bin + e * spacing;
        for (int b = center - support; b <= center + support; ++b) {
          const double z = (b - center) / sigma;
          tmpl[c][b] += amp * std::exp(-0.5 * z * z);
        }
      }
    }

  std::vector<double> baseline(spec.d, 0.0);
  if (spec.baseline_amp > 0.0f)
    for (int b = 0; b < spec.d; ++b) {
      const double z = (b - 0.17 * spec.d) / (0.13 * spec.d);
      baseline[b] = spec.baseline_amp * (0.15 + std::exp(-0.5 * z * z));
    }

  std::int64_t id = 0;
  for (int t = 0; t < n_tmas; ++t) {
    const int tma_class = t % spec.classes;
    for (int j = 0; j < cores_per_tma; ++j) {
      const int core_index = t * cores_per_tma + j;
      const int label = spec.labels_per_tma ? tma_class : core_index % spec.classes;
      for (int s = 0; s < spots_per_core; ++s, ++id) {
        std::mt19937_64 rng(mix_seed(spec.seed, {0x73706f74ULL, static_cast<std::uint64_t>(id)}));
        std::normal_distribution<double> gauss(0.0, 1.0);
        auto row = ds.spectra.row(id);
        for (int b = 0; b < spec.d; ++b) {
          double v = baseline[b] + tmpl[label][b];
          for (const auto& c : spec.confounders)
            if (tma_class == c.target_class && b >= c.lo_bin && b <= c.hi_bin)
              v += static_cast<double>(c.amplitude);
          if (spec.noise_sigma > 0.0f) v += std::abs(gauss(rng)) * spec.noise_sigma;
          row[b] = static_cast<float>(v < 0.0 ? 0.0 : v);
        }
        SpectrumMeta m;
        m.spectrum_id = id;
        m.patient_id = "P" + std::to_string(core_index / 2);
        m.core_id = "T" + std::to_string(t) + "C" + std::to_string(j);
        m.tma_id = "T" + std::to_string(t);
        m.roi = true;
        m.label = label;
        ds.meta.spectra.push_back(std::move(m));
      }
    }
  }
  ds.validate();
  return result;
}

}  // namespace isonet
