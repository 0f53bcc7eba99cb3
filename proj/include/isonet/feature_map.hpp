// feature_map.hpp -- the channels x length activation container layers operate on.
#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "isonet/common.hpp"

namespace isonet {

/// A 1D multi-channel signal, stored channel-major (channel c occupies
/// data[c*length .. c*length+length)). Mass spectra enter the network as a
/// single-channel map of length d.
template <class T>
struct FeatureMap {
  int channels = 0;
  int length = 0;
  std::vector<T> data;

  FeatureMap() = default;
  FeatureMap(int channels_, int length_)
      : channels(channels_), length(length_),
        data(static_cast<std::size_t>(channels_) * length_, T(0)) {}

  T& at(int c, int i) { return data[static_cast<std::size_t>(c) * length + i]; }
  T at(int c, int i) const { return data[static_cast<std::size_t>(c) * length + i]; }

  std::span<T> channel(int c) { return {data.data() + static_cast<std::size_t>(c) * length, static_cast<std::size_t>(length)}; }
  std::span<const T> channel(int c) const {
    return {data.data() + static_cast<std::size_t>(c) * length, static_cast<std::size_t>(length)};
  }

  std::size_t size() const { return data.size(); }

  bool finite() const { return all_finite(data); }
};

/// Single-channel map over an existing vector (copies; maps are small).
template <class T>
FeatureMap<T> as_feature_map(std::span<const T> values) {
  FeatureMap<T> m(1, static_cast<int>(values.size()));
  std::copy(values.begin(), values.end(), m.data.begin());
  return m;
}

}  // namespace isonet
