// checkpoint.hpp -- versioned binary serialization of network state.
//
// Layout (little-endian):
//   magic "ISONETCK" | version u32 | spec_hash u64 | d u32 | C u32
//   | theta count u64, theta f32[] | running count u64, running f64[]
//   | adam flag u8 [| t i64 | count u64 | m f64[] | v f64[] ]
#pragma once

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include "isonet/common.hpp"
#include "isonet/model/network.hpp"
#include "isonet/train/optim.hpp"

namespace isonet {

namespace detail {

inline constexpr char kCheckpointMagic[8] = {'I', 'S', 'O', 'N', 'E', 'T', 'C', 'K'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

template <class T>
void put(std::ofstream& out, const T& v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <class T>
void put_array(std::ofstream& out, const std::vector<T>& v) {
  put(out, static_cast<std::uint64_t>(v.size()));
  out.write(reinterpret_cast<const char*>(v.data()),
            static_cast<std::streamsize>(v.size() * sizeof(T)));
}

template <class T>
T get(std::ifstream& in, const std::string& what) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) throw io_error("checkpoint: truncated while reading " + what);
  return v;
}

template <class T>
std::vector<T> get_array(std::ifstream& in, const std::string& what) {
  const auto n = get<std::uint64_t>(in, what + " count");
  std::vector<T> v(n);
  in.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(n * sizeof(T)));
  if (!in && n > 0) throw io_error("checkpoint: truncated while reading " + what);
  return v;
}

}  // namespace detail

/// Theta is stored as f32 regardless of the in-memory scalar type.
template <class T>
void save_state(const std::filesystem::path& path, const NetworkPlan& plan,
                const NetworkState<T>& state, const AdamState* adam = nullptr) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw io_error("checkpoint: cannot open " + path.string() + " for writing");
  out.write(detail::kCheckpointMagic, sizeof(detail::kCheckpointMagic));
  detail::put(out, detail::kCheckpointVersion);
  detail::put(out, plan.spec.hash());
  detail::put(out, static_cast<std::uint32_t>(plan.spec.input_dim));
  detail::put(out, static_cast<std::uint32_t>(plan.spec.n_classes));

  std::vector<float> theta(state.theta.begin(), state.theta.end());
  detail::put_array(out, theta);
  detail::put_array(out, state.running);

  detail::put(out, static_cast<std::uint8_t>(adam ? 1 : 0));
  if (adam) {
    detail::put(out, adam->t);
    detail::put_array(out, adam->m);
    detail::put_array(out, adam->v);
  }
  if (!out) throw io_error("checkpoint: short write to " + path.string());
}

template <class T = float>
NetworkState<T> load_state(const std::filesystem::path& path, const NetworkPlan& plan,
                           std::optional<AdamState>* adam = nullptr) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw io_error("checkpoint: cannot open " + path.string());

  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, detail::kCheckpointMagic, sizeof(magic)) != 0)
    throw validation_error("checkpoint: bad magic in " + path.string());
  const auto version = detail::get<std::uint32_t>(in, "version");
  if (version != detail::kCheckpointVersion)
    throw validation_error("checkpoint: unsupported version " + std::to_string(version));
  const auto hash = detail::get<std::uint64_t>(in, "spec hash");
  if (hash != plan.spec.hash())
    throw validation_error("checkpoint: spec hash mismatch (file written for a different network)");
  const auto d = detail::get<std::uint32_t>(in, "input_dim");
  const auto c = detail::get<std::uint32_t>(in, "n_classes");
  if (d != static_cast<std::uint32_t>(plan.spec.input_dim) ||
      c != static_cast<std::uint32_t>(plan.spec.n_classes))
    throw validation_error("checkpoint: dimension header mismatch");

  NetworkState<T> state;
  auto theta = detail::get_array<float>(in, "theta");
  state.theta.assign(theta.begin(), theta.end());
  state.running = detail::get_array<double>(in, "running stats");
  if (state.theta.size() != plan.theta_len || state.running.size() != plan.running_len)
    throw validation_error("checkpoint: parameter count mismatch with the plan");

  const auto flag = detail::get<std::uint8_t>(in, "adam flag");
  if (flag) {
    AdamState a;
    a.t = detail::get<std::int64_t>(in, "adam t");
    a.m = detail::get_array<double>(in, "adam m");
    a.v = detail::get_array<double>(in, "adam v");
    if (a.m.size() != plan.theta_len || a.v.size() != plan.theta_len)
      throw validation_error("checkpoint: optimizer state size mismatch");
    if (adam) *adam = std::move(a);
  } else if (adam) {
    adam->reset();
  }
  return state;
}

}  // namespace isonet
