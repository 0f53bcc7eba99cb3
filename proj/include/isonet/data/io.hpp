// io.hpp -- dataset directory serialization.
//
// A dataset directory holds three files:
//   mz_axis.f64   little-endian f64 array, length d
//   spectra.f32   little-endian f32 array, row-major, N x d
//   meta.jsonl    header record {class_names, d, N}, then one record per
//                 spectrum {spectrum_id, patient_id, core_id, tma_id, roi,
//                 label}; label is the class name string.
#pragma once

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "isonet/common.hpp"
#include "isonet/data/types.hpp"

namespace isonet {

namespace detail {

template <class T>
void write_binary(const std::filesystem::path& path, const std::vector<T>& values) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw io_error("cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(values.data()),
            static_cast<std::streamsize>(values.size() * sizeof(T)));
  if (!out) throw io_error("short write to " + path.string());
}

template <class T>
std::vector<T> read_binary(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary | std::ios::ate);
  if (!in) throw io_error("cannot open " + path.string());
  const auto bytes = static_cast<std::size_t>(in.tellg());
  if (bytes % sizeof(T) != 0)
    throw validation_error(path.string() + ": size " + std::to_string(bytes) +
                           " is not a multiple of the element size");
  std::vector<T> values(bytes / sizeof(T));
  in.seekg(0);
  in.read(reinterpret_cast<char*>(values.data()), static_cast<std::streamsize>(bytes));
  if (!in && bytes > 0) throw io_error("short read from " + path.string());
  return values;
}

}  // namespace detail

inline void save_dataset(const Dataset& ds, const std::filesystem::path& dir) {
  ds.validate();
  std::filesystem::create_directories(dir);
  detail::write_binary(dir / "mz_axis.f64", ds.axis.values);
  detail::write_binary(dir / "spectra.f32", ds.spectra.values);

  std::ofstream out(dir / "meta.jsonl");
  if (!out) throw io_error("cannot open " + (dir / "meta.jsonl").string() + " for writing");
  nlohmann::json header{{"class_names", ds.meta.class_names},
                        {"d", ds.spectra.d},
                        {"N", ds.spectra.n}};
  out << header.dump() << "\n";
  for (const auto& s : ds.meta.spectra) {
    nlohmann::json rec{{"spectrum_id", s.spectrum_id}, {"patient_id", s.patient_id},
                       {"core_id", s.core_id},         {"tma_id", s.tma_id},
                       {"roi", s.roi},                 {"label", ds.meta.class_names.at(s.label)}};
    out << rec.dump() << "\n";
  }
  if (!out) throw io_error("short write to " + (dir / "meta.jsonl").string());
}

inline Dataset load_dataset(const std::filesystem::path& dir) {
  for (const char* name : {"mz_axis.f64", "spectra.f32", "meta.jsonl"})
    if (!std::filesystem::exists(dir / name))
      throw io_error("dataset at " + dir.string() + " is missing " + name);

  Dataset ds;
  ds.axis.values = detail::read_binary<double>(dir / "mz_axis.f64");

  std::ifstream in(dir / "meta.jsonl");
  if (!in) throw io_error("cannot open " + (dir / "meta.jsonl").string());
  std::string line;
  if (!std::getline(in, line))
    throw validation_error("meta.jsonl: missing header record");
  nlohmann::json header;
  std::int64_t expect_n = 0;
  try {
    header = nlohmann::json::parse(line);
    ds.meta.class_names = header.at("class_names").get<std::vector<std::string>>();
    ds.spectra.d = header.at("d").get<std::int64_t>();
    expect_n = header.at("N").get<std::int64_t>();
  } catch (const nlohmann::json::exception& e) {
    throw validation_error(std::string("meta.jsonl: malformed header: ") + e.what());
  }

  while (std::getline(in, line)) {
    if (line.empty()) continue;
    SpectrumMeta s;
    try {
      auto rec = nlohmann::json::parse(line);
      s.spectrum_id = rec.at("spectrum_id").get<std::int64_t>();
      s.patient_id = rec.at("patient_id").get<std::string>();
      s.core_id = rec.at("core_id").get<std::string>();
      s.tma_id = rec.at("tma_id").get<std::string>();
      s.roi = rec.at("roi").get<bool>();
      const auto label = rec.at("label").get<std::string>();
      const auto it = std::find(ds.meta.class_names.begin(), ds.meta.class_names.end(), label);
      if (it == ds.meta.class_names.end())
        throw validation_error("meta.jsonl: spectrum " + std::to_string(s.spectrum_id) +
                               " has unknown label \"" + label + "\"");
      s.label = static_cast<int>(it - ds.meta.class_names.begin());
    } catch (const nlohmann::json::exception& e) {
      throw validation_error(std::string("meta.jsonl: malformed record: ") + e.what());
    }
    ds.meta.spectra.push_back(std::move(s));
  }

  ds.spectra.n = static_cast<std::int64_t>(ds.meta.spectra.size());
  if (ds.spectra.n != expect_n)
    throw validation_error("meta.jsonl: header declares N=" + std::to_string(expect_n) +
                           " but has " + std::to_string(ds.spectra.n) + " records");
  if (static_cast<std::int64_t>(ds.axis.size()) != ds.spectra.d)
    throw validation_error("mz_axis.f64 holds " + std::to_string(ds.axis.size()) +
                           " values, header declares d=" + std::to_string(ds.spectra.d));
  ds.spectra.values = detail::read_binary<float>(dir / "spectra.f32");
  if (ds.spectra.values.size() !=
      static_cast<std::size_t>(ds.spectra.n) * static_cast<std::size_t>(ds.spectra.d))
    throw validation_error("spectra.f32 holds " + std::to_string(ds.spectra.values.size()) +
                           " values, expected " + std::to_string(ds.spectra.n) + " x " +
                           std::to_string(ds.spectra.d));
  ds.validate();
  return ds;
}

}  // namespace isonet
