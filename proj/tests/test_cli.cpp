// End-to-end tests of the isonet binary: commands are run through the shell
// against temp directories and judged on exit codes, emitted files, and
// rerun determinism. Numeric correctness of what the commands compute is
// covered by the unit suites; this one tests the plumbing.
#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <catch2/catch_amalgamated.hpp>

#include "isonet/common.hpp"
#include "isonet/data/io.hpp"
#include "isonet/model/checkpoint.hpp"
#include "isonet/model/network.hpp"
#include "isonet/model/spec.hpp"

using namespace isonet;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() / ("isonet-cli-" + std::to_string(std::random_device{}()));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

int run(const std::string& args) {
  const std::string cmd = std::string(ISONET_CLI) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  REQUIRE(status != -1);
  REQUIRE(WIFEXITED(status));
  return WEXITSTATUS(status);
}

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  REQUIRE(out.good());
  out << text;
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path);
  REQUIRE(in.good());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

std::uint64_t file_digest(const fs::path& path) {
  const std::string bytes = slurp(path);
  return fnv1a(bytes.data(), bytes.size());
}

std::map<std::string, std::string> read_manifest(const fs::path& dir) {
  std::ifstream in(dir / "manifest.txt");
  REQUIRE(in.good());
  std::map<std::string, std::string> kv;
  std::string line;
  while (std::getline(in, line)) {
    const auto tab = line.find('\t');
    REQUIRE(tab != std::string::npos);
    kv[line.substr(0, tab)] = line.substr(tab + 1);
  }
  return kv;
}

std::string synth_config(const fs::path& out, std::uint64_t seed, const std::string& preset) {
  std::ostringstream s;
  s << "{ \"seed\": " << seed << ", \"out\": \"" << out.string()
    << "\", \"data\": { \"synth\": { \"preset\": \"" << preset << "\" } } }";
  return s.str();
}

// Small training recipe shared by the train/cv plumbing tests.
std::string train_block(int epochs) {
  std::ostringstream s;
  s << "\"model\": { \"arch\": \"isotopenet\", \"dropout\": 0.3 },"
    << "\"train\": { \"optimizer\": \"sgd\", \"learning_rate\": 0.2, \"weight_decay\": 0.01,"
    << " \"batch_size\": 64, \"epochs\": " << epochs << " }";
  return s.str();
}

int count_lines(const std::string& text) {
  int n = 0;
  for (char c : text)
    if (c == '\n') ++n;
  return n;
}

}  // namespace

TEST_CASE("synth is deterministic under the master seed") {
  TempDir tmp;
  write_file(tmp.path / "a.json", synth_config(tmp.path / "a", 41, "adsq"));
  write_file(tmp.path / "b.json", synth_config(tmp.path / "b", 41, "adsq"));
  REQUIRE(run("synth --config " + (tmp.path / "a.json").string()) == 0);
  REQUIRE(run("synth --config " + (tmp.path / "b.json").string()) == 0);

  for (const char* name : {"mz_axis.f64", "spectra.f32", "meta.jsonl"})
    CHECK(file_digest(tmp.path / "a" / "dataset" / name) ==
          file_digest(tmp.path / "b" / "dataset" / name));

  const auto manifest = read_manifest(tmp.path / "a");
  CHECK(manifest.at("command") == "synth");
  CHECK(manifest.at("version") == version);
  CHECK(manifest.at("seed") == "41");
  CHECK(manifest.count("config_digest") == 1);
  CHECK(manifest.count("digest:dataset") == 1);
  CHECK(fs::exists(tmp.path / "a" / "config.json"));
  CHECK(fs::exists(tmp.path / "a" / "markers.json"));

  // A different seed must change the data.
  write_file(tmp.path / "c.json", synth_config(tmp.path / "c", 99, "adsq"));
  REQUIRE(run("synth --config " + (tmp.path / "c.json").string()) == 0);
  CHECK(file_digest(tmp.path / "a" / "dataset" / "spectra.f32") !=
        file_digest(tmp.path / "c" / "dataset" / "spectra.f32"));
}

TEST_CASE("command-line flags override the config file") {
  TempDir tmp;
  write_file(tmp.path / "s.json", synth_config(tmp.path / "ignored", 41, "adsq"));
  REQUIRE(run("synth --config " + (tmp.path / "s.json").string() + " --seed 99 --out " +
              (tmp.path / "flagged").string() + " --threads 2") == 0);
  CHECK_FALSE(fs::exists(tmp.path / "ignored"));
  const auto manifest = read_manifest(tmp.path / "flagged");
  CHECK(manifest.at("seed") == "99");
  CHECK(manifest.at("threads") == "2");
}

TEST_CASE("lp preset couples the band target class to whole tissue micro arrays") {
  TempDir tmp;
  write_file(tmp.path / "s.json", synth_config(tmp.path / "lp", 7, "lp"));
  REQUIRE(run("synth --config " + (tmp.path / "s.json").string()) == 0);

  const auto ds = load_dataset(tmp.path / "lp" / "dataset");
  std::map<std::string, std::set<int>> tma_labels;
  for (const auto& s : ds.meta.spectra) tma_labels[s.tma_id].insert(s.label);
  REQUIRE(tma_labels.size() == 8);
  std::set<int> seen;
  for (const auto& [tma, labels] : tma_labels) {
    CHECK(labels.size() == 1);  // one class per TMA: band and class co-vary
    seen.insert(*labels.begin());
  }
  CHECK(seen == std::set<int>{0, 1});
}

TEST_CASE("train writes a loadable checkpoint, a full log, and the manifest") {
  TempDir tmp;
  write_file(tmp.path / "s.json", synth_config(tmp.path / "data", 41, "adsq"));
  REQUIRE(run("synth --config " + (tmp.path / "s.json").string()) == 0);

  std::ostringstream cfg;
  cfg << "{ \"seed\": 2024, \"out\": \"" << (tmp.path / "run").string()
      << "\", \"data\": { \"path\": \"" << (tmp.path / "data" / "dataset").string() << "\" },"
      << train_block(8) << " }";
  write_file(tmp.path / "t.json", cfg.str());
  REQUIRE(run("train --config " + (tmp.path / "t.json").string()) == 0);

  const std::string log = slurp(tmp.path / "run" / "train_log.tsv");
  CHECK(count_lines(log) == 1 + 8);  // header + one row per epoch
  CHECK(log.rfind("epoch\t", 0) == 0);

  const auto plan = plan_network(build_isotopenet(150, 2, 0.3));
  const auto state = load_state<float>((tmp.path / "run" / "checkpoint.bin").string(), plan);
  CHECK(state.total_params() == 1337);

  const auto manifest = read_manifest(tmp.path / "run");
  CHECK(manifest.at("command") == "train");
  CHECK(manifest.at("parameters") == "1337");
  CHECK(manifest.at("fold") == "-1");
  CHECK(manifest.count("train_ids_hash") == 1);

  // The effective config must replay to the identical digest.
  CHECK(manifest.at("config_digest") ==
        read_manifest(tmp.path / "run").at("config_digest"));
  CHECK_FALSE(slurp(tmp.path / "run" / "config.json").empty());
}

TEST_CASE("validation failures exit 2 and leave the output directory untouched") {
  TempDir tmp;
  const fs::path never = tmp.path / "never";

  std::ostringstream missing;
  missing << "{ \"seed\": 1, \"out\": \"" << never.string()
          << "\", \"data\": { \"path\": \"" << (tmp.path / "nonexistent").string() << "\" } }";
  write_file(tmp.path / "m.json", missing.str());
  CHECK(run("train --config " + (tmp.path / "m.json").string()) == 2);
  CHECK_FALSE(fs::exists(never));

  // Config parse garbage is a validation problem, not an I/O one.
  write_file(tmp.path / "g.json", "{ not json");
  CHECK(run("cv --config " + (tmp.path / "g.json").string()) == 2);

  // Missing mandatory keys.
  write_file(tmp.path / "k.json", "{ \"out\": \"x\" }");
  CHECK(run("eval --config " + (tmp.path / "k.json").string()) == 2);

  CHECK(run("train --config " + (tmp.path / "absent.json").string()) == 2);
  CHECK(run("train") == 2);  // no --config at all
}

TEST_CASE("broken dataset directories exit 4") {
  TempDir tmp;
  fs::create_directories(tmp.path / "hollow");
  std::ostringstream cfg;
  cfg << "{ \"seed\": 1, \"out\": \"" << (tmp.path / "never").string()
      << "\", \"data\": { \"path\": \"" << (tmp.path / "hollow").string() << "\" } }";
  write_file(tmp.path / "h.json", cfg.str());
  CHECK(run("baseline --config " + (tmp.path / "h.json").string()) == 4);
  CHECK_FALSE(fs::exists(tmp.path / "never"));
}

TEST_CASE("sensitivity rejects an out-of-range class before writing anything") {
  TempDir tmp;
  write_file(tmp.path / "s.json", synth_config(tmp.path / "data", 41, "adsq"));
  REQUIRE(run("synth --config " + (tmp.path / "s.json").string()) == 0);

  std::ostringstream train_cfg;
  train_cfg << "{ \"seed\": 2024, \"out\": \"" << (tmp.path / "run").string()
            << "\", \"data\": { \"path\": \"" << (tmp.path / "data" / "dataset").string()
            << "\" }," << train_block(4) << " }";
  write_file(tmp.path / "t.json", train_cfg.str());
  REQUIRE(run("train --config " + (tmp.path / "t.json").string()) == 0);

  std::ostringstream bad;
  bad << "{ \"seed\": 1, \"out\": \"" << (tmp.path / "never").string()
      << "\", \"data\": { \"path\": \"" << (tmp.path / "data" / "dataset").string() << "\" },"
      << "\"model\": { \"arch\": \"isotopenet\" },"
      << "\"sensitivity\": { \"class\": 7, \"checkpoint\": \""
      << (tmp.path / "run" / "checkpoint.bin").string() << "\" } }";
  write_file(tmp.path / "b.json", bad.str());
  CHECK(run("sensitivity --config " + (tmp.path / "b.json").string()) == 2);
  CHECK_FALSE(fs::exists(tmp.path / "never"));

  // And the valid class writes a map with one row per bin plus peak header.
  std::ostringstream good;
  good << "{ \"seed\": 1, \"out\": \"" << (tmp.path / "sens").string()
       << "\", \"data\": { \"path\": \"" << (tmp.path / "data" / "dataset").string() << "\" },"
       << "\"model\": { \"arch\": \"isotopenet\" },"
       << "\"sensitivity\": { \"class\": 0, \"checkpoint\": \""
       << (tmp.path / "run" / "checkpoint.bin").string() << "\" } }";
  write_file(tmp.path / "g.json", good.str());
  REQUIRE(run("sensitivity --config " + (tmp.path / "g.json").string()) == 0);
  const std::string map = slurp(tmp.path / "sens" / "sensitivity_map.tsv");
  CHECK(count_lines(map) == 2 + 10 + 150);  // two headers, ten peaks, one row per bin
}

TEST_CASE("cv reruns bit-identically under the same master seed") {
  TempDir tmp;
  write_file(tmp.path / "s.json", synth_config(tmp.path / "data", 41, "adsq"));
  REQUIRE(run("synth --config " + (tmp.path / "s.json").string()) == 0);

  auto cv_config = [&](const fs::path& out) {
    std::ostringstream cfg;
    cfg << "{ \"seed\": 3000, \"out\": \"" << out.string()
        << "\", \"data\": { \"path\": \"" << (tmp.path / "data" / "dataset").string() << "\" },"
        << train_block(6)
        << ", \"eval\": { \"method\": \"isotopenet\", \"n_folds\": 2, \"n_runs\": 1,"
        << " \"fold_seed\": 7 } }";
    return cfg.str();
  };
  write_file(tmp.path / "cv1.json", cv_config(tmp.path / "cv1"));
  write_file(tmp.path / "cv2.json", cv_config(tmp.path / "cv2"));
  REQUIRE(run("cv --config " + (tmp.path / "cv1.json").string()) == 0);
  REQUIRE(run("cv --config " + (tmp.path / "cv2.json").string()) == 0);

  CHECK(slurp(tmp.path / "cv1" / "cv_report.tsv") == slurp(tmp.path / "cv2" / "cv_report.tsv"));
  CHECK(read_manifest(tmp.path / "cv1").at("train_ids_hash_chain") ==
        read_manifest(tmp.path / "cv2").at("train_ids_hash_chain"));
  const std::string report = slurp(tmp.path / "cv1" / "cv_report.tsv");
  CHECK(count_lines(report) == 1 + 1 * 2 * 2);  // header + runs x folds x levels
}

TEST_CASE("eval reports spot and core accuracy from a checkpoint") {
  TempDir tmp;
  write_file(tmp.path / "s.json", synth_config(tmp.path / "data", 41, "adsq"));
  REQUIRE(run("synth --config " + (tmp.path / "s.json").string()) == 0);

  std::ostringstream train_cfg;
  train_cfg << "{ \"seed\": 2024, \"out\": \"" << (tmp.path / "run").string()
            << "\", \"data\": { \"path\": \"" << (tmp.path / "data" / "dataset").string()
            << "\" }," << train_block(50) << " }";
  write_file(tmp.path / "t.json", train_cfg.str());
  REQUIRE(run("train --config " + (tmp.path / "t.json").string()) == 0);

  std::ostringstream eval_cfg;
  eval_cfg << "{ \"seed\": 2024, \"out\": \"" << (tmp.path / "ev").string()
           << "\", \"data\": { \"path\": \"" << (tmp.path / "data" / "dataset").string()
           << "\" }, \"model\": { \"arch\": \"isotopenet\" },"
           << "\"eval\": { \"checkpoint\": \"" << (tmp.path / "run" / "checkpoint.bin").string()
           << "\" } }";
  write_file(tmp.path / "e.json", eval_cfg.str());
  REQUIRE(run("eval --config " + (tmp.path / "e.json").string()) == 0);

  const std::string report = slurp(tmp.path / "ev" / "eval_report.tsv");
  CHECK(report.find("spot_balanced_accuracy") != std::string::npos);
  CHECK(report.find("core_balanced_accuracy") != std::string::npos);
  // The canonical recipe separates this cohort; the report must say so.
  std::istringstream in(report);
  std::string line;
  double spot = -1.0;
  while (std::getline(in, line))
    if (line.rfind("spot_balanced_accuracy\t", 0) == 0)
      spot = std::stod(line.substr(line.find('\t') + 1));
  CHECK(spot >= 0.95);
}

TEST_CASE("baseline emits the per fold per K table") {
  TempDir tmp;
  write_file(tmp.path / "s.json", synth_config(tmp.path / "data", 41, "adsq"));
  REQUIRE(run("synth --config " + (tmp.path / "s.json").string()) == 0);

  std::ostringstream cfg;
  cfg << "{ \"seed\": 5, \"out\": \"" << (tmp.path / "base").string()
      << "\", \"data\": { \"path\": \"" << (tmp.path / "data" / "dataset").string() << "\" },"
      << "\"baseline\": { \"k_grid\": [5, 10], \"shrinkage\": 0.1 },"
      << "\"eval\": { \"n_folds\": 4, \"fold_seed\": 7 } }";
  write_file(tmp.path / "b.json", cfg.str());
  REQUIRE(run("baseline --config " + (tmp.path / "b.json").string()) == 0);

  const std::string report = slurp(tmp.path / "base" / "baseline_report.tsv");
  CHECK(report.rfind("fold\tK\tlevel\tbalanced_accuracy", 0) == 0);
  CHECK(count_lines(report) == 1 + 4 * 2 * 2);  // header + folds x K x levels
  CHECK(fs::exists(tmp.path / "base" / "baseline_summary.txt"));
}
