// isonet -- command-line front end: dataset synthesis/ingestion, training,
// cross-validation, the ROC/LDA baseline, sensitivity export, and checkpoint
// evaluation. A JSON config file supplies the settings; --seed, --threads,
// and --out override the file. Outputs land under the output directory with
// an effective config copy and a manifest for exact re-execution.
//
// Exit codes: 0 success, 2 config/validation error, 3 numeric failure,
// 4 I/O failure.
#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "isonet/baseline/pipeline.hpp"
#include "isonet/common.hpp"
#include "isonet/data/folds.hpp"
#include "isonet/data/io.hpp"
#include "isonet/data/normalize.hpp"
#include "isonet/data/synth.hpp"
#include "isonet/eval/cross_validate.hpp"
#include "isonet/eval/leakage.hpp"
#include "isonet/eval/metrics.hpp"
#include "isonet/model/checkpoint.hpp"
#include "isonet/model/network.hpp"
#include "isonet/model/spec.hpp"
#include "isonet/sensitivity.hpp"
#include "isonet/train/trainer.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace isonet;

namespace {

struct GlobalFlags {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<int> threads;
  std::optional<std::string> out;
};

std::string hex64(std::uint64_t v) {
  std::ostringstream s;
  s << "0x" << std::hex << std::setw(16) << std::setfill('0') << v;
  return s.str();
}

json load_config(const GlobalFlags& flags) {
  if (!fs::exists(flags.config_path))
    throw validation_error("config file " + flags.config_path + " does not exist");
  std::ifstream in(flags.config_path);
  if (!in) throw io_error("cannot open config file " + flags.config_path);
  json cfg;
  try {
    cfg = json::parse(in);
  } catch (const json::exception& e) {
    throw validation_error(std::string("config parse error: ") + e.what());
  }
  if (!cfg.is_object()) throw validation_error("config: top level must be an object");
  // Flags beat file values.
  if (flags.seed) cfg["seed"] = *flags.seed;
  if (flags.threads) cfg["threads"] = *flags.threads;
  if (flags.out) cfg["out"] = *flags.out;

  if (!cfg.contains("seed") || !cfg["seed"].is_number())
    throw validation_error("config: a master seed is mandatory (file key \"seed\" or --seed)");
  if (cfg.value("threads", 1) < 1) throw validation_error("config: threads must be >= 1");
  if (cfg.value("out", std::string()).empty())
    throw validation_error("config: an output directory is mandatory (key \"out\" or --out)");
  return cfg;
}

std::uint64_t master_seed(const json& cfg) { return cfg["seed"].get<std::uint64_t>(); }
fs::path out_dir(const json& cfg) { return fs::path(cfg["out"].get<std::string>()); }

// ---------------------------------------------------------------- sections

SynthSpec synth_spec_from(const json& s, std::uint64_t seed, int* tmas, int* cores, int* spots) {
  SynthSpec sp;
  *tmas = 8;
  *cores = 5;
  *spots = 10;
  const std::string preset = s.value("preset", std::string("adsq"));
  bool lp_band = false;
  if (preset == "adsq") {
    sp.markers = {{SynthMarker{55, 3, 1.0f, +1}}, {SynthMarker{70, 3, 1.0f, +1}}};
    sp.peak_width_bins = 1;
    sp.noise_sigma = 0.01f;
    sp.baseline_amp = 0.5f;
  } else if (preset == "lp") {
    // Class signal carried only by a per-TMA band bias aligned with the
    // class. The band is mass compensated: TIC normalization turns any
    // one-sided additive band into a global rescale, so this is the shape
    // such a confounder keeps in the network's input space.
    sp.markers = {{}, {}};
    sp.labels_per_tma = true;
    sp.noise_sigma = 0.01f;
    sp.baseline_amp = 0.5f;
    lp_band = true;
  } else if (preset != "custom") {
    throw validation_error("synth: unknown preset \"" + preset + "\" (adsq | lp | custom)");
  }
  if (preset == "custom") sp.markers.assign(2, {});

  sp.d = s.value("d", sp.d);
  sp.classes = s.value("classes", sp.classes);
  sp.noise_sigma = s.value("noise_sigma", sp.noise_sigma);
  sp.baseline_amp = s.value("baseline_amp", sp.baseline_amp);
  sp.peak_width_bins = s.value("peak_width_bins", sp.peak_width_bins);
  sp.mz_start = s.value("mz_start", sp.mz_start);
  sp.da_per_bin = s.value("da_per_bin", sp.da_per_bin);
  sp.labels_per_tma = s.value("labels_per_tma", sp.labels_per_tma);
  if (s.contains("class_names"))
    sp.class_names = s["class_names"].get<std::vector<std::string>>();
  *tmas = s.value("tmas", *tmas);
  *cores = s.value("cores_per_tma", *cores);
  *spots = s.value("spots_per_core", *spots);

  if (s.contains("markers")) {
    sp.markers.clear();
    for (const auto& per_class : s["markers"]) {
      std::vector<SynthMarker> list;
      for (const auto& m : per_class)
        list.push_back(SynthMarker{m.value("center_bin", 0), m.value("envelope_len", 3),
                                   m.value("amplitude", 1.0f), m.value("sign", +1)});
      sp.markers.push_back(std::move(list));
    }
  }
  if (s.contains("confounders")) {
    for (const auto& c : s["confounders"])
      sp.confounders.push_back(SynthConfounder{c.value("lo_bin", 0), c.value("hi_bin", 0),
                                               c.value("amplitude", 0.0f),
                                               c.value("target_class", 1)});
  } else if (lp_band) {
    const int lo = s.value("band_lo", 100), hi = s.value("band_hi", 120);
    if (lo < 1 || hi >= sp.d - 1 || lo > hi)
      throw validation_error("synth: lp band must sit strictly inside the axis");
    const float amp = s.value("band_amplitude", 0.3f);
    const float comp = amp * (hi - lo + 1) / (sp.d - (hi - lo + 1));
    sp.confounders = {SynthConfounder{lo, hi, amp, 1}, SynthConfounder{0, lo - 1, -comp, 1},
                      SynthConfounder{hi + 1, sp.d - 1, -comp, 1}};
  }
  if (!s.contains("markers") && static_cast<int>(sp.markers.size()) != sp.classes)
    sp.markers.resize(sp.classes);
  sp.seed = seed;
  return sp;
}

TrainConfig train_config_from(const json& t, std::uint64_t seed) {
  TrainConfig cfg;
  const std::string preset = t.value("preset", std::string());
  if (preset == "adsq")
    cfg = adsq_preset();
  else if (preset == "lp")
    cfg = lp_preset();
  else if (!preset.empty())
    throw validation_error("train: unknown preset \"" + preset + "\" (adsq | lp)");

  if (t.contains("optimizer")) {
    const auto name = t["optimizer"].get<std::string>();
    if (name == "sgd")
      cfg.optimizer = Optimizer::sgd;
    else if (name == "adam")
      cfg.optimizer = Optimizer::adam;
    else
      throw validation_error("train: unknown optimizer \"" + name + "\" (sgd | adam)");
  }
  cfg.learning_rate = t.value("learning_rate", cfg.learning_rate);
  cfg.weight_decay = t.value("weight_decay", cfg.weight_decay);
  cfg.batch_size = t.value("batch_size", cfg.batch_size);
  cfg.epochs = t.value("epochs", cfg.epochs);
  cfg.dropout_rate = t.value("dropout_rate", cfg.dropout_rate);
  cfg.beta1 = t.value("beta1", cfg.beta1);
  cfg.beta2 = t.value("beta2", cfg.beta2);
  cfg.epsilon = t.value("epsilon", cfg.epsilon);
  cfg.strict_decay = t.value("strict_decay", cfg.strict_decay);
  cfg.seed = mix_seed(seed, {fnv1a("train")});
  cfg.validate();
  return cfg;
}

NetworkSpec model_spec_from(const json& m, int d, int n_classes, double dropout_rate) {
  const std::string arch = m.value("arch", std::string("isotopenet"));
  if (arch == "isotopenet") return build_isotopenet(d, n_classes, m.value("dropout", dropout_rate));
  if (arch == "residualnet") {
    std::vector<ResidualDesc> schedule;
    if (m.contains("schedule")) {
      for (const auto& row : m["schedule"]) {
        if (!row.is_array() || row.size() != 4)
          throw validation_error("model: schedule rows are [depth, kernel, stride, channels]");
        schedule.push_back(ResidualDesc{row[0].get<int>(), row[1].get<int>(), row[2].get<int>(),
                                        row[3].get<int>()});
      }
    } else {
      schedule = default_residualnet_schedule();
    }
    return build_residualnet(schedule, d, n_classes);
  }
  throw validation_error("model: unknown arch \"" + arch + "\" (isotopenet | residualnet)");
}

// ------------------------------------------------------------------ inputs

Dataset load_input(const json& cfg, std::uint64_t seed) {
  const json data = cfg.value("data", json::object());
  if (data.contains("path")) {
    const fs::path path = data["path"].get<std::string>();
    if (!fs::exists(path))
      throw validation_error("data: dataset path " + path.string() + " does not exist");
    return load_dataset(path);
  }
  if (data.contains("synth")) {
    int tmas = 0, cores = 0, spots = 0;
    const auto sp = synth_spec_from(data["synth"], seed, &tmas, &cores, &spots);
    return synth_cohort(sp, tmas, cores, spots).dataset;
  }
  throw validation_error("config: the data section needs a \"path\" or a \"synth\" spec");
}

fs::path checkpoint_path_from(const json& section, const char* command) {
  if (!section.contains("checkpoint"))
    throw validation_error(std::string(command) + ": config needs a checkpoint path");
  const fs::path path = section["checkpoint"].get<std::string>();
  if (!fs::exists(path))
    throw validation_error(std::string(command) + ": checkpoint " + path.string() +
                           " does not exist");
  return path;
}

// ----------------------------------------------------------------- outputs

std::uint64_t file_digest(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw io_error("cannot open " + path.string() + " for digest");
  std::ostringstream buf;
  buf << in.rdbuf();
  const std::string bytes = buf.str();
  return fnv1a(bytes.data(), bytes.size());
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw io_error("cannot open " + path.string() + " for writing");
  out << text;
  if (!out) throw io_error("short write to " + path.string());
}

// Writes the effective config and the manifest; every other artifact of the
// command must already be listed in `extra`.
void write_manifest(const json& cfg, const std::string& command,
                    const std::vector<std::pair<std::string, std::string>>& extra) {
  const fs::path dir = out_dir(cfg);
  fs::create_directories(dir);
  write_text(dir / "config.json", cfg.dump(2) + "\n");
  std::ostringstream m;
  m << "command\t" << command << '\n';
  m << "version\t" << version << '\n';
  m << "config_digest\t" << hex64(fnv1a(cfg.dump())) << '\n';
  m << "seed\t" << master_seed(cfg) << '\n';
  m << "threads\t" << cfg.value("threads", 1) << '\n';
  for (const auto& [key, value] : extra) m << key << '\t' << value << '\n';
  write_text(dir / "manifest.txt", m.str());
}

std::vector<std::size_t> all_rows(const Dataset& ds) {
  std::vector<std::size_t> rows(static_cast<std::size_t>(ds.spectra.n));
  for (std::size_t i = 0; i < rows.size(); ++i) rows[i] = i;
  return rows;
}

std::vector<int> labels_for(const Dataset& ds, const std::vector<std::size_t>& rows) {
  std::vector<int> labels;
  labels.reserve(rows.size());
  for (std::size_t r : rows) labels.push_back(ds.meta.spectra[r].label);
  return labels;
}

std::vector<std::span<const float>> spans_for(const Dataset& ds,
                                              const std::vector<std::size_t>& rows) {
  std::vector<std::span<const float>> spans;
  spans.reserve(rows.size());
  for (std::size_t r : rows) spans.push_back(ds.spectra.row(static_cast<std::int64_t>(r)));
  return spans;
}

std::uint64_t ids_hash(const Dataset& ds, const std::vector<std::size_t>& rows) {
  TouchRecorder rec;
  for (std::size_t r : rows) rec.touch(ds.meta.spectra[r].spectrum_id);
  return rec.hash();
}

std::vector<int> predict_rows(const NetworkPlan& plan, NetworkState<float>& state,
                              const Dataset& ds, const std::vector<std::size_t>& rows) {
  std::vector<int> preds;
  preds.reserve(rows.size());
  const std::size_t chunk = 256;
  const auto C = static_cast<std::size_t>(plan.spec.n_classes);
  for (std::size_t off = 0; off < rows.size(); off += chunk) {
    const std::size_t end = std::min(off + chunk, rows.size());
    std::vector<std::span<const float>> batch;
    for (std::size_t i = off; i < end; ++i)
      batch.push_back(ds.spectra.row(static_cast<std::int64_t>(rows[i])));
    const auto probs = forward_batch(plan, state, batch, Mode::infer);
    for (std::size_t b = 0; b < batch.size(); ++b) {
      std::size_t best = 0;
      for (std::size_t c = 1; c < C; ++c)
        if (probs[b * C + c] > probs[b * C + best]) best = c;
      preds.push_back(static_cast<int>(best));
    }
  }
  return preds;
}

FoldPlan fold_plan_from(const json& cfg, const Dataset& ds) {
  const json e = cfg.value("eval", json::object());
  return make_fold_plan(ds.meta, e.value("n_folds", 4), e.value("fold_seed", 7ULL));
}

// --------------------------------------------------------------- commands

int cmd_synth(const json& cfg) {
  const json data = cfg.value("data", json::object());
  if (!data.contains("synth"))
    throw validation_error("synth: config needs data.synth");
  int tmas = 0, cores = 0, spots = 0;
  const auto sp = synth_spec_from(data["synth"], master_seed(cfg), &tmas, &cores, &spots);
  const auto result = synth_cohort(sp, tmas, cores, spots);

  const fs::path dir = out_dir(cfg);
  fs::create_directories(dir);
  const fs::path dataset_dir = dir / "dataset";
  save_dataset(result.dataset, dataset_dir);
  const json truth{{"class_names", result.dataset.meta.class_names},
                   {"marker_bins", result.marker_bins}};
  write_text(dir / "markers.json", truth.dump(2) + "\n");

  std::vector<std::pair<std::string, std::string>> extra;
  std::uint64_t combined = 0;
  for (const char* name : {"mz_axis.f64", "spectra.f32", "meta.jsonl"}) {
    const auto digest = file_digest(dataset_dir / name);
    combined = fnv1a(&digest, sizeof(digest), combined);
    extra.emplace_back(std::string("digest:") + name, hex64(digest));
  }
  extra.emplace_back("digest:dataset", hex64(combined));
  extra.emplace_back("spectra", std::to_string(result.dataset.spectra.n));
  write_manifest(cfg, "synth", extra);
  std::cout << "wrote dataset (" << result.dataset.spectra.n << " spectra) to "
            << dataset_dir.string() << "\n"
            << "dataset digest " << hex64(combined) << "\n";
  return 0;
}

int cmd_train(const json& cfg) {
  const auto seed = master_seed(cfg);
  auto ds = load_input(cfg, seed);
  tic_normalize(ds.spectra);

  const json e = cfg.value("eval", json::object());
  const int fold = e.value("fold", -1);
  std::vector<std::size_t> train_rows, test_rows;
  if (fold >= 0) {
    const auto plan = fold_plan_from(cfg, ds);
    if (fold >= plan.n_folds())
      throw validation_error("train: fold " + std::to_string(fold) + " out of range");
    train_rows = rows_for_tmas(ds.meta, plan.train_tmas(fold));
    test_rows = rows_for_tmas(ds.meta, plan.test_tmas[static_cast<std::size_t>(fold)]);
  } else {
    train_rows = all_rows(ds);
  }

  const auto tc = train_config_from(cfg.value("train", json::object()), seed);
  const auto n_classes = static_cast<int>(ds.meta.class_names.size());
  const auto spec = model_spec_from(cfg.value("model", json::object()),
                                    static_cast<int>(ds.spectra.d), n_classes, tc.dropout_rate);
  const auto plan = plan_network(spec);
  auto state = init_state<float>(plan, mix_seed(seed, {fnv1a("init")}));

  const auto rows = spans_for(ds, train_rows);
  const auto labels = labels_for(ds, train_rows);
  const auto val_rows = spans_for(ds, test_rows);
  const auto val_labels = labels_for(ds, test_rows);

  AdamState adam;
  AdamState* adam_ptr = tc.optimizer == Optimizer::adam ? &adam : nullptr;
  const auto log =
      test_rows.empty()
          ? train(plan, state, rows, labels, tc, adam_ptr)
          : train(plan, state, rows, labels, tc, adam_ptr, 0, &val_rows,
                  std::span<const int>(val_labels));
  const auto score = evaluate(plan, state, rows, labels);

  const fs::path dir = out_dir(cfg);
  fs::create_directories(dir);
  save_state((dir / "checkpoint.bin").string(), plan, state, adam_ptr);
  write_text(dir / "train_log.tsv", log.to_table());

  std::vector<std::pair<std::string, std::string>> extra;
  extra.emplace_back("fold", std::to_string(fold));
  extra.emplace_back("train_ids_hash", hex64(ids_hash(ds, train_rows)));
  extra.emplace_back("parameters", std::to_string(state.total_params()));
  std::ostringstream acc;
  acc << std::setprecision(17) << score.bal_acc;
  extra.emplace_back("train_balanced_accuracy", acc.str());
  if (!test_rows.empty()) {
    const auto held = evaluate(plan, state, val_rows, val_labels);
    std::ostringstream v;
    v << std::setprecision(17) << held.bal_acc;
    extra.emplace_back("test_balanced_accuracy", v.str());
  }
  write_manifest(cfg, "train", extra);
  std::cout << "trained " << state.total_params() << " parameters for " << tc.epochs
            << " epochs; train balanced accuracy " << score.bal_acc << "\n"
            << "checkpoint " << (dir / "checkpoint.bin").string() << "\n";
  return 0;
}

int cmd_cv(const json& cfg) {
  const auto seed = master_seed(cfg);
  auto ds = load_input(cfg, seed);
  tic_normalize(ds.spectra);
  const auto plan = fold_plan_from(cfg, ds);
  const json e = cfg.value("eval", json::object());
  const int n_runs = e.value("n_runs", 4);
  const std::string method = e.value("method", std::string("isotopenet"));

  const fs::path dir = out_dir(cfg);
  std::vector<std::pair<std::string, std::string>> extra;
  extra.emplace_back("method", method);

  if (method == "roc_lda") {
    const json b = cfg.value("baseline", json::object());
    const auto k_grid = b.value("k_grid", std::vector<int>{5, 10, 20, 50, 100});
    const auto report = roc_lda_pipeline(ds, plan, k_grid, b.value("shrinkage", 0.1));
    fs::create_directories(dir);
    write_text(dir / "cv_report.tsv", report.to_table());
    std::ostringstream s;
    s << std::setprecision(6) << "roc/lda over " << plan.n_folds() << " folds\n"
      << "spot worst " << report.worst_spot << " best " << report.best_spot << '\n'
      << "core worst " << report.worst_core << " best " << report.best_core << '\n'
      << "tied core votes: " << report.core_ties << '\n';
    write_text(dir / "cv_summary.txt", s.str());
    std::ostringstream best;
    best << std::setprecision(17) << report.best_spot;
    extra.emplace_back("best_spot", best.str());
    write_manifest(cfg, "cv", extra);
    std::cout << s.str();
    return 0;
  }
  if (method != "isotopenet" && method != "residualnet")
    throw validation_error("cv: unknown method \"" + method +
                           "\" (isotopenet | residualnet | roc_lda)");

  const auto tc = train_config_from(cfg.value("train", json::object()), seed);
  json model_section = cfg.value("model", json::object());
  if (!model_section.contains("arch")) model_section["arch"] = method;
  const auto n_classes = static_cast<int>(ds.meta.class_names.size());
  const auto net_spec = model_spec_from(model_section, static_cast<int>(ds.spectra.d),
                                        n_classes, tc.dropout_rate);
  const auto net_plan = plan_network(net_spec);

  FoldTrainer trainer = [&](const Dataset& data, const std::vector<std::size_t>& train_rows,
                            std::uint64_t fold_seed, TouchRecorder& rec) -> Predictor {
    auto state = std::make_shared<NetworkState<float>>(
        init_state<float>(net_plan, mix_seed(fold_seed, {fnv1a("init")})));
    auto fold_tc = tc;
    fold_tc.seed = mix_seed(fold_seed, {fnv1a("train")});
    std::vector<std::span<const float>> rows;
    std::vector<int> labels;
    for (std::size_t r : train_rows) {
      rec.touch(data.meta.spectra[r].spectrum_id);
      rows.push_back(data.spectra.row(static_cast<std::int64_t>(r)));
      labels.push_back(data.meta.spectra[r].label);
    }
    train(net_plan, *state, rows, labels, fold_tc);
    return [state, &net_plan](const Dataset& d2, const std::vector<std::size_t>& rows2) {
      return predict_rows(net_plan, *state, d2, rows2);
    };
  };

  const auto report = cross_validate(ds, plan, trainer, n_runs, seed);
  fs::create_directories(dir);
  write_text(dir / "cv_report.tsv", report.to_table());
  write_text(dir / "cv_summary.txt", report.summary());

  std::ostringstream med;
  med << std::setprecision(17) << report.spot_median;
  extra.emplace_back("spot_median", med.str());
  std::ostringstream cmed;
  cmed << std::setprecision(17) << report.core_median;
  extra.emplace_back("core_median", cmed.str());
  std::uint64_t chain = 0;
  for (std::uint64_t h : report.train_hashes) chain = fnv1a(&h, sizeof(h), chain);
  extra.emplace_back("train_ids_hash_chain", hex64(chain));
  write_manifest(cfg, "cv", extra);
  std::cout << report.summary();
  return 0;
}

int cmd_baseline(const json& cfg) {
  const auto seed = master_seed(cfg);
  auto ds = load_input(cfg, seed);
  tic_normalize(ds.spectra);
  const auto plan = fold_plan_from(cfg, ds);
  const json b = cfg.value("baseline", json::object());
  const auto k_grid = b.value("k_grid", std::vector<int>{5, 10, 20, 50, 100});
  const auto report = roc_lda_pipeline(ds, plan, k_grid, b.value("shrinkage", 0.1));

  const fs::path dir = out_dir(cfg);
  fs::create_directories(dir);
  write_text(dir / "baseline_report.tsv", report.to_table());
  std::ostringstream s;
  s << std::setprecision(6) << "roc/lda over " << plan.n_folds() << " folds, K grid";
  for (int k : k_grid) s << ' ' << k;
  s << "\nspot worst " << report.worst_spot << " best " << report.best_spot << '\n'
    << "core worst " << report.worst_core << " best " << report.best_core << '\n'
    << "tied core votes: " << report.core_ties << '\n';
  write_text(dir / "baseline_summary.txt", s.str());

  std::vector<std::pair<std::string, std::string>> extra;
  std::ostringstream best;
  best << std::setprecision(17) << report.best_spot;
  extra.emplace_back("best_spot", best.str());
  std::uint64_t chain = 0;
  for (std::uint64_t h : report.fold_train_hashes) chain = fnv1a(&h, sizeof(h), chain);
  extra.emplace_back("train_ids_hash_chain", hex64(chain));
  write_manifest(cfg, "baseline", extra);
  std::cout << s.str();
  return 0;
}

int cmd_sensitivity(const json& cfg) {
  const auto seed = master_seed(cfg);
  auto ds = load_input(cfg, seed);
  tic_normalize(ds.spectra);
  const json s = cfg.value("sensitivity", json::object());
  const int cls = s.value("class", 0);
  const auto n_classes = static_cast<int>(ds.meta.class_names.size());
  if (cls < 0 || cls >= n_classes)
    throw validation_error("sensitivity: class " + std::to_string(cls) + " out of range [0, " +
                           std::to_string(n_classes) + ")");

  const int fold = s.value("fold", -1);
  std::vector<std::size_t> rows_idx;
  std::vector<std::int64_t> test_ids;
  if (fold >= 0) {
    const auto plan = fold_plan_from(cfg, ds);
    if (fold >= plan.n_folds())
      throw validation_error("sensitivity: fold " + std::to_string(fold) + " out of range");
    rows_idx = rows_for_tmas(ds.meta, plan.train_tmas(fold));
    for (std::size_t r : rows_for_tmas(ds.meta, plan.test_tmas[static_cast<std::size_t>(fold)]))
      test_ids.push_back(ds.meta.spectra[r].spectrum_id);
  } else {
    rows_idx = all_rows(ds);
  }

  const auto checkpoint = checkpoint_path_from(s, "sensitivity");
  const auto tc_dropout = cfg.value("train", json::object()).value("dropout_rate", 0.3);
  const auto spec = model_spec_from(cfg.value("model", json::object()),
                                    static_cast<int>(ds.spectra.d), n_classes, tc_dropout);
  const auto plan = plan_network(spec);
  auto state = load_state<float>(checkpoint.string(), plan);

  // Leakage audit: sigma and the mean must only read the fold's train side.
  TouchRecorder rec;
  for (std::size_t r : rows_idx) rec.touch(ds.meta.spectra[r].spectrum_id);
  if (!rec.disjoint(test_ids))
    throw validation_error("sensitivity: leakage audit failed (sigma set touches test ids)");

  const auto map = mean_sensitivity(plan, state, spans_for(ds, rows_idx), cls);

  const fs::path dir = out_dir(cfg);
  fs::create_directories(dir);
  const auto name = s.value("output", std::string("sensitivity_map.tsv"));
  export_map(map, ds.axis, (dir / name).string(), s.value("top_n", 10));

  std::vector<std::pair<std::string, std::string>> extra;
  extra.emplace_back("class", std::to_string(cls));
  extra.emplace_back("fold", std::to_string(fold));
  extra.emplace_back("sigma_ids_hash", hex64(rec.hash()));
  extra.emplace_back("map", name);
  write_manifest(cfg, "sensitivity", extra);
  std::cout << "wrote sensitivity map for class " << cls << " (" << map.n_samples
            << " spectra) to " << (dir / name).string() << "\n";
  return 0;
}

int cmd_eval(const json& cfg) {
  const auto seed = master_seed(cfg);
  auto ds = load_input(cfg, seed);
  tic_normalize(ds.spectra);
  const json e = cfg.value("eval", json::object());
  const int fold = e.value("fold", -1);
  std::vector<std::size_t> rows_idx;
  if (fold >= 0) {
    const auto plan = fold_plan_from(cfg, ds);
    if (fold >= plan.n_folds())
      throw validation_error("eval: fold " + std::to_string(fold) + " out of range");
    rows_idx = rows_for_tmas(ds.meta, plan.test_tmas[static_cast<std::size_t>(fold)]);
  } else {
    rows_idx = all_rows(ds);
  }

  const auto checkpoint = checkpoint_path_from(e, "eval");
  const auto n_classes = static_cast<int>(ds.meta.class_names.size());
  const auto tc_dropout = cfg.value("train", json::object()).value("dropout_rate", 0.3);
  const auto spec = model_spec_from(cfg.value("model", json::object()),
                                    static_cast<int>(ds.spectra.d), n_classes, tc_dropout);
  const auto net_plan = plan_network(spec);
  auto state = load_state<float>(checkpoint.string(), net_plan);

  Predictor predictor = [&](const Dataset& d2, const std::vector<std::size_t>& rows2) {
    return predict_rows(net_plan, state, d2, rows2);
  };
  const auto ev = evaluate_fold(predictor, ds, rows_idx, n_classes);
  const auto score = evaluate(net_plan, state, spans_for(ds, rows_idx), labels_for(ds, rows_idx));

  std::ostringstream s;
  s << std::setprecision(17) << "spectra\t" << rows_idx.size() << '\n'
    << "loss\t" << score.loss << '\n'
    << "spot_balanced_accuracy\t" << balanced_accuracy(ev.spot) << '\n'
    << "core_balanced_accuracy\t" << balanced_accuracy(ev.core) << '\n'
    << "tied_core_votes\t" << ev.core_ties << '\n';

  const fs::path dir = out_dir(cfg);
  fs::create_directories(dir);
  write_text(dir / "eval_report.tsv", s.str());
  std::vector<std::pair<std::string, std::string>> extra;
  extra.emplace_back("fold", std::to_string(fold));
  write_manifest(cfg, "eval", extra);
  std::cout << s.str();
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"isonet: 1D-CNN and ROC/LDA classification of mass spectra"};
  app.require_subcommand(1);

  GlobalFlags flags;
  std::string command;
  for (const auto& [name, help] :
       std::vector<std::pair<std::string, std::string>>{
           {"synth", "generate a synthetic cohort dataset directory"},
           {"train", "train a network and write a checkpoint"},
           {"cv", "cross-validate a method over TMA-level folds"},
           {"baseline", "run the ROC/LDA reference pipeline"},
           {"sensitivity", "export a sensitivity map from a checkpoint"},
           {"eval", "evaluate a checkpoint at spot and core level"}}) {
    auto* sub = app.add_subcommand(name, help);
    sub->add_option("--config", flags.config_path, "JSON config file")->required();
    sub->add_option("--seed", flags.seed, "master seed (overrides the config file)");
    sub->add_option("--threads", flags.threads, "thread cap (overrides the config file)");
    sub->add_option("--out", flags.out, "output directory (overrides the config file)");
    sub->callback([&command, name = name]() { command = name; });
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 2;
  }

  try {
    const json cfg = load_config(flags);
    if (command == "synth") return cmd_synth(cfg);
    if (command == "train") return cmd_train(cfg);
    if (command == "cv") return cmd_cv(cfg);
    if (command == "baseline") return cmd_baseline(cfg);
    if (command == "sensitivity") return cmd_sensitivity(cfg);
    if (command == "eval") return cmd_eval(cfg);
    std::cerr << "error: no command\n";
    return 2;
  } catch (const validation_error& e) {
    std::cerr << "validation error: " << e.what() << "\n";
    return 2;
  } catch (const numeric_error& e) {
    std::cerr << "numeric error: " << e.what() << "\n";
    return 3;
  } catch (const io_error& e) {
    std::cerr << "io error: " << e.what() << "\n";
    return 4;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "io error: " << e.what() << "\n";
    return 4;
  } catch (const json::exception& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
}
