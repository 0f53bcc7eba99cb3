// trainer.hpp -- the epoch loop: minibatch partition, forward/backward,
// optimizer step, per-epoch logging.
//
// Determinism contract: with a fixed config seed and single-threaded
// execution, two runs produce bit-identical parameters and losses.  The
// shuffle generator is seeded per absolute epoch index and the dropout
// stream per (epoch, batch), so a run resumed from a checkpoint at epoch k
// (pass epoch_offset = k) replays exactly the schedule of an uninterrupted
// run.
#pragma once

#include <chrono>
#include <cstdint>
#include <iomanip>
#include <random>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "isonet/common.hpp"
#include "isonet/kernels/loss.hpp"
#include "isonet/model/network.hpp"
#include "isonet/train/minibatch.hpp"
#include "isonet/train/optim.hpp"

namespace isonet {

enum class Optimizer { sgd, adam };

struct TrainConfig {
  double learning_rate = 0.05;
  double weight_decay = 0.0;
  std::size_t batch_size = 256;
  std::size_t epochs = 1;
  Optimizer optimizer = Optimizer::adam;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double dropout_rate = 0.3;  // consumed at model build time
  std::uint64_t seed = 0;
  bool strict_decay = false;  // if set, the L2 term covers biases and batch-norm params too

  void validate() const {
    if (!(learning_rate > 0.0)) throw validation_error("train config: learning_rate must be > 0");
    if (!(weight_decay >= 0.0)) throw validation_error("train config: weight_decay must be >= 0");
    if (batch_size < 2)
      throw validation_error("train config: batch_size must be >= 2 (batch norm)");
    if (epochs < 1) throw validation_error("train config: epochs must be >= 1");
    if (!(dropout_rate >= 0.0 && dropout_rate < 1.0))
      throw validation_error("train config: dropout_rate must lie in [0, 1)");
    AdamConfig{beta1, beta2, epsilon}.validate();
  }
};

inline TrainConfig adsq_preset() {
  TrainConfig cfg;
  cfg.learning_rate = 0.05;
  cfg.weight_decay = 0.05;
  cfg.batch_size = 256;
  cfg.epochs = 300;
  cfg.optimizer = Optimizer::adam;
  cfg.dropout_rate = 0.3;
  return cfg;
}

inline TrainConfig lp_preset() {
  TrainConfig cfg;
  cfg.learning_rate = 0.05;
  cfg.weight_decay = 0.01;
  cfg.batch_size = 256;  // the ADSQ batch size, reused
  cfg.epochs = 30;
  cfg.optimizer = Optimizer::adam;
  cfg.dropout_rate = 0.3;
  return cfg;
}

struct TrainLogRecord {
  std::size_t epoch = 0;
  double loss = 0.0;
  double bal_acc = 0.0;
  double seconds = 0.0;
  bool has_val = false;
  double val_loss = 0.0;
  double val_bal_acc = 0.0;
};

struct TrainLog {
  std::vector<TrainLogRecord> records;
  std::vector<double> batch_losses;  // concatenated over epochs, in update order
  long long clamped_probs = 0;

  std::string to_table() const {
    bool any_val = false;
    for (const auto& r : records) any_val = any_val || r.has_val;
    std::ostringstream out;
    out << std::setprecision(17);
    out << "epoch\tloss\tbal_acc\tseconds";
    if (any_val) out << "\tval_loss\tval_bal_acc";
    out << '\n';
    for (const auto& r : records) {
      out << r.epoch << '\t' << r.loss << '\t' << r.bal_acc << '\t' << r.seconds;
      if (any_val) out << '\t' << r.val_loss << '\t' << r.val_bal_acc;
      out << '\n';
    }
    return out.str();
  }
};

inline std::uint64_t epoch_seed(std::uint64_t seed, std::size_t epoch) {
  return mix_seed(seed, {fnv1a("epoch"), static_cast<std::uint64_t>(epoch)});
}

inline std::uint64_t batch_dropout_seed(std::uint64_t seed, std::size_t epoch, std::size_t batch) {
  return mix_seed(seed, {fnv1a("dropout"), static_cast<std::uint64_t>(epoch),
                         static_cast<std::uint64_t>(batch)});
}

namespace detail {

// Mean per-class recall over the classes that actually appear; equals
// (TP/P + TN/N)/2 in the two-class case.
inline double mean_recall(const std::vector<long long>& correct,
                          const std::vector<long long>& total) {
  double sum = 0.0;
  int present = 0;
  for (std::size_t c = 0; c < total.size(); ++c) {
    if (total[c] == 0) continue;
    sum += static_cast<double>(correct[c]) / static_cast<double>(total[c]);
    ++present;
  }
  if (present == 0) throw validation_error("balanced accuracy: no labeled samples");
  return sum / present;
}

template <class T>
int argmax_row(std::span<const T> probs, std::size_t row, int n_classes) {
  int best = 0;
  for (int c = 1; c < n_classes; ++c)
    if (probs[row * n_classes + c] > probs[row * n_classes + best]) best = c;
  return best;
}

}  // namespace detail

struct EvalScore {
  double loss = 0.0;
  double bal_acc = 0.0;
};

// Infer-mode loss (pure NLL, no decay term) and balanced accuracy on a
// labeled set, in deterministic chunks.
template <class T = float>
EvalScore evaluate(const NetworkPlan& plan, NetworkState<T>& state,
                   const std::vector<std::span<const T>>& rows, std::span<const int> labels,
                   std::size_t chunk = 256) {
  if (rows.size() != labels.size())
    throw validation_error("evaluate: rows and labels disagree in length");
  if (rows.empty()) throw validation_error("evaluate: empty set");
  const int C = plan.spec.n_classes;
  std::vector<long long> correct(static_cast<std::size_t>(C), 0);
  std::vector<long long> total(static_cast<std::size_t>(C), 0);
  double loss_sum = 0.0;
  for (std::size_t start = 0; start < rows.size(); start += chunk) {
    const std::size_t stop = std::min(rows.size(), start + chunk);
    std::vector<std::span<const T>> part(rows.begin() + static_cast<std::ptrdiff_t>(start),
                                         rows.begin() + static_cast<std::ptrdiff_t>(stop));
    auto probs = forward_batch(plan, state, part, Mode::infer);
    std::vector<T> onehot((stop - start) * static_cast<std::size_t>(C), T(0));
    for (std::size_t r = start; r < stop; ++r)
      onehot[(r - start) * static_cast<std::size_t>(C) + static_cast<std::size_t>(labels[r])] =
          T(1);
    auto res = nll_loss(std::span<const T>(probs), std::span<const T>(onehot), stop - start, C,
                        0.0, 0.0);
    loss_sum += res.loss * static_cast<double>(stop - start);
    for (std::size_t r = start; r < stop; ++r) {
      const int pred = detail::argmax_row(std::span<const T>(probs), r - start, C);
      total[static_cast<std::size_t>(labels[r])] += 1;
      if (pred == labels[r]) correct[static_cast<std::size_t>(labels[r])] += 1;
    }
  }
  return {loss_sum / static_cast<double>(rows.size()), detail::mean_recall(correct, total)};
}

template <class T = float>
TrainLog train(const NetworkPlan& plan, NetworkState<T>& state,
               const std::vector<std::span<const T>>& rows, std::span<const int> labels,
               const TrainConfig& cfg, AdamState* adam = nullptr, std::size_t epoch_offset = 0,
               const std::vector<std::span<const T>>* val_rows = nullptr,
               std::span<const int> val_labels = {}) {
  cfg.validate();
  if (rows.size() != labels.size())
    throw validation_error("train: rows and labels disagree in length");
  const std::size_t n = rows.size();
  if (n < 2) throw validation_error("train: need at least 2 samples for batch norm");
  const int C = plan.spec.n_classes;
  for (int l : labels)
    if (l < 0 || l >= C)
      throw validation_error("train: label " + std::to_string(l) + " outside [0, " +
                             std::to_string(C) + ")");
  const std::size_t batch_size = std::min(cfg.batch_size, n);

  AdamState local_adam;
  AdamState* moments = adam != nullptr ? adam : &local_adam;
  if (cfg.optimizer == Optimizer::adam && moments->t == 0 && moments->m.empty())
    *moments = AdamState(state.theta.size());

  const AdamConfig adam_cfg{cfg.beta1, cfg.beta2, cfg.epsilon};
  TrainLog log;
  for (std::size_t e = 0; e < cfg.epochs; ++e) {
    const std::size_t epoch = epoch_offset + e;
    const auto tick = std::chrono::steady_clock::now();

    std::mt19937_64 rng(epoch_seed(cfg.seed, epoch));
    auto batches = minibatch_partition(n, batch_size, rng);
    if (batches.size() >= 2 && batches.back().size() == 1) {
      const std::size_t orphan = batches.back().front();
      batches.pop_back();
      batches.back().push_back(orphan);
    }

    double loss_sum = 0.0;
    std::vector<long long> correct(static_cast<std::size_t>(C), 0);
    std::vector<long long> total(static_cast<std::size_t>(C), 0);

    for (std::size_t b = 0; b < batches.size(); ++b) {
      const auto& idx = batches[b];
      std::vector<std::span<const T>> batch_rows;
      batch_rows.reserve(idx.size());
      std::vector<T> onehot(idx.size() * static_cast<std::size_t>(C), T(0));
      for (std::size_t r = 0; r < idx.size(); ++r) {
        batch_rows.push_back(rows[idx[r]]);
        onehot[r * static_cast<std::size_t>(C) + static_cast<std::size_t>(labels[idx[r]])] = T(1);
      }
      try {
        ForwardTrace<T> trace;
        auto probs = forward_batch(plan, state, batch_rows, Mode::train,
                                   batch_dropout_seed(cfg.seed, epoch, b), &trace);
        auto res =
            nll_loss(std::span<const T>(probs), std::span<const T>(onehot), idx.size(), C,
                     cfg.weight_decay, state.theta_norm_sq(plan, cfg.strict_decay));
        auto grad = backward_params(plan, state, trace, std::span<const T>(onehot),
                                    cfg.weight_decay, cfg.strict_decay);
        if (cfg.optimizer == Optimizer::sgd)
          state.theta = sgd_step(state.theta, grad, cfg.learning_rate);
        else
          state.theta = adam_step(state.theta, grad, *moments, cfg.learning_rate, adam_cfg);
        log.batch_losses.push_back(res.loss);
        log.clamped_probs += res.clamped;
        loss_sum += res.loss * static_cast<double>(idx.size());
        for (std::size_t r = 0; r < idx.size(); ++r) {
          const int pred = detail::argmax_row(std::span<const T>(probs), r, C);
          total[static_cast<std::size_t>(labels[idx[r]])] += 1;
          if (pred == labels[idx[r]]) correct[static_cast<std::size_t>(labels[idx[r]])] += 1;
        }
      } catch (const numeric_error& err) {
        throw numeric_error("train: aborted at epoch " + std::to_string(epoch) + ", batch " +
                            std::to_string(b) + ": " + err.what());
      }
    }

    TrainLogRecord rec;
    rec.epoch = epoch;
    rec.loss = loss_sum / static_cast<double>(n);
    rec.bal_acc = detail::mean_recall(correct, total);
    if (val_rows != nullptr) {
      auto score = evaluate(plan, state, *val_rows, val_labels);
      rec.has_val = true;
      rec.val_loss = score.loss;
      rec.val_bal_acc = score.bal_acc;
    }
    rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - tick).count();
    log.records.push_back(rec);
  }
  return log;
}

}  // namespace isonet
