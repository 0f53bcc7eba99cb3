// network.hpp -- parameter layout, initialization, and the full forward /
// backward passes over a NetworkSpec.
//
// All trainable parameters live in one flat theta vector; the plan records
// each layer's slices into it. Batch-norm running statistics live in a
// separate f64 vector. decay_mask marks the entries the L2 penalty applies
// to (kernel/dense weights; biases and gamma/beta are excluded unless the
// strict flag is set).
#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "isonet/common.hpp"
#include "isonet/feature_map.hpp"
#include "isonet/kernels/activations.hpp"
#include "isonet/kernels/batchnorm.hpp"
#include "isonet/kernels/conv1d.hpp"
#include "isonet/kernels/dense.hpp"
#include "isonet/kernels/dropout.hpp"
#include "isonet/kernels/local.hpp"
#include "isonet/model/spec.hpp"

namespace isonet {

struct ConvSlice {
  int in_ch = 0, out_ch = 0, k = 1, stride = 1;
  std::size_t w_off = 0;
  std::size_t b_off = 0;
  bool has_bias = true;

  std::size_t w_len() const {
    return static_cast<std::size_t>(out_ch) * in_ch * k;
  }
};

struct BnSlice {
  int channels = 0;
  std::size_t gamma_off = 0, beta_off = 0;
  std::size_t run_off = 0;  // mean at run_off, var at run_off + channels
};

struct ResidualPlan {
  ResidualDesc desc;
  int in_ch = 0, in_len = 0, out_ch = 0, out_len = 0;
  std::vector<ConvSlice> convs;  // depth entries; convs[0] carries the stride
  std::vector<BnSlice> bns;
  bool projected = false;
  ConvSlice proj;
  BnSlice proj_bn;
};

struct ReluPlan {
  int ch = 0, len = 0;
};

struct LocalPlan {
  int length = 0, k = 3;
  double dropout_rate = 0.0;
  std::size_t w_off = 0, b_off = 0;
};

struct DensePlan {
  int in_ch = 0, in_len = 0;  // flattened channel-major
  int in_dim = 0, out_dim = 0;
  std::size_t w_off = 0, b_off = 0;
};

using LayerPlan = std::variant<ResidualPlan, ReluPlan, LocalPlan, DensePlan>;

struct NetworkPlan {
  NetworkSpec spec;
  std::vector<LayerPlan> layers;
  std::size_t theta_len = 0;
  std::size_t running_len = 0;
  std::vector<std::uint8_t> decay_mask;  // theta_len entries; 1 = weight
};

template <class T = float>
struct NetworkState {
  std::vector<T> theta;
  std::vector<double> running;

  long long total_params() const { return static_cast<long long>(theta.size()); }

  double theta_norm_sq(const NetworkPlan& plan, bool strict = false) const {
    double s = 0.0;
    for (std::size_t i = 0; i < theta.size(); ++i)
      if (strict || plan.decay_mask[i]) s += static_cast<double>(theta[i]) * theta[i];
    return s;
  }
};

inline NetworkPlan plan_network(const NetworkSpec& spec) {
  spec.validate();
  NetworkPlan plan;
  plan.spec = spec;

  auto alloc = [&plan](std::size_t n, bool weight) {
    const std::size_t off = plan.theta_len;
    plan.theta_len += n;
    plan.decay_mask.insert(plan.decay_mask.end(), n, weight ? 1 : 0);
    return off;
  };
  auto alloc_bn = [&](int channels) {
    BnSlice bn;
    bn.channels = channels;
    bn.gamma_off = alloc(channels, false);
    bn.beta_off = alloc(channels, false);
    bn.run_off = plan.running_len;
    plan.running_len += 2 * static_cast<std::size_t>(channels);
    return bn;
  };

  int ch = 1, len = spec.input_dim;
  for (const auto& layer : spec.layers) {
    if (const auto* r = std::get_if<ResidualDesc>(&layer)) {
      ResidualPlan rp;
      rp.desc = *r;
      rp.in_ch = ch;
      rp.in_len = len;
      rp.out_ch = r->out_channels;
      rp.out_len = conv_output_length(len, r->stride);
      for (int i = 0; i < r->depth; ++i) {
        ConvSlice c;
        c.in_ch = i == 0 ? ch : r->out_channels;
        c.out_ch = r->out_channels;
        c.k = r->kernel_size;
        c.stride = i == 0 ? r->stride : 1;
        c.w_off = alloc(c.w_len(), true);
        c.b_off = alloc(c.out_ch, false);
        rp.convs.push_back(c);
        rp.bns.push_back(alloc_bn(r->out_channels));
      }
      rp.projected = (ch != r->out_channels) || (r->stride != 1);
      if (rp.projected) {
        rp.proj.in_ch = ch;
        rp.proj.out_ch = r->out_channels;
        rp.proj.k = 1;
        rp.proj.stride = r->stride;
        rp.proj.has_bias = false;
        rp.proj.w_off = alloc(rp.proj.w_len(), true);
        rp.proj_bn = alloc_bn(r->out_channels);
      }
      ch = rp.out_ch;
      len = rp.out_len;
      plan.layers.emplace_back(std::move(rp));
    } else if (std::holds_alternative<ReluDesc>(layer)) {
      plan.layers.emplace_back(ReluPlan{ch, len});
    } else if (const auto* l = std::get_if<LocalDesc>(&layer)) {
      if (ch != 1)
        throw validation_error("network: locally-connected layer expects a single-channel map, got " +
                               std::to_string(ch) + " channels");
      LocalPlan lp;
      lp.length = len;
      lp.k = l->kernel_size;
      lp.dropout_rate = l->dropout_rate;
      lp.w_off = alloc(static_cast<std::size_t>(len) * l->kernel_size, true);
      lp.b_off = alloc(len, false);
      plan.layers.emplace_back(lp);
    } else if (const auto* d = std::get_if<DenseDesc>(&layer)) {
      DensePlan dp;
      dp.in_ch = ch;
      dp.in_len = len;
      dp.in_dim = ch * len;
      dp.out_dim = d->out_dim;
      dp.w_off = alloc(static_cast<std::size_t>(dp.in_dim) * dp.out_dim, true);
      dp.b_off = alloc(dp.out_dim, false);
      plan.layers.emplace_back(dp);
    }
  }
  return plan;
}

inline long long param_count(const NetworkPlan& plan) {
  return static_cast<long long>(plan.theta_len);
}

/// He initialization: N(0, 2/fan_in) for kernel and dense weights, biases 0,
/// gamma 1, beta 0; running stats start at mean 0, var 1.
template <class T = float>
NetworkState<T> init_state(const NetworkPlan& plan, std::uint64_t seed) {
  NetworkState<T> state;
  state.theta.assign(plan.theta_len, T(0));
  state.running.assign(plan.running_len, 0.0);
  std::mt19937_64 rng(mix_seed(seed, fnv1a(std::string("init"))));

  auto fill = [&](std::size_t off, std::size_t n, int fan_in) {
    std::normal_distribution<double> g(0.0, std::sqrt(2.0 / fan_in));
    for (std::size_t i = 0; i < n; ++i) state.theta[off + i] = static_cast<T>(g(rng));
  };
  auto fill_bn = [&](const BnSlice& bn) {
    for (int c = 0; c < bn.channels; ++c) state.theta[bn.gamma_off + c] = T(1);
    for (int c = 0; c < bn.channels; ++c) state.running[bn.run_off + bn.channels + c] = 1.0;
  };

  for (const auto& layer : plan.layers) {
    if (const auto* r = std::get_if<ResidualPlan>(&layer)) {
      for (std::size_t i = 0; i < r->convs.size(); ++i) {
        fill(r->convs[i].w_off, r->convs[i].w_len(), r->convs[i].in_ch * r->convs[i].k);
        fill_bn(r->bns[i]);
      }
      if (r->projected) {
        fill(r->proj.w_off, r->proj.w_len(), r->proj.in_ch);
        fill_bn(r->proj_bn);
      }
    } else if (const auto* l = std::get_if<LocalPlan>(&layer)) {
      fill(l->w_off, static_cast<std::size_t>(l->length) * l->k, l->k);
    } else if (const auto* d = std::get_if<DensePlan>(&layer)) {
      fill(d->w_off, static_cast<std::size_t>(d->in_dim) * d->out_dim, d->in_dim);
    }
  }
  return state;
}

// ---------------------------------------------------------------------------
// Parameter span helpers.
// ---------------------------------------------------------------------------

namespace detail {

template <class T>
ConvParams<T> conv_params(const ConvSlice& c, const NetworkState<T>& state, Activation act) {
  ConvParams<T> p;
  p.in_channels = c.in_ch;
  p.out_channels = c.out_ch;
  p.kernel_size = c.k;
  p.stride = c.stride;
  p.activation = act;
  p.kernels = std::span<const T>(state.theta.data() + c.w_off, c.w_len());
  if (c.has_bias) p.bias = std::span<const T>(state.theta.data() + c.b_off, c.out_ch);
  return p;
}

template <class T>
BatchNormParams<T> bn_params(const BnSlice& bn, NetworkState<T>& state) {
  BatchNormParams<T> p;
  p.channels = bn.channels;
  p.gamma = std::span<const T>(state.theta.data() + bn.gamma_off, bn.channels);
  p.beta = std::span<const T>(state.theta.data() + bn.beta_off, bn.channels);
  p.running_mean = std::span<double>(state.running.data() + bn.run_off, bn.channels);
  p.running_var = std::span<double>(state.running.data() + bn.run_off + bn.channels, bn.channels);
  return p;
}

template <class T>
LocalParams<T> local_params(const LocalPlan& l, const NetworkState<T>& state) {
  LocalParams<T> p;
  p.length = l.length;
  p.kernel_size = l.k;
  p.kernels = std::span<const T>(state.theta.data() + l.w_off,
                                 static_cast<std::size_t>(l.length) * l.k);
  p.bias = std::span<const T>(state.theta.data() + l.b_off, l.length);
  return p;
}

template <class T>
DenseParams<T> dense_params(const DensePlan& d, const NetworkState<T>& state) {
  DenseParams<T> p;
  p.in_dim = d.in_dim;
  p.out_dim = d.out_dim;
  p.activation = Activation::softmax;
  p.weights = std::span<const T>(state.theta.data() + d.w_off,
                                 static_cast<std::size_t>(d.in_dim) * d.out_dim);
  p.bias = std::span<const T>(state.theta.data() + d.b_off, d.out_dim);
  return p;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Forward.
// ---------------------------------------------------------------------------

template <class T>
struct ResidualTrace {
  std::vector<std::vector<Conv1dTrace<T>>> conv;    // [depth][batch]
  std::vector<BatchNormTrace<T>> bn;                // [depth]
  std::vector<std::vector<FeatureMap<T>>> relu_pre; // [depth-1][batch]
  std::vector<Conv1dTrace<T>> proj_conv;            // [batch]
  BatchNormTrace<T> proj_bn;
  std::vector<FeatureMap<T>> post_add_pre;          // [batch] when post_add_relu
};

template <class T>
struct ReluNodeTrace {
  std::vector<FeatureMap<T>> pre;
};

template <class T>
struct LocalLayerTrace {
  std::vector<DropoutTrace<T>> dropout;
  std::vector<LocalTrace<T>> local;
};

template <class T>
struct DenseLayerTrace {
  std::vector<DenseTrace<T>> dense;
};

template <class T>
using LayerTrace =
    std::variant<ResidualTrace<T>, ReluNodeTrace<T>, LocalLayerTrace<T>, DenseLayerTrace<T>>;

template <class T = float>
struct ForwardTrace {
  Mode mode = Mode::train;
  std::size_t batch = 0;
  std::vector<LayerTrace<T>> layers;
};

namespace detail {

template <class T>
std::vector<FeatureMap<T>> residual_forward(const ResidualPlan& rp, NetworkState<T>& state,
                                            std::vector<FeatureMap<T>> batch, Mode mode,
                                            bool post_add_relu, ResidualTrace<T>* trace) {
  const std::size_t n = batch.size();
  const int depth = static_cast<int>(rp.convs.size());
  if (trace) {
    trace->conv.resize(depth);
    trace->bn.resize(depth);
    trace->relu_pre.resize(depth > 0 ? depth - 1 : 0);
  }

  // Shortcut path.
  std::vector<FeatureMap<T>> shortcut;
  if (rp.projected) {
    auto pp = conv_params(rp.proj, state, Activation::identity);
    shortcut.reserve(n);
    if (trace) trace->proj_conv.resize(n);
    for (std::size_t b = 0; b < n; ++b)
      shortcut.push_back(conv1d_forward(batch[b], pp, trace ? &trace->proj_conv[b] : nullptr));
    auto pb = bn_params(rp.proj_bn, state);
    batchnorm_forward(shortcut, pb, mode, trace ? &trace->proj_bn : nullptr);
  } else {
    shortcut = batch;
  }

  // Branch: conv -> batchnorm (-> ReLU between stages).
  for (int i = 0; i < depth; ++i) {
    auto cp = conv_params(rp.convs[i], state, Activation::identity);
    if (trace) trace->conv[i].resize(n);
    for (std::size_t b = 0; b < n; ++b)
      batch[b] = conv1d_forward(batch[b], cp, trace ? &trace->conv[i][b] : nullptr);
    auto bp = bn_params(rp.bns[i], state);
    batchnorm_forward(batch, bp, mode, trace ? &trace->bn[i] : nullptr);
    if (i + 1 < depth) {
      if (trace) trace->relu_pre[i] = batch;
      for (auto& m : batch) relu_inplace(std::span<T>(m.data));
    }
  }

  for (std::size_t b = 0; b < n; ++b)
    for (std::size_t i = 0; i < batch[b].data.size(); ++i) batch[b].data[i] += shortcut[b].data[i];

  if (post_add_relu) {
    if (trace) trace->post_add_pre = batch;
    for (auto& m : batch) relu_inplace(std::span<T>(m.data));
  }
  return batch;
}

template <class T>
std::vector<FeatureMap<T>> residual_backward(const ResidualPlan& rp, const NetworkState<T>& state,
                                             const ResidualTrace<T>& trace,
                                             std::vector<FeatureMap<T>> upstream,
                                             bool post_add_relu, std::span<T> grad_theta) {
  const std::size_t n = upstream.size();
  const int depth = static_cast<int>(rp.convs.size());

  if (post_add_relu)
    for (std::size_t b = 0; b < n; ++b)
      relu_backward_inplace(std::span<T>(upstream[b].data),
                            std::span<const T>(trace.post_add_pre[b].data));

  std::vector<FeatureMap<T>> g_short = upstream;  // the addition fans the gradient out

  // Branch, reversed.
  // grad_theta may be empty (input-gradient-only pass); parameter
  // accumulation then lands in discarded scratch buffers.
  std::vector<std::vector<T>> scratches;
  auto theta_span = [&](std::size_t off, std::size_t len) -> std::span<T> {
    if (!grad_theta.empty()) return grad_theta.subspan(off, len);
    scratches.emplace_back(len, T(0));
    return std::span<T>(scratches.back());
  };

  auto& mutable_state = const_cast<NetworkState<T>&>(state);  // bn_params needs mutable spans
  for (int i = depth - 1; i >= 0; --i) {
    auto bp = bn_params(rp.bns[i], mutable_state);
    auto gg = theta_span(rp.bns[i].gamma_off, rp.bns[i].channels);
    auto gb = theta_span(rp.bns[i].beta_off, rp.bns[i].channels);
    batchnorm_backward_acc(trace.bn[i], bp, upstream, gg, gb);

    auto cp = conv_params(rp.convs[i], state, Activation::identity);
    auto gk = theta_span(rp.convs[i].w_off, rp.convs[i].w_len());
    auto gcb = theta_span(rp.convs[i].b_off, rp.convs[i].out_ch);
    for (std::size_t b = 0; b < n; ++b)
      upstream[b] = conv1d_backward_acc(trace.conv[i][b], cp, upstream[b], gk, gcb);

    if (i > 0)
      for (std::size_t b = 0; b < n; ++b)
        relu_backward_inplace(std::span<T>(upstream[b].data),
                              std::span<const T>(trace.relu_pre[i - 1][b].data));
  }

  // Shortcut, reversed.
  if (rp.projected) {
    auto pb = bn_params(rp.proj_bn, mutable_state);
    auto gg = theta_span(rp.proj_bn.gamma_off, rp.proj_bn.channels);
    auto gb = theta_span(rp.proj_bn.beta_off, rp.proj_bn.channels);
    batchnorm_backward_acc(trace.proj_bn, pb, g_short, gg, gb);
    auto pp = conv_params(rp.proj, state, Activation::identity);
    auto gk = theta_span(rp.proj.w_off, rp.proj.w_len());
    for (std::size_t b = 0; b < n; ++b)
      g_short[b] = conv1d_backward_acc(trace.proj_conv[b], pp, g_short[b], gk, std::span<T>());
  }

  for (std::size_t b = 0; b < n; ++b)
    for (std::size_t i = 0; i < upstream[b].data.size(); ++i)
      upstream[b].data[i] += g_short[b].data[i];
  return upstream;
}

}  // namespace detail

/// Runs the batch through the network. Returns row-major N x C class
/// probabilities. Train mode updates batch-norm running statistics and draws
/// dropout masks from dropout_seed; infer mode is deterministic.
template <class T = float>
std::vector<T> forward_batch(const NetworkPlan& plan, NetworkState<T>& state,
                             const std::vector<std::span<const T>>& rows, Mode mode,
                             std::uint64_t dropout_seed = 0, ForwardTrace<T>* trace = nullptr) {
  const std::size_t n = rows.size();
  if (n == 0) throw validation_error("forward: empty batch");
  for (const auto& r : rows)
    if (r.size() != static_cast<std::size_t>(plan.spec.input_dim))
      throw validation_error("forward: input row length " + std::to_string(r.size()) +
                             " != input_dim " + std::to_string(plan.spec.input_dim));
  if (state.theta.size() != plan.theta_len || state.running.size() != plan.running_len)
    throw validation_error("forward: state does not match the plan");

  if (trace) {
    trace->mode = mode;
    trace->batch = n;
    trace->layers.clear();
    trace->layers.reserve(plan.layers.size());
  }

  std::vector<FeatureMap<T>> maps;
  maps.reserve(n);
  for (const auto& r : rows) maps.push_back(as_feature_map(r));

  std::vector<T> probs(n * static_cast<std::size_t>(plan.spec.n_classes));

  for (std::size_t li = 0; li < plan.layers.size(); ++li) {
    const auto& layer = plan.layers[li];
    if (const auto* rp = std::get_if<ResidualPlan>(&layer)) {
      ResidualTrace<T>* rt = nullptr;
      if (trace) {
        trace->layers.emplace_back(ResidualTrace<T>{});
        rt = &std::get<ResidualTrace<T>>(trace->layers.back());
      }
      maps = detail::residual_forward(*rp, state, std::move(maps), mode, plan.spec.post_add_relu,
                                      rt);
    } else if (std::holds_alternative<ReluPlan>(layer)) {
      if (trace) {
        trace->layers.emplace_back(ReluNodeTrace<T>{maps});
      }
      for (auto& m : maps) relu_inplace(std::span<T>(m.data));
    } else if (const auto* lp = std::get_if<LocalPlan>(&layer)) {
      LocalLayerTrace<T>* lt = nullptr;
      if (trace) {
        trace->layers.emplace_back(LocalLayerTrace<T>{});
        lt = &std::get<LocalLayerTrace<T>>(trace->layers.back());
        lt->dropout.resize(n);
        lt->local.resize(n);
      }
      const bool drop = mode == Mode::train && lp->dropout_rate > 0.0;
      auto params = detail::local_params(*lp, state);
      for (std::size_t b = 0; b < n; ++b) {
        if (drop) {
          std::mt19937_64 rng(mix_seed(dropout_seed, {li, b}));
          dropout_forward(std::span<T>(maps[b].data), lp->dropout_rate, mode, rng,
                          lt ? &lt->dropout[b] : nullptr);
        }
        maps[b] = local_forward(maps[b], params, lt ? &lt->local[b] : nullptr);
      }
    } else if (const auto* dp = std::get_if<DensePlan>(&layer)) {
      DenseLayerTrace<T>* dt = nullptr;
      if (trace) {
        trace->layers.emplace_back(DenseLayerTrace<T>{});
        dt = &std::get<DenseLayerTrace<T>>(trace->layers.back());
        dt->dense.resize(n);
      }
      auto params = detail::dense_params(*dp, state);
      for (std::size_t b = 0; b < n; ++b) {
        auto out = dense_forward(std::span<const T>(maps[b].data), params,
                                 dt ? &dt->dense[b] : nullptr);
        std::copy(out.begin(), out.end(), probs.begin() + b * plan.spec.n_classes);
      }
    }

    if (!std::holds_alternative<DensePlan>(layer))
      for (const auto& m : maps)
        if (!m.finite())
          throw numeric_error("forward: non-finite activations after layer " + std::to_string(li));
  }
  if (!all_finite(probs)) throw numeric_error("forward: non-finite probabilities at the head");
  return probs;
}

/// Gradient of J (mean NLL + lambda * |theta|^2) with respect to theta.
/// probs are read from the trace; labels are row-major N x C one-hot.
template <class T = float>
std::vector<T> backward_params(const NetworkPlan& plan, const NetworkState<T>& state,
                               const ForwardTrace<T>& trace, std::span<const T> onehot,
                               double lambda, bool strict_decay = false) {
  if (trace.mode != Mode::train)
    throw validation_error("backward_params: requires a train-mode trace");
  const std::size_t n = trace.batch;
  const std::size_t C = static_cast<std::size_t>(plan.spec.n_classes);
  if (onehot.size() != n * C)
    throw validation_error("backward_params: label shape mismatch");
  if (trace.layers.size() != plan.layers.size())
    throw validation_error("backward_params: trace does not match the plan");

  std::vector<T> grad(plan.theta_len, T(0));
  std::vector<FeatureMap<T>> g;

  for (std::size_t ri = plan.layers.size(); ri-- > 0;) {
    const auto& layer = plan.layers[ri];
    if (const auto* dp = std::get_if<DensePlan>(&layer)) {
      const auto& dt = std::get<DenseLayerTrace<T>>(trace.layers[ri]);
      auto params = detail::dense_params(*dp, state);
      auto gw = std::span<T>(grad.data() + dp->w_off,
                             static_cast<std::size_t>(dp->in_dim) * dp->out_dim);
      auto gb = std::span<T>(grad.data() + dp->b_off, dp->out_dim);
      g.resize(n);
      std::vector<T> gpre(C);
      for (std::size_t b = 0; b < n; ++b) {
        for (std::size_t c = 0; c < C; ++c)
          gpre[c] = static_cast<T>(
              (static_cast<double>(dt.dense[b].output[c]) - onehot[b * C + c]) / n);
        auto gx = dense_backward_pre_acc(dt.dense[b], params, std::span<const T>(gpre), gw, gb);
        FeatureMap<T> m(dp->in_ch, dp->in_len);
        std::copy(gx.begin(), gx.end(), m.data.begin());
        g[b] = std::move(m);
      }
    } else if (const auto* lp = std::get_if<LocalPlan>(&layer)) {
      const auto& lt = std::get<LocalLayerTrace<T>>(trace.layers[ri]);
      auto params = detail::local_params(*lp, state);
      auto gw = std::span<T>(grad.data() + lp->w_off, static_cast<std::size_t>(lp->length) * lp->k);
      auto gb = std::span<T>(grad.data() + lp->b_off, lp->length);
      for (std::size_t b = 0; b < n; ++b) {
        g[b] = local_backward_acc(lt.local[b], params, g[b], gw, gb);
        if (!lt.dropout[b].scale.empty()) dropout_backward(lt.dropout[b], std::span<T>(g[b].data));
      }
    } else if (std::holds_alternative<ReluPlan>(layer)) {
      const auto& rt = std::get<ReluNodeTrace<T>>(trace.layers[ri]);
      for (std::size_t b = 0; b < n; ++b)
        relu_backward_inplace(std::span<T>(g[b].data), std::span<const T>(rt.pre[b].data));
    } else if (const auto* rp = std::get_if<ResidualPlan>(&layer)) {
      const auto& rt = std::get<ResidualTrace<T>>(trace.layers[ri]);
      g = detail::residual_backward(*rp, state, rt, std::move(g), plan.spec.post_add_relu,
                                    std::span<T>(grad));
    }
  }

  if (lambda != 0.0)
    for (std::size_t i = 0; i < grad.size(); ++i)
      if (strict_decay || plan.decay_mask[i])
        grad[i] += static_cast<T>(2.0 * lambda * static_cast<double>(state.theta[i]));
  return grad;
}

/// Gradient of the class-j output probability with respect to the input
/// spectrum, at infer mode (dropout off, batch norm on running statistics).
template <class T = float>
std::vector<T> backward_input(const NetworkPlan& plan, NetworkState<T>& state,
                              std::span<const T> x, int cls) {
  if (cls < 0 || cls >= plan.spec.n_classes)
    throw validation_error("backward_input: class " + std::to_string(cls) + " out of range");

  ForwardTrace<T> trace;
  (void)forward_batch(plan, state, {x}, Mode::infer, 0, &trace);

  std::vector<FeatureMap<T>> g(1);
  for (std::size_t ri = plan.layers.size(); ri-- > 0;) {
    const auto& layer = plan.layers[ri];
    if (const auto* dp = std::get_if<DensePlan>(&layer)) {
      const auto& dt = std::get<DenseLayerTrace<T>>(trace.layers[ri]);
      auto params = detail::dense_params(*dp, state);
      std::vector<T> up(plan.spec.n_classes, T(0));
      up[cls] = T(1);
      auto gd = dense_backward(dt.dense[0], params, std::span<const T>(up));
      FeatureMap<T> m(dp->in_ch, dp->in_len);
      std::copy(gd.input.begin(), gd.input.end(), m.data.begin());
      g[0] = std::move(m);
    } else if (const auto* lp = std::get_if<LocalPlan>(&layer)) {
      const auto& lt = std::get<LocalLayerTrace<T>>(trace.layers[ri]);
      auto params = detail::local_params(*lp, state);
      std::vector<T> sw(static_cast<std::size_t>(lp->length) * lp->k, T(0));
      std::vector<T> sb(lp->length, T(0));
      g[0] = local_backward_acc(lt.local[0], params, g[0], std::span<T>(sw), std::span<T>(sb));
    } else if (std::holds_alternative<ReluPlan>(layer)) {
      const auto& rt = std::get<ReluNodeTrace<T>>(trace.layers[ri]);
      relu_backward_inplace(std::span<T>(g[0].data), std::span<const T>(rt.pre[0].data));
    } else if (const auto* rp = std::get_if<ResidualPlan>(&layer)) {
      const auto& rt = std::get<ResidualTrace<T>>(trace.layers[ri]);
      g = detail::residual_backward(*rp, state, rt, std::move(g), plan.spec.post_add_relu,
                                    std::span<T>());
    }
  }
  return std::move(g[0].data);
}

struct PredictResult {
  std::vector<int> classes;
  long long ties = 0;
};

/// Argmax class per row at infer mode; ties go to the lowest index and are
/// counted.
template <class T = float>
PredictResult predict(const NetworkPlan& plan, NetworkState<T>& state,
                      const std::vector<std::span<const T>>& rows, std::size_t chunk = 256) {
  PredictResult result;
  result.classes.reserve(rows.size());
  const std::size_t C = static_cast<std::size_t>(plan.spec.n_classes);
  for (std::size_t start = 0; start < rows.size(); start += chunk) {
    const std::size_t stop = std::min(rows.size(), start + chunk);
    std::vector<std::span<const T>> part(rows.begin() + start, rows.begin() + stop);
    auto probs = forward_batch(plan, state, part, Mode::infer);
    for (std::size_t b = 0; b < part.size(); ++b) {
      int best = 0;
      bool tie = false;
      for (std::size_t c = 1; c < C; ++c) {
        const T p = probs[b * C + c];
        const T q = probs[b * C + best];
        if (p > q) {
          best = static_cast<int>(c);
          tie = false;
        } else if (p == q) {
          tie = true;
        }
      }
      if (tie) ++result.ties;
      result.classes.push_back(best);
    }
  }
  return result;
}

}  // namespace isonet
