// spec.hpp -- network architecture descriptors and the standard builders.
#pragma once

#include <cstdint>
#include <string>
#include <variant>
#include <vector>

#include "isonet/common.hpp"
#include "isonet/kernels/conv1d.hpp"

namespace isonet {

/// residual(depth, kernel, stride, out_channels): a branch of `depth`
/// conv -> batchnorm stages (ReLU between stages, stride on the first conv)
/// added onto a shortcut. The shortcut is the identity unless channels or
/// stride change, in which case it is a bias-free 1x1 strided convolution
/// followed by batchnorm.
struct ResidualDesc {
  int depth = 2;
  int kernel_size = 3;
  int stride = 1;
  int out_channels = 8;
};

struct ReluDesc {};

/// Locally-connected layer (one kernel per position) over a single-channel
/// map; dropout_rate is applied to its input in train mode.
struct LocalDesc {
  int kernel_size = 3;
  double dropout_rate = 0.0;
};

/// Final fully connected softmax head.
struct DenseDesc {
  int out_dim = 2;
};

using LayerDesc = std::variant<ResidualDesc, ReluDesc, LocalDesc, DenseDesc>;

struct NetworkSpec {
  int input_dim = 0;
  int n_classes = 0;
  bool post_add_relu = true;  // apply the residual layer's second activation after the addition
  std::vector<LayerDesc> layers;

  void validate() const {
    if (input_dim < 1) throw validation_error("network: input_dim must be positive");
    if (n_classes < 2) throw validation_error("network: need at least two classes");
    if (layers.empty()) throw validation_error("network: no layers");
    const auto* last = std::get_if<DenseDesc>(&layers.back());
    if (!last || last->out_dim != n_classes)
      throw validation_error("network: last layer must be a dense softmax head with out_dim = " +
                             std::to_string(n_classes));
    for (std::size_t i = 0; i + 1 < layers.size(); ++i)
      if (std::holds_alternative<DenseDesc>(layers[i]))
        throw validation_error("network: dense head must be the final layer");
    for (const auto& layer : layers)
      if (const auto* r = std::get_if<ResidualDesc>(&layer)) {
        if (r->depth < 1) throw validation_error("network: residual depth must be >= 1");
        if (r->kernel_size < 1 || r->kernel_size % 2 == 0)
          throw validation_error("network: residual kernel size must be odd");
        if (r->stride < 1 || r->out_channels < 1)
          throw validation_error("network: residual stride/channels must be positive");
      }
  }

  std::string canonical() const {
    std::string s = "d=" + std::to_string(input_dim) + ";C=" + std::to_string(n_classes) +
                    ";par=" + (post_add_relu ? "1" : "0") + ";L=";
    for (const auto& layer : layers) {
      if (const auto* r = std::get_if<ResidualDesc>(&layer))
        s += "residual(" + std::to_string(r->depth) + "," + std::to_string(r->kernel_size) + "," +
             std::to_string(r->stride) + "," + std::to_string(r->out_channels) + ")";
      else if (std::holds_alternative<ReluDesc>(layer))
        s += "relu";
      else if (const auto* l = std::get_if<LocalDesc>(&layer))
        s += "local(" + std::to_string(l->kernel_size) + "," + std::to_string(l->dropout_rate) + ")";
      else if (const auto* d = std::get_if<DenseDesc>(&layer))
        s += "dense(" + std::to_string(d->out_dim) + ")";
      s += "|";
    }
    return s;
  }

  std::uint64_t hash() const { return fnv1a(canonical()); }
};

/// The reference architecture: three 8-channel residual layers (the middle
/// one striding by 5), a funnel residual layer to one channel striding by 3,
/// ReLU, a locally-connected layer with 30% input dropout, and a dense
/// softmax head.
inline NetworkSpec build_isotopenet(int d, int n_classes, double dropout_rate = 0.3) {
  if (d < 16)
    throw validation_error("isotopenet: input_dim " + std::to_string(d) +
                           " is too small for the two strided layers");
  if (n_classes < 2) throw validation_error("isotopenet: need at least two classes");
  NetworkSpec spec;
  spec.input_dim = d;
  spec.n_classes = n_classes;
  spec.layers = {ResidualDesc{2, 3, 1, 8}, ResidualDesc{2, 3, 5, 8}, ResidualDesc{2, 3, 1, 8},
                 ResidualDesc{2, 3, 3, 1}, ReluDesc{},          LocalDesc{3, dropout_rate},
                 DenseDesc{n_classes}};
  spec.validate();
  return spec;
}

/// Wide residual comparator: a configurable stack of residual layers flowing
/// straight into the dense softmax head (empty schedule = dense only).
inline NetworkSpec build_residualnet(const std::vector<ResidualDesc>& schedule, int d,
                                     int n_classes) {
  NetworkSpec spec;
  spec.input_dim = d;
  spec.n_classes = n_classes;
  for (const auto& r : schedule) spec.layers.emplace_back(r);
  spec.layers.emplace_back(DenseDesc{n_classes});
  spec.validate();
  return spec;
}

inline std::vector<ResidualDesc> default_residualnet_schedule() {
  std::vector<ResidualDesc> schedule{{2, 3, 1, 32}, {2, 3, 5, 64}, {2, 3, 3, 128}};
  for (int i = 0; i < 15; ++i) schedule.push_back({2, 3, 1, 128});
  return schedule;
}

/// Receptive field (in input bins) after each layer up to the dense head,
/// by the standard composition rf += (k-1)*jump, jump *= stride.
inline std::vector<long long> receptive_field(const NetworkSpec& spec) {
  spec.validate();
  std::vector<long long> out;
  long long rf = 1, jump = 1;
  for (const auto& layer : spec.layers) {
    if (std::holds_alternative<DenseDesc>(layer)) break;
    if (const auto* r = std::get_if<ResidualDesc>(&layer)) {
      for (int i = 0; i < r->depth; ++i) {
        rf += static_cast<long long>(r->kernel_size - 1) * jump;
        if (i == 0) jump *= r->stride;
      }
    } else if (const auto* l = std::get_if<LocalDesc>(&layer)) {
      rf += static_cast<long long>(l->kernel_size - 1) * jump;
    }
    out.push_back(rf);
  }
  return out;
}

}  // namespace isonet
