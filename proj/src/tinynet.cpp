// Copyright 2026 The ETLT Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "etlt/tinynet.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "etlt/error.hpp"
#include "etlt/rng.hpp"

namespace etlt::tinynet {
namespace {

using linalg::Matrix;
using linalg::Vector;

std::size_t argmax(std::span<const double> v) {
  return static_cast<std::size_t>(std::max_element(v.begin(), v.end()) - v.begin());
}

Vector softmax(std::span<const double> logits, double temperature) {
  const double m = *std::max_element(logits.begin(), logits.end());
  Vector p(logits.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    p[i] = std::exp((logits[i] - m) / temperature);
    sum += p[i];
  }
  for (double& x : p) x /= sum;
  return p;
}

// Backpropagates dL/dlogits through the stack. Accumulates weight gradients
// into `grads` when non-null; returns dL/dx.
Vector backward(const std::vector<Layer>& layers, const TinyNet::Trace& trace, Vector upstream,
                std::vector<Layer>* grads) {
  for (std::size_t l = layers.size(); l-- > 0;) {
    const Layer& layer = layers[l];
    const Vector& in = trace.activations[l];
    if (grads != nullptr) {
      Layer& g = (*grads)[l];
      for (std::size_t o = 0; o < layer.weights.rows(); ++o) {
        const double go = upstream[o];
        g.bias[o] += go;
        if (go == 0.0) continue;
        auto grow = g.weights.row(o);
        for (std::size_t i = 0; i < in.size(); ++i) grow[i] += go * in[i];
      }
    }
    Vector down = linalg::multiply_transposed(layer.weights, upstream);
    if (l > 0) {
      const Vector& pre = trace.pre_activations[l - 1];
      for (std::size_t i = 0; i < down.size(); ++i)
        if (!(pre[i] > 0.0)) down[i] = 0.0;
    }
    upstream = std::move(down);
  }
  return upstream;
}

}  // namespace

TinyNet::TinyNet(std::vector<Layer> layers) : layers_(std::move(layers)) {
  if (layers_.empty()) throw Error(ErrorCode::kInvalidArgument, "network needs at least one layer");
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    const Layer& layer = layers_[l];
    if (layer.bias.size() != layer.weights.rows()) {
      throw Error(ErrorCode::kShape, "layer " + std::to_string(l) + " bias/weight mismatch");
    }
    if (l > 0 && layer.weights.cols() != layers_[l - 1].weights.rows()) {
      throw Error(ErrorCode::kShape, "layer " + std::to_string(l) + " input width mismatch");
    }
    if (!linalg::all_finite(layer.weights.values()) || !linalg::all_finite(layer.bias.values())) {
      throw Error(ErrorCode::kInvalidInput, "non-finite parameters in layer " + std::to_string(l));
    }
  }
}

TinyNet TinyNet::create(std::span<const std::size_t> dims, std::uint64_t seed) {
  if (dims.size() < 2) throw Error(ErrorCode::kInvalidArgument, "need at least {d_in, C}");
  if (std::any_of(dims.begin(), dims.end(), [](std::size_t d) { return d == 0; })) {
    throw Error(ErrorCode::kInvalidArgument, "layer widths must be positive");
  }
  Rng rng(seed);
  std::vector<Layer> layers;
  for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
    const std::size_t fan_in = dims[l];
    const std::size_t fan_out = dims[l + 1];
    const double a = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    Layer layer{Matrix(fan_out, fan_in), Vector(fan_out)};
    for (std::size_t i = 0; i < fan_out * fan_in; ++i) layer.weights.data()[i] = rng.uniform(-a, a);
    layers.push_back(std::move(layer));
  }
  return TinyNet(std::move(layers));
}

std::vector<std::size_t> TinyNet::dims() const {
  std::vector<std::size_t> d;
  if (layers_.empty()) return d;
  d.push_back(layers_.front().weights.cols());
  for (const auto& l : layers_) d.push_back(l.weights.rows());
  return d;
}

std::size_t TinyNet::input_dim() const {
  return layers_.empty() ? 0 : layers_.front().weights.cols();
}

std::size_t TinyNet::num_classes() const {
  return layers_.empty() ? 0 : layers_.back().weights.rows();
}

std::size_t TinyNet::feature_dim() const {
  return layers_.empty() ? 0 : layers_.back().weights.cols();
}

void TinyNet::check_input(const Vector& x) const {
  if (x.size() != input_dim()) {
    throw Error(ErrorCode::kShape, "input has dimension " + std::to_string(x.size()) +
                                       ", network expects " + std::to_string(input_dim()));
  }
}

TinyNet::Trace TinyNet::forward_trace(const Vector& x) const {
  check_input(x);
  Trace t;
  t.activations.push_back(x);
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    Vector pre = linalg::multiply(layers_[l].weights, t.activations.back());
    for (std::size_t i = 0; i < pre.size(); ++i) pre[i] += layers_[l].bias[i];
    if (l + 1 == layers_.size()) {
      t.logits = pre;
      t.pre_activations.push_back(std::move(pre));
    } else {
      Vector act = pre;
      for (double& a : act) a = a > 0.0 ? a : 0.0;
      t.pre_activations.push_back(std::move(pre));
      t.activations.push_back(std::move(act));
    }
  }
  return t;
}

Vector TinyNet::forward(const Vector& x) const { return forward_trace(x).logits; }

Vector TinyNet::penultimate(const Vector& x) const {
  Trace t = forward_trace(x);
  return std::move(t.activations.back());
}

Vector TinyNet::input_gradient(const Vector& x, double temperature) const {
  if (!(temperature > 0.0)) throw Error(ErrorCode::kInvalidArgument, "temperature must be positive");
  const Trace t = forward_trace(x);
  const std::size_t top = argmax(t.logits.span());
  Vector upstream = softmax(t.logits.span(), temperature);
  upstream[top] -= 1.0;
  for (double& g : upstream) g /= temperature;
  return backward(layers_, t, std::move(upstream), nullptr);
}

Vector cross_entropy_logit_gradient(std::span<const double> logits, std::size_t label) {
  Vector g = softmax(logits, 1.0);
  g[label] -= 1.0;
  return g;
}

double cross_entropy(std::span<const double> logits, std::size_t label) {
  const double m = *std::max_element(logits.begin(), logits.end());
  double sum = 0.0;
  for (double f : logits) sum += std::exp(f - m);
  return m + std::log(sum) - logits[label];
}

TrainResult train(TinyNet model, const Matrix& inputs, std::span<const std::size_t> labels,
                  const TrainConfig& cfg) {
  if (inputs.rows() == 0) throw Error(ErrorCode::kInvalidInput, "training data is empty");
  if (labels.size() != inputs.rows()) throw Error(ErrorCode::kShape, "label count mismatch");
  if (!(cfg.learning_rate > 0.0) || cfg.batch_size == 0) {
    throw Error(ErrorCode::kInvalidArgument, "learning rate and batch size must be positive");
  }
  const std::size_t classes = model.num_classes();
  for (std::size_t y : labels) {
    if (y >= classes) throw Error(ErrorCode::kInvalidInput, "label out of range");
  }

  const std::size_t n = inputs.rows();
  Rng rng(cfg.seed);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);

  TrainResult result{std::move(model), {}};
  auto& layers = result.model.mutable_layers();
  std::vector<Layer> grads;
  for (const auto& l : layers) grads.push_back({Matrix(l.weights.rows(), l.weights.cols()), Vector(l.bias.size())});

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    rng.shuffle(std::span<std::size_t>(order));
    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < n; start += cfg.batch_size) {
      const std::size_t stop = std::min(n, start + cfg.batch_size);
      for (auto& g : grads) {
        std::fill(g.weights.data(), g.weights.data() + g.weights.values().size(), 0.0);
        std::fill(g.bias.begin(), g.bias.end(), 0.0);
      }
      for (std::size_t b = start; b < stop; ++b) {
        const std::size_t idx = order[b];
        const auto row = inputs.row(idx);
        const Vector x(std::vector<double>(row.begin(), row.end()));
        const TinyNet::Trace t = result.model.forward_trace(x);
        epoch_loss += cross_entropy(t.logits.span(), labels[idx]);
        backward(layers, t, cross_entropy_logit_gradient(t.logits.span(), labels[idx]), &grads);
      }
      const double step = cfg.learning_rate / static_cast<double>(stop - start);
      for (std::size_t l = 0; l < layers.size(); ++l) {
        double* w = layers[l].weights.data();
        const double* gw = grads[l].weights.data();
        for (std::size_t i = 0; i < layers[l].weights.values().size(); ++i) w[i] -= step * gw[i];
        for (std::size_t i = 0; i < layers[l].bias.size(); ++i) layers[l].bias[i] -= step * grads[l].bias[i];
      }
    }
    result.loss_trace.push_back(epoch_loss / static_cast<double>(n));
  }
  return result;
}

double accuracy(const TinyNet& model, const Matrix& inputs, std::span<const std::size_t> labels) {
  if (inputs.rows() == 0) return 0.0;
  std::size_t correct = 0;
  for (std::size_t i = 0; i < inputs.rows(); ++i) {
    const auto row = inputs.row(i);
    const Vector f = model.forward(Vector(std::vector<double>(row.begin(), row.end())));
    if (argmax(f.span()) == labels[i]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(inputs.rows());
}

}  // namespace etlt::tinynet
