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

#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "etlt/classifier.hpp"
#include "etlt/linalg.hpp"

namespace etlt::tinynet {

// Affine layer y = W·x + b with W stored out × in.
struct Layer {
  linalg::Matrix weights;
  linalg::Vector bias;

  bool operator==(const Layer&) const = default;
};

// Fully connected ReLU network ending in raw logits. The activation of the
// last hidden layer is the "feature" handed to the calibrators.
class TinyNet : public Classifier {
 public:
  TinyNet() = default;
  explicit TinyNet(std::vector<Layer> layers);

  // Glorot-uniform weights, zero biases. dims = {d_in, h1, ..., C}.
  static TinyNet create(std::span<const std::size_t> dims, std::uint64_t seed);

  std::vector<std::size_t> dims() const;
  const std::vector<Layer>& layers() const noexcept { return layers_; }
  std::vector<Layer>& mutable_layers() noexcept { return layers_; }
  std::size_t num_classes() const;
  std::size_t feature_dim() const;

  std::size_t input_dim() const override;
  linalg::Vector logits(const linalg::Vector& x) const override { return forward(x); }
  linalg::Vector neg_log_msp_gradient(const linalg::Vector& x, double temperature) const override {
    return input_gradient(x, temperature);
  }

  struct Trace {
    std::vector<linalg::Vector> activations;  // [0] = x, then post-ReLU hidden outputs
    std::vector<linalg::Vector> pre_activations;  // one per layer
    linalg::Vector logits;
  };

  linalg::Vector forward(const linalg::Vector& x) const;
  Trace forward_trace(const linalg::Vector& x) const;
  // Last hidden activation; equals x when the network has no hidden layer.
  linalg::Vector penultimate(const linalg::Vector& x) const;

  // Exact ∇ₓ(−log softmax(f(x)/T)_ŷ), ŷ = argmax f(x) fixed. ReLU
  // subgradient is 0 at exactly 0.
  linalg::Vector input_gradient(const linalg::Vector& x, double temperature = 1.0) const;

  bool operator==(const TinyNet& other) const { return layers_ == other.layers_; }

 private:
  void check_input(const linalg::Vector& x) const;

  std::vector<Layer> layers_;
};

// Gradient of the cross-entropy loss w.r.t. the logits: softmax(f) − onehot.
linalg::Vector cross_entropy_logit_gradient(std::span<const double> logits, std::size_t label);
double cross_entropy(std::span<const double> logits, std::size_t label);

struct TrainConfig {
  double learning_rate = 0.1;
  std::size_t epochs = 100;
  std::size_t batch_size = 32;
  std::uint64_t seed = 0;
};

struct TrainResult {
  TinyNet model;
  std::vector<double> loss_trace;  // mean cross-entropy per epoch
};

// Minibatch SGD on cross-entropy; sample order reshuffled each epoch.
TrainResult train(TinyNet model, const linalg::Matrix& inputs, std::span<const std::size_t> labels,
                  const TrainConfig& cfg);

double accuracy(const TinyNet& model, const linalg::Matrix& inputs,
                std::span<const std::size_t> labels);

}  // namespace etlt::tinynet
