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

#include <cstddef>

#include "etlt/linalg.hpp"

namespace etlt {

// A classifier that maps an input vector to raw logits. Models that can
// backpropagate override neg_log_msp_gradient; the default throws
// ErrorCode::kUnsupported.
class Classifier {
 public:
  virtual ~Classifier() = default;

  virtual std::size_t input_dim() const = 0;
  virtual linalg::Vector logits(const linalg::Vector& x) const = 0;

  // ∇ₓ of −log softmax(f(x)/T)_ŷ with ŷ = argmax f(x) held fixed.
  virtual linalg::Vector neg_log_msp_gradient(const linalg::Vector& x, double temperature) const;
};

}  // namespace etlt
