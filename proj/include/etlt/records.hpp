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
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "etlt/linalg.hpp"

namespace etlt {

enum class Origin : std::uint8_t { kIn = 0, kOut = 1 };

// One test sample: penultimate feature z, classifier logits f and where it
// came from. `input` holds the raw classifier input when ODIN has to be
// recomputed through an in-process model; `perturbed_logits` holds logits
// of an input already perturbed upstream.
struct FeatureRecord {
  linalg::Vector feature;
  std::optional<linalg::Vector> logits;
  Origin origin = Origin::kIn;
  std::string source_tag;
  std::optional<linalg::Vector> input;
  std::optional<linalg::Vector> perturbed_logits;

  bool operator==(const FeatureRecord&) const = default;
};

// Stacks features row-wise; all records must share the feature dimension.
linalg::Matrix feature_matrix(std::span<const FeatureRecord> records);
std::vector<Origin> origins(std::span<const FeatureRecord> records);

}  // namespace etlt
