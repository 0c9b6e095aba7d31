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

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "etlt/classifier.hpp"
#include "etlt/linalg.hpp"
#include "etlt/records.hpp"

// Base OOD scores. Every scorer is oriented so that a higher value means
// "more in-distribution".
namespace etlt::scorers {

enum class ScorerKind { kMsp, kEnergy, kKl, kOdin };

struct ScorerConfig {
  ScorerKind kind = ScorerKind::kMsp;
  double temperature = 1.0;
  double epsilon = 0.0;  // ODIN only

  static ScorerConfig msp(double t = 1.0) { return {ScorerKind::kMsp, t, 0.0}; }
  static ScorerConfig energy(double t = 1.0) { return {ScorerKind::kEnergy, t, 0.0}; }
  static ScorerConfig kl(double t = 1.0) { return {ScorerKind::kKl, t, 0.0}; }
  static ScorerConfig odin(double t = 1000.0, double eps = 0.0) {
    return {ScorerKind::kOdin, t, eps};
  }

  bool operator==(const ScorerConfig&) const = default;
};

using ScoreVector = linalg::Vector;

const char* kind_name(ScorerKind kind);
ScorerKind parse_kind(const std::string& name);
// Stable human-readable label, e.g. "msp(T=1)" or "odin(T=1000,eps=0.0024)".
std::string label(const ScorerConfig& cfg);
void validate(const ScorerConfig& cfg);

// Stabilized T·logsumexp(f/T).
double logsumexp(std::span<const double> logits, double temperature);

double score_msp(std::span<const double> logits, double temperature = 1.0);
double score_energy(std::span<const double> logits, double temperature = 1.0);
// logsumexp(f/T) − mean(f)/T − log C, clamped at zero.
double score_kl(std::span<const double> logits, double temperature = 1.0);
// MSP of x̃ = x − ε·sign(∇ₓ(−log MSP(x))). No clipping of x̃.
double score_odin(const linalg::Vector& x, const Classifier& model, double temperature,
                  double epsilon);

// Applies cfg to every record in order. ODIN uses, in priority order:
// MSP of the logits when ε = 0, the record's perturbed logits, then the
// model applied to the record's input.
ScoreVector score_batch(std::span<const FeatureRecord> records, const ScorerConfig& cfg,
                        const Classifier* model = nullptr);

}  // namespace etlt::scorers
