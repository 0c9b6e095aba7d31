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

#include "etlt/scorers.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "etlt/error.hpp"

namespace etlt {

linalg::Vector Classifier::neg_log_msp_gradient(const linalg::Vector&, double) const {
  throw Error(ErrorCode::kUnsupported, "classifier does not provide input gradients");
}

namespace scorers {
namespace {

void check_logits(std::span<const double> logits, double temperature) {
  if (logits.size() < 2) {
    throw Error(ErrorCode::kInvalidInput, "scorers need at least two classes");
  }
  if (!linalg::all_finite(logits)) {
    throw Error(ErrorCode::kInvalidInput, "logits contain non-finite entries");
  }
  if (!(temperature > 0.0) || !std::isfinite(temperature)) {
    throw Error(ErrorCode::kInvalidArgument, "temperature must be positive and finite");
  }
}

// Σ exp((f_i − max)/T); always ≥ 1.
double shifted_partition(std::span<const double> logits, double max_logit, double temperature) {
  double sum = 0.0;
  for (double f : logits) sum += std::exp((f - max_logit) / temperature);
  return sum;
}

std::string format_number(double x) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%g", x);
  return buf;
}

}  // namespace

const char* kind_name(ScorerKind kind) {
  switch (kind) {
    case ScorerKind::kMsp: return "msp";
    case ScorerKind::kEnergy: return "energy";
    case ScorerKind::kKl: return "kl";
    case ScorerKind::kOdin: return "odin";
  }
  return "?";
}

ScorerKind parse_kind(const std::string& name) {
  if (name == "msp") return ScorerKind::kMsp;
  if (name == "energy") return ScorerKind::kEnergy;
  if (name == "kl") return ScorerKind::kKl;
  if (name == "odin") return ScorerKind::kOdin;
  throw Error(ErrorCode::kConfiguration, "unknown scorer '" + name + "'");
}

std::string label(const ScorerConfig& cfg) {
  std::string out = kind_name(cfg.kind);
  out += "(T=" + format_number(cfg.temperature);
  if (cfg.kind == ScorerKind::kOdin) out += ",eps=" + format_number(cfg.epsilon);
  return out + ")";
}

void validate(const ScorerConfig& cfg) {
  if (!(cfg.temperature > 0.0) || !std::isfinite(cfg.temperature)) {
    throw Error(ErrorCode::kConfiguration, "temperature must be positive");
  }
  if (!(cfg.epsilon >= 0.0) || !std::isfinite(cfg.epsilon)) {
    throw Error(ErrorCode::kConfiguration, "epsilon must be nonnegative");
  }
}

double logsumexp(std::span<const double> logits, double temperature) {
  check_logits(logits, temperature);
  const double max_logit = *std::max_element(logits.begin(), logits.end());
  return max_logit + temperature * std::log(shifted_partition(logits, max_logit, temperature));
}

double score_msp(std::span<const double> logits, double temperature) {
  check_logits(logits, temperature);
  const double max_logit = *std::max_element(logits.begin(), logits.end());
  return 1.0 / shifted_partition(logits, max_logit, temperature);
}

double score_energy(std::span<const double> logits, double temperature) {
  return logsumexp(logits, temperature);
}

double score_kl(std::span<const double> logits, double temperature) {
  check_logits(logits, temperature);
  const double max_logit = *std::max_element(logits.begin(), logits.end());
  double mean = 0.0;
  for (double f : logits) mean += f;
  mean /= static_cast<double>(logits.size());
  const double value = (max_logit - mean) / temperature +
                       std::log(shifted_partition(logits, max_logit, temperature)) -
                       std::log(static_cast<double>(logits.size()));
  return std::max(0.0, value);
}

double score_odin(const linalg::Vector& x, const Classifier& model, double temperature,
                  double epsilon) {
  if (!(epsilon >= 0.0) || !std::isfinite(epsilon)) {
    throw Error(ErrorCode::kInvalidArgument, "epsilon must be nonnegative");
  }
  if (x.size() != model.input_dim()) {
    throw Error(ErrorCode::kShape, "input dimension " + std::to_string(x.size()) +
                                       " does not match model input " +
                                       std::to_string(model.input_dim()));
  }
  if (epsilon == 0.0) return score_msp(model.logits(x).span(), temperature);

  const linalg::Vector grad = model.neg_log_msp_gradient(x, temperature);
  linalg::Vector perturbed = x;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double s = grad[i] > 0.0 ? 1.0 : (grad[i] < 0.0 ? -1.0 : 0.0);
    perturbed[i] -= epsilon * s;
  }
  return score_msp(model.logits(perturbed).span(), temperature);
}

ScoreVector score_batch(std::span<const FeatureRecord> records, const ScorerConfig& cfg,
                        const Classifier* model) {
  validate(cfg);
  ScoreVector out(records.size());
  std::size_t classes = 0;
  for (std::size_t i = 0; i < records.size(); ++i) {
    const FeatureRecord& r = records[i];
    auto require_logits = [&](const std::optional<linalg::Vector>& logits,
                              const char* what) -> const linalg::Vector& {
      if (!logits) {
        throw Error(ErrorCode::kConfiguration, "record " + std::to_string(i) + " has no " + what +
                                                   " for scorer " + label(cfg));
      }
      if (classes == 0) classes = logits->size();
      if (logits->size() != classes) {
        throw Error(ErrorCode::kShape, "record " + std::to_string(i) + " has " +
                                           std::to_string(logits->size()) +
                                           " classes, expected " + std::to_string(classes));
      }
      return *logits;
    };

    switch (cfg.kind) {
      case ScorerKind::kMsp:
        out[i] = score_msp(require_logits(r.logits, "logits").span(), cfg.temperature);
        break;
      case ScorerKind::kEnergy:
        out[i] = score_energy(require_logits(r.logits, "logits").span(), cfg.temperature);
        break;
      case ScorerKind::kKl:
        out[i] = score_kl(require_logits(r.logits, "logits").span(), cfg.temperature);
        break;
      case ScorerKind::kOdin:
        if (cfg.epsilon == 0.0 && r.logits) {
          out[i] = score_msp(require_logits(r.logits, "logits").span(), cfg.temperature);
        } else if (r.perturbed_logits) {
          out[i] = score_msp(require_logits(r.perturbed_logits, "perturbed logits").span(),
                             cfg.temperature);
        } else if (model != nullptr && r.input) {
          out[i] = score_odin(*r.input, *model, cfg.temperature, cfg.epsilon);
        } else {
          throw Error(ErrorCode::kConfiguration,
                      "odin with epsilon > 0 needs a model and record inputs, or perturbed "
                      "logits (record " + std::to_string(i) + ")");
        }
        break;
    }
  }
  return out;
}

}  // namespace scorers
}  // namespace etlt
