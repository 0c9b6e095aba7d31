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
#include <span>
#include <vector>

#include "etlt/records.hpp"

// Detection metrics with in-distribution as the positive class: a sample is
// accepted as "in" when its score is ≥ the threshold.
namespace etlt::metrics {

struct LabeledScores {
  std::vector<double> scores;
  std::vector<Origin> labels;

  std::size_t count(Origin o) const;
};

struct EvalReport {
  double fpr95 = 0.0;
  double auroc = 0.0;
  double aupr = 0.0;
  std::size_t n_in = 0;
  std::size_t n_out = 0;
};

LabeledScores make_labeled(std::span<const double> scores, std::span<const Origin> labels);
LabeledScores from_sets(std::span<const double> in_scores, std::span<const double> out_scores);

// P(score_in > score_out) + ½·P(tie).
double auroc(const LabeledScores& ls);
// Fraction of out-samples accepted at the largest observed in-score
// threshold that keeps at least tpr_target of the in-samples.
double fpr_at_tpr(const LabeledScores& ls, double tpr_target = 0.95);
// Step-wise (non-interpolated) area under precision–recall over descending
// unique thresholds.
double aupr(const LabeledScores& ls);

EvalReport evaluate(const LabeledScores& ls);

struct RocPoint {
  double threshold;
  double fpr;
  double tpr;
};
// One point per unique threshold, descending.
std::vector<RocPoint> roc_curve(const LabeledScores& ls);

}  // namespace etlt::metrics
