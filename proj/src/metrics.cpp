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

#include "etlt/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>

#include "etlt/error.hpp"

namespace etlt::metrics {
namespace {

struct Split {
  std::vector<double> in;   // ascending
  std::vector<double> out;  // ascending
};

Split split_checked(const LabeledScores& ls) {
  if (ls.scores.size() != ls.labels.size()) {
    throw Error(ErrorCode::kShape, "scores and labels differ in length");
  }
  Split s;
  for (std::size_t i = 0; i < ls.scores.size(); ++i) {
    if (!std::isfinite(ls.scores[i])) throw Error(ErrorCode::kInvalidInput, "non-finite score");
    (ls.labels[i] == Origin::kIn ? s.in : s.out).push_back(ls.scores[i]);
  }
  if (s.in.empty() || s.out.empty()) {
    throw Error(ErrorCode::kUndefinedMetric, "metric needs both in- and out-of-distribution samples");
  }
  std::sort(s.in.begin(), s.in.end());
  std::sort(s.out.begin(), s.out.end());
  return s;
}

// Number of elements of an ascending vector that are ≥ t.
std::size_t count_at_least(const std::vector<double>& sorted, double t) {
  return static_cast<std::size_t>(sorted.end() - std::lower_bound(sorted.begin(), sorted.end(), t));
}

}  // namespace

std::size_t LabeledScores::count(Origin o) const {
  return static_cast<std::size_t>(std::count(labels.begin(), labels.end(), o));
}

LabeledScores make_labeled(std::span<const double> scores, std::span<const Origin> labels) {
  if (scores.size() != labels.size()) throw Error(ErrorCode::kShape, "scores and labels differ in length");
  return {{scores.begin(), scores.end()}, {labels.begin(), labels.end()}};
}

LabeledScores from_sets(std::span<const double> in_scores, std::span<const double> out_scores) {
  LabeledScores ls;
  for (double s : in_scores) {
    ls.scores.push_back(s);
    ls.labels.push_back(Origin::kIn);
  }
  for (double s : out_scores) {
    ls.scores.push_back(s);
    ls.labels.push_back(Origin::kOut);
  }
  return ls;
}

double auroc(const LabeledScores& ls) {
  const Split s = split_checked(ls);
  // Twice the U statistic, kept integral until the final division.
  double twice_u = 0.0;
  for (double x : s.in) {
    const auto lo = std::lower_bound(s.out.begin(), s.out.end(), x);
    const auto hi = std::upper_bound(lo, s.out.end(), x);
    const auto below = static_cast<double>(lo - s.out.begin());
    const auto ties = static_cast<double>(hi - lo);
    twice_u += 2.0 * below + ties;
  }
  return twice_u / (2.0 * static_cast<double>(s.in.size()) * static_cast<double>(s.out.size()));
}

double fpr_at_tpr(const LabeledScores& ls, double tpr_target) {
  if (!(tpr_target > 0.0) || !(tpr_target <= 1.0)) {
    throw Error(ErrorCode::kInvalidArgument, "tpr target must lie in (0, 1]");
  }
  const Split s = split_checked(ls);
  const std::size_t n_in = s.in.size();
  const auto n = static_cast<double>(n_in);
  // Smallest k with k / n_in ≥ target; the threshold is the k-th largest in-score.
  std::size_t k = 1;
  while (k < n_in && static_cast<double>(k) / n < tpr_target) ++k;
  const double threshold = s.in[n_in - k];
  return static_cast<double>(count_at_least(s.out, threshold)) / static_cast<double>(s.out.size());
}

double aupr(const LabeledScores& ls) {
  const Split s = split_checked(ls);
  std::vector<double> thresholds(s.in);
  thresholds.insert(thresholds.end(), s.out.begin(), s.out.end());
  std::sort(thresholds.begin(), thresholds.end(), std::greater<>());
  thresholds.erase(std::unique(thresholds.begin(), thresholds.end()), thresholds.end());

  const auto n_in = static_cast<double>(s.in.size());
  double area = 0.0;
  double prev_recall = 0.0;
  for (double t : thresholds) {
    const auto tp = static_cast<double>(count_at_least(s.in, t));
    const auto fp = static_cast<double>(count_at_least(s.out, t));
    const double recall = tp / n_in;
    const double precision = tp / (tp + fp);
    area += (recall - prev_recall) * precision;
    prev_recall = recall;
  }
  return area;
}

EvalReport evaluate(const LabeledScores& ls) {
  EvalReport r;
  r.fpr95 = fpr_at_tpr(ls, 0.95);
  r.auroc = auroc(ls);
  r.aupr = aupr(ls);
  r.n_in = ls.count(Origin::kIn);
  r.n_out = ls.count(Origin::kOut);
  return r;
}

std::vector<RocPoint> roc_curve(const LabeledScores& ls) {
  const Split s = split_checked(ls);
  std::vector<double> thresholds(s.in);
  thresholds.insert(thresholds.end(), s.out.begin(), s.out.end());
  std::sort(thresholds.begin(), thresholds.end(), std::greater<>());
  thresholds.erase(std::unique(thresholds.begin(), thresholds.end()), thresholds.end());
  std::vector<RocPoint> points;
  points.reserve(thresholds.size());
  for (double t : thresholds) {
    points.push_back({t, static_cast<double>(count_at_least(s.out, t)) / static_cast<double>(s.out.size()),
                      static_cast<double>(count_at_least(s.in, t)) / static_cast<double>(s.in.size())});
  }
  return points;
}

}  // namespace etlt::metrics
