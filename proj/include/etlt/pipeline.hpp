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
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "etlt/calibration.hpp"
#include "etlt/datasets.hpp"
#include "etlt/io.hpp"
#include "etlt/metrics.hpp"
#include "etlt/records.hpp"
#include "etlt/scorers.hpp"
#include "etlt/tinynet.hpp"

namespace etlt::pipeline {

// ---------------------------------------------------------------------------
// Data worlds: one in-distribution pool plus named OOD pools.
// ---------------------------------------------------------------------------

struct World {
  std::string in_tag;
  std::vector<FeatureRecord> in_pool;
  datasets::Pools out_pools;
  std::optional<tinynet::TinyNet> model;  // needed for ODIN with eps > 0 on raw inputs
};

// Gaussian class clusters in input space, a TinyNet trained on them, and OOD
// sources pushed through the same net. Features are penultimate activations.
//   "far"      one cluster well outside the class means
//   "near"     a wide cluster at the centroid of the class means
//   "uniform"  uniform noise in [0,1]^d
//   "gaussian" N(0.5, sigma) noise clipped to [0,1]^d
struct SyntheticWorldSpec {
  std::size_t input_dim = 8;
  std::size_t classes = 4;
  std::vector<std::size_t> hidden{32, 16};
  double class_spread = 3.0;
  double class_stddev = 1.0;
  std::size_t train_per_class = 200;
  std::size_t pool_size = 1000;  // per source
  std::size_t epochs = 100;
  double learning_rate = 0.05;
  double noise_sigma = 1.0;
  std::uint64_t seed = 0;
};

World build_synthetic_world(const SyntheticWorldSpec& spec);

// Splits records by origin; out records are pooled by source_tag. Untagged
// records fall back to "in" / "out".
World world_from_records(std::vector<FeatureRecord> records);
// Concatenates the records of every container, then splits as above. A
// "tinynet.dims" checkpoint in the first file becomes the world's model.
World load_world(const std::vector<std::filesystem::path>& paths);

// ---------------------------------------------------------------------------
// Plans.
// ---------------------------------------------------------------------------

struct OodSet {
  std::vector<datasets::OodSource> sources;  // weights normalized to sum 1
};

// "far", "far+near", "far:0.7+near:0.3".
OodSet parse_ood_set(const std::string& text);
// Sorted unique tags joined by '+'.
std::string ood_set_name(const OodSet& set);

struct MethodSpec {
  enum class Kind { kNone, kDlr, kRlr, kOnline };
  Kind kind = Kind::kNone;
  calibration::RlrConfig rlr;
  std::size_t batch_size = 0;  // online only; 0 = the whole set in one batch

  static MethodSpec none() { return {}; }
  static MethodSpec dlr() { return {Kind::kDlr, {}, 0}; }
  static MethodSpec rlr_with(calibration::RlrConfig cfg) { return {Kind::kRlr, cfg, 0}; }
  static MethodSpec online(std::size_t batch) { return {Kind::kOnline, {}, batch}; }
};

// "none", "dlr", "rlr(p=80,lambda=1e-05)", "online(b=32)", "online(b=all)".
std::string method_label(const MethodSpec& m);
// "none", "dlr", "rlr", "online:32", "online:all". RLR takes `rlr`.
MethodSpec parse_method(const std::string& text, const calibration::RlrConfig& rlr = {});
// "msp", "energy:2", "odin:1000:0.0024".
scorers::ScorerConfig parse_scorer(const std::string& text);

struct ExperimentPlan {
  SyntheticWorldSpec synthetic;
  std::vector<std::filesystem::path> import_paths;  // non-empty selects imported data

  std::vector<OodSet> ood_sets;
  std::vector<scorers::ScorerConfig> scorers;
  std::vector<MethodSpec> methods;
  calibration::PreprocessSpec preprocess;

  std::size_t repeats = 1;
  std::uint64_t seed = 0;  // repeat r mixes with seed + r
  double in_rate = 0.5;
  std::size_t total = 1000;  // 0 = every pooled record, no subsampling

  bool imported() const noexcept { return !import_paths.empty(); }
};

void validate(const ExperimentPlan& plan);

struct Cell {
  std::size_t repeat = 0;
  io::ResultsKey key;
  metrics::EvalReport report;
  std::size_t processed_dim = 0;
  bool exact_fit = false;  // samples ≤ processed dim
  double wall_seconds = 0.0;
};

struct RunResult {
  std::vector<Cell> cells;  // repeat-major, then OOD set, scorer, method
  io::ResultsTable table;
};

World build_world(const ExperimentPlan& plan);
RunResult run(const ExperimentPlan& plan);
RunResult run(const ExperimentPlan& plan, const World& world);

// Mean and sample stdev per key, sorted by key.
io::ResultsTable aggregate(const std::vector<Cell>& cells);

// Calibrated (or raw, for kNone) scores for one mixed set, in record order.
calibration::ScoreVector apply_method(const MethodSpec& method, const linalg::Matrix& features,
                                      const calibration::ScoreVector& scores,
                                      const calibration::PreprocessSpec& prep,
                                      std::uint64_t stream_seed);

// Per-cell rows without timing, one line per cell.
std::string render_cells_tsv(const RunResult& result);

// Flat key = value plan:
//   source = synthetic | import      import.paths = a.etlt,b.etlt
//   synthetic.{input_dim,classes,hidden,pool_size,train_per_class,epochs,seed,noise_sigma}
//   ood_sets = far;near;far+near     scorers = msp,energy,odin:1000:0.0024
//   methods = none,dlr,rlr,online:32,online:all
//   rlr.lambda, rlr.percentile, prep.unit_normalize, prep.pca_dim, prep.bias
//   repeats, seed, in_rate, total
ExperimentPlan plan_from_config(const io::KeyValueConfig& cfg);

// ---------------------------------------------------------------------------
// Sweeps.
// ---------------------------------------------------------------------------

// lo, lo + step, ..., hi computed on an integer grid so both ends appear once.
std::vector<double> rate_grid(double lo, double hi, double step);

struct RatePoint {
  double in_rate = 0.0;
  RunResult result;
};

std::vector<RatePoint> sweep_in_rate(const ExperimentPlan& base, const std::vector<double>& rates);
std::vector<RatePoint> sweep_in_rate(const ExperimentPlan& base, const World& world,
                                     const std::vector<double>& rates);

struct RepeatRule {
  double numerator = 1e5;
  std::size_t cap = 10000;

  std::size_t repeats_for(std::size_t m) const;
};

struct CountPoint {
  std::size_t in_count = 0;  // m
  std::size_t total = 0;
  std::size_t repeats = 0;
  bool exact_fit = false;
  RunResult result;
};

// m is the in-distribution count; total = round(m / in_rate).
std::vector<CountPoint> sweep_sample_count(const ExperimentPlan& base, const World& world,
                                           const std::vector<std::size_t>& counts,
                                           const RepeatRule& rule = {});

std::string render_rate_sweep_csv(const std::vector<RatePoint>& points);
std::string render_count_sweep_csv(const std::vector<CountPoint>& points);

// ---------------------------------------------------------------------------
// Linearity diagnostics.
// ---------------------------------------------------------------------------

struct LinearityReport {
  linalg::Matrix coords;           // n × 2 PCA coordinates (second column 0 when d = 1)
  linalg::Vector plane;            // [c1, c2, bias]: scores regressed on coords
  linalg::Vector fitted;           // DLR output on the full features
  double r2 = 0.0;                 // full-feature fit, clamped to [0, 1]
  double plane_r2 = 0.0;           // 2-D fit, clamped to [0, 1]
  std::optional<double> probe_accuracy;  // best threshold on `fitted`, higher = in
  std::string warning;
};

LinearityReport diagnose_linearity(const linalg::Matrix& features,
                                   const calibration::ScoreVector& scores,
                                   std::span<const Origin> labels);

// pc1,pc2,score,fitted,label
std::string render_linearity_csv(const LinearityReport& report,
                                 const calibration::ScoreVector& scores,
                                 std::span<const Origin> labels);

// Coefficient of determination clamped to [0, 1]. A constant target gives 1
// when the fit is exact and 0 otherwise.
double r_squared(const calibration::ScoreVector& target, const calibration::ScoreVector& fitted);

}  // namespace etlt::pipeline
