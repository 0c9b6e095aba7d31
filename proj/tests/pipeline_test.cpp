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

#include <gtest/gtest.h>

#include <cmath>

#include "etlt/error.hpp"
#include "etlt/pipeline.hpp"
#include "test_util.hpp"

using namespace etlt;
using namespace etlt::pipeline;
using linalg::Matrix;
using linalg::Vector;

namespace {

ErrorCode code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  return ErrorCode::kUnsupported;
}

SyntheticWorldSpec small_spec() {
  SyntheticWorldSpec s;
  s.train_per_class = 60;
  s.pool_size = 300;
  s.epochs = 20;
  s.seed = 5;
  return s;
}

const World& shared_world() {
  static const World world = build_synthetic_world(small_spec());
  return world;
}

ExperimentPlan small_plan() {
  ExperimentPlan plan;
  plan.synthetic = small_spec();
  plan.ood_sets = {parse_ood_set("far")};
  plan.scorers = {scorers::ScorerConfig::energy()};
  plan.methods = {MethodSpec::none()};
  plan.total = 200;
  plan.seed = 11;
  return plan;
}

// In records carry random logits, out records the same kind of logits
// shifted down by `delta`.
World shifted_world(double delta) {
  World w;
  w.in_tag = "in";
  for (std::size_t i = 0; i < 200; ++i) {
    FeatureRecord r;
    r.feature = testutil::random_vector(3, 10 + i);
    r.logits = testutil::random_vector(4, 1000 + i);
    r.source_tag = "in";
    w.in_pool.push_back(r);
    FeatureRecord o;
    o.feature = testutil::random_vector(3, 20000 + i);
    o.logits = testutil::random_vector(4, 30000 + i);
    for (double& x : *o.logits) x -= delta;
    o.origin = Origin::kOut;
    o.source_tag = "shift";
    w.out_pools["shift"].push_back(o);
  }
  return w;
}

}  // namespace

TEST(SyntheticWorld, Shape) {
  const World& w = shared_world();
  EXPECT_EQ(w.in_tag, "clusters");
  EXPECT_EQ(w.in_pool.size(), 300u);
  for (const char* tag : {"far", "near", "uniform", "gaussian"}) {
    ASSERT_EQ(w.out_pools.count(tag), 1u) << tag;
    EXPECT_EQ(w.out_pools.at(tag).size(), 300u);
    const auto& r = w.out_pools.at(tag).front();
    EXPECT_EQ(r.origin, Origin::kOut);
    EXPECT_EQ(r.feature.size(), 16u);
    EXPECT_EQ(r.logits->size(), 4u);
    EXPECT_EQ(*r.logits, w.model->forward(*r.input));
    EXPECT_EQ(r.feature, w.model->penultimate(*r.input));
  }
}

TEST(SyntheticWorld, Deterministic) {
  const World again = build_synthetic_world(small_spec());
  EXPECT_EQ(again.in_pool, shared_world().in_pool);
  EXPECT_EQ(again.out_pools, shared_world().out_pools);
  EXPECT_EQ(*again.model, *shared_world().model);
}

TEST(Run, NoneMatchesDirectComposition) {
  const ExperimentPlan plan = small_plan();
  const RunResult result = run(plan, shared_world());
  ASSERT_EQ(result.cells.size(), 1u);

  const auto records = datasets::mix(shared_world().in_pool, shared_world().out_pools,
                                     {0.5, 200, 11, {{"far", 1.0}}});
  const auto scores = scorers::score_batch(records, scorers::ScorerConfig::energy());
  const auto labels = origins(records);
  const auto direct = metrics::evaluate(metrics::make_labeled(scores.span(), labels));
  EXPECT_EQ(result.cells[0].report.auroc, direct.auroc);
  EXPECT_EQ(result.cells[0].report.fpr95, direct.fpr95);
  EXPECT_EQ(result.cells[0].report.aupr, direct.aupr);
  EXPECT_EQ(result.cells[0].key.method, "none");
  EXPECT_EQ(result.cells[0].key.scorer, "energy(T=1)");
  EXPECT_EQ(result.cells[0].processed_dim, 17u);
  EXPECT_FALSE(result.cells[0].exact_fit);
}

TEST(ApplyMethod, OnlineSingleBatchEqualsDlr) {
  const Matrix x = testutil::random_matrix(300, 12, 1);
  const Vector s = testutil::random_vector(300, 2);
  const auto dlr = apply_method(MethodSpec::dlr(), x, s, {}, 0);
  const auto online = apply_method(MethodSpec::online(0), x, s, {}, 0);
  double scale = 0.0;
  for (double v : dlr) scale = std::max(scale, std::abs(v));
  EXPECT_LE(testutil::max_abs_diff(dlr, online), 1e-10 * scale);
  EXPECT_EQ(apply_method(MethodSpec::none(), x, s, {}, 0), s);
}

TEST(ApplyMethod, OnlineBatchesCoverEveryRecord) {
  const Matrix x = testutil::random_matrix(100, 4, 3);
  const Vector s = testutil::random_vector(100, 4);
  const auto out = apply_method(MethodSpec::online(16), x, s, {}, 9);
  for (double v : out) EXPECT_TRUE(std::isfinite(v));
  EXPECT_EQ(out, apply_method(MethodSpec::online(16), x, s, {}, 9));
}

TEST(Run, RepeatsAggregateMeanAndSampleStdev) {
  ExperimentPlan plan = small_plan();
  plan.repeats = 10;
  plan.methods = {MethodSpec::none(), MethodSpec::dlr()};
  const RunResult result = run(plan, shared_world());
  ASSERT_EQ(result.cells.size(), 20u);
  ASSERT_EQ(result.table.rows.size(), 2u);
  for (const auto& row : result.table.rows) {
    std::vector<double> v;
    for (const auto& c : result.cells)
      if (c.key == row.key) v.push_back(c.report.auroc);
    ASSERT_EQ(v.size(), 10u);
    double mean = 0.0;
    for (double a : v) mean += a / 10.0;
    double ss = 0.0;
    for (double a : v) ss += (a - mean) * (a - mean);
    EXPECT_NEAR(row.auroc.mean, mean, 1e-12);
    EXPECT_NEAR(row.auroc.stdev, std::sqrt(ss / 9.0), 1e-12);
    EXPECT_EQ(row.repeats, 10u);
  }
  EXPECT_EQ(result.table.rows[0].key.method, "dlr");
}

TEST(Run, Deterministic) {
  ExperimentPlan plan = small_plan();
  plan.repeats = 2;
  plan.ood_sets = {parse_ood_set("far"), parse_ood_set("near+uniform")};
  plan.methods = {MethodSpec::none(), MethodSpec::dlr(), MethodSpec::online(32)};
  const auto a = run(plan, shared_world());
  const auto b = run(plan, shared_world());
  EXPECT_EQ(render_cells_tsv(a), render_cells_tsv(b));
  EXPECT_EQ(io::render_tsv(a.table), io::render_tsv(b.table));
  EXPECT_EQ(a.cells[3].key.ood_dataset, "near+uniform");
}

TEST(Run, TotalZeroUsesEveryPooledRecord) {
  ExperimentPlan plan = small_plan();
  plan.total = 0;
  const auto result = run(plan, shared_world());
  EXPECT_EQ(result.cells[0].report.n_in, 300u);
  EXPECT_EQ(result.cells[0].report.n_out, 300u);
}

TEST(Run, MissingLogitsNamesTheCell) {
  World w = shifted_world(0.0);
  for (auto& r : w.in_pool) r.logits.reset();
  try {
    ExperimentPlan plan = small_plan();
    plan.ood_sets = {parse_ood_set("shift")};
    run(plan, w);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kConfiguration);
    const std::string what = e.what();
    EXPECT_NE(what.find("cell (in, shift, energy(T=1))"), std::string::npos) << what;
  }
}

TEST(Run, MissingPoolIsInsufficientData) {
  ExperimentPlan plan = small_plan();
  plan.ood_sets = {parse_ood_set("nowhere")};
  EXPECT_EQ(code_of([&] { run(plan, shared_world()); }), ErrorCode::kInsufficientData);
}

TEST(Run, AurocNondecreasingAsOutLogitsDrop) {
  ExperimentPlan plan = small_plan();
  plan.ood_sets = {parse_ood_set("shift")};
  double prev = -1.0;
  for (double delta : {0.0, 0.25, 0.5, 1.0, 2.0, 4.0}) {
    const double a = run(plan, shifted_world(delta)).cells[0].report.auroc;
    EXPECT_GE(a, prev) << delta;
    prev = a;
  }
  EXPECT_EQ(prev, 1.0);
}

TEST(Sweep, SingleRateEqualsRun) {
  const ExperimentPlan plan = small_plan();
  const auto points = sweep_in_rate(plan, shared_world(), {0.5});
  ASSERT_EQ(points.size(), 1u);
  EXPECT_EQ(render_cells_tsv(points[0].result), render_cells_tsv(run(plan, shared_world())));
  const std::string csv = render_rate_sweep_csv(points);
  EXPECT_EQ(io::split(csv, '\n').size(), 2u);
}

TEST(Sweep, RateGridEndpointsOnce) {
  const auto g = rate_grid(0.05, 0.95, 0.05);
  ASSERT_EQ(g.size(), 19u);
  EXPECT_EQ(g.front(), 0.05);
  EXPECT_EQ(g.back(), 0.95);
  for (std::size_t i = 1; i < g.size(); ++i) EXPECT_NEAR(g[i] - g[i - 1], 0.05, 1e-12);
  EXPECT_EQ(code_of([] { rate_grid(0.1, 0.9, 0.0); }), ErrorCode::kInvalidArgument);
}

TEST(Sweep, RatesChangeCounts) {
  const auto points = sweep_in_rate(small_plan(), shared_world(), {0.1, 0.9});
  EXPECT_EQ(points[0].result.cells[0].report.n_in, 20u);
  EXPECT_EQ(points[1].result.cells[0].report.n_in, 180u);
}

TEST(Sweep, RepeatRule) {
  EXPECT_EQ(RepeatRule{}.repeats_for(10000), 10u);
  EXPECT_EQ(RepeatRule{}.repeats_for(1), 10000u);
  EXPECT_EQ(RepeatRule{}.repeats_for(300000), 1u);
  EXPECT_EQ(RepeatRule{}.repeats_for(3), 10000u);
  EXPECT_EQ(RepeatRule{}.repeats_for(30000), 4u);
}

TEST(Sweep, SampleCountMarksExactFit) {
  ExperimentPlan plan = small_plan();
  plan.methods = {MethodSpec::dlr()};
  const auto points = sweep_sample_count(plan, shared_world(), {4, 50}, RepeatRule{10, 3});
  ASSERT_EQ(points.size(), 2u);
  EXPECT_EQ(points[0].total, 8u);
  EXPECT_TRUE(points[0].exact_fit);
  EXPECT_EQ(points[0].repeats, 3u);
  EXPECT_EQ(points[0].result.cells.size(), 3u);
  EXPECT_TRUE(points[0].result.cells[0].exact_fit);
  EXPECT_EQ(points[1].total, 100u);
  EXPECT_FALSE(points[1].exact_fit);
  EXPECT_EQ(points[1].repeats, 1u);
  const auto lines = io::split(render_count_sweep_csv(points), '\n');
  EXPECT_EQ(lines[1].substr(0, 9), "4,8,3,1,c");
}

TEST(Parse, OodSets) {
  const OodSet s = parse_ood_set("near:0.3+far:0.7");
  ASSERT_EQ(s.sources.size(), 2u);
  EXPECT_NEAR(s.sources[0].weight, 0.3, 1e-15);
  EXPECT_EQ(ood_set_name(s), "far+near");
  EXPECT_NEAR(parse_ood_set("far+near").sources[1].weight, 0.5, 1e-15);
  EXPECT_EQ(code_of([] { parse_ood_set(""); }), ErrorCode::kConfiguration);
  EXPECT_EQ(code_of([] { parse_ood_set("far:-1"); }), ErrorCode::kConfiguration);
  EXPECT_EQ(code_of([] { parse_ood_set("far:x"); }), ErrorCode::kConfiguration);
}

TEST(Parse, MethodsAndScorers) {
  EXPECT_EQ(method_label(parse_method("online:32")), "online(b=32)");
  EXPECT_EQ(method_label(parse_method("online:all")), "online(b=all)");
  EXPECT_EQ(method_label(parse_method("rlr")), "rlr(p=80,lambda=1e-05)");
  EXPECT_EQ(method_label(parse_method("dlr")), "dlr");
  EXPECT_EQ(code_of([] { parse_method("online:0"); }), ErrorCode::kConfiguration);
  EXPECT_EQ(code_of([] { parse_method("lasso"); }), ErrorCode::kConfiguration);

  const auto odin = parse_scorer("odin:1000:0.0024");
  EXPECT_EQ(odin.kind, scorers::ScorerKind::kOdin);
  EXPECT_EQ(odin.temperature, 1000.0);
  EXPECT_EQ(odin.epsilon, 0.0024);
  EXPECT_EQ(parse_scorer("energy:2").temperature, 2.0);
  EXPECT_EQ(code_of([] { parse_scorer("msp:1:0.1"); }), ErrorCode::kConfiguration);
  EXPECT_EQ(code_of([] { parse_scorer("softmax"); }), ErrorCode::kConfiguration);
  EXPECT_EQ(code_of([] { parse_scorer("energy:-1"); }), ErrorCode::kConfiguration);
}

TEST(Parse, PlanFromConfig) {
  const auto cfg = io::KeyValueConfig::parse(
      "seed = 3\nood_sets = far;far+near\nscorers = msp,energy\nmethods = none,rlr,online:64\n"
      "rlr.lambda = 0.01\nrepeats = 4\ntotal = 500\nin_rate = 0.25\nprep.pca_dim = 6\nsynthetic.hidden = 8,4\n");
  const ExperimentPlan plan = plan_from_config(cfg);
  EXPECT_EQ(plan.seed, 3u);
  EXPECT_EQ(plan.synthetic.seed, 3u);
  EXPECT_EQ(plan.ood_sets.size(), 2u);
  EXPECT_EQ(plan.scorers.size(), 2u);
  EXPECT_EQ(plan.methods[1].rlr.lambda, 0.01);
  EXPECT_EQ(plan.methods[2].batch_size, 64u);
  EXPECT_EQ(plan.repeats, 4u);
  EXPECT_EQ(plan.total, 500u);
  EXPECT_EQ(plan.in_rate, 0.25);
  EXPECT_EQ(plan.preprocess.pca_dim, 6u);
  EXPECT_EQ(plan.synthetic.hidden, (std::vector<std::size_t>{8, 4}));
  EXPECT_EQ(code_of([] { plan_from_config(io::KeyValueConfig::parse("repeats = 0\n")); }),
            ErrorCode::kConfiguration);
  EXPECT_EQ(code_of([] { plan_from_config(io::KeyValueConfig::parse("source = s3\n")); }),
            ErrorCode::kConfiguration);
}

TEST(World, FromRecordsSplitsByOrigin) {
  std::vector<FeatureRecord> recs(5);
  for (std::size_t i = 0; i < 5; ++i) {
    recs[i].feature = Vector{static_cast<double>(i)};
    recs[i].origin = i < 2 ? Origin::kIn : Origin::kOut;
  }
  recs[4].source_tag = "svhn";
  const World w = world_from_records(recs);
  EXPECT_EQ(w.in_tag, "in");
  EXPECT_EQ(w.in_pool.size(), 2u);
  EXPECT_EQ(w.out_pools.at("out").size(), 2u);
  EXPECT_EQ(w.out_pools.at("svhn").size(), 1u);
}

TEST(World, LoadFromContainers) {
  testutil::TempDir dir;
  const World& src = shared_world();
  io::Container c = io::records_to_container(src.in_pool);
  io::save_tinynet(c, *src.model);
  io::write_container(dir / "in.etlt", c);
  io::write_container(dir / "far.etlt", io::records_to_container(src.out_pools.at("far")));
  const World w = load_world({dir / "in.etlt", dir / "far.etlt"});
  EXPECT_EQ(w.in_tag, "clusters");
  EXPECT_EQ(w.in_pool, src.in_pool);
  EXPECT_EQ(w.out_pools.at("far"), src.out_pools.at("far"));
  EXPECT_EQ(*w.model, *src.model);
}

TEST(Linearity, PlaneScoresFitExactly) {
  const Matrix x = testutil::random_matrix(60, 2, 7);
  Vector s(60);
  for (std::size_t i = 0; i < 60; ++i) s[i] = 2.0 * x(i, 0) - 0.5 * x(i, 1) + 3.0;
  std::vector<Origin> labels(60, Origin::kIn);
  labels[0] = Origin::kOut;
  const auto r = diagnose_linearity(x, s, labels);
  EXPECT_NEAR(r.plane_r2, 1.0, 1e-12);
  EXPECT_NEAR(r.r2, 1.0, 1e-12);
  EXPECT_EQ(r.coords.rows(), 60u);
  EXPECT_TRUE(r.warning.empty());
}

TEST(Linearity, SeparatedClustersProbePerfectly) {
  datasets::ClusterSpec spec{{{Vector{4, 0, 0}, Matrix::identity(3), 100, Origin::kIn, "a"},
                              {Vector{-4, 0, 0}, Matrix::identity(3), 100, Origin::kOut, "b"}},
                             2};
  const auto recs = datasets::gen_gaussian_clusters(spec);
  const Matrix x = feature_matrix(recs);
  Vector s(200);
  for (std::size_t i = 0; i < 200; ++i) s[i] = x(i, 0) + 0.1 * x(i, 1);
  const auto labels = origins(recs);
  const auto r = diagnose_linearity(x, s, labels);
  ASSERT_TRUE(r.probe_accuracy.has_value());
  EXPECT_EQ(*r.probe_accuracy, 1.0);
  const auto lines = io::split(render_linearity_csv(r, s, labels), '\n');
  EXPECT_EQ(lines[0], "pc1,pc2,score,fitted,label");
  EXPECT_EQ(lines.size(), 201u);
}

TEST(Linearity, UnrelatedScoresHaveLowR2) {
  const Matrix x = testutil::random_matrix(2000, 2, 8);
  const Vector s = testutil::random_vector(2000, 9);
  std::vector<Origin> labels(2000, Origin::kIn);
  labels[1] = Origin::kOut;
  EXPECT_LE(diagnose_linearity(x, s, labels).r2, 0.1);
}

TEST(Linearity, SingleClassAndTooFew) {
  const Matrix x = testutil::random_matrix(10, 3, 1);
  const Vector s = testutil::random_vector(10, 2);
  const std::vector<Origin> labels(10, Origin::kOut);
  const auto r = diagnose_linearity(x, s, labels);
  EXPECT_EQ(r.warning, "single-class input; separability omitted");
  EXPECT_FALSE(r.probe_accuracy.has_value());
  EXPECT_EQ(code_of([] {
              diagnose_linearity(Matrix(2, 2), Vector(2), std::vector<Origin>(2, Origin::kIn));
            }),
            ErrorCode::kInvalidInput);
}

TEST(RSquared, ConstantTarget) {
  EXPECT_EQ(r_squared(Vector{2, 2, 2}, Vector{2, 2, 2}), 1.0);
  EXPECT_EQ(r_squared(Vector{2, 2, 2}, Vector{2, 2, 3}), 0.0);
  EXPECT_EQ(r_squared(Vector{1, 2, 3}, Vector{3, 2, 1}), 0.0);
}
