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

#include <algorithm>
#include <cmath>
#include <map>

#include "etlt/datasets.hpp"
#include "etlt/error.hpp"
#include "etlt/metrics.hpp"

using namespace etlt;
using namespace etlt::datasets;
using linalg::Matrix;
using linalg::Vector;

namespace {

Pools pools_of(std::size_t per_pool) {
  Pools pools;
  for (const char* tag : {"a", "b"}) {
    for (std::size_t i = 0; i < per_pool; ++i) {
      FeatureRecord r;
      r.feature = Vector{static_cast<double>(i)};
      r.origin = Origin::kOut;
      r.source_tag = tag;
      pools[tag].push_back(r);
    }
  }
  return pools;
}

std::vector<FeatureRecord> in_pool(std::size_t n) {
  std::vector<FeatureRecord> v(n);
  for (std::size_t i = 0; i < n; ++i) {
    v[i].feature = Vector{static_cast<double>(i)};
    v[i].source_tag = "in";
  }
  return v;
}

ErrorCode code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  return ErrorCode::kIo;
}

}  // namespace

TEST(Clusters, Deterministic) {
  ClusterSpec spec{{{Vector{0, 1}, Matrix{{1, 0.3}, {0.3, 2}}, 50, Origin::kIn, "c"}}, 9};
  EXPECT_EQ(gen_gaussian_clusters(spec), gen_gaussian_clusters(spec));
  spec.seed = 10;
  EXPECT_NE(gen_gaussian_clusters(spec), gen_gaussian_clusters(ClusterSpec{spec.clusters, 9}));
}

TEST(Clusters, SampleMeanWithinClt) {
  const std::size_t n = 10000;
  const Vector mu{1.5, -2.0, 0.25};
  const auto recs = gen_gaussian_clusters({{{mu, Matrix::identity(3), n, Origin::kIn, "c"}}, 3});
  for (std::size_t j = 0; j < 3; ++j) {
    double m = 0.0;
    for (const auto& r : recs) m += r.feature[j];
    m /= static_cast<double>(n);
    EXPECT_LE(std::abs(m - mu[j]), 5.0 / std::sqrt(static_cast<double>(n)));
  }
}

TEST(Clusters, ZeroCovarianceIsConstant) {
  const Vector mu{3.0, -1.0};
  for (const auto& r : gen_gaussian_clusters({{{mu, Matrix(2, 2), 20, Origin::kOut, "z"}}, 1})) {
    EXPECT_EQ(r.feature, mu);
    EXPECT_EQ(r.origin, Origin::kOut);
    EXPECT_EQ(r.source_tag, "z");
  }
}

TEST(Clusters, RejectsBadCovariance) {
  EXPECT_EQ(code_of([] { gen_gaussian_clusters({{{Vector{0, 0}, Matrix{{1, 2}, {2, 1}}, 5, Origin::kIn, "c"}}, 1}); }),
            ErrorCode::kInvalidInput);
  EXPECT_EQ(code_of([] { gen_gaussian_clusters({{{Vector{0, 0}, Matrix{{1, 0.5}, {0, 1}}, 5, Origin::kIn, "c"}}, 1}); }),
            ErrorCode::kInvalidInput);
}

TEST(Noise, GaussianIsClipped) {
  for (const auto& r : gen_noise_ood(NoiseKind::kGaussianHalf, 8, 500, 4)) {
    EXPECT_EQ(r.origin, Origin::kOut);
    EXPECT_EQ(r.source_tag, "gaussian");
    for (double x : r.feature) {
      EXPECT_GE(x, 0.0);
      EXPECT_LE(x, 1.0);
    }
  }
}

TEST(Noise, UniformMoment) {
  const std::size_t n = 2000, dim = 5;
  double m = 0.0;
  for (const auto& r : gen_noise_ood(NoiseKind::kUniform01, dim, n, 5))
    for (double x : r.feature) m += x;
  m /= static_cast<double>(n * dim);
  EXPECT_LE(std::abs(m - 0.5), 5.0 / std::sqrt(12.0 * n * dim));
}

TEST(Noise, DeterministicAndValidated) {
  EXPECT_EQ(gen_noise_ood(NoiseKind::kUniform01, 3, 10, 6), gen_noise_ood(NoiseKind::kUniform01, 3, 10, 6));
  EXPECT_EQ(code_of([] { gen_noise_ood(NoiseKind::kUniform01, 3, 0, 6); }), ErrorCode::kInvalidArgument);
}

TEST(Mix, HalfOfFour) {
  const auto out = mix(in_pool(5), pools_of(5), {0.5, 4, 1, {{"a", 1.0}}});
  EXPECT_EQ(std::count_if(out.begin(), out.end(), [](auto& r) { return r.origin == Origin::kIn; }), 2);
  EXPECT_EQ(out.size(), 4u);
  for (const auto& r : out)
    if (r.origin == Origin::kOut) EXPECT_EQ(r.source_tag, "a");
}

TEST(Mix, RateGridCounts) {
  const auto in = in_pool(5000);
  const Pools pools = pools_of(5000);
  for (int k = 1; k <= 19; ++k) {
    const double rate = 0.05 * k;
    const MixSpec spec{rate, 5000, static_cast<std::uint64_t>(k), {{"a", 0.5}, {"b", 0.5}}};
    const auto out = mix(in, pools, spec);
    const auto n_in = static_cast<std::size_t>(std::count_if(out.begin(), out.end(), [](auto& r) { return r.origin == Origin::kIn; }));
    EXPECT_EQ(n_in, static_cast<std::size_t>(std::floor(rate * 5000 + 0.5)));
    EXPECT_EQ(out.size(), 5000u);
  }
}

TEST(Mix, CountsAndErrors) {
  EXPECT_EQ(in_count({0.5, 5, 0, {}}), 3u);  // 2.5 rounds up
  const auto counts = out_counts({0.5, 10, 0, {{"a", 0.7}, {"b", 0.3}}});
  EXPECT_EQ(counts, (std::vector<std::size_t>{4, 1}));  // 3.5 / 1.5 → largest remainder
  try {
    mix(in_pool(10), pools_of(3), {0.5, 20, 0, {{"a", 1.0}}});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kInsufficientData);
    EXPECT_NE(std::string(e.what()).find("'a'"), std::string::npos);
  }
  EXPECT_EQ(code_of([] { mix(in_pool(10), pools_of(10), {0.5, 4, 0, {{"a", 0.6}}}); }), ErrorCode::kInvalidArgument);
}

TEST(Mix, Deterministic) {
  const MixSpec spec{0.3, 10, 77, {{"a", 0.5}, {"b", 0.5}}};
  EXPECT_EQ(mix(in_pool(20), pools_of(20), spec), mix(in_pool(20), pools_of(20), spec));
}

TEST(Stream, OneBatchWhenLarge) {
  const auto recs = in_pool(10);
  const auto batches = stream(recs, {10, 3});
  ASSERT_EQ(batches.size(), 1u);
  EXPECT_EQ(batches[0].size(), 10u);
  EXPECT_EQ(stream(recs, {64, 3}), batches);
}

TEST(Stream, BatchGridIsPermutation) {
  const std::size_t n = 3000;
  for (std::size_t b : {32u, 64u, 128u, 256u, 512u, 1024u, 3000u}) {
    const auto batches = stream_indices(n, {b, 5});
    EXPECT_EQ(batches.size(), (n + b - 1) / b);
    std::vector<std::size_t> all;
    for (std::size_t k = 0; k < batches.size(); ++k) {
      if (k + 1 < batches.size()) EXPECT_EQ(batches[k].size(), b);
      all.insert(all.end(), batches[k].begin(), batches[k].end());
    }
    std::sort(all.begin(), all.end());
    for (std::size_t i = 0; i < n; ++i) ASSERT_EQ(all[i], i);
  }
  EXPECT_EQ(code_of([] { stream_indices(5, {0, 1}); }), ErrorCode::kInvalidArgument);
}

TEST(LinearFamily, CleanScoresSeparate) {
  const auto fam = gen_linear_score_family({});
  EXPECT_EQ(fam.features.rows(), 2000u);
  EXPECT_EQ(fam.features.cols(), 16u);
  EXPECT_EQ(std::count(fam.labels.begin(), fam.labels.end(), Origin::kIn), 1000);
  for (std::size_t i = 0; i < 2000; ++i)
    EXPECT_NEAR(fam.clean_scores[i], linalg::dot(fam.features.row(i), fam.direction.span()), 1e-12);
  EXPECT_GT(metrics::auroc(metrics::make_labeled(fam.clean_scores.span(), fam.labels)), 0.999);
  EXPECT_LT(metrics::auroc(metrics::make_labeled(fam.noisy_scores.span(), fam.labels)), 0.95);
}
