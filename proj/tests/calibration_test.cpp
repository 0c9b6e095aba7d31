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

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <set>

#include "etlt/calibration.hpp"
#include "etlt/error.hpp"
#include "etlt/metrics.hpp"
#include "test_util.hpp"

using namespace etlt;
using namespace etlt::calibration;
using linalg::Matrix;
using linalg::Vector;
using testutil::max_abs_diff;
using testutil::random_matrix;
using testutil::random_vector;

namespace {

const PreprocessSpec kRaw{false, 0, false};

template <typename Fn>
ErrorCode error_of(Fn fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no exception";
  return ErrorCode::kIo;
}

struct CorruptedLine {
  Matrix features;
  Vector scores;
  Vector beta;  // [w1, w2, bias]
  std::set<std::size_t> corrupted;
};

CorruptedLine corrupted_line(std::uint64_t seed) {
  CorruptedLine c;
  c.features = random_matrix(20, 2, seed);
  c.beta = random_vector(3, seed + 7);
  c.scores = Vector(20);
  for (std::size_t i = 0; i < 20; ++i)
    c.scores[i] = c.features(i, 0) * c.beta[0] + c.features(i, 1) * c.beta[1] + c.beta[2];
  std::mt19937_64 gen(seed + 13);
  while (c.corrupted.size() < 2) c.corrupted.insert(gen() % 20);
  for (std::size_t i : c.corrupted) c.scores[i] += 100.0;
  return c;
}

}  // namespace

TEST(Preprocess, UnitNormalizeRow) {
  const auto p = preprocess_fit(Matrix{{3, 4}}, PreprocessSpec{true, 0, false});
  const auto out = preprocess_apply(p, Matrix{{3, 4}});
  EXPECT_NEAR(out.z(0, 0), 0.6, 1e-15);
  EXPECT_NEAR(out.z(0, 1), 0.8, 1e-15);
}

TEST(Preprocess, BiasColumnIsTrailingOnes) {
  const Matrix x = random_matrix(7, 3, 1);
  const auto out = preprocess_apply(preprocess_fit(x, PreprocessSpec{}), x);
  ASSERT_EQ(out.z.cols(), 4u);
  for (std::size_t i = 0; i < 7; ++i) {
    EXPECT_EQ(out.z(i, 3), 1.0);
    for (std::size_t j = 0; j < 3; ++j) EXPECT_EQ(out.z(i, j), x(i, j));
  }
}

TEST(Preprocess, ZeroNormRowIsFlaggedAndKept) {
  const Matrix x{{0, 0}, {1, 1}};
  const auto out = preprocess_apply(preprocess_fit(x, PreprocessSpec{true, 0, false}), x);
  EXPECT_EQ(out.zero_norm_rows, std::vector<std::size_t>{0});
  EXPECT_EQ(out.z(0, 0), 0.0);
  EXPECT_NEAR(out.z(1, 0), std::sqrt(0.5), 1e-15);
}

TEST(Preprocess, UnitNormThenPcaOnRankKData) {
  const Matrix x = testutil::random_rank(40, 10, 3, 2);
  const auto p = preprocess_fit(x, PreprocessSpec{true, 3, false});
  const auto z = preprocess_apply(p, x).z;
  const Matrix back = linalg::pca_inverse_transform(*p.pca, z);
  for (std::size_t i = 0; i < 40; ++i) {
    const double n = linalg::norm2(x.row(i));
    for (std::size_t j = 0; j < 10; ++j) EXPECT_NEAR(back(i, j), x(i, j) / n, 1e-8);
  }
}

TEST(Preprocess, PcaDimMustBeBelowFeatureDim) {
  EXPECT_EQ(error_of([] { preprocess_fit(random_matrix(10, 4, 3), PreprocessSpec{false, 4, true}); }),
            ErrorCode::kInvalidArgument);
}

TEST(Dlr, ExactLine) {
  const auto m = fit_dlr(Matrix{{1}, {2}}, Vector{2, 4}, kRaw);
  ASSERT_EQ(m.beta.size(), 1u);
  EXPECT_NEAR(m.beta[0], 2.0, 1e-14);
  const Vector p = predict(m, Matrix{{1}, {2}});
  EXPECT_NEAR(p[0], 2.0, 1e-14);
  EXPECT_NEAR(p[1], 4.0, 1e-14);
}

TEST(Dlr, SeventeenFourteenths) {
  const Matrix x{{1}, {2}, {3}};
  const auto m = fit_dlr(x, Vector{1, 2, 4}, kRaw);
  EXPECT_NEAR(m.beta[0], 17.0 / 14.0, 1e-14);
  const Vector p = predict(m, x);
  EXPECT_NEAR(p[0], 17.0 / 14.0, 1e-14);
  EXPECT_NEAR(p[1], 34.0 / 14.0, 1e-14);
  EXPECT_NEAR(p[2], 51.0 / 14.0, 1e-14);
}

TEST(Dlr, InterpolationRegime) {
  for (std::size_t d = 1; d <= 12; ++d) {
    for (std::size_t n = 1; n <= d + 1; ++n) {
      const Matrix x = random_matrix(n, d, 100 * d + n);
      const Vector s = random_vector(n, 7 * d + n, 3.0);
      const auto m = fit_dlr(x, s, PreprocessSpec{});
      EXPECT_LE(max_abs_diff(predict(m, x), s), 1e-8) << n << "x" << d;
    }
  }
}

TEST(Dlr, ZeroFeatureReturnsBias) {
  const Matrix x = random_matrix(30, 4, 5);
  const auto m = fit_dlr(x, random_vector(30, 6), PreprocessSpec{});
  EXPECT_NEAR(predict(m, Matrix(1, 4))[0], m.beta[4], 1e-15);
}

TEST(Dlr, IdenticalRowsStillSolve) {
  const Matrix x{{1, 2}, {1, 2}, {1, 2}};
  const auto m = fit_dlr(x, Vector{1, 2, 3}, PreprocessSpec{});
  EXPECT_TRUE(m.diagnostics.rank_deficient);
  EXPECT_EQ(m.diagnostics.gram_rank, 1u);
  for (double v : predict(m, x)) EXPECT_NEAR(v, 2.0, 1e-12);
}

TEST(Dlr, Errors) {
  EXPECT_EQ(error_of([] { fit_dlr(Matrix(0, 3), Vector(), PreprocessSpec{}); }), ErrorCode::kInvalidInput);
  const auto m = fit_dlr(random_matrix(5, 3, 1), random_vector(5, 2), PreprocessSpec{});
  EXPECT_EQ(error_of([&] { predict(m, Matrix(2, 4)); }), ErrorCode::kShape);
}

TEST(Dlr, AurocInvariantUnderPositiveAffineScores) {
  const Matrix x = random_matrix(200, 5, 9);
  Vector s = random_vector(200, 10);
  std::vector<Origin> labels(200);
  for (std::size_t i = 0; i < 200; ++i) {
    labels[i] = i % 3 == 0 ? Origin::kOut : Origin::kIn;
    s[i] += x(i, 0) + (labels[i] == Origin::kIn ? 1.0 : 0.0);
  }
  Vector t = s;
  for (double& v : t) v = 3.5 * v - 11.0;
  const auto a = predict(fit_dlr(x, s, PreprocessSpec{}), x);
  const auto b = predict(fit_dlr(x, t, PreprocessSpec{}), x);
  for (std::size_t i = 0; i < 200; ++i) EXPECT_NEAR(b[i], 3.5 * a[i] - 11.0, 1e-9);
  EXPECT_EQ(metrics::auroc(metrics::make_labeled(a.span(), labels)),
            metrics::auroc(metrics::make_labeled(b.span(), labels)));
}

TEST(Rlr, SubsetSize) {
  EXPECT_EQ(subset_size(20, 80), 16u);
  EXPECT_EQ(subset_size(5, 50), 3u);
  EXPECT_EQ(subset_size(3, 10), 1u);
  EXPECT_EQ(subset_size(7, 100), 7u);
  EXPECT_EQ(error_of([] { subset_size(10, 0.0); }), ErrorCode::kConfiguration);
  EXPECT_EQ(error_of([] { subset_size(10, 100.5); }), ErrorCode::kConfiguration);
}

TEST(Rlr, SelectLowestBreaksTiesByIndex) {
  const Vector g{0.0, -1.0, 0.0, 0.5, 0.0, -0.5};
  EXPECT_EQ(select_lowest(g, 2), (std::vector<std::size_t>{0, 2}));
  EXPECT_EQ(select_lowest(g, 4), (std::vector<std::size_t>{0, 2, 3, 4}));
}

TEST(Rlr, AnnihilatorIsProjection) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const Matrix z = random_matrix(15, 4, seed);
    const Matrix a = annihilator(z);
    EXPECT_LE(max_abs_diff(linalg::multiply(a, a), a), 1e-10);
    EXPECT_LE(linalg::max_abs(linalg::multiply(a, z).values()), 1e-10);
  }
}

TEST(Rlr, LargeLambdaKeepsIndexPrefix) {
  const Matrix x = random_matrix(30, 3, 21);
  const Vector s = random_vector(30, 22);
  RlrConfig cfg;
  cfg.lambda = 1e6;
  cfg.percentile = 80;
  const auto fit = fit_rlr(x, s, PreprocessSpec{}, cfg);
  for (double g : fit.report.gamma) EXPECT_EQ(g, 0.0);
  std::vector<std::size_t> prefix(24);
  std::iota(prefix.begin(), prefix.end(), 0);
  EXPECT_EQ(fit.report.selected, prefix);
  const auto ref = fit_dlr(linalg::select_rows(x, prefix), linalg::select(s, prefix),
                           preprocess_fit(x, PreprocessSpec{}));
  EXPECT_EQ(fit.model.beta, ref.beta);

  cfg.percentile = 100;
  EXPECT_EQ(fit_rlr(x, s, PreprocessSpec{}, cfg).model.beta, fit_dlr(x, s, PreprocessSpec{}).beta);
}

TEST(Rlr, CorruptedScoresGetLargestResiduals) {
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const CorruptedLine c = corrupted_line(seed);
    const auto fit = fit_rlr(c.features, c.scores, PreprocessSpec{}, RlrConfig{});
    EXPECT_TRUE(fit.report.lasso_converged) << "seed " << seed;
    // Brute force: the two largest |γ| are the corrupted rows.
    std::vector<std::size_t> order(20);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      return std::abs(fit.report.gamma[a]) > std::abs(fit.report.gamma[b]);
    });
    EXPECT_EQ((std::set<std::size_t>{order[0], order[1]}), c.corrupted) << "seed " << seed;
    ASSERT_EQ(fit.report.selected.size(), 16u);
    for (std::size_t i : c.corrupted) {
      EXPECT_FALSE(std::binary_search(fit.report.selected.begin(), fit.report.selected.end(), i));
    }
    EXPECT_LE(max_abs_diff(fit.model.beta, c.beta), 1e-6) << "seed " << seed;
  }
}

TEST(Rlr, GammaSatisfiesLassoKkt) {
  const CorruptedLine c = corrupted_line(5);
  RlrConfig cfg;
  cfg.lambda = 0.3;
  const auto fit = fit_rlr(c.features, c.scores, PreprocessSpec{}, cfg);
  const auto z = preprocess_apply(fit.model.preprocessor, c.features).z;
  const Matrix a = annihilator(z);
  const Vector target = linalg::multiply(a, c.scores);
  const Vector grad =
      linalg::multiply_transposed(a, linalg::subtract(target, linalg::multiply(a, fit.report.gamma)));
  for (std::size_t i = 0; i < 20; ++i) {
    if (fit.report.gamma[i] == 0.0) EXPECT_LE(std::abs(grad[i]), cfg.lambda + 1e-6);
    else EXPECT_NEAR(grad[i], cfg.lambda * (fit.report.gamma[i] > 0 ? 1 : -1), 1e-6);
  }
}

TEST(Rlr, DeterministicAndValidated) {
  const CorruptedLine c = corrupted_line(9);
  const auto a = fit_rlr(c.features, c.scores, PreprocessSpec{});
  const auto b = fit_rlr(c.features, c.scores, PreprocessSpec{});
  EXPECT_EQ(a.report.selected, b.report.selected);
  EXPECT_EQ(a.report.gamma, b.report.gamma);
  EXPECT_EQ(error_of([] { fit_rlr(Matrix{{1.0}}, Vector{1.0}, PreprocessSpec{}); }), ErrorCode::kInvalidInput);
  RlrConfig bad;
  bad.lambda = 0.0;
  EXPECT_EQ(error_of([&] { fit_rlr(c.features, c.scores, PreprocessSpec{}, bad); }), ErrorCode::kConfiguration);
}

TEST(Online, InitAndEmptyPrediction) {
  const OnlineState s = online_init(3);
  EXPECT_EQ(s.gram, Matrix(3, 3));
  EXPECT_EQ(s.moment, Vector(3));
  EXPECT_EQ(s.samples_seen, 0u);
  EXPECT_EQ(online_beta(s), Vector(3));
  EXPECT_EQ(online_init(3), s);
  EXPECT_EQ(error_of([] { online_init(0); }), ErrorCode::kInvalidArgument);
}

TEST(Online, SingleBatchEqualsDlr) {
  const Matrix x = random_matrix(100, 6, 31);
  const Vector s = random_vector(100, 32);
  const auto prep = preprocess_fit(x, PreprocessSpec{});
  OnlineDlr online(prep);
  const Vector got = online.update(x, s);
  const Vector ref = predict(fit_dlr(x, s, prep), x);
  EXPECT_LE(max_abs_diff(got, ref), 1e-10);
}

TEST(Online, TwoBatchesMatchOne) {
  const Matrix x = random_matrix(90, 5, 41);
  const Vector s = random_vector(90, 42);
  const auto z = preprocess_apply(preprocess_fit(x, PreprocessSpec{}), x).z;
  const auto one = online_update(online_init(6), z, s);
  std::vector<std::size_t> first(37), second(53);
  std::iota(first.begin(), first.end(), 0);
  std::iota(second.begin(), second.end(), 37);
  const auto mid = online_update(online_init(6), linalg::select_rows(z, first), linalg::select(s, first));
  const auto two = online_update(mid.state, linalg::select_rows(z, second), linalg::select(s, second));
  EXPECT_EQ(two.state.samples_seen, 90u);
  EXPECT_LE(max_abs_diff(two.beta, one.beta), 1e-8 * linalg::max_abs(one.beta.span()));
}

TEST(Online, EmptyBatchAndShapeErrors) {
  const OnlineState s = online_update(online_init(2), Matrix{{1, 2}, {3, 4}}, Vector{1, 2}).state;
  const auto step = online_update(s, Matrix(0, 2), Vector());
  EXPECT_EQ(step.state, s);
  EXPECT_EQ(step.calibrated.size(), 0u);
  EXPECT_EQ(error_of([&] { online_update(s, Matrix(1, 3), Vector{1.0}); }), ErrorCode::kShape);
}

TEST(Online, GramStaysSymmetricPsd) {
  OnlineState s = online_init(4);
  for (std::uint64_t b = 0; b < 20; ++b) {
    s = online_update(s, random_matrix(7, 4, 500 + b), random_vector(7, 600 + b)).state;
    EXPECT_LE(max_abs_diff(s.gram, linalg::transpose(s.gram)), 1e-10);
    Eigen::MatrixXd g(4, 4);
    for (int i = 0; i < 4; ++i)
      for (int j = 0; j < 4; ++j) g(i, j) = s.gram(i, j);
    EXPECT_GE(Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(g).eigenvalues().minCoeff(), -1e-10);
  }
}
