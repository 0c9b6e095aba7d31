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

#include "etlt/calibration.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "etlt/error.hpp"

namespace etlt::calibration {
namespace {

void check_fit_inputs(const Matrix& features, const ScoreVector& scores) {
  if (features.rows() != scores.size()) {
    throw Error(ErrorCode::kShape, "features have " + std::to_string(features.rows()) +
                                       " rows but there are " + std::to_string(scores.size()) +
                                       " scores");
  }
  if (features.rows() == 0) throw Error(ErrorCode::kInvalidInput, "no samples to fit");
  if (!linalg::all_finite(scores.values())) {
    throw Error(ErrorCode::kInvalidInput, "scores contain non-finite entries");
  }
}

double residual_norm(const Matrix& z, const Vector& beta, const ScoreVector& scores) {
  const Vector fitted = linalg::multiply(z, beta);
  double ss = 0.0;
  for (std::size_t i = 0; i < fitted.size(); ++i) {
    const double r = fitted[i] - scores[i];
    ss += r * r;
  }
  return std::sqrt(ss);
}

RegressionModel solve(const Matrix& z, const ScoreVector& scores, Preprocessor prep,
                      std::size_t zero_norm_rows) {
  const linalg::PsdPseudoinverse pinv = linalg::pseudoinverse_psd(linalg::gram(z), z.rows());
  RegressionModel model;
  model.beta = linalg::multiply(pinv.inverse, linalg::multiply_transposed(z, scores));
  model.preprocessor = std::move(prep);
  model.diagnostics.samples = z.rows();
  model.diagnostics.residual_norm = residual_norm(z, model.beta, scores);
  model.diagnostics.gram_rank = pinv.rank;
  model.diagnostics.rank_deficient = pinv.rank < z.cols();
  model.diagnostics.zero_norm_rows = zero_norm_rows;
  return model;
}

Matrix unit_normalized(const Matrix& features, std::vector<std::size_t>& zero_rows) {
  Matrix out = features;
  for (std::size_t i = 0; i < out.rows(); ++i) {
    auto r = out.row(i);
    const double norm = linalg::norm2(r);
    if (norm == 0.0) {
      zero_rows.push_back(i);
      continue;
    }
    for (double& x : r) x /= norm;
  }
  return out;
}

}  // namespace

Preprocessor preprocess_fit(const Matrix& features, const PreprocessSpec& spec) {
  if (features.rows() == 0) throw Error(ErrorCode::kInvalidInput, "cannot fit a preprocessor on no rows");
  if (!linalg::all_finite(features.values())) {
    throw Error(ErrorCode::kInvalidInput, "features contain non-finite entries");
  }
  Preprocessor prep;
  prep.input_dim = features.cols();
  prep.unit_normalize = spec.unit_normalize;
  prep.add_bias = spec.add_bias;
  if (spec.pca_dim > 0) {
    if (spec.pca_dim >= features.cols()) {
      throw Error(ErrorCode::kInvalidArgument, "PCA target dimension " + std::to_string(spec.pca_dim) +
                                                   " must be below the feature dimension " +
                                                   std::to_string(features.cols()));
    }
    std::vector<std::size_t> ignored;
    const Matrix base = spec.unit_normalize ? unit_normalized(features, ignored) : features;
    prep.pca = linalg::pca_fit(base, spec.pca_dim);
  }
  return prep;
}

Processed preprocess_apply(const Preprocessor& prep, const Matrix& features) {
  if (features.cols() != prep.input_dim && features.rows() > 0) {
    throw Error(ErrorCode::kShape, "features have dimension " + std::to_string(features.cols()) +
                                       ", preprocessor expects " + std::to_string(prep.input_dim));
  }
  Processed out;
  Matrix x = prep.unit_normalize ? unit_normalized(features, out.zero_norm_rows) : features;
  if (prep.pca && features.rows() > 0) x = linalg::pca_transform(*prep.pca, x);
  if (!prep.add_bias) {
    out.z = std::move(x);
    return out;
  }
  const std::size_t inner = prep.pca ? prep.pca->output_dim() : prep.input_dim;
  out.z = Matrix(features.rows(), inner + 1);
  for (std::size_t i = 0; i < features.rows(); ++i) {
    const auto src = x.row(i);
    auto dst = out.z.row(i);
    std::copy(src.begin(), src.end(), dst.begin());
    dst[inner] = 1.0;
  }
  return out;
}

RegressionModel fit_dlr(const Matrix& features, const ScoreVector& scores, const PreprocessSpec& spec) {
  check_fit_inputs(features, scores);
  return fit_dlr(features, scores, preprocess_fit(features, spec));
}

RegressionModel fit_dlr(const Matrix& features, const ScoreVector& scores, const Preprocessor& prep) {
  check_fit_inputs(features, scores);
  Processed p = preprocess_apply(prep, features);
  return solve(p.z, scores, prep, p.zero_norm_rows.size());
}

ScoreVector predict(const RegressionModel& model, const Matrix& features) {
  if (features.rows() == 0) return {};
  const Processed p = preprocess_apply(model.preprocessor, features);
  return linalg::multiply(p.z, model.beta);
}

std::size_t subset_size(std::size_t n, double percentile) {
  if (!(percentile > 0.0) || !(percentile <= 100.0)) {
    throw Error(ErrorCode::kConfiguration, "percentile must lie in (0, 100]");
  }
  const double raw = std::floor(percentile * static_cast<double>(n) / 100.0 + 0.5);
  return std::clamp<std::size_t>(static_cast<std::size_t>(raw), 1, n);
}

std::vector<std::size_t> select_lowest(const Vector& gamma, std::size_t count) {
  std::vector<std::size_t> order(gamma.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return std::abs(gamma[a]) < std::abs(gamma[b]);
  });
  order.resize(std::min(count, order.size()));
  std::sort(order.begin(), order.end());
  return order;
}

Matrix annihilator(const Matrix& z) {
  const linalg::PsdPseudoinverse pinv = linalg::pseudoinverse_psd(linalg::gram(z), z.rows());
  const Matrix hat = linalg::multiply(linalg::multiply(z, pinv.inverse), linalg::transpose(z));
  return linalg::subtract(Matrix::identity(z.rows()), hat);
}

RlrFit fit_rlr(const Matrix& features, const ScoreVector& scores, const PreprocessSpec& spec,
               const RlrConfig& cfg) {
  check_fit_inputs(features, scores);
  if (features.rows() < 2) throw Error(ErrorCode::kInvalidInput, "robust fit needs at least two samples");
  if (!(cfg.lambda > 0.0) || !std::isfinite(cfg.lambda)) {
    throw Error(ErrorCode::kConfiguration, "lambda must be positive");
  }
  const std::size_t keep = subset_size(features.rows(), cfg.percentile);

  const Preprocessor prep = preprocess_fit(features, spec);
  const Processed p = preprocess_apply(prep, features);
  const Matrix& z = p.z;
  const std::size_t n = z.rows();

  // Orthonormal basis of col(Z): Q = Z·V·Λ^{-1/2}, so QQᵀ = Z(ZᵀZ)⁺Zᵀ.
  const linalg::PsdPseudoinverse pinv = linalg::pseudoinverse_psd(linalg::gram(z), n);
  Matrix q = linalg::multiply(z, pinv.range_basis);
  for (std::size_t c = 0; c < pinv.rank; ++c) {
    const double inv_sqrt = 1.0 / std::sqrt(pinv.kept_values[c]);
    for (std::size_t i = 0; i < n; ++i) q(i, c) *= inv_sqrt;
  }
  // S̃ = Z̃Ŝ = Ŝ − Q(QᵀŜ)
  const Vector qs = linalg::multiply_transposed(q, scores);
  Vector projected(n);
  for (std::size_t i = 0; i < n; ++i) projected[i] = scores[i] - linalg::dot(q.row(i), qs.span());

  linalg::LassoResult lasso = linalg::lasso_annihilator(q, projected, cfg.lambda, cfg.lasso);

  RlrFit fit;
  fit.report.gamma = std::move(lasso.coef);
  fit.report.selected = select_lowest(fit.report.gamma, keep);
  fit.report.lasso_sweeps = lasso.sweeps;
  fit.report.lasso_converged = lasso.converged;

  const Matrix z_sub = linalg::select_rows(z, fit.report.selected);
  const Vector s_sub = linalg::select(scores, fit.report.selected);
  fit.model = solve(z_sub, s_sub, prep, p.zero_norm_rows.size());
  return fit;
}

OnlineState online_init(std::size_t dim) {
  if (dim == 0) throw Error(ErrorCode::kInvalidArgument, "online state dimension must be positive");
  return {Matrix(dim, dim), Vector(dim), 0};
}

Vector online_beta(const OnlineState& state) {
  const linalg::PsdPseudoinverse pinv = linalg::pseudoinverse_psd(state.gram, state.samples_seen);
  return linalg::multiply(pinv.inverse, state.moment);
}

OnlineStep online_update(const OnlineState& state, const Matrix& z, const ScoreVector& scores) {
  if (z.rows() != scores.size()) throw Error(ErrorCode::kShape, "batch features/scores length mismatch");
  OnlineStep step{state, {}, {}};
  if (z.rows() == 0) {
    step.beta = online_beta(state);
    return step;
  }
  if (z.cols() != state.dim()) {
    throw Error(ErrorCode::kShape, "batch has dimension " + std::to_string(z.cols()) +
                                       ", state expects " + std::to_string(state.dim()));
  }
  if (!linalg::all_finite(z.values()) || !linalg::all_finite(scores.values())) {
    throw Error(ErrorCode::kInvalidInput, "batch contains non-finite entries");
  }
  const Matrix g = linalg::gram(z);
  const Vector m = linalg::multiply_transposed(z, scores);
  double* a = step.state.gram.data();
  for (std::size_t i = 0; i < g.values().size(); ++i) a[i] += g.values()[i];
  for (std::size_t i = 0; i < m.size(); ++i) step.state.moment[i] += m[i];
  step.state.samples_seen += z.rows();

  step.beta = online_beta(step.state);
  step.calibrated = linalg::multiply(z, step.beta);
  return step;
}

OnlineDlr::OnlineDlr(Preprocessor prep)
    : OnlineDlr(prep, online_init(prep.output_dim())) {}

OnlineDlr::OnlineDlr(Preprocessor prep, OnlineState state)
    : prep_(std::move(prep)), state_(std::move(state)) {
  if (state_.dim() != prep_.output_dim()) {
    throw Error(ErrorCode::kShape, "online state dimension does not match the preprocessor");
  }
  beta_ = online_beta(state_);
}

ScoreVector OnlineDlr::update(const Matrix& features, const ScoreVector& scores) {
  if (features.rows() == 0) return {};
  const Processed p = preprocess_apply(prep_, features);
  OnlineStep step = online_update(state_, p.z, scores);
  state_ = std::move(step.state);
  beta_ = std::move(step.beta);
  return std::move(step.calibrated);
}

}  // namespace etlt::calibration
