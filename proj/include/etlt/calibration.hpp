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
#include <optional>
#include <vector>

#include "etlt/linalg.hpp"

// Test-time linear calibration of OOD scores: regress the base scores on
// the features and use the fitted values as the new scores.
namespace etlt::calibration {

using linalg::Matrix;
using linalg::Vector;
using ScoreVector = linalg::Vector;

// What to fit. Applied in order: unit-normalize rows, PCA to pca_dim
// (0 = off), append a trailing constant-1 column.
struct PreprocessSpec {
  bool unit_normalize = false;
  std::size_t pca_dim = 0;
  bool add_bias = true;

  bool operator==(const PreprocessSpec&) const = default;
};

struct Preprocessor {
  std::size_t input_dim = 0;
  bool unit_normalize = false;
  std::optional<linalg::PcaBasis> pca;
  bool add_bias = true;

  std::size_t output_dim() const noexcept {
    return (pca ? pca->output_dim() : input_dim) + (add_bias ? 1 : 0);
  }
};

struct Processed {
  Matrix z;
  std::vector<std::size_t> zero_norm_rows;  // left unnormalized
};

Preprocessor preprocess_fit(const Matrix& features, const PreprocessSpec& spec);
Processed preprocess_apply(const Preprocessor& prep, const Matrix& features);

struct FitDiagnostics {
  std::size_t samples = 0;
  double residual_norm = 0.0;   // ‖Zβ − S‖₂ on the fitted rows
  std::size_t gram_rank = 0;    // numerical rank of ZᵀZ
  bool rank_deficient = false;  // gram_rank < processed dim
  std::size_t zero_norm_rows = 0;
};

struct RegressionModel {
  Vector beta;
  Preprocessor preprocessor;
  FitDiagnostics diagnostics;
};

// β = (ZᵀZ)⁺ZᵀS on preprocessed features (PCA fitted on `features`).
RegressionModel fit_dlr(const Matrix& features, const ScoreVector& scores,
                        const PreprocessSpec& spec = {});
// Same, with an already-fitted preprocessor.
RegressionModel fit_dlr(const Matrix& features, const ScoreVector& scores, const Preprocessor& prep);

ScoreVector predict(const RegressionModel& model, const Matrix& features);

// ---------------------------------------------------------------------------
// Robust variant: per-sample residuals γ from a Lasso on the annihilator
// projected system, then refit on the lowest-|γ| subset.
// ---------------------------------------------------------------------------

struct RlrConfig {
  double lambda = 1e-5;
  double percentile = 80.0;  // (0, 100]
  linalg::LassoOptions lasso;
};

struct ResidualReport {
  Vector gamma;
  std::vector<std::size_t> selected;  // ascending indices of the kept rows
  std::size_t lasso_sweeps = 0;
  bool lasso_converged = false;
};

struct RlrFit {
  RegressionModel model;
  ResidualReport report;
};

RlrFit fit_rlr(const Matrix& features, const ScoreVector& scores, const PreprocessSpec& spec,
               const RlrConfig& cfg = {});

// round-half-up(percentile·n/100), at least 1.
std::size_t subset_size(std::size_t n, double percentile);
// The `count` indices with smallest |γ|, ties by ascending index; returned
// sorted ascending.
std::vector<std::size_t> select_lowest(const Vector& gamma, std::size_t count);
// I − Z(ZᵀZ)⁺Zᵀ, formed explicitly (n × n).
Matrix annihilator(const Matrix& z);

// ---------------------------------------------------------------------------
// Streaming DLR over accumulated ZᵀZ and ZᵀS.
// ---------------------------------------------------------------------------

struct OnlineState {
  Matrix gram;    // Σ ZᵀZ
  Vector moment;  // Σ ZᵀS
  std::size_t samples_seen = 0;

  std::size_t dim() const noexcept { return moment.size(); }
  bool operator==(const OnlineState&) const = default;
};

OnlineState online_init(std::size_t dim);
// A⁺b for the current state; zero before any data.
Vector online_beta(const OnlineState& state);

struct OnlineStep {
  OnlineState state;
  Vector beta;
  ScoreVector calibrated;  // Z·β for the batch just consumed
};

// z holds already-preprocessed rows.
OnlineStep online_update(const OnlineState& state, const Matrix& z, const ScoreVector& scores);

// Preprocessor plus running state, for feeding raw feature batches.
class OnlineDlr {
 public:
  explicit OnlineDlr(Preprocessor prep);
  OnlineDlr(Preprocessor prep, OnlineState state);

  ScoreVector update(const Matrix& features, const ScoreVector& scores);

  const Preprocessor& preprocessor() const noexcept { return prep_; }
  const OnlineState& state() const noexcept { return state_; }
  const Vector& beta() const noexcept { return beta_; }

 private:
  Preprocessor prep_;
  OnlineState state_;
  Vector beta_;
};

}  // namespace etlt::calibration
