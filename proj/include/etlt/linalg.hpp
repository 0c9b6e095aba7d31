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
#include <initializer_list>
#include <span>
#include <vector>

namespace etlt::linalg {

class Vector {
 public:
  Vector() = default;
  explicit Vector(std::size_t n, double fill = 0.0) : data_(n, fill) {}
  Vector(std::initializer_list<double> values) : data_(values) {}
  explicit Vector(std::vector<double> values) : data_(std::move(values)) {}

  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  double* data() noexcept { return data_.data(); }
  const double* data() const noexcept { return data_.data(); }
  std::span<double> span() noexcept { return data_; }
  std::span<const double> span() const noexcept { return data_; }
  const std::vector<double>& values() const noexcept { return data_; }

  auto begin() noexcept { return data_.begin(); }
  auto end() noexcept { return data_.end(); }
  auto begin() const noexcept { return data_.begin(); }
  auto end() const noexcept { return data_.end(); }

  bool operator==(const Vector&) const = default;

 private:
  std::vector<double> data_;
};

// Dense row-major matrix of doubles.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
  Matrix(std::size_t rows, std::size_t cols, std::vector<double> data);
  Matrix(std::initializer_list<std::initializer_list<double>> rows);

  static Matrix identity(std::size_t n);
  static Matrix diagonal(std::span<const double> diag);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  bool empty() const noexcept { return data_.empty(); }

  double& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
  double operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }

  std::span<double> row(std::size_t i) { return {data_.data() + i * cols_, cols_}; }
  std::span<const double> row(std::size_t i) const {
    return {data_.data() + i * cols_, cols_};
  }
  Vector column(std::size_t j) const;

  double* data() noexcept { return data_.data(); }
  const double* data() const noexcept { return data_.data(); }
  const std::vector<double>& values() const noexcept { return data_; }

  bool operator==(const Matrix&) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

// ---------------------------------------------------------------------------
// Basic kernels.
// ---------------------------------------------------------------------------

bool all_finite(std::span<const double> values);
double dot(std::span<const double> a, std::span<const double> b);
double norm2(std::span<const double> v);
double max_abs(std::span<const double> v);

Matrix transpose(const Matrix& m);
Matrix multiply(const Matrix& a, const Matrix& b);
Vector multiply(const Matrix& m, const Vector& v);
// mᵀ·v without forming the transpose.
Vector multiply_transposed(const Matrix& m, const Vector& v);
// mᵀ·m, symmetric by construction.
Matrix gram(const Matrix& m);
Matrix subtract(const Matrix& a, const Matrix& b);
Vector subtract(const Vector& a, const Vector& b);
Matrix select_rows(const Matrix& m, std::span<const std::size_t> rows);
Vector select(const Vector& v, std::span<const std::size_t> idx);

// ---------------------------------------------------------------------------
// Decompositions.
// ---------------------------------------------------------------------------

// Eigenvalues sorted descending; column i of `vectors` pairs with values[i].
struct SymmetricEigen {
  Vector values;
  Matrix vectors;
};

// Householder tridiagonalization followed by implicit QL. Input must be
// symmetric; only the lower triangle is read.
SymmetricEigen eigen_symmetric(const Matrix& a);

// Thin SVD m = U·diag(s)·Vᵀ with s descending.
struct Svd {
  Matrix u;  // rows × r
  Vector singular;
  Matrix v;  // cols × r
};

// One-sided (Hestenes) Jacobi; high relative accuracy on small singular values.
Svd svd(const Matrix& m);

// Moore–Penrose pseudoinverse. Singular values at or below
// max(rows, cols)·eps·σ_max are treated as zero.
Matrix pseudoinverse(const Matrix& m);

// Pseudoinverse of a symmetric positive semidefinite matrix (a Gram matrix)
// through its eigendecomposition. Eigenvalues at or below
// max(dim, sample_count)·eps·λ_max are dropped; sample_count is the number
// of rows that were accumulated into the Gram matrix.
struct PsdPseudoinverse {
  Matrix inverse;
  Matrix range_basis;  // dim × rank, orthonormal eigenvectors kept
  Vector kept_values;  // rank eigenvalues kept, descending
  std::size_t rank = 0;
};

PsdPseudoinverse pseudoinverse_psd(const Matrix& g, std::size_t sample_count = 0);

// β = (ZᵀZ)⁺ZᵀS; minimum-norm when ZᵀZ is singular.
Vector least_squares(const Matrix& z, const Vector& s);

// ---------------------------------------------------------------------------
// PCA.
// ---------------------------------------------------------------------------

struct PcaBasis {
  Vector mean;                // input dim
  Matrix components;          // k × d, orthonormal rows
  Vector explained_variance;  // k, descending
  double total_variance = 0.0;

  std::size_t input_dim() const noexcept { return mean.size(); }
  std::size_t output_dim() const noexcept { return components.rows(); }
};

// Sample covariance uses the n-1 denominator (n when n == 1). Each component
// is signed so that its largest-magnitude entry is positive.
PcaBasis pca_fit(const Matrix& x, std::size_t k);
Matrix pca_transform(const PcaBasis& basis, const Matrix& x);
Matrix pca_inverse_transform(const PcaBasis& basis, const Matrix& y);

// ---------------------------------------------------------------------------
// Lasso: argmin ½‖target − design·γ‖² + λ‖γ‖₁ by cyclic coordinate descent.
// ---------------------------------------------------------------------------

struct LassoOptions {
  double tolerance = 1e-8;     // max |Δγ_j| over one sweep
  std::size_t max_sweeps = 10000;
  // Warm-start stages on a geometric λ path from ‖designᵀ·target‖∞ down to
  // λ before the final solve; 0 solves at λ directly from γ = 0.
  std::size_t path_stages = 20;
};

struct LassoResult {
  Vector coef;
  std::size_t sweeps = 0;
  bool converged = false;  // false: best iterate after max_sweeps
  std::vector<double> objective_trace;  // objective after each sweep
};

double soft_threshold(double x, double threshold);

LassoResult lasso(const Matrix& design, const Vector& target, double lambda,
                  const LassoOptions& options = {});

// Same problem for design = I − Q·Qᵀ, where Q (n × r) has orthonormal
// columns. Each coordinate step costs O(r) instead of O(n).
LassoResult lasso_annihilator(const Matrix& q, const Vector& target, double lambda,
                              const LassoOptions& options = {});

}  // namespace etlt::linalg
