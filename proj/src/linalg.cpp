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

#include "etlt/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "etlt/error.hpp"

namespace etlt::linalg {
namespace {

constexpr double kEps = std::numeric_limits<double>::epsilon();

void require_finite(std::span<const double> values, const char* what) {
  if (!all_finite(values)) {
    throw Error(ErrorCode::kInvalidInput, std::string(what) + " contains non-finite entries");
  }
}

std::string dims(const Matrix& m) {
  return std::to_string(m.rows()) + "x" + std::to_string(m.cols());
}

// Reorders eigenpairs from ascending (as produced by the QL pass) to
// descending; columns of v follow.
void sort_descending(std::vector<double>& d, Matrix& v) {
  const std::size_t n = d.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return d[a] > d[b]; });
  std::vector<double> sorted(n);
  Matrix out(n, n);
  for (std::size_t c = 0; c < n; ++c) {
    sorted[c] = d[order[c]];
    for (std::size_t r = 0; r < n; ++r) out(r, c) = v(r, order[c]);
  }
  d = std::move(sorted);
  v = std::move(out);
}

// Householder reduction to tridiagonal form. On exit d holds the diagonal,
// e the subdiagonal (e[0] = 0) and v the accumulated transformation.
void tridiagonalize(Matrix& v, std::vector<double>& d, std::vector<double>& e) {
  const std::size_t n = v.rows();
  for (std::size_t j = 0; j < n; ++j) d[j] = v(n - 1, j);

  for (std::size_t i = n - 1; i > 0; --i) {
    double scale = 0.0;
    double h = 0.0;
    for (std::size_t k = 0; k < i; ++k) scale += std::abs(d[k]);
    if (scale == 0.0) {
      e[i] = d[i - 1];
      for (std::size_t j = 0; j < i; ++j) {
        d[j] = v(i - 1, j);
        v(i, j) = 0.0;
        v(j, i) = 0.0;
      }
    } else {
      for (std::size_t k = 0; k < i; ++k) {
        d[k] /= scale;
        h += d[k] * d[k];
      }
      double f = d[i - 1];
      double g = std::sqrt(h);
      if (f > 0) g = -g;
      e[i] = scale * g;
      h -= f * g;
      d[i - 1] = f - g;
      for (std::size_t j = 0; j < i; ++j) e[j] = 0.0;

      for (std::size_t j = 0; j < i; ++j) {
        f = d[j];
        v(j, i) = f;
        g = e[j] + v(j, j) * f;
        for (std::size_t k = j + 1; k <= i - 1; ++k) {
          g += v(k, j) * d[k];
          e[k] += v(k, j) * f;
        }
        e[j] = g;
      }
      f = 0.0;
      for (std::size_t j = 0; j < i; ++j) {
        e[j] /= h;
        f += e[j] * d[j];
      }
      const double hh = f / (h + h);
      for (std::size_t j = 0; j < i; ++j) e[j] -= hh * d[j];
      for (std::size_t j = 0; j < i; ++j) {
        f = d[j];
        g = e[j];
        for (std::size_t k = j; k <= i - 1; ++k) v(k, j) -= (f * e[k] + g * d[k]);
        d[j] = v(i - 1, j);
        v(i, j) = 0.0;
      }
    }
    d[i] = h;
  }

  for (std::size_t i = 0; i + 1 < n; ++i) {
    v(n - 1, i) = v(i, i);
    v(i, i) = 1.0;
    const double h = d[i + 1];
    if (h != 0.0) {
      for (std::size_t k = 0; k <= i; ++k) d[k] = v(k, i + 1) / h;
      for (std::size_t j = 0; j <= i; ++j) {
        double g = 0.0;
        for (std::size_t k = 0; k <= i; ++k) g += v(k, i + 1) * v(k, j);
        for (std::size_t k = 0; k <= i; ++k) v(k, j) -= g * d[k];
      }
    }
    for (std::size_t k = 0; k <= i; ++k) v(k, i + 1) = 0.0;
  }
  for (std::size_t j = 0; j < n; ++j) {
    d[j] = v(n - 1, j);
    v(n - 1, j) = 0.0;
  }
  v(n - 1, n - 1) = 1.0;
  e[0] = 0.0;
}

// Implicit QL iterations on the symmetric tridiagonal (d, e).
void tridiagonal_ql(Matrix& v, std::vector<double>& d, std::vector<double>& e) {
  const std::size_t n = v.rows();
  for (std::size_t i = 1; i < n; ++i) e[i - 1] = e[i];
  e[n - 1] = 0.0;

  double f = 0.0;
  double tst1 = 0.0;
  const std::size_t max_iter = 64 * n + 64;
  for (std::size_t l = 0; l < n; ++l) {
    tst1 = std::max(tst1, std::abs(d[l]) + std::abs(e[l]));
    std::size_t m = l;
    while (m < n) {
      if (std::abs(e[m]) <= kEps * tst1) break;
      ++m;
    }
    if (m > l) {
      std::size_t iter = 0;
      do {
        if (++iter > max_iter) {
          throw Error(ErrorCode::kInvalidInput, "symmetric eigensolver failed to converge");
        }
        double g = d[l];
        double p = (d[l + 1] - g) / (2.0 * e[l]);
        double r = std::hypot(p, 1.0);
        if (p < 0) r = -r;
        d[l] = e[l] / (p + r);
        d[l + 1] = e[l] * (p + r);
        const double dl1 = d[l + 1];
        double h = g - d[l];
        for (std::size_t i = l + 2; i < n; ++i) d[i] -= h;
        f += h;

        p = d[m];
        double c = 1.0;
        double c2 = c;
        double c3 = c;
        const double el1 = e[l + 1];
        double s = 0.0;
        double s2 = 0.0;
        for (std::size_t ii = m; ii-- > l;) {
          c3 = c2;
          c2 = c;
          s2 = s;
          g = c * e[ii];
          h = c * p;
          r = std::hypot(p, e[ii]);
          e[ii + 1] = s * r;
          s = e[ii] / r;
          c = p / r;
          p = c * d[ii] - s * g;
          d[ii + 1] = h + s * (c * g + s * d[ii]);
          for (std::size_t k = 0; k < n; ++k) {
            h = v(k, ii + 1);
            v(k, ii + 1) = s * v(k, ii) + c * h;
            v(k, ii) = c * v(k, ii) - s * h;
          }
        }
        p = -s * s2 * c3 * el1 * e[l] / dl1;
        e[l] = s * p;
        d[l] = c * p;
      } while (std::abs(e[l]) > kEps * tst1);
    }
    d[l] += f;
    e[l] = 0.0;
  }
}

}  // namespace

// ---------------------------------------------------------------------------

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  if (data_.size() != rows_ * cols_) {
    throw Error(ErrorCode::kShape, "matrix data length " + std::to_string(data_.size()) +
                                       " does not match " + std::to_string(rows_) + "x" +
                                       std::to_string(cols_));
  }
}

Matrix::Matrix(std::initializer_list<std::initializer_list<double>> rows) {
  rows_ = rows.size();
  cols_ = rows_ == 0 ? 0 : rows.begin()->size();
  data_.reserve(rows_ * cols_);
  for (const auto& r : rows) {
    if (r.size() != cols_) throw Error(ErrorCode::kShape, "ragged matrix initializer");
    data_.insert(data_.end(), r.begin(), r.end());
  }
}

Matrix Matrix::identity(std::size_t n) {
  Matrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

Matrix Matrix::diagonal(std::span<const double> diag) {
  Matrix m(diag.size(), diag.size());
  for (std::size_t i = 0; i < diag.size(); ++i) m(i, i) = diag[i];
  return m;
}

Vector Matrix::column(std::size_t j) const {
  Vector c(rows_);
  for (std::size_t i = 0; i < rows_; ++i) c[i] = (*this)(i, j);
  return c;
}

bool all_finite(std::span<const double> values) {
  return std::all_of(values.begin(), values.end(), [](double x) { return std::isfinite(x); });
}

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double norm2(std::span<const double> v) { return std::sqrt(dot(v, v)); }

double max_abs(std::span<const double> v) {
  double m = 0.0;
  for (double x : v) m = std::max(m, std::abs(x));
  return m;
}

Matrix transpose(const Matrix& m) {
  Matrix t(m.cols(), m.rows());
  for (std::size_t i = 0; i < m.rows(); ++i)
    for (std::size_t j = 0; j < m.cols(); ++j) t(j, i) = m(i, j);
  return t;
}

Matrix multiply(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.rows()) {
    throw Error(ErrorCode::kShape, "cannot multiply " + dims(a) + " by " + dims(b));
  }
  Matrix c(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    auto out = c.row(i);
    for (std::size_t k = 0; k < a.cols(); ++k) {
      const double aik = a(i, k);
      if (aik == 0.0) continue;
      const auto brow = b.row(k);
      for (std::size_t j = 0; j < b.cols(); ++j) out[j] += aik * brow[j];
    }
  }
  return c;
}

Vector multiply(const Matrix& m, const Vector& v) {
  if (m.cols() != v.size()) {
    throw Error(ErrorCode::kShape, "cannot multiply " + dims(m) + " by vector of length " +
                                       std::to_string(v.size()));
  }
  Vector out(m.rows());
  for (std::size_t i = 0; i < m.rows(); ++i) out[i] = dot(m.row(i), v.span());
  return out;
}

Vector multiply_transposed(const Matrix& m, const Vector& v) {
  if (m.rows() != v.size()) {
    throw Error(ErrorCode::kShape, "cannot multiply transpose of " + dims(m) +
                                       " by vector of length " + std::to_string(v.size()));
  }
  Vector out(m.cols());
  for (std::size_t i = 0; i < m.rows(); ++i) {
    const auto r = m.row(i);
    const double vi = v[i];
    for (std::size_t j = 0; j < m.cols(); ++j) out[j] += r[j] * vi;
  }
  return out;
}

Matrix gram(const Matrix& m) {
  const std::size_t d = m.cols();
  Matrix g(d, d);
  for (std::size_t i = 0; i < m.rows(); ++i) {
    const auto r = m.row(i);
    for (std::size_t a = 0; a < d; ++a) {
      const double ra = r[a];
      if (ra == 0.0) continue;
      auto grow = g.row(a);
      for (std::size_t b = 0; b <= a; ++b) grow[b] += ra * r[b];
    }
  }
  for (std::size_t a = 0; a < d; ++a)
    for (std::size_t b = a + 1; b < d; ++b) g(a, b) = g(b, a);
  return g;
}

Matrix subtract(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw Error(ErrorCode::kShape, "cannot subtract " + dims(b) + " from " + dims(a));
  }
  std::vector<double> out(a.values());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] -= b.values()[i];
  return Matrix(a.rows(), a.cols(), std::move(out));
}

Vector subtract(const Vector& a, const Vector& b) {
  if (a.size() != b.size()) throw Error(ErrorCode::kShape, "vector length mismatch");
  Vector out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] - b[i];
  return out;
}

Matrix select_rows(const Matrix& m, std::span<const std::size_t> rows) {
  Matrix out(rows.size(), m.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto src = m.row(rows[i]);
    std::copy(src.begin(), src.end(), out.row(i).begin());
  }
  return out;
}

Vector select(const Vector& v, std::span<const std::size_t> idx) {
  Vector out(idx.size());
  for (std::size_t i = 0; i < idx.size(); ++i) out[i] = v[idx[i]];
  return out;
}

SymmetricEigen eigen_symmetric(const Matrix& a) {
  if (a.rows() != a.cols()) throw Error(ErrorCode::kShape, "eigen_symmetric needs a square matrix");
  require_finite(a.values(), "matrix");
  const std::size_t n = a.rows();
  if (n == 0) return {};
  Matrix v(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j <= i; ++j) v(i, j) = v(j, i) = a(i, j);
  if (n == 1) return {Vector{a(0, 0)}, Matrix::identity(1)};

  std::vector<double> d(n);
  std::vector<double> e(n);
  tridiagonalize(v, d, e);
  tridiagonal_ql(v, d, e);
  sort_descending(d, v);
  return {Vector(std::move(d)), std::move(v)};
}

Svd svd(const Matrix& m) {
  require_finite(m.values(), "matrix");
  if (m.rows() < m.cols()) {
    Svd t = svd(transpose(m));
    return {std::move(t.v), std::move(t.singular), std::move(t.u)};
  }
  const std::size_t rows = m.rows();
  const std::size_t n = m.cols();
  // Work on columns stored contiguously.
  Matrix ut = transpose(m);  // n × rows
  Matrix vt = Matrix::identity(n);

  constexpr std::size_t kMaxSweeps = 80;
  for (std::size_t sweep = 0; sweep < kMaxSweeps; ++sweep) {
    bool rotated = false;
    for (std::size_t p = 0; p + 1 < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        auto up = ut.row(p);
        auto uq = ut.row(q);
        const double alpha = dot(up, up);
        const double beta = dot(uq, uq);
        const double gamma = dot(up, uq);
        if (gamma == 0.0 || std::abs(gamma) <= kEps * std::sqrt(alpha * beta)) continue;
        rotated = true;
        const double zeta = (beta - alpha) / (2.0 * gamma);
        const double t = std::copysign(1.0, zeta) / (std::abs(zeta) + std::sqrt(1.0 + zeta * zeta));
        const double c = 1.0 / std::sqrt(1.0 + t * t);
        const double s = c * t;
        for (std::size_t k = 0; k < rows; ++k) {
          const double a = up[k];
          const double b = uq[k];
          up[k] = c * a - s * b;
          uq[k] = s * a + c * b;
        }
        auto vp = vt.row(p);
        auto vq = vt.row(q);
        for (std::size_t k = 0; k < n; ++k) {
          const double a = vp[k];
          const double b = vq[k];
          vp[k] = c * a - s * b;
          vq[k] = s * a + c * b;
        }
      }
    }
    if (!rotated) break;
  }

  std::vector<double> sigma(n);
  for (std::size_t j = 0; j < n; ++j) sigma[j] = norm2(ut.row(j));
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return sigma[a] > sigma[b]; });

  Svd out{Matrix(rows, n), Vector(n), Matrix(n, n)};
  for (std::size_t c = 0; c < n; ++c) {
    const std::size_t j = order[c];
    out.singular[c] = sigma[j];
    const auto col = ut.row(j);
    for (std::size_t k = 0; k < rows; ++k) out.u(k, c) = sigma[j] > 0.0 ? col[k] / sigma[j] : 0.0;
    for (std::size_t k = 0; k < n; ++k) out.v(k, c) = vt(j, k);
  }
  return out;
}

Matrix pseudoinverse(const Matrix& m) {
  if (m.empty()) throw Error(ErrorCode::kInvalidInput, "pseudoinverse of an empty matrix");
  require_finite(m.values(), "matrix");
  const Svd s = svd(m);
  const double rtol = static_cast<double>(std::max(m.rows(), m.cols())) * kEps;
  const double cutoff = rtol * (s.singular.empty() ? 0.0 : s.singular[0]);
  Matrix out(m.cols(), m.rows());
  for (std::size_t c = 0; c < s.singular.size(); ++c) {
    const double sigma = s.singular[c];
    if (!(sigma > cutoff)) continue;
    const double inv = 1.0 / sigma;
    for (std::size_t i = 0; i < m.cols(); ++i) {
      const double vi = s.v(i, c) * inv;
      if (vi == 0.0) continue;
      auto orow = out.row(i);
      for (std::size_t j = 0; j < m.rows(); ++j) orow[j] += vi * s.u(j, c);
    }
  }
  return out;
}

PsdPseudoinverse pseudoinverse_psd(const Matrix& g, std::size_t sample_count) {
  if (g.rows() != g.cols()) throw Error(ErrorCode::kShape, "pseudoinverse_psd needs a square matrix");
  require_finite(g.values(), "matrix");
  const std::size_t d = g.rows();
  PsdPseudoinverse out{Matrix(d, d), Matrix(d, 0), Vector(), 0};
  if (d == 0) return out;

  const SymmetricEigen eig = eigen_symmetric(g);
  double lambda_max = 0.0;
  for (double l : eig.values) lambda_max = std::max(lambda_max, std::abs(l));
  const double cutoff = static_cast<double>(std::max(d, sample_count)) * kEps * lambda_max;

  std::vector<std::size_t> kept;
  for (std::size_t i = 0; i < d; ++i)
    if (eig.values[i] > cutoff) kept.push_back(i);

  out.rank = kept.size();
  out.range_basis = Matrix(d, kept.size());
  out.kept_values = Vector(kept.size());
  for (std::size_t c = 0; c < kept.size(); ++c) {
    const std::size_t k = kept[c];
    out.kept_values[c] = eig.values[k];
    for (std::size_t r = 0; r < d; ++r) out.range_basis(r, c) = eig.vectors(r, k);
  }
  for (std::size_t c = 0; c < kept.size(); ++c) {
    const double inv = 1.0 / out.kept_values[c];
    for (std::size_t i = 0; i < d; ++i) {
      const double vi = out.range_basis(i, c) * inv;
      if (vi == 0.0) continue;
      for (std::size_t j = 0; j <= i; ++j) out.inverse(i, j) += vi * out.range_basis(j, c);
    }
  }
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = 0; j < i; ++j) out.inverse(j, i) = out.inverse(i, j);
  return out;
}

Vector least_squares(const Matrix& z, const Vector& s) {
  if (z.rows() != s.size()) {
    throw Error(ErrorCode::kShape, "least_squares: design has " + std::to_string(z.rows()) +
                                       " rows but target has " + std::to_string(s.size()));
  }
  if (z.rows() == 0) throw Error(ErrorCode::kInvalidInput, "least_squares needs at least one row");
  require_finite(z.values(), "design");
  require_finite(s.values(), "target");
  const PsdPseudoinverse pinv = pseudoinverse_psd(gram(z), z.rows());
  return multiply(pinv.inverse, multiply_transposed(z, s));
}

PcaBasis pca_fit(const Matrix& x, std::size_t k) {
  const std::size_t n = x.rows();
  const std::size_t d = x.cols();
  if (k < 1 || k > std::min(n, d)) {
    throw Error(ErrorCode::kInvalidArgument, "pca_fit: k = " + std::to_string(k) +
                                                 " outside [1, " + std::to_string(std::min(n, d)) +
                                                 "]");
  }
  require_finite(x.values(), "data");

  PcaBasis basis;
  basis.mean = Vector(d);
  for (std::size_t i = 0; i < n; ++i) {
    const auto r = x.row(i);
    for (std::size_t j = 0; j < d; ++j) basis.mean[j] += r[j];
  }
  for (double& m : basis.mean) m /= static_cast<double>(n);

  Matrix centered(n, d);
  for (std::size_t i = 0; i < n; ++i) {
    const auto r = x.row(i);
    auto c = centered.row(i);
    for (std::size_t j = 0; j < d; ++j) c[j] = r[j] - basis.mean[j];
  }
  Matrix cov = gram(centered);
  const double denom = n > 1 ? static_cast<double>(n - 1) : 1.0;
  for (std::size_t i = 0; i < d * d; ++i) cov.data()[i] /= denom;
  for (std::size_t j = 0; j < d; ++j) basis.total_variance += cov(j, j);

  const SymmetricEigen eig = eigen_symmetric(cov);
  basis.components = Matrix(k, d);
  basis.explained_variance = Vector(k);
  for (std::size_t c = 0; c < k; ++c) {
    basis.explained_variance[c] = std::max(0.0, eig.values[c]);
    std::size_t arg = 0;
    for (std::size_t j = 1; j < d; ++j)
      if (std::abs(eig.vectors(j, c)) > std::abs(eig.vectors(arg, c))) arg = j;
    const double sign = eig.vectors(arg, c) < 0.0 ? -1.0 : 1.0;
    for (std::size_t j = 0; j < d; ++j) basis.components(c, j) = sign * eig.vectors(j, c);
  }
  return basis;
}

Matrix pca_transform(const PcaBasis& basis, const Matrix& x) {
  if (x.cols() != basis.input_dim()) {
    throw Error(ErrorCode::kShape, "pca_transform: input has " + std::to_string(x.cols()) +
                                       " columns, basis expects " +
                                       std::to_string(basis.input_dim()));
  }
  const std::size_t k = basis.output_dim();
  Matrix out(x.rows(), k);
  std::vector<double> centered(x.cols());
  for (std::size_t i = 0; i < x.rows(); ++i) {
    const auto r = x.row(i);
    for (std::size_t j = 0; j < x.cols(); ++j) centered[j] = r[j] - basis.mean[j];
    for (std::size_t c = 0; c < k; ++c) out(i, c) = dot(basis.components.row(c), centered);
  }
  return out;
}

Matrix pca_inverse_transform(const PcaBasis& basis, const Matrix& y) {
  if (y.cols() != basis.output_dim()) {
    throw Error(ErrorCode::kShape, "pca_inverse_transform: coordinate dimension mismatch");
  }
  Matrix out = multiply(y, basis.components);
  for (std::size_t i = 0; i < out.rows(); ++i) {
    auto r = out.row(i);
    for (std::size_t j = 0; j < r.size(); ++j) r[j] += basis.mean[j];
  }
  return out;
}

double soft_threshold(double x, double threshold) {
  if (x > threshold) return x - threshold;
  if (x < -threshold) return x + threshold;
  return 0.0;
}

namespace {

void validate_lasso(std::size_t rows, std::size_t target_len, double lambda) {
  if (rows != target_len) {
    throw Error(ErrorCode::kShape, "lasso: design has " + std::to_string(rows) +
                                       " rows but target has " + std::to_string(target_len));
  }
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) {
    throw Error(ErrorCode::kInvalidArgument, "lasso: lambda must be finite and nonnegative");
  }
}

double l1(const Vector& v) {
  double s = 0.0;
  for (double x : v) s += std::abs(x);
  return s;
}

}  // namespace

namespace {

// Runs `stage(lambda_k, cap)` over a geometric path from lambda_max down to
// lambda, warm-starting each stage; only the final stage is traced.
template <typename Stage, typename Objective>
LassoResult solve_path(std::size_t p, double lambda, double lambda_max, const LassoOptions& options,
                       Stage&& stage, Objective&& objective) {
  LassoResult result{Vector(p), 0, false, {}};
  if (options.path_stages > 0 && lambda_max > 0.0 && lambda < lambda_max) {
    const double ratio = std::max(lambda, 1e-8 * lambda_max) / lambda_max;
    for (std::size_t k = 1; k <= options.path_stages; ++k) {
      const double lk = lambda_max * std::pow(ratio, static_cast<double>(k) / static_cast<double>(options.path_stages + 1));
      double change = 0.0;
      for (std::size_t sweep = 0; sweep < options.max_sweeps; ++sweep) {
        change = stage(result.coef, lk);
        ++result.sweeps;
        if (change <= options.tolerance) break;
      }
    }
  }
  for (std::size_t sweep = 0; sweep < options.max_sweeps; ++sweep) {
    const double change = stage(result.coef, lambda);
    ++result.sweeps;
    result.objective_trace.push_back(objective(result.coef));
    if (change <= options.tolerance) {
      result.converged = true;
      break;
    }
  }
  return result;
}

}  // namespace

LassoResult lasso(const Matrix& design, const Vector& target, double lambda,
                  const LassoOptions& options) {
  validate_lasso(design.rows(), target.size(), lambda);
  require_finite(design.values(), "design");
  require_finite(target.values(), "target");
  const std::size_t n = design.rows();
  const std::size_t p = design.cols();
  const Matrix cols = transpose(design);

  std::vector<double> col_sq(p);
  for (std::size_t j = 0; j < p; ++j) col_sq[j] = dot(cols.row(j), cols.row(j));
  std::vector<double> residual(target.begin(), target.end());

  auto sweep = [&](Vector& gamma, double lam) {
    double max_change = 0.0;
    for (std::size_t j = 0; j < p; ++j) {
      if (col_sq[j] == 0.0) continue;
      const auto cj = cols.row(j);
      const double rho = dot(cj, residual) + col_sq[j] * gamma[j];
      const double updated = soft_threshold(rho, lam) / col_sq[j];
      const double delta = updated - gamma[j];
      if (delta != 0.0) {
        for (std::size_t i = 0; i < n; ++i) residual[i] -= delta * cj[i];
        gamma[j] = updated;
        max_change = std::max(max_change, std::abs(delta));
      }
    }
    return max_change;
  };
  auto objective = [&](const Vector& gamma) {
    return 0.5 * dot(residual, residual) + lambda * l1(gamma);
  };
  const double lambda_max = max_abs(multiply_transposed(design, target).span());
  return solve_path(p, lambda, lambda_max, options, sweep, objective);
}

LassoResult lasso_annihilator(const Matrix& q, const Vector& target, double lambda,
                              const LassoOptions& options) {
  validate_lasso(q.rows(), target.size(), lambda);
  require_finite(q.values(), "basis");
  require_finite(target.values(), "target");
  const std::size_t n = q.rows();
  const std::size_t r = q.cols();

  // design·target, with design = I − QQᵀ symmetric and idempotent, so the
  // correlation of column j with the residual is (design·target)_j − (design·γ)_j.
  const Vector qt = multiply_transposed(q, target);
  Vector projected_target(n);
  std::vector<double> diag(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto qi = q.row(i);
    projected_target[i] = target[i] - dot(qi, qt.span());
    diag[i] = 1.0 - dot(qi, qi);
  }
  std::vector<double> u(r, 0.0);  // Qᵀγ

  constexpr double kDegenerateColumn = 1e-12;
  auto sweep = [&](Vector& gamma, double lam) {
    double max_change = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      if (diag[j] <= kDegenerateColumn) continue;
      const auto qj = q.row(j);
      const double design_gamma_j = gamma[j] - dot(qj, u);
      const double rho = projected_target[j] - design_gamma_j + diag[j] * gamma[j];
      const double updated = soft_threshold(rho, lam) / diag[j];
      const double delta = updated - gamma[j];
      if (delta != 0.0) {
        for (std::size_t k = 0; k < r; ++k) u[k] += delta * qj[k];
        gamma[j] = updated;
        max_change = std::max(max_change, std::abs(delta));
      }
    }
    return max_change;
  };
  auto objective = [&](const Vector& gamma) {
    // residual = target − γ + Q·u
    double ss = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double ri = target[i] - gamma[i] + dot(q.row(i), u);
      ss += ri * ri;
    }
    return 0.5 * ss + lambda * l1(gamma);
  };
  double lambda_max = 0.0;
  for (std::size_t j = 0; j < n; ++j)
    if (diag[j] > kDegenerateColumn) lambda_max = std::max(lambda_max, std::abs(projected_target[j]));
  return solve_path(n, lambda, lambda_max, options, sweep, objective);
}

}  // namespace etlt::linalg
