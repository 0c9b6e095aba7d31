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

#include "etlt/datasets.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "etlt/error.hpp"
#include "etlt/rng.hpp"

namespace etlt::datasets {
namespace {

using linalg::Matrix;
using linalg::Vector;

// Returns L with L·Lᵀ = cov, via the eigendecomposition (handles singular
// covariances).
Matrix covariance_factor(const Matrix& cov, std::size_t index) {
  const std::size_t d = cov.rows();
  if (cov.cols() != d) throw Error(ErrorCode::kShape, "covariance must be square");
  double scale = 0.0;
  for (double v : cov.values()) scale = std::max(scale, std::abs(v));
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = 0; j < i; ++j)
      if (std::abs(cov(i, j) - cov(j, i)) > 1e-12 * std::max(1.0, scale)) {
        throw Error(ErrorCode::kInvalidInput, "covariance of cluster " + std::to_string(index) +
                                                  " is not symmetric");
      }
  const linalg::SymmetricEigen eig = linalg::eigen_symmetric(cov);
  const double tol = 1e-12 * std::max(1.0, scale) * static_cast<double>(d);
  Matrix factor(d, d);
  for (std::size_t c = 0; c < d; ++c) {
    const double l = eig.values[c];
    if (l < -tol) {
      throw Error(ErrorCode::kInvalidInput, "covariance of cluster " + std::to_string(index) +
                                                " is not positive semidefinite");
    }
    const double root = std::sqrt(std::max(0.0, l));
    for (std::size_t r = 0; r < d; ++r) factor(r, c) = eig.vectors(r, c) * root;
  }
  return factor;
}

void draw_without_replacement(std::span<const FeatureRecord> pool, std::size_t count,
                              const std::string& name, Rng& rng,
                              std::vector<FeatureRecord>& out) {
  if (count > pool.size()) {
    throw Error(ErrorCode::kInsufficientData, "pool '" + name + "' has " +
                                                  std::to_string(pool.size()) +
                                                  " records, " + std::to_string(count) +
                                                  " requested");
  }
  std::vector<std::size_t> idx(pool.size());
  std::iota(idx.begin(), idx.end(), 0);
  // Partial Fisher–Yates: the first `count` slots become the sample.
  for (std::size_t i = 0; i < count; ++i) {
    const std::size_t j = i + static_cast<std::size_t>(rng.uniform_index(pool.size() - i));
    std::swap(idx[i], idx[j]);
    out.push_back(pool[idx[i]]);
  }
}

}  // namespace

std::vector<FeatureRecord> gen_gaussian_clusters(const ClusterSpec& spec) {
  Rng rng(spec.seed);
  std::vector<FeatureRecord> out;
  for (std::size_t k = 0; k < spec.clusters.size(); ++k) {
    const Cluster& c = spec.clusters[k];
    const std::size_t d = c.mean.size();
    if (c.covariance.rows() != d) {
      throw Error(ErrorCode::kShape, "cluster " + std::to_string(k) + " mean/covariance mismatch");
    }
    const Matrix factor = covariance_factor(c.covariance, k);
    std::vector<double> xi(d);
    for (std::size_t n = 0; n < c.count; ++n) {
      for (double& x : xi) x = rng.normal();
      FeatureRecord r;
      r.feature = c.mean;
      for (std::size_t i = 0; i < d; ++i) r.feature[i] += linalg::dot(factor.row(i), xi);
      r.origin = c.origin;
      r.source_tag = c.tag;
      out.push_back(std::move(r));
    }
  }
  return out;
}

const char* noise_tag(NoiseKind kind) {
  return kind == NoiseKind::kUniform01 ? "uniform" : "gaussian";
}

std::vector<FeatureRecord> gen_noise_ood(NoiseKind kind, std::size_t dim, std::size_t count,
                                         std::uint64_t seed, double sigma) {
  if (count == 0 || dim == 0) throw Error(ErrorCode::kInvalidArgument, "noise count and dim must be positive");
  if (!(sigma >= 0.0)) throw Error(ErrorCode::kInvalidArgument, "sigma must be nonnegative");
  Rng rng(seed);
  std::vector<FeatureRecord> out(count);
  for (auto& r : out) {
    r.feature = Vector(dim);
    for (double& x : r.feature) {
      x = kind == NoiseKind::kUniform01 ? rng.uniform()
                                        : std::clamp(rng.normal(0.5, sigma), 0.0, 1.0);
    }
    r.origin = Origin::kOut;
    r.source_tag = noise_tag(kind);
  }
  return out;
}

std::size_t in_count(const MixSpec& spec) {
  return static_cast<std::size_t>(std::floor(spec.in_rate * static_cast<double>(spec.total) + 0.5));
}

std::vector<std::size_t> out_counts(const MixSpec& spec) {
  const std::size_t n_in = std::min(in_count(spec), spec.total);
  const std::size_t n_out = spec.total - n_in;
  std::vector<std::size_t> counts(spec.ood_sources.size());
  std::vector<double> remainders(spec.ood_sources.size());
  std::size_t assigned = 0;
  for (std::size_t i = 0; i < counts.size(); ++i) {
    const double exact = spec.ood_sources[i].weight * static_cast<double>(n_out);
    counts[i] = static_cast<std::size_t>(std::floor(exact));
    remainders[i] = exact - std::floor(exact);
    assigned += counts[i];
  }
  std::vector<std::size_t> order(counts.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return remainders[a] > remainders[b]; });
  for (std::size_t k = 0; assigned < n_out && !order.empty(); k = (k + 1) % order.size()) {
    ++counts[order[k]];
    ++assigned;
  }
  return counts;
}

std::vector<FeatureRecord> mix(std::span<const FeatureRecord> in_pool, const Pools& out_pools,
                               const MixSpec& spec) {
  if (!(spec.in_rate > 0.0 && spec.in_rate < 1.0)) {
    throw Error(ErrorCode::kInvalidArgument, "in_rate must lie in (0, 1)");
  }
  if (spec.total < 2) throw Error(ErrorCode::kInvalidArgument, "mix total must be at least 2");
  if (spec.ood_sources.empty()) throw Error(ErrorCode::kInvalidArgument, "mix needs an OOD source");
  double weight_sum = 0.0;
  for (const auto& s : spec.ood_sources) {
    if (!(s.weight >= 0.0)) throw Error(ErrorCode::kInvalidArgument, "negative OOD weight");
    weight_sum += s.weight;
  }
  if (std::abs(weight_sum - 1.0) > 1e-9) {
    throw Error(ErrorCode::kInvalidArgument, "OOD source weights must sum to 1");
  }

  Rng rng(spec.seed);
  std::vector<FeatureRecord> out;
  out.reserve(spec.total);
  draw_without_replacement(in_pool, in_count(spec), "in", rng, out);
  const std::vector<std::size_t> counts = out_counts(spec);
  for (std::size_t i = 0; i < counts.size(); ++i) {
    const std::string& tag = spec.ood_sources[i].tag;
    const auto it = out_pools.find(tag);
    if (it == out_pools.end()) {
      if (counts[i] == 0) continue;
      throw Error(ErrorCode::kInsufficientData, "no pool named '" + tag + "'");
    }
    draw_without_replacement(it->second, counts[i], tag, rng, out);
  }
  rng.shuffle(std::span<FeatureRecord>(out));
  return out;
}

std::vector<std::vector<std::size_t>> stream_indices(std::size_t n, const StreamSpec& spec) {
  if (spec.batch_size == 0) throw Error(ErrorCode::kInvalidArgument, "batch size must be positive");
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  Rng rng(spec.seed);
  rng.shuffle(std::span<std::size_t>(order));
  std::vector<std::vector<std::size_t>> batches;
  for (std::size_t start = 0; start < n; start += spec.batch_size) {
    const std::size_t stop = std::min(n, start + spec.batch_size);
    batches.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(start),
                         order.begin() + static_cast<std::ptrdiff_t>(stop));
  }
  return batches;
}

std::vector<std::vector<FeatureRecord>> stream(std::span<const FeatureRecord> records,
                                               const StreamSpec& spec) {
  std::vector<std::vector<FeatureRecord>> out;
  for (const auto& batch : stream_indices(records.size(), spec)) {
    auto& b = out.emplace_back();
    b.reserve(batch.size());
    for (std::size_t i : batch) b.push_back(records[i]);
  }
  return out;
}

LinearScoreFamily gen_linear_score_family(const LinearScoreFamilySpec& spec) {
  if (spec.n < 2 || spec.dim == 0) throw Error(ErrorCode::kInvalidArgument, "family needs n ≥ 2 and dim ≥ 1");
  if (!(spec.in_rate > 0.0 && spec.in_rate < 1.0)) {
    throw Error(ErrorCode::kInvalidArgument, "in_rate must lie in (0, 1)");
  }
  Rng rng(spec.seed);
  LinearScoreFamily fam;
  fam.direction = Vector(spec.dim);
  for (double& x : fam.direction) x = rng.normal();
  const double norm = linalg::norm2(fam.direction.span());
  for (double& x : fam.direction) x /= norm;

  const std::size_t n_in = static_cast<std::size_t>(std::floor(spec.in_rate * static_cast<double>(spec.n) + 0.5));
  fam.features = Matrix(spec.n, spec.dim);
  fam.clean_scores = Vector(spec.n);
  fam.labels.resize(spec.n);
  for (std::size_t i = 0; i < spec.n; ++i) {
    const bool in = i < n_in;
    fam.labels[i] = in ? Origin::kIn : Origin::kOut;
    const double offset = (in ? 0.5 : -0.5) * spec.separation;
    auto row = fam.features.row(i);
    for (std::size_t j = 0; j < spec.dim; ++j) row[j] = offset * fam.direction[j] + rng.normal();
    fam.clean_scores[i] = linalg::dot(row, fam.direction.span());
  }
  const auto [lo, hi] = std::minmax_element(fam.clean_scores.begin(), fam.clean_scores.end());
  const double sigma = spec.noise_fraction * (*hi - *lo);
  fam.noisy_scores = fam.clean_scores;
  for (double& s : fam.noisy_scores) s += sigma * rng.normal();
  return fam;
}

}  // namespace etlt::datasets
