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
#include <map>
#include <span>
#include <string>
#include <vector>

#include "etlt/linalg.hpp"
#include "etlt/records.hpp"

// Seeded synthetic data, in/out mixing and stream batching. Every generator
// is a pure function of its spec and seed (see etlt::Rng for the algorithm).
namespace etlt::datasets {

struct Cluster {
  linalg::Vector mean;
  linalg::Matrix covariance;  // symmetric PSD, dim × dim
  std::size_t count = 0;
  Origin origin = Origin::kIn;
  std::string tag;
};

struct ClusterSpec {
  std::vector<Cluster> clusters;
  std::uint64_t seed = 0;
};

// Records carry the draw as `feature`; clusters are emitted in order.
std::vector<FeatureRecord> gen_gaussian_clusters(const ClusterSpec& spec);

enum class NoiseKind { kUniform01, kGaussianHalf };

const char* noise_tag(NoiseKind kind);

// Uniform on [0,1]^dim, or N(0.5, sigma²) per coordinate clipped to [0,1].
// All records are out-of-distribution.
std::vector<FeatureRecord> gen_noise_ood(NoiseKind kind, std::size_t dim, std::size_t count,
                                         std::uint64_t seed, double sigma = 1.0);

struct OodSource {
  std::string tag;
  double weight = 1.0;
};

struct MixSpec {
  double in_rate = 0.5;  // (0, 1)
  std::size_t total = 0;
  std::uint64_t seed = 0;
  std::vector<OodSource> ood_sources;  // weights sum to 1
};

using Pools = std::map<std::string, std::vector<FeatureRecord>>;

// round-half-up(in_rate·total).
std::size_t in_count(const MixSpec& spec);
// Largest-remainder split of the out count across sources, in spec order.
std::vector<std::size_t> out_counts(const MixSpec& spec);

// Draws without replacement from each pool, then shuffles the union.
std::vector<FeatureRecord> mix(std::span<const FeatureRecord> in_pool, const Pools& out_pools,
                               const MixSpec& spec);

struct StreamSpec {
  std::size_t batch_size = 1;
  std::uint64_t seed = 0;
};

// Seeded permutation of [0, n) cut into contiguous batches; the last batch
// may be short.
std::vector<std::vector<std::size_t>> stream_indices(std::size_t n, const StreamSpec& spec);
std::vector<std::vector<FeatureRecord>> stream(std::span<const FeatureRecord> records,
                                               const StreamSpec& spec);

// Features from two unit-variance Gaussian clusters whose means sit at
// ±separation/2 along a random unit direction u; the clean score is uᵀz and
// the observed score adds N(0, (noise_fraction·range)²) noise, where range
// is the spread of the clean scores.
struct LinearScoreFamilySpec {
  std::size_t n = 2000;
  std::size_t dim = 16;
  double in_rate = 0.5;
  double separation = 8.0;
  double noise_fraction = 0.5;
  std::uint64_t seed = 0;
};

struct LinearScoreFamily {
  linalg::Matrix features;
  linalg::Vector clean_scores;
  linalg::Vector noisy_scores;
  std::vector<Origin> labels;
  linalg::Vector direction;
};

LinearScoreFamily gen_linear_score_family(const LinearScoreFamilySpec& spec);

}  // namespace etlt::datasets
