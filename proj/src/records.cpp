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

#include "etlt/records.hpp"

#include <algorithm>

#include "etlt/error.hpp"

namespace etlt {

linalg::Matrix feature_matrix(std::span<const FeatureRecord> records) {
  if (records.empty()) return {};
  const std::size_t d = records.front().feature.size();
  linalg::Matrix out(records.size(), d);
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto& f = records[i].feature;
    if (f.size() != d) {
      throw Error(ErrorCode::kShape, "record " + std::to_string(i) + " has feature dimension " +
                                         std::to_string(f.size()) + ", expected " +
                                         std::to_string(d));
    }
    std::copy(f.begin(), f.end(), out.row(i).begin());
  }
  return out;
}

std::vector<Origin> origins(std::span<const FeatureRecord> records) {
  std::vector<Origin> out;
  out.reserve(records.size());
  for (const auto& r : records) out.push_back(r.origin);
  return out;
}

}  // namespace etlt
