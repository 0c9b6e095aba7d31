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
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "etlt/calibration.hpp"
#include "etlt/linalg.hpp"
#include "etlt/records.hpp"
#include "etlt/tinynet.hpp"

namespace etlt::io {

// ---------------------------------------------------------------------------
// "ETLT" tensor container.
//
//   magic          4 bytes  "ETLT"
//   version        u32 LE   = 1
//   section count  u32 LE
//   per section:
//     name length  u16 LE, then UTF-8 name bytes
//     dtype        u8       1 = f32, 2 = f64, 3 = u8
//     rank         u8
//     dims         rank × u64 LE
//     payload      product(dims) elements, row-major, little-endian
// ---------------------------------------------------------------------------

inline constexpr std::uint32_t kContainerVersion = 1;

enum class DType : std::uint8_t { kF32 = 1, kF64 = 2, kU8 = 3 };

std::size_t dtype_size(DType t);

using Payload = std::variant<std::vector<float>, std::vector<double>, std::vector<std::uint8_t>>;

struct Section {
  std::string name;
  std::vector<std::uint64_t> dims;
  Payload payload;

  DType dtype() const;
  std::uint64_t element_count() const;

  bool operator==(const Section&) const = default;
};

Section make_f64(std::string name, std::vector<std::uint64_t> dims, std::vector<double> values);
Section make_f32(std::string name, std::vector<std::uint64_t> dims, std::vector<float> values);
Section make_u8(std::string name, std::vector<std::uint64_t> dims, std::vector<std::uint8_t> values);
Section make_text(std::string name, const std::string& text);
Section make_matrix(std::string name, const linalg::Matrix& m, DType dtype = DType::kF64);
Section make_vector(std::string name, const linalg::Vector& v, DType dtype = DType::kF64);

// Numeric payload widened to double. Rank-2 sections become rows × cols;
// rank-1 sections become n × 1.
linalg::Matrix to_matrix(const Section& s);
linalg::Vector to_vector(const Section& s);
std::string to_text(const Section& s);

class Container {
 public:
  // Throws kFormat on a duplicate name.
  void add(Section s);
  // Adds or replaces.
  void set(Section s);
  bool remove(const std::string& name);

  bool contains(const std::string& name) const { return find(name) != nullptr; }
  const Section* find(const std::string& name) const;
  const Section& at(const std::string& name) const;  // kFormat when missing
  const std::vector<Section>& sections() const noexcept { return sections_; }

  bool operator==(const Container&) const = default;

 private:
  std::vector<Section> sections_;
};

std::vector<std::uint8_t> encode(const Container& c);
// Validates magic, version and lengths. kFormat for structural problems,
// kCorruption (with byte offset) for truncated payloads.
Container decode(std::span<const std::uint8_t> bytes);

// Atomic: writes a sibling temp file, then renames.
void write_container(const std::filesystem::path& path, const Container& c);
Container read_container(const std::filesystem::path& path);

void write_text_atomic(const std::filesystem::path& path, const std::string& text);
std::string read_text(const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// Canonical sections: "features" (n×d), "logits" (n×C), "labels" (n, u8,
// 0 = in / 1 = out), "source_tags" (u8, one NUL-terminated UTF-8 string per
// record), plus "inputs" and "logits_perturbed" when present, and a "meta"
// text section of key=value lines.
// ---------------------------------------------------------------------------

Container records_to_container(std::span<const FeatureRecord> records,
                               DType feature_dtype = DType::kF64);
std::vector<FeatureRecord> records_from_container(const Container& c);

std::map<std::string, std::string> read_meta(const Container& c);
void write_meta(Container& c, const std::map<std::string, std::string>& meta);

// Checkpoints.
void save_tinynet(Container& c, const tinynet::TinyNet& net);
tinynet::TinyNet load_tinynet(const Container& c);
void save_model(Container& c, const calibration::RegressionModel& model);
calibration::RegressionModel load_model(const Container& c);
void save_online(Container& c, const calibration::Preprocessor& prep,
                 const calibration::OnlineState& state);
std::pair<calibration::Preprocessor, calibration::OnlineState> load_online(const Container& c);

// ---------------------------------------------------------------------------
// Results tables.
// ---------------------------------------------------------------------------

struct ResultsKey {
  std::string in_dataset;
  std::string ood_dataset;
  std::string scorer;
  std::string method;

  auto operator<=>(const ResultsKey&) const = default;
};

struct MetricSummary {
  double mean = 0.0;
  double stdev = 0.0;  // sample standard deviation; 0 for a single repeat
};

struct ResultsRow {
  ResultsKey key;
  MetricSummary fpr95;
  MetricSummary auroc;
  MetricSummary aupr;
  std::size_t repeats = 0;
  std::size_t n_in = 0;
  std::size_t n_out = 0;
};

struct ResultsTable {
  std::vector<ResultsRow> rows;

  // Lexicographic by key.
  void sort();
};

MetricSummary summarize(std::span<const double> values);

// Tab-separated text with a header line; metrics printed with 6 decimals.
std::string render_tsv(const ResultsTable& table);
// Structured form with full-precision values.
std::string render_json(const ResultsTable& table);

// ---------------------------------------------------------------------------
// Flat key = value configuration text. '#' starts a comment; later keys
// override earlier ones.
// ---------------------------------------------------------------------------

class KeyValueConfig {
 public:
  static KeyValueConfig parse(const std::string& text);
  static KeyValueConfig load(const std::filesystem::path& path);

  void set(const std::string& key, std::string value) { values_[key] = std::move(value); }
  bool contains(const std::string& key) const { return values_.count(key) > 0; }
  std::optional<std::string> get(const std::string& key) const;
  std::string get_or(const std::string& key, const std::string& fallback) const;
  double get_double(const std::string& key, double fallback) const;
  std::size_t get_size(const std::string& key, std::size_t fallback) const;
  std::uint64_t get_u64(const std::string& key, std::uint64_t fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;
  const std::map<std::string, std::string>& values() const noexcept { return values_; }

 private:
  std::map<std::string, std::string> values_;
};

std::vector<std::string> split(const std::string& text, char delimiter);
std::string trim(const std::string& text);

}  // namespace etlt::io
