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

#include "etlt/io.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <limits>
#include <sstream>

#include "etlt/error.hpp"
#include "json.hpp"

namespace etlt::io {
namespace {

using linalg::Matrix;
using linalg::Vector;

constexpr char kMagic[4] = {'E', 'T', 'L', 'T'};

class ByteWriter {
 public:
  void raw(const void* p, std::size_t n) {
    const auto* b = static_cast<const std::uint8_t*>(p);
    bytes_.insert(bytes_.end(), b, b + n);
  }
  template <typename U>
  void uint_le(U v) {
    for (std::size_t i = 0; i < sizeof(U); ++i) bytes_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void f32(float v) { uint_le(std::bit_cast<std::uint32_t>(v)); }
  void f64(double v) { uint_le(std::bit_cast<std::uint64_t>(v)); }
  std::vector<std::uint8_t> take() { return std::move(bytes_); }

 private:
  std::vector<std::uint8_t> bytes_;
};

class ByteReader {
 public:
  explicit ByteReader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  std::size_t offset() const noexcept { return pos_; }
  std::size_t remaining() const noexcept { return bytes_.size() - pos_; }

  void need(std::size_t n, const std::string& what) const {
    if (remaining() < n) {
      throw Error(ErrorCode::kCorruption, "truncated " + what + " at byte offset " +
                                              std::to_string(pos_) + " (need " + std::to_string(n) +
                                              " bytes, " + std::to_string(remaining()) + " left)");
    }
  }
  template <typename U>
  U uint_le(const std::string& what) {
    need(sizeof(U), what);
    U v = 0;
    for (std::size_t i = 0; i < sizeof(U); ++i) v |= static_cast<U>(bytes_[pos_ + i]) << (8 * i);
    pos_ += sizeof(U);
    return v;
  }
  std::span<const std::uint8_t> take(std::size_t n, const std::string& what) {
    need(n, what);
    auto s = bytes_.subspan(pos_, n);
    pos_ += n;
    return s;
  }

 private:
  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

std::uint64_t product(const std::vector<std::uint64_t>& dims) {
  std::uint64_t p = 1;
  for (std::uint64_t d : dims) {
    if (d != 0 && p > std::numeric_limits<std::uint64_t>::max() / d) {
      throw Error(ErrorCode::kCorruption, "section dimensions overflow");
    }
    p *= d;
  }
  return p;
}

std::size_t payload_size(const Payload& p) {
  return std::visit([](const auto& v) { return v.size(); }, p);
}

Section checked(Section s) {
  if (s.element_count() != payload_size(s.payload)) {
    throw Error(ErrorCode::kShape, "section '" + s.name + "' has " +
                                       std::to_string(payload_size(s.payload)) +
                                       " values for " + std::to_string(s.element_count()) + " elements");
  }
  return s;
}

}  // namespace

std::size_t dtype_size(DType t) {
  switch (t) {
    case DType::kF32: return 4;
    case DType::kF64: return 8;
    case DType::kU8: return 1;
  }
  throw Error(ErrorCode::kFormat, "unknown dtype");
}

DType Section::dtype() const {
  switch (payload.index()) {
    case 0: return DType::kF32;
    case 1: return DType::kF64;
    default: return DType::kU8;
  }
}

std::uint64_t Section::element_count() const { return product(dims); }

Section make_f64(std::string name, std::vector<std::uint64_t> dims, std::vector<double> values) {
  return checked({std::move(name), std::move(dims), std::move(values)});
}

Section make_f32(std::string name, std::vector<std::uint64_t> dims, std::vector<float> values) {
  return checked({std::move(name), std::move(dims), std::move(values)});
}

Section make_u8(std::string name, std::vector<std::uint64_t> dims, std::vector<std::uint8_t> values) {
  return checked({std::move(name), std::move(dims), std::move(values)});
}

Section make_text(std::string name, const std::string& text) {
  return make_u8(std::move(name), {text.size()}, std::vector<std::uint8_t>(text.begin(), text.end()));
}

Section make_matrix(std::string name, const Matrix& m, DType dtype) {
  std::vector<std::uint64_t> dims{m.rows(), m.cols()};
  if (dtype == DType::kF32) {
    return make_f32(std::move(name), std::move(dims),
                    std::vector<float>(m.values().begin(), m.values().end()));
  }
  if (dtype != DType::kF64) throw Error(ErrorCode::kInvalidArgument, "matrices are stored as f32 or f64");
  return make_f64(std::move(name), std::move(dims), m.values());
}

Section make_vector(std::string name, const Vector& v, DType dtype) {
  std::vector<std::uint64_t> dims{v.size()};
  if (dtype == DType::kF32) {
    return make_f32(std::move(name), std::move(dims), std::vector<float>(v.begin(), v.end()));
  }
  if (dtype != DType::kF64) throw Error(ErrorCode::kInvalidArgument, "vectors are stored as f32 or f64");
  return make_f64(std::move(name), std::move(dims), v.values());
}

Matrix to_matrix(const Section& s) {
  if (s.dims.empty() || s.dims.size() > 2) {
    throw Error(ErrorCode::kFormat, "section '" + s.name + "' is not a vector or matrix");
  }
  const std::size_t rows = s.dims[0];
  const std::size_t cols = s.dims.size() == 2 ? s.dims[1] : 1;
  std::vector<double> values = std::visit(
      [](const auto& v) { return std::vector<double>(v.begin(), v.end()); }, s.payload);
  return Matrix(rows, cols, std::move(values));
}

Vector to_vector(const Section& s) {
  if (s.dims.size() != 1) throw Error(ErrorCode::kFormat, "section '" + s.name + "' is not rank 1");
  return Vector(std::visit([](const auto& v) { return std::vector<double>(v.begin(), v.end()); },
                           s.payload));
}

std::string to_text(const Section& s) {
  const auto* bytes = std::get_if<std::vector<std::uint8_t>>(&s.payload);
  if (bytes == nullptr) throw Error(ErrorCode::kFormat, "section '" + s.name + "' is not u8");
  return std::string(bytes->begin(), bytes->end());
}

void Container::add(Section s) {
  if (contains(s.name)) throw Error(ErrorCode::kFormat, "duplicate section '" + s.name + "'");
  sections_.push_back(std::move(s));
}

void Container::set(Section s) {
  for (auto& existing : sections_) {
    if (existing.name == s.name) {
      existing = std::move(s);
      return;
    }
  }
  sections_.push_back(std::move(s));
}

bool Container::remove(const std::string& name) {
  const auto it = std::find_if(sections_.begin(), sections_.end(),
                               [&](const Section& s) { return s.name == name; });
  if (it == sections_.end()) return false;
  sections_.erase(it);
  return true;
}

const Section* Container::find(const std::string& name) const {
  for (const auto& s : sections_)
    if (s.name == name) return &s;
  return nullptr;
}

const Section& Container::at(const std::string& name) const {
  const Section* s = find(name);
  if (s == nullptr) throw Error(ErrorCode::kFormat, "missing section '" + name + "'");
  return *s;
}

std::vector<std::uint8_t> encode(const Container& c) {
  ByteWriter w;
  w.raw(kMagic, 4);
  w.uint_le<std::uint32_t>(kContainerVersion);
  w.uint_le<std::uint32_t>(static_cast<std::uint32_t>(c.sections().size()));
  for (const Section& s : c.sections()) {
    if (s.name.empty() || s.name.size() > 0xFFFF) {
      throw Error(ErrorCode::kInvalidArgument, "section name length out of range");
    }
    if (s.dims.size() > 0xFF) throw Error(ErrorCode::kInvalidArgument, "section rank above 255");
    if (s.element_count() != payload_size(s.payload)) {
      throw Error(ErrorCode::kInvalidArgument, "section '" + s.name + "' payload length " +
                                                   std::to_string(payload_size(s.payload)) +
                                                   " does not match its dims");
    }
    w.uint_le<std::uint16_t>(static_cast<std::uint16_t>(s.name.size()));
    w.raw(s.name.data(), s.name.size());
    w.uint_le<std::uint8_t>(static_cast<std::uint8_t>(s.dtype()));
    w.uint_le<std::uint8_t>(static_cast<std::uint8_t>(s.dims.size()));
    for (std::uint64_t d : s.dims) w.uint_le<std::uint64_t>(d);
    std::visit(
        [&](const auto& values) {
          using T = typename std::decay_t<decltype(values)>::value_type;
          for (T v : values) {
            if constexpr (std::is_same_v<T, float>) w.f32(v);
            else if constexpr (std::is_same_v<T, double>) w.f64(v);
            else w.uint_le<std::uint8_t>(v);
          }
        },
        s.payload);
  }
  return w.take();
}

Container decode(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes);
  const auto magic = r.take(4, "magic");
  if (std::memcmp(magic.data(), kMagic, 4) != 0) {
    throw Error(ErrorCode::kFormat, "bad magic; not an ETLT container");
  }
  const auto version = r.uint_le<std::uint32_t>("version");
  if (version != kContainerVersion) {
    throw Error(ErrorCode::kFormat, "unsupported container version " + std::to_string(version));
  }
  const auto count = r.uint_le<std::uint32_t>("section count");
  Container c;
  for (std::uint32_t k = 0; k < count; ++k) {
    Section s;
    const auto name_len = r.uint_le<std::uint16_t>("section name length");
    const auto name = r.take(name_len, "section name");
    s.name.assign(name.begin(), name.end());
    const auto dtype_offset = r.offset();
    const auto dtype = r.uint_le<std::uint8_t>("dtype");
    if (dtype < 1 || dtype > 3) {
      throw Error(ErrorCode::kFormat, "unknown dtype " + std::to_string(dtype) + " at byte offset " +
                                          std::to_string(dtype_offset));
    }
    const auto rank = r.uint_le<std::uint8_t>("rank");
    for (std::uint8_t i = 0; i < rank; ++i) s.dims.push_back(r.uint_le<std::uint64_t>("dims"));
    const std::uint64_t n = product(s.dims);
    const std::size_t elem = dtype_size(static_cast<DType>(dtype));
    if (n > r.remaining() / elem) {
      throw Error(ErrorCode::kCorruption, "section '" + s.name + "' payload truncated at byte offset " +
                                              std::to_string(r.offset()) + " (needs " +
                                              std::to_string(n * elem) + " bytes, " +
                                              std::to_string(r.remaining()) + " left)");
    }
    const auto payload = r.take(static_cast<std::size_t>(n * elem), "payload");
    auto read_u = [&](std::size_t i, std::size_t width) {
      std::uint64_t v = 0;
      for (std::size_t b = 0; b < width; ++b) v |= static_cast<std::uint64_t>(payload[i * width + b]) << (8 * b);
      return v;
    };
    switch (static_cast<DType>(dtype)) {
      case DType::kF32: {
        std::vector<float> v(n);
        for (std::size_t i = 0; i < n; ++i) v[i] = std::bit_cast<float>(static_cast<std::uint32_t>(read_u(i, 4)));
        s.payload = std::move(v);
        break;
      }
      case DType::kF64: {
        std::vector<double> v(n);
        for (std::size_t i = 0; i < n; ++i) v[i] = std::bit_cast<double>(read_u(i, 8));
        s.payload = std::move(v);
        break;
      }
      case DType::kU8:
        s.payload = std::vector<std::uint8_t>(payload.begin(), payload.end());
        break;
    }
    c.add(std::move(s));
  }
  if (r.remaining() != 0) {
    throw Error(ErrorCode::kFormat, std::to_string(r.remaining()) + " trailing bytes after last section");
  }
  return c;
}

void write_container(const std::filesystem::path& path, const Container& c) {
  const std::vector<std::uint8_t> bytes = encode(c);
  write_text_atomic(path, std::string(bytes.begin(), bytes.end()));
}

Container read_container(const std::filesystem::path& path) {
  const std::string text = read_text(path);
  return decode(std::span<const std::uint8_t>(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

void write_text_atomic(const std::filesystem::path& path, const std::string& text) {
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::kIo, "cannot open '" + tmp.string() + "' for writing");
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    if (!out) throw Error(ErrorCode::kIo, "failed writing '" + tmp.string() + "'");
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp, ec);
    throw Error(ErrorCode::kIo, "cannot rename into '" + path.string() + "'");
  }
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// ---------------------------------------------------------------------------

Container records_to_container(std::span<const FeatureRecord> records, DType feature_dtype) {
  Container c;
  const std::size_t n = records.size();
  c.add(make_matrix("features", n == 0 ? Matrix() : feature_matrix(records), feature_dtype));

  auto optional_block = [&](const char* name, auto member) {
    const std::size_t with = static_cast<std::size_t>(std::count_if(
        records.begin(), records.end(), [&](const FeatureRecord& r) { return (r.*member).has_value(); }));
    if (with == 0) return;
    if (with != n) throw Error(ErrorCode::kInvalidInput, std::string("only some records carry ") + name);
    const std::size_t width = (records.front().*member)->size();
    Matrix m(n, width);
    for (std::size_t i = 0; i < n; ++i) {
      const auto& v = *(records[i].*member);
      if (v.size() != width) throw Error(ErrorCode::kShape, std::string("ragged ") + name);
      std::copy(v.begin(), v.end(), m.row(i).begin());
    }
    c.add(make_matrix(name, m));
  };
  optional_block("logits", &FeatureRecord::logits);
  optional_block("logits_perturbed", &FeatureRecord::perturbed_logits);
  optional_block("inputs", &FeatureRecord::input);

  std::vector<std::uint8_t> labels(n);
  for (std::size_t i = 0; i < n; ++i) labels[i] = static_cast<std::uint8_t>(records[i].origin);
  c.add(make_u8("labels", {n}, std::move(labels)));

  if (std::any_of(records.begin(), records.end(), [](const auto& r) { return !r.source_tag.empty(); })) {
    std::vector<std::uint8_t> tags;
    for (const auto& r : records) {
      tags.insert(tags.end(), r.source_tag.begin(), r.source_tag.end());
      tags.push_back(0);
    }
    const std::uint64_t len = tags.size();
    c.add(make_u8("source_tags", {len}, std::move(tags)));
  }
  return c;
}

std::vector<FeatureRecord> records_from_container(const Container& c) {
  const Matrix features = to_matrix(c.at("features"));
  const std::size_t n = features.rows();
  std::vector<FeatureRecord> records(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto row = features.row(i);
    records[i].feature = Vector(std::vector<double>(row.begin(), row.end()));
  }

  auto optional_block = [&](const char* name, auto member) {
    const Section* s = c.find(name);
    if (s == nullptr) return;
    const Matrix m = to_matrix(*s);
    if (m.rows() != n) {
      throw Error(ErrorCode::kFormat, std::string("section '") + name + "' has " +
                                          std::to_string(m.rows()) + " rows, features have " +
                                          std::to_string(n));
    }
    for (std::size_t i = 0; i < n; ++i) {
      const auto row = m.row(i);
      records[i].*member = Vector(std::vector<double>(row.begin(), row.end()));
    }
  };
  optional_block("logits", &FeatureRecord::logits);
  optional_block("logits_perturbed", &FeatureRecord::perturbed_logits);
  optional_block("inputs", &FeatureRecord::input);

  if (const Section* s = c.find("labels")) {
    const auto* labels = std::get_if<std::vector<std::uint8_t>>(&s->payload);
    if (labels == nullptr || labels->size() != n) {
      throw Error(ErrorCode::kFormat, "labels must be u8 with one entry per record");
    }
    for (std::size_t i = 0; i < n; ++i) {
      if ((*labels)[i] > 1) throw Error(ErrorCode::kFormat, "label values must be 0 (in) or 1 (out)");
      records[i].origin = static_cast<Origin>((*labels)[i]);
    }
  }
  if (const Section* s = c.find("source_tags")) {
    const std::string blob = to_text(*s);
    std::size_t start = 0;
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t end = blob.find('\0', start);
      if (end == std::string::npos) throw Error(ErrorCode::kFormat, "source_tags has fewer entries than records");
      records[i].source_tag = blob.substr(start, end - start);
      start = end + 1;
    }
    if (start != blob.size()) throw Error(ErrorCode::kFormat, "source_tags has more entries than records");
  }
  return records;
}

std::map<std::string, std::string> read_meta(const Container& c) {
  std::map<std::string, std::string> meta;
  const Section* s = c.find("meta");
  if (s == nullptr) return meta;
  for (const std::string& line : split(to_text(*s), '\n')) {
    const auto eq = line.find('=');
    if (eq == std::string::npos) continue;
    meta[line.substr(0, eq)] = line.substr(eq + 1);
  }
  return meta;
}

void write_meta(Container& c, const std::map<std::string, std::string>& meta) {
  std::string text;
  for (const auto& [k, v] : meta) text += k + "=" + v + "\n";
  c.set(make_text("meta", text));
}

void save_tinynet(Container& c, const tinynet::TinyNet& net) {
  const auto dims = net.dims();
  c.set(make_f64("tinynet.dims", {dims.size()}, std::vector<double>(dims.begin(), dims.end())));
  for (std::size_t l = 0; l < net.layers().size(); ++l) {
    c.set(make_matrix("tinynet.w" + std::to_string(l), net.layers()[l].weights));
    c.set(make_vector("tinynet.b" + std::to_string(l), net.layers()[l].bias));
  }
}

tinynet::TinyNet load_tinynet(const Container& c) {
  const Vector dims = to_vector(c.at("tinynet.dims"));
  if (dims.size() < 2) throw Error(ErrorCode::kFormat, "tinynet.dims needs at least two entries");
  std::vector<tinynet::Layer> layers;
  for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
    tinynet::Layer layer{to_matrix(c.at("tinynet.w" + std::to_string(l))),
                         to_vector(c.at("tinynet.b" + std::to_string(l)))};
    if (layer.weights.rows() != static_cast<std::size_t>(dims[l + 1]) ||
        layer.weights.cols() != static_cast<std::size_t>(dims[l])) {
      throw Error(ErrorCode::kFormat, "tinynet layer " + std::to_string(l) + " shape mismatch");
    }
    layers.push_back(std::move(layer));
  }
  return tinynet::TinyNet(std::move(layers));
}

namespace {

void save_preprocessor(Container& c, const std::string& prefix, const calibration::Preprocessor& p) {
  c.set(make_f64(prefix + ".prep", {4},
                 {static_cast<double>(p.input_dim), p.unit_normalize ? 1.0 : 0.0,
                  p.add_bias ? 1.0 : 0.0, p.pca ? static_cast<double>(p.pca->output_dim()) : 0.0}));
  if (p.pca) {
    c.set(make_vector(prefix + ".pca.mean", p.pca->mean));
    c.set(make_matrix(prefix + ".pca.components", p.pca->components));
    c.set(make_vector(prefix + ".pca.explained_variance", p.pca->explained_variance));
    c.set(make_f64(prefix + ".pca.total_variance", {1}, {p.pca->total_variance}));
  }
}

calibration::Preprocessor load_preprocessor(const Container& c, const std::string& prefix) {
  const Vector v = to_vector(c.at(prefix + ".prep"));
  if (v.size() != 4) throw Error(ErrorCode::kFormat, prefix + ".prep must have 4 entries");
  calibration::Preprocessor p;
  p.input_dim = static_cast<std::size_t>(v[0]);
  p.unit_normalize = v[1] != 0.0;
  p.add_bias = v[2] != 0.0;
  if (v[3] != 0.0) {
    linalg::PcaBasis basis;
    basis.mean = to_vector(c.at(prefix + ".pca.mean"));
    basis.components = to_matrix(c.at(prefix + ".pca.components"));
    basis.explained_variance = to_vector(c.at(prefix + ".pca.explained_variance"));
    basis.total_variance = to_vector(c.at(prefix + ".pca.total_variance"))[0];
    if (basis.components.rows() != static_cast<std::size_t>(v[3]) ||
        basis.components.cols() != p.input_dim || basis.mean.size() != p.input_dim) {
      throw Error(ErrorCode::kFormat, prefix + " PCA basis shape mismatch");
    }
    p.pca = std::move(basis);
  }
  return p;
}

}  // namespace

void save_model(Container& c, const calibration::RegressionModel& model) {
  c.set(make_vector("model.beta", model.beta));
  save_preprocessor(c, "model", model.preprocessor);
  const auto& d = model.diagnostics;
  c.set(make_f64("model.diagnostics", {5},
                 {static_cast<double>(d.samples), d.residual_norm, static_cast<double>(d.gram_rank),
                  d.rank_deficient ? 1.0 : 0.0, static_cast<double>(d.zero_norm_rows)}));
}

calibration::RegressionModel load_model(const Container& c) {
  calibration::RegressionModel m;
  m.beta = to_vector(c.at("model.beta"));
  m.preprocessor = load_preprocessor(c, "model");
  if (m.beta.size() != m.preprocessor.output_dim()) {
    throw Error(ErrorCode::kFormat, "model.beta length does not match the preprocessor");
  }
  if (const Section* s = c.find("model.diagnostics")) {
    const Vector d = to_vector(*s);
    if (d.size() == 5) {
      m.diagnostics = {static_cast<std::size_t>(d[0]), d[1], static_cast<std::size_t>(d[2]),
                       d[3] != 0.0, static_cast<std::size_t>(d[4])};
    }
  }
  return m;
}

void save_online(Container& c, const calibration::Preprocessor& prep,
                 const calibration::OnlineState& state) {
  save_preprocessor(c, "online", prep);
  c.set(make_matrix("online.gram", state.gram));
  c.set(make_vector("online.moment", state.moment));
  c.set(make_f64("online.samples_seen", {1}, {static_cast<double>(state.samples_seen)}));
}

std::pair<calibration::Preprocessor, calibration::OnlineState> load_online(const Container& c) {
  calibration::Preprocessor prep = load_preprocessor(c, "online");
  calibration::OnlineState state;
  state.gram = to_matrix(c.at("online.gram"));
  state.moment = to_vector(c.at("online.moment"));
  state.samples_seen = static_cast<std::size_t>(to_vector(c.at("online.samples_seen"))[0]);
  if (state.gram.rows() != state.moment.size() || state.gram.cols() != state.moment.size() ||
      state.moment.size() != prep.output_dim()) {
    throw Error(ErrorCode::kFormat, "online state shapes are inconsistent");
  }
  return {std::move(prep), std::move(state)};
}

// ---------------------------------------------------------------------------

void ResultsTable::sort() {
  std::stable_sort(rows.begin(), rows.end(),
                   [](const ResultsRow& a, const ResultsRow& b) { return a.key < b.key; });
}

MetricSummary summarize(std::span<const double> values) {
  MetricSummary s;
  if (values.empty()) return s;
  for (double v : values) s.mean += v;
  s.mean /= static_cast<double>(values.size());
  if (values.size() > 1) {
    double ss = 0.0;
    for (double v : values) ss += (v - s.mean) * (v - s.mean);
    s.stdev = std::sqrt(ss / static_cast<double>(values.size() - 1));
  }
  return s;
}

std::string render_tsv(const ResultsTable& table) {
  std::string out =
      "in_dataset\tood_dataset\tscorer\tmethod\tfpr95\tfpr95_std\tauroc\tauroc_std\taupr\taupr_std"
      "\trepeats\tn_in\tn_out\n";
  char buf[256];
  for (const auto& r : table.rows) {
    out += r.key.in_dataset + "\t" + r.key.ood_dataset + "\t" + r.key.scorer + "\t" + r.key.method;
    std::snprintf(buf, sizeof(buf), "\t%.6f\t%.6f\t%.6f\t%.6f\t%.6f\t%.6f\t%zu\t%zu\t%zu\n",
                  r.fpr95.mean, r.fpr95.stdev, r.auroc.mean, r.auroc.stdev, r.aupr.mean,
                  r.aupr.stdev, r.repeats, r.n_in, r.n_out);
    out += buf;
  }
  return out;
}

std::string render_json(const ResultsTable& table) {
  nlohmann::ordered_json rows = nlohmann::ordered_json::array();
  for (const auto& r : table.rows) {
    nlohmann::ordered_json j;
    j["in_dataset"] = r.key.in_dataset;
    j["ood_dataset"] = r.key.ood_dataset;
    j["scorer"] = r.key.scorer;
    j["method"] = r.key.method;
    auto metric = [](const MetricSummary& m) {
      return nlohmann::ordered_json{{"mean", m.mean}, {"stdev", m.stdev}};
    };
    j["fpr95"] = metric(r.fpr95);
    j["auroc"] = metric(r.auroc);
    j["aupr"] = metric(r.aupr);
    j["repeats"] = r.repeats;
    j["n_in"] = r.n_in;
    j["n_out"] = r.n_out;
    rows.push_back(std::move(j));
  }
  nlohmann::ordered_json doc;
  doc["rows"] = std::move(rows);
  return doc.dump(2) + "\n";
}

// ---------------------------------------------------------------------------

std::vector<std::string> split(const std::string& text, char delimiter) {
  std::vector<std::string> parts;
  std::string current;
  for (char ch : text) {
    if (ch == delimiter) {
      parts.push_back(std::move(current));
      current.clear();
    } else {
      current.push_back(ch);
    }
  }
  if (!current.empty()) parts.push_back(std::move(current));
  return parts;
}

std::string trim(const std::string& text) {
  const auto first = text.find_first_not_of(" \t\r\n");
  if (first == std::string::npos) return {};
  const auto last = text.find_last_not_of(" \t\r\n");
  return text.substr(first, last - first + 1);
}

KeyValueConfig KeyValueConfig::parse(const std::string& text) {
  KeyValueConfig cfg;
  std::size_t line_no = 0;
  for (const std::string& raw : split(text, '\n')) {
    ++line_no;
    std::string line = raw;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw Error(ErrorCode::kConfiguration, "line " + std::to_string(line_no) + ": expected key = value");
    }
    const std::string key = trim(line.substr(0, eq));
    if (key.empty()) throw Error(ErrorCode::kConfiguration, "line " + std::to_string(line_no) + ": empty key");
    cfg.values_[key] = trim(line.substr(eq + 1));
  }
  return cfg;
}

KeyValueConfig KeyValueConfig::load(const std::filesystem::path& path) { return parse(read_text(path)); }

std::optional<std::string> KeyValueConfig::get(const std::string& key) const {
  const auto it = values_.find(key);
  if (it == values_.end()) return std::nullopt;
  return it->second;
}

std::string KeyValueConfig::get_or(const std::string& key, const std::string& fallback) const {
  return get(key).value_or(fallback);
}

double KeyValueConfig::get_double(const std::string& key, double fallback) const {
  const auto v = get(key);
  if (!v) return fallback;
  try {
    std::size_t used = 0;
    const double x = std::stod(*v, &used);
    if (used != v->size()) throw std::invalid_argument(*v);
    return x;
  } catch (const std::exception&) {
    throw Error(ErrorCode::kConfiguration, "key '" + key + "': '" + *v + "' is not a number");
  }
}

std::uint64_t KeyValueConfig::get_u64(const std::string& key, std::uint64_t fallback) const {
  const auto v = get(key);
  if (!v) return fallback;
  try {
    std::size_t used = 0;
    if (!v->empty() && (*v)[0] == '-') throw std::invalid_argument(*v);
    const unsigned long long x = std::stoull(*v, &used);
    if (used != v->size()) throw std::invalid_argument(*v);
    return x;
  } catch (const std::exception&) {
    throw Error(ErrorCode::kConfiguration, "key '" + key + "': '" + *v + "' is not a nonnegative integer");
  }
}

std::size_t KeyValueConfig::get_size(const std::string& key, std::size_t fallback) const {
  return static_cast<std::size_t>(get_u64(key, fallback));
}

bool KeyValueConfig::get_bool(const std::string& key, bool fallback) const {
  const auto v = get(key);
  if (!v) return fallback;
  if (*v == "true" || *v == "1" || *v == "yes" || *v == "on") return true;
  if (*v == "false" || *v == "0" || *v == "no" || *v == "off") return false;
  throw Error(ErrorCode::kConfiguration, "key '" + key + "': '" + *v + "' is not a boolean");
}

}  // namespace etlt::io
