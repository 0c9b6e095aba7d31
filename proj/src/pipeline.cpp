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

#include "etlt/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <map>
#include <set>

#include "etlt/error.hpp"
#include "etlt/rng.hpp"

namespace etlt::pipeline {
namespace {

using calibration::PreprocessSpec;
using calibration::ScoreVector;
using linalg::Matrix;
using linalg::Vector;

std::uint64_t subseed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

void embed(std::vector<FeatureRecord>& records, const tinynet::TinyNet& net) {
  for (auto& r : records) {
    Vector x = r.feature;
    const auto trace = net.forward_trace(x);
    r.feature = trace.activations.back();
    r.logits = trace.logits;
    r.input = std::move(x);
  }
}

std::string fmt(const char* pattern, double x) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), pattern, x);
  return buf;
}

std::string join_tags(const std::set<std::string>& tags) {
  std::string out;
  for (const auto& t : tags) {
    if (!out.empty()) out += '+';
    out += t;
  }
  return out;
}

std::vector<std::string> split_list(const std::string& text, char delimiter) {
  std::vector<std::string> out;
  for (const auto& part : io::split(text, delimiter)) {
    std::string t = io::trim(part);
    if (!t.empty()) out.push_back(std::move(t));
  }
  return out;
}

double parse_number(const std::string& text, const std::string& what) {
  try {
    std::size_t used = 0;
    const double v = std::stod(text, &used);
    if (used == text.size()) return v;
  } catch (const std::exception&) {
  }
  throw Error(ErrorCode::kConfiguration, what + ": '" + text + "' is not a number");
}

std::size_t parse_count(const std::string& text, const std::string& what) {
  const double v = parse_number(text, what);
  if (v < 0 || v != std::floor(v)) {
    throw Error(ErrorCode::kConfiguration, what + ": '" + text + "' is not a nonnegative integer");
  }
  return static_cast<std::size_t>(v);
}

std::size_t processed_dim(std::size_t feature_dim, const PreprocessSpec& prep) {
  return (prep.pca_dim > 0 ? prep.pca_dim : feature_dim) + (prep.add_bias ? 1 : 0);
}

std::vector<FeatureRecord> assemble(const World& world, const OodSet& set, const ExperimentPlan& plan,
                                    std::uint64_t seed) {
  if (plan.total > 0) {
    datasets::MixSpec spec{plan.in_rate, plan.total, seed, set.sources};
    return datasets::mix(world.in_pool, world.out_pools, spec);
  }
  std::vector<FeatureRecord> out = world.in_pool;
  for (const auto& s : set.sources) {
    if (s.weight <= 0.0) continue;
    const auto it = world.out_pools.find(s.tag);
    if (it == world.out_pools.end()) {
      throw Error(ErrorCode::kInsufficientData, "no pool named '" + s.tag + "'");
    }
    out.insert(out.end(), it->second.begin(), it->second.end());
  }
  return out;
}

}  // namespace

// ---------------------------------------------------------------------------

World build_synthetic_world(const SyntheticWorldSpec& spec) {
  const std::size_t d = spec.input_dim;
  const std::size_t c = spec.classes;
  if (d == 0 || c < 2 || spec.pool_size == 0 || spec.train_per_class == 0) {
    throw Error(ErrorCode::kInvalidArgument, "synthetic world needs input_dim ≥ 1, classes ≥ 2 and nonempty pools");
  }
  Rng rng(subseed(spec.seed, 0));
  std::vector<Vector> means(c, Vector(d));
  Vector centroid(d);
  for (auto& m : means) {
    for (std::size_t i = 0; i < d; ++i) {
      m[i] = rng.normal(0.0, spec.class_spread);
      centroid[i] += m[i] / static_cast<double>(c);
    }
  }
  double radius = 0.0;
  for (const auto& m : means) {
    double r2 = 0.0;
    for (std::size_t i = 0; i < d; ++i) r2 += (m[i] - centroid[i]) * (m[i] - centroid[i]);
    radius = std::max(radius, std::sqrt(r2));
  }
  const Matrix class_cov = Matrix::identity(d);
  Matrix scaled_cov(d, d);
  for (std::size_t i = 0; i < d; ++i) scaled_cov(i, i) = spec.class_stddev * spec.class_stddev;

  auto class_spec = [&](std::size_t per_class, std::size_t remainder, std::uint64_t seed) {
    datasets::ClusterSpec cs;
    cs.seed = seed;
    for (std::size_t k = 0; k < c; ++k) {
      cs.clusters.push_back({means[k], scaled_cov, per_class + (k < remainder ? 1 : 0), Origin::kIn,
                             "clusters"});
    }
    return cs;
  };

  const auto train_records = datasets::gen_gaussian_clusters(class_spec(spec.train_per_class, 0, subseed(spec.seed, 1)));
  Matrix train_x = feature_matrix(train_records);
  std::vector<std::size_t> train_y;
  for (std::size_t k = 0; k < c; ++k) train_y.insert(train_y.end(), spec.train_per_class, k);

  std::vector<std::size_t> dims{d};
  dims.insert(dims.end(), spec.hidden.begin(), spec.hidden.end());
  dims.push_back(c);
  tinynet::TrainConfig tc;
  tc.learning_rate = spec.learning_rate;
  tc.epochs = spec.epochs;
  tc.seed = subseed(spec.seed, 3);
  tinynet::TinyNet net =
      tinynet::train(tinynet::TinyNet::create(dims, subseed(spec.seed, 2)), train_x, train_y, tc).model;

  World world;
  world.in_tag = "clusters";
  world.in_pool = datasets::gen_gaussian_clusters(
      class_spec(spec.pool_size / c, spec.pool_size % c, subseed(spec.seed, 4)));

  Vector direction(d);
  double norm = 0.0;
  while (norm < 1e-12) {
    for (double& x : direction) x = rng.normal();
    norm = linalg::norm2(direction);
  }
  Vector far_mean = centroid;
  for (std::size_t i = 0; i < d; ++i) far_mean[i] += direction[i] / norm * (radius + 4.0 * spec.class_spread);
  Matrix near_cov(d, d);
  for (std::size_t i = 0; i < d; ++i) near_cov(i, i) = spec.class_spread * spec.class_spread;

  datasets::ClusterSpec ood;
  ood.seed = subseed(spec.seed, 5);
  ood.clusters.push_back({far_mean, class_cov, spec.pool_size, Origin::kOut, "far"});
  ood.clusters.push_back({centroid, near_cov, spec.pool_size, Origin::kOut, "near"});
  for (auto& r : datasets::gen_gaussian_clusters(ood)) world.out_pools[r.source_tag].push_back(std::move(r));
  world.out_pools["uniform"] =
      datasets::gen_noise_ood(datasets::NoiseKind::kUniform01, d, spec.pool_size, subseed(spec.seed, 6));
  world.out_pools["gaussian"] = datasets::gen_noise_ood(datasets::NoiseKind::kGaussianHalf, d, spec.pool_size,
                                                        subseed(spec.seed, 7), spec.noise_sigma);

  embed(world.in_pool, net);
  for (auto& [tag, pool] : world.out_pools) embed(pool, net);
  world.model = std::move(net);
  return world;
}

World world_from_records(std::vector<FeatureRecord> records) {
  World world;
  std::set<std::string> in_tags;
  for (auto& r : records) {
    if (r.source_tag.empty()) r.source_tag = r.origin == Origin::kIn ? "in" : "out";
    if (r.origin == Origin::kIn) {
      in_tags.insert(r.source_tag);
      world.in_pool.push_back(std::move(r));
    } else {
      world.out_pools[r.source_tag].push_back(std::move(r));
    }
  }
  world.in_tag = join_tags(in_tags);
  return world;
}

World load_world(const std::vector<std::filesystem::path>& paths) {
  std::vector<FeatureRecord> all;
  std::optional<tinynet::TinyNet> model;
  for (std::size_t i = 0; i < paths.size(); ++i) {
    const io::Container c = io::read_container(paths[i]);
    auto records = io::records_from_container(c);
    if (!all.empty() && !records.empty() && records.front().feature.size() != all.front().feature.size()) {
      throw Error(ErrorCode::kShape, "feature width of '" + paths[i].string() + "' differs from earlier files");
    }
    all.insert(all.end(), std::make_move_iterator(records.begin()), std::make_move_iterator(records.end()));
    if (i == 0 && c.contains("tinynet.dims")) model = io::load_tinynet(c);
  }
  World world = world_from_records(std::move(all));
  world.model = std::move(model);
  return world;
}

// ---------------------------------------------------------------------------

OodSet parse_ood_set(const std::string& text) {
  OodSet set;
  double sum = 0.0;
  for (const std::string& part : split_list(text, '+')) {
    datasets::OodSource s;
    const auto colon = part.find(':');
    s.tag = io::trim(part.substr(0, colon));
    s.weight = colon == std::string::npos ? 1.0 : parse_number(io::trim(part.substr(colon + 1)), "OOD weight");
    if (s.tag.empty() || !(s.weight > 0.0)) {
      throw Error(ErrorCode::kConfiguration, "bad OOD set entry '" + part + "'");
    }
    sum += s.weight;
    set.sources.push_back(std::move(s));
  }
  if (set.sources.empty()) throw Error(ErrorCode::kConfiguration, "empty OOD set '" + text + "'");
  for (auto& s : set.sources) s.weight /= sum;
  return set;
}

std::string ood_set_name(const OodSet& set) {
  std::set<std::string> tags;
  for (const auto& s : set.sources) tags.insert(s.tag);
  return join_tags(tags);
}

std::string method_label(const MethodSpec& m) {
  switch (m.kind) {
    case MethodSpec::Kind::kNone: return "none";
    case MethodSpec::Kind::kDlr: return "dlr";
    case MethodSpec::Kind::kRlr: {
      char buf[96];
      std::snprintf(buf, sizeof(buf), "rlr(p=%g,lambda=%g)", m.rlr.percentile, m.rlr.lambda);
      return buf;
    }
    case MethodSpec::Kind::kOnline:
      return m.batch_size == 0 ? "online(b=all)" : "online(b=" + std::to_string(m.batch_size) + ")";
  }
  return "?";
}

MethodSpec parse_method(const std::string& text, const calibration::RlrConfig& rlr) {
  const auto parts = io::split(text, ':');
  const std::string head = parts.empty() ? "" : io::trim(parts[0]);
  if (head == "none" && parts.size() == 1) return MethodSpec::none();
  if (head == "dlr" && parts.size() == 1) return MethodSpec::dlr();
  if (head == "rlr" && parts.size() == 1) return MethodSpec::rlr_with(rlr);
  if (head == "online" && parts.size() <= 2) {
    const std::string b = parts.size() == 2 ? io::trim(parts[1]) : "all";
    if (b == "all") return MethodSpec::online(0);
    const std::size_t n = parse_count(b, "online batch size");
    if (n == 0) throw Error(ErrorCode::kConfiguration, "online batch size must be positive");
    return MethodSpec::online(n);
  }
  throw Error(ErrorCode::kConfiguration, "unknown method '" + text + "'");
}

scorers::ScorerConfig parse_scorer(const std::string& text) {
  const auto parts = io::split(text, ':');
  if (parts.empty() || parts.size() > 3) throw Error(ErrorCode::kConfiguration, "bad scorer '" + text + "'");
  const scorers::ScorerKind kind = scorers::parse_kind(io::trim(parts[0]));
  scorers::ScorerConfig cfg = kind == scorers::ScorerKind::kOdin ? scorers::ScorerConfig::odin()
                                                                 : scorers::ScorerConfig{kind, 1.0, 0.0};
  if (parts.size() >= 2) cfg.temperature = parse_number(io::trim(parts[1]), "temperature");
  if (parts.size() == 3) {
    if (kind != scorers::ScorerKind::kOdin) {
      throw Error(ErrorCode::kConfiguration, "only odin takes an epsilon: '" + text + "'");
    }
    cfg.epsilon = parse_number(io::trim(parts[2]), "epsilon");
  }
  scorers::validate(cfg);
  return cfg;
}

void validate(const ExperimentPlan& plan) {
  if (plan.ood_sets.empty()) throw Error(ErrorCode::kConfiguration, "plan has no OOD sets");
  if (plan.scorers.empty()) throw Error(ErrorCode::kConfiguration, "plan has no scorers");
  if (plan.methods.empty()) throw Error(ErrorCode::kConfiguration, "plan has no methods");
  if (plan.repeats == 0) throw Error(ErrorCode::kConfiguration, "repeats must be at least 1");
  if (plan.total != 0 && !(plan.in_rate > 0.0 && plan.in_rate < 1.0)) {
    throw Error(ErrorCode::kConfiguration, "in_rate must lie in (0, 1)");
  }
  for (const auto& s : plan.scorers) scorers::validate(s);
  for (const auto& m : plan.methods) {
    if (m.kind == MethodSpec::Kind::kRlr) {
      calibration::subset_size(2, m.rlr.percentile);
      if (!(m.rlr.lambda > 0.0)) throw Error(ErrorCode::kConfiguration, "rlr lambda must be positive");
    }
  }
}

World build_world(const ExperimentPlan& plan) {
  return plan.imported() ? load_world(plan.import_paths) : build_synthetic_world(plan.synthetic);
}

ScoreVector apply_method(const MethodSpec& method, const Matrix& features, const ScoreVector& scores,
                         const PreprocessSpec& prep, std::uint64_t stream_seed) {
  switch (method.kind) {
    case MethodSpec::Kind::kNone:
      return scores;
    case MethodSpec::Kind::kDlr:
      return calibration::predict(calibration::fit_dlr(features, scores, prep), features);
    case MethodSpec::Kind::kRlr:
      return calibration::predict(calibration::fit_rlr(features, scores, prep, method.rlr).model, features);
    case MethodSpec::Kind::kOnline: {
      const std::size_t n = features.rows();
      calibration::OnlineDlr online(calibration::preprocess_fit(features, prep));
      const std::size_t batch = method.batch_size == 0 ? std::max<std::size_t>(n, 1) : method.batch_size;
      ScoreVector out(n);
      for (const auto& idx : datasets::stream_indices(n, {batch, stream_seed})) {
        Vector s(idx.size());
        for (std::size_t k = 0; k < idx.size(); ++k) s[k] = scores[idx[k]];
        const ScoreVector calibrated = online.update(linalg::select_rows(features, idx), s);
        for (std::size_t k = 0; k < idx.size(); ++k) out[idx[k]] = calibrated[k];
      }
      return out;
    }
  }
  throw Error(ErrorCode::kConfiguration, "unknown method");
}

RunResult run(const ExperimentPlan& plan) {
  validate(plan);
  return run(plan, build_world(plan));
}

RunResult run(const ExperimentPlan& plan, const World& world) {
  validate(plan);
  RunResult result;
  const tinynet::TinyNet* model = world.model ? &*world.model : nullptr;
  for (std::size_t r = 0; r < plan.repeats; ++r) {
    const std::uint64_t seed = plan.seed + r;
    for (const OodSet& set : plan.ood_sets) {
      const std::vector<FeatureRecord> records = assemble(world, set, plan, seed);
      const Matrix features = feature_matrix(records);
      const std::vector<Origin> labels = origins(records);
      const std::size_t pdim = processed_dim(features.cols(), plan.preprocess);
      for (const auto& scorer : plan.scorers) {
        io::ResultsKey key{world.in_tag, ood_set_name(set), scorers::label(scorer), ""};
        ScoreVector scores;
        try {
          scores = scorers::score_batch(records, scorer, model);
        } catch (const Error& e) {
          std::string detail = e.what();
          const std::string prefix = std::string(error_code_name(e.code())) + ": ";
          if (detail.rfind(prefix, 0) == 0) detail.erase(0, prefix.size());
          throw Error(e.code(), "cell (" + key.in_dataset + ", " + key.ood_dataset + ", " + key.scorer +
                                    "): " + detail);
        }
        for (const auto& method : plan.methods) {
          key.method = method_label(method);
          const auto t0 = std::chrono::steady_clock::now();
          const ScoreVector calibrated = apply_method(method, features, scores, plan.preprocess, seed);
          Cell cell;
          cell.repeat = r;
          cell.key = key;
          cell.report = metrics::evaluate(metrics::make_labeled(calibrated.span(), labels));
          cell.processed_dim = pdim;
          cell.exact_fit = records.size() <= pdim;
          cell.wall_seconds =
              std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
          result.cells.push_back(std::move(cell));
        }
      }
    }
  }
  result.table = aggregate(result.cells);
  return result;
}

io::ResultsTable aggregate(const std::vector<Cell>& cells) {
  std::map<io::ResultsKey, std::vector<const Cell*>> groups;
  for (const auto& c : cells) groups[c.key].push_back(&c);
  io::ResultsTable table;
  for (const auto& [key, group] : groups) {
    std::vector<double> fpr, roc, pr;
    for (const Cell* c : group) {
      fpr.push_back(c->report.fpr95);
      roc.push_back(c->report.auroc);
      pr.push_back(c->report.aupr);
    }
    io::ResultsRow row;
    row.key = key;
    row.fpr95 = io::summarize(fpr);
    row.auroc = io::summarize(roc);
    row.aupr = io::summarize(pr);
    row.repeats = group.size();
    row.n_in = group.front()->report.n_in;
    row.n_out = group.front()->report.n_out;
    table.rows.push_back(std::move(row));
  }
  table.sort();
  return table;
}

std::string render_cells_tsv(const RunResult& result) {
  std::string out = "repeat\tin_dataset\tood_dataset\tscorer\tmethod\tfpr95\tauroc\taupr\tn_in\tn_out\tprocessed_dim\texact_fit\n";
  char buf[160];
  for (const auto& c : result.cells) {
    out += std::to_string(c.repeat) + "\t" + c.key.in_dataset + "\t" + c.key.ood_dataset + "\t" +
           c.key.scorer + "\t" + c.key.method;
    std::snprintf(buf, sizeof(buf), "\t%.10f\t%.10f\t%.10f\t%zu\t%zu\t%zu\t%d\n", c.report.fpr95,
                  c.report.auroc, c.report.aupr, c.report.n_in, c.report.n_out, c.processed_dim,
                  c.exact_fit ? 1 : 0);
    out += buf;
  }
  return out;
}

ExperimentPlan plan_from_config(const io::KeyValueConfig& cfg) {
  ExperimentPlan plan;
  const std::string source = cfg.get_or("source", "synthetic");
  if (source == "import") {
    for (const auto& p : split_list(cfg.get_or("import.paths", ""), ',')) plan.import_paths.emplace_back(p);
    if (plan.import_paths.empty()) throw Error(ErrorCode::kConfiguration, "source = import needs import.paths");
  } else if (source != "synthetic") {
    throw Error(ErrorCode::kConfiguration, "source must be synthetic or import, got '" + source + "'");
  }

  SyntheticWorldSpec& s = plan.synthetic;
  s.input_dim = cfg.get_size("synthetic.input_dim", s.input_dim);
  s.classes = cfg.get_size("synthetic.classes", s.classes);
  if (const auto h = cfg.get("synthetic.hidden")) {
    s.hidden.clear();
    for (const auto& part : split_list(*h, ',')) s.hidden.push_back(parse_count(part, "synthetic.hidden"));
  }
  s.class_spread = cfg.get_double("synthetic.class_spread", s.class_spread);
  s.class_stddev = cfg.get_double("synthetic.class_stddev", s.class_stddev);
  s.train_per_class = cfg.get_size("synthetic.train_per_class", s.train_per_class);
  s.pool_size = cfg.get_size("synthetic.pool_size", s.pool_size);
  s.epochs = cfg.get_size("synthetic.epochs", s.epochs);
  s.learning_rate = cfg.get_double("synthetic.learning_rate", s.learning_rate);
  s.noise_sigma = cfg.get_double("synthetic.noise_sigma", s.noise_sigma);
  s.seed = cfg.get_u64("synthetic.seed", cfg.get_u64("seed", 0));

  for (const auto& set : split_list(cfg.get_or("ood_sets", "far;near;uniform;gaussian"), ';')) {
    plan.ood_sets.push_back(parse_ood_set(set));
  }
  for (const auto& sc : split_list(cfg.get_or("scorers", "msp"), ',')) plan.scorers.push_back(parse_scorer(sc));

  calibration::RlrConfig rlr;
  rlr.lambda = cfg.get_double("rlr.lambda", rlr.lambda);
  rlr.percentile = cfg.get_double("rlr.percentile", rlr.percentile);
  for (const auto& m : split_list(cfg.get_or("methods", "none,dlr"), ',')) {
    plan.methods.push_back(parse_method(m, rlr));
  }

  plan.preprocess.unit_normalize = cfg.get_bool("prep.unit_normalize", false);
  plan.preprocess.pca_dim = cfg.get_size("prep.pca_dim", 0);
  plan.preprocess.add_bias = cfg.get_bool("prep.bias", true);

  plan.repeats = cfg.get_size("repeats", 1);
  plan.seed = cfg.get_u64("seed", 0);
  plan.in_rate = cfg.get_double("in_rate", plan.in_rate);
  plan.total = cfg.get_size("total", plan.total);
  validate(plan);
  return plan;
}

// ---------------------------------------------------------------------------

std::vector<double> rate_grid(double lo, double hi, double step) {
  if (!(step > 0.0) || !(hi >= lo)) throw Error(ErrorCode::kInvalidArgument, "rate grid needs step > 0 and hi ≥ lo");
  const auto steps = static_cast<std::size_t>(std::floor((hi - lo) / step + 0.5));
  std::vector<double> grid;
  for (std::size_t i = 0; i <= steps; ++i) grid.push_back(i == steps ? hi : lo + static_cast<double>(i) * step);
  return grid;
}

std::vector<RatePoint> sweep_in_rate(const ExperimentPlan& base, const std::vector<double>& rates) {
  validate(base);
  return sweep_in_rate(base, build_world(base), rates);
}

std::vector<RatePoint> sweep_in_rate(const ExperimentPlan& base, const World& world,
                                     const std::vector<double>& rates) {
  std::vector<RatePoint> out;
  for (double rate : rates) {
    ExperimentPlan plan = base;
    plan.in_rate = rate;
    out.push_back({rate, run(plan, world)});
  }
  return out;
}

std::size_t RepeatRule::repeats_for(std::size_t m) const {
  if (m == 0) throw Error(ErrorCode::kInvalidArgument, "sample count must be positive");
  const double r = std::ceil(numerator / static_cast<double>(m));
  return std::clamp<std::size_t>(static_cast<std::size_t>(std::max(r, 1.0)), 1, std::max<std::size_t>(cap, 1));
}

std::vector<CountPoint> sweep_sample_count(const ExperimentPlan& base, const World& world,
                                           const std::vector<std::size_t>& counts, const RepeatRule& rule) {
  if (!(base.in_rate > 0.0 && base.in_rate < 1.0)) {
    throw Error(ErrorCode::kConfiguration, "in_rate must lie in (0, 1)");
  }
  const std::size_t d = world.in_pool.empty() ? 0 : world.in_pool.front().feature.size();
  std::vector<CountPoint> out;
  for (std::size_t m : counts) {
    CountPoint p;
    p.in_count = m;
    p.repeats = rule.repeats_for(m);
    p.total = static_cast<std::size_t>(std::floor(static_cast<double>(m) / base.in_rate + 0.5));
    p.exact_fit = p.total <= processed_dim(d, base.preprocess);
    ExperimentPlan plan = base;
    plan.total = p.total;
    plan.repeats = p.repeats;
    p.result = run(plan, world);
    out.push_back(std::move(p));
  }
  return out;
}

namespace {

void append_rows(std::string& out, const std::string& prefix, const io::ResultsTable& table) {
  char buf[128];
  for (const auto& r : table.rows) {
    std::snprintf(buf, sizeof(buf), ",%.6f,%.6f,%.6f,%.6f,%.6f,%.6f\n", r.fpr95.mean, r.fpr95.stdev,
                  r.auroc.mean, r.auroc.stdev, r.aupr.mean, r.aupr.stdev);
    out += prefix + r.key.in_dataset + "," + r.key.ood_dataset + "," + r.key.scorer + "," + r.key.method + buf;
  }
}

}  // namespace

std::string render_rate_sweep_csv(const std::vector<RatePoint>& points) {
  std::string out =
      "in_rate,in_dataset,ood_dataset,scorer,method,fpr95,fpr95_std,auroc,auroc_std,aupr,aupr_std\n";
  for (const auto& p : points) append_rows(out, fmt("%.4f", p.in_rate) + ",", p.result.table);
  return out;
}

std::string render_count_sweep_csv(const std::vector<CountPoint>& points) {
  std::string out =
      "m,total,repeats,exact_fit,in_dataset,ood_dataset,scorer,method,fpr95,fpr95_std,auroc,auroc_std,aupr,"
      "aupr_std\n";
  for (const auto& p : points) {
    append_rows(out,
                std::to_string(p.in_count) + "," + std::to_string(p.total) + "," + std::to_string(p.repeats) +
                    "," + (p.exact_fit ? "1" : "0") + ",",
                p.result.table);
  }
  return out;
}

// ---------------------------------------------------------------------------

double r_squared(const ScoreVector& target, const ScoreVector& fitted) {
  if (target.size() != fitted.size()) throw Error(ErrorCode::kShape, "r_squared length mismatch");
  const std::size_t n = target.size();
  if (n == 0) throw Error(ErrorCode::kInvalidInput, "r_squared needs samples");
  double mean = 0.0, scale = 0.0;
  for (double t : target) {
    mean += t;
    scale += t * t;
  }
  mean /= static_cast<double>(n);
  double ss_tot = 0.0, ss_res = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    ss_tot += (target[i] - mean) * (target[i] - mean);
    ss_res += (target[i] - fitted[i]) * (target[i] - fitted[i]);
  }
  const double floor = 1e-24 * std::max(1.0, scale);
  if (ss_tot <= floor) return ss_res <= floor ? 1.0 : 0.0;
  return std::clamp(1.0 - ss_res / ss_tot, 0.0, 1.0);
}

LinearityReport diagnose_linearity(const Matrix& features, const ScoreVector& scores,
                                   std::span<const Origin> labels) {
  const std::size_t n = features.rows();
  if (n < 3) throw Error(ErrorCode::kInvalidInput, "linearity diagnostics need at least 3 samples");
  if (scores.size() != n || labels.size() != n) {
    throw Error(ErrorCode::kShape, "features, scores and labels must have the same length");
  }
  LinearityReport report;
  const std::size_t k = std::min<std::size_t>(2, std::min(n, features.cols()));
  const linalg::PcaBasis basis = linalg::pca_fit(features, k);
  const Matrix reduced = linalg::pca_transform(basis, features);
  report.coords = Matrix(n, 2);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < k; ++j) report.coords(i, j) = reduced(i, j);

  const auto plane = calibration::fit_dlr(report.coords, scores, PreprocessSpec{});
  report.plane = plane.beta;
  report.plane_r2 = r_squared(scores, calibration::predict(plane, report.coords));

  report.fitted = calibration::predict(calibration::fit_dlr(features, scores, PreprocessSpec{}), features);
  report.r2 = r_squared(scores, report.fitted);

  const auto n_in = static_cast<std::size_t>(std::count(labels.begin(), labels.end(), Origin::kIn));
  if (n_in == 0 || n_in == n) {
    report.warning = "single-class input; separability omitted";
    return report;
  }
  // Predict "in" for fitted ≥ threshold; sweep thresholds over sorted outputs.
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return report.fitted[a] > report.fitted[b];
  });
  std::size_t correct = n - n_in;  // threshold above every output
  std::size_t best = correct;
  for (std::size_t pos = 0; pos < n;) {
    std::size_t end = pos;
    while (end < n && report.fitted[order[end]] == report.fitted[order[pos]]) {
      correct += labels[order[end]] == Origin::kIn ? 1 : 0;
      correct -= labels[order[end]] == Origin::kOut ? 1 : 0;
      ++end;
    }
    best = std::max(best, correct);
    pos = end;
  }
  report.probe_accuracy = static_cast<double>(best) / static_cast<double>(n);
  return report;
}

std::string render_linearity_csv(const LinearityReport& report, const ScoreVector& scores,
                                 std::span<const Origin> labels) {
  std::string out = "pc1,pc2,score,fitted,label\n";
  char buf[160];
  for (std::size_t i = 0; i < report.coords.rows(); ++i) {
    std::snprintf(buf, sizeof(buf), "%.10g,%.10g,%.10g,%.10g,%s\n", report.coords(i, 0), report.coords(i, 1),
                  scores[i], report.fitted[i], labels[i] == Origin::kIn ? "in" : "out");
    out += buf;
  }
  return out;
}

}  // namespace etlt::pipeline
