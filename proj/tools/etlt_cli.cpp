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

// etlt: command-line front end for scoring, calibration and evaluation.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "etlt/calibration.hpp"
#include "etlt/error.hpp"
#include "etlt/io.hpp"
#include "etlt/metrics.hpp"
#include "etlt/pipeline.hpp"
#include "etlt/records.hpp"
#include "etlt/scorers.hpp"

namespace {

using namespace etlt;
namespace fs = std::filesystem;

constexpr int kUsageError = 1;
constexpr int kDataError = 2;

std::string join(const std::set<std::string>& tags) {
  std::string out;
  for (const auto& t : tags) out += (out.empty() ? "" : "+") + t;
  return out;
}

linalg::Vector scores_section(const io::Container& c, const std::string& name) {
  std::string section = name;
  if (section.empty()) section = c.contains("scores_calibrated") ? "scores_calibrated" : "scores";
  return io::to_vector(c.at(section));
}

struct PrepFlags {
  bool unit_norm = false;
  std::size_t pca_dim = 0;
  bool bias = true;

  void attach(CLI::App* app) {
    app->add_flag("--unit-norm", unit_norm, "Normalize feature rows to unit length");
    app->add_option("--pca-dim", pca_dim, "PCA target dimension (0 = off)");
    app->add_option("--bias", bias, "Append a constant-1 column (true/false)");
  }
  calibration::PreprocessSpec spec() const { return {unit_norm, pca_dim, bias}; }
};

// Appends "--key=value" for config entries whose flag was not given.
std::vector<std::string> merge_config(std::vector<std::string> args) {
  std::optional<std::string> path;
  for (std::size_t i = 0; i + 1 < args.size(); ++i) {
    if (args[i] == "--config") path = args[i + 1];
  }
  for (const auto& a : args) {
    if (a.rfind("--config=", 0) == 0) path = a.substr(9);
  }
  if (!path) return args;
  const io::KeyValueConfig cfg = io::KeyValueConfig::load(*path);
  for (const auto& [key, value] : cfg.values()) {
    const std::string flag = "--" + key;
    bool given = false;
    for (const auto& a : args) given = given || a == flag || a.rfind(flag + "=", 0) == 0;
    if (!given) args.push_back(flag + "=" + value);
  }
  return args;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Test-time linear calibration of OOD scores", "etlt"};
  app.require_subcommand(1);
  app.fallthrough();
  std::string config_path;
  app.add_option("--config", config_path, "Flat key = value file; flags override it");
  std::uint64_t seed = 0;

  // synth ------------------------------------------------------------------
  auto* synth = app.add_subcommand("synth", "Generate a synthetic mixed container");
  pipeline::SyntheticWorldSpec world_spec;
  std::string synth_out, synth_ood = "far";
  double synth_rate = 0.5;
  std::size_t synth_total = 1000;
  synth->add_option("--out", synth_out, "Output container")->required();
  synth->add_option("--seed", seed, "Seed for the world and the mix");
  synth->add_option("--ood", synth_ood, "OOD set, e.g. far or far:0.5+uniform:0.5");
  synth->add_option("--in-rate", synth_rate, "Fraction of in-distribution samples");
  synth->add_option("--total", synth_total, "Mixed sample count (0 = every pooled record)");
  synth->add_option("--input-dim", world_spec.input_dim);
  synth->add_option("--classes", world_spec.classes);
  synth->add_option("--pool-size", world_spec.pool_size);
  synth->add_option("--epochs", world_spec.epochs);
  synth->add_option("--noise-sigma", world_spec.noise_sigma);

  // score ------------------------------------------------------------------
  auto* score = app.add_subcommand("score", "Compute base OOD scores into a copy of a container");
  std::string score_in, score_out, scorer_name = "msp";
  std::optional<double> temperature;
  double epsilon = 0.0;
  score->add_option("--in", score_in)->required();
  score->add_option("--out", score_out)->required();
  score->add_option("--scorer", scorer_name, "msp, energy, kl or odin");
  score->add_option("--temperature", temperature, "Default 1 (odin: 1000)");
  score->add_option("--epsilon", epsilon, "ODIN perturbation size");
  score->add_option("--seed", seed);

  // calibrate --------------------------------------------------------------
  auto* calibrate = app.add_subcommand("calibrate", "Fit DLR or RLR and write calibrated scores");
  std::string cal_in, cal_out, method = "dlr";
  calibration::RlrConfig rlr;
  PrepFlags cal_prep;
  calibrate->add_option("--in", cal_in)->required();
  calibrate->add_option("--out", cal_out)->required();
  calibrate->add_option("--method", method, "dlr or rlr")->check(CLI::IsMember({"dlr", "rlr"}));
  calibrate->add_option("--lambda", rlr.lambda, "RLR Lasso penalty");
  calibrate->add_option("--percentile", rlr.percentile, "RLR kept percentage");
  calibrate->add_option("--seed", seed);
  cal_prep.attach(calibrate);

  // stream -----------------------------------------------------------------
  auto* stream = app.add_subcommand("stream", "Online DLR over shuffled batches");
  std::string stream_in, stream_out, checkpoint, resume;
  std::size_t batch_size = 0;
  PrepFlags stream_prep;
  stream->add_option("--in", stream_in)->required();
  stream->add_option("--out", stream_out)->required();
  stream->add_option("--batch-size", batch_size, "0 = one batch");
  stream->add_option("--checkpoint", checkpoint, "Write the final OnlineState here");
  stream->add_option("--resume", resume, "Start from a saved OnlineState");
  stream->add_option("--seed", seed, "Stream shuffle seed");
  stream_prep.attach(stream);

  // eval -------------------------------------------------------------------
  auto* eval = app.add_subcommand("eval", "Scores + labels to a results table");
  std::vector<std::string> eval_in;
  std::string eval_section, eval_tsv, eval_json;
  eval->add_option("--in", eval_in, "Scored containers")->required();
  eval->add_option("--section", eval_section, "Score section (default scores_calibrated, then scores)");
  eval->add_option("--out", eval_tsv, "TSV output (default stdout)");
  eval->add_option("--json", eval_json, "JSON output");
  eval->add_option("--seed", seed);

  // run --------------------------------------------------------------------
  auto* run = app.add_subcommand("run", "Run an experiment plan");
  std::string plan_path, run_tsv, run_json, run_cells;
  std::vector<std::string> overrides;
  std::optional<std::uint64_t> run_seed;
  std::optional<std::size_t> run_repeats;
  run->add_option("plan", plan_path, "Plan file")->required();
  run->add_option("--out", run_tsv, "Results TSV (default stdout)");
  run->add_option("--json", run_json, "Results JSON");
  run->add_option("--cells", run_cells, "Per-cell TSV");
  run->add_option("--seed", run_seed);
  run->add_option("--repeats", run_repeats);
  run->add_option("--set", overrides, "Override a plan key: key=value");

  // diagnose ---------------------------------------------------------------
  auto* diagnose = app.add_subcommand("diagnose", "Linearity plot data for a scored container");
  std::string diag_in, diag_out, diag_section;
  diagnose->add_option("--in", diag_in)->required();
  diagnose->add_option("--out", diag_out, "CSV output")->required();
  diagnose->add_option("--section", diag_section, "Score section (default scores)");
  diagnose->add_option("--seed", seed);

  std::vector<std::string> args(argv + 1, argv + argc);
  try {
    args = merge_config(std::move(args));
  } catch (const Error& e) {
    std::cerr << e.what() << "\n";
    return kUsageError;
  }
  std::reverse(args.begin(), args.end());
  try {
    app.parse(args);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    if (e.get_exit_code() == 0) return 0;
    std::cerr << app.help();
    return kUsageError;
  }

  try {
    if (*synth) {
      world_spec.seed = seed;
      const pipeline::World world = pipeline::build_synthetic_world(world_spec);
      pipeline::ExperimentPlan plan;
      plan.ood_sets = {pipeline::parse_ood_set(synth_ood)};
      plan.scorers = {scorers::ScorerConfig::msp()};
      plan.methods = {pipeline::MethodSpec::none()};
      std::vector<FeatureRecord> records;
      if (synth_total == 0) {
        records = world.in_pool;
        for (const auto& s : plan.ood_sets[0].sources) {
          const auto& pool = world.out_pools.at(s.tag);
          records.insert(records.end(), pool.begin(), pool.end());
        }
      } else {
        records = datasets::mix(world.in_pool, world.out_pools,
                                {synth_rate, synth_total, seed, plan.ood_sets[0].sources});
      }
      io::Container c = io::records_to_container(records);
      io::save_tinynet(c, *world.model);
      io::write_meta(c, {{"generator", "synth"},
                         {"seed", std::to_string(seed)},
                         {"ood", pipeline::ood_set_name(plan.ood_sets[0])}});
      io::write_container(synth_out, c);
      std::printf("wrote %zu records (d=%zu, C=%zu) to %s\n", records.size(),
                  world.model->feature_dim(), world.model->num_classes(), synth_out.c_str());
    } else if (*score) {
      scorers::ScorerConfig cfg = pipeline::parse_scorer(scorer_name);
      if (temperature) cfg.temperature = *temperature;
      if (cfg.kind == scorers::ScorerKind::kOdin) cfg.epsilon = epsilon;
      scorers::validate(cfg);
      io::Container c = io::read_container(score_in);
      const auto records = io::records_from_container(c);
      std::optional<tinynet::TinyNet> model;
      if (c.contains("tinynet.dims")) model = io::load_tinynet(c);
      const auto s = scorers::score_batch(records, cfg, model ? &*model : nullptr);
      c.set(io::make_vector("scores", s));
      c.remove("scores_calibrated");
      auto meta = io::read_meta(c);
      meta["scorer"] = scorers::label(cfg);
      meta["method"] = "none";
      io::write_meta(c, meta);
      io::write_container(score_out, c);
    } else if (*calibrate) {
      io::Container c = io::read_container(cal_in);
      const auto records = io::records_from_container(c);
      const linalg::Matrix features = feature_matrix(records);
      const linalg::Vector s = io::to_vector(c.at("scores"));
      calibration::RegressionModel model;
      pipeline::MethodSpec spec = pipeline::MethodSpec::dlr();
      if (method == "rlr") {
        model = calibration::fit_rlr(features, s, cal_prep.spec(), rlr).model;
        spec = pipeline::MethodSpec::rlr_with(rlr);
      } else {
        model = calibration::fit_dlr(features, s, cal_prep.spec());
      }
      c.set(io::make_vector("scores_calibrated", calibration::predict(model, features)));
      io::save_model(c, model);
      auto meta = io::read_meta(c);
      meta["method"] = pipeline::method_label(spec);
      io::write_meta(c, meta);
      io::write_container(cal_out, c);
    } else if (*stream) {
      io::Container c = io::read_container(stream_in);
      const auto records = io::records_from_container(c);
      const linalg::Matrix features = feature_matrix(records);
      const linalg::Vector s = io::to_vector(c.at("scores"));
      std::optional<calibration::OnlineDlr> online;
      if (!resume.empty()) {
        auto [prep, state] = io::load_online(io::read_container(resume));
        online.emplace(std::move(prep), std::move(state));
      } else {
        online.emplace(calibration::preprocess_fit(features, stream_prep.spec()));
      }
      const std::size_t n = features.rows();
      const std::size_t b = batch_size == 0 ? std::max<std::size_t>(n, 1) : batch_size;
      linalg::Vector out(n);
      for (const auto& idx : datasets::stream_indices(n, {b, seed})) {
        linalg::Vector batch_scores(idx.size());
        for (std::size_t k = 0; k < idx.size(); ++k) batch_scores[k] = s[idx[k]];
        const auto cal = online->update(linalg::select_rows(features, idx), batch_scores);
        for (std::size_t k = 0; k < idx.size(); ++k) out[idx[k]] = cal[k];
      }
      c.set(io::make_vector("scores_calibrated", out));
      auto meta = io::read_meta(c);
      meta["method"] = pipeline::method_label(pipeline::MethodSpec::online(batch_size));
      io::write_meta(c, meta);
      io::write_container(stream_out, c);
      if (!checkpoint.empty()) {
        io::Container ck;
        io::save_online(ck, online->preprocessor(), online->state());
        io::write_container(checkpoint, ck);
      }
    } else if (*eval) {
      std::vector<pipeline::Cell> cells;
      for (const auto& path : eval_in) {
        const io::Container c = io::read_container(path);
        const auto records = io::records_from_container(c);
        const auto meta = io::read_meta(c);
        std::set<std::string> in_tags, out_tags;
        for (const auto& r : records) {
          const std::string tag = r.source_tag.empty() ? (r.origin == Origin::kIn ? "in" : "out") : r.source_tag;
          (r.origin == Origin::kIn ? in_tags : out_tags).insert(tag);
        }
        pipeline::Cell cell;
        cell.key = {join(in_tags), join(out_tags), meta.count("scorer") ? meta.at("scorer") : "unknown",
                    meta.count("method") ? meta.at("method") : "none"};
        const linalg::Vector s = scores_section(c, eval_section);
        cell.report = metrics::evaluate(metrics::make_labeled(s.span(), origins(records)));
        cells.push_back(std::move(cell));
      }
      const io::ResultsTable table = pipeline::aggregate(cells);
      if (eval_tsv.empty()) std::cout << io::render_tsv(table);
      else io::write_text_atomic(eval_tsv, io::render_tsv(table));
      if (!eval_json.empty()) io::write_text_atomic(eval_json, io::render_json(table));
    } else if (*run) {
      io::KeyValueConfig cfg = io::KeyValueConfig::load(plan_path);
      for (const auto& kv : overrides) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos) throw Error(ErrorCode::kConfiguration, "--set expects key=value");
        cfg.set(io::trim(kv.substr(0, eq)), io::trim(kv.substr(eq + 1)));
      }
      if (run_seed) cfg.set("seed", std::to_string(*run_seed));
      if (run_repeats) cfg.set("repeats", std::to_string(*run_repeats));
      const pipeline::RunResult result = pipeline::run(pipeline::plan_from_config(cfg));
      if (run_tsv.empty()) std::cout << io::render_tsv(result.table);
      else io::write_text_atomic(run_tsv, io::render_tsv(result.table));
      if (!run_json.empty()) io::write_text_atomic(run_json, io::render_json(result.table));
      if (!run_cells.empty()) io::write_text_atomic(run_cells, pipeline::render_cells_tsv(result));
    } else if (*diagnose) {
      const io::Container c = io::read_container(diag_in);
      const auto records = io::records_from_container(c);
      const linalg::Vector s = io::to_vector(c.at(diag_section.empty() ? "scores" : diag_section));
      const auto labels = origins(records);
      const auto report = pipeline::diagnose_linearity(feature_matrix(records), s, labels);
      io::write_text_atomic(diag_out, pipeline::render_linearity_csv(report, s, labels));
      std::printf("r2=%.6f plane_r2=%.6f", report.r2, report.plane_r2);
      if (report.probe_accuracy) std::printf(" probe_accuracy=%.6f", *report.probe_accuracy);
      std::printf("\n");
      if (!report.warning.empty()) std::fprintf(stderr, "warning: %s\n", report.warning.c_str());
    }
  } catch (const Error& e) {
    std::cerr << "etlt: " << e.what() << "\n";
    const bool usage = e.code() == ErrorCode::kConfiguration || e.code() == ErrorCode::kInvalidArgument;
    return usage ? kUsageError : kDataError;
  } catch (const std::exception& e) {
    std::cerr << "etlt: " << e.what() << "\n";
    return kDataError;
  }
  return 0;
}
