// Copyright 2026 The EAS Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// eas: fixtures, single runs, grid search, profiling and stability analysis
// for the sparsifying transcription engine.
//
// Exit codes: 0 ok, 1 internal or measurement failure, 2 configuration
// error, 3 data error, 4 no admissible configuration (search with
// --require-admissible and no sparsified configuration is admissible).

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include "CLI11.hpp"
#include "eas/eas.hpp"

namespace {

using eas::ErrorKind;
using eas::RunConfig;

constexpr int kExitInternal = 1;
constexpr int kExitConfig = 2;
constexpr int kExitData = 3;
constexpr int kExitNoAdmissible = 4;

int exit_code_for(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::Config:
    case ErrorKind::Argument: return kExitConfig;
    case ErrorKind::Data:
    case ErrorKind::Dimension: return kExitData;
    case ErrorKind::Precondition:
    case ErrorKind::Measurement: return kExitInternal;
  }
  return kExitInternal;
}

/// Flags as parsed; anything left unset falls back to --config, then to the
/// RunConfig defaults.
struct Flags {
  std::string config_file;
  std::optional<std::string> model, manifest, grid, aggregation, out;
  std::optional<int> stage;
  std::optional<double> sparsity;
  bool cross_layer = false;
  std::optional<std::uint64_t> seed, shuffle_seed;
  std::optional<std::size_t> repeats, max_new_tokens;
  std::optional<std::string> group_sizes;
  bool require_admissible = false;

  // gen-fixtures
  std::string preset = "tiny";
  std::size_t n_examples = 300;
};

std::vector<std::size_t> parse_sizes(const std::string& text) {
  std::vector<std::size_t> sizes;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    std::size_t used = 0;
    long long v = -1;
    try {
      v = std::stoll(item, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || used != item.size() || v <= 0) {
      eas::fail(ErrorKind::Config, "--group-sizes: bad size '" + item + "'");
    }
    sizes.push_back(static_cast<std::size_t>(v));
  }
  if (sizes.empty()) eas::fail(ErrorKind::Config, "--group-sizes: empty list");
  return sizes;
}

RunConfig resolve(const Flags& f) {
  RunConfig c = f.config_file.empty() ? RunConfig{} : eas::load_run_config(f.config_file);
  if (f.model) c.model = *f.model;
  if (f.manifest) c.manifest = *f.manifest;
  if (f.grid) c.grid = *f.grid;
  if (f.aggregation) c.aggregation = *f.aggregation;
  if (f.out) c.out = *f.out;
  if (f.stage) c.stage = f.stage;
  if (f.sparsity) c.sparsity = f.sparsity;
  if (f.cross_layer) c.cross_layer = true;
  if (f.seed) c.seed = *f.seed;
  if (f.shuffle_seed) c.shuffle_seed = f.shuffle_seed;
  if (f.repeats) c.repeats = *f.repeats;
  if (f.max_new_tokens) c.max_new_tokens = f.max_new_tokens;
  if (f.group_sizes) c.group_sizes = parse_sizes(*f.group_sizes);
  if (f.require_admissible) c.require_admissible = true;
  (void)eas::parse_aggregation(c.aggregation);
  if (c.repeats == 0) eas::fail(ErrorKind::Config, "--repeats must be at least 1");
  return c;
}

struct Inputs {
  eas::Model model;
  std::vector<eas::TaskExample> dataset;
};

Inputs load_inputs(const RunConfig& c) {
  if (c.model.empty()) eas::fail(ErrorKind::Config, "missing field 'model' (--model)");
  if (c.manifest.empty()) eas::fail(ErrorKind::Config, "missing field 'manifest' (--manifest)");
  return {eas::load_model(c.model), eas::load_dataset(c.manifest)};
}

std::filesystem::path output_dir(const RunConfig& c) {
  const std::filesystem::path dir = c.out.empty() ? std::filesystem::path(".") : std::filesystem::path(c.out);
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) eas::fail(ErrorKind::Data, "cannot create output directory '" + dir.string() + "': " + ec.message());
  return dir;
}

std::ofstream open_out(const std::filesystem::path& p) {
  std::ofstream out(p, std::ios::trunc);
  if (!out) eas::fail(ErrorKind::Data, "cannot open '" + p.string() + "' for writing");
  return out;
}

eas::EvalOptions untimed_options(const RunConfig& c) { return {c.max_new_tokens, eas::evaluation_threads()}; }

int cmd_gen_fixtures(const Flags& f) {
  const RunConfig c = resolve(f);
  const std::string dir = c.out.empty() ? "fixtures" : c.out;
  const auto paths = eas::write_echo_fixtures(dir, f.preset, c.seed, f.n_examples);
  std::cout << "wrote " << paths.model << "\nwrote " << paths.features << "\nwrote " << paths.manifest << '\n';
  return 0;
}

int cmd_run(const Flags& f) {
  const RunConfig c = resolve(f);
  const Inputs in = load_inputs(c);
  const auto eas_cfg = c.eas(static_cast<int>(in.model.config.n_encoder_layers));
  const auto ev = eas::evaluate_timed(in.dataset, in.model, eas_cfg, c.repeats, c.max_new_tokens);
  const std::string text = eas::run_report_json(ev.record).dump(2) + "\n";
  if (c.out.empty()) {
    std::cout << text;
  } else {
    auto out = open_out(c.out);
    out << text;
  }
  return 0;
}

int cmd_search(const Flags& f) {
  const RunConfig c = resolve(f);
  const Inputs in = load_inputs(c);
  const int depth = static_cast<int>(in.model.config.n_encoder_layers);
  const auto grid = eas::parse_grid(c.grid, depth);
  eas::GridOptions opts;
  opts.repeats = c.repeats;
  opts.max_new_tokens = c.max_new_tokens;
  opts.aggregation = eas::parse_aggregation(c.aggregation);
  opts.cross_layer = c.cross_layer;
  opts.seed = c.seed;
  const auto result = eas::run_grid(in.dataset, in.model, grid, opts);
  const auto report = eas::select_constrained(result.records);

  const auto dir = output_dir(c);
  open_out(dir / "report.json") << eas::search_report_json(report).dump(2) << '\n';
  auto table = open_out(dir / "table.txt");
  eas::write_table(table, report);
  auto scatter = open_out(dir / "scatter.csv");
  eas::write_scatter_csv(scatter, report);
  eas::write_table(std::cout, report);
  for (const auto& r : report.flagged) std::cerr << "warning: " << r.label() << " had failed examples\n";
  // The baseline always clears the floor against itself, so "nothing
  // admissible" here means no sparsified configuration made it.
  const bool only_baseline = std::none_of(report.top3.begin(), report.top3.end(),
                                          [](const eas::EvalRecord& r) { return !r.is_baseline(); });
  if (only_baseline) std::cerr << "no admissible configuration other than the baseline\n";
  if (c.require_admissible && only_baseline) return kExitNoAdmissible;
  return 0;
}

int cmd_profile(const Flags& f) {
  RunConfig c = resolve(f);
  const Inputs in = load_inputs(c);
  const int depth = static_cast<int>(in.model.config.n_encoder_layers);
  if (!f.grid && f.config_file.empty()) c.grid = "stages=" + std::to_string(c.stage.value_or(1)) + ";sparsities=0.0:0.9:0.1";
  const auto grid = eas::parse_grid(c.grid, depth);

  std::vector<eas::TimingRow> rows;
  auto add = [&](const std::optional<eas::EasConfig>& cfg) {
    const auto ev = eas::evaluate_timed(in.dataset, in.model, cfg, c.repeats, c.max_new_tokens);
    auto r = eas::timing_rows(ev);
    rows.insert(rows.end(), r.begin(), r.end());
  };
  add(std::nullopt);
  std::vector<eas::TokenGrowthCurve> curves;
  for (int stage : grid.stages) {
    eas::EasConfig cfg;
    cfg.stage = stage;
    cfg.aggregation = eas::parse_aggregation(c.aggregation);
    cfg.cross_layer = c.cross_layer;
    cfg.rng_seed = c.seed;
    for (double s : grid.sparsities) {
      if (s == 0.0) continue;
      cfg.sparsity = s;
      cfg.validate(depth);
      add(cfg);
    }
    curves.push_back(eas::token_growth_curve(in.dataset, in.model, cfg, grid.sparsities, untimed_options(c)));
  }

  const auto dir = output_dir(c);
  auto timing = open_out(dir / "timing.csv");
  eas::write_timing_csv(timing, rows);
  auto growth = open_out(dir / "token_growth.csv");
  for (std::size_t i = 0; i < curves.size(); ++i) {
    std::ostringstream part;
    eas::write_token_growth_csv(part, curves[i]);
    std::string text = part.str();
    if (i > 0) text = text.substr(text.find('\n') + 1);  // one header only
    growth << text;
  }
  std::cout << "wrote " << (dir / "timing.csv").string() << "\nwrote " << (dir / "token_growth.csv").string() << '\n';
  return 0;
}

int cmd_stability(const Flags& f) {
  RunConfig c = resolve(f);
  const Inputs in = load_inputs(c);
  const int depth = static_cast<int>(in.model.config.n_encoder_layers);
  if (!c.stage && !c.sparsity && !c.cross_layer) eas::fail(ErrorKind::Config, "stability needs --stage/--sparsity");
  const auto cfg = c.eas(depth);
  const auto opts = untimed_options(c);
  const auto base = eas::evaluate_untimed(in.dataset, in.model, std::nullopt, opts);
  const auto cand = eas::evaluate_untimed(in.dataset, in.model, cfg, opts);
  const auto rep = eas::stability_analysis(eas::correctness_pairs(base, cand), c.group_sizes, c.shuffle_seed);
  for (const auto& w : rep.warnings) std::cerr << "warning: " << w << '\n';

  const auto dir = output_dir(c);
  auto out = open_out(dir / "stability.csv");
  eas::write_stability_csv(out, rep);
  eas::write_stability_csv(std::cout, rep);
  if (const auto n = eas::chosen_group_size(rep)) {
    std::cout << "smallest group size with std <= " << eas::kStabilityTolerance << ": " << *n << '\n';
  } else {
    std::cout << "no group size has std <= " << eas::kStabilityTolerance << '\n';
  }
  return 0;
}

void add_common(CLI::App* sub, Flags& f) {
  sub->add_option("--config", f.config_file, "JSON file with run settings; flags override it");
  sub->add_option("--model", f.model, "Model tensor archive");
  sub->add_option("--manifest", f.manifest, "Dataset manifest (JSON lines)");
  sub->add_option("--max-new-tokens", f.max_new_tokens, "Decode cap per example (default 4x reference, min 32)");
  sub->add_option("--repeats", f.repeats, "Timed repeats per example");
  sub->add_option("--seed", f.seed, "Seed for random aggregation / fixtures");
  sub->add_option("--out", f.out, "Output file (run) or directory");
}

void add_eas(CLI::App* sub, Flags& f) {
  sub->add_option("--stage", f.stage, "Encoder layer after which tokens are dropped (1-based)");
  sub->add_option("--sparsity", f.sparsity, "Fraction of tokens dropped, in [0,1)");
  sub->add_option("--aggregation", f.aggregation, "mean, max, min, geometric_mean or random");
  sub->add_flag("--cross-layer", f.cross_layer, "Aggregate importance over all layers, drop after the last");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Sparsifying transcription engine and configuration search"};
  app.require_subcommand(1);
  Flags f;

  auto* gen = app.add_subcommand("gen-fixtures", "Write echo-task model, features and manifest");
  gen->add_option("--preset", f.preset, "tiny or small")->check(CLI::IsMember({"tiny", "small"}));
  gen->add_option("--seed", f.seed, "Fixture seed");
  gen->add_option("--n-examples", f.n_examples, "Number of examples")->check(CLI::PositiveNumber);
  gen->add_option("--out", f.out, "Output directory");

  auto* run = app.add_subcommand("run", "Evaluate one configuration (baseline if no EAS flags)");
  add_common(run, f);
  add_eas(run, f);

  auto* search = app.add_subcommand("search", "Grid search, Pareto front and top-3 selection");
  add_common(search, f);
  add_eas(search, f);
  search->add_option("--grid", f.grid, "e.g. \"stages=1..L;sparsities=0.0:0.9:0.1\"");
  search->add_flag("--require-admissible", f.require_admissible, "Exit 4 when nothing meets the accuracy floor");

  auto* profile = app.add_subcommand("profile", "Per-component timing and token growth");
  add_common(profile, f);
  add_eas(profile, f);
  profile->add_option("--grid", f.grid, "Stages and sparsities to profile");

  auto* stability = app.add_subcommand("stability", "Accuracy-ratio spread versus group size");
  add_common(stability, f);
  add_eas(stability, f);
  stability->add_option("--group-sizes", f.group_sizes, "Comma list, e.g. 10,50,100");
  stability->add_option("--shuffle-seed", f.shuffle_seed, "Shuffle examples before grouping");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitConfig;
  }

  try {
    if (*gen) return cmd_gen_fixtures(f);
    if (*run) return cmd_run(f);
    if (*search) return cmd_search(f);
    if (*profile) return cmd_profile(f);
    if (*stability) return cmd_stability(f);
  } catch (const eas::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return exit_code_for(e.kind());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitInternal;
  }
  return kExitInternal;
}
