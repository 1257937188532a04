// Copyright 2026 The stsp Authors.
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

#include "cli.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <ostream>

#include "stsp/bench.hpp"
#include "stsp/config.hpp"
#include "stsp/error.hpp"
#include "stsp/run_dir.hpp"
#include "stsp/tsp_io.hpp"

namespace fs = std::filesystem;

namespace stsp::cli {
namespace {

struct SearchArgs {
  std::string kind = "greedy";
  std::size_t width = 1;
  std::size_t samples = 1;
  std::uint64_t seed = 0;

  void attach(CLI::App* app) {
    app->add_option("--search", kind, "greedy, beam or sample")
        ->check(CLI::IsMember({"greedy", "beam", "sample"}))
        ->capture_default_str();
    app->add_option("--width", width, "Beam width")->check(CLI::PositiveNumber)
        ->capture_default_str();
    app->add_option("--samples", samples, "Tours drawn per instance for sample search")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    app->add_option("--sample-seed", seed, "Seed of the sampling streams")
        ->capture_default_str();
  }

  SearchSpec spec() const {
    SearchSpec s;
    s.kind = kind == "beam" ? SearchKind::beam
             : kind == "sample" ? SearchKind::sample
                                : SearchKind::greedy;
    s.width = width;
    s.samples = samples;
    s.seed = seed;
    return s;
  }
};

/// Dotted config flags shared by train and ablate.
struct OverrideArgs {
  std::map<std::string, std::string> values;
  std::vector<std::pair<std::string, CLI::Option*>> options;

  void attach(CLI::App* app) {
    for (const std::string& key : config_keys()) {
      options.emplace_back(key, app->add_option("--" + key, values[key]));
    }
  }

  std::vector<ConfigOverride> list() const {
    std::vector<ConfigOverride> out;
    for (const auto& [key, opt] : options) {
      if (opt->count() > 0) out.emplace_back(key, values.at(key));
    }
    return out;
  }
};

void ensure_writable(const fs::path& out, bool force,
                     std::initializer_list<const fs::path*> inputs = {}) {
  std::error_code ec;
  for (const fs::path* in : inputs) {
    if (in != nullptr && fs::exists(out) && fs::equivalent(out, *in, ec)) {
      throw IoError("output " + out.string() + " would overwrite an input file");
    }
  }
  if (!force && fs::exists(out)) {
    throw IoError("refusing to overwrite " + out.string() + " (pass --force)");
  }
  if (out.has_parent_path()) fs::create_directories(out.parent_path(), ec);
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot write " + path.string());
  f << text;
  if (!f) throw IoError("failed writing " + path.string());
}

std::string fixed(double v, int digits = 4) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", digits, v);
  return buf;
}

void print_epoch(std::ostream& out, const EpochMetrics& m) {
  out << "epoch " << m.epoch << "  sampled " << fixed(m.mean_sampled_length)
      << "  greedy_val " << fixed(m.mean_greedy_val_length) << "  baseline "
      << fixed(m.baseline_val_length) << (m.baseline_updated ? " (updated)" : "")
      << "  loss " << fixed(m.loss, 6) << "  " << fixed(m.wall_seconds, 1) << "s"
      << std::endl;
}

void print_report(std::ostream& out, const GapReport& r) {
  out << r.search << "(" << r.width << ") on " << r.records.size()
      << " instances: model " << fixed(r.model_mean_length) << "  oracle["
      << r.oracle << "] " << fixed(r.oracle_mean_length) << "  ratio "
      << fixed(r.ratio, 6) << "  gap " << fixed(r.gap_percent, 3) << "%  "
      << fixed(r.mean_decode_seconds * 1e3, 3) << " ms/instance\n";
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err,
        const std::atomic<bool>* stop) {
  CLI::App app{"Transformer TSP policies with Sinkhorn or softmax heatmap decoding", "stsp"};
  app.require_subcommand(1, 1);
  app.set_help_all_flag("--help-all", "Show help for every subcommand");
  bool force = false;

  // generate
  CLI::App* gen = app.add_subcommand("generate", "Write uniform random instances (.tspjl)");
  std::size_t gen_count = 0;
  std::size_t gen_n = 0;
  std::uint64_t gen_seed = 0;
  fs::path gen_out;
  gen->add_option("--count", gen_count, "Number of instances")->required()
      ->check(CLI::PositiveNumber);
  gen->add_option("--n", gen_n, "Cities per instance")->required()
      ->check(CLI::Range(std::size_t{3}, std::size_t{100000}));
  gen->add_option("--seed", gen_seed, "Generator seed")->required();
  gen->add_option("-o,--output", gen_out, "Output .tspjl")->required();
  gen->add_flag("--force", force, "Replace an existing output file");

  // oracle
  CLI::App* orc = app.add_subcommand("oracle", "Solve instances exactly (n <= 16) to .tourjl");
  fs::path orc_in;
  fs::path orc_out;
  orc->add_option("-i,--instances", orc_in, "Input .tspjl")->required()
      ->check(CLI::ExistingFile);
  orc->add_option("-o,--output", orc_out, "Output .tourjl")->required();
  orc->add_flag("--force", force, "Replace an existing output file");

  // train
  CLI::App* trn = app.add_subcommand("train", "Train a policy into a run directory");
  std::optional<fs::path> trn_config;
  std::optional<fs::path> trn_dir;
  OverrideArgs trn_over;
  trn->add_option("--config", trn_config, "TOML configuration");
  trn->add_option("--run-dir", trn_dir,
                  "Run directory; relative paths resolve under $STSP_RUN_ROOT (default runs)");
  trn_over.attach(trn);

  // solve
  CLI::App* slv = app.add_subcommand("solve", "Decode tours for instances with a checkpoint");
  fs::path slv_ckpt;
  fs::path slv_in;
  fs::path slv_out;
  std::optional<fs::path> slv_report;
  SearchArgs slv_search;
  slv->add_option("--checkpoint", slv_ckpt, "Checkpoint (.stsp)")->required()
      ->check(CLI::ExistingFile);
  slv->add_option("-i,--instances", slv_in, "Input .tspjl")->required()
      ->check(CLI::ExistingFile);
  slv->add_option("-o,--output", slv_out, "Output .tourjl")->required();
  slv->add_option("--report", slv_report, "Also write a gap report (JSON; needs n <= 16)");
  slv_search.attach(slv);
  slv->add_flag("--force", force, "Replace existing output files");

  // bench
  CLI::App* bch = app.add_subcommand("bench", "Optimality gap and timing report");
  fs::path bch_ckpt;
  fs::path bch_in;
  std::optional<fs::path> bch_ref;
  std::optional<fs::path> bch_json;
  std::optional<fs::path> bch_csv;
  SearchArgs bch_search;
  bch->add_option("--checkpoint", bch_ckpt, "Checkpoint (.stsp)")->required()
      ->check(CLI::ExistingFile);
  bch->add_option("-i,--instances", bch_in, "Input .tspjl")->required()
      ->check(CLI::ExistingFile);
  bch->add_option("--reference", bch_ref, "Reference tours (.tourjl) instead of the exact solver")
      ->check(CLI::ExistingFile);
  bch->add_option("-o,--output", bch_json, "Report JSON");
  bch->add_option("--csv", bch_csv, "Summary CSV");
  bch_search.attach(bch);
  bch->add_flag("--force", force, "Replace existing output files");

  // ablate
  CLI::App* abl = app.add_subcommand("ablate", "Train one Sinkhorn model per (lambda, I) cell");
  std::optional<fs::path> abl_config;
  std::vector<double> abl_lambdas{0.5, 2.0, 5.0};
  std::vector<std::size_t> abl_iters{1, 10};
  std::size_t abl_eval = 1000;
  std::uint64_t abl_eval_seed = 20260101;
  std::size_t abl_width = 100;
  fs::path abl_out;
  OverrideArgs abl_over;
  abl->add_option("--config", abl_config, "Base TOML configuration");
  abl->add_option("--lambdas", abl_lambdas, "Comma-separated lambda values")
      ->delimiter(',')
      ->capture_default_str();
  abl->add_option("--iterations", abl_iters, "Comma-separated Sinkhorn iteration counts")
      ->delimiter(',')
      ->capture_default_str();
  abl->add_option("--eval-size", abl_eval, "Held-out instances")->check(CLI::PositiveNumber)
      ->capture_default_str();
  abl->add_option("--eval-seed", abl_eval_seed, "Seed of the held-out set")
      ->capture_default_str();
  abl->add_option("--beam-width", abl_width, "Beam width")->check(CLI::PositiveNumber)
      ->capture_default_str();
  abl->add_option("-o,--output", abl_out, "Output CSV")->required();
  abl->add_flag("--force", force, "Replace an existing output file");
  abl_over.attach(abl);

  // heatmap
  CLI::App* hm = app.add_subcommand("heatmap", "Dump one instance's decoder heatmap as CSV");
  fs::path hm_ckpt;
  fs::path hm_in;
  std::size_t hm_index = 0;
  fs::path hm_out;
  bool hm_mask = false;
  bool hm_logits = false;
  hm->add_option("--checkpoint", hm_ckpt, "Checkpoint (.stsp)")->required()
      ->check(CLI::ExistingFile);
  hm->add_option("-i,--instances", hm_in, "Input .tspjl")->required()
      ->check(CLI::ExistingFile);
  hm->add_option("--index", hm_index, "Instance index in the file")->capture_default_str();
  hm->add_option("-o,--output", hm_out, "Output CSV")->required();
  hm->add_flag("--mask-diagonal", hm_mask, "Leave self-loop cells empty");
  hm->add_flag("--logits", hm_logits, "Dump log-probabilities instead of probabilities");
  hm->add_flag("--force", force, "Replace an existing output file");

  std::vector<std::string> argv_store;
  argv_store.reserve(args.size() + 1);
  argv_store.emplace_back("stsp");
  argv_store.insert(argv_store.end(), args.begin(), args.end());
  std::vector<const char*> argv;
  for (const std::string& a : argv_store) argv.push_back(a.c_str());

  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp&) {
    const auto subs = app.get_subcommands();
    out << (subs.empty() ? app.help() : subs.front()->help());
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    const auto subs = app.get_subcommands();
    err << "error: " << e.what() << "\n\n"
        << (subs.empty() ? app.help() : subs.front()->help());
    return kExitUsage;
  }

  try {
    if (gen->parsed()) {
      ensure_writable(gen_out, force);
      write_instances(gen_out, generate_instances(gen_count, gen_n, gen_seed));
      out << "wrote " << gen_count << " instances to " << gen_out.string() << "\n";
    } else if (orc->parsed()) {
      ensure_writable(orc_out, force, {&orc_in});
      const std::vector<TspInstance> instances = read_instances(orc_in);
      std::vector<Tour> tours;
      tours.reserve(instances.size());
      for (const TspInstance& inst : instances) tours.push_back(solve_exact(inst));
      write_tours(orc_out, tours);
      out << "wrote " << tours.size() << " optimal tours to " << orc_out.string() << "\n";
    } else if (trn->parsed()) {
      const TrainConfig config = load_config(trn_config, trn_over.list());
      TrainOptions opts;
      fs::path dir = trn_dir ? *trn_dir : unused_path(RunDir::root() / "run");
      if (trn_dir && dir.is_relative()) dir = RunDir::root() / dir;
      opts.run_dir = fs::absolute(dir);
      opts.stop = stop;
      opts.on_epoch = [&out](const EpochMetrics& m) { print_epoch(out, m); };
      out << "run directory " << opts.run_dir->string() << "\n";
      const TrainResult r = train(config, opts);
      if (r.interrupted) out << "interrupted; checkpoint written\n";
    } else if (slv->parsed()) {
      ensure_writable(slv_out, force, {&slv_in, &slv_ckpt});
      if (slv_report) ensure_writable(*slv_report, force, {&slv_in, &slv_ckpt});
      LoadedPolicy model = LoadedPolicy::load(slv_ckpt);
      const std::vector<TspInstance> instances = read_instances(slv_in);
      const SearchSpec spec = slv_search.spec();
      const std::vector<HeatmapLogits> maps = model.heatmaps(instances);
      std::vector<Tour> tours;
      tours.reserve(instances.size());
      for (std::size_t i = 0; i < instances.size(); ++i) {
        Trajectory t = search_tour(maps[i], instances[i], spec, i);
        tours.push_back({std::move(t.order), t.length});
      }
      write_tours(slv_out, tours);
      out << "wrote " << tours.size() << " tours to " << slv_out.string() << "\n";
      if (slv_report) {
        const GapReport r = run_benchmark(model, instances, spec);
        write_text(*slv_report, report_to_json(r).dump(2) + "\n");
        print_report(out, r);
      }
    } else if (bch->parsed()) {
      for (const auto* p : {&bch_json, &bch_csv}) {
        if (*p) ensure_writable(**p, force, {&bch_in, &bch_ckpt});
      }
      LoadedPolicy model = LoadedPolicy::load(bch_ckpt);
      const std::vector<TspInstance> instances = read_instances(bch_in);
      std::vector<Tour> reference;
      if (bch_ref) reference = read_tours(*bch_ref);
      const GapReport r =
          bch_ref ? run_benchmark(model, instances, bch_search.spec(),
                                  std::span<const Tour>(reference))
                  : run_benchmark(model, instances, bch_search.spec());
      print_report(out, r);
      if (bch_json) write_text(*bch_json, report_to_json(r).dump(2) + "\n");
      if (bch_csv) write_text(*bch_csv, report_csv(r));
    } else if (abl->parsed()) {
      ensure_writable(abl_out, force);
      const TrainConfig base = load_config(abl_config, abl_over.list());
      const std::vector<TspInstance> eval = generate_instances(abl_eval, base.n, abl_eval_seed);
      const std::vector<AblationRow> rows =
          ablate_sinkhorn(base, abl_lambdas, abl_iters, eval, abl_width);
      const std::string csv = ablation_csv(rows);
      write_text(abl_out, csv);
      out << csv;
    } else if (hm->parsed()) {
      ensure_writable(hm_out, force, {&hm_in, &hm_ckpt});
      LoadedPolicy model = LoadedPolicy::load(hm_ckpt);
      const std::vector<TspInstance> instances = read_instances(hm_in);
      if (hm_index >= instances.size()) {
        throw InvalidInputError("--index " + std::to_string(hm_index) + " but the file has " +
                                std::to_string(instances.size()) + " instances");
      }
      const TspInstance& inst = instances[hm_index];
      HeatmapLogits h = std::move(model.heatmaps(std::span(&inst, 1)).front());
      dump_heatmap(hm_logits ? h.logits : h.probs, hm_out, hm_mask);
      out << "wrote " << inst.size() << "x" << inst.size() << " heatmap to "
          << hm_out.string() << "\n";
    }
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitOk;
}

}  // namespace stsp::cli
