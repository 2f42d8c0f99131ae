#include "driftgate/cli.hpp"

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <limits>
#include <memory>
#include <optional>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "driftgate/bench.hpp"
#include "driftgate/checkpoint.hpp"
#include "driftgate/config.hpp"
#include "driftgate/embs.hpp"
#include "driftgate/error.hpp"
#include "driftgate/fileio.hpp"
#include "driftgate/harness.hpp"
#include "driftgate/metrics.hpp"
#include "driftgate/parallel.hpp"
#include "driftgate/pipeline.hpp"
#include "driftgate/scorer.hpp"
#include "driftgate/synthetic.hpp"

namespace driftgate {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct GlobalOptions {
  std::optional<std::size_t> threads;
  std::string config;
};

// Model and threshold flags shared by commands that build a fresh model.
struct ModelFlags {
  std::optional<std::uint32_t> dim;
  std::optional<std::size_t> m0;
  std::optional<double> sigma;
  std::optional<std::uint64_t> seed;
  std::string alpha;
  std::optional<double> threshold;

  void add_to(CLI::App& cmd) {
    cmd.add_option("--dim", dim, "Embedding dimension (default: input header)")
        ->check(CLI::PositiveNumber);
    cmd.add_option("--m0", m0, "Gaussian initialization samples")->check(CLI::Range(2, 1 << 30));
    cmd.add_option("--sigma", sigma, "Std of the initialization noise")
        ->check(CLI::NonNegativeNumber);
    cmd.add_option("--seed", seed, "Initialization seed");
    cmd.add_option("--alpha", alpha, "Shrinkage: ledoit-wolf[:R] or a fixed value in [0,1]");
    cmd.add_option("--threshold,-t", threshold, "Novelty threshold T");
  }

  void apply(ExperimentConfig& cfg) const {
    if (dim) cfg.stats.dim = *dim;
    if (m0) cfg.stats.init.samples = *m0;
    if (sigma) cfg.stats.init.sigma = *sigma;
    if (seed) cfg.stats.init.seed = *seed;
    if (!alpha.empty()) cfg.stats.policy = parse_alpha_policy(alpha);
    if (threshold) {
      if (!(*threshold > 0.0)) throw InputError("--threshold must be positive");
      cfg.pipeline.threshold = *threshold;
    }
  }
};

ExperimentConfig base_config(const GlobalOptions& global) {
  return global.config.empty() ? ExperimentConfig{} : load_config(global.config);
}

void ensure_directory(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) {
    throw IoError("cannot create output directory " + dir.string());
  }
}

void ensure_parent(const fs::path& file) {
  if (file.has_parent_path()) ensure_directory(file.parent_path());
}

std::string source_reference(const fs::path& p) {
  return fs::absolute(p).lexically_normal().string();
}

std::string percent(double v) {
  std::ostringstream s;
  s << std::fixed << std::setprecision(2) << v << '%';
  return s.str();
}

// Writes to `path` atomically, or to `out` when path is empty.
void emit(const std::string& path, std::ostream& out, const std::string& text) {
  if (path.empty()) {
    out << text;
    return;
  }
  ensure_parent(path);
  write_file_atomically(path, [&](std::ostream& f) { f << text; });
}

// ---------------------------------------------------------------- filter

struct FilterArgs {
  std::string input;
  std::string out;
  std::string init_checkpoint;
  ModelFlags model;
};

int cmd_filter(const GlobalOptions& global, const FilterArgs& args, std::ostream& out,
               std::ostream& err) {
  ExperimentConfig cfg = base_config(global);
  args.model.apply(cfg);
  const std::string input = args.input.empty() ? cfg.pipeline.input : args.input;
  if (input.empty()) throw InputError("filter needs --in or [pipeline].input");

  std::optional<std::uint32_t> dim;
  if (args.model.dim || !global.config.empty()) dim = cfg.stats.dim;
  EmbsReader reader(input, dim);
  cfg.stats.dim = reader.header().dim;
  ensure_directory(args.out);
  const fs::path out_dir = args.out;

  NormalStats stats =
      args.init_checkpoint.empty()
          ? NormalStats::init_gaussian(cfg.stats.dim, cfg.stats.init, cfg.stats.policy)
          : load_checkpoint(args.init_checkpoint, cfg.stats.policy);
  if (stats.dim() != cfg.stats.dim) {
    throw InputError("checkpoint dim " + std::to_string(stats.dim()) +
                     " does not match input dim " + std::to_string(cfg.stats.dim));
  }

  err << "filter: " << input << " (" << reader.header().count << " records, dim "
      << cfg.stats.dim << "), T = " << cfg.pipeline.threshold << '\n';

  DecisionLogWriter log(out_dir / "decisions.jsonl");
  std::vector<ManifestEntry> manifest;
  const std::string source = source_reference(input);
  FilterSinks sinks;
  sinks.on_decision = [&](const Decision& d) { log.write(d); };
  sinks.on_record = [&](const EmbeddingRecord& rec) {
    manifest.push_back(make_manifest_entry(rec, source));
  };
  const StreamSummary summary = run_filter(reader, stats, cfg.pipeline.threshold, sinks);

  log.commit();
  write_manifest(manifest, out_dir / "manifest.jsonl");
  export_selection_curve(summary, out_dir / "curve.csv");
  save_checkpoint(stats, out_dir / "stats.msns");

  const double reduction =
      summary.patches_seen == 0
          ? 0.0
          : 100.0 * (1.0 - static_cast<double>(manifest.size()) /
                               static_cast<double>(summary.patches_seen));
  json s{{"frames_seen", summary.frames_seen},
         {"frames_recorded", summary.frames_recorded},
         {"frames_discarded", summary.frames_discarded()},
         {"patches_seen", summary.patches_seen},
         {"patches_accepted", summary.patches_accepted},
         {"patches_retained", manifest.size()},
         {"reduction_rate", reduction},
         {"threshold", cfg.pipeline.threshold},
         {"stats_version", stats.version()}};
  write_file_atomically(out_dir / "summary.json",
                        [&](std::ostream& f) { f << s.dump(2) << '\n'; });

  out << "frames seen " << summary.frames_seen << ", recorded " << summary.frames_recorded
      << ", discarded " << summary.frames_discarded() << '\n'
      << "patches retained " << manifest.size() << '/' << summary.patches_seen << ", reduction "
      << percent(reduction) << '\n';
  return kExitOk;
}

// ---------------------------------------------------------------- score

struct ScoreArgs {
  std::string input;
  std::string checkpoint;
  std::string out;
};

int cmd_score(const ScoreArgs& args, std::ostream& out, std::ostream& err) {
  NormalStats stats = load_checkpoint(args.checkpoint, FixedAlpha{});
  EmbsReader reader(args.input, static_cast<std::uint32_t>(stats.dim()));
  const SnapshotPtr snap = stats.snapshot();

  std::ostringstream lines;
  std::vector<EmbeddingRecord> chunk;
  auto flush = [&] {
    if (chunk.empty()) return;
    for (const auto& rec : chunk) {
      require_finite(rec.vector, "frame " + std::to_string(rec.frame) + " patch " +
                                     std::to_string(rec.patch));
    }
    const std::vector<double> scores = score_batch(*snap, to_matrix(chunk));
    for (std::size_t i = 0; i < chunk.size(); ++i) {
      lines << json{{"frame", chunk[i].frame},
                    {"patch", chunk[i].patch},
                    {"score", scores[i]},
                    {"stats_version", snap->version()}}
                   .dump()
            << '\n';
    }
    chunk.clear();
  };
  while (auto rec = reader.next()) {
    chunk.push_back(std::move(*rec));
    if (chunk.size() == 256) flush();
  }
  flush();
  emit(args.out, out, lines.str());
  err << "score: " << reader.header().count << " records scored\n";
  return kExitOk;
}

// ---------------------------------------------------------------- simulate

struct SimulateArgs {
  std::string config;
  std::string out;
  std::string source;
};

int cmd_simulate(const GlobalOptions& global, const SimulateArgs& args, std::ostream& out,
                 std::ostream& err) {
  const std::string config_path = args.config.empty() ? global.config : args.config;
  if (config_path.empty()) throw InputError("simulate needs a config file");
  const ExperimentConfig cfg = load_config(config_path);

  std::vector<EmbeddingRecord> source;
  fs::path source_file;
  const std::string input = args.source.empty() ? cfg.pipeline.input : args.source;
  if (!input.empty()) {
    source = read_embedding_file(input, cfg.stats.dim);
    source_file = source_reference(input);
  } else if (cfg.synthetic) {
    source = generate_synthetic(*cfg.synthetic);
  } else {
    throw InputError("simulate needs --source, [pipeline].input or a [synthetic] section");
  }

  std::optional<fs::path> out_dir;
  if (!args.out.empty()) {
    ensure_directory(args.out);
    out_dir = fs::path(args.out);
  }
  err << "simulate: " << source.size() << " source records, " << cfg.redundancy_factors.size()
      << " factors x " << cfg.thresholds.size() << " thresholds x " << cfg.seeds.size()
      << " seeds\n";

  const ExperimentReport report = run_experiment(cfg, source, out_dir, source_file);
  std::size_t failed = 0;
  for (const auto& c : report.novelty) {
    if (c.error) {
      ++failed;
      err << "cell rf" << c.rf << " " << threshold_tag(c.threshold) << " seed" << c.seed
          << " failed: " << *c.error << '\n';
    }
  }
  for (const auto& a : report.all) {
    if (a.error) {
      ++failed;
      err << "all-data rf" << a.rf << " failed: " << *a.error << '\n';
    }
  }

  out << "datasets " << report.dataset_count() << " (" << report.novelty.size() << " novelty, "
      << report.random.size() << " random, " << report.all.size() << " all)";
  if (failed) out << ", " << failed << " failed";
  out << "\n\n" << report_tables(report);
  return kExitOk;
}

// ---------------------------------------------------------------- metrics

struct MetricsArgs {
  std::string manifest;
  std::string source;
  std::string input;
  std::string pair_budget = "100000";
  std::uint64_t seed = 0;
  std::string out;
};

std::optional<std::uint64_t> parse_pair_budget(const std::string& text) {
  if (text == "all") return std::nullopt;
  std::size_t pos = 0;
  unsigned long long v = 0;
  try {
    v = std::stoull(text, &pos);
  } catch (const std::exception&) {
    pos = 0;
  }
  if (pos != text.size() || v == 0) {
    throw InputError("--pair-budget must be a positive integer or 'all'");
  }
  return v;
}

int cmd_metrics(const MetricsArgs& args, std::ostream& out, std::ostream& err) {
  if (args.manifest.empty() == args.input.empty()) {
    throw InputError("metrics needs exactly one of --manifest or --in");
  }
  DiversityOptions opts;
  opts.pair_budget = parse_pair_budget(args.pair_budget);
  opts.seed = args.seed;

  std::vector<EmbeddingRecord> records;
  if (!args.manifest.empty()) {
    const auto entries = read_manifest(args.manifest);
    records = resolve_manifest(entries, args.source);
  } else {
    records = read_embedding_file(args.input);
  }

  const DatasetMetrics m = measure(records, opts);
  if (!m.balance) {
    err << "warning: no record carries a label; balance metrics skipped\n";
  } else if (m.unlabeled > 0) {
    err << "warning: " << m.unlabeled << " unlabeled records ignored\n";
  }
  if (!m.diversity.excluded.empty()) {
    err << "warning: " << m.diversity.excluded.size()
        << " classes with fewer than 2 members excluded from diversity\n";
  }

  json j;
  j["records"] = records.size();
  j["unlabeled"] = m.unlabeled;
  j["balance"] = m.balance ? json::parse(to_json(*m.balance)) : json(nullptr);
  j["diversity"] = json::parse(to_json(m.diversity));
  emit(args.out, out, j.dump(2) + "\n");
  return kExitOk;
}

// ---------------------------------------------------------------- bench

struct BenchArgs {
  BenchOptions options;
  std::string out;
};

int cmd_bench(const BenchArgs& args, std::ostream& out, std::ostream& err) {
  if (!args.out.empty()) ensure_parent(args.out);
  err << "bench: " << args.options.reps << " reps, " << args.options.warmup << " warm-up, "
      << (args.options.parallel ? "parallel" : "single-threaded") << '\n';
  const auto results = run_bench(args.options);
  if (!args.out.empty()) write_bench_csv(results, args.out);
  out << bench_table(results);
  for (const auto& r : results) {
    if (r.error) err << to_string(r.op) << " dim " << r.dim << " x" << r.patch_count
                     << " failed: " << *r.error << '\n';
  }
  return kExitOk;
}

// ---------------------------------------------------------------- stats-export

struct ExportArgs {
  std::string checkpoint;
  std::string out;
  bool as_json = false;
};

int cmd_stats_export(const ExportArgs& args, std::ostream& out) {
  const NormalStats stats = load_checkpoint(
      args.checkpoint, LedoitWolfAlpha{std::numeric_limits<std::size_t>::max()});
  const Eigen::VectorXd mean = stats.mean();
  const double trace = stats.empirical_covariance().trace();

  std::ostringstream text;
  if (args.as_json) {
    json j{{"dim", stats.dim()},
           {"count", stats.count()},
           {"alpha", stats.alpha()},
           {"reservoir", stats.reservoir().size()},
           {"mean_norm", mean.norm()},
           {"covariance_trace", trace},
           {"mean", std::vector<double>(mean.data(), mean.data() + mean.size())}};
    text << j.dump(2) << '\n';
  } else {
    text << std::setprecision(10);
    text << "dim               " << stats.dim() << '\n'
         << "count             " << stats.count() << '\n'
         << "alpha             " << stats.alpha() << '\n'
         << "reservoir         " << stats.reservoir().size() << '\n'
         << "mean norm         " << mean.norm() << '\n'
         << "covariance trace  " << trace << '\n'
         << "mean[0:" << std::min<Eigen::Index>(8, mean.size()) << "]        ";
    for (Eigen::Index i = 0; i < std::min<Eigen::Index>(8, mean.size()); ++i) {
      text << (i ? " " : "") << mean[i];
    }
    text << '\n';
  }
  emit(args.out, out, text.str());
  return kExitOk;
}

// ---------------------------------------------------------------- synth

struct SynthArgs {
  std::string out;
  SyntheticSpec spec;
  bool use_config = false;
};

int cmd_synth(const GlobalOptions& global, SynthArgs args, const CLI::App& cmd,
              std::ostream& out) {
  if (!global.config.empty()) {
    const ExperimentConfig cfg = load_config(global.config);
    if (cfg.synthetic) {
      SyntheticSpec spec = *cfg.synthetic;
      // Flags given explicitly win over the config file.
      if (cmd.count("--records")) spec.records = args.spec.records;
      if (cmd.count("--dim")) spec.dim = args.spec.dim;
      if (cmd.count("--classes")) spec.classes = args.spec.classes;
      if (cmd.count("--center-scale")) spec.center_scale = args.spec.center_scale;
      if (cmd.count("--spread")) spec.spread = args.spec.spread;
      if (cmd.count("--imbalance")) spec.imbalance = args.spec.imbalance;
      if (cmd.count("--patches-per-frame")) spec.patches_per_frame = args.spec.patches_per_frame;
      if (cmd.count("--seed")) spec.seed = args.spec.seed;
      args.spec = spec;
    }
  }
  ensure_parent(args.out);
  const auto records = generate_synthetic(args.spec);
  write_embedding_file(args.out, records, args.spec.dim);
  out << "wrote " << records.size() << " records (dim " << args.spec.dim << ") to " << args.out
      << '\n';
  return kExitOk;
}

int report(const std::exception& e, int code, std::ostream& err) {
  err << "error: " << e.what() << '\n';
  return code;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Streaming novelty filter over embedding streams", "driftgate"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string("driftgate 0.1.0"));

  GlobalOptions global;
  app.add_option("--threads", global.threads, "Worker thread cap (env DRIFTGATE_THREADS)")
      ->check(CLI::PositiveNumber);
  app.add_option("--config,-c", global.config, "TOML configuration file");

  FilterArgs filter;
  CLI::App* filter_cmd = app.add_subcommand("filter", "Run the novelty filter over an EMBS file");
  filter_cmd->add_option("--in,-i", filter.input, "EMBS input (default: [pipeline].input)");
  filter_cmd->add_option("--out,-o", filter.out, "Output directory")->required();
  filter_cmd->add_option("--init-checkpoint", filter.init_checkpoint,
                         "Start from a saved model instead of Gaussian noise");
  filter.model.add_to(*filter_cmd);

  ScoreArgs score_args;
  CLI::App* score_cmd = app.add_subcommand("score", "Score vectors against a saved model");
  score_cmd->add_option("--in,-i", score_args.input, "EMBS input")->required();
  score_cmd->add_option("--checkpoint", score_args.checkpoint, "Model checkpoint")->required();
  score_cmd->add_option("--out,-o", score_args.out, "Scores JSONL (default: stdout)");

  SimulateArgs simulate;
  CLI::App* simulate_cmd =
      app.add_subcommand("simulate", "Run the redundancy/threshold sweep from a config");
  simulate_cmd->add_option("config", simulate.config, "TOML config (or global --config)");
  simulate_cmd->add_option("--out,-o", simulate.out, "Output directory");
  simulate_cmd->add_option("--source", simulate.source, "EMBS source (overrides the config)");

  MetricsArgs metrics;
  CLI::App* metrics_cmd = app.add_subcommand("metrics", "Balance and diversity of a dataset");
  metrics_cmd->add_option("--manifest,-m", metrics.manifest, "Manifest JSONL");
  metrics_cmd->add_option("--source", metrics.source,
                          "EMBS file for manifest entries without a source");
  metrics_cmd->add_option("--in,-i", metrics.input, "Whole EMBS file instead of a manifest");
  metrics_cmd->add_option("--pair-budget", metrics.pair_budget,
                          "Pairs per class, or 'all'")
      ->capture_default_str();
  metrics_cmd->add_option("--seed", metrics.seed, "Pair sampling seed");
  metrics_cmd->add_option("--out,-o", metrics.out, "Report JSON (default: stdout)");

  BenchArgs bench;
  CLI::App* bench_cmd = app.add_subcommand("bench", "Score and update latency");
  bench_cmd->add_option("--dims", bench.options.dims, "Embedding dimensions")
      ->delimiter(',')
      ->capture_default_str();
  bench_cmd->add_option("--patch-counts", bench.options.patch_counts, "Patches per call")
      ->delimiter(',')
      ->capture_default_str();
  bench_cmd->add_option("--reps", bench.options.reps, "Timed repetitions (>= 30)")
      ->capture_default_str();
  bench_cmd->add_option("--warmup", bench.options.warmup, "Untimed warm-up repetitions")
      ->capture_default_str();
  bench_cmd->add_option("--seed", bench.options.seed, "Data seed");
  bench_cmd->add_flag("--parallel", bench.options.parallel, "Score with all worker threads");
  bench_cmd->add_option("--out,-o", bench.out, "CSV output");

  ExportArgs export_args;
  CLI::App* export_cmd =
      app.add_subcommand("stats-export", "Summarize a model checkpoint");
  export_cmd->add_option("checkpoint", export_args.checkpoint, "Model checkpoint")->required();
  export_cmd->add_flag("--json", export_args.as_json, "JSON instead of text");
  export_cmd->add_option("--out,-o", export_args.out, "Output file (default: stdout)");

  SynthArgs synth;
  CLI::App* synth_cmd =
      app.add_subcommand("synth", "Write a seeded Gaussian-mixture EMBS file");
  synth_cmd->add_option("--out,-o", synth.out, "EMBS output")->required();
  synth_cmd->add_option("--records", synth.spec.records)->capture_default_str();
  synth_cmd->add_option("--dim", synth.spec.dim)->check(CLI::PositiveNumber)->capture_default_str();
  synth_cmd->add_option("--classes", synth.spec.classes)
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  synth_cmd->add_option("--center-scale", synth.spec.center_scale)->capture_default_str();
  synth_cmd->add_option("--spread", synth.spec.spread)->capture_default_str();
  synth_cmd->add_option("--imbalance", synth.spec.imbalance, "Class c weight ∝ imbalance^c")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  synth_cmd->add_option("--patches-per-frame", synth.spec.patches_per_frame)
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  synth_cmd->add_option("--seed", synth.spec.seed)->capture_default_str();

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::Success& e) {
    return app.exit(e, out, err) == 0 ? kExitOk : kExitInput;
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    return kExitInput;
  }

  try {
    if (global.threads) set_max_threads(*global.threads);
    if (filter_cmd->parsed()) return cmd_filter(global, filter, out, err);
    if (score_cmd->parsed()) return cmd_score(score_args, out, err);
    if (simulate_cmd->parsed()) return cmd_simulate(global, simulate, out, err);
    if (metrics_cmd->parsed()) return cmd_metrics(metrics, out, err);
    if (bench_cmd->parsed()) return cmd_bench(bench, out, err);
    if (export_cmd->parsed()) return cmd_stats_export(export_args, out);
    if (synth_cmd->parsed()) return cmd_synth(global, synth, *synth_cmd, out);
  } catch (const IoError& e) {
    return report(e, kExitIo, err);
  } catch (const DegenerateModelError& e) {
    return report(e, kExitDegenerate, err);
  } catch (const InputError& e) {
    return report(e, kExitInput, err);
  } catch (const FormatError& e) {
    return report(e, kExitInput, err);
  } catch (const fs::filesystem_error& e) {
    return report(e, kExitIo, err);
  } catch (const std::ios_base::failure& e) {
    return report(e, kExitIo, err);
  } catch (const std::exception& e) {
    return report(e, kExitIo, err);
  }
  return kExitInput;
}

}  // namespace driftgate
