#include "driftgate/harness.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <map>
#include <numeric>
#include <random>
#include <sstream>

#include <json.hpp>

#include "driftgate/embs.hpp"
#include "driftgate/error.hpp"
#include "driftgate/fileio.hpp"

namespace driftgate {

namespace fs = std::filesystem;
using nlohmann::json;

void validate(const ExperimentConfig& config) {
  if (config.redundancy_factors.empty() || config.thresholds.empty() || config.seeds.empty()) {
    throw InputError("sweep needs at least one redundancy factor, threshold and seed");
  }
  for (auto rf : config.redundancy_factors) {
    if (rf < 1) throw InputError("redundancy factors must be >= 1");
  }
  for (double t : config.thresholds) {
    if (!(t > 0.0) || !std::isfinite(t)) throw InputError("thresholds must be positive and finite");
  }
  if (config.pair_budget && *config.pair_budget == 0) {
    throw InputError("pair_budget must be positive");
  }
  if (config.stats.dim == 0) throw InputError("stats.dim must be positive");
}

std::vector<EmbeddingRecord> replicate_stream(std::span<const EmbeddingRecord> source,
                                              std::uint32_t rf, std::uint64_t seed,
                                              bool shuffle) {
  if (rf < 1) throw InputError("redundancy factor must be >= 1");
  std::uint64_t frame_span = 0;
  for (const auto& rec : source) frame_span = std::max(frame_span, rec.frame + 1);

  std::vector<EmbeddingRecord> out;
  out.reserve(source.size() * rf);
  for (std::uint32_t copy = 0; copy < rf; ++copy) {
    for (const auto& rec : source) {
      out.push_back(rec);
      out.back().frame = rec.frame + copy * frame_span;
    }
  }
  if (shuffle) {
    std::mt19937_64 rng(seed);
    std::shuffle(out.begin(), out.end(), rng);
    for (std::size_t i = 0; i < out.size(); ++i) {
      out[i].frame = i;
      out[i].patch = 0;
    }
  }
  return out;
}

void export_selection_curve(const StreamSummary& summary, const fs::path& path) {
  write_file_atomically(path, [&](std::ostream& out) {
    out << "frame_index,cumulative_selected,cumulative_redundant,cumulative_total\n";
    for (const auto& p : summary.selection_curve) {
      out << p.frame_index << ',' << p.cumulative_selected << ',' << p.cumulative_redundant << ','
          << (p.cumulative_selected + p.cumulative_redundant) << '\n';
    }
  });
}

DatasetMetrics measure(std::span<const EmbeddingRecord> records, const DiversityOptions& options) {
  DatasetMetrics m;
  const ClassHistogram hist = histogram_of(records, &m.unlabeled);
  if (!hist.counts.empty()) m.balance = balance(hist);
  m.diversity = diversity(records, options);
  return m;
}

std::string threshold_tag(double threshold) {
  std::ostringstream s;
  s << 't' << threshold;
  return s.str();
}

namespace {

double reduction_percent(std::uint64_t retained, std::uint64_t total) {
  if (total == 0) return 0.0;
  return 100.0 * (1.0 - static_cast<double>(retained) / static_cast<double>(total));
}

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b) {
  std::uint64_t h = seed ^ 0x243f6a8885a308d3ULL;
  for (std::uint64_t v : {a, b}) {
    h ^= v + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
  }
  return h;
}

std::vector<EmbeddingRecord> random_subset(std::span<const EmbeddingRecord> stream,
                                           std::uint64_t size, std::uint64_t seed) {
  std::vector<std::size_t> idx(stream.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::mt19937_64 rng(seed);
  const std::size_t k = std::min<std::size_t>(size, idx.size());
  for (std::size_t i = 0; i < k; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, idx.size() - 1);
    std::swap(idx[i], idx[pick(rng)]);
  }
  idx.resize(k);
  std::sort(idx.begin(), idx.end());
  std::vector<EmbeddingRecord> out;
  out.reserve(k);
  for (std::size_t i : idx) out.push_back(stream[i]);
  return out;
}

json metrics_json(const DatasetMetrics& m) {
  json j;
  j["balance"] = m.balance ? json::parse(to_json(*m.balance)) : json(nullptr);
  j["diversity"] = json::parse(to_json(m.diversity));
  j["unlabeled"] = m.unlabeled;
  return j;
}

void write_json(const fs::path& path, const json& j) {
  write_file_atomically(path, [&](std::ostream& out) { out << j.dump(2) << '\n'; });
}

void write_records_manifest(const fs::path& path, std::span<const EmbeddingRecord> records,
                            const std::string& source) {
  std::vector<ManifestEntry> entries;
  entries.reserve(records.size());
  for (const auto& rec : records) entries.push_back(make_manifest_entry(rec, source));
  write_manifest(entries, path);
}

}  // namespace

ExperimentReport run_experiment(const ExperimentConfig& config,
                                std::span<const EmbeddingRecord> source,
                                const std::optional<fs::path>& out_dir,
                                const fs::path& source_file) {
  validate(config);
  for (const auto& rec : source) {
    if (rec.vector.size() != config.stats.dim) {
      throw InputError("source vectors have dim " + std::to_string(rec.vector.size()) +
                       " but stats.dim is " + std::to_string(config.stats.dim));
    }
  }

  std::string source_name = source_file.string();
  if (out_dir) {
    fs::create_directories(*out_dir);
    if (source_name.empty()) {
      const fs::path written = *out_dir / "source.embs";
      write_embedding_file(written, source, config.stats.dim);
      source_name = written.string();
    }
  }

  ExperimentReport report;
  const std::uint64_t first_seed = config.seeds.front();
  DiversityOptions base_options;
  base_options.pair_budget = config.pair_budget;

  for (std::uint32_t rf : config.redundancy_factors) {
    AllData all;
    all.rf = rf;
    try {
      const auto stream = replicate_stream(source, rf, first_seed, false);
      all.size = stream.size();
      DiversityOptions opts = base_options;
      opts.seed = mix_seed(first_seed, rf, 0);
      all.metrics = measure(stream, opts);
      if (out_dir) {
        const fs::path dir = *out_dir / ("rf" + std::to_string(rf)) / "all";
        fs::create_directories(dir);
        write_json(dir / "metrics.json", metrics_json(all.metrics));
      }
    } catch (const Error& e) {
      all.error = e.what();
    }
    report.all.push_back(std::move(all));

    for (std::size_t ti = 0; ti < config.thresholds.size(); ++ti) {
      const double threshold = config.thresholds[ti];
      for (std::uint64_t seed : config.seeds) {
        NoveltyCell cell;
        cell.rf = rf;
        cell.threshold = threshold;
        cell.seed = seed;
        RandomBaseline baseline;
        baseline.rf = rf;
        baseline.threshold = threshold;
        baseline.seed = seed;

        std::optional<fs::path> dir;
        if (out_dir) {
          dir = *out_dir / ("rf" + std::to_string(rf)) / threshold_tag(threshold) /
                ("seed" + std::to_string(seed));
        }
        DiversityOptions opts = base_options;
        opts.seed = mix_seed(seed, rf, ti + 1);

        std::vector<EmbeddingRecord> stream;
        try {
          stream = replicate_stream(source, rf, seed, config.shuffle);
          cell.stream_size = stream.size();

          NormalStats stats =
              NormalStats::init_gaussian(config.stats.dim, config.stats.init, config.stats.policy);
          std::vector<EmbeddingRecord> retained;
          std::optional<DecisionLogWriter> log;
          if (dir) {
            fs::create_directories(*dir);
            log.emplace(*dir / "decisions.jsonl");
          }
          FilterSinks sinks;
          if (log) sinks.on_decision = [&](const Decision& d) { log->write(d); };
          sinks.on_record = [&](const EmbeddingRecord& rec) { retained.push_back(rec); };

          VectorSource reader(stream);
          cell.summary = run_filter(reader, stats, threshold, sinks);
          cell.retained = retained.size();
          cell.reduction_rate = reduction_percent(cell.retained, cell.stream_size);
          cell.metrics = measure(retained, opts);
          if (dir) {
            log->commit();
            write_records_manifest(*dir / "manifest.jsonl", retained, source_name);
            export_selection_curve(cell.summary, *dir / "curve.csv");
            json m = metrics_json(cell.metrics);
            m["reduction_rate"] = cell.reduction_rate;
            m["retained"] = cell.retained;
            m["stream_size"] = cell.stream_size;
            write_json(*dir / "metrics.json", m);
          }
        } catch (const Error& e) {
          cell.error = e.what();
        }

        if (!cell.error) {
          try {
            const auto subset =
                random_subset(stream, cell.retained, mix_seed(seed ^ 0x5bd1e995ULL, rf, ti));
            baseline.retained = subset.size();
            baseline.reduction_rate = reduction_percent(baseline.retained, stream.size());
            baseline.metrics = measure(subset, opts);
            if (dir) {
              write_records_manifest(*dir / "random_manifest.jsonl", subset, source_name);
              json m = metrics_json(baseline.metrics);
              m["reduction_rate"] = baseline.reduction_rate;
              m["retained"] = baseline.retained;
              write_json(*dir / "random_metrics.json", m);
            }
          } catch (const Error& e) {
            baseline.error = e.what();
          }
        } else {
          baseline.error = "novelty cell failed: " + *cell.error;
        }
        report.novelty.push_back(std::move(cell));
        report.random.push_back(std::move(baseline));
      }
    }
  }

  if (out_dir) {
    write_file_atomically(*out_dir / "report.json",
                          [&](std::ostream& out) { out << report_json(report) << '\n'; });
    write_file_atomically(*out_dir / "report.txt",
                          [&](std::ostream& out) { out << report_tables(report); });
  }
  return report;
}

namespace {

json error_or(const std::optional<std::string>& error) {
  return error ? json(*error) : json(nullptr);
}

struct SeedStats {
  std::vector<double> values;
  MetricCell cell() const {
    if (values.empty()) return MetricCell{0, 0, false};
    double mean = 0.0;
    for (double v : values) mean += v;
    mean /= static_cast<double>(values.size());
    double var = 0.0;
    for (double v : values) var += (v - mean) * (v - mean);
    return MetricCell{mean, std::sqrt(var / static_cast<double>(values.size())), true};
  }
};

json cell_json(const MetricCell& c) {
  return c.present ? json{{"mean", c.mean}, {"std_over_seeds", c.std}} : json(nullptr);
}

// Aggregates of one dataset family over seeds.
struct Aggregate {
  SeedStats reduction, cv, ne, ir, cosine, distance;

  void add(double reduction_rate, const DatasetMetrics& m) {
    reduction.values.push_back(reduction_rate);
    if (m.balance) {
      cv.values.push_back(m.balance->cv);
      ne.values.push_back(m.balance->normalized_entropy);
      ir.values.push_back(m.balance->imbalance_ratio);
    }
    if (!m.diversity.classes.empty()) {
      cosine.values.push_back(m.diversity.macro_cosine.mean);
      distance.values.push_back(m.diversity.macro_distance.mean);
    }
  }

  json to_json() const {
    return {{"reduction_rate", cell_json(reduction.cell())}, {"cv", cell_json(cv.cell())},
            {"normalized_entropy", cell_json(ne.cell())},    {"imbalance_ratio", cell_json(ir.cell())},
            {"cosine", cell_json(cosine.cell())},            {"distance", cell_json(distance.cell())}};
  }
};

using AggregateKey = std::pair<std::uint32_t, double>;

std::map<AggregateKey, std::pair<Aggregate, Aggregate>> aggregate(const ExperimentReport& r) {
  std::map<AggregateKey, std::pair<Aggregate, Aggregate>> out;
  for (const auto& c : r.novelty) {
    if (!c.error) out[{c.rf, c.threshold}].first.add(c.reduction_rate, c.metrics);
  }
  for (const auto& b : r.random) {
    if (!b.error) out[{b.rf, b.threshold}].second.add(b.reduction_rate, b.metrics);
  }
  return out;
}

}  // namespace

std::string report_json(const ExperimentReport& report, int indent) {
  json j;
  j["dataset_count"] = report.dataset_count();
  auto& all = j["all"] = json::array();
  for (const auto& a : report.all) {
    all.push_back({{"kind", "all"},
                   {"rf", a.rf},
                   {"size", a.size},
                   {"error", error_or(a.error)},
                   {"metrics", metrics_json(a.metrics)}});
  }
  auto& novelty = j["novelty"] = json::array();
  for (const auto& c : report.novelty) {
    novelty.push_back({{"kind", "novelty"},
                       {"rf", c.rf},
                       {"threshold", c.threshold},
                       {"seed", c.seed},
                       {"error", error_or(c.error)},
                       {"stream_size", c.stream_size},
                       {"retained", c.retained},
                       {"reduction_rate", c.reduction_rate},
                       {"frames_seen", c.summary.frames_seen},
                       {"frames_recorded", c.summary.frames_recorded},
                       {"patches_accepted", c.summary.patches_accepted},
                       {"metrics", metrics_json(c.metrics)}});
  }
  auto& random = j["random"] = json::array();
  for (const auto& b : report.random) {
    random.push_back({{"kind", "random"},
                      {"rf", b.rf},
                      {"threshold", b.threshold},
                      {"seed", b.seed},
                      {"error", error_or(b.error)},
                      {"retained", b.retained},
                      {"reduction_rate", b.reduction_rate},
                      {"metrics", metrics_json(b.metrics)}});
  }
  auto& agg = j["aggregates"] = json::array();
  for (const auto& [key, pair] : aggregate(report)) {
    agg.push_back({{"rf", key.first},
                   {"threshold", key.second},
                   {"novelty", pair.first.to_json()},
                   {"random", pair.second.to_json()}});
  }
  return j.dump(indent);
}

std::string report_tables(const ExperimentReport& report) {
  const auto agg = aggregate(report);
  std::map<std::uint32_t, const AllData*> all_by_rf;
  for (const auto& a : report.all) all_by_rf[a.rf] = &a;

  std::ostringstream out;
  std::uint32_t current_rf = 0;
  std::vector<std::string> columns;
  std::vector<std::vector<MetricCell>> balance_rows(3);
  std::vector<std::vector<MetricCell>> diversity_rows(4);

  auto flush = [&] {
    if (columns.empty()) return;
    MetricCell cv{0, 0, false}, ne{0, 0, false}, ir{0, 0, false};
    MetricCell cos{0, 0, false}, dist{0, 0, false};
    if (auto it = all_by_rf.find(current_rf); it != all_by_rf.end() && !it->second->error) {
      const auto& m = it->second->metrics;
      if (m.balance) {
        cv = {m.balance->cv, 0, true};
        ne = {m.balance->normalized_entropy, 0, true};
        ir = {m.balance->imbalance_ratio, 0, true};
      }
      if (!m.diversity.classes.empty()) {
        cos = {m.diversity.macro_cosine.mean, 0, true};
        dist = {m.diversity.macro_distance.mean, 0, true};
      }
    }
    columns.push_back("All");
    balance_rows[0].push_back(cv);
    balance_rows[1].push_back(ne);
    balance_rows[2].push_back(ir);
    diversity_rows[0].push_back({0, 0, false});
    diversity_rows[1].push_back(cos);
    diversity_rows[2].push_back({0, 0, false});
    diversity_rows[3].push_back(dist);

    out << "RF " << current_rf << "x: dataset balance (mean ± std over seeds)\n";
    out << render_metric_table({"CV", "NE", "IR"}, columns, balance_rows) << '\n';
    out << "RF " << current_rf << "x: dataset diversity (macro mean over classes; ± std over seeds)\n";
    out << render_metric_table({"cosine (novelty)", "cosine (random)", "distance (novelty)",
                                "distance (random)"},
                               columns, diversity_rows)
        << '\n';
    columns.clear();
    for (auto& r : balance_rows) r.clear();
    for (auto& r : diversity_rows) r.clear();
  };

  for (const auto& [key, pair] : agg) {
    if (key.first != current_rf) {
      flush();
      current_rf = key.first;
    }
    const MetricCell red = pair.first.reduction.cell();
    std::ostringstream header;
    header << threshold_tag(key.second) << " (" << std::fixed << std::setprecision(2) << red.mean
           << "%)";
    columns.push_back(header.str());
    balance_rows[0].push_back(pair.first.cv.cell());
    balance_rows[1].push_back(pair.first.ne.cell());
    balance_rows[2].push_back(pair.first.ir.cell());
    diversity_rows[0].push_back(pair.first.cosine.cell());
    diversity_rows[1].push_back(pair.second.cosine.cell());
    diversity_rows[2].push_back(pair.first.distance.cell());
    diversity_rows[3].push_back(pair.second.distance.cell());
  }
  flush();
  return out.str();
}

}  // namespace driftgate
