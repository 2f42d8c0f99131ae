#include <gtest/gtest.h>

#include <sstream>

#include <json.hpp>

#include "driftgate/checkpoint.hpp"
#include "driftgate/cli.hpp"
#include "driftgate/embs.hpp"
#include "driftgate/pipeline.hpp"
#include "oracles.hpp"
#include "temp_dir.hpp"

using nlohmann::json;
using testing_support::slurp;
using testing_support::spit;
using testing_support::TempDir;

namespace fs = std::filesystem;

namespace {

struct Run {
  int code = -1;
  std::string out;
  std::string err;
};

Run cli(std::vector<std::string> args) {
  std::ostringstream out;
  std::ostringstream err;
  Run r;
  r.code = driftgate::run_cli(args, out, err);
  r.out = out.str();
  r.err = err.str();
  return r;
}

std::string p(const fs::path& path) { return path.string(); }

std::vector<json> read_jsonl(const std::string& text) {
  std::vector<json> out;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty()) out.push_back(json::parse(line));
  }
  return out;
}

// Model with a float-representable mean, saved to `path`.
Eigen::VectorXd save_model(const fs::path& path, Eigen::Index dim) {
  const Eigen::VectorXd mu = oracle::gaussian(dim, 1, 8).col(0).cast<float>().cast<double>();
  const auto s = oracle::model_with(oracle::random_spd(dim, 3), mu, driftgate::FixedAlpha{0.1});
  driftgate::save_checkpoint(s, path);
  return mu;
}

void synth(const fs::path& out, std::size_t records, std::uint32_t dim,
           std::vector<std::string> extra = {}) {
  std::vector<std::string> args{"synth", "--out", p(out), "--records", std::to_string(records),
                                "--dim", std::to_string(dim)};
  args.insert(args.end(), extra.begin(), extra.end());
  ASSERT_EQ(cli(args).code, 0);
}

const char* kSmallSweep = R"(
[stats]
m0 = 16
alpha = "ledoit-wolf"

[sweep]
thresholds = [5, 10, 20, 40, 80]
pair_budget = "all"

[synthetic]
records = 80
dim = 6
classes = 3
center_scale = 4.0
)";

}  // namespace

TEST(Cli, HelpAndUsageErrors) {
  const auto help = cli({"--help"});
  EXPECT_EQ(help.code, 0);
  EXPECT_NE(help.out.find("filter"), std::string::npos);
  EXPECT_EQ(cli({"filter", "--help"}).code, 0);
  EXPECT_EQ(cli({"--bogus"}).code, 2);
  EXPECT_EQ(cli({"filter", "--in", "x.embs"}).code, 2);
  EXPECT_EQ(cli({"nope"}).code, 2);
}

TEST(Cli, FilterEmptyInput) {
  TempDir dir;
  driftgate::write_embedding_file(dir / "e.embs", {}, 8);
  const auto r = cli({"filter", "--in", p(dir / "e.embs"), "--out", p(dir / "o"), "--m0", "16"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(fs::file_size(dir / "o/decisions.jsonl"), 0u);
  EXPECT_EQ(fs::file_size(dir / "o/manifest.jsonl"), 0u);
  EXPECT_NE(r.out.find("frames seen 0"), std::string::npos) << r.out;
}

TEST(Cli, FilterKeepsNearlyEverythingAtATinyThreshold) {
  TempDir dir;
  synth(dir / "s.embs", 1000, 8);
  const auto r = cli({"filter", "--in", p(dir / "s.embs"), "--out", p(dir / "a"), "-t", "1e-12",
                      "--m0", "16"});
  ASSERT_EQ(r.code, 0) << r.err;
  const json s = json::parse(slurp(dir / "a/summary.json"));
  EXPECT_LT(s.at("reduction_rate").get<double>(), 1.0);
  EXPECT_EQ(s.at("patches_seen").get<int>(), 1000);
  EXPECT_EQ(read_jsonl(slurp(dir / "a/decisions.jsonl")).size(), 1000u);
  const std::string curve = slurp(dir / "a/curve.csv");
  EXPECT_EQ(std::count(curve.begin(), curve.end(), '\n'), 1001);
}

TEST(Cli, FilterOutputsAreReproducible) {
  TempDir dir;
  synth(dir / "s.embs", 400, 8, {"--patches-per-frame", "4"});
  for (const char* o : {"a", "b"}) {
    ASSERT_EQ(cli({"filter", "--in", p(dir / "s.embs"), "--out", p(dir / o), "-t", "30", "--m0",
                   "16"})
                  .code,
              0);
  }
  for (const char* f : {"decisions.jsonl", "manifest.jsonl", "curve.csv", "stats.msns"}) {
    EXPECT_EQ(slurp(dir / "a" / f), slurp(dir / "b" / f)) << f;
  }
  const auto manifest = driftgate::read_manifest(dir / "a/manifest.jsonl");
  ASSERT_FALSE(manifest.empty());
  EXPECT_TRUE(fs::path(manifest[0].source).is_absolute());
  EXPECT_EQ(driftgate::resolve_manifest(manifest).size(), manifest.size());
}

TEST(Cli, ScoreOfTheMeanIsZero) {
  TempDir dir;
  const Eigen::VectorXd mu = save_model(dir / "m.msns", 5);
  Eigen::MatrixXd x(5, 2);
  x.col(0) = mu;
  x.col(1) = mu + Eigen::VectorXd::Ones(5);
  driftgate::write_embedding_file(dir / "q.embs", oracle::records_from(x), 5);
  const auto r = cli({"score", "--in", p(dir / "q.embs"), "--checkpoint", p(dir / "m.msns")});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto lines = read_jsonl(r.out);
  ASSERT_EQ(lines.size(), 2u);
  EXPECT_EQ(lines[0].at("score").get<double>(), 0.0);
  EXPECT_GT(lines[1].at("score").get<double>(), 0.0);
  EXPECT_EQ(lines[1].at("frame").get<int>(), 1);
}

TEST(Cli, ScoreMatchesFilterDecisions) {
  TempDir dir;
  save_model(dir / "m.msns", 6);
  synth(dir / "s.embs", 700, 6, {"--patches-per-frame", "3"});
  ASSERT_EQ(cli({"filter", "--in", p(dir / "s.embs"), "--out", p(dir / "f"), "--init-checkpoint",
                 p(dir / "m.msns"), "-t", "1e18"})
                .code,
            0);
  const auto r = cli({"score", "--in", p(dir / "s.embs"), "--checkpoint", p(dir / "m.msns"),
                      "--out", p(dir / "scores.jsonl")});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto scores = read_jsonl(slurp(dir / "scores.jsonl"));
  const auto decisions = driftgate::read_decision_log(dir / "f/decisions.jsonl");
  ASSERT_EQ(scores.size(), decisions.size());
  for (std::size_t i = 0; i < scores.size(); ++i) {
    EXPECT_EQ(scores[i].at("score").get<double>(), decisions[i].score) << i;
    EXPECT_EQ(scores[i].at("frame").get<std::uint64_t>(), decisions[i].frame);
    EXPECT_EQ(scores[i].at("patch").get<std::uint32_t>(), decisions[i].patch);
  }
}

TEST(Cli, ScoreDimensionMismatch) {
  TempDir dir;
  save_model(dir / "m.msns", 6);
  synth(dir / "s.embs", 10, 4);
  const auto r = cli({"score", "--in", p(dir / "s.embs"), "--checkpoint", p(dir / "m.msns")});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("error"), std::string::npos);
}

TEST(Cli, SimulateFullSweep) {
  TempDir dir;
  spit(dir / "c.toml", kSmallSweep);
  const auto r = cli({"simulate", p(dir / "c.toml"), "--out", p(dir / "sim")});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("datasets 55 (25 novelty, 25 random, 5 all)"), std::string::npos) << r.out;
  std::size_t metrics_files = 0;
  for (const auto& e : fs::recursive_directory_iterator(dir / "sim")) {
    const auto name = e.path().filename().string();
    metrics_files += name == "metrics.json" || name == "random_metrics.json";
  }
  EXPECT_EQ(metrics_files, 55u);
}

TEST(Cli, SimulateSingleCell) {
  TempDir dir;
  std::string text = kSmallSweep;
  const std::string sweep = "thresholds = [5, 10, 20, 40, 80]";
  text.replace(text.find(sweep), sweep.size(),
               "thresholds = [10]\nredundancy_factors = [1]");
  spit(dir / "one.toml", text);
  const auto r = cli({"--config", p(dir / "one.toml"), "simulate"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("datasets 3 (1 novelty, 1 random, 1 all)"), std::string::npos) << r.out;
}

TEST(Cli, SimulateInvalidToml) {
  TempDir dir;
  spit(dir / "bad.toml", "[stats]\nm0 = 16\n[sweep\n");
  const auto r = cli({"simulate", p(dir / "bad.toml")});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("bad.toml:3:"), std::string::npos) << r.err;
  EXPECT_EQ(cli({"simulate", p(dir / "missing.toml")}).code, 1);
}

TEST(Cli, MetricsFromEmbeddingFile) {
  TempDir dir;
  std::vector<driftgate::EmbeddingRecord> recs =
      oracle::records_from(oracle::gaussian(3, 4, 1));
  recs[0].label = "a";
  for (std::size_t i = 1; i < 4; ++i) recs[i].label = "b";
  driftgate::write_embedding_file(dir / "x.embs", recs, 3);
  const auto r = cli({"metrics", "--in", p(dir / "x.embs")});
  ASSERT_EQ(r.code, 0) << r.err;
  const json j = json::parse(r.out);
  EXPECT_NEAR(j.at("balance").at("cv").get<double>(), 0.5, 1e-15);
  EXPECT_NEAR(j.at("balance").at("normalized_entropy").get<double>(), 0.8113, 5e-5);
  EXPECT_EQ(j.at("balance").at("imbalance_ratio").get<double>(), 3.0);

  for (auto& rec : recs) rec.label = rec.row % 2 ? "x" : "y";
  driftgate::write_embedding_file(dir / "u.embs", recs, 3);
  const auto u = cli({"metrics", "--in", p(dir / "u.embs"), "--out", p(dir / "u.json")});
  ASSERT_EQ(u.code, 0);
  EXPECT_DOUBLE_EQ(json::parse(slurp(dir / "u.json")).at("balance").at("normalized_entropy").get<double>(),
                   1.0);
}

TEST(Cli, MetricsFromManifestAndMissingLabels) {
  TempDir dir;
  driftgate::write_embedding_file(dir / "n.embs", oracle::records_from(oracle::gaussian(3, 6, 2)), 3);
  const auto r = cli({"metrics", "--in", p(dir / "n.embs"), "--pair-budget", "all"});
  ASSERT_EQ(r.code, 0);
  EXPECT_NE(r.err.find("no record carries a label"), std::string::npos) << r.err;
  EXPECT_TRUE(json::parse(r.out).at("balance").is_null());

  synth(dir / "s.embs", 200, 4);
  ASSERT_EQ(cli({"filter", "--in", p(dir / "s.embs"), "--out", p(dir / "f"), "-t", "5", "--m0",
                 "16"})
                .code,
            0);
  const auto m = cli({"metrics", "-m", p(dir / "f/manifest.jsonl")});
  ASSERT_EQ(m.code, 0) << m.err;
  const json j = json::parse(m.out);
  EXPECT_EQ(j.at("records").get<std::size_t>(),
            driftgate::read_manifest(dir / "f/manifest.jsonl").size());
  EXPECT_EQ(cli({"metrics"}).code, 2);
  EXPECT_EQ(cli({"metrics", "-m", p(dir / "f/manifest.jsonl"), "--in", p(dir / "s.embs")}).code, 2);
}

TEST(Cli, ExitCodes) {
  TempDir dir;
  synth(dir / "s.embs", 20, 4);
  EXPECT_EQ(cli({"bench", "--reps", "1"}).code, 2);
  const auto degenerate =
      cli({"filter", "--in", p(dir / "s.embs"), "--out", p(dir / "d"), "--sigma", "0"});
  EXPECT_EQ(degenerate.code, 3) << degenerate.err;
  EXPECT_EQ(cli({"filter", "--in", p(dir / "missing.embs"), "--out", p(dir / "m")}).code, 1);
  EXPECT_EQ(cli({"score", "--in", p(dir / "s.embs"), "--checkpoint", p(dir / "none.msns")}).code, 1);
  spit(dir / "junk.embs", "JUNKJUNKJUNKJUNKJUNK");
  EXPECT_EQ(cli({"filter", "--in", p(dir / "junk.embs"), "--out", p(dir / "j")}).code, 2);
  EXPECT_EQ(cli({"filter", "--in", p(dir / "s.embs"), "--out", p(dir / "t"), "-t", "-1"}).code, 2);
}

TEST(Cli, StatsExport) {
  TempDir dir;
  synth(dir / "s.embs", 100, 4);
  ASSERT_EQ(cli({"filter", "--in", p(dir / "s.embs"), "--out", p(dir / "f"), "-t", "5", "--m0",
                 "16"})
                .code,
            0);
  const auto r = cli({"stats-export", p(dir / "f/stats.msns"), "--json"});
  ASSERT_EQ(r.code, 0) << r.err;
  const json j = json::parse(r.out);
  EXPECT_EQ(j.at("dim").get<int>(), 4);
}

TEST(Cli, SynthHonorsFlags) {
  TempDir dir;
  synth(dir / "s.embs", 30, 7, {"--classes", "2", "--seed", "5"});
  const auto recs = driftgate::read_embedding_file(dir / "s.embs", 7);
  ASSERT_EQ(recs.size(), 30u);
  for (const auto& r : recs) EXPECT_TRUE(r.label == "c0" || r.label == "c1");
}
