#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

const fs::path kRoot = fs::temp_directory_path() / "otmil_cli_test";

int run(const std::string& args) {
  const std::string cmd = std::string(OTMIL_CLI) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<std::string> lines(const fs::path& p) {
  std::vector<std::string> out;
  std::istringstream in(slurp(p));
  for (std::string l; std::getline(in, l);) out.push_back(l);
  return out;
}

json read_json(const fs::path& p) { return json::parse(slurp(p)); }

fs::path fresh(const std::string& name) {
  const auto p = kRoot / name;
  fs::remove_all(p);
  return p;
}

// Small normal-scheme data shared by several tests.
const fs::path& small_data() {
  static const fs::path dir = [] {
    auto d = fresh("data_small");
    const int rc = run("gen --scheme normal --ratio 0.1 --bags 60 --test-bags 40 --bag-size 30 --dim 8 --seed 3 --out " +
                       d.string());
    if (rc != 0) throw std::runtime_error("gen failed");
    return d;
  }();
  return dir;
}

}  // namespace

TEST(CliGen, NormalWritesFilesAndManifest) {
  const auto out = fresh("gen_normal");
  ASSERT_EQ(run("gen --scheme normal --ratio 0.10 --bags 200 --seed 7 --out " + out.string()), 0);
  EXPECT_TRUE(fs::exists(out / "train.ndjson"));
  EXPECT_TRUE(fs::exists(out / "test.ndjson"));
  EXPECT_TRUE(fs::exists(out / "config.json"));
  const auto m = read_json(out / "manifest.json");
  EXPECT_EQ(m["ratio"].get<double>(), 0.10);
  EXPECT_EQ(m["seed"].get<int>(), 7);
  EXPECT_EQ(m["positives_per_bag"].get<int>(), 10);
  EXPECT_EQ(m["files"]["train.ndjson"]["bags"].get<int>(), 200);
  EXPECT_EQ(lines(out / "train.ndjson").size(), 200u);
  const auto cfg = read_json(out / "config.json");
  EXPECT_EQ(cfg["subcommand"], "gen");
  EXPECT_EQ(cfg["seed"], "7");
  EXPECT_EQ(cfg["test-bags"], "100");
  EXPECT_EQ(lines(out / "test.ndjson").size(), 100u);
}

TEST(CliGen, RerunIsByteIdentical) {
  const auto a = fresh("gen_a"), b = fresh("gen_b");
  const std::string flags = "gen --scheme normal --ratio 0.05 --bags 30 --bag-size 40 --seed 11 --out ";
  ASSERT_EQ(run(flags + a.string()), 0);
  ASSERT_EQ(run(flags + b.string()), 0);
  for (const char* f : {"train.ndjson", "test.ndjson", "manifest.json"}) {
    EXPECT_EQ(slurp(a / f), slurp(b / f)) << f;
  }
}

TEST(CliGen, HardWritesFourSplits) {
  const auto out = fresh("gen_hard");
  ASSERT_EQ(run("gen --scheme hard --bags 20 --test-bags 10 --bag-size 20 --out " + out.string()), 0);
  std::size_t ndjson = 0;
  for (const auto& e : fs::directory_iterator(out)) ndjson += e.path().extension() == ".ndjson";
  EXPECT_EQ(ndjson, 4u);
  for (const char* f : {"train.ndjson", "test_normal.ndjson", "test_pos0.ndjson", "test_pos8.ndjson"}) {
    EXPECT_TRUE(fs::exists(out / f)) << f;
  }
}

TEST(CliGen, InvalidRatioFailsWithMarker) {
  const auto out = fresh("gen_bad");
  EXPECT_NE(run("gen --ratio 1.5 --out " + out.string()), 0);
  EXPECT_TRUE(fs::exists(out / ".failed"));
  EXPECT_FALSE(fs::exists(out / "train.ndjson"));
}

TEST(CliTrain, DefaultsProduceSummary) {
  const auto out = fresh("train_default");
  ASSERT_EQ(run("train --data " + (small_data() / "train.ndjson").string() + " --out " + out.string()), 0);
  const auto s = read_json(out / "summary.json");
  EXPECT_TRUE(s.contains("instance_auc"));
  EXPECT_TRUE(s["instance_auc"].is_number());
  EXPECT_EQ(s["epochs"].get<int>(), 100);
  EXPECT_TRUE(fs::exists(out / "checkpoint.json"));
  EXPECT_EQ(lines(out / "metrics.csv").size(), 101u);
  EXPECT_FALSE(fs::exists(out / ".failed"));
}

TEST(CliTrain, UnconstrainedFlagsDegeneration) {
  const auto data = fresh("data_default"), out = fresh("train_noconstrain");
  ASSERT_EQ(run("gen --scheme normal --ratio 0.1 --bags 200 --seed 3 --out " + data.string()), 0);
  ASSERT_EQ(run("train --no-constrain --data " + (data / "train.ndjson").string() + " --out " + out.string()),
            0);
  const auto s = read_json(out / "summary.json");
  EXPECT_LT(s["positive_pseudo_fraction"].get<double>(), 0.01);
  EXPECT_TRUE(s["degenerate"].get<bool>());
}

TEST(CliTrain, FirstEpochRecordsHalf) {
  const auto out = fresh("train_mu");
  ASSERT_EQ(run("train --mu 0.15 --warmup-T 10 --epochs 12 --data " +
                (small_data() / "train.ndjson").string() + " --out " + out.string()),
            0);
  const auto rows = lines(out / "metrics.csv");
  ASSERT_GE(rows.size(), 12u);
  EXPECT_EQ(rows[1].substr(0, 6), "0,0.5,");
  EXPECT_EQ(rows[11].substr(0, 8), "10,0.15,");
}

TEST(CliTrain, MissingDataFails) {
  const auto out = fresh("train_missing");
  EXPECT_NE(run("train --data /nonexistent.ndjson --out " + out.string()), 0);
  EXPECT_TRUE(fs::exists(out / ".failed"));
}

TEST(CliEval, ScoresCheckpoint) {
  const auto tr = fresh("eval_train"), ev = fresh("eval_out");
  ASSERT_EQ(run("train --epochs 5 --data " + (small_data() / "train.ndjson").string() + " --out " +
                tr.string()),
            0);
  ASSERT_EQ(run("eval --checkpoint " + (tr / "checkpoint.json").string() + " --data " +
                (small_data() / "test.ndjson").string() + " --out " + ev.string()),
            0);
  const auto e = read_json(ev / "eval.json");
  EXPECT_TRUE(e["instance_auc"].is_number());
  EXPECT_EQ(e["bags"].get<int>(), 40);
  EXPECT_EQ(lines(ev / "bag_scores.csv").size(), 41u);

  const auto missing = fresh("eval_missing");
  EXPECT_NE(run("eval --checkpoint /nonexistent.json --data " + (small_data() / "test.ndjson").string() +
                " --out " + missing.string()),
            0);
  EXPECT_TRUE(fs::exists(missing / ".failed"));
}

TEST(CliSweep, FourPointGridIsolatedAndRepeatable) {
  const auto a = fresh("sweep_a"), b = fresh("sweep_b");
  const std::string flags = "sweep --mu-grid 0.1,0.15,0.2,0.25 --epochs 5 --jobs 2 --seed 4 --data " +
                            (small_data() / "train.ndjson").string() + " --test " +
                            (small_data() / "test.ndjson").string() + " --out ";
  ASSERT_EQ(run(flags + a.string()), 0);
  ASSERT_EQ(run(flags + b.string()), 0);
  const auto rows = lines(a / "sweep.csv");
  ASSERT_EQ(rows.size(), 5u);
  EXPECT_EQ(rows[0].substr(0, 17), "mu,warmup_T,seed,");
  for (std::size_t i = 1; i < rows.size(); ++i) {
    std::istringstream row(rows[i]);
    std::string mu, t, seed;
    std::getline(row, mu, ',');
    std::getline(row, t, ',');
    std::getline(row, seed, ',');
    EXPECT_EQ(t, "50");
    EXPECT_EQ(seed, "4");
  }
  EXPECT_EQ(slurp(a / "sweep.csv"), slurp(b / "sweep.csv"));
  const auto s = read_json(a / "summary.json");
  EXPECT_TRUE(s.contains("best"));
}

TEST(CliSweep, EmptyGridFails) {
  const auto out = fresh("sweep_empty");
  EXPECT_NE(run("sweep --mu-grid '' --data " + (small_data() / "train.ndjson").string() + " --out " +
                out.string()),
            0);
  EXPECT_TRUE(fs::exists(out / ".failed"));
}

TEST(CliSweep, KFoldOnCsv) {
  const auto dir = fresh("sweep_csv");
  fs::create_directories(dir);
  {
    std::ofstream csv(dir / "bench.csv");
    csv << "bag_id,bag_label,f0,f1\n";
    for (int b = 0; b < 20; ++b) {
      for (int i = 0; i < 4; ++i) {
        const bool hot = b % 2 == 0 && i == 0;
        csv << "bag" << b << ',' << (b % 2 == 0 ? 1 : -1) << ',' << (hot ? 3.0 : 0.1 * i) << ','
            << 0.05 * b << '\n';
      }
    }
  }
  ASSERT_EQ(run("sweep --kfold 5 --mu-grid 0.25 --T-grid 2,4 --epochs 5 --lr 0.05 --data " +
                (dir / "bench.csv").string() + " --out " + (dir / "out").string()),
            0);
  EXPECT_EQ(lines(dir / "out" / "sweep.csv").size(), 3u);
}

TEST(CliAblation, FourRows) {
  const auto out = fresh("ablation");
  ASSERT_EQ(run("ablation --epochs 5 --data " + (small_data() / "train.ndjson").string() + " --out " +
                out.string()),
            0);
  const auto rows = lines(out / "ablation.csv");
  ASSERT_EQ(rows.size(), 5u);
  EXPECT_EQ(rows[1].substr(0, 6), "0,0,0,");
  EXPECT_EQ(rows[2].substr(0, 6), "1,0,0,");
  EXPECT_EQ(rows[3].substr(0, 6), "1,1,0,");
  EXPECT_EQ(rows[4].substr(0, 6), "1,1,1,");
}

TEST(CliBaseline, AttentionReportsBothConceptSplits) {
  const auto data = fresh("baseline_data"), out = fresh("baseline_out");
  ASSERT_EQ(run("gen --scheme hard --bags 30 --test-bags 10 --bag-size 20 --dim 6 --out " + data.string()), 0);
  ASSERT_EQ(run("baseline --kind attention --epochs 2 --data " + (data / "train.ndjson").string() +
                " --test " + (data / "test_pos0.ndjson").string() + " --test " +
                (data / "test_pos8.ndjson").string() + " --out " + out.string()),
            0);
  const auto rows = lines(out / "baseline.csv");
  ASSERT_EQ(rows.size(), 3u);
  EXPECT_EQ(rows[1].substr(0, 10), "test_pos0,");
  EXPECT_EQ(rows[2].substr(0, 10), "test_pos8,");
  const auto j = read_json(out / "baseline.json");
  EXPECT_TRUE(j["splits"]["test_pos0"]["instance_auc"].is_number());
  EXPECT_TRUE(j["splits"]["test_pos8"]["instance_auc"].is_number());
}

TEST(CliEntropy, FullGridNonNegative) {
  const auto out = fresh("entropy");
  ASSERT_EQ(run("entropy --K 1..64 --p-steps 99 --out " + out.string()), 0);
  const auto rows = lines(out / "entropy.csv");
  ASSERT_EQ(rows.size(), 1u + 64u * 99u);
  EXPECT_EQ(rows[0], "K,p,h_instance,h_bag,difference");
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const auto diff = std::stod(rows[i].substr(rows[i].rfind(',') + 1));
    EXPECT_GE(diff, 0.0) << rows[i];
  }
}

TEST(CliGeneral, UnknownSubcommandFails) { EXPECT_NE(run("frobnicate"), 0); }
