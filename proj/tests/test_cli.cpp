#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "ost/cli.hpp"
#include "ost/concordance.hpp"
#include "roster_fixture.hpp"

namespace fs = std::filesystem;
using namespace ost;
using nlohmann::json;

namespace {

struct Run {
  int code;
  std::string out, err;
};

Run invoke(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = cli::run_cli(std::move(args), out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) { return cli::read_file(p.string()); }

void spit(const fs::path& p, const std::string& s) { cli::write_file(p.string(), s); }

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("ost_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  std::string p(const std::string& name) const { return (dir_ / name).string(); }

  // Synthetic rosters turned into a dataset through the CLI itself.
  std::string make_dataset(std::size_t n, const std::string& variant = "published") {
    EXPECT_EQ(invoke({"synth", "--n", std::to_string(n), "--seed", "4", "--variant", variant, "--out-open",
                   p("open.csv"), "--out-closed", p("closed.csv"), "--tree", p("planted.json")})
                  .code,
              0);
    EXPECT_EQ(invoke({"prepare", "--open", p("open.csv"), "--closed", p("closed.csv"), "--out", p("data.csv")}).code, 0);
    return p("data.csv");
  }

  fs::path dir_;
};

}  // namespace

TEST_F(Cli, HelpAndUsageErrors) {
  auto r = invoke({"--help"});
  EXPECT_EQ(r.code, 0);
  for (const char* sub : {"prepare", "synth", "fit", "tune", "reseed", "predict", "score"})
    EXPECT_NE(r.out.find(sub), std::string::npos) << sub;
  EXPECT_EQ(invoke({}).code, cli::kExitUsage);
  EXPECT_EQ(invoke({"bogus"}).code, cli::kExitUsage);
  EXPECT_EQ(invoke({"fit"}).code, cli::kExitUsage);
  EXPECT_EQ(invoke({"fit", "--data", "x.csv", "--max-depth", "deep"}).code, cli::kExitUsage);
}

TEST(CliExitCodes, Mapping) {
  EXPECT_EQ(cli::exit_code_for(Errc::config_error), 1);
  EXPECT_EQ(cli::exit_code_for(Errc::invariant_violation), 3);
  EXPECT_EQ(cli::exit_code_for(Errc::schema_error), 2);
  EXPECT_EQ(cli::exit_code_for(Errc::parse_error), 2);
}

TEST_F(Cli, SynthThenPrepareKeepsEveryProvider) {
  make_dataset(600);
  const auto prov = json::parse(slurp(p("data.csv.provenance.json")));
  EXPECT_EQ(prov["output"]["rows"], 600);
  EXPECT_EQ(prov["deduplication"]["overlapping_ids_removed"], 0);
  EXPECT_EQ(prov["output"]["features"].size(), 11u);
  EXPECT_EQ(prov["output"]["sha256"], cli::sha256_hex(slurp(p("data.csv"))));
  EXPECT_EQ(prov["inputs"]["open_sha256"], cli::sha256_hex(slurp(p("open.csv"))));
  EXPECT_TRUE(fs::exists(p("data.csv.provenance.txt")));
  EXPECT_TRUE(fs::exists(p("planted.json")));
}

TEST_F(Cli, PrepareReportsRosterProvenance) {
  fixture::Expected e;
  const auto r = fixture::paper_scale(e);
  spit(p("open.csv"), r.open_csv);
  spit(p("closed.csv"), r.closed_csv);
  const auto run = invoke({"prepare", "--open", p("open.csv"), "--closed", p("closed.csv"), "--out", p("d.csv")});
  ASSERT_EQ(run.code, 0) << run.err;
  const auto prov = json::parse(slurp(p("d.csv.provenance.json")));
  EXPECT_EQ(prov["deduplication"]["within_closed_duplicates"], 1);
  EXPECT_EQ(prov["deduplication"]["overlapping_ids_removed"], 5);
  EXPECT_EQ(prov["output"]["rows"], e.output_rows);
  EXPECT_NE(run.out.find("IDs in both rosters removed: 5"), std::string::npos);
}

TEST_F(Cli, PrepareDataErrors) {
  spit(p("open.csv"), "dcf_id,capacity\nA1,12\n");
  spit(p("closed.csv"), "dcf_id,capacity\n");
  auto r = invoke({"prepare", "--open", p("open.csv"), "--closed", p("closed.csv"), "--out", p("d.csv")});
  EXPECT_EQ(r.code, cli::kExitData);
  EXPECT_NE(r.err.find("SchemaError"), std::string::npos);
  EXPECT_NE(r.err.find("open.csv"), std::string::npos);
  EXPECT_NE(r.err.find("origination_year"), std::string::npos) << r.err;

  make_dataset(50);
  std::string open = slurp(p("open.csv"));
  const auto second_line = open.find('\n') + 1;
  // Corrupt the capacity cell of the first data row.
  std::istringstream hdr(open.substr(0, second_line - 1));
  std::vector<std::string> cols;
  for (std::string c; std::getline(hdr, c, ',');) cols.push_back(c);
  const auto ci = std::find(cols.begin(), cols.end(), "capacity") - cols.begin();
  std::vector<std::string> cells;
  {
    std::istringstream row(open.substr(second_line, open.find('\n', second_line) - second_line));
    for (std::string c; std::getline(row, c, ',');) cells.push_back(c);
  }
  cells[static_cast<std::size_t>(ci)] = "lots";
  std::string joined;
  for (std::size_t i = 0; i < cells.size(); ++i) joined += (i ? "," : "") + cells[i];
  open.replace(second_line, open.find('\n', second_line) - second_line, joined);
  spit(p("open.csv"), open);
  r = invoke({"prepare", "--open", p("open.csv"), "--closed", p("closed.csv"), "--out", p("d.csv")});
  EXPECT_EQ(r.code, cli::kExitData);
  EXPECT_NE(r.err.find("RowError"), std::string::npos) << r.err;
  EXPECT_NE(r.err.find("row 1"), std::string::npos) << r.err;

  r = invoke({"prepare", "--open", p("missing.csv"), "--closed", p("closed.csv"), "--out", p("d.csv")});
  EXPECT_EQ(r.code, cli::kExitData);
  r = invoke({"prepare", "--open", p("open.csv"), "--closed", p("closed.csv"), "--out", p("d.csv"), "--year-count",
           "sometimes"});
  EXPECT_EQ(r.code, cli::kExitUsage);
}

TEST_F(Cli, FitIsByteDeterministic) {
  const auto data = make_dataset(1200);
  std::vector<std::string> outputs;
  for (int rep = 0; rep < 2; ++rep) {
    const auto d = "run" + std::to_string(rep);
    const auto r = invoke({"fit", "--data", data, "--max-depth", "3", "--restarts", "2", "--seed", "9", "--out-tree",
                        p(d + "/tree.json"), "--report", p(d + "/report.json"), "--plot-dir", p(d + "/plots")});
    ASSERT_EQ(r.code, 0) << r.err;
    outputs.push_back(r.out + slurp(p(d + "/tree.json")) + slurp(p(d + "/report.json")) +
                      slurp(p(d + "/plots/curves.csv")) + slurp(p(d + "/plots/curves.svg")));
  }
  EXPECT_EQ(outputs[0], outputs[1]);
  const auto report = json::parse(slurp(p("run0/report.json")));
  EXPECT_EQ(report["config"]["seed"], 9);
  EXPECT_EQ(report["config"]["max_depth"], 3);
  EXPECT_EQ(report["input_sha256"], cli::sha256_hex(slurp(data)));
  const auto tree = deserialize(slurp(p("run0/tree.json")));
  EXPECT_LE(tree.depth(), 3);
  for (const auto& n : tree.nodes)
    if (n.is_leaf()) {
      EXPECT_GE(n.leaf().n_train, tree.fit.min_bucket);
    }
  EXPECT_EQ(slurp(p("run0/plots/curves.csv")).rfind("# ost fit; input_sha256=", 0), 0u);
}

TEST_F(Cli, FitConfigErrors) {
  const auto data = make_dataset(100);
  EXPECT_EQ(invoke({"fit", "--data", data, "--alpha", "lots"}).code, cli::kExitUsage);
  EXPECT_EQ(invoke({"fit", "--data", data, "--alpha", "-1"}).code, cli::kExitUsage);
  EXPECT_EQ(invoke({"fit", "--data", data, "--train-frac", "1.5"}).code, cli::kExitUsage);
  EXPECT_EQ(invoke({"fit", "--data", data, "--min-bucket", "500"}).code, cli::kExitUsage);
  EXPECT_EQ(invoke({"fit", "--data", p("nope.csv")}).code, cli::kExitData);
}

TEST_F(Cli, PredictAndScoreAgreeWithLibrary) {
  const auto data = make_dataset(800);
  auto r = invoke({"predict", "--tree", p("planted.json"), "--input", data, "--out", p("pred.csv")});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto tree = deserialize(slurp(p("planted.json")));
  std::istringstream in(slurp(data));
  const auto ds = read_dataset(in);
  const auto expected = predict_expected_survival(tree, ds);
  std::istringstream pred(slurp(p("pred.csv")));
  std::string line;
  std::getline(pred, line);
  EXPECT_EQ(line, "dcf_id,leaf_id,expected_survival");
  std::size_t i = 0;
  for (; std::getline(pred, line); ++i) {
    ASSERT_LT(i, ds.size());
    EXPECT_EQ(line.substr(0, line.find(',')), ds.ids[i]);
    EXPECT_NEAR(std::stod(line.substr(line.rfind(',') + 1)), expected[i], 1e-9);
  }
  EXPECT_EQ(i, ds.size());

  r = invoke({"score", "--tree", p("planted.json"), "--data", data, "--report", p("score.json")});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto c = harrell_c(ds.observations, expected);
  const auto j = json::parse(slurp(p("score.json")));
  EXPECT_NEAR(j["c_index"].get<double>(), c.c_index, 1e-11);
  EXPECT_EQ(j["permissible_pairs"], c.permissible_pairs);
  EXPECT_NE(r.out.find(cli::format_c(c.c_index)), std::string::npos);
}

TEST_F(Cli, PredictEdgeCases) {
  make_dataset(100);
  const auto tree = deserialize(slurp(p("planted.json")));
  std::string header = "dcf_id";
  for (const auto& f : tree.schema.features) header += "," + f.name;
  spit(p("empty.csv"), header + "\n");
  auto r = invoke({"predict", "--tree", p("planted.json"), "--input", p("empty.csv")});
  EXPECT_EQ(r.code, 0);
  EXPECT_EQ(r.out, "dcf_id,leaf_id,expected_survival\n");

  std::string data = slurp(p("data.csv"));
  const auto pos = data.find("Licensed");
  ASSERT_NE(pos, std::string::npos);
  data.replace(pos, 8, "Revoked");
  spit(p("bad.csv"), data);
  r = invoke({"predict", "--tree", p("planted.json"), "--input", p("bad.csv")});
  EXPECT_EQ(r.code, cli::kExitData);
  EXPECT_NE(r.err.find("Revoked"), std::string::npos);

  spit(p("broken.json"), "{\"format\": \"ost-survival-tree\"");
  r = invoke({"predict", "--tree", p("broken.json"), "--input", p("empty.csv")});
  EXPECT_EQ(r.code, cli::kExitData);
  EXPECT_NE(r.err.find("ParseError"), std::string::npos);
}

TEST_F(Cli, TuneWritesReportAndPlotsDeterministically) {
  const auto data = make_dataset(1000);
  std::vector<std::string> outputs;
  for (int rep = 0; rep < 2; ++rep) {
    const auto d = p("tune" + std::to_string(rep));
    const auto r = invoke({"tune", "--data", data, "--depths", "2..4", "--restarts", "1", "--out-dir", d, "--reseed",
                        "352"});
    ASSERT_EQ(r.code, 0) << r.err;
    std::string all = r.out;
    for (const char* f : {"report.json", "tree.json", "depth_c.csv", "depth_c.svg", "curves.csv", "curves.svg"})
      all += slurp(fs::path(d) / f);
    outputs.push_back(all);
  }
  EXPECT_EQ(outputs[0], outputs[1]);
  const auto j = json::parse(slurp(fs::path(p("tune0")) / "report.json"));
  ASSERT_EQ(j["per_depth"].size(), 3u);
  EXPECT_EQ(j["config"]["depths"], json({2, 3, 4}));
  EXPECT_TRUE(j.contains("reseed_comparison"));
  EXPECT_EQ(j["reseed_comparison"]["seed_b"], 352);
  const int chosen = j["chosen_depth"];
  EXPECT_GE(chosen, 2);
  EXPECT_LE(chosen, 4);
  EXPECT_NE(outputs[0].find("<- chosen"), std::string::npos);

  EXPECT_EQ(invoke({"tune", "--data", data, "--depths", "5..4", "--out-dir", p("x")}).code, cli::kExitUsage);
  EXPECT_EQ(invoke({"tune", "--data", data, "--depths", "4,x", "--out-dir", p("x")}).code, cli::kExitUsage);
  EXPECT_EQ(invoke({"tune", "--data", data, "--depths", "5,4", "--out-dir", p("x")}).code, cli::kExitUsage);
}

TEST_F(Cli, ReseedEqualSeedsWarns) {
  const auto data = make_dataset(600);
  const auto r = invoke({"reseed", "--data", data, "--seed-a", "3", "--seed-b", "3", "--max-depth", "2", "--restarts",
                      "1", "--out", p("reseed.json")});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.err.find("warning"), std::string::npos);
  EXPECT_NE(r.out.find("split-feature sets identical"), std::string::npos);
  const auto j = json::parse(slurp(p("reseed.json")));
  EXPECT_TRUE(j["comparison"]["identical_feature_sets"].get<bool>());
  EXPECT_EQ(invoke({"reseed", "--data", data, "--seed", "3"}).code, cli::kExitUsage);
}

TEST(CliHelpers, Sha256KnownVector) {
  EXPECT_EQ(cli::sha256_hex("abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
  EXPECT_EQ(cli::format_c(std::nullopt), "NA");
  EXPECT_EQ(cli::format_c(0.76543), "0.7654");
}

TEST_F(Cli, PlantedTreeGivesLargeVpkProvidersTheTopLeaf) {
  const auto data = make_dataset(400);
  std::istringstream in(slurp(data));
  const auto ds = read_dataset(in);
  ASSERT_EQ(invoke({"predict", "--tree", p("planted.json"), "--input", data, "--out", p("pred.csv")}).code, 0);
  std::istringstream pred(slurp(p("pred.csv")));
  std::string line;
  std::getline(pred, line);
  std::size_t checked = 0;
  for (std::size_t i = 0; std::getline(pred, line); ++i) {
    const bool large = ds.columns[feature::capacity][i] >= 13;
    const bool vpk = ds.columns[feature::vpk][i] == 1;
    if (!large || !vpk) continue;
    EXPECT_EQ(line.substr(line.rfind(',') + 1), "9.8");
    ++checked;
  }
  EXPECT_GT(checked, 20u);
}

TEST_F(Cli, SingleDepthGrid) {
  const auto data = make_dataset(600);
  ASSERT_EQ(invoke({"tune", "--data", data, "--depths", "4..4", "--restarts", "1", "--out-dir", p("t")}).code, 0);
  const auto j = json::parse(slurp(p("t/report.json")));
  EXPECT_EQ(j["per_depth"].size(), 1u);
  EXPECT_EQ(j["chosen_depth"], 4);
}

TEST_F(Cli, FlatGeneratorReseedStillSucceeds) {
  const auto data = make_dataset(800, "flat");
  const auto r = invoke({"reseed", "--data", data, "--max-depth", "3", "--restarts", "1"});
  EXPECT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("split-feature sets"), std::string::npos);
}
