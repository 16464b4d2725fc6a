#include "maxent/cli.hpp"
#include "maxent/convex.hpp"

#include "test_support.hpp"

#include <json.hpp>

#include <gtest/gtest.h>

#include <fstream>
#include <sstream>
#include <string>
#include <vector>

using namespace maxent;

namespace {

struct Run {
  int code = -1;
  std::string out;
  std::string err;
};

Run cli(std::vector<std::string> args) {
  args.insert(args.begin(), "maxent");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  Run r;
  r.code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  r.out = out.str();
  r.err = err.str();
  return r;
}

std::string model_path(const char* name) { return std::string(MAXENT_MODELS_DIR) + "/" + name; }

/// CSV text with the last (wall_ms) column removed.
std::string without_wall_time(const std::string& csv) {
  std::istringstream in(csv);
  std::string line, result;
  while (std::getline(in, line)) result += line.substr(0, line.rfind(',')) + "\n";
  return result;
}

}  // namespace

TEST(Cli, ValidateShippedModels) {
  for (const char* name : {"ex1.json", "ex2.json"}) {
    const auto r = cli({"validate", model_path(name)});
    EXPECT_EQ(r.code, 0) << r.err;
    EXPECT_TRUE(nlohmann::json::parse(r.out).at("is_dag_to_absorbing").get<bool>());
  }
}

TEST(Cli, ShippedModelsMatchBuiltins) {
  EXPECT_EQ(load_model(model_path("ex1.json")), builtin_example("ex1"));
  EXPECT_EQ(load_model(model_path("ex2.json")), builtin_example("ex2"));
}

TEST(Cli, ValidateFailures) {
  EXPECT_EQ(cli({"validate", support::write_temp("bad.json", "{\"states\": [").string()}).code, 1);
  const auto short_row = support::write_temp("short.json", R"({"states":["s"],"initial":"s","actions":["a"],
    "observations":["z"],"transitions":[{"from":"s","action":"a","to":{"s":0.9}}]})");
  EXPECT_EQ(cli({"validate", short_row.string()}).code, 1);
  EXPECT_EQ(cli({"validate", "/nonexistent/model.json"}).code, 1);
  EXPECT_EQ(cli({"frobnicate"}).code, 1);
}

TEST(Cli, EvaluateUniformController) {
  const auto fsc = support::write_temp("uniform.json", R"({"k":1,"delta":"chain",
    "gamma":[{"q":1,"z":"z1","dist":{"a1":0.5,"a2":0.5}}]})");
  const auto r = cli({"evaluate", model_path("ex1.json"), fsc.string()});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto doc = nlohmann::json::parse(r.out);
  EXPECT_NEAR(doc.at("entropy_bits").get<double>(), 2.0, 1e-12);
  EXPECT_NEAR(doc.at("expected_reward").get<double>(), 0.5, 1e-12);
}

TEST(Cli, EvaluateDeterministicAndMismatch) {
  const auto det = support::write_temp("det.json", R"({"k":2,"delta":"chain",
    "gamma":[{"q":1,"z":"z1","dist":{"a1":1,"a2":0}},{"q":2,"z":"z1","dist":{"a1":0,"a2":1}}]})");
  const auto r = cli({"evaluate", "builtin:ex1", det.string()});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(nlohmann::json::parse(r.out).at("entropy_bits").get<double>(), 0.0);

  const auto other = support::write_temp("other.json", R"({"k":1,"delta":"chain",
    "gamma":[{"q":1,"z":"z1","dist":{"a1":0.5,"b":0.5}}]})");
  EXPECT_EQ(cli({"evaluate", "builtin:ex1", other.string()}).code, 1);
}

TEST(Cli, SynthesizeWritesControllerAndResult) {
  const auto out = std::filesystem::temp_directory_path() / "maxent_test_ctrl.json";
  const auto r = cli({"synthesize", model_path("ex1.json"), "--memory", "2", "--gamma", "0.7", "--restarts", "3",
                      "--out", out.string()});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto doc = nlohmann::json::parse(r.out);
  EXPECT_NEAR(doc.at("entropy_bits").get<double>(), 1.88, 0.02);
  EXPECT_TRUE(doc.at("converged").get<bool>());
  for (const char* key : {"expected_reward", "nu_initial", "iterations"}) EXPECT_TRUE(doc.contains(key));

  const auto check = cli({"evaluate", model_path("ex1.json"), out.string()});
  ASSERT_EQ(check.code, 0) << check.err;
  EXPECT_NEAR(nlohmann::json::parse(check.out).at("entropy_bits").get<double>(),
              doc.at("entropy_bits").get<double>(), 1e-9);
}

TEST(Cli, SynthesizeEx2MemoryOne) {
  const auto r = cli({"synthesize", "builtin:ex2", "--memory", "1", "--gamma", "1.0", "--restarts", "3"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NEAR(nlohmann::json::parse(r.out).at("entropy_bits").get<double>(), 0.0, 0.01);
}

TEST(Cli, SynthesizeUnreachableThreshold) {
  const auto r = cli({"synthesize", "builtin:ex1", "--memory", "1", "--gamma", "5", "--restarts", "2"});
  EXPECT_EQ(r.code, 2);
  EXPECT_FALSE(nlohmann::json::parse(r.out).at("converged").get<bool>());
}

TEST(Cli, BoundOnEx1) {
  const auto r = cli({"bound", "builtin:ex1", "--gamma", "0.5", "--restarts", "3"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NEAR(nlohmann::json::parse(r.out).at("entropy_bits").get<double>(), 2.0, 0.01);
}

TEST(Cli, SweepSingleRowAndEmptyRange) {
  const auto r = cli({"sweep", "builtin:ex1", "--param", "gamma", "--from", "0.6", "--to", "0.7", "--step", "0.5",
                      "--memory", "2", "--restarts", "2"});
  ASSERT_EQ(r.code, 0) << r.err;
  std::istringstream in(r.out);
  std::string header, row, extra;
  std::getline(in, header);
  std::getline(in, row);
  EXPECT_EQ(header, "param,entropy_bits,expected_reward,converged,restart_best,iterations,wall_ms");
  EXPECT_EQ(row.rfind("0.6,", 0), 0u);
  EXPECT_FALSE(std::getline(in, extra));

  EXPECT_EQ(cli({"sweep", "builtin:ex1", "--param", "gamma", "--from", "1", "--to", "0.5", "--step", "0.1"}).code, 1);
  EXPECT_EQ(cli({"sweep", "builtin:ex1", "--param", "gamma", "--from", "0.5", "--to", "1", "--step", "0"}).code, 1);
  EXPECT_EQ(cli({"sweep", "builtin:ex1", "--param", "memory", "--from", "0", "--to", "2", "--step", "1"}).code, 1);
}

TEST(Cli, SweepIsDeterministic) {
  const std::vector<std::string> args{"sweep",  "builtin:ex1", "--param",    "gamma", "--from", "0.5", "--to",
                                      "0.9",    "--step",      "0.2",        "--memory", "2",   "--seed", "17",
                                      "--restarts", "3"};
  const auto a = cli(args);
  const auto b = cli(args);
  ASSERT_EQ(a.code, 0) << a.err;
  EXPECT_EQ(without_wall_time(a.out), without_wall_time(b.out));
}

TEST(Cli, ExportModel) {
  const auto r = cli({"export-model", "builtin:ex2"});
  ASSERT_EQ(r.code, 0);
  EXPECT_EQ(parse_model(r.out), builtin_example("ex2"));
}

TEST(Cli, DumpsFirstSubproblem) {
  const auto dump = std::filesystem::temp_directory_path() / "maxent_test_sub.txt";
  const auto r = cli({"synthesize", "builtin:ex1", "--memory", "2", "--gamma", "0.9", "--restarts", "1",
                      "--dump-subproblem", dump.string()});
  ASSERT_EQ(r.code, 0) << r.err;
  std::ifstream in(dump);
  std::stringstream text;
  text << in.rdbuf();
  const auto sp = parse_subproblem_dump(text.str());
  EXPECT_EQ(sp.num_variables(), 4 + 12 + 12 + 21);
  EXPECT_EQ(sp.convex.size(), 21u);
}
