#include <gtest/gtest.h>

#include <cstdio>
#include <fstream>
#include <json.hpp>
#include <sstream>
#include <sys/wait.h>

#include "nnse/model.hpp"
#include "nnse/tensor_io.hpp"
#include "testlib.hpp"

using namespace nnse;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct CliRun {
  int code = -1;
  std::string out;
  std::string err;
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    // logits [x, 10 - x]
    ModelSpec pair{"pair", TensorShape{1}, {LayerSpec::dense(2), LayerSpec::softmax()}};
    std::vector<LayerParams> p(2);
    p[0] = {Tensor(TensorShape{1, 2}, {1, -1}), Tensor(TensorShape{2}, {0, 10})};
    save_model(Model(pair, p), dir.path() / "pair");

    // h = relu(-x), logits [1, h]
    ModelSpec flip{"flip", TensorShape{1}, {LayerSpec::dense(1), LayerSpec::relu(), LayerSpec::dense(2)}};
    std::vector<LayerParams> q(3);
    q[0] = {Tensor(TensorShape{1, 1}, {-1}), Tensor(TensorShape{1}, {0})};
    q[2] = {Tensor(TensorShape{1, 2}, {0, 1}), Tensor(TensorShape{2}, {1, 0})};
    save_model(Model(flip, q), dir.path() / "flip");

    ModelSpec zero{"zero", TensorShape{4, 4, 1}, {LayerSpec::conv2d(2, {2, 2}), LayerSpec::relu(),
                                                  LayerSpec::flatten(), LayerSpec::dense(3)}};
    std::vector<LayerParams> z(4);
    z[0] = {Tensor(TensorShape{2, 2, 1, 2}), Tensor(TensorShape{2})};
    z[3] = {Tensor(TensorShape{18, 3}), Tensor(TensorShape{3})};
    save_model(Model(zero, z), dir.path() / "zero");

    write_tensor_csv(dir.path() / "x2.csv", Tensor(TensorShape{1}, {2}));
    write_tensor_csv(dir.path() / "x3.csv", Tensor(TensorShape{1}, {3}));
    std::vector<double> img(16);
    for (std::size_t i = 0; i < 16; ++i) img[i] = static_cast<double>(i);
    write_tensor_csv(dir.path() / "img.csv", Tensor(TensorShape{4, 4, 1}, img));
  }

  CliRun cli(const std::string& args, const std::string& env = "NNSE_LOG=warn") {
    const fs::path out = dir.path() / "stdout.txt", err = dir.path() / "stderr.txt";
    const std::string cmd = "cd " + dir.path().string() + " && " + env + " " + NNSE_CLI + " " + args + " >" +
                            out.string() + " 2>" + err.string();
    const int status = std::system(cmd.c_str());
    CliRun r;
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    r.out = slurp(out);
    r.err = slurp(err);
    return r;
  }

  testlib::TempDir dir;
};

}  // namespace

TEST_F(Cli, RunZeroModel) {
  CliRun r = cli("run zero img.csv");
  ASSERT_EQ(r.code, 0) << r.err;
  json j = json::parse(r.out);
  EXPECT_EQ(j["label"], 0);
  EXPECT_EQ(j["logits"], json::array({0.0, 0.0, 0.0}));
}

TEST_F(Cli, RunMissingFile) {
  CliRun r = cli("run zero nothere.csv");
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("MissingFile"), std::string::npos) << r.err;
  r = cli("run nomodel img.csv");
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("MissingFile"), std::string::npos) << r.err;
}

TEST_F(Cli, RunShapeMismatch) {
  CliRun r = cli("run zero x2.csv");
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("ShapeMismatch"), std::string::npos) << r.err;
}

TEST_F(Cli, AttackFound) {
  CliRun r = cli("attack pair x2.csv --sym-pixel 0 --min 0 --max 255 --out res");
  ASSERT_EQ(r.code, 0) << r.err;
  json j = json::parse(slurp(dir.path() / "res" / "attack.json"));
  EXPECT_EQ(j["verdict"], "found");
  EXPECT_EQ(j["original_label"], 1);
  EXPECT_EQ(j["new_label"], 0);
  EXPECT_EQ(j["marking"]["positions"][0]["var"], "sym_0");
  Tensor adv = read_tensor_csv(dir.path() / "res" / "adversarial.csv", TensorShape{1});
  EXPECT_GT(adv[0], 5.0);
  EXPECT_LE(adv[0], 255.0);
}

TEST_F(Cli, AttackRobustAndBudget) {
  CliRun r = cli("attack pair x2.csv --sym-pixel 0 --min 2 --max 2");
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(json::parse(r.out)["verdict"], "robust");
  r = cli("attack flip x3.csv --sym-pixel 0 --min -5 --max 5 --max-paths 1");
  EXPECT_EQ(r.code, 3) << r.err;
  EXPECT_EQ(json::parse(r.out)["verdict"], "none_within_budget");
  r = cli("attack flip x3.csv --sym-pixel 0 --min -5 --max 5");
  EXPECT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(json::parse(r.out)["verdict"], "found");
}

TEST_F(Cli, AttackUsageErrors) {
  EXPECT_EQ(cli("attack pair x2.csv").code, 1);
  EXPECT_EQ(cli("attack pair x2.csv --sym-pixel 0 --min 10 --max 5").code, 1);
  EXPECT_EQ(cli("attack pair x2.csv --sym-pixel 3").code, 1);
  EXPECT_EQ(cli("attack pair x2.csv --sym-pixel a,b").code, 1);
  EXPECT_EQ(cli("attack zero img.csv --sym-pixel 1,1,1").code, 1);
  EXPECT_EQ(cli("attack pair x2.csv --sym-pixel 0 --max-paths 0").code, 1);
  EXPECT_EQ(cli("attack pair x2.csv --sym-pixel 0 --target 1").code, 1);
  EXPECT_EQ(cli("attack pair x2.csv --sym-pixel 0 --solver cvc").code, 1);
  EXPECT_EQ(cli("frobnicate").code, 1);
}

TEST_F(Cli, AttackTargetedAndParams) {
  CliRun r = cli("attack pair x2.csv --sym-pixel 0 --target 0");
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(json::parse(r.out)["new_label"], 0);
  // Bias of class 1 (offset 2 + 1 = 3) symbolic: lowering it flips the label.
  r = cli("attack pair x2.csv --sym-param 0,3 --min -10 --max 10");
  ASSERT_EQ(r.code, 0) << r.err;
  json j = json::parse(r.out);
  EXPECT_EQ(j["verdict"], "found");
  EXPECT_EQ(j["marking"]["positions"][0]["var"], "p0_3");
  EXPECT_LE(j["marked_values"][0].get<double>(), 4.0);
}

TEST_F(Cli, ExplorePaths) {
  CliRun r = cli("explore zero img.csv");
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(json::parse(r.out)["paths"].size(), 1u);

  r = cli("explore flip x3.csv --sym-pixel 0 --min -10 --max 10");
  ASSERT_EQ(r.code, 0) << r.err;
  json j = json::parse(r.out);
  EXPECT_EQ(j["paths"].size(), 2u);
  EXPECT_FALSE(j["truncated"].get<bool>());

  r = cli("explore flip x3.csv --sym-pixel 0 --min -10 --max 10 --max-paths 1");
  ASSERT_EQ(r.code, 0) << r.err;
  j = json::parse(r.out);
  EXPECT_EQ(j["paths"].size(), 1u);
  EXPECT_TRUE(j["truncated"].get<bool>());
}

TEST_F(Cli, ExploreSmtlibExportWritesScripts) {
  CliRun r = cli("explore flip x3.csv --sym-pixel 0 --min -10 --max 10 --solver smtlib-export --out ex");
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_TRUE(fs::exists(dir.path() / "ex" / "explore.json"));
  EXPECT_TRUE(fs::exists(dir.path() / "ex" / "path_0.smt2"));
  EXPECT_TRUE(fs::exists(dir.path() / "ex" / "path_1.smt2"));
}

TEST_F(Cli, OutputIsStableApartFromMetadata) {
  CliRun a = cli("attack flip x3.csv --sym-pixel 0 --min -5 --max 5");
  CliRun b = cli("attack flip x3.csv --sym-pixel 0 --min -5 --max 5");
  json ja = json::parse(a.out), jb = json::parse(b.out);
  ja.erase("metadata");
  jb.erase("metadata");
  EXPECT_EQ(ja.dump(), jb.dump());
  CliRun c = cli("explore flip x3.csv --sym-pixel 0 --min -5 --max 5");
  CliRun d = cli("explore flip x3.csv --sym-pixel 0 --min -5 --max 5");
  json jc = json::parse(c.out), jd = json::parse(d.out);
  jc.erase("metadata");
  jd.erase("metadata");
  EXPECT_EQ(jc.dump(), jd.dump());
}

TEST_F(Cli, Coverage) {
  fs::create_directories(dir.path() / "data");
  write_tensor_csv(dir.path() / "data" / "a.csv", Tensor(TensorShape{1}, {1}));
  write_tensor_csv(dir.path() / "data" / "b.csv", Tensor(TensorShape{1}, {2}));
  CliRun r = cli("coverage flip data");
  ASSERT_EQ(r.code, 0) << r.err;
  json j = json::parse(r.out);
  EXPECT_EQ(j["neuron_coverage"], 0.0);
  EXPECT_EQ(j["inputs"], 2);
  write_tensor_csv(dir.path() / "data" / "c.csv", Tensor(TensorShape{1}, {-1}));
  j = json::parse(cli("coverage flip data").out);
  EXPECT_EQ(j["neuron_coverage"], 1.0);
  EXPECT_EQ(j["distinct_patterns"], 2);
  EXPECT_EQ(cli("coverage flip nodata").code, 2);
}

TEST_F(Cli, ExportSmt) {
  CliRun r = cli("export-smt flip x3.csv --sym-pixel 0 --min -5 --max 5 --out smt");
  ASSERT_EQ(r.code, 0) << r.err;
  const std::string script = slurp(dir.path() / "smt" / "query.smt2");
  EXPECT_NE(script.find("(set-logic QF_LRA)"), std::string::npos);
  EXPECT_NE(script.find("(declare-fun v0 () Real) ; sym_0"), std::string::npos);
  EXPECT_NE(script.find("(assert (>= (* 1.0 v0) 0.0))"), std::string::npos) << script;  // -(-x) >= 0
  // Seed path (h inactive) has constant logits [1, 0]: no flip on this path.
  EXPECT_NE(script.find("(assert false)"), std::string::npos) << script;

  r = cli("export-smt pair x2.csv --sym-pixel 0 --min 0 --max 255");
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("(assert (>= (+ (- 10.0) (* 2.0 v0)) 0.0))"), std::string::npos) << r.out;
#ifdef NNSE_Z3
  auto verdict = testlib::run_smt_solver(NNSE_Z3, r.out);
  ASSERT_TRUE(verdict.has_value());
  EXPECT_EQ(*verdict, "sat");
  auto none = testlib::run_smt_solver(NNSE_Z3, script);
  ASSERT_TRUE(none.has_value());
  EXPECT_EQ(*none, "unsat");
#endif
}

TEST_F(Cli, ExportSmtStrictAndEmpty) {
  CliRun r = cli("export-smt flip x3.csv --sym-pixel 0 --min -5 --max 5");
  ASSERT_EQ(r.code, 0);
  r = cli("export-smt pair x2.csv --sym-pixel 0 --min 0 --max 255 --target 0");
  ASSERT_EQ(r.code, 0) << r.err;
  r = cli("export-smt zero img.csv");
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(r.out.find("declare-fun"), std::string::npos);
  // Strict rendering from a strict path constraint (x > 0 branch).
  write_tensor_csv(dir.path() / "xm.csv", Tensor(TensorShape{1}, {-3}));
  r = cli("export-smt flip xm.csv --sym-pixel 0 --min -5 --max 5");
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("(assert (> (* (- 1.0) v0) 0.0))"), std::string::npos) << r.out;
}

TEST_F(Cli, ConfigFileAndOverrides) {
  std::ofstream(dir.path() / "cfg.json") << R"({"min": 2, "max": 2, "sym_pixels": ["0"], "max_paths": 50})";
  CliRun r = cli("attack pair x2.csv --config cfg.json");
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(json::parse(r.out)["verdict"], "robust");
  r = cli("attack pair x2.csv --config cfg.json --max 255");
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(json::parse(r.out)["verdict"], "found");
  std::ofstream(dir.path() / "bad.json") << "{";
  EXPECT_EQ(cli("attack pair x2.csv --config bad.json").code, 2);
  EXPECT_EQ(cli("attack pair x2.csv --config missing.json").code, 2);
}

TEST_F(Cli, LogLevelFromEnvironment) {
  CliRun quiet = cli("run zero img.csv", "NNSE_LOG=off");
  EXPECT_EQ(quiet.code, 0);
  EXPECT_TRUE(quiet.err.empty()) << quiet.err;
  CliRun loud = cli("run zero img.csv", "NNSE_LOG=info");
  EXPECT_NE(loud.err.find("label 0"), std::string::npos) << loud.err;
  EXPECT_EQ(cli("run zero img.csv", "NNSE_LOG=shouty").code, 1);
}
