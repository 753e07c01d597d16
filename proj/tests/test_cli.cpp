#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "ssmgan/serialize.hpp"

namespace fs = std::filesystem;

namespace {

int run(const std::string& args) {
  const std::string cmd = std::string(SSMGAN_CLI_PATH) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    dir = fs::temp_directory_path() / ("ssmgan_cli_" + std::to_string(::getpid()));
    fs::remove_all(dir);
    fs::create_directories(dir);
  }
  void TearDown() override { fs::remove_all(dir); }
  std::string at(const std::string& name) const { return (dir / name).string(); }
  fs::path dir;
};

}  // namespace

TEST_F(Cli, PipelineEndToEnd) {
  ASSERT_EQ(run("fixture --out-dir " + dir.string() + " --name rec --n 30 --v 20 --f 10 --seed 2"), 0);
  ASSERT_EQ(run("ingest --header " + at("rec.hea") + " --signal " + at("rec.dat") + " --annotations " + at("rec.csv") + " --out " +
                at("rec.json")),
            0);
  ASSERT_EQ(run("preprocess --in " + at("rec.json") + " --out-train " + at("train.json") + " --out-test " + at("test.json")), 0);
  const auto train = ssmgan::io::read_json(at("train.json"));
  EXPECT_EQ(train.at("T"), 270);

  ASSERT_EQ(run("fit-shape --train " + at("train.json") + " --k 2 --seed 1 --out-model " + at("model.json")), 0);
  const std::string train_args = "train --train " + at("train.json") + " --model " + at("model.json") +
                                 " --steps 2 --batch 4 --n-critic 1 --network compact --seed 3 --checkpoint-every 1";
  ASSERT_EQ(run(train_args + " --out-checkpoint " + at("ckpt.json") + " --log " + at("log.csv")), 0);
  const auto ckpt = ssmgan::io::read_json(at("ckpt.json"));
  EXPECT_EQ(ckpt.at("step"), 2);
  EXPECT_EQ(slurp(at("log.csv")).substr(0, 34), "step,critic_loss,gen_loss,gp_term\n");

  ASSERT_EQ(run(train_args + " --out-checkpoint " + at("ckpt2.json")), 0);
  EXPECT_EQ(slurp(at("ckpt.json")), slurp(at("ckpt2.json")));

  for (const std::string c : {"N", "V", "F"}) {
    ASSERT_EQ(run("generate --checkpoint " + at("ckpt.json") + " --model " + at("model.json") + " --class " + c + " --count 6 --seed 4 --out " +
                  at("gen_" + c + ".json")),
              0);
  }
  const auto gen = ssmgan::io::read_json(at("gen_V.json"));
  EXPECT_EQ(gen.at("beats").size(), 6u);
  EXPECT_EQ(gen.at("shape_rows").size(), 6u);

  ASSERT_EQ(run("evaluate --real " + at("test.json") + " --fake " + at("gen_N.json") + " --out-report " + at("eval.csv")), 0);
  EXPECT_NE(slurp(at("eval.csv")).find("class,metric,value,n_real,n_fake"), std::string::npos);
  EXPECT_TRUE(fs::exists(at("eval.json")));
  EXPECT_EQ(run("evaluate --real " + at("test.json") + " --fake " + at("gen_N.json") + " --pairing mean --out-report " + at("eval_mean.csv")), 0);

  ASSERT_EQ(run("augment-experiment --train " + at("train.json") + " --test " + at("test.json") + " --checkpoint " + at("ckpt.json") +
                " --model " + at("model.json") + " --counts 0,2,3 --epochs 1 --out-report " + at("aug.csv")),
            0);
  EXPECT_NE(slurp(at("aug.csv")).find("setting,class,metric,value"), std::string::npos);
  EXPECT_TRUE(fs::exists(at("aug.json")));

  ASSERT_EQ(run("plot --beats " + at("gen_F.json") + " --model " + at("model.json") + " --out-svg " + at("plot.svg")), 0);
  EXPECT_EQ(slurp(at("plot.svg")).rfind("<svg", 0), 0u);
  EXPECT_TRUE(fs::exists(at("plot.csv")));
}

TEST_F(Cli, ExitCodes) {
  EXPECT_EQ(run("--help"), 0);
  EXPECT_EQ(run(""), 2);
  EXPECT_EQ(run("no-such-command"), 2);
  EXPECT_EQ(run("ingest --header x.hea"), 2);
  EXPECT_EQ(run("ingest --header " + at("missing.hea") + " --signal " + at("m.dat") + " --annotations " + at("m.csv") + " --out " + at("o.json")), 3);
  std::ofstream(at("bad.json")) << "{not json";
  EXPECT_EQ(run("fit-shape --train " + at("bad.json") + " --out-model " + at("m.json")), 3);
  ASSERT_EQ(run("fixture --out-dir " + dir.string() + " --name r --n 4 --v 4 --f 0"), 0);
  EXPECT_EQ(run("evaluate --real " + at("r.csv") + " --fake " + at("r.csv") + " --pairing sideways --out-report " + at("e.csv")), 2);
}
