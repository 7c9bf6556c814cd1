// Copyright 2026 The mlsb Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdio>
#include <fstream>
#include <sstream>

#include "mlsb/dataset.hpp"
#include "test_util.hpp"

namespace mlsb {
namespace {

using testing::bar_digits;
using testing::scratch_dir;

struct Outcome {
  int status;
  std::string out;  // stdout and stderr interleaved
};

Outcome run(const std::string& args) {
  const std::string cmd = std::string(MLSB_CLI_PATH) + " " + args + " 2>&1";
  FILE* pipe = popen(cmd.c_str(), "r");
  Outcome o{-1, {}};
  if (!pipe) return o;
  char buf[4096];
  while (std::size_t n = std::fread(buf, 1, sizeof buf, pipe)) o.out.append(buf, n);
  const int raw = pclose(pipe);
  o.status = WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
  return o;
}

std::string without_time(const std::string& text) {
  std::istringstream in(text);
  std::string line, out;
  while (std::getline(in, line)) {
    if (line.rfind("time:", 0) != 0) out += line + "\n";
  }
  return out;
}

class Cli : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    dir_ = new std::filesystem::path(scratch_dir("cli"));
    write_idx(bar_digits(400, 1), *dir_ / "train-img", *dir_ / "train-lbl");
    write_idx(bar_digits(150, 2), *dir_ / "test-img", *dir_ / "test-lbl");
    std::ofstream cfg(*dir_ / "run.cfg");
    cfg << "# tiny run\n"
        << "train-images = " << (*dir_ / "train-img").string() << "\n"
        << "train-labels = " << (*dir_ / "train-lbl").string() << "\n"
        << "test-images = " << (*dir_ / "test-img").string() << "\n"
        << "test-labels = " << (*dir_ / "test-lbl").string() << "\n"
        << "epochs = 2\nbatch-size = 32\ncount = 10\n";
  }
  static void TearDownTestSuite() {
    std::filesystem::remove_all(*dir_);
    delete dir_;
  }
  static std::string cfg() { return "--config " + (*dir_ / "run.cfg").string(); }
  static std::string out(const std::string& name) { return (*dir_ / name).string(); }

  static std::filesystem::path* dir_;
};

std::filesystem::path* Cli::dir_ = nullptr;

TEST_F(Cli, UnknownFlagIsRejected) {
  const Outcome o = run("train --bogus-flag");
  EXPECT_NE(o.status, 0);
  EXPECT_NE(o.out.find("error[UsageError]"), std::string::npos) << o.out;
  EXPECT_NE(o.out.find("--bogus-flag"), std::string::npos) << o.out;
  EXPECT_NE(o.out.find("Usage"), std::string::npos) << o.out;
}

TEST_F(Cli, UnknownOrMissingSubcommand) {
  EXPECT_NE(run("train-all").status, 0);
  EXPECT_NE(run("").status, 0);
}

TEST_F(Cli, InvalidValueNamesTheKey) {
  const Outcome o = run("train --epochs abc");
  EXPECT_NE(o.status, 0);
  EXPECT_NE(o.out.find("error[ConfigError]: key 'epochs'"), std::string::npos) << o.out;
  const Outcome bad_file = run("train --config /nonexistent.cfg");
  EXPECT_NE(bad_file.out.find("error[IoError]"), std::string::npos) << bad_file.out;
}

TEST_F(Cli, SweepDryRunPlans78CellsAndWritesNothing) {
  const std::string where = out("dry");
  const Outcome o = run("sweep --dry-run --out-dir " + where);
  EXPECT_EQ(o.status, 0) << o.out;
  EXPECT_EQ(o.out.rfind("config-digest: ", 0), 0u);
  EXPECT_NE(o.out.find("\nseeds: 1,2,3\n"), std::string::npos);
  EXPECT_NE(o.out.find("planned-cells: 78\n"), std::string::npos) << o.out;
  EXPECT_FALSE(std::filesystem::exists(where));
  const Outcome c = run("compare --dry-run --seed 4");
  EXPECT_NE(c.out.find("planned-cells: 3\n"), std::string::npos) << c.out;
  EXPECT_NE(c.out.find("count=2100"), std::string::npos) << c.out;
}

TEST_F(Cli, DigestMatchesTheConfigAndFlags) {
  const Outcome a = run("sweep --dry-run " + cfg());
  const Outcome b = run("sweep --dry-run " + cfg() + " --epochs 2");
  const Outcome c = run("sweep --dry-run " + cfg() + " --epochs 3");
  EXPECT_EQ(a.out, b.out);
  EXPECT_NE(a.out.substr(0, 80), c.out.substr(0, 80));
}

TEST_F(Cli, TrainWritesModelAndIsReproducible) {
  const std::string where = out("train");
  const Outcome a = run("train " + cfg() + " --seed 1 --out-dir " + where);
  ASSERT_EQ(a.status, 0) << a.out;
  EXPECT_EQ(a.out.rfind("config-digest: ", 0), 0u);
  EXPECT_TRUE(std::filesystem::exists(where + "/model_seed1.mlsb"));
  const Outcome b = run("train " + cfg() + " --seed 1 --out-dir " + where);
  EXPECT_EQ(without_time(a.out), without_time(b.out));

  // The saved model can be attacked.
  const Outcome atk = run("attack " + cfg() + " --model " + where +
                          "/model_seed1.mlsb --samples 5 --epsilon 0.3 --mode sign --out-dir " + where);
  ASSERT_EQ(atk.status, 0) << atk.out;
  EXPECT_NE(atk.out.find("method: fgsm"), std::string::npos);
  EXPECT_TRUE(std::filesystem::exists(where + "/attack_fgsm.csv"));

  const Outcome mn = run("attack " + cfg() + " --model " + where +
                         "/model_seed1.mlsb --samples 2 --method min-norm --bisection-steps 2"
                         " --lbfgs-iterations 30 --out-dir " + where);
  ASSERT_EQ(mn.status, 0) << mn.out;
  EXPECT_NE(mn.out.find("success: 2/2"), std::string::npos) << mn.out;
}

TEST_F(Cli, PoisonWritesIdxPair) {
  const std::string where = out("poison");
  const Outcome o = run("poison " + cfg() + " --mode append --out-dir " + where);
  ASSERT_EQ(o.status, 0) << o.out;
  EXPECT_NE(o.out.find("size: 400 -> 410"), std::string::npos) << o.out;
  const Dataset d = load_idx(where + "/poisoned-images-idx3-ubyte",
                             where + "/poisoned-labels-idx1-ubyte");
  EXPECT_EQ(d.size(), 410u);
  for (std::size_t i = 400; i < 410; ++i) EXPECT_EQ(d.labels()[i], 8);
}

TEST_F(Cli, SweepThenReport) {
  const std::string where = out("sweep");
  const Outcome o = run("sweep " + cfg() +
                        " --epochs 1 --seeds 1 --sweep-fractions 0.05 --sweep-gaussian \"\""
                        " --sweep-salt-pepper 0.1 --out-dir " + where);
  ASSERT_EQ(o.status, 0) << o.out;
  EXPECT_TRUE(std::filesystem::exists(where + "/rows.csv"));
  EXPECT_TRUE(std::filesystem::exists(where + "/report.json"));
  EXPECT_TRUE(std::filesystem::exists(where + "/series_salt-pepper_0.1.csv"));
  const Outcome r = run("report --input " + where);
  ASSERT_EQ(r.status, 0) << r.out;
  EXPECT_NE(r.out.find("rows: 2\n"), std::string::npos) << r.out;
}

TEST_F(Cli, DryRunOnlyForPlanningCommands) {
  const Outcome o = run("train --dry-run");
  EXPECT_NE(o.status, 0);
  EXPECT_NE(o.out.find("error[ConfigError]"), std::string::npos);
}

}  // namespace
}  // namespace mlsb
