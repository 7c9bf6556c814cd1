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

#include <fstream>
#include <sstream>

#include <json.hpp>

#include "mlsb/config.hpp"
#include "mlsb/errors.hpp"
#include "mlsb/harness.hpp"
#include "test_util.hpp"

namespace mlsb {
namespace {

using testing::bar_digits;
using testing::scratch_dir;

// --- config --------------------------------------------------------------------

TEST(Config, ParsesKeyValueLines) {
  const ConfigMap m = ConfigMap::parse(
      "# comment\n\n epochs = 3   # trailing\nlr=0.5\r\nseeds = 1, 2 ,3\nout-dir =\n");
  EXPECT_EQ(m.get_int("epochs"), 3);
  EXPECT_EQ(m.get_double("lr"), 0.5);
  EXPECT_EQ(m.get_uint_list("seeds"), (std::vector<std::uint64_t>{1, 2, 3}));
  EXPECT_EQ(m.get("out-dir"), "");
  EXPECT_EQ(m.entries().size(), 4u);
}

TEST(Config, SyntaxErrors) {
  EXPECT_THROW(ConfigMap::parse("epochs 3\n"), ConfigError);
  EXPECT_THROW(ConfigMap::parse("= 3\n"), ConfigError);
  EXPECT_THROW(ConfigMap::parse("a = 1\na = 2\n"), ConfigError);
  EXPECT_THROW(ConfigMap::load("/nonexistent/run.cfg"), IoError);
}

TEST(Config, TypedAccessorsNameTheKey) {
  const ConfigMap m = ConfigMap::parse("epochs = ten\nlr = 1e-2x\nseeds = 1,b\nn = -3\n");
  try {
    m.get_int("epochs");
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("'epochs'"), std::string::npos);
  }
  EXPECT_THROW(m.get_double("lr"), ConfigError);
  EXPECT_THROW(m.get_uint_list("seeds"), ConfigError);
  EXPECT_THROW(m.get_uint("n"), ConfigError);
  EXPECT_THROW(m.get("missing"), ConfigError);
}

TEST(Config, ResolveRejectsUnknownKeys) {
  EXPECT_THROW(resolve_config(ConfigMap::parse("epoch = 3\n")), ConfigError);
  const ConfigMap r = resolve_config(ConfigMap::parse("epochs = 3\n"));
  EXPECT_EQ(r.get("epochs"), "3");
  EXPECT_EQ(r.get("lr"), "0.01");
  EXPECT_EQ(r.entries().size(), config_keys().size());
}

TEST(Config, DigestIsHashOfCanonicalText) {
  const ConfigMap a = resolve_config(ConfigMap::parse("lr = 0.02\nepochs = 3\n"));
  const ConfigMap b = resolve_config(ConfigMap::parse("epochs = 3\n\nlr = 0.02 # same\n"));
  EXPECT_EQ(a.canonical_text(), b.canonical_text());
  EXPECT_EQ(a.digest(), b.digest());
  EXPECT_EQ(a.digest(), sha256(a.canonical_text()));
  EXPECT_NE(a.digest(), default_config().digest());
  EXPECT_EQ(ConfigMap::parse(a.canonical_text()).canonical_text(), a.canonical_text());
}

TEST(ExperimentConfig, DefaultsMatchDocumentation) {
  const ExperimentConfig c = ExperimentConfig::defaults();
  EXPECT_EQ(c.train.epochs, 10u);
  EXPECT_EQ(c.train.learning_rate, 0.01);
  EXPECT_EQ(c.train.momentum, 0.9);
  EXPECT_EQ(c.train.batch_size, 64u);
  EXPECT_EQ(c.seeds, (std::vector<std::uint64_t>{1, 2, 3}));
  EXPECT_EQ(c.poison.count, std::optional<std::size_t>(2100));
  EXPECT_EQ(c.poison.source_class, 0);
  EXPECT_EQ(c.poison.target_class, 8);
  EXPECT_EQ(c.poison.noise.level, 0.10);
  EXPECT_EQ(c.sweep_fractions, (std::vector<double>{0.01, 0.05, 0.10, 0.20, 0.40}));
  EXPECT_EQ(c.fgsm.epsilon, 0.007);
  EXPECT_EQ(c.workers, 1u);
}

TEST(ExperimentConfig, InvalidValuesNameTheKey) {
  const std::vector<std::pair<std::string, std::string>> bad = {
      {"seeds", ""},          {"epochs", "0"},         {"momentum", "1"},
      {"lr", "-1"},           {"mode", "overwrite"},   {"source-class", "12"},
      {"target-class", "x"},  {"noise", "speckle"},    {"intensity", "2"},
      {"sweep-fractions", "0.1,1.5"}, {"method", "pgd"}, {"fgsm-mode", "cube"},
      {"clamp", "yes"},       {"target", "seven"},     {"c-lo", "0"},
      {"workers", "0"},       {"batch-size", "-4"}};
  for (const auto& [key, value] : bad) {
    ConfigMap o;
    o.set(key, value);
    try {
      ExperimentConfig::from(resolve_config(o));
      ADD_FAILURE() << key << " = " << value << " was accepted";
    } catch (const ConfigError& e) {
      EXPECT_NE(std::string(e.what()).find(key), std::string::npos) << e.what();
    }
  }
}

// --- planning ------------------------------------------------------------------

TEST(Plan, DefaultSweepHas78Cells) {
  const ExperimentConfig c = ExperimentConfig::defaults();
  const auto cells = plan_sweep(c);
  EXPECT_EQ(cells.size(), (5u * (3 + 2) + 1) * 3);
  std::set<std::string> ids;
  std::size_t clean = 0;
  for (const auto& cell : cells) {
    ids.insert(cell.run_id);
    clean += !cell.poison;
    if (cell.poison) {
      EXPECT_EQ(cell.poison->seed, cell.seed);
      EXPECT_EQ(cell.poison->mode, PoisonMode::kReplace);
    }
  }
  EXPECT_EQ(ids.size(), cells.size());
  EXPECT_EQ(clean, 3u);
  EXPECT_EQ(cells[1].poison->fraction, 0.01);
  EXPECT_EQ(cells[cells.size() - 1].poison->fraction, 0.40);
}

TEST(Plan, ComparisonTriples) {
  const ExperimentConfig c = ExperimentConfig::defaults();
  const auto cells = plan_comparison(c);
  ASSERT_EQ(cells.size(), 9u);
  for (std::size_t i = 0; i < 9; i += 3) {
    EXPECT_FALSE(cells[i].poison);
    EXPECT_EQ(cells[i + 1].poison->mode, PoisonMode::kReplace);
    EXPECT_EQ(cells[i + 2].poison->mode, PoisonMode::kAppend);
    EXPECT_EQ(cells[i + 1].seed, cells[i].seed);
    EXPECT_EQ(cells[i + 1].poison->victim_count(60000), 2100u);
    EXPECT_EQ(cells[i + 2].poison->noise.seed, cells[i + 1].poison->noise.seed);
  }
}

TEST(Plan, EmptyAxesRejected) {
  ConfigMap o;
  o.set("sweep-fractions", "");
  EXPECT_THROW(plan_sweep(ExperimentConfig::from(resolve_config(o))), ConfigError);
  o = ConfigMap();
  o.set("sweep-salt-pepper", "");
  o.set("sweep-gaussian", "");
  EXPECT_THROW(plan_sweep(ExperimentConfig::from(resolve_config(o))), ConfigError);
}

// --- training and evaluation -------------------------------------------------

class SmallRun : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    dir_ = new std::filesystem::path(scratch_dir("harness"));
    write_idx(bar_digits(600, 1), *dir_ / "train-img", *dir_ / "train-lbl");
    write_idx(bar_digits(200, 2), *dir_ / "test-img", *dir_ / "test-lbl");
  }
  static void TearDownTestSuite() {
    std::filesystem::remove_all(*dir_);
    delete dir_;
  }

  static ExperimentConfig config(const std::string& extra = "") {
    const std::string text = "train-images = " + (*dir_ / "train-img").string() +
                             "\ntrain-labels = " + (*dir_ / "train-lbl").string() +
                             "\ntest-images = " + (*dir_ / "test-img").string() +
                             "\ntest-labels = " + (*dir_ / "test-lbl").string() +
                             "\nepochs = 1\nbatch-size = 32\nseeds = 1,2\n"
                             "count = 20\nsweep-fractions = 0.05,0.2\n"
                             "sweep-salt-pepper = 0.1\nsweep-gaussian = 0.3\n";
    ConfigMap m = ConfigMap::parse(text);
    const ConfigMap overrides = ConfigMap::parse(extra);
    for (const auto& [k, v] : overrides.entries()) m.set(k, v);
    return ExperimentConfig::from(resolve_config(m));
  }

  static std::filesystem::path* dir_;
};

std::filesystem::path* SmallRun::dir_ = nullptr;

TEST_F(SmallRun, ConfusionMatrixIsConsistent) {
  const ExperimentConfig c = config();
  const DataBundle d = load_data(c);
  const RunRecord r = train_and_evaluate(c, d, {"x", 1, std::nullopt});
  ASSERT_TRUE(r.ok()) << r.status;
  ASSERT_EQ(r.confusion.size(), 100u);
  std::size_t trace = 0, total = 0;
  for (int t = 0; t < 10; ++t) {
    std::size_t row = 0;
    for (int p = 0; p < 10; ++p) row += r.confusion[t * 10 + p];
    EXPECT_EQ(row, d.test.count_label(t));
    trace += r.confusion[t * 10 + t];
    total += row;
  }
  EXPECT_EQ(r.clean_acc, double(trace) / double(total));
  EXPECT_EQ(r.top1_err, 1.0 - r.clean_acc);
  EXPECT_GT(r.clean_acc, 0.5);
  EXPECT_EQ(r.config_digest, c.digest_hex());
}

TEST_F(SmallRun, SameCellTwiceIsBitwiseIdentical) {
  const ExperimentConfig c = config();
  const DataBundle d = load_data(c);
  const auto cells = plan_comparison(c);
  const RunRecord a = train_and_evaluate(c, d, cells[1]);
  const RunRecord b = train_and_evaluate(c, d, cells[1]);
  ASSERT_TRUE(a.ok()) << a.status;
  EXPECT_TRUE(a.same_metrics(b));
  EXPECT_EQ(a.poison_count, 20u);
  ASSERT_TRUE(a.trigger_success.has_value());
  // A different seed gives a different model.
  const RunRecord other = train_and_evaluate(c, d, cells[4]);
  EXPECT_FALSE(a.same_metrics(other));
}

TEST_F(SmallRun, WorkerCountDoesNotChangeResults) {
  const ExperimentConfig c1 = config();
  const ExperimentConfig c2 = config("workers = 3\n");
  const DataBundle d = load_data(c1);
  const auto cells = plan_comparison(c1);
  std::vector<std::string> order;
  const auto serial = run_cells(c1, d, cells);
  const auto parallel = run_cells(c2, d, cells, [&](const RunRecord& r) { order.push_back(r.run_id); });
  ASSERT_EQ(serial.size(), parallel.size());
  for (std::size_t i = 0; i < serial.size(); ++i) {
    EXPECT_TRUE(serial[i].same_metrics(parallel[i])) << serial[i].run_id;
    EXPECT_EQ(order[i], cells[i].run_id);
  }
}

TEST_F(SmallRun, ZeroFractionControlEqualsClean) {
  const ExperimentConfig c = config("count = 0\nfraction = 0\n");
  const DataBundle d = load_data(c);
  const ComparisonSummary s = run_attack_comparison(c, d);
  ASSERT_EQ(s.rows.size(), 6u);
  for (std::size_t i = 0; i < 6; i += 3) {
    for (std::size_t k = 1; k <= 2; ++k) {
      EXPECT_EQ(s.rows[i + k].clean_acc, s.rows[i].clean_acc);
      EXPECT_EQ(s.rows[i + k].confusion, s.rows[i].confusion);
      EXPECT_EQ(*s.rows[i + k].clean_acc_drop, 0.0);
    }
  }
  EXPECT_EQ(*s.median_drop_replace, 0.0);
  EXPECT_EQ(*s.median_drop_append, 0.0);
  EXPECT_EQ(s.reference_drop_replace, 0.018);
  EXPECT_EQ(s.reference_drop_append, 0.013);
}

TEST_F(SmallRun, OverfitsASmallBatch) {
  const Dataset train = bar_digits(64, 9);
  const Model model(ModelConfig::lenet());
  TrainSettings s;
  s.epochs = 40;
  s.batch_size = 16;
  const Parameters p = fit(model, train, s, 3);
  const Evaluation ev = evaluate(FrozenModel(model, p), train);
  EXPECT_EQ(ev.accuracy, 1.0);
}

TEST_F(SmallRun, DivergenceIsRecordedInRow) {
  const ExperimentConfig c = config("lr = 1e300\n");
  const DataBundle d = load_data(c);
  const RunRecord r = train_and_evaluate(c, d, {"boom", 1, std::nullopt});
  EXPECT_FALSE(r.ok());
  EXPECT_EQ(r.status.rfind("diverged", 0), 0u) << r.status;
  EXPECT_TRUE(std::isnan(r.clean_acc));
}

TEST_F(SmallRun, ErrorsLandInStatus) {
  const ExperimentConfig c = config();
  const DataBundle d = load_data(c);
  PoisonSpec too_many = c.poison;
  too_many.count = 100000;
  const RunRecord r = train_and_evaluate(c, d, {"bad", 1, too_many});
  EXPECT_EQ(r.status.rfind("error[ValueError]", 0), 0u) << r.status;
}

TEST_F(SmallRun, InterruptedSweepKeepsCompletedRows) {
  const ExperimentConfig c = config();
  const DataBundle d = load_data(c);
  const auto dir = scratch_dir("interrupt");
  RowWriter writer(dir / "rows.csv");
  struct Stop {};
  const auto cells = plan_sweep(c);
  ASSERT_EQ(cells.size(), (2u * 2 + 1) * 2);
  EXPECT_THROW(run_cells(c, d, cells,
                         [&](const RunRecord& r) {
                           writer.append(r);
                           if (writer.rows_written() == 3) throw Stop{};
                         }),
               Stop);
  std::ifstream in(dir / "rows.csv", std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  const auto table = parse_csv(ss.str());
  ASSERT_EQ(table.size(), 4u);
  EXPECT_EQ(table[0], csv_columns());
  for (std::size_t i = 1; i < 4; ++i) {
    EXPECT_EQ(table[i].size(), csv_columns().size());
    EXPECT_EQ(table[i][0], cells[i - 1].run_id);
  }
  std::filesystem::remove_all(dir);
}

TEST_F(SmallRun, SweepReportFiles) {
  const ExperimentConfig c = config();
  const DataBundle d = load_data(c);
  const SweepReport rep = run_sweep(c, d);
  ASSERT_EQ(rep.rows.size(), (2u * 2 + 1) * 2);
  for (const auto& r : rep.rows) {
    ASSERT_TRUE(r.ok()) << r.status;
    ASSERT_TRUE(r.clean_acc_drop.has_value());
  }
  const auto dir = scratch_dir("report");
  const auto files = emit_report(c, rep.rows, dir);
  EXPECT_EQ(files.size(), 2u + 2);

  std::ifstream csv_in(dir / "rows.csv", std::ios::binary);
  std::stringstream csv;
  csv << csv_in.rdbuf();
  const auto table = parse_csv(csv.str());
  ASSERT_EQ(table.size(), rep.rows.size() + 1);
  for (std::size_t i = 0; i < rep.rows.size(); ++i) {
    EXPECT_EQ(table[i + 1], csv_fields(rep.rows[i]));
    EXPECT_EQ(std::stod(table[i + 1][6]), rep.rows[i].clean_acc);
  }

  std::ifstream json_in(dir / "report.json");
  const auto j = nlohmann::json::parse(json_in);
  const std::string text = j["config_text"];
  EXPECT_EQ(j["config_digest"], to_hex(sha256(text)));
  EXPECT_EQ(j["config_digest"], c.digest_hex());
  EXPECT_EQ(j["rows"].size(), rep.rows.size());

  const auto series = plot_series(c, rep.rows);
  ASSERT_EQ(series.size(), 2u);
  for (const auto& s : series) {
    EXPECT_TRUE(std::filesystem::exists(dir / s.file_name()));
    EXPECT_EQ(s.points.size(), 2u);
  }
  std::filesystem::remove_all(dir);
}

// --- csv -------------------------------------------------------------------------

TEST(Csv, QuotingRoundTrip) {
  const std::vector<std::string> fields{"plain", "a,b", "say \"hi\"", "two\nlines", ""};
  const std::string line = csv_line(fields);
  EXPECT_EQ(line, "plain,\"a,b\",\"say \"\"hi\"\"\",\"two\nlines\",\r\n");
  const auto back = parse_csv(line + line);
  ASSERT_EQ(back.size(), 2u);
  EXPECT_EQ(back[0], fields);
  EXPECT_EQ(back[1], fields);
  EXPECT_THROW(parse_csv("\"open"), FormatError);
}

TEST(Median, OddEvenEmpty) {
  EXPECT_EQ(*median({3, 1, 2}), 2.0);
  EXPECT_EQ(*median({4, 1, 2, 3}), 2.5);
  EXPECT_FALSE(median({}).has_value());
}

TEST(Drops, UseSameSeedBaseline) {
  std::vector<RunRecord> rows(4);
  rows[0].seed = 1, rows[0].clean_acc = 0.99;
  rows[1].seed = 2, rows[1].clean_acc = 0.95;
  rows[2].seed = 1, rows[2].mode = "replace", rows[2].clean_acc = 0.97;
  rows[3].seed = 2, rows[3].mode = "replace", rows[3].clean_acc = 0.94;
  attach_drops(rows);
  EXPECT_NEAR(*rows[2].clean_acc_drop, 0.02, 1e-15);
  EXPECT_NEAR(*rows[3].clean_acc_drop, 0.01, 1e-15);
}

TEST(FormatDouble, ShortestRoundTrip) {
  for (double v : {0.1, 0.9873, 1.0 / 3.0, 1e-17, 123456.789, 0.0}) {
    EXPECT_EQ(std::stod(format_double(v)), v);
  }
  EXPECT_EQ(format_double(0.1), "0.1");
}

}  // namespace
}  // namespace mlsb
