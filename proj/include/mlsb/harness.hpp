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

#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "mlsb/adversarial.hpp"
#include "mlsb/config.hpp"
#include "mlsb/dataset.hpp"
#include "mlsb/network.hpp"
#include "mlsb/poisoning.hpp"

namespace mlsb {

struct TrainSettings {
  std::size_t epochs = 10;
  double learning_rate = 0.01;
  double momentum = 0.9;
  std::size_t batch_size = 64;
};

struct ExperimentConfig {
  ConfigMap resolved;  // every key, defaults filled in

  std::filesystem::path train_images, train_labels, test_images, test_labels;
  std::size_t train_limit = 0;
  std::size_t test_limit = 0;
  ModelConfig model = ModelConfig::lenet();
  TrainSettings train;
  std::vector<std::uint64_t> seeds;
  std::size_t workers = 1;
  std::filesystem::path out_dir;

  // Poison used by `poison` and `compare`; seeds are filled per run.
  PoisonSpec poison;

  PoisonMode sweep_mode = PoisonMode::kReplace;
  std::vector<double> sweep_fractions;
  std::vector<double> sweep_salt_pepper;
  std::vector<double> sweep_gaussian;
  int sweep_source_class = kAnyClass;
  int sweep_target_class = kRandomClass;

  std::filesystem::path model_path;
  std::string attack_method;
  FgsmSpec fgsm;
  AttackTarget attack_target;
  MinNormSpec min_norm;
  std::size_t attack_samples = 100;

  // Builds and validates from a resolved map; failures name the key.
  static ExperimentConfig from(const ConfigMap& resolved);
  static ExperimentConfig defaults();

  std::string digest_hex() const;
};

struct DataBundle {
  Dataset train;
  Dataset test;
};

DataBundle load_data(const ExperimentConfig& config);

using LogFn = std::function<void(const std::string&)>;

// Mini-batch SGD from the seeded initialization; batch order for epoch e
// comes from derive_seed(seed, batches, e).
Parameters fit(const Model& model, const Dataset& train,
               const TrainSettings& settings, std::uint64_t seed,
               const LogFn& log = {});

struct Evaluation {
  double accuracy = 0.0;
  std::size_t num_classes = 0;
  std::vector<std::size_t> confusion;  // row = true label, col = predicted
  std::vector<int> predictions;
};

Evaluation evaluate(const Classifier& classifier, const Dataset& test);

// One job of a sweep or comparison.
struct Cell {
  std::string run_id;
  std::uint64_t seed = 0;
  std::optional<PoisonSpec> poison;
};

// The poison a grid cell applies for a given run seed.
PoisonSpec seeded_poison(PoisonSpec spec, std::uint64_t seed);

struct RunRecord {
  std::string run_id;
  std::string config_digest;
  std::string cell_digest;
  std::uint64_t seed = 0;
  std::string mode = "clean";
  double fraction = 0.0;
  std::size_t poison_count = 0;
  std::string noise_kind;
  double intensity = 0.0;
  double clean_acc = 0.0;
  double top1_err = 0.0;
  std::optional<double> trigger_success;
  std::optional<double> clean_acc_drop;  // vs same-seed baseline
  std::vector<std::size_t> confusion;
  double wall_s = 0.0;
  std::string status = "ok";

  bool ok() const { return status == "ok"; }
  // Everything except wall-clock time.
  bool same_metrics(const RunRecord& other) const;
};

// Hash of everything that determines a cell's metrics.
std::string cell_digest(const ExperimentConfig& config, const Cell& cell);

// Trains on the (optionally poisoned) training split and evaluates on the
// test split. Divergence and other library errors land in `status`.
RunRecord train_and_evaluate(const ExperimentConfig& config,
                             const DataBundle& data, const Cell& cell,
                             const LogFn& log = {},
                             Parameters* trained = nullptr);

// Baseline per seed first, then fractions x (salt-pepper, gaussian).
std::vector<Cell> plan_sweep(const ExperimentConfig& config);
// clean / replace / append per seed, sharing the seed.
std::vector<Cell> plan_comparison(const ExperimentConfig& config);

using RowSink = std::function<void(const RunRecord&)>;

// Runs the cells on up to `workers` threads. `sink` sees every record in
// cell order, as soon as all earlier cells are done.
std::vector<RunRecord> run_cells(const ExperimentConfig& config,
                                 const DataBundle& data,
                                 const std::vector<Cell>& cells,
                                 const RowSink& sink = {},
                                 const LogFn& log = {});

// Sets clean_acc_drop from the same-seed clean row.
void attach_drops(std::vector<RunRecord>& rows);

struct SweepReport {
  std::vector<RunRecord> rows;
};

SweepReport run_sweep(const ExperimentConfig& config, const DataBundle& data,
                      const RowSink& sink = {}, const LogFn& log = {});

struct ComparisonSummary {
  std::vector<RunRecord> rows;
  std::optional<double> median_drop_replace;
  std::optional<double> median_drop_append;
  std::optional<double> median_trigger_replace;
  std::optional<double> median_trigger_append;
  // Previously published drops, carried as annotations.
  double reference_drop_replace = 0.018;
  double reference_drop_append = 0.013;
};

ComparisonSummary summarize_comparison(std::vector<RunRecord> rows);
ComparisonSummary run_attack_comparison(const ExperimentConfig& config,
                                        const DataBundle& data,
                                        const RowSink& sink = {},
                                        const LogFn& log = {});

std::optional<double> median(std::vector<double> values);

// `count` correctly classified test images, in a seeded random order.
// Throws ValueError when fewer exist.
std::vector<std::size_t> attack_sample_indices(const Classifier& classifier,
                                               const Dataset& test,
                                               std::size_t count,
                                               std::uint64_t seed);

struct AttackRow {
  std::size_t index = 0;
  AdversarialResult result;
};

// Runs the configured attack on each listed test image; rows come back in
// the order of `indices` whatever the worker count.
std::vector<AttackRow> run_attacks(const ExperimentConfig& config,
                                   const Classifier& classifier,
                                   const Dataset& test,
                                   std::span<const std::size_t> indices);

// --- reports ---

std::vector<std::string> csv_columns();
std::string csv_escape(const std::string& field);
std::string csv_line(const std::vector<std::string>& fields);
std::vector<std::string> csv_fields(const RunRecord& row);
// RFC-4180 reader; quoted fields may hold commas, quotes and newlines.
std::vector<std::vector<std::string>> parse_csv(const std::string& text);

// Appends rows to a CSV file, header first, flushing after every row.
class RowWriter {
 public:
  explicit RowWriter(const std::filesystem::path& path);
  void append(const RunRecord& row);
  std::size_t rows_written() const { return rows_; }

 private:
  std::filesystem::path path_;
  std::size_t rows_ = 0;
};

struct SeriesPoint {
  double fraction;
  double median_top1_err;
};

struct Series {
  std::string noise_kind;
  double intensity;
  std::vector<SeriesPoint> points;
  std::string file_name() const;
};

std::vector<Series> plot_series(const ExperimentConfig& config,
                                const std::vector<RunRecord>& rows);

// Writes rows.csv, report.json and one series file per noise setting.
// Returns the paths written.
std::vector<std::filesystem::path> emit_report(
    const ExperimentConfig& config, const std::vector<RunRecord>& rows,
    const std::filesystem::path& directory);

void emit_comparison(const ExperimentConfig& config,
                     const ComparisonSummary& summary,
                     const std::filesystem::path& directory);

std::vector<std::string> attack_columns();
std::vector<std::string> attack_fields(const AttackRow& row);
void emit_attack_rows(const std::vector<AttackRow>& rows,
                      const std::filesystem::path& path);

std::string format_double(double v);

}  // namespace mlsb
