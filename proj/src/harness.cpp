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

#include "mlsb/harness.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <condition_variable>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <map>
#include <mutex>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "mlsb/errors.hpp"
#include "mlsb/rng.hpp"

namespace mlsb {
namespace {

int parse_class(const ConfigMap& map, const std::string& key,
                const char* wildcard) {
  const std::string& text = map.get(key);
  if (text == wildcard) return -1;
  const std::int64_t v = map.get_int(key);
  if (v < 0 || v >= kNumClasses) {
    throw ConfigError("key '" + key + "': expected a class in [0," +
                      std::to_string(kNumClasses - 1) + "] or '" + wildcard +
                      "', got '" + text + "'");
  }
  return static_cast<int>(v);
}

template <typename F>
auto keyed(const std::string& key, F&& f) {
  try {
    return f();
  } catch (const ConfigError&) {
    throw;
  } catch (const Error& e) {
    throw ConfigError("key '" + key + "': " + e.what());
  }
}

std::size_t positive(const ConfigMap& map, const std::string& key) {
  const std::uint64_t v = map.get_uint(key);
  if (v == 0) throw ConfigError("key '" + key + "': must be positive");
  return static_cast<std::size_t>(v);
}

std::string hex_of(const Digest& d) { return to_hex(d); }

}  // namespace

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  // Prefer the shortest form that still round-trips.
  for (int prec = 1; prec < 17; ++prec) {
    char shorter[40];
    std::snprintf(shorter, sizeof shorter, "%.*g", prec, v);
    if (std::strtod(shorter, nullptr) == v) return shorter;
  }
  return buf;
}

// ---------------------------------------------------------------------------

ExperimentConfig ExperimentConfig::from(const ConfigMap& resolved) {
  ExperimentConfig c;
  c.resolved = resolved;
  const ConfigMap& m = resolved;

  c.train_images = m.get("train-images");
  c.train_labels = m.get("train-labels");
  c.test_images = m.get("test-images");
  c.test_labels = m.get("test-labels");
  c.train_limit = m.get_uint("train-limit");
  c.test_limit = m.get_uint("test-limit");

  c.train.epochs = positive(m, "epochs");
  c.train.learning_rate = m.get_double("lr");
  if (!(c.train.learning_rate > 0.0) || !std::isfinite(c.train.learning_rate)) {
    throw ConfigError("key 'lr': must be a positive finite number");
  }
  c.train.momentum = m.get_double("momentum");
  if (!(c.train.momentum >= 0.0 && c.train.momentum < 1.0)) {
    throw ConfigError("key 'momentum': must lie in [0,1)");
  }
  c.train.batch_size = positive(m, "batch-size");
  c.seeds = m.get_uint_list("seeds");
  if (c.seeds.empty()) throw ConfigError("key 'seeds': seed list is empty");
  c.workers = positive(m, "workers");
  c.out_dir = m.get("out-dir");

  c.poison.mode = keyed("mode", [&] { return parse_poison_mode(m.get("mode")); });
  c.poison.fraction = m.get_double("fraction");
  if (const std::uint64_t n = m.get_uint("count"); n > 0) c.poison.count = n;
  c.poison.source_class = parse_class(m, "source-class", "any");
  c.poison.target_class = parse_class(m, "target-class", "random");
  c.poison.noise.kind =
      keyed("noise", [&] { return parse_noise_kind(m.get("noise")); });
  c.poison.noise.level = m.get_double("intensity");
  keyed("intensity", [&] { c.poison.noise.validate(); return 0; });
  keyed("fraction", [&] { c.poison.validate(); return 0; });

  c.sweep_mode =
      keyed("sweep-mode", [&] { return parse_poison_mode(m.get("sweep-mode")); });
  c.sweep_fractions = m.get_double_list("sweep-fractions");
  c.sweep_salt_pepper = m.get_double_list("sweep-salt-pepper");
  c.sweep_gaussian = m.get_double_list("sweep-gaussian");
  c.sweep_source_class = parse_class(m, "sweep-source-class", "any");
  c.sweep_target_class = parse_class(m, "sweep-target-class", "random");
  for (double f : c.sweep_fractions) {
    if (!(f >= 0.0 && f <= 1.0)) {
      throw ConfigError("key 'sweep-fractions': " + format_double(f) +
                        " is outside [0,1]");
    }
  }
  for (double p : c.sweep_salt_pepper) {
    if (!(p >= 0.0 && p <= 1.0)) {
      throw ConfigError("key 'sweep-salt-pepper': " + format_double(p) +
                        " is outside [0,1]");
    }
  }
  for (double s : c.sweep_gaussian) {
    if (!(s >= 0.0 && s <= 1.0)) {
      throw ConfigError("key 'sweep-gaussian': " + format_double(s) +
                        " is outside [0,1]");
    }
  }

  c.model_path = m.get("model");
  c.attack_method = m.get("method");
  if (c.attack_method != "fgsm" && c.attack_method != "min-norm") {
    throw ConfigError("key 'method': expected fgsm or min-norm, got '" +
                      c.attack_method + "'");
  }
  c.fgsm.epsilon = m.get_double("epsilon");
  c.fgsm.mode = keyed("fgsm-mode", [&] { return parse_fgsm_mode(m.get("fgsm-mode")); });
  const std::string& clamp = m.get("clamp");
  if (clamp != "true" && clamp != "false") {
    throw ConfigError("key 'clamp': expected true or false, got '" + clamp + "'");
  }
  c.fgsm.clamp = clamp == "true";
  keyed("epsilon", [&] { c.fgsm.validate(); return 0; });
  c.attack_target = keyed("target", [&] { return AttackTarget::parse(m.get("target")); });
  c.attack_samples = positive(m, "samples");
  c.min_norm.c_lo = m.get_double("c-lo");
  c.min_norm.c_hi = m.get_double("c-hi");
  c.min_norm.bisection_steps = m.get_uint("bisection-steps");
  c.min_norm.max_iterations = positive(m, "lbfgs-iterations");
  c.min_norm.history = positive(m, "lbfgs-history");
  c.min_norm.gradient_tolerance = m.get_double("lbfgs-tolerance");
  keyed("c-lo", [&] { c.min_norm.validate(); return 0; });
  return c;
}

ExperimentConfig ExperimentConfig::defaults() {
  return from(default_config());
}

std::string ExperimentConfig::digest_hex() const {
  return hex_of(resolved.digest());
}

DataBundle load_data(const ExperimentConfig& config) {
  DataBundle d;
  d.train = load_idx(config.train_images, config.train_labels);
  d.test = load_idx(config.test_images, config.test_labels);
  if (config.train_limit > 0) d.train = d.train.head(config.train_limit);
  if (config.test_limit > 0) d.test = d.test.head(config.test_limit);
  return d;
}

// ---------------------------------------------------------------------------

Parameters fit(const Model& model, const Dataset& train,
               const TrainSettings& settings, std::uint64_t seed,
               const LogFn& log) {
  if (train.empty()) throw ValueError("cannot train on an empty dataset");
  Parameters params = model.initialize(seed);
  OptimizerState opt(settings.learning_rate, settings.momentum);
  const std::size_t bs = std::min(settings.batch_size, train.size());
  for (std::size_t epoch = 0; epoch < settings.epochs; ++epoch) {
    const BatchPlan plan(train.size(),
                         derive_seed(seed, stream::kBatches, epoch), bs);
    double total = 0.0;
    for (std::size_t b = 0; b < plan.batch_count(); ++b) {
      const auto idx = plan.batch(b);
      const std::vector<int> labels = train.batch_labels(idx);
      StepResult step = train_step(model, params, opt, train.batch_images(idx), labels);
      params = std::move(step.params);
      total += step.loss * static_cast<double>(idx.size());
    }
    if (log) {
      log("epoch " + std::to_string(epoch + 1) + "/" +
          std::to_string(settings.epochs) + " loss " +
          format_double(total / static_cast<double>(train.size())));
    }
  }
  return params;
}

Evaluation evaluate(const Classifier& classifier, const Dataset& test) {
  Evaluation ev;
  ev.num_classes = classifier.num_classes();
  ev.confusion.assign(ev.num_classes * ev.num_classes, 0);
  if (test.empty()) throw ValueError("cannot evaluate on an empty dataset");
  ev.predictions = predict(classifier, test.images()).labels;
  std::size_t correct = 0;
  for (std::size_t i = 0; i < test.size(); ++i) {
    const auto t = static_cast<std::size_t>(test.labels()[i]);
    const auto p = static_cast<std::size_t>(ev.predictions[i]);
    ++ev.confusion[t * ev.num_classes + p];
    correct += t == p;
  }
  ev.accuracy = static_cast<double>(correct) / static_cast<double>(test.size());
  return ev;
}

// ---------------------------------------------------------------------------

PoisonSpec seeded_poison(PoisonSpec spec, std::uint64_t seed) {
  spec.seed = seed;
  spec.noise.seed = derive_seed(seed, stream::kNoise);
  return spec;
}

bool RunRecord::same_metrics(const RunRecord& o) const {
  auto same = [](double a, double b) {
    return std::memcmp(&a, &b, sizeof a) == 0;
  };
  auto same_opt = [&](const std::optional<double>& a, const std::optional<double>& b) {
    return a.has_value() == b.has_value() && (!a || same(*a, *b));
  };
  return run_id == o.run_id && cell_digest == o.cell_digest && seed == o.seed &&
         mode == o.mode && same(fraction, o.fraction) &&
         poison_count == o.poison_count && noise_kind == o.noise_kind &&
         same(intensity, o.intensity) && same(clean_acc, o.clean_acc) &&
         same(top1_err, o.top1_err) &&
         same_opt(trigger_success, o.trigger_success) &&
         confusion == o.confusion && status == o.status;
}

std::string cell_digest(const ExperimentConfig& config, const Cell& cell) {
  // Only the keys that influence training and evaluation.
  static const char* const kKeys[] = {
      "train-images", "train-labels", "test-images", "test-labels",
      "train-limit",  "test-limit",   "epochs",      "lr",
      "momentum",     "batch-size"};
  std::string text;
  for (const char* k : kKeys) text += std::string(k) + " = " + config.resolved.get(k) + "\n";
  text += config.model.canonical_text();
  text += "seed = " + std::to_string(cell.seed) + "\n";
  text += "poison = " + (cell.poison ? cell.poison->describe() : std::string("none")) + "\n";
  return hex_of(sha256(text));
}

RunRecord train_and_evaluate(const ExperimentConfig& config,
                             const DataBundle& data, const Cell& cell,
                             const LogFn& log, Parameters* trained) {
  const auto start = std::chrono::steady_clock::now();
  RunRecord r;
  r.run_id = cell.run_id;
  r.config_digest = config.digest_hex();
  r.cell_digest = cell_digest(config, cell);
  r.seed = cell.seed;
  if (cell.poison) {
    const PoisonSpec& p = *cell.poison;
    r.mode = poison_mode_name(p.mode);
    r.fraction = p.fraction;
    r.noise_kind = noise_kind_name(p.noise.kind);
    r.intensity = p.noise.level;
  }
  auto fail = [&](const std::string& status) {
    r.status = status;
    r.clean_acc = r.top1_err = std::nan("");
    r.trigger_success.reset();
    r.confusion.clear();
  };
  try {
    Dataset train = data.train;
    if (cell.poison) {
      auto [poisoned, report] = apply_poison(data.train, *cell.poison);
      train = std::move(poisoned);
      r.poison_count = report.victim_count;
    }
    const Model model(config.model);
    Parameters params = fit(model, train, config.train, cell.seed, log);
    const FrozenModel frozen(model, params);
    const Evaluation ev = evaluate(frozen, data.test);
    r.clean_acc = ev.accuracy;
    r.top1_err = 1.0 - ev.accuracy;
    r.confusion = ev.confusion;
    if (cell.poison) {
      const Dataset trigger = build_trigger_set(data.test, *cell.poison);
      const Prediction pred = predict(frozen, trigger.images());
      r.trigger_success = trigger_success_rate(*cell.poison, trigger, pred.labels);
    }
    if (trained) *trained = std::move(params);
  } catch (const TrainingDivergedError& e) {
    fail(std::string("diverged: ") + e.what());
  } catch (const Error& e) {
    fail("error[" + e.kind() + "]: " + e.what());
  }
  r.wall_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return r;
}

std::vector<Cell> plan_sweep(const ExperimentConfig& config) {
  if (config.sweep_fractions.empty()) {
    throw ConfigError("key 'sweep-fractions': grid axis is empty");
  }
  if (config.sweep_salt_pepper.empty() && config.sweep_gaussian.empty()) {
    throw ConfigError("keys 'sweep-salt-pepper'/'sweep-gaussian': no noise settings");
  }
  std::vector<std::pair<NoiseKind, double>> noises;
  for (double p : config.sweep_salt_pepper) noises.emplace_back(NoiseKind::kSaltPepper, p);
  for (double s : config.sweep_gaussian) noises.emplace_back(NoiseKind::kGaussian, s);

  std::vector<Cell> cells;
  for (std::uint64_t seed : config.seeds) {
    cells.push_back({"s" + std::to_string(seed) + "-clean", seed, std::nullopt});
    for (double f : config.sweep_fractions) {
      for (const auto& [kind, level] : noises) {
        PoisonSpec p;
        p.mode = config.sweep_mode;
        p.fraction = f;
        p.source_class = config.sweep_source_class;
        p.target_class = config.sweep_target_class;
        p.noise.kind = kind;
        p.noise.level = level;
        cells.push_back({"s" + std::to_string(seed) + "-" +
                             poison_mode_name(p.mode) + "-f" + format_double(f) +
                             "-" + noise_kind_name(kind) + "-" + format_double(level),
                         seed, seeded_poison(p, seed)});
      }
    }
  }
  return cells;
}

std::vector<Cell> plan_comparison(const ExperimentConfig& config) {
  std::vector<Cell> cells;
  for (std::uint64_t seed : config.seeds) {
    const std::string s = "s" + std::to_string(seed);
    cells.push_back({s + "-clean", seed, std::nullopt});
    for (PoisonMode mode : {PoisonMode::kReplace, PoisonMode::kAppend}) {
      PoisonSpec p = config.poison;
      p.mode = mode;
      cells.push_back({s + "-" + poison_mode_name(mode), seed, seeded_poison(p, seed)});
    }
  }
  return cells;
}

std::vector<RunRecord> run_cells(const ExperimentConfig& config,
                                 const DataBundle& data,
                                 const std::vector<Cell>& cells,
                                 const RowSink& sink, const LogFn& log) {
  std::vector<std::optional<RunRecord>> done(cells.size());
  std::mutex mu;
  std::size_t emitted = 0;
  std::atomic<std::size_t> next{0};

  // Rows go to the sink strictly in cell order.
  auto finish = [&](std::size_t i, RunRecord rec) {
    std::lock_guard<std::mutex> lock(mu);
    done[i] = std::move(rec);
    while (emitted < cells.size() && done[emitted]) {
      if (sink) sink(*done[emitted]);
      ++emitted;
    }
  };
  auto worker = [&] {
    for (std::size_t i = next++; i < cells.size(); i = next++) {
      LogFn cell_log;
      if (log) {
        cell_log = [&, i](const std::string& msg) {
          std::lock_guard<std::mutex> lock(mu);
          log(cells[i].run_id + ": " + msg);
        };
      }
      finish(i, train_and_evaluate(config, data, cells[i], cell_log));
    }
  };

  const std::size_t n = std::min(config.workers, cells.size());
  if (n <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t t = 0; t < n; ++t) pool.emplace_back(worker);
  }
  std::vector<RunRecord> out;
  out.reserve(cells.size());
  for (auto& r : done) out.push_back(std::move(*r));
  return out;
}

void attach_drops(std::vector<RunRecord>& rows) {
  std::map<std::uint64_t, double> baseline;
  for (const auto& r : rows) {
    if (r.mode == "clean" && r.ok()) baseline[r.seed] = r.clean_acc;
  }
  for (auto& r : rows) {
    auto it = baseline.find(r.seed);
    if (it != baseline.end() && r.ok()) r.clean_acc_drop = it->second - r.clean_acc;
  }
}

SweepReport run_sweep(const ExperimentConfig& config, const DataBundle& data,
                      const RowSink& sink, const LogFn& log) {
  SweepReport report;
  report.rows = run_cells(config, data, plan_sweep(config), sink, log);
  attach_drops(report.rows);
  return report;
}

std::optional<double> median(std::vector<double> v) {
  if (v.empty()) return std::nullopt;
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

ComparisonSummary summarize_comparison(std::vector<RunRecord> rows) {
  attach_drops(rows);
  ComparisonSummary s;
  std::vector<double> drop_r, drop_a, trig_r, trig_a;
  for (const auto& r : rows) {
    if (!r.ok() || r.mode == "clean") continue;
    auto& drops = r.mode == "replace" ? drop_r : drop_a;
    auto& trig = r.mode == "replace" ? trig_r : trig_a;
    if (r.clean_acc_drop) drops.push_back(*r.clean_acc_drop);
    if (r.trigger_success) trig.push_back(*r.trigger_success);
  }
  s.median_drop_replace = median(drop_r);
  s.median_drop_append = median(drop_a);
  s.median_trigger_replace = median(trig_r);
  s.median_trigger_append = median(trig_a);
  s.rows = std::move(rows);
  return s;
}

ComparisonSummary run_attack_comparison(const ExperimentConfig& config,
                                        const DataBundle& data,
                                        const RowSink& sink, const LogFn& log) {
  return summarize_comparison(run_cells(config, data, plan_comparison(config), sink, log));
}

std::vector<std::size_t> attack_sample_indices(const Classifier& classifier,
                                               const Dataset& test,
                                               std::size_t count,
                                               std::uint64_t seed) {
  std::vector<std::size_t> order(test.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  Rng rng(derive_seed(seed, stream::kSample));
  for (std::size_t i = order.size(); i > 1; --i) {
    std::swap(order[i - 1], order[rng.below(i)]);
  }
  const std::vector<int> pred = predict(classifier, test.images()).labels;
  std::vector<std::size_t> out;
  for (std::size_t i : order) {
    if (out.size() == count) break;
    if (pred[i] == test.labels()[i]) out.push_back(i);
  }
  if (out.size() < count) {
    throw ValueError("only " + std::to_string(out.size()) +
                     " correctly classified test images, need " +
                     std::to_string(count));
  }
  return out;
}

std::vector<AttackRow> run_attacks(const ExperimentConfig& config,
                                   const Classifier& classifier,
                                   const Dataset& test,
                                   std::span<const std::size_t> indices) {
  std::vector<AttackRow> rows(indices.size());
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex mu;
  auto worker = [&] {
    for (std::size_t k = next++; k < indices.size(); k = next++) {
      try {
        const std::size_t i = indices[k];
        const Tensor x(Shape{1, kImageRows, kImageCols},
                       std::vector<double>(test.image(i).begin(), test.image(i).end()));
        const int label = test.labels()[i];
        rows[k].index = i;
        rows[k].result =
            config.attack_method == "fgsm"
                ? fgsm(classifier, x, label, config.fgsm)
                : minimal_norm_attack(classifier, x, label, config.attack_target,
                                      config.min_norm);
      } catch (...) {
        std::lock_guard<std::mutex> lock(mu);
        if (!failure) failure = std::current_exception();
        next = indices.size();
      }
    }
  };
  const std::size_t n = std::min(config.workers, indices.size());
  if (n <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t t = 0; t < n; ++t) pool.emplace_back(worker);
  }
  if (failure) std::rethrow_exception(failure);
  return rows;
}

// ---------------------------------------------------------------------------

std::vector<std::string> csv_columns() {
  return {"run_id",     "seed",      "mode",     "fraction",
          "noise_kind", "intensity", "clean_acc", "top1_err",
          "trigger_success", "wall_s"};
}

std::string csv_escape(const std::string& field) {
  if (field.find_first_of(",\"\r\n") == std::string::npos) return field;
  std::string out = "\"";
  for (char ch : field) {
    if (ch == '"') out += '"';
    out += ch;
  }
  return out + "\"";
}

std::string csv_line(const std::vector<std::string>& fields) {
  std::string out;
  for (std::size_t i = 0; i < fields.size(); ++i) {
    if (i) out += ',';
    out += csv_escape(fields[i]);
  }
  return out + "\r\n";
}

std::vector<std::string> csv_fields(const RunRecord& r) {
  return {r.run_id,
          std::to_string(r.seed),
          r.mode,
          format_double(r.fraction),
          r.noise_kind,
          r.noise_kind.empty() ? "" : format_double(r.intensity),
          format_double(r.clean_acc),
          format_double(r.top1_err),
          r.trigger_success ? format_double(*r.trigger_success) : "",
          format_double(r.wall_s)};
}

std::vector<std::vector<std::string>> parse_csv(const std::string& text) {
  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> row;
  std::string field;
  bool quoted = false;
  bool any = false;
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char ch = text[i];
    if (quoted) {
      if (ch == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          field += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        field += ch;
      }
      continue;
    }
    switch (ch) {
      case '"':
        quoted = true;
        any = true;
        break;
      case ',':
        row.push_back(std::move(field));
        field.clear();
        any = true;
        break;
      case '\r':
        break;
      case '\n':
        row.push_back(std::move(field));
        field.clear();
        rows.push_back(std::move(row));
        row.clear();
        any = false;
        break;
      default:
        field += ch;
        any = true;
    }
  }
  if (quoted) throw FormatError("unterminated quoted CSV field");
  if (any) {
    row.push_back(std::move(field));
    rows.push_back(std::move(row));
  }
  return rows;
}

RowWriter::RowWriter(const std::filesystem::path& path) : path_(path) {
  std::ofstream out(path_, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path_.string());
  out << csv_line(csv_columns());
  if (!out.flush()) throw IoError("write failed: " + path_.string());
}

void RowWriter::append(const RunRecord& row) {
  std::ofstream out(path_, std::ios::binary | std::ios::app);
  out << csv_line(csv_fields(row));
  if (!out.flush()) throw IoError("write failed: " + path_.string());
  ++rows_;
}

std::string Series::file_name() const {
  return "series_" + noise_kind + "_" + format_double(intensity) + ".csv";
}

std::vector<Series> plot_series(const ExperimentConfig& config,
                                const std::vector<RunRecord>& rows) {
  std::vector<Series> out;
  auto add = [&](const std::string& kind, double level) {
    Series s{kind, level, {}};
    for (double f : config.sweep_fractions) {
      std::vector<double> errs;
      for (const auto& r : rows) {
        if (r.ok() && r.noise_kind == kind && r.intensity == level &&
            r.fraction == f) {
          errs.push_back(r.top1_err);
        }
      }
      if (auto m = median(errs)) s.points.push_back({f, *m});
    }
    out.push_back(std::move(s));
  };
  for (double p : config.sweep_salt_pepper) add("salt-pepper", p);
  for (double g : config.sweep_gaussian) add("gaussian", g);
  return out;
}

namespace {

nlohmann::ordered_json opt_json(const std::optional<double>& v) {
  return v ? nlohmann::ordered_json(*v) : nlohmann::ordered_json(nullptr);
}

nlohmann::ordered_json row_json(const RunRecord& r) {
  nlohmann::ordered_json j;
  j["run_id"] = r.run_id;
  j["cell_digest"] = r.cell_digest;
  j["seed"] = r.seed;
  j["mode"] = r.mode;
  j["fraction"] = r.fraction;
  j["poison_count"] = r.poison_count;
  j["noise_kind"] = r.noise_kind;
  j["intensity"] = r.intensity;
  j["clean_acc"] = r.ok() ? nlohmann::ordered_json(r.clean_acc) : nullptr;
  j["top1_err"] = r.ok() ? nlohmann::ordered_json(r.top1_err) : nullptr;
  j["clean_acc_drop"] = opt_json(r.clean_acc_drop);
  j["trigger_success"] = opt_json(r.trigger_success);
  j["confusion"] = r.confusion;
  j["wall_s"] = r.wall_s;
  j["status"] = r.status;
  return j;
}

nlohmann::ordered_json config_json(const ExperimentConfig& config) {
  nlohmann::ordered_json j;
  j["config_text"] = config.resolved.canonical_text();
  j["config_digest"] = config.digest_hex();
  nlohmann::ordered_json keys;
  for (const auto& [k, v] : config.resolved.entries()) keys[k] = v;
  j["config"] = keys;
  return j;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << text;
  if (!out.flush()) throw IoError("write failed: " + path.string());
}

}  // namespace

std::vector<std::filesystem::path> emit_report(
    const ExperimentConfig& config, const std::vector<RunRecord>& rows,
    const std::filesystem::path& directory) {
  std::error_code ec;
  std::filesystem::create_directories(directory, ec);
  if (ec) throw IoError("cannot create " + directory.string() + ": " + ec.message());
  std::vector<std::filesystem::path> written;

  std::string csv = csv_line(csv_columns());
  for (const auto& r : rows) csv += csv_line(csv_fields(r));
  write_text(directory / "rows.csv", csv);
  written.push_back(directory / "rows.csv");

  const std::vector<Series> series = plot_series(config, rows);
  nlohmann::ordered_json j = config_json(config);
  j["rows"] = nlohmann::ordered_json::array();
  for (const auto& r : rows) j["rows"].push_back(row_json(r));
  j["series"] = nlohmann::ordered_json::array();
  for (const auto& s : series) j["series"].push_back(s.file_name());
  write_text(directory / "report.json", j.dump(2) + "\n");
  written.push_back(directory / "report.json");

  for (const auto& s : series) {
    std::string text = csv_line({"fraction", "median_top1_err"});
    for (const auto& p : s.points) {
      text += csv_line({format_double(p.fraction), format_double(p.median_top1_err)});
    }
    write_text(directory / s.file_name(), text);
    written.push_back(directory / s.file_name());
  }
  return written;
}

std::vector<std::string> attack_columns() {
  return {"index",       "true_label",  "label_before", "label_after",
          "target",      "l2",          "linf",         "correlation",
          "clamp_residue", "loss_before", "loss_after", "iterations",
          "gradient_evaluations", "success"};
}

std::vector<std::string> attack_fields(const AttackRow& row) {
  const AdversarialResult& r = row.result;
  return {std::to_string(row.index),
          std::to_string(r.true_label),
          std::to_string(r.label_before),
          std::to_string(r.label_after),
          r.target ? std::to_string(*r.target) : "",
          format_double(r.metrics.l2),
          format_double(r.metrics.linf),
          format_double(r.metrics.correlation),
          format_double(r.clamp_residue),
          format_double(r.loss_before),
          format_double(r.loss_after),
          std::to_string(r.iterations),
          std::to_string(r.gradient_evaluations),
          r.success ? "1" : "0"};
}

void emit_attack_rows(const std::vector<AttackRow>& rows,
                      const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::string csv = csv_line(attack_columns());
  for (const auto& r : rows) csv += csv_line(attack_fields(r));
  write_text(path, csv);
}

void emit_comparison(const ExperimentConfig& config,
                     const ComparisonSummary& summary,
                     const std::filesystem::path& directory) {
  std::error_code ec;
  std::filesystem::create_directories(directory, ec);
  if (ec) throw IoError("cannot create " + directory.string() + ": " + ec.message());
  std::string csv = csv_line(csv_columns());
  for (const auto& r : summary.rows) csv += csv_line(csv_fields(r));
  write_text(directory / "compare_rows.csv", csv);

  nlohmann::ordered_json j = config_json(config);
  j["poison"] = config.poison.describe();
  j["rows"] = nlohmann::ordered_json::array();
  for (const auto& r : summary.rows) j["rows"].push_back(row_json(r));
  j["median_drop_replace"] = opt_json(summary.median_drop_replace);
  j["median_drop_append"] = opt_json(summary.median_drop_append);
  j["median_trigger_replace"] = opt_json(summary.median_trigger_replace);
  j["median_trigger_append"] = opt_json(summary.median_trigger_append);
  j["reference_drop_replace"] = summary.reference_drop_replace;
  j["reference_drop_append"] = summary.reference_drop_append;
  write_text(directory / "compare.json", j.dump(2) + "\n");
}

}  // namespace mlsb
