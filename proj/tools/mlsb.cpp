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

// mlsb: command-line front end for training, poisoning, attacks and sweeps.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <tuple>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "mlsb/config.hpp"
#include "mlsb/errors.hpp"
#include "mlsb/harness.hpp"
#include "mlsb/rng.hpp"

namespace fs = std::filesystem;
using namespace mlsb;

namespace {

struct Globals {
  std::string config_path;
  std::string seed;
  std::string workers;
  std::string out_dir;
  bool dry_run = false;
};

// Flag values keyed by config key; only flags actually given land here.
using FlagMap = std::map<std::string, std::string>;

const std::set<std::string> kGlobalKeys = {"workers", "out-dir"};

void add_config_flags(CLI::App* sub, FlagMap& flags,
                      const std::map<std::string, std::string>& renames = {}) {
  for (const auto& key : config_keys()) {
    if (kGlobalKeys.count(key.name)) continue;
    std::string flag = key.name;
    for (const auto& [from, to] : renames) {
      if (to == key.name) flag = from;
    }
    // A renamed flag hides the key it would otherwise shadow.
    if (renames.count(key.name) && flag == key.name) continue;
    sub->add_option_function<std::string>(
           "--" + flag,
           [&flags, name = key.name](const std::string& v) { flags[name] = v; },
           key.help + " [" + key.default_value + "]")
        ->type_name("VALUE");
  }
}

ExperimentConfig resolve(const Globals& g, const FlagMap& flags) {
  ConfigMap overrides;
  if (!g.config_path.empty()) overrides = ConfigMap::load(g.config_path);
  for (const auto& [k, v] : flags) overrides.set(k, v);
  if (!g.seed.empty()) overrides.set("seeds", g.seed);
  if (!g.workers.empty()) overrides.set("workers", g.workers);
  if (!g.out_dir.empty()) overrides.set("out-dir", g.out_dir);
  return ExperimentConfig::from(resolve_config(overrides));
}

std::string seeds_text(const ExperimentConfig& c) {
  std::string s;
  for (std::size_t i = 0; i < c.seeds.size(); ++i) {
    s += (i ? "," : "") + std::to_string(c.seeds[i]);
  }
  return s;
}

void print_header(const ExperimentConfig& c) {
  std::cout << "config-digest: " << c.digest_hex() << "\n";
  std::cout << "seeds: " << seeds_text(c) << "\n";
}

void log_line(const std::string& msg) { std::cerr << msg << "\n"; }

std::string pct(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f%%", 100.0 * v);
  return buf;
}

std::string row_summary(const RunRecord& r) {
  std::string s = r.run_id + " cell=" + r.cell_digest.substr(0, 16);
  if (!r.ok()) return s + " status=" + r.status;
  s += " acc=" + pct(r.clean_acc) + " top1_err=" + pct(r.top1_err);
  if (r.poison_count) s += " poisoned=" + std::to_string(r.poison_count);
  if (r.trigger_success) s += " trigger=" + pct(*r.trigger_success);
  return s;
}

void print_plan(const std::vector<Cell>& cells) {
  std::cout << "planned-cells: " << cells.size() << "\n";
  for (const auto& c : cells) {
    std::cout << "  " << c.run_id << " "
              << (c.poison ? c.poison->describe() : std::string("clean")) << "\n";
  }
}

class Timer {
 public:
  Timer() : start_(std::chrono::steady_clock::now()) {}
  // Timing goes on its own line so the rest of the output is reproducible.
  ~Timer() {
    const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    std::cout << "time: " << format_double(s) << " s\n";
  }

 private:
  std::chrono::steady_clock::time_point start_;
};

int cmd_train(const ExperimentConfig& c) {
  print_header(c);
  Timer timer;
  const DataBundle data = load_data(c);
  fs::create_directories(c.out_dir);
  std::vector<RunRecord> rows;
  for (std::uint64_t seed : c.seeds) {
    Parameters params;
    RunRecord r = train_and_evaluate(c, data, {"s" + std::to_string(seed) + "-clean", seed, {}},
                                     log_line, &params);
    std::cout << row_summary(r) << "\n";
    if (!r.ok()) throw TrainingDivergedError(r.run_id + ": " + r.status);
    const fs::path path = c.out_dir / ("model_seed" + std::to_string(seed) + ".mlsb");
    save_parameters(path, c.model, params);
    std::cout << "model: " << path.string() << "\n";
    rows.push_back(std::move(r));
  }
  std::string csv = csv_line(csv_columns());
  for (const auto& r : rows) csv += csv_line(csv_fields(r));
  std::ofstream(c.out_dir / "train_rows.csv", std::ios::binary) << csv;
  return 0;
}

int cmd_poison(const ExperimentConfig& c) {
  print_header(c);
  const Dataset train = load_idx(c.train_images, c.train_labels);
  const PoisonSpec spec = seeded_poison(c.poison, c.seeds.front());
  auto [poisoned, report] = apply_poison(train, spec);
  fs::create_directories(c.out_dir);
  const fs::path img = c.out_dir / "poisoned-images-idx3-ubyte";
  const fs::path lbl = c.out_dir / "poisoned-labels-idx1-ubyte";
  write_idx(poisoned, img, lbl);
  std::cout << "poison: " << spec.describe() << "\n"
            << "victims: " << report.victim_count << "\n"
            << "size: " << report.size_before << " -> " << report.size_after << "\n"
            << "images: " << img.string() << "\n"
            << "labels: " << lbl.string() << "\n";
  return 0;
}

int cmd_attack(const ExperimentConfig& c) {
  print_header(c);
  Timer timer;
  Dataset test = load_idx(c.test_images, c.test_labels);
  if (c.test_limit > 0) test = test.head(c.test_limit);
  const Model model(c.model);
  const FrozenModel frozen(model, load_parameters(c.model_path, c.model));
  const auto idx = attack_sample_indices(frozen, test, c.attack_samples, c.seeds.front());
  const auto rows = run_attacks(c, frozen, test, idx);
  std::size_t wins = 0;
  std::vector<double> l2;
  for (const auto& r : rows) {
    wins += r.result.success;
    l2.push_back(r.result.metrics.l2);
    std::cout << r.index << " " << r.result.label_before << "->" << r.result.label_after
              << " l2=" << format_double(r.result.metrics.l2)
              << " linf=" << format_double(r.result.metrics.linf)
              << " corr=" << format_double(r.result.metrics.correlation)
              << (r.result.success ? " success" : " fail") << "\n";
  }
  const fs::path path = c.out_dir / ("attack_" + c.attack_method + ".csv");
  emit_attack_rows(rows, path);
  std::cout << "method: " << c.attack_method << "\n"
            << "success: " << wins << "/" << rows.size() << "\n"
            << "median-l2: " << format_double(*median(l2)) << "\n"
            << "rows: " << path.string() << "\n";
  return 0;
}

int cmd_sweep(const ExperimentConfig& c, bool dry_run) {
  print_header(c);
  const std::vector<Cell> cells = plan_sweep(c);
  if (dry_run) {
    print_plan(cells);
    return 0;
  }
  Timer timer;
  const DataBundle data = load_data(c);
  fs::create_directories(c.out_dir);
  RowWriter writer(c.out_dir / "rows.csv");
  auto rows = run_cells(c, data, cells,
                        [&](const RunRecord& r) {
                          writer.append(r);
                          std::cout << row_summary(r) << std::endl;
                        },
                        log_line);
  attach_drops(rows);
  emit_report(c, rows, c.out_dir);
  for (const auto& s : plot_series(c, rows)) {
    std::cout << "series " << s.noise_kind << " " << format_double(s.intensity) << ":";
    for (const auto& p : s.points) {
      std::cout << " " << format_double(p.fraction) << "=" << pct(p.median_top1_err);
    }
    std::cout << "\n";
  }
  return 0;
}

int cmd_compare(const ExperimentConfig& c, bool dry_run) {
  print_header(c);
  const std::vector<Cell> cells = plan_comparison(c);
  if (dry_run) {
    print_plan(cells);
    return 0;
  }
  Timer timer;
  const DataBundle data = load_data(c);
  const ComparisonSummary s = run_attack_comparison(
      c, data, [](const RunRecord& r) { std::cout << row_summary(r) << std::endl; },
      log_line);
  emit_comparison(c, s, c.out_dir);
  auto show = [](const std::optional<double>& v) { return v ? pct(*v) : std::string("n/a"); };
  std::cout << "median-drop replace: " << show(s.median_drop_replace)
            << " (reference " << pct(s.reference_drop_replace) << ")\n"
            << "median-drop append: " << show(s.median_drop_append)
            << " (reference " << pct(s.reference_drop_append) << ")\n"
            << "median-trigger replace: " << show(s.median_trigger_replace) << "\n"
            << "median-trigger append: " << show(s.median_trigger_append) << "\n";
  return 0;
}

int cmd_report(const ExperimentConfig& c, const std::string& input) {
  print_header(c);
  const fs::path dir = input.empty() ? c.out_dir : fs::path(input);
  const auto bytes = read_file(dir / "rows.csv");
  const auto table = parse_csv(std::string(bytes.begin(), bytes.end()));
  if (table.empty() || table.front() != csv_columns()) {
    throw FormatError((dir / "rows.csv").string() + ": unexpected header");
  }
  std::cout << "rows: " << table.size() - 1 << "\n";
  // median top1_err per (noise_kind, intensity, fraction)
  std::map<std::tuple<std::string, std::string, double>, std::vector<double>> groups;
  for (std::size_t i = 1; i < table.size(); ++i) {
    const auto& f = table[i];
    if (f.size() != csv_columns().size()) {
      throw FormatError("row " + std::to_string(i) + " has " + std::to_string(f.size()) + " fields");
    }
    if (f[7] == "nan") continue;
    groups[{f[4].empty() ? "clean" : f[4], f[5], std::stod(f[3])}].push_back(std::stod(f[7]));
  }
  for (const auto& [key, errs] : groups) {
    const auto& [kind, level, fraction] = key;
    std::cout << kind << (level.empty() ? "" : " " + level) << " fraction="
              << format_double(fraction) << " median_top1_err=" << pct(*median(errs))
              << " n=" << errs.size() << "\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"mlsb: poisoning and adversarial-example bench for a LeNet digit classifier"};
  app.require_subcommand(1);
  Globals g;
  app.add_option("--config", g.config_path, "key = value run configuration file");
  app.add_option("--seed", g.seed, "run a single seed (overrides 'seeds')");
  app.add_option("--workers", g.workers, "concurrent jobs [1]");
  app.add_option("--out-dir", g.out_dir, "output directory [out]");
  app.add_flag("--dry-run", g.dry_run, "print the plan and config digest, train nothing");
  app.fallthrough();

  FlagMap flags;
  auto* train = app.add_subcommand("train", "train clean models and save them");
  auto* poison = app.add_subcommand("poison", "write a poisoned copy of the training IDX pair");
  auto* attack = app.add_subcommand("attack", "attack test images with FGSM or min-norm");
  auto* sweep = app.add_subcommand("sweep", "poison-fraction x noise grid");
  auto* compare = app.add_subcommand("compare", "replace vs append at a fixed poison count");
  auto* report = app.add_subcommand("report", "summarise a rows.csv");
  std::string input;
  for (auto* sub : {train, poison, sweep, compare}) add_config_flags(sub, flags);
  // --mode on attack selects the FGSM form.
  add_config_flags(attack, flags, {{"mode", "fgsm-mode"}});
  add_config_flags(report, flags);
  report->add_option("--input", input, "directory holding rows.csv [out-dir]");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error[UsageError]: " << e.what() << "\n\n";
    const CLI::App* sub = app.get_subcommands().empty() ? &app : app.get_subcommands().front();
    std::cerr << sub->help();
    return 2;
  }

  try {
    const ExperimentConfig c = resolve(g, flags);
    if (g.dry_run && !sweep->parsed() && !compare->parsed()) {
      throw ConfigError("--dry-run applies to sweep and compare only");
    }
    if (train->parsed()) return cmd_train(c);
    if (poison->parsed()) return cmd_poison(c);
    if (attack->parsed()) return cmd_attack(c);
    if (sweep->parsed()) return cmd_sweep(c, g.dry_run);
    if (compare->parsed()) return cmd_compare(c, g.dry_run);
    if (report->parsed()) return cmd_report(c, input);
  } catch (const Error& e) {
    std::cerr << "error[" << e.kind() << "]: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error[InternalError]: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
