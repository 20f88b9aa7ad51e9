// Copyright 2026 The fransonsim Authors
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

// fransonsim command-line tool.
//
// Exit codes: 0 success, 1 domain error (invalid circuit, bad value, failed
// comparison), 2 I/O or usage error.

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "fransonsim/fransonsim.hpp"

#ifndef FRANSONSIM_CIRCUIT_DIR
#define FRANSONSIM_CIRCUIT_DIR "circuits"
#endif

namespace fs = std::filesystem;
using namespace fransonsim;

namespace {

constexpr int kOk = 0;
constexpr int kDomainError = 1;
constexpr int kIoError = 2;

struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Existing path as given, else a builtin corpus file of that name.
std::string resolve_circuit(const std::string& name) {
  std::string n = name;
  if (n.rfind("builtin:", 0) == 0) n = n.substr(8) + ".circuit";
  if (fs::exists(n)) return n;
  const fs::path builtin = fs::path(FRANSONSIM_CIRCUIT_DIR) / n;
  if (n.find('/') == std::string::npos && fs::exists(builtin)) return builtin.string();
  return name;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

nlohmann::json violation_json(const Violation& v) {
  return {{"code", std::string(to_string(v.code))}, {"subject", v.subject}, {"message", v.message}};
}

int cmd_validate(const std::string& file) {
  const std::string text = read_file(resolve_circuit(file));
  nlohmann::json report;
  report["circuit"] = file;
  try {
    const CircuitSpec spec = parse(text);
    const ValidationReport r = validate(spec);
    report["ok"] = r.ok();
    report["violations"] = nlohmann::json::array();
    for (const auto& v : r.violations) report["violations"].push_back(violation_json(v));
    if (!std::isnan(r.isometry_error)) report["isometry_error"] = r.isometry_error;
  } catch (const CircuitError& e) {
    report["ok"] = false;
    report["violations"] = nlohmann::json::array(
        {{{"code", std::string(to_string(e.code()))}, {"subject", "line " + std::to_string(e.line())},
          {"message", e.what()}}});
  }
  std::cout << report.dump(2) << '\n';
  return report["ok"].get<bool>() ? kOk : kDomainError;
}

std::optional<analytic::Grid> parse_grid(const std::string& text) {
  std::vector<double> parts;
  std::size_t start = 0;
  while (true) {
    const auto colon = text.find(':', start);
    const std::string piece = text.substr(start, colon == std::string::npos ? std::string::npos : colon - start);
    double x = 0.0;
    auto [ptr, ec] = std::from_chars(piece.data(), piece.data() + piece.size(), x);
    if (piece.empty() || ec != std::errc{} || ptr != piece.data() + piece.size() || !std::isfinite(x))
      return std::nullopt;
    parts.push_back(x);
    if (colon == std::string::npos) break;
    start = colon + 1;
  }
  if (parts.size() == 1) return analytic::Grid::single(parts[0]);
  if (parts.size() == 3 && parts[1] > 0.0) return analytic::Grid{parts[0], parts[1], parts[2]};
  return std::nullopt;
}

int cmd_sweep(const CLI::App& app, const std::string& phi, const std::string& psi, const std::string& theta,
              double i0) {
  const auto gp = parse_grid(phi);
  const auto gs = parse_grid(psi);
  const auto gt = parse_grid(theta);
  if (!gp || !gs || !gt) {
    std::cerr << "sweep: grids are VALUE or START:STEP:STOP with STEP > 0\n\n" << app.help();
    return kDomainError;
  }
  const auto rows = analytic::sweep(*gp, *gs, *gt, i0);
  analytic::write_sweep_csv(std::cout, rows);
  return kOk;
}

int cmd_simulate(RunConfig cfg) {
  if (cfg.run.mode == experiment::Mode::kMonteCarlo && !cfg.seed)
    throw ConfigError("--seed is required in monte-carlo mode");
  const std::string circuit_path = resolve_circuit(cfg.circuit.empty() ? "franson_modified.circuit" : cfg.circuit);
  const EvaluationPlan plan = load_plan(read_file(circuit_path));
  const auto series = experiment::run(plan, cfg.run);

  std::vector<std::pair<std::string, std::string>> meta{{"fransonsim", "simulate"}};
  for (auto& kv : cfg.describe()) meta.push_back(kv);
  char hash[17];
  std::snprintf(hash, sizeof hash, "%016llx", static_cast<unsigned long long>(cfg.hash()));
  meta.emplace_back("config_hash", hash);
  meta.emplace_back("nm_per_bin", csv::format9(cfg.run.scan.nm_per_bin(cfg.run.schedule.bin_s)));
  meta.emplace_back("fringe_bins", csv::format9(cfg.run.scan.fringe_bins(cfg.run.schedule.bin_s)));

  if (cfg.output == "-") {
    experiment::write_csv(std::cout, series, meta);
  } else {
    std::ofstream out(cfg.output, std::ios::binary);
    if (!out) throw IoError("cannot write '" + cfg.output + "'");
    experiment::write_csv(out, series, meta);
    if (!out) throw IoError("write to '" + cfg.output + "' failed");
  }
  return kOk;
}

int cmd_visibility(const std::string& input, const std::string& column, const std::string& window_flag, bool fit) {
  csv::Table table;
  if (input == "-") {
    table = csv::read(std::cin);
  } else {
    std::ifstream in(input);
    if (!in) throw IoError("cannot read '" + input + "'");
    table = csv::read(in);
  }

  std::vector<double> values;
  if (table.has(column)) {
    values = table.column(column);
  } else if (column == "product" && table.has("I_alpha") && table.has("I_beta")) {
    values = analysis::product_trace(table.column("I_alpha"), table.column("I_beta"));
  } else if (column == "count_product" && table.has("D1") && table.has("D2")) {
    values = analysis::product_trace(table.column("D1"), table.column("D2"));
  } else {
    std::cerr << "visibility: no column '" << column << "'\n";
    return kDomainError;
  }
  std::vector<double> times;
  if (table.has("t")) {
    times = table.column("t");
  } else {
    for (std::size_t i = 0; i < values.size(); ++i) times.push_back(static_cast<double>(i));
  }

  std::cout << "t,V\n";
  if (fit) {
    if (!table.has("phi")) {
      std::cerr << "visibility: --fit needs a phi column\n";
      return kDomainError;
    }
    const double mid = times.empty() ? 0.0 : 0.5 * (times.front() + times.back());
    std::cout << csv::format9(mid) << ',' << csv::format9(analysis::fitted_visibility(table.column("phi"), values))
              << '\n';
    return kOk;
  }

  std::size_t window = values.size();
  if (window_flag != "all") {
    if (!window_flag.empty()) {
      window = static_cast<std::size_t>(std::stoul(window_flag));
    } else if (auto it = table.meta.find("fringe_bins"); it != table.meta.end()) {
      window = static_cast<std::size_t>(std::llround(std::stod(it->second)));
    }
  }
  if (values.empty()) return kOk;
  const double bin = table.meta.count("bin") ? std::stod(table.meta.at("bin")) : 0.0;
  const auto trace = bin > 0.0 && window_flag != "all" ? analysis::windowed_visibility_segmented(times, values, window, bin)
                               : analysis::windowed_visibility(times, values, window);
  for (const auto& r : trace) std::cout << csv::format9(r.t) << ',' << csv::format9(r.v) << '\n';
  return kOk;
}

int cmd_compare(const std::string& file, std::size_t samples, std::uint64_t seed, const std::string& model,
                double tolerance) {
  const std::string text = read_file(resolve_circuit(file));
  CompareOptions opt;
  opt.samples = samples;
  opt.seed = seed;
  opt.tolerance = tolerance;
  if (model == "outputs") opt.model = ClosedForm::kOutputs;
  else if (model == "coincidence") opt.model = ClosedForm::kCoincidence;
  else if (model != "auto") throw ConfigError("--model: expected auto, outputs or coincidence");

  const auto start = std::chrono::steady_clock::now();
  const EvaluationPlan plan = load_plan(text);
  const CompareReport r = compare_to_closed_form(plan, opt);
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

  nlohmann::json j{{"circuit", file},
                   {"model", std::string(to_string(r.model))},
                   {"samples", r.samples},
                   {"i0", r.i0},
                   {"offset_phi", r.offsets[0]},
                   {"offset_psi", r.offsets[1]},
                   {"offset_theta", r.offsets[2]},
                   {"max_relative_error", r.max_error},
                   {"tolerance", tolerance},
                   {"seconds", seconds},
                   {"pass", r.pass}};
  if (r.model == ClosedForm::kCoincidence) j["theta_variation"] = r.theta_variation;
  std::cout << j.dump(2) << '\n';
  return r.pass ? kOk : kDomainError;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Franson-type correlation simulator"};
  app.require_subcommand(1);

  std::string validate_file;
  auto* validate = app.add_subcommand("validate", "Check a circuit netlist");
  validate->add_option("circuit", validate_file, "Netlist file or builtin name")->required();

  std::string sweep_phi = "0", sweep_psi = "0", sweep_theta = "0";
  double sweep_i0 = 1.0;
  auto* sweep = app.add_subcommand("sweep", "Closed-form table over a phase grid (CSV on stdout)");
  sweep->add_option("--phi", sweep_phi, "VALUE or START:STEP:STOP");
  sweep->add_option("--psi", sweep_psi, "VALUE or START:STEP:STOP");
  sweep->add_option("--theta", sweep_theta, "VALUE or START:STEP:STOP");
  sweep->add_option("--i0", sweep_i0, "Intensity scale");

  auto* simulate = app.add_subcommand("simulate", "Timed scan experiment (CSV)");
  std::string config_file;
  std::vector<std::string> overrides;
  std::map<std::string, std::string> flag_values;
  simulate->add_option("--config", config_file, "key = value config file");
  simulate->add_option("--set", overrides, "key=value override (repeatable)");
  for (const auto& key : RunConfig::keys()) {
    std::string flag = "--" + key;
    for (auto& c : flag)
      if (c == '_') c = '-';
    simulate->add_option(flag, flag_values[key], "Setting '" + key + "'");
  }

  std::string vis_input = "-", vis_column, vis_window;
  bool vis_fit = false;
  auto* vis = app.add_subcommand("visibility", "Sliding-window visibility of a CSV column");
  vis->add_option("input", vis_input, "CSV file, or - for stdin");
  vis->add_option("--column", vis_column, "Column name, or product / count_product")->required();
  vis->add_option("--window", vis_window, "Window in rows, or 'all'; default one fringe if known, else all");
  vis->add_flag("--fit", vis_fit, "Harmonic-fit visibility against the phi column");

  std::string cmp_file;
  std::size_t cmp_samples = 10000;
  std::uint64_t cmp_seed = 1;
  std::string cmp_model = "auto";
  double cmp_tol = 1e-9;
  auto* compare = app.add_subcommand("compare", "Check a circuit against the closed-form model");
  compare->add_option("circuit", cmp_file, "Netlist file or builtin name")->required();
  compare->add_option("-n,--samples", cmp_samples, "Random phase triples");
  compare->add_option("--seed", cmp_seed, "Sampling seed");
  compare->add_option("--model", cmp_model, "auto, outputs or coincidence");
  compare->add_option("--tolerance", cmp_tol, "Pass threshold on the max relative error");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kIoError;
  }

  try {
    if (*validate) return cmd_validate(validate_file);
    if (*sweep) return cmd_sweep(*sweep, sweep_phi, sweep_psi, sweep_theta, sweep_i0);
    if (*vis) return cmd_visibility(vis_input, vis_column, vis_window, vis_fit);
    if (*compare) return cmd_compare(cmp_file, cmp_samples, cmp_seed, cmp_model, cmp_tol);
    if (*simulate) {
      RunConfig cfg;
      if (!config_file.empty()) {
        std::ifstream in(config_file);
        if (!in) throw IoError("cannot read '" + config_file + "'");
        cfg.load(in);
      }
      cfg.load_env([](const char* name) { return std::getenv(name); });
      for (const auto& kv : overrides) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + kv + "'");
        cfg.set(kv.substr(0, eq), kv.substr(eq + 1));
      }
      for (const auto& key : RunConfig::keys()) {
        std::string flag = "--" + key;
        for (auto& c : flag)
          if (c == '_') c = '-';
        if (simulate->count(flag) > 0) cfg.set(key, flag_values[key]);
      }
      return cmd_simulate(cfg);
    }
  } catch (const IoError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kIoError;
  } catch (const CircuitError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kDomainError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kDomainError;
  }
  return kIoError;
}
