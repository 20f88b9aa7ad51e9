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

// Run configuration for the command-line tool. Every setting is a flat
// `key = value` pair using the netlist value syntax (numbers with optional
// `nm`/`deg` suffix, or a word). Later sources override earlier ones:
// built-in defaults, config file, FRANSONSIM_<KEY> environment variables,
// command-line flags.

#pragma once

#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <functional>
#include <istream>
#include <numbers>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <system_error>
#include <utility>
#include <vector>

#include "fransonsim/csv.hpp"
#include "fransonsim/experiment.hpp"

namespace fransonsim {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct RunConfig {
  std::string circuit;  // empty: builtin franson_modified.circuit
  std::string output = "-";
  std::optional<std::uint64_t> seed;
  experiment::RunOptions run;

  RunConfig() {
    run.mode = experiment::Mode::kAnalytic;
    run.theta = experiment::ThetaModel::drift(1.0, 300.0);
  }

  static const std::vector<std::string>& keys() {
    static const std::vector<std::string> k{
        "circuit",     "output",          "mode",         "seed",       "duration",   "bin",
        "period",      "voltage_min",     "voltage_max",  "displacement", "wavelength", "seam_drop",
        "theta",       "psi",             "i0",           "mu",         "singles_rate", "pair_fraction",
        "triple_fraction", "statistics",  "dark_rate",    "efficiency", "pulse_width", "window",
        "accidental_correction"};
    return k;
  }

  /// Applies one setting. Throws ConfigError naming the key on bad input.
  void set(std::string_view key, std::string_view value);

  /// `key = value` lines; `#` comments and blank lines ignored.
  void load(std::istream& in) {
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      std::string_view v = line;
      if (auto hash = v.find('#'); hash != std::string_view::npos) v = v.substr(0, hash);
      v = csv::detail::trim(v);
      if (v.empty()) continue;
      const auto eq = v.find('=');
      if (eq == std::string_view::npos) throw ConfigError("config line " + std::to_string(line_no) + ": expected key = value");
      set(csv::detail::trim(v.substr(0, eq)), csv::detail::trim(v.substr(eq + 1)));
    }
  }

  /// Applies FRANSONSIM_<KEY> variables found through `getenv`.
  void load_env(const std::function<const char*(const char*)>& getenv) {
    for (const auto& key : keys()) {
      std::string name = "FRANSONSIM_";
      for (char c : key) name += static_cast<char>(c >= 'a' && c <= 'z' ? c - 'a' + 'A' : c);
      if (const char* v = getenv(name.c_str())) set(key, v);
    }
  }

  /// Deterministic `key=value` listing of the effective configuration.
  std::vector<std::pair<std::string, std::string>> describe() const;

  /// FNV-1a over describe().
  std::uint64_t hash() const {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (const auto& [k, v] : describe())
      for (char c : k + "=" + v + "\n") {
        h ^= static_cast<unsigned char>(c);
        h *= 0x100000001b3ULL;
      }
    return h;
  }
};

namespace config_detail {

struct Number {
  double value;
  std::string unit;
};

inline Number number(std::string_view key, std::string_view text) {
  std::size_t end = 0;
  while (end < text.size() && (std::isdigit(static_cast<unsigned char>(text[end])) || text[end] == '.' ||
                               text[end] == '-' || text[end] == '+' || text[end] == 'e' || text[end] == 'E'))
    ++end;
  // Let a trailing unit word start at the first letter after the digits.
  while (end > 0 && (text[end - 1] == 'e' || text[end - 1] == 'E') &&
         (end == text.size() || std::isalpha(static_cast<unsigned char>(text[end]))))
    --end;
  double x = 0.0;
  const char* first = text.data() + (!text.empty() && text.front() == '+' ? 1 : 0);
  auto [ptr, ec] = std::from_chars(first, text.data() + end, x);
  if (ec != std::errc{} || ptr != text.data() + end || end == 0 || !std::isfinite(x))
    throw ConfigError(std::string(key) + ": '" + std::string(text) + "' is not a number");
  return {x, std::string(text.substr(end))};
}

inline double plain(std::string_view key, std::string_view text) {
  auto n = number(key, text);
  if (!n.unit.empty()) throw ConfigError(std::string(key) + ": unexpected unit '" + n.unit + "'");
  return n.value;
}

inline double length_nm(std::string_view key, std::string_view text) {
  auto n = number(key, text);
  if (!n.unit.empty() && n.unit != "nm") throw ConfigError(std::string(key) + ": expected nm");
  return n.value;
}

inline double angle(std::string_view key, std::string_view text) {
  auto n = number(key, text);
  if (n.unit == "deg") return n.value * (std::numbers::pi / 180.0);
  if (!n.unit.empty()) throw ConfigError(std::string(key) + ": expected an angle in rad or deg");
  return n.value;
}

inline std::vector<std::string_view> fields(std::string_view text) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    auto colon = text.find(':', start);
    out.push_back(text.substr(start, colon == std::string_view::npos ? std::string_view::npos : colon - start));
    if (colon == std::string_view::npos) return out;
    start = colon + 1;
  }
}

inline bool boolean(std::string_view key, std::string_view text) {
  if (text == "true" || text == "1" || text == "yes" || text == "on") return true;
  if (text == "false" || text == "0" || text == "no" || text == "off") return false;
  throw ConfigError(std::string(key) + ": expected true or false");
}

}  // namespace config_detail

/// Parses `constant:THETA`, `linear:RATE[:START]` or
/// `drift:SIGMA:CORRELATION_TIME[:MEAN]`.
inline experiment::ThetaModel parse_theta_model(std::string_view text) {
  using namespace config_detail;
  const auto f = fields(text);
  if (f[0] == "constant" && f.size() == 2) return experiment::ThetaModel::constant(angle("theta", f[1]));
  if (f[0] == "linear" && (f.size() == 2 || f.size() == 3))
    return experiment::ThetaModel::linear(plain("theta", f[1]), f.size() == 3 ? angle("theta", f[2]) : 0.0);
  if (f[0] == "drift" && (f.size() == 3 || f.size() == 4)) {
    const double sigma = angle("theta", f[1]);
    const double tau = plain("theta", f[2]);
    if (!(sigma >= 0.0) || !(tau > 0.0)) throw ConfigError("theta: drift needs sigma >= 0 and correlation time > 0");
    return experiment::ThetaModel::drift(sigma, tau, f.size() == 4 ? angle("theta", f[3]) : 0.0);
  }
  throw ConfigError("theta: expected constant:THETA, linear:RATE[:START] or drift:SIGMA:TAU[:MEAN]");
}

inline std::string describe_theta_model(const experiment::ThetaModel& m) {
  using csv::format9;
  switch (m.mode) {
    case experiment::ThetaModel::Mode::kConstant:
      return "constant:" + format9(m.theta0);
    case experiment::ThetaModel::Mode::kLinear:
      return "linear:" + format9(m.rate) + ":" + format9(m.theta0);
    case experiment::ThetaModel::Mode::kDrift:
      return "drift:" + format9(m.sigma) + ":" + format9(m.correlation_time) + ":" + format9(m.theta0);
  }
  return "?";
}

inline void RunConfig::set(std::string_view key, std::string_view value) {
  using namespace config_detail;
  auto& r = run;
  if (key == "circuit") {
    circuit = value;
  } else if (key == "output") {
    output = value;
  } else if (key == "mode") {
    if (value == "analytic") r.mode = experiment::Mode::kAnalytic;
    else if (value == "monte-carlo") r.mode = experiment::Mode::kMonteCarlo;
    else throw ConfigError("mode: expected analytic or monte-carlo");
  } else if (key == "seed") {
    std::uint64_t s = 0;
    auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), s);
    if (ec != std::errc{} || ptr != value.data() + value.size()) throw ConfigError("seed: expected an unsigned integer");
    seed = s;
    r.seed = s;
  } else if (key == "duration") {
    r.schedule.duration_s = plain(key, value);
    if (!(r.schedule.duration_s >= 0.0)) throw ConfigError("duration: must be >= 0");
  } else if (key == "bin") {
    r.schedule.bin_s = plain(key, value);
    if (!(r.schedule.bin_s > 0.0)) throw ConfigError("bin: must be > 0");
  } else if (key == "period") {
    r.scan.period_s = plain(key, value);
    if (!(r.scan.period_s > 0.0)) throw ConfigError("period: must be > 0");
  } else if (key == "voltage_min") {
    r.scan.voltage_min = plain(key, value);
  } else if (key == "voltage_max") {
    r.scan.voltage_max = plain(key, value);
  } else if (key == "displacement") {
    r.scan.displacement_nm = length_nm(key, value);
  } else if (key == "wavelength") {
    r.scan.wavelength_nm = length_nm(key, value);
    if (!(r.scan.wavelength_nm > 0.0)) throw ConfigError("wavelength: must be > 0");
  } else if (key == "seam_drop") {
    const double d = plain(key, value);
    if (d < 0.0 || d != std::floor(d)) throw ConfigError("seam_drop: expected a nonnegative integer");
    r.scan.seam_drop = static_cast<int>(d);
  } else if (key == "theta") {
    r.theta = parse_theta_model(value);
  } else if (key == "psi") {
    r.psi = angle(key, value);
  } else if (key == "i0") {
    r.i0 = plain(key, value);
  } else if (key == "mu") {
    r.source.mean_photon_number = plain(key, value);
  } else if (key == "singles_rate") {
    r.source.singles_rate = plain(key, value);
  } else if (key == "pair_fraction") {
    r.source.pair_fraction = plain(key, value);
  } else if (key == "triple_fraction") {
    r.source.triple_fraction = plain(key, value);
  } else if (key == "statistics") {
    const auto f = fields(value);
    if (f[0] == "poisson" && f.size() == 1) {
      r.source.statistics = stats::Statistics::kPoisson;
      r.source.subpoisson_factor.reset();
    } else if (f[0] == "subpoisson" && f.size() <= 2) {
      r.source.statistics = stats::Statistics::kSubPoisson;
      if (f.size() == 2) r.source.subpoisson_factor = plain(key, f[1]);
      else r.source.subpoisson_factor.reset();
    } else {
      throw ConfigError("statistics: expected poisson, subpoisson or subpoisson:FACTOR");
    }
  } else if (key == "dark_rate") {
    r.detector.dark_rate = plain(key, value);
  } else if (key == "efficiency") {
    r.detector.efficiency = plain(key, value);
  } else if (key == "pulse_width") {
    r.detector.pulse_width_ns = plain(key, value);
  } else if (key == "window") {
    r.coincidence.window_ns = plain(key, value);
  } else if (key == "accidental_correction") {
    r.coincidence.accidental_correction = boolean(key, value);
  } else {
    throw ConfigError("unknown setting '" + std::string(key) + "'");
  }
  try {
    r.source.check();
    r.detector.check();
    r.coincidence.check();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string(key) + ": " + e.what());
  }
}

inline std::vector<std::pair<std::string, std::string>> RunConfig::describe() const {
  using csv::format9;
  const auto& r = run;
  std::string statistics = "poisson";
  if (r.source.statistics == stats::Statistics::kSubPoisson)
    statistics = "subpoisson:" + format9(r.source.thinning_factor());
  return {
      {"circuit", circuit.empty() ? "builtin:franson_modified" : circuit},
      {"mode", r.mode == experiment::Mode::kAnalytic ? "analytic" : "monte-carlo"},
      {"seed", std::to_string(r.seed)},
      {"duration", format9(r.schedule.duration_s)},
      {"bin", format9(r.schedule.bin_s)},
      {"period", format9(r.scan.period_s)},
      {"voltage_min", format9(r.scan.voltage_min)},
      {"voltage_max", format9(r.scan.voltage_max)},
      {"displacement", format9(r.scan.displacement_nm) + "nm"},
      {"wavelength", format9(r.scan.wavelength_nm) + "nm"},
      {"seam_drop", std::to_string(r.scan.seam_drop)},
      {"theta", describe_theta_model(r.theta)},
      {"psi", format9(r.psi)},
      {"i0", format9(r.i0)},
      {"mu", format9(r.source.mean_photon_number)},
      {"singles_rate", format9(r.source.singles_rate)},
      {"pair_fraction", format9(r.source.pair_fraction)},
      {"triple_fraction", format9(r.source.triple_fraction)},
      {"statistics", statistics},
      {"dark_rate", format9(r.detector.dark_rate)},
      {"efficiency", format9(r.detector.efficiency)},
      {"pulse_width", format9(r.detector.pulse_width_ns)},
      {"window", format9(r.coincidence.window_ns)},
      {"accidental_correction", r.coincidence.accidental_correction ? "true" : "false"},
  };
}

}  // namespace fransonsim
