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

// Timed experiment: a PZT triangle scan drives Bob's phase, a slow global
// phase model stands in for air turbulence, and every acquisition bin is
// propagated through the circuit and turned into detector counts.

#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <ostream>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <boost/random/normal_distribution.hpp>

#include "fransonsim/circuit.hpp"
#include "fransonsim/csv.hpp"
#include "fransonsim/photon_stats.hpp"
#include "fransonsim/rng.hpp"

namespace fransonsim::experiment {

/// Triangle PZT scan. One period is a forward and a backward half-scan.
struct ScanProfile {
  double period_s = 1000.0;
  double voltage_min = 0.0;
  double voltage_max = 100.0;
  double displacement_nm = 2660.0;  // path change over a half-scan
  double wavelength_nm = 532.0;
  int seam_drop = 45;  // bins dropped per half-scan, centered on turning points

  double half_period() const { return 0.5 * period_s; }

  /// Fraction of the half-scan travel reached at time t, in [0, 1].
  double triangle(double t) const {
    const double u = std::fmod(t, period_s) / period_s;
    return u < 0.5 ? 2.0 * u : 2.0 * (1.0 - u);
  }

  double voltage_at(double t) const { return voltage_min + triangle(t) * (voltage_max - voltage_min); }
  double displacement_at(double t) const { return triangle(t) * displacement_nm; }

  /// PZT displacement swept during one bin.
  double nm_per_bin(double bin_s) const { return displacement_nm * bin_s / half_period(); }

  /// Bins per fringe (one wavelength of displacement).
  double fringe_bins(double bin_s) const { return wavelength_nm / nm_per_bin(bin_s); }

  /// True for bins within the seam around a turning point: the first
  /// ceil(d/2) and last floor(d/2) bins of every half-scan.
  bool in_seam(double t, double bin_s) const {
    if (seam_drop <= 0) return false;
    const double per_half = half_period() / bin_s;
    const double offset = std::fmod(t, half_period()) / bin_s;
    const int head = (seam_drop + 1) / 2;
    const int tail = seam_drop / 2;
    return offset < head - 1e-9 || offset >= per_half - tail - 1e-9;
  }

  void check() const {
    if (!(period_s > 0.0)) throw std::invalid_argument("scan period must be > 0");
    if (!(wavelength_nm > 0.0)) throw std::invalid_argument("wavelength must be > 0");
    if (!(displacement_nm >= 0.0)) throw std::invalid_argument("displacement range must be >= 0");
    if (seam_drop < 0) throw std::invalid_argument("seam drop must be >= 0");
  }
};

inline double phi_at(double t, const ScanProfile& profile) {
  if (t < 0.0) throw std::invalid_argument("time must be >= 0");
  return 2.0 * std::numbers::pi * profile.displacement_at(t) / profile.wavelength_nm;
}

struct ThetaModel {
  enum class Mode { kConstant, kLinear, kDrift };
  Mode mode = Mode::kDrift;
  double theta0 = 0.0;             // constant value, linear start, or drift mean
  double rate = 0.0;               // rad/s, linear mode
  double sigma = 1.0;              // rad, drift stationary standard deviation
  double correlation_time = 300.0;  // s, drift

  static ThetaModel constant(double value) { return {Mode::kConstant, value}; }
  static ThetaModel linear(double rate, double start = 0.0) { return {Mode::kLinear, start, rate}; }
  static ThetaModel drift(double sigma, double correlation_time, double mean = 0.0) {
    return {Mode::kDrift, mean, 0.0, sigma, correlation_time};
  }
};

/// Global phase path for one run. Drift mode is an Ornstein-Uhlenbeck process
/// started in its stationary law and stepped exactly on a `step_s` grid; the
/// innovation of step k comes from stream (seed, k), so disjoint intervals
/// draw independent noise.
class ThetaPath {
 public:
  ThetaPath(ThetaModel model, std::uint64_t seed, double horizon_s = 0.0, double step_s = 1.0)
      : model_(model), seed_(seed), step_(step_s) {
    if (model_.mode == ThetaModel::Mode::kDrift) {
      if (!(model_.correlation_time > 0.0)) throw std::invalid_argument("correlation time must be > 0");
      if (!(model_.sigma >= 0.0)) throw std::invalid_argument("drift sigma must be >= 0");
      extend(static_cast<std::size_t>(std::ceil(std::max(horizon_s, 0.0) / step_) + 1));
    }
  }

  double at(double t) {
    if (t < 0.0) throw std::invalid_argument("time must be >= 0");
    switch (model_.mode) {
      case ThetaModel::Mode::kConstant:
        return model_.theta0;
      case ThetaModel::Mode::kLinear:
        return model_.theta0 + model_.rate * t;
      case ThetaModel::Mode::kDrift:
        break;
    }
    const double pos = t / step_;
    auto k = static_cast<std::size_t>(std::floor(pos + 1e-12));
    extend(k + 1);
    const double frac = (pos - static_cast<double>(k)) * step_;
    if (frac <= 1e-12 * step_) return model_.theta0 + path_[k];
    CounterRng rng(seed_, k, 21);
    const double a = std::exp(-frac / model_.correlation_time);
    return model_.theta0 + a * path_[k] + model_.sigma * std::sqrt(1.0 - a * a) * normal(rng);
  }

 private:
  static double normal(CounterRng& rng) { return boost::random::normal_distribution<double>(0.0, 1.0)(rng); }

  void extend(std::size_t n) {
    if (path_.empty() && n > 0) {
      CounterRng rng(seed_, 0, 20);
      path_.push_back(model_.sigma * normal(rng));
    }
    const double a = std::exp(-step_ / model_.correlation_time);
    const double innovation = model_.sigma * std::sqrt(1.0 - a * a);
    while (path_.size() < n) {
      CounterRng rng(seed_, path_.size(), 20);
      path_.push_back(a * path_.back() + innovation * normal(rng));
    }
  }

  ThetaModel model_;
  std::uint64_t seed_;
  double step_;
  std::vector<double> path_;  // deviation from the mean
};

inline double theta_at(double t, const ThetaModel& model, std::uint64_t seed) {
  return ThetaPath(model, seed, t).at(t);
}

struct Schedule {
  double duration_s = 4000.0;
  double bin_s = 1.0;

  std::size_t bin_count() const {
    if (!(bin_s > 0.0)) throw std::invalid_argument("bin width must be > 0");
    if (!(duration_s >= 0.0)) throw std::invalid_argument("duration must be >= 0");
    return static_cast<std::size_t>(std::floor(duration_s / bin_s + 1e-9));
  }
};

enum class Mode { kAnalytic, kMonteCarlo };

struct RunOptions {
  Schedule schedule;
  ScanProfile scan;
  ThetaModel theta;
  double psi = 0.0;
  double i0 = 1.0;
  stats::SourceModel source;
  stats::DetectorModel detector;
  stats::CoincidenceModel coincidence;
  Mode mode = Mode::kMonteCarlo;
  std::uint64_t seed = 0;
};

struct Row {
  double t = 0.0;
  double phi = 0.0;
  double theta = 0.0;
  double i_alpha = 0.0;
  double i_beta = 0.0;
  double d1 = 0.0;
  double d2 = 0.0;
  double c12 = 0.0;
  friend bool operator==(const Row&, const Row&) = default;
};

struct DetectionTimeSeries {
  std::vector<Row> rows;

  std::vector<double> column(double Row::*member) const {
    std::vector<double> out;
    out.reserve(rows.size());
    for (const auto& r : rows) out.push_back(r.*member);
    return out;
  }
};

/// Intensities below this fraction of I0 are round-off of the unitary network
/// and reported as exact zeros.
inline constexpr double kDarkFloor = 1e-12;

/// Runs the schedule bin by bin. Bin i sits at t = i * bin; seam bins are
/// skipped. Analytic mode reports expected counts; Monte Carlo mode samples
/// them from streams keyed by (seed, bin index).
inline DetectionTimeSeries run(const EvaluationPlan& plan, const RunOptions& opt) {
  opt.scan.check();
  opt.source.check();
  opt.detector.check();
  opt.coincidence.check();
  const std::size_t bins = opt.schedule.bin_count();
  const double bin = opt.schedule.bin_s;
  const double factor =
      opt.source.statistics == stats::Statistics::kSubPoisson ? opt.source.thinning_factor() : 1.0;

  ThetaPath theta_path(opt.theta, opt.seed, opt.schedule.duration_s);
  DetectionTimeSeries series;
  series.rows.reserve(bins);
  for (std::size_t i = 0; i < bins; ++i) {
    const double t = static_cast<double>(i) * bin;
    if (opt.scan.in_seam(t, bin)) continue;
    Row row;
    row.t = t;
    row.phi = phi_at(t, opt.scan);
    row.theta = theta_path.at(t);
    const DetectorFields fields = plan.evaluate(Bindings{row.phi, opt.psi, row.theta});
    row.i_alpha = channel_intensity(fields, 1);
    row.i_beta = channel_intensity(fields, 2);
    if (row.i_alpha < kDarkFloor * opt.i0) row.i_alpha = 0.0;
    if (row.i_beta < kDarkFloor * opt.i0) row.i_beta = 0.0;

    const stats::ExpectedCounts expected = stats::expected_bin_counts(
        row.i_alpha, row.i_beta, opt.i0, opt.source, opt.detector, opt.coincidence, bin);
    if (opt.mode == Mode::kAnalytic) {
      row.d1 = expected.d1;
      row.d2 = expected.d2;
      row.c12 = expected.c12;
    } else {
      const stats::BinCounts counts = stats::sample_bin(expected, opt.source.statistics, factor, opt.seed, i);
      row.d1 = static_cast<double>(counts.d1);
      row.d2 = static_cast<double>(counts.d2);
      row.c12 = static_cast<double>(counts.c12);
    }
    series.rows.push_back(row);
  }
  return series;
}

inline constexpr const char* kSeriesHeader = "t,phi,theta,I_alpha,I_beta,D1,D2,C12";

inline void write_csv(std::ostream& os, const DetectionTimeSeries& series,
                      std::span<const std::pair<std::string, std::string>> meta = {}) {
  using csv::format9;
  for (const auto& [k, v] : meta) os << "# " << k << '=' << v << '\n';
  os << kSeriesHeader << '\n';
  for (const auto& r : series.rows)
    os << format9(r.t) << ',' << format9(r.phi) << ',' << format9(r.theta) << ',' << format9(r.i_alpha) << ','
       << format9(r.i_beta) << ',' << format9(r.d1) << ',' << format9(r.d2) << ',' << format9(r.c12) << '\n';
}

/// Index ranges [first, last) of runs of rows whose spacing stays below
/// 1.5 bins, i.e. the stretches between dropped seams.
inline std::vector<std::pair<std::size_t, std::size_t>> contiguous_segments(std::span<const double> times,
                                                                            double bin_s) {
  std::vector<std::pair<std::size_t, std::size_t>> out;
  std::size_t first = 0;
  for (std::size_t i = 1; i <= times.size(); ++i) {
    if (i == times.size() || times[i] - times[i - 1] > 1.5 * bin_s) {
      if (i > first) out.emplace_back(first, i);
      first = i;
    }
  }
  return out;
}

}  // namespace fransonsim::experiment
