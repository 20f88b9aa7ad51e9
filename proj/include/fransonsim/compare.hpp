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

// Equivalence check between a compiled circuit and the closed-form model.
//
// A circuit's phase conventions (mirror signs, reflection phases, where the
// scan phases sit) may shift phi, psi and theta by constants, so the check
// first calibrates one offset per scan variable: a coarse pi/4 grid, then a
// shrinking-step pattern search. Errors are relative to full scale, 2 I0 for
// the output intensities and I0 for the coincidence.

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <span>
#include <string_view>
#include <vector>

#include "fransonsim/analytic.hpp"
#include "fransonsim/circuit.hpp"
#include "fransonsim/rng.hpp"

namespace fransonsim {

enum class ClosedForm {
  kAuto,
  kOutputs,      // I_alpha, I_beta of the modified scheme
  kCoincidence,  // R_AB of the original scheme
};

inline std::string_view to_string(ClosedForm m) {
  switch (m) {
    case ClosedForm::kAuto:
      return "auto";
    case ClosedForm::kOutputs:
      return "outputs";
    case ClosedForm::kCoincidence:
      return "coincidence";
  }
  return "?";
}

struct CompareOptions {
  std::size_t samples = 10000;
  std::uint64_t seed = 1;
  ClosedForm model = ClosedForm::kAuto;
  double tolerance = 1e-9;
};

struct CompareReport {
  ClosedForm model = ClosedForm::kOutputs;
  std::array<double, 3> offsets{};  // phi, psi, theta
  double i0 = 0.0;
  double max_error = 0.0;
  /// Original scheme only: largest change of the coincidence when theta is
  /// redrawn at fixed phi, psi.
  double theta_variation = 0.0;
  std::size_t samples = 0;
  bool pass = false;
};

/// True when some source reaches both D1 and D2, i.e. the parties meet on a
/// shared element before detection.
inline bool parties_interfere(const EvaluationPlan& plan) {
  const TransferMatrix m = plan.transfer_matrix(Bindings{0.3, 0.5, 0.7});
  int row1 = -1;
  int row2 = -1;
  for (std::size_t d = 0; d < plan.detectors().size(); ++d) {
    if (plan.detectors()[d].channel == 1 && row1 < 0) row1 = static_cast<int>(d);
    if (plan.detectors()[d].channel == 2 && row2 < 0) row2 = static_cast<int>(d);
  }
  if (row1 < 0 || row2 < 0) return false;
  auto reaches = [&](int det, std::size_t col) {
    return std::abs(m(2 * det, col)) > 1e-12 || std::abs(m(2 * det + 1, col)) > 1e-12;
  };
  for (std::size_t c = 0; c < m.cols; ++c)
    if (reaches(row1, c) && reaches(row2, c)) return true;
  return false;
}

namespace detail {

struct Triple {
  double phi, psi, theta;
};

inline std::vector<Triple> random_triples(std::size_t n, std::uint64_t seed, std::uint64_t stream) {
  std::vector<Triple> out;
  out.reserve(n);
  const double turn = 2.0 * std::numbers::pi;
  for (std::size_t k = 0; k < n; ++k) {
    CounterRng rng(seed, k, stream);
    out.push_back({turn * rng.uniform(), turn * rng.uniform(), turn * rng.uniform()});
  }
  return out;
}

class Comparator {
 public:
  Comparator(const EvaluationPlan& plan, ClosedForm model, double i0) : plan_(plan), model_(model), i0_(i0) {}

  double error(const Triple& p, const std::array<double, 3>& off) const {
    const auto out = plan_.evaluate(Bindings{p.phi + off[0], p.psi + off[1], p.theta + off[2]});
    if (model_ == ClosedForm::kOutputs) {
      const auto [a, b] = analytic::output_intensities(p.phi, p.psi, p.theta, i0_);
      const double e = std::max(std::abs(channel_intensity(out, 1) - a), std::abs(channel_intensity(out, 2) - b));
      return e / (2.0 * i0_);
    }
    return std::abs(coincidence(out) - analytic::coincidence_rate(p.phi, p.psi, i0_)) / i0_;
  }

  static double coincidence(const DetectorFields& out) {
    const JonesVector* a = channel_field(out, 1);
    const JonesVector* b = channel_field(out, 2);
    return a && b ? two_party_coincidence(*a, *b) : 0.0;
  }

  double cost(std::span<const Triple> pts, const std::array<double, 3>& off) const {
    double s = 0.0;
    for (const auto& p : pts) {
      const double e = error(p, off);
      s += e * e;
    }
    return s;
  }

 private:
  const EvaluationPlan& plan_;
  ClosedForm model_;
  double i0_;
};

}  // namespace detail

inline CompareReport compare_to_closed_form(const EvaluationPlan& plan, const CompareOptions& opt = {}) {
  CompareReport report;
  report.samples = opt.samples;
  report.model = opt.model == ClosedForm::kAuto
                     ? (parties_interfere(plan) ? ClosedForm::kOutputs : ClosedForm::kCoincidence)
                     : opt.model;

  {
    const auto out = plan.evaluate(Bindings{0.0, 0.0, 0.0});
    report.i0 = 0.5 * (channel_intensity(out, 1) + channel_intensity(out, 2));
  }
  if (!(report.i0 > 0.0)) {
    report.max_error = std::numeric_limits<double>::infinity();
    return report;
  }

  const detail::Comparator cmp(plan, report.model, report.i0);
  const std::array<bool, 3> free{plan.uses(ScanVar::kPhi), plan.uses(ScanVar::kPsi),
                                 plan.uses(ScanVar::kTheta) && report.model == ClosedForm::kOutputs};
  const auto calib = detail::random_triples(32, opt.seed, 101);

  // Coarse grid over multiples of pi/4.
  const double q = std::numbers::pi / 4.0;
  std::array<double, 3> best{};
  double best_cost = cmp.cost(calib, best);
  for (int a = 0; a < (free[0] ? 8 : 1); ++a)
    for (int b = 0; b < (free[1] ? 8 : 1); ++b)
      for (int c = 0; c < (free[2] ? 8 : 1); ++c) {
        const std::array<double, 3> off{a * q, b * q, c * q};
        const double cost = cmp.cost(calib, off);
        if (cost < best_cost) best_cost = cost, best = off;
      }

  // Pattern search refinement.
  for (double step = q / 2.0; step > 1e-14; step *= 0.5) {
    bool improved = true;
    while (improved) {
      improved = false;
      for (int v = 0; v < 3; ++v) {
        if (!free[v]) continue;
        for (double dir : {step, -step}) {
          auto trial = best;
          trial[v] += dir;
          const double cost = cmp.cost(calib, trial);
          if (cost < best_cost) best_cost = cost, best = trial, improved = true;
        }
      }
    }
  }
  for (auto& o : best) o = std::remainder(o, 2.0 * std::numbers::pi);
  report.offsets = best;

  const auto points = detail::random_triples(opt.samples, opt.seed, 102);
  for (const auto& p : points) report.max_error = std::max(report.max_error, cmp.error(p, best));

  if (report.model == ClosedForm::kCoincidence) {
    const auto thetas = detail::random_triples(opt.samples, opt.seed, 103);
    for (std::size_t k = 0; k < points.size(); ++k) {
      const auto& p = points[k];
      const double r1 = detail::Comparator::coincidence(plan.evaluate(Bindings{p.phi + best[0], p.psi + best[1], p.theta}));
      const double r2 =
          detail::Comparator::coincidence(plan.evaluate(Bindings{p.phi + best[0], p.psi + best[1], thetas[k].theta}));
      report.theta_variation = std::max(report.theta_variation, std::abs(r1 - r2));
    }
  }
  report.pass = report.max_error <= opt.tolerance &&
                (report.model != ClosedForm::kCoincidence || report.theta_variation <= opt.tolerance);
  return report;
}

}  // namespace fransonsim
