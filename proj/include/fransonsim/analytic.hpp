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

// Closed-form model of the two Franson schemes.
//
// Phases: phi is Bob's MZI phase, psi Alice's, theta the global phase between
// the two parties' outputs before the final beam splitter.
//
//   original scheme:  R_AB    = I0/2 (1 + cos(phi - psi))
//   modified scheme:  I_alpha = I0/2 (2 - cos(theta) - cos(phi - psi - theta))
//                     I_beta  = I0/2 (2 + cos(theta) + cos(phi - psi - theta))

#pragma once

#include <algorithm>
#include <cmath>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "fransonsim/csv.hpp"

namespace fransonsim::analytic {

struct AnalyticPoint {
  double phi = 0.0;
  double psi = 0.0;
  double theta = 0.0;
  double i0 = 1.0;
  double i_alpha = 0.0;
  double i_beta = 0.0;
  double r_ab = 0.0;
  double product = 0.0;
};

/// Coincidence rate of the original scheme. There is deliberately no theta
/// argument: the global phase drops out.
inline double coincidence_rate(double phi, double psi, double i0 = 1.0) {
  return 0.5 * i0 * (1.0 + std::cos(phi - psi));
}

struct OutputPair {
  double alpha = 0.0;
  double beta = 0.0;
};

inline OutputPair output_intensities(double phi, double psi, double theta, double i0 = 1.0) {
  const double m = std::cos(theta) + std::cos(phi - psi - theta);
  return {0.5 * i0 * (2.0 - m), 0.5 * i0 * (2.0 + m)};
}

/// Visibility of I_alpha (or I_beta) over a full phi sweep at fixed theta.
inline double singles_visibility(double theta) { return 1.0 / (2.0 - std::cos(theta)); }

/// Visibility of I_alpha * I_beta over a full phi sweep at fixed theta.
/// The product is I0^2/4 (4 - (cos theta + cos x)^2); its maximum I0^2 is
/// reached where the bracket vanishes, its minimum where |cos x| = 1 matches
/// the sign of cos theta.
inline double product_visibility(double theta) {
  const double a = 1.0 + std::abs(std::cos(theta));
  return a * a / (8.0 - a * a);
}

/// Per-point contrast |I_alpha - I_beta| / (I_alpha + I_beta).
inline double point_contrast(double i_alpha, double i_beta) {
  const double s = i_alpha + i_beta;
  return s > 0.0 ? std::abs(i_alpha - i_beta) / s : 0.0;
}

/// (max - min) / (max + min); zero for an empty or all-zero trace.
inline double visibility(std::span<const double> trace) {
  if (trace.empty()) return 0.0;
  double lo = trace[0];
  double hi = trace[0];
  for (double x : trace) {
    lo = std::min(lo, x);
    hi = std::max(hi, x);
  }
  return hi + lo == 0.0 ? 0.0 : (hi - lo) / (hi + lo);
}

inline AnalyticPoint evaluate(double phi, double psi, double theta, double i0 = 1.0) {
  const auto [a, b] = output_intensities(phi, psi, theta, i0);
  return {phi, psi, theta, i0, a, b, coincidence_rate(phi, psi, i0), a * b};
}

/// Inclusive arithmetic grid start, start+step, ... <= stop. A tolerance of
/// step*1e-9 keeps `0:0.1:1` from losing its endpoint to round-off.
struct Grid {
  double start = 0.0;
  double step = 1.0;
  double stop = 0.0;

  static Grid single(double x) { return {x, 1.0, x}; }

  std::vector<double> values() const {
    std::vector<double> out;
    if (!(step > 0.0) || stop < start) return out;
    const double n = std::floor((stop - start) / step + 1e-9);
    for (long k = 0; k <= static_cast<long>(n); ++k) out.push_back(start + static_cast<double>(k) * step);
    return out;
  }
};

/// Row per grid point, theta slowest and phi fastest.
inline std::vector<AnalyticPoint> sweep(const Grid& phi, const Grid& psi, const Grid& theta, double i0 = 1.0) {
  std::vector<AnalyticPoint> rows;
  const auto phis = phi.values();
  const auto psis = psi.values();
  for (double t : theta.values())
    for (double s : psis)
      for (double p : phis) rows.push_back(evaluate(p, s, t, i0));
  return rows;
}

inline constexpr const char* kSweepHeader = "phi,psi,theta,I_alpha,I_beta,R_AB,product";

inline void write_sweep_csv(std::ostream& os, std::span<const AnalyticPoint> rows) {
  using csv::format9;
  os << kSweepHeader << '\n';
  for (const auto& r : rows)
    os << format9(r.phi) << ',' << format9(r.psi) << ',' << format9(r.theta) << ',' << format9(r.i_alpha) << ','
       << format9(r.i_beta) << ',' << format9(r.r_ab) << ',' << format9(r.product) << '\n';
}

}  // namespace fransonsim::analytic
