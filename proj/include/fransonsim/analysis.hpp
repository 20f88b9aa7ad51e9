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

// Fringe analysis on detection time series: sliding-window visibility,
// product traces, spectral fringe period, and harmonic-fit visibility.

#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <numbers>
#include <span>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

#include "fransonsim/analytic.hpp"

namespace fransonsim::analysis {

struct VisibilityRow {
  double t = 0.0;
  double v = 0.0;
  std::size_t window = 0;
};

using VisibilityTrace = std::vector<VisibilityRow>;

/// V = (max - min) / (max + min) over every `window`-long run of consecutive
/// samples. Each row carries the time of the window's middle sample.
inline VisibilityTrace windowed_visibility(std::span<const double> times, std::span<const double> values,
                                           std::size_t window) {
  if (times.size() != values.size()) throw std::invalid_argument("time and value columns differ in length");
  if (window < 2) throw std::invalid_argument("window must be at least 2 samples");
  if (values.size() < window) throw std::length_error("trace shorter than window");
  VisibilityTrace out;
  out.reserve(values.size() - window + 1);
  for (std::size_t i = 0; i + window <= values.size(); ++i)
    out.push_back({times[i + (window - 1) / 2], analytic::visibility(values.subspan(i, window)), window});
  return out;
}

/// Same, but windows never straddle a gap wider than 1.5 bins. Segments
/// shorter than the window contribute nothing.
inline VisibilityTrace windowed_visibility_segmented(std::span<const double> times, std::span<const double> values,
                                                     std::size_t window, double bin_s) {
  if (times.size() != values.size()) throw std::invalid_argument("time and value columns differ in length");
  if (values.size() < window) throw std::length_error("trace shorter than window");
  VisibilityTrace out;
  std::size_t first = 0;
  for (std::size_t i = 1; i <= times.size(); ++i) {
    if (i == times.size() || times[i] - times[i - 1] > 1.5 * bin_s) {
      if (i - first >= window) {
        auto part = windowed_visibility(times.subspan(first, i - first), values.subspan(first, i - first), window);
        out.insert(out.end(), part.begin(), part.end());
      }
      first = i;
    }
  }
  return out;
}

inline std::vector<double> product_trace(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw std::invalid_argument("product_trace: length mismatch");
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] * b[i];
  return out;
}

namespace detail {

inline void fft(std::vector<std::complex<double>>& x) {
  const std::size_t n = x.size();
  for (std::size_t i = 1, j = 0; i < n; ++i) {
    std::size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(x[i], x[j]);
  }
  for (std::size_t len = 2; len <= n; len <<= 1) {
    const double ang = -2.0 * std::numbers::pi / static_cast<double>(len);
    for (std::size_t i = 0; i < n; i += len)
      for (std::size_t k = 0; k < len / 2; ++k) {
        const std::complex<double> w = std::polar(1.0, ang * static_cast<double>(k));
        const auto u = x[i + k];
        const auto v = x[i + k + len / 2] * w;
        x[i + k] = u + v;
        x[i + k + len / 2] = u - v;
      }
  }
}

}  // namespace detail

/// Dominant fringe period of `trace`, in nm of displacement. Hann-windowed,
/// zero-padded spectrum of the mean-removed trace, with a parabolic fit to
/// the log magnitude around the peak. Throws std::domain_error when the
/// trace is flat.
inline double fringe_period(std::span<const double> trace, double nm_per_bin) {
  const std::size_t n = trace.size();
  if (n < 4) throw std::domain_error("no dominant peak: trace too short");
  double mean = 0.0;
  for (double x : trace) mean += x;
  mean /= static_cast<double>(n);
  double spread = 0.0;
  double scale = std::abs(mean);
  for (double x : trace) {
    spread = std::max(spread, std::abs(x - mean));
    scale = std::max(scale, std::abs(x));
  }
  if (!(spread > 1e-12 * std::max(scale, 1e-300))) throw std::domain_error("no dominant peak: flat trace");

  std::size_t m = 1;
  while (m < 16 * n) m <<= 1;
  std::vector<std::complex<double>> buf(m);
  for (std::size_t i = 0; i < n; ++i) {
    const double hann = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * static_cast<double>(i) / static_cast<double>(n - 1));
    buf[i] = (trace[i] - mean) * hann;
  }
  detail::fft(buf);

  std::size_t peak = 1;
  for (std::size_t k = 1; k < m / 2; ++k)
    if (std::abs(buf[k]) > std::abs(buf[peak])) peak = k;
  double k_fit = static_cast<double>(peak);
  if (peak > 1 && peak + 1 < m / 2) {
    const double a = std::log(std::abs(buf[peak - 1]) + 1e-300);
    const double b = std::log(std::abs(buf[peak]) + 1e-300);
    const double c = std::log(std::abs(buf[peak + 1]) + 1e-300);
    const double denom = a - 2.0 * b + c;
    if (denom < 0.0) k_fit += 0.5 * (a - c) / denom;
  }
  return static_cast<double>(m) / k_fit * nm_per_bin;
}

/// Least-squares fit of counts against phase with harmonics up to `order`,
/// returning the visibility of the fitted curve over a full phase turn. Noise
/// in the extrema of raw counts inflates max/min visibility; the fit does not.
/// The fitted curve is clipped at zero, as counts are.
inline double fitted_visibility(std::span<const double> phases, std::span<const double> values, int order = 2) {
  if (phases.size() != values.size()) throw std::invalid_argument("phase and value columns differ in length");
  const auto cols = static_cast<Eigen::Index>(2 * order + 1);
  if (static_cast<Eigen::Index>(values.size()) < cols) throw std::length_error("too few samples for the fit");
  Eigen::MatrixXd design(static_cast<Eigen::Index>(values.size()), cols);
  Eigen::VectorXd y(static_cast<Eigen::Index>(values.size()));
  auto basis = [order](double phase, auto&& row) {
    row(0) = 1.0;
    for (int h = 1; h <= order; ++h) {
      row(2 * h - 1) = std::cos(h * phase);
      row(2 * h) = std::sin(h * phase);
    }
  };
  for (std::size_t i = 0; i < values.size(); ++i) {
    basis(phases[i], design.row(static_cast<Eigen::Index>(i)));
    y(static_cast<Eigen::Index>(i)) = values[i];
  }
  const Eigen::VectorXd coef = design.colPivHouseholderQr().solve(y);
  constexpr int kGrid = 4096;
  std::vector<double> curve(kGrid);
  Eigen::RowVectorXd b(cols);
  for (int k = 0; k < kGrid; ++k) {
    basis(2.0 * std::numbers::pi * k / kGrid, b);
    curve[k] = std::max(0.0, b.dot(coef));
  }
  return analytic::visibility(curve);
}

}  // namespace fransonsim::analysis
