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

// Photon statistics of the attenuated source and the click statistics of
// non-number-resolving detectors with dark counts and a coincidence window.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>

#include <boost/random/binomial_distribution.hpp>
#include <boost/random/poisson_distribution.hpp>

#include "fransonsim/rng.hpp"

namespace fransonsim::stats {

enum class Statistics { kPoisson, kSubPoisson };

struct SourceModel {
  double mean_photon_number = 0.04;  // per detection gate
  double singles_rate = 1.0e4;       // single-photon events per second
  double pair_fraction = 0.01;       // pair events / single events
  double triple_fraction = 0.01;     // triple events / pair events
  Statistics statistics = Statistics::kSubPoisson;
  /// Thinning factor in (0, 1]. Unset: tuned so the photon-number
  /// distribution's P(2)/P(1) equals pair_fraction.
  std::optional<double> subpoisson_factor;

  void check() const {
    if (!(mean_photon_number >= 0.0)) throw std::invalid_argument("mean photon number must be >= 0");
    if (!(singles_rate >= 0.0)) throw std::invalid_argument("singles rate must be >= 0");
    if (!(pair_fraction >= 0.0 && pair_fraction <= 1.0)) throw std::invalid_argument("pair fraction outside [0, 1]");
    if (!(triple_fraction >= 0.0 && triple_fraction <= 1.0))
      throw std::invalid_argument("triple fraction outside [0, 1]");
    if (subpoisson_factor && !(*subpoisson_factor > 0.0 && *subpoisson_factor <= 1.0))
      throw std::invalid_argument("sub-Poisson factor outside (0, 1]");
  }

  double thinning_factor() const;
};

struct DetectorModel {
  double dark_rate = 27.0;  // counts/s
  double efficiency = 1.0;
  double pulse_width_ns = 10.0;
  bool number_resolving = false;

  void check() const {
    if (!(dark_rate >= 0.0)) throw std::invalid_argument("dark rate must be >= 0");
    if (!(efficiency >= 0.0 && efficiency <= 1.0)) throw std::invalid_argument("efficiency outside [0, 1]");
    if (number_resolving) throw std::invalid_argument("number-resolving detectors are not modeled");
  }
};

struct CoincidenceModel {
  double window_ns = 10.0;
  bool accidental_correction = false;  // true: expected counts exclude accidentals

  void check() const {
    if (!(window_ns > 0.0)) throw std::invalid_argument("coincidence window must be > 0");
  }
};

/// Probability that a non-number-resolving detector clicks when `mean_photons`
/// photons are expected in the gate.
inline double click_probability(double mean_photons, double efficiency = 1.0) {
  if (!(mean_photons >= 0.0)) throw std::invalid_argument("expected photon number must be >= 0");
  return -std::expm1(-efficiency * mean_photons);
}

inline double poisson_pmf(int n, double mu) {
  if (n < 0) return 0.0;
  if (mu == 0.0) return n == 0 ? 1.0 : 0.0;
  return std::exp(n * std::log(mu) - mu - std::lgamma(n + 1.0));
}

/// Photon-number pmf after thinning the excess over one photon: an n-photon
/// gate keeps 1 + Binomial(n - 1, f) photons.
inline double thinned_pmf(int k, double mu, double f) {
  if (k <= 0) return k == 0 ? poisson_pmf(0, mu) : 0.0;
  if (f >= 1.0) return poisson_pmf(k, mu);
  double total = 0.0;
  for (int n = k; n < k + 400; ++n) {
    const double pn = poisson_pmf(n, mu);
    if (pn == 0.0 && n > mu) break;
    const int m = n - 1;
    const int j = k - 1;
    const double log_binom = std::lgamma(m + 1.0) - std::lgamma(j + 1.0) - std::lgamma(m - j + 1.0);
    const double term = std::exp(log_binom + j * std::log(f) + (m - j) * std::log1p(-f));
    total += pn * term;
  }
  return total;
}

/// Thinning factor giving P(2)/P(1) = `pair_ratio` for mean `mu`. Throws when
/// the ratio exceeds the Poisson value (no sub-Poisson solution).
inline double tune_thinning_factor(double mu, double pair_ratio) {
  auto ratio = [&](double f) { return thinned_pmf(2, mu, f) / thinned_pmf(1, mu, f); };
  if (!(mu > 0.0)) throw std::invalid_argument("mean photon number must be > 0");
  if (pair_ratio <= 0.0) throw std::invalid_argument("pair ratio must be > 0");
  if (pair_ratio > ratio(1.0)) throw std::invalid_argument("pair ratio above the Poisson value");
  double lo = 0.0;
  double hi = 1.0;
  for (int it = 0; it < 200 && hi - lo > 1e-15; ++it) {
    const double mid = 0.5 * (lo + hi);
    (ratio(mid) < pair_ratio ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

inline double SourceModel::thinning_factor() const {
  if (subpoisson_factor) return *subpoisson_factor;
  return tune_thinning_factor(mean_photon_number, pair_fraction);
}

inline std::int64_t sample_poisson(CounterRng& rng, double mean) {
  if (mean <= 0.0) return 0;
  return boost::random::poisson_distribution<std::int64_t, double>(mean)(rng);
}

inline std::int64_t sample_binomial(CounterRng& rng, std::int64_t trials, double p) {
  if (trials <= 0 || p <= 0.0) return 0;
  if (p >= 1.0) return trials;
  return boost::random::binomial_distribution<std::int64_t, double>(trials, p)(rng);
}

/// Count with mean `mean` and Fano factor close to `fano` < 1: binomial
/// thinning of the fixed count ceil(mean / (1 - fano)). The Fano factor is
/// exact when that quotient is integral and slightly above `fano` otherwise.
inline std::int64_t sample_sub_poisson(CounterRng& rng, double mean, double fano) {
  if (mean <= 0.0) return 0;
  if (fano >= 1.0) return sample_poisson(rng, mean);
  const auto trials = static_cast<std::int64_t>(std::ceil(mean / (1.0 - fano) - 1e-12));
  return sample_binomial(rng, std::max<std::int64_t>(trials, 1), mean / static_cast<double>(std::max<std::int64_t>(trials, 1)));
}

/// Photons in one detection gate.
inline std::int64_t sample_photon_number(const SourceModel& source, double factor, std::uint64_t seed,
                                         std::uint64_t gate) {
  CounterRng rng(seed, gate, 7);
  std::int64_t n = sample_poisson(rng, source.mean_photon_number);
  if (source.statistics == Statistics::kSubPoisson && n >= 2) n = 1 + sample_binomial(rng, n - 1, factor);
  return n;
}

struct SourceEvents {
  std::int64_t singles = 0;
  std::int64_t pairs = 0;
  std::int64_t triples = 0;
};

/// Emission events in one acquisition bin, split by photon number.
inline SourceEvents sample_source_events(const SourceModel& source, double bin_s, std::uint64_t seed,
                                         std::uint64_t bin_index) {
  const double singles = source.singles_rate * bin_s;
  const double pairs = singles * source.pair_fraction;
  CounterRng r1(seed, bin_index, 11);
  CounterRng r2(seed, bin_index, 12);
  CounterRng r3(seed, bin_index, 13);
  return {sample_poisson(r1, singles), sample_poisson(r2, pairs), sample_poisson(r3, pairs * source.triple_fraction)};
}

struct ExpectedCounts {
  double d1 = 0.0;
  double d2 = 0.0;
  double c12 = 0.0;
  double accidentals = 0.0;  // included in c12 unless corrected
};

/// Accidental coincidences 2 R1 R2 tau over one bin, from per-bin means.
inline double accidental_counts(double lambda1, double lambda2, double window_ns, double bin_s) {
  if (bin_s <= 0.0) return 0.0;
  return 2.0 * lambda1 * lambda2 * window_ns * 1e-9 / bin_s;
}

/// Mean counts per bin at D1, D2, and in coincidence, for output intensities
/// `i_alpha`, `i_beta` whose sum must equal 2 I0.
inline ExpectedCounts expected_bin_counts(double i_alpha, double i_beta, double i0, const SourceModel& source,
                                          const DetectorModel& det, const CoincidenceModel& coinc, double bin_s) {
  const double scale = std::max(1.0, std::abs(2.0 * i0));
  if (!(std::abs(i_alpha + i_beta - 2.0 * i0) <= 1e-9 * scale) || i_alpha < 0.0 || i_beta < 0.0)
    throw std::domain_error("inconsistent intensities: I_alpha + I_beta = " + std::to_string(i_alpha + i_beta) +
                            ", 2 I0 = " + std::to_string(2.0 * i0));
  const double frac_a = i0 > 0.0 ? i_alpha / (2.0 * i0) : 0.0;
  const double frac_b = i0 > 0.0 ? i_beta / (2.0 * i0) : 0.0;
  const double norm_product = i0 > 0.0 ? i_alpha * i_beta / (i0 * i0) : 0.0;
  const double r1_bin = source.singles_rate * bin_s;

  ExpectedCounts out;
  out.d1 = r1_bin * frac_a * det.efficiency + det.dark_rate * bin_s;
  out.d2 = r1_bin * frac_b * det.efficiency + det.dark_rate * bin_s;
  out.accidentals = accidental_counts(out.d1, out.d2, coinc.window_ns, bin_s);
  out.c12 = source.pair_fraction * r1_bin * norm_product * det.efficiency * det.efficiency;
  if (!coinc.accidental_correction) out.c12 += out.accidentals;
  return out;
}

struct BinCounts {
  std::int64_t d1 = 0;
  std::int64_t d2 = 0;
  std::int64_t c12 = 0;
};

/// Draws one bin. Singles are Poisson; coincidences are Poisson or, in
/// sub-Poisson mode, have Fano factor `factor`. Streams are keyed by
/// (seed, bin_index, channel).
inline BinCounts sample_bin(const ExpectedCounts& expected, Statistics statistics, double factor,
                            std::uint64_t seed, std::uint64_t bin_index) {
  CounterRng r1(seed, bin_index, 1);
  CounterRng r2(seed, bin_index, 2);
  CounterRng r12(seed, bin_index, 3);
  BinCounts out;
  out.d1 = sample_poisson(r1, expected.d1);
  out.d2 = sample_poisson(r2, expected.d2);
  out.c12 = statistics == Statistics::kSubPoisson ? sample_sub_poisson(r12, expected.c12, factor)
                                                  : sample_poisson(r12, expected.c12);
  return out;
}

}  // namespace fransonsim::stats
