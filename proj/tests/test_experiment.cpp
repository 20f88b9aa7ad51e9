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

#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>

#include <gtest/gtest.h>

#include "fransonsim/analytic.hpp"
#include "fransonsim/experiment.hpp"

namespace {

using namespace fransonsim;
using namespace fransonsim::experiment;
constexpr double kPi = std::numbers::pi;

const EvaluationPlan& modified_plan() {
  static const EvaluationPlan plan = [] {
    std::ifstream in(std::string(FRANSONSIM_CIRCUIT_DIR) + "/franson_modified.circuit");
    std::ostringstream ss;
    ss << in.rdbuf();
    return load_plan(ss.str());
  }();
  return plan;
}

RunOptions analytic_options(ThetaModel theta) {
  RunOptions opt;
  opt.mode = Mode::kAnalytic;
  opt.theta = theta;
  return opt;
}

TEST(PhiAt, TriangleExamples) {
  const ScanProfile p;
  EXPECT_EQ(phi_at(0.0, p), 0.0);
  EXPECT_NEAR(phi_at(500.0, p), 10 * kPi, 1e-12);
  EXPECT_NEAR(phi_at(1000.0, p), 0.0, 1e-12);
  EXPECT_NEAR(phi_at(250.0, p), phi_at(750.0, p), 1e-12);
  EXPECT_THROW(phi_at(-1.0, p), std::invalid_argument);
}

TEST(ScanProfile, VoltageAndFringeGeometry) {
  const ScanProfile p;
  EXPECT_EQ(p.voltage_at(0.0), 0.0);
  EXPECT_EQ(p.voltage_at(500.0), 100.0);
  EXPECT_NEAR(p.nm_per_bin(1.0), 5.32, 1e-12);
  EXPECT_NEAR(p.fringe_bins(1.0), 100.0, 1e-9);
}

TEST(ScanProfile, SeamKeeps455PerHalfScan) {
  const ScanProfile p;
  int kept = 0;
  for (int i = 0; i < 500; ++i) kept += !p.in_seam(i, 1.0);
  EXPECT_EQ(kept, 455);
  EXPECT_TRUE(p.in_seam(0.0, 1.0));
  EXPECT_TRUE(p.in_seam(22.0, 1.0));
  EXPECT_FALSE(p.in_seam(23.0, 1.0));
  EXPECT_FALSE(p.in_seam(477.0, 1.0));
  EXPECT_TRUE(p.in_seam(478.0, 1.0));
}

TEST(ThetaAt, ConstantAndLinear) {
  EXPECT_EQ(theta_at(123.0, ThetaModel::constant(kPi / 2), 1), kPi / 2);
  EXPECT_NEAR(theta_at(2000.0, ThetaModel::linear(4 * kPi / 4000.0), 1), 2 * kPi, 1e-12);
}

TEST(ThetaAt, DriftIsReproducibleAndSeedDependent) {
  const auto m = ThetaModel::drift(1.0, 300.0);
  EXPECT_EQ(theta_at(777.0, m, 5), theta_at(777.0, m, 5));
  EXPECT_NE(theta_at(777.0, m, 5), theta_at(777.0, m, 6));
  ThetaPath path(m, 5, 1000.0);
  EXPECT_EQ(path.at(777.0), theta_at(777.0, m, 5));
}

TEST(ThetaAt, DriftStationaryVarianceIsSigmaSquared) {
  const auto m = ThetaModel::drift(0.7, 50.0);
  const int runs = 4000;
  double s = 0.0, s2 = 0.0;
  for (int seed = 0; seed < runs; ++seed) {
    const double x = theta_at(1500.0, m, static_cast<std::uint64_t>(seed));
    s += x;
    s2 += x * x;
  }
  const double mean = s / runs;
  const double var = s2 / runs - mean * mean;
  EXPECT_NEAR(var, 0.49, 0.049);
}

TEST(ThetaAt, DriftIncrementsAreIndependent) {
  const auto m = ThetaModel::drift(1.0, 300.0);
  const int runs = 4000;
  double sxy = 0.0, sx = 0.0, sy = 0.0, sxx = 0.0, syy = 0.0;
  for (int seed = 0; seed < runs; ++seed) {
    ThetaPath p(m, static_cast<std::uint64_t>(seed), 200.0);
    // OU increments over disjoint intervals are independent once the
    // mean-reversion drift is removed.
    const double a = std::exp(-10.0 / 300.0);
    const double x = p.at(100.0) - a * p.at(90.0);
    const double y = p.at(200.0) - a * p.at(190.0);
    sxy += x * y;
    sx += x;
    sy += y;
    sxx += x * x;
    syy += y * y;
  }
  const double cov = sxy / runs - (sx / runs) * (sy / runs);
  const double corr = cov / std::sqrt((sxx / runs - sx * sx / runs / runs) * (syy / runs - sy * sy / runs / runs));
  EXPECT_LT(std::abs(corr), 4.0 / std::sqrt(runs));
}

TEST(Run, ZeroDurationIsEmpty) {
  auto opt = analytic_options(ThetaModel::constant(0.0));
  opt.schedule.duration_s = 0.0;
  EXPECT_TRUE(run(modified_plan(), opt).rows.empty());
}

TEST(Run, DefaultsGive3640RowsInEightHalfScans) {
  RunOptions opt;
  opt.seed = 3;
  const auto series = run(modified_plan(), opt);
  EXPECT_EQ(series.rows.size(), 3640u);
  for (std::size_t i = 1; i < series.rows.size(); ++i) EXPECT_LT(series.rows[i - 1].t, series.rows[i].t);
  const auto segments = contiguous_segments(series.column(&Row::t), 1.0);
  ASSERT_EQ(segments.size(), 8u);
  for (const auto& [a, b] : segments) EXPECT_EQ(b - a, 455u);
}

TEST(Run, NoiseFreeMatchesClosedFormAtEveryBin) {
  auto opt = analytic_options(ThetaModel::drift(1.0, 300.0));
  opt.seed = 17;
  const auto series = run(modified_plan(), opt);
  for (const auto& r : series.rows) {
    const auto o = analytic::output_intensities(r.phi, 0.0, r.theta, 1.0);
    EXPECT_NEAR(r.i_alpha, o.alpha, 1e-9 * 2.0);
    EXPECT_NEAR(r.i_beta, o.beta, 1e-9 * 2.0);
  }
}

TEST(Run, AnalyticThetaZeroGivesUnitCoincidenceVisibility) {
  auto opt = analytic_options(ThetaModel::constant(0.0));
  opt.coincidence.accidental_correction = true;
  const auto series = run(modified_plan(), opt);
  EXPECT_NEAR(analytic::visibility(series.column(&Row::c12)), 1.0, 1e-9);
}

TEST(Run, SeededReplayIsBitwiseIdentical) {
  RunOptions opt;
  opt.seed = 99;
  opt.schedule.duration_s = 1000.0;
  const auto a = run(modified_plan(), opt);
  const auto b = run(modified_plan(), opt);
  EXPECT_EQ(a.rows, b.rows);
  opt.seed = 100;
  EXPECT_NE(run(modified_plan(), opt).rows, a.rows);
}

TEST(Run, PiShiftSwapsDetectors) {
  const auto zero = run(modified_plan(), analytic_options(ThetaModel::constant(0.0)));
  const auto pi = run(modified_plan(), analytic_options(ThetaModel::constant(kPi)));
  ASSERT_EQ(zero.rows.size(), pi.rows.size());
  for (std::size_t i = 0; i < zero.rows.size(); ++i) {
    EXPECT_EQ(csv::format9(zero.rows[i].d1), csv::format9(pi.rows[i].d2));
    EXPECT_EQ(csv::format9(zero.rows[i].d2), csv::format9(pi.rows[i].d1));
    EXPECT_EQ(csv::format9(zero.rows[i].c12), csv::format9(pi.rows[i].c12));
  }
}

TEST(WriteCsv, HeaderMetadataAndRows) {
  auto opt = analytic_options(ThetaModel::constant(0.0));
  opt.schedule.duration_s = 30.0;
  const auto series = run(modified_plan(), opt);
  std::ostringstream os;
  const std::vector<std::pair<std::string, std::string>> meta{{"seed", "1"}};
  write_csv(os, series, meta);
  std::istringstream in(os.str());
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, "# seed=1");
  std::getline(in, line);
  EXPECT_EQ(line, "t,phi,theta,I_alpha,I_beta,D1,D2,C12");
  int rows = 0;
  while (std::getline(in, line)) ++rows;
  EXPECT_EQ(rows, 7);
}

}  // namespace
