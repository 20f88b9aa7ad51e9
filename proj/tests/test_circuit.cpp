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
#include <random>
#include <set>
#include <sstream>
#include <string>

#include <gtest/gtest.h>

#include "fransonsim/analytic.hpp"
#include "fransonsim/circuit.hpp"

namespace {

using namespace fransonsim;
constexpr double kPi = std::numbers::pi;

std::string slurp(const std::string& path) {
  std::ifstream in(path);
  EXPECT_TRUE(in) << path;
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string builtin(const std::string& name) { return slurp(std::string(FRANSONSIM_CIRCUIT_DIR) + "/" + name); }
std::string data(const std::string& name) { return slurp(std::string(FRANSONSIM_TEST_DATA) + "/" + name); }

ErrorCode parse_error(const std::string& text) {
  try {
    parse(text);
  } catch (const CircuitError& e) {
    return e.code();
  }
  ADD_FAILURE() << "no error for:\n" << text;
  return ErrorCode::kSyntax;
}

bool has_violation(const ValidationReport& r, ErrorCode code, const std::string& subject) {
  for (const auto& v : r.violations)
    if (v.code == code && v.subject == subject) return true;
  return false;
}

const char* kPassThrough =
    "source s { wavelength = 532nm, polarization = 30deg, intensity = 1.5 }\n"
    "detector d : SPCM { channel = 1 }\n"
    "connect s.out -> d.in\n";

TEST(Parse, EmptyInputHasNoSource) {
  EXPECT_EQ(parse_error(""), ErrorCode::kNoSource);
  EXPECT_EQ(parse_error("# only a comment\n\n"), ErrorCode::kNoSource);
}

TEST(Parse, ErrorsAreDistinct) {
  EXPECT_EQ(parse_error("source s\nelement x : LENS\n"), ErrorCode::kUnknownKind);
  EXPECT_EQ(parse_error("source s\nelement s : BS\n"), ErrorCode::kDuplicateName);
  EXPECT_EQ(parse_error("source s { color = 3 }\n"), ErrorCode::kUnknownParameter);
  EXPECT_EQ(parse_error("source s\ndetector d : SPCM\nconnect s.left -> d.in\n"), ErrorCode::kUnknownPort);
  EXPECT_EQ(parse_error("source s\nconnect s.out -> nowhere.in\n"), ErrorCode::kUnknownPort);
  EXPECT_EQ(parse_error("source s {\n"), ErrorCode::kSyntax);
  EXPECT_EQ(parse_error("source s { intensity = 1.2.3 }\n"), ErrorCode::kSyntax);
  EXPECT_EQ(parse_error("teleport s\n"), ErrorCode::kSyntax);
}

TEST(Parse, SyntaxErrorReportsLineAndColumn) {
  try {
    parse("source s\n\nelement b : BS { = 3 }\n");
    FAIL();
  } catch (const CircuitError& e) {
    EXPECT_EQ(e.code(), ErrorCode::kSyntax);
    EXPECT_EQ(e.line(), 3);
    EXPECT_EQ(e.column(), 18);
    EXPECT_NE(std::string(e.what()).find("3:18"), std::string::npos) << e.what();
  }
}

TEST(Parse, UnitsConvert) {
  const auto spec = parse(
      "source s { wavelength = 800nm, polarization = 90deg }\n"
      "element h : HWP { angle = 22.5deg }\n"
      "element p : PHASE { phi = -0.5, scope = V }\n");
  const auto src = spec.sources().at(0);
  EXPECT_EQ(src.wavelength_nm, 800.0);
  EXPECT_NEAR(src.polarization, kPi / 2, 1e-15);
  EXPECT_NEAR(spec.find("h")->number("angle", 0.0), kPi / 8, 1e-15);
  EXPECT_EQ(spec.find("p")->number("phi", 0.0), -0.5);
  EXPECT_EQ(std::get<PhaseScope>(*spec.find("p")->param("scope")), PhaseScope::kVOnly);
}

TEST(Parse, ForwardReferencesAndComments) {
  const auto spec = parse(
      "connect s.out -> d.in   # wire before declarations\n"
      "detector d : SPCM { channel = 2 }\n"
      "source s\n");
  ASSERT_EQ(spec.connections.size(), 1u);
  EXPECT_EQ(spec.detectors().at(0).channel, 2);
}

TEST(Parse, ModifiedCircuitHasTwoPartiesAndScanBindings) {
  const auto spec = parse(builtin("franson_modified.circuit"));
  EXPECT_EQ(spec.detectors().size(), 4u);
  int hwp = 0, pbs = 0, bs = 0;
  for (const auto& e : spec.elements) {
    hwp += e.kind == ElementKind::kHWP;
    pbs += e.kind == ElementKind::kPBS;
    bs += e.kind == ElementKind::kBS;
  }
  EXPECT_EQ(hwp, 2);
  EXPECT_EQ(pbs, 2);
  EXPECT_EQ(bs, 3);
  const auto bindings = spec.scan_bindings();
  ASSERT_EQ(bindings.size(), 3u);
}

class Corpus : public ::testing::TestWithParam<const char*> {};

TEST_P(Corpus, RoundTripIsExact) {
  const auto once = parse(builtin(GetParam()));
  const std::string text = serialize(once);
  const auto twice = parse(text);
  EXPECT_EQ(once, twice);
  EXPECT_EQ(serialize(twice), text);
}

TEST_P(Corpus, Validates) {
  const auto report = validate(parse(builtin(GetParam())));
  EXPECT_TRUE(report.ok());
  EXPECT_LE(report.isometry_error, 1e-10);
}

TEST_P(Corpus, EvaluationIsDeterministic) {
  const auto plan = load_plan(builtin(GetParam()));
  const Bindings b{0.3, -0.4, 1.1};
  const auto f1 = plan.evaluate(b);
  const auto f2 = plan.evaluate(b);
  ASSERT_EQ(f1.size(), f2.size());
  for (std::size_t i = 0; i < f1.size(); ++i) EXPECT_EQ(f1[i].field, f2[i].field);
}

TEST_P(Corpus, PreservesTotalIntensity) {
  const auto plan = load_plan(builtin(GetParam()));
  const auto spec = parse(builtin(GetParam()));
  double source_total = 0.0;
  for (const auto& s : spec.sources()) source_total += s.intensity;
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> u(-kPi, kPi);
  for (int k = 0; k < 1000; ++k) {
    double total = 0.0;
    for (const auto& f : plan.evaluate(Bindings{u(rng), u(rng), u(rng)})) total += intensity(f.field);
    EXPECT_NEAR(total, source_total, 1e-12);
  }
}

INSTANTIATE_TEST_SUITE_P(Builtin, Corpus, ::testing::Values("franson_modified.circuit", "franson_original.circuit"));

TEST(Serialize, CanonicalForm) {
  const auto spec = parse("source   s{intensity=1.5 ,polarization=30deg}\ndetector d:SPCM{channel=1}\nconnect s.out->d.in\n");
  EXPECT_EQ(serialize(spec),
            "source s { intensity = 1.5, polarization = 30deg }\n"
            "detector d : SPCM { channel = 1 }\n"
            "connect s.out -> d.in\n");
}

TEST(Serialize, AwkwardAnglesStayExact) {
  const auto spec = parse("source s\nelement p : PHASE { phi = 0.123456789012345 }\nelement q : PHASE { phi = 17.3deg }\n");
  EXPECT_EQ(parse(serialize(spec)), spec);
}

TEST(Validate, DanglingPortIsReported) {
  const auto report = validate(parse(data("dangling_port.circuit")));
  EXPECT_FALSE(report.ok());
  EXPECT_TRUE(has_violation(report, ErrorCode::kDanglingPort, "bs.in2"));
}

TEST(Validate, DoublyDrivenPortIsReported) {
  const auto report = validate(parse(data("doubly_driven.circuit")));
  EXPECT_TRUE(has_violation(report, ErrorCode::kDoublyDrivenPort, "bs.in1"));
}

TEST(Validate, CycleIsReported) {
  const auto spec = parse(data("cycle.circuit"));
  bool cycle = false;
  for (const auto& v : validate(spec).violations) cycle |= v.code == ErrorCode::kCycle;
  EXPECT_TRUE(cycle);
  EXPECT_THROW(compile(spec), CircuitError);
}

TEST(Compile, ModifiedPlanEndsAtFinalBeamSplitter) {
  const auto plan = load_plan(builtin("franson_modified.circuit"));
  ASSERT_FALSE(plan.steps().empty());
  EXPECT_EQ(plan.steps().back().name, "bsFinal");
  EXPECT_TRUE(plan.uses(ScanVar::kPhi));
  EXPECT_TRUE(plan.uses(ScanVar::kPsi));
  EXPECT_TRUE(plan.uses(ScanVar::kTheta));
}

TEST(Compile, PlanOrderRespectsConnectionsAndVisitsEachElementOnce) {
  for (const char* name : {"franson_modified.circuit", "franson_original.circuit"}) {
    const auto spec = parse(builtin(name));
    const auto plan = compile(spec);
    std::map<std::string, std::size_t> pos;
    for (std::size_t i = 0; i < plan.steps().size(); ++i) EXPECT_TRUE(pos.emplace(plan.steps()[i].name, i).second);
    std::size_t optical = 0;
    for (const auto& e : spec.elements) optical += e.kind != ElementKind::kSource && e.kind != ElementKind::kDetector;
    EXPECT_EQ(pos.size(), optical);
    for (const auto& c : spec.connections)
      if (pos.count(c.from.element) && pos.count(c.to.element)) {
        EXPECT_LT(pos[c.from.element], pos[c.to.element]);
      }
  }
}

TEST(Compile, OriginalHasNoCrossPartyElement) {
  const auto plan = load_plan(builtin("franson_original.circuit"));
  int named = 0;
  for (const auto& d : plan.detectors()) named += d.channel != 0;
  EXPECT_EQ(named, 2);
  // Each named detector sees light from exactly one lit source.
  const auto m = plan.transfer_matrix(Bindings{0.1, 0.2, 0.3});
  const auto spec = parse(builtin("franson_original.circuit"));
  for (std::size_t d = 0; d < plan.detectors().size(); ++d) {
    if (plan.detectors()[d].channel == 0) continue;
    std::set<std::string> seen;
    for (std::size_t c = 0; c < m.cols; ++c) {
      const auto& src = plan.sources()[c / 2].name;
      const bool lit = spec.find(src)->number("intensity", 1.0) > 0.0;
      if (lit && (std::abs(m(2 * d, c)) > 1e-12 || std::abs(m(2 * d + 1, c)) > 1e-12)) seen.insert(src);
    }
    EXPECT_EQ(seen.size(), 1u) << plan.detectors()[d].name;
  }
}

TEST(Compile, EmptyPlanIsIdentity) {
  const auto plan = load_plan(kPassThrough);
  EXPECT_TRUE(plan.steps().empty());
  const auto fields = plan.evaluate(Bindings{0.0, 0.0, 0.0});
  ASSERT_EQ(fields.size(), 1u);
  const auto expect = parse(kPassThrough).sources()[0].field();
  EXPECT_EQ(fields[0].field, expect);
}

TEST(Evaluate, MissingBindingThrows) {
  const auto plan = load_plan(builtin("franson_modified.circuit"));
  try {
    plan.evaluate(Bindings{0.0, std::nullopt, 0.0});
    FAIL();
  } catch (const CircuitError& e) {
    EXPECT_EQ(e.code(), ErrorCode::kMissingBinding);
  }
}

TEST(Evaluate, DarkFringeAtD1) {
  const auto plan = load_plan(builtin("franson_modified.circuit"));
  // theta = 0 and phi - psi - theta = 0 make both cosines 1.
  const auto fields = plan.evaluate(Bindings{0.8, 0.8, 0.0});
  EXPECT_NEAR(channel_intensity(fields, 1), 0.0, 1e-15);
  EXPECT_NEAR(channel_intensity(fields, 2), 2.0, 1e-14);
}

TEST(Evaluate, OutputsSumToTwiceI0) {
  const auto plan = load_plan(builtin("franson_modified.circuit"));
  std::mt19937_64 rng(10);
  std::uniform_real_distribution<double> u(-10.0, 10.0);
  for (int k = 0; k < 10000; ++k) {
    const auto f = plan.evaluate(Bindings{u(rng), u(rng), u(rng)});
    EXPECT_NEAR(channel_intensity(f, 1) + channel_intensity(f, 2), 2.0, 1e-12);
  }
}

TEST(Evaluate, ModifiedMatchesClosedForm) {
  const auto plan = load_plan(builtin("franson_modified.circuit"));
  std::mt19937_64 rng(12);
  std::uniform_real_distribution<double> u(-kPi, kPi);
  for (int k = 0; k < 2000; ++k) {
    const double phi = u(rng), psi = u(rng), theta = u(rng);
    const auto f = plan.evaluate(Bindings{phi, psi, theta});
    const auto o = analytic::output_intensities(phi, psi, theta, 1.0);
    EXPECT_NEAR(channel_intensity(f, 1), o.alpha, 1e-12);
    EXPECT_NEAR(channel_intensity(f, 2), o.beta, 1e-12);
  }
}

TEST(Evaluate, LinearInSourceField) {
  const auto plan = load_plan(builtin("franson_modified.circuit"));
  const std::size_t n = plan.sources().size();
  std::mt19937_64 rng(13);
  std::normal_distribution<double> g;
  auto rand_fields = [&] {
    std::vector<JonesVector> v(n);
    for (auto& j : v) j = {{g(rng), g(rng)}, {g(rng), g(rng)}};
    return v;
  };
  const Bindings b{0.4, 1.2, -0.6};
  for (int k = 0; k < 50; ++k) {
    const auto x = rand_fields(), y = rand_fields();
    const std::complex<double> a{g(rng), g(rng)}, c{g(rng), g(rng)};
    std::vector<JonesVector> mix(n);
    for (std::size_t i = 0; i < n; ++i) mix[i] = a * x[i] + c * y[i];
    const auto fx = plan.evaluate(b, x), fy = plan.evaluate(b, y), fm = plan.evaluate(b, mix);
    for (std::size_t d = 0; d < fm.size(); ++d) {
      const JonesVector want = a * fx[d].field + c * fy[d].field;
      EXPECT_LT(std::abs(fm[d].field.h - want.h) + std::abs(fm[d].field.v - want.v), 1e-12);
    }
  }
}

TEST(Evaluate, ZeroHwpKillsTheFringe) {
  const auto plan = load_plan(data("wrong_hwp.circuit"));
  const auto ref = plan.evaluate(Bindings{0.0, 0.0, 0.9});
  for (double phi = 0.0; phi < 2 * kPi; phi += 0.3)
    for (double psi = 0.0; psi < 2 * kPi; psi += 0.7) {
      const auto f = plan.evaluate(Bindings{phi, psi, 0.9});
      for (std::size_t d = 0; d < f.size(); ++d) EXPECT_NEAR(intensity(f[d].field), intensity(ref[d].field), 1e-12);
    }
}

TEST(Validate, VacuumFedBeamSplitterIsIsometric) {
  const auto spec = parse(
      "source s\nsource v { intensity = 0 }\nelement bs : BS\n"
      "detector d1 : SPCM { channel = 1 }\ndetector d2 : SPCM { channel = 2 }\n"
      "connect s.out -> bs.in1\nconnect v.out -> bs.in2\nconnect bs.out1 -> d1.in\nconnect bs.out2 -> d2.in\n");
  const auto report = validate(spec);
  EXPECT_TRUE(report.ok());
  EXPECT_LE(report.isometry_error, 1e-12);
}

}  // namespace
