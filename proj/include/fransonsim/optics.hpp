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

// Coherent field propagation through the lossless elements of a polarization
// interferometer. Fields are Jones vectors of dimensionless complex amplitudes;
// intensity is |h|^2 + |v|^2.
//
// Conventions:
//   BS      reflection carries a factor i (pi/2 phase), transmission is real.
//   PBS     H transmits, V reflects with a factor i.
//   HWP     plate angle eta from the fast axis, M = [[cos2eta, sin2eta],
//           [sin2eta, -cos2eta]].
//   MIRROR  global factor -1 per reflection.

#pragma once

#include <cmath>
#include <complex>
#include <concepts>
#include <numbers>
#include <string_view>
#include <utility>

namespace fransonsim {

template <std::floating_point T>
using Complex = std::complex<T>;

/// Polarization-resolved field amplitude on one spatial mode.
template <std::floating_point T = double>
struct Jones {
  Complex<T> h{};
  Complex<T> v{};

  static constexpr Jones horizontal(T amplitude = T(1)) { return {amplitude, T(0)}; }
  static constexpr Jones vertical(T amplitude = T(1)) { return {T(0), amplitude}; }
  /// Linear polarization at `angle` from horizontal.
  static Jones linear(T angle, T amplitude = T(1)) {
    return {amplitude * std::cos(angle), amplitude * std::sin(angle)};
  }

  friend constexpr Jones operator+(const Jones& a, const Jones& b) { return {a.h + b.h, a.v + b.v}; }
  friend constexpr Jones operator-(const Jones& a, const Jones& b) { return {a.h - b.h, a.v - b.v}; }
  friend constexpr Jones operator*(const Complex<T>& s, const Jones& a) { return {s * a.h, s * a.v}; }
  friend constexpr Jones operator*(const Jones& a, const Complex<T>& s) { return s * a; }
  friend constexpr bool operator==(const Jones&, const Jones&) = default;

  bool finite() const {
    return std::isfinite(h.real()) && std::isfinite(h.imag()) && std::isfinite(v.real()) &&
           std::isfinite(v.imag());
  }
};

using JonesVector = Jones<double>;

enum class PhaseScope { kBoth, kHOnly, kVOnly };

inline std::string_view to_string(PhaseScope scope) {
  switch (scope) {
    case PhaseScope::kBoth:
      return "both";
    case PhaseScope::kHOnly:
      return "H";
    case PhaseScope::kVOnly:
      return "V";
  }
  return "both";
}

template <std::floating_point T>
constexpr T intensity(const Jones<T>& j) {
  return std::norm(j.h) + std::norm(j.v);
}

/// Hermitian inner product <a|b>.
template <std::floating_point T>
constexpr Complex<T> inner(const Jones<T>& a, const Jones<T>& b) {
  return std::conj(a.h) * b.h + std::conj(a.v) * b.v;
}

/// Lossless 50/50 beam splitter acting per polarization component.
template <std::floating_point T>
std::pair<Jones<T>, Jones<T>> bs_apply(const Jones<T>& in1, const Jones<T>& in2) {
  const T s = T(1) / std::numbers::sqrt2_v<T>;
  const Complex<T> i{T(0), T(1)};
  return {s * (in1 + i * in2), s * (i * in1 + in2)};
}

template <std::floating_point T>
std::pair<Jones<T>, Jones<T>> pbs_apply(const Jones<T>& in1, const Jones<T>& in2) {
  const Complex<T> i{T(0), T(1)};
  return {Jones<T>{in1.h, i * in2.v}, Jones<T>{in2.h, i * in1.v}};
}

template <std::floating_point T>
Jones<T> hwp_apply(const Jones<T>& in, T plate_angle) {
  const T c = std::cos(T(2) * plate_angle);
  const T s = std::sin(T(2) * plate_angle);
  return {c * in.h + s * in.v, s * in.h - c * in.v};
}

template <std::floating_point T>
Jones<T> phase_apply(const Jones<T>& in, T phase, PhaseScope scope = PhaseScope::kBoth) {
  const Complex<T> f = std::polar(T(1), phase);
  switch (scope) {
    case PhaseScope::kBoth:
      return {f * in.h, f * in.v};
    case PhaseScope::kHOnly:
      return {f * in.h, in.v};
    case PhaseScope::kVOnly:
      return {in.h, f * in.v};
  }
  return in;
}

template <std::floating_point T>
constexpr Jones<T> mirror_apply(const Jones<T>& in) {
  return {-in.h, -in.v};
}

/// Two-party coincidence of the fields reaching two remote detectors when the
/// cross terms between orthogonal slots cancel: |<a|b>|^2 / sqrt(I_a I_b).
/// Equals I0 (1 + cos(dphase)) / 2 for equal-intensity MZI outputs and is
/// blind to any global phase on either party. Zero when either field is dark.
template <std::floating_point T>
T two_party_coincidence(const Jones<T>& a, const Jones<T>& b) {
  const T ia = intensity(a);
  const T ib = intensity(b);
  if (ia <= T(0) || ib <= T(0)) return T(0);
  return std::norm(inner(a, b)) / std::sqrt(ia * ib);
}

}  // namespace fransonsim
