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

// Optical-bench netlist: parsing, canonical serialization, validation, and
// compilation into a feed-forward evaluation plan over the elements in
// optics.hpp.
//
// Grammar (one statement per line, `#` starts a comment):
//
//   source NAME [{ key = value, ... }]
//   element NAME : KIND [{ key = value, ... }]     KIND in BS PBS HWP PHASE MIRROR
//   detector NAME : SPCM [{ key = value, ... }]
//   connect A.port -> B.port
//
// Values are decimal numbers with an optional `deg` or `nm` suffix, one of the
// scan symbols `scan_phi`, `scan_psi`, `scan_theta`, or (for `scope`) one of
// `both`, `H`, `V`. Angles without a suffix are radians.

#pragma once

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <limits>
#include <map>
#include <numbers>
#include <optional>
#include <queue>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <system_error>
#include <utility>
#include <variant>
#include <vector>

#include "fransonsim/optics.hpp"

namespace fransonsim {

enum class ElementKind { kSource, kDetector, kBS, kPBS, kHWP, kPhase, kMirror };

inline std::string_view to_string(ElementKind kind) {
  switch (kind) {
    case ElementKind::kSource:
      return "SOURCE";
    case ElementKind::kDetector:
      return "SPCM";
    case ElementKind::kBS:
      return "BS";
    case ElementKind::kPBS:
      return "PBS";
    case ElementKind::kHWP:
      return "HWP";
    case ElementKind::kPhase:
      return "PHASE";
    case ElementKind::kMirror:
      return "MIRROR";
  }
  return "?";
}

/// The three phases a circuit may leave free: Bob's MZI phase, Alice's MZI
/// phase, and the global phase between the two parties.
enum class ScanVar { kPhi, kPsi, kTheta };

inline std::string_view to_string(ScanVar var) {
  switch (var) {
    case ScanVar::kPhi:
      return "scan_phi";
    case ScanVar::kPsi:
      return "scan_psi";
    case ScanVar::kTheta:
      return "scan_theta";
  }
  return "?";
}

struct Bindings {
  std::optional<double> phi;
  std::optional<double> psi;
  std::optional<double> theta;

  std::optional<double> get(ScanVar var) const {
    switch (var) {
      case ScanVar::kPhi:
        return phi;
      case ScanVar::kPsi:
        return psi;
      case ScanVar::kTheta:
        return theta;
    }
    return std::nullopt;
  }
};

enum class ErrorCode {
  kSyntax,
  kNoSource,
  kUnknownKind,
  kUnknownParameter,
  kDuplicateName,
  kUnknownPort,
  kDanglingPort,
  kDoublyDrivenPort,
  kCycle,
  kLossy,
  kMissingBinding,
};

inline std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kSyntax:
      return "syntax_error";
    case ErrorCode::kNoSource:
      return "no_source";
    case ErrorCode::kUnknownKind:
      return "unknown_kind";
    case ErrorCode::kUnknownParameter:
      return "unknown_parameter";
    case ErrorCode::kDuplicateName:
      return "duplicate_name";
    case ErrorCode::kUnknownPort:
      return "unknown_port";
    case ErrorCode::kDanglingPort:
      return "dangling_port";
    case ErrorCode::kDoublyDrivenPort:
      return "doubly_driven_port";
    case ErrorCode::kCycle:
      return "cycle";
    case ErrorCode::kLossy:
      return "not_lossless";
    case ErrorCode::kMissingBinding:
      return "missing_binding";
  }
  return "?";
}

class CircuitError : public std::runtime_error {
 public:
  CircuitError(ErrorCode code, std::string message, int line = 0, int column = 0)
      : std::runtime_error(format(code, message, line, column)),
        code_(code),
        detail_(std::move(message)),
        line_(line),
        column_(column) {}

  ErrorCode code() const { return code_; }
  const std::string& detail() const { return detail_; }
  int line() const { return line_; }
  int column() const { return column_; }

 private:
  static std::string format(ErrorCode code, const std::string& message, int line, int column) {
    std::string out(to_string(code));
    if (line > 0) out += " at " + std::to_string(line) + ":" + std::to_string(column);
    return out + ": " + message;
  }

  ErrorCode code_;
  std::string detail_;
  int line_;
  int column_;
};

/// A parameter value: a number in canonical units (radians, nm, plain), a
/// scan variable, or a phase scope.
using ParamValue = std::variant<double, ScanVar, PhaseScope>;

struct Param {
  std::string key;
  ParamValue value;
  friend bool operator==(const Param&, const Param&) = default;
};

struct Element {
  std::string name;
  ElementKind kind = ElementKind::kMirror;
  std::vector<Param> params;
  int line = 0;

  const ParamValue* param(std::string_view key) const {
    for (const auto& p : params)
      if (p.key == key) return &p.value;
    return nullptr;
  }
  double number(std::string_view key, double fallback) const {
    const ParamValue* v = param(key);
    if (v == nullptr) return fallback;
    if (const double* d = std::get_if<double>(v)) return *d;
    return fallback;
  }

  friend bool operator==(const Element& a, const Element& b) {
    return a.name == b.name && a.kind == b.kind && a.params == b.params;
  }
};

struct PortRef {
  std::string element;
  std::string port;
  std::string str() const { return element + "." + port; }
  friend auto operator<=>(const PortRef&, const PortRef&) = default;
};

struct Connection {
  PortRef from;
  PortRef to;
  int line = 0;
  friend bool operator==(const Connection& a, const Connection& b) {
    return a.from == b.from && a.to == b.to;
  }
};

struct SourceInfo {
  std::string name;
  double wavelength_nm = 532.0;
  double polarization = 0.0;  // linear, radians from horizontal
  double intensity = 1.0;
  JonesVector field() const {
    return JonesVector::linear(polarization, std::sqrt(std::max(intensity, 0.0)));
  }
};

struct DetectorInfo {
  std::string name;
  int channel = 0;  // 1 -> D1 (alpha), 2 -> D2 (beta), 0 -> unmonitored
};

struct CircuitSpec {
  std::vector<Element> elements;  // declaration order, incl. sources and detectors
  std::vector<Connection> connections;

  const Element* find(std::string_view name) const {
    for (const auto& e : elements)
      if (e.name == name) return &e;
    return nullptr;
  }

  std::vector<SourceInfo> sources() const {
    std::vector<SourceInfo> out;
    for (const auto& e : elements) {
      if (e.kind != ElementKind::kSource) continue;
      out.push_back({e.name, e.number("wavelength", 532.0), e.number("polarization", 0.0),
                     e.number("intensity", 1.0)});
    }
    return out;
  }

  std::vector<DetectorInfo> detectors() const {
    std::vector<DetectorInfo> out;
    for (const auto& e : elements)
      if (e.kind == ElementKind::kDetector)
        out.push_back({e.name, static_cast<int>(std::lround(e.number("channel", 0.0)))});
    return out;
  }

  /// (element.key, variable) for every parameter bound to a scan variable.
  std::vector<std::pair<std::string, ScanVar>> scan_bindings() const {
    std::vector<std::pair<std::string, ScanVar>> out;
    for (const auto& e : elements)
      for (const auto& p : e.params)
        if (const ScanVar* v = std::get_if<ScanVar>(&p.value)) out.emplace_back(e.name + "." + p.key, *v);
    return out;
  }

  friend bool operator==(const CircuitSpec&, const CircuitSpec&) = default;
};

namespace detail {

struct PortSet {
  std::vector<std::string_view> inputs;
  std::vector<std::string_view> outputs;
};

inline PortSet ports_of(ElementKind kind) {
  switch (kind) {
    case ElementKind::kSource:
      return {{}, {"out"}};
    case ElementKind::kDetector:
      return {{"in"}, {}};
    case ElementKind::kBS:
    case ElementKind::kPBS:
      return {{"in1", "in2"}, {"out1", "out2"}};
    case ElementKind::kHWP:
    case ElementKind::kPhase:
    case ElementKind::kMirror:
      return {{"in"}, {"out"}};
  }
  return {};
}

enum class ParamKind { kAngle, kWavelength, kPlain, kScope };

struct ParamSpec {
  std::string_view key;
  ParamKind kind;
  bool scannable;
};

inline std::vector<ParamSpec> params_of(ElementKind kind) {
  switch (kind) {
    case ElementKind::kSource:
      return {{"wavelength", ParamKind::kWavelength, false},
              {"polarization", ParamKind::kAngle, false},
              {"intensity", ParamKind::kPlain, false}};
    case ElementKind::kDetector:
      return {{"channel", ParamKind::kPlain, false}};
    case ElementKind::kHWP:
      return {{"angle", ParamKind::kAngle, true}};
    case ElementKind::kPhase:
      return {{"phi", ParamKind::kAngle, true}, {"scope", ParamKind::kScope, false}};
    default:
      return {};
  }
}

inline double deg_to_rad(double deg) { return deg * (std::numbers::pi / 180.0); }
inline double rad_to_deg(double rad) { return rad * (180.0 / std::numbers::pi); }

inline std::string shortest(double x) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, x);
  if (ec != std::errc{}) throw std::runtime_error("number formatting failed");
  return std::string(buf, end);
}

inline bool is_ident_start(char c) {
  return (c >= 'A' && c <= 'Z') || (c >= 'a' && c <= 'z') || c == '_';
}
inline bool is_ident_char(char c) { return is_ident_start(c) || (c >= '0' && c <= '9'); }
inline bool is_digit(char c) { return c >= '0' && c <= '9'; }

enum class Tok { kIdent, kNumber, kPunct, kEnd };

struct Token {
  Tok kind = Tok::kEnd;
  std::string text;  // identifier, number literal, punctuation
  std::string unit;  // for numbers
  int column = 0;
};

inline std::vector<Token> tokenize_line(std::string_view line, int line_no) {
  std::vector<Token> out;
  std::size_t i = 0;
  auto col = [&](std::size_t pos) { return static_cast<int>(pos) + 1; };
  while (i < line.size()) {
    const char c = line[i];
    if (c == '#') break;
    if (c == ' ' || c == '\t' || c == '\r') {
      ++i;
      continue;
    }
    const std::size_t start = i;
    if (is_ident_start(c)) {
      while (i < line.size() && is_ident_char(line[i])) ++i;
      out.push_back({Tok::kIdent, std::string(line.substr(start, i - start)), "", col(start)});
      continue;
    }
    if (c == '-' && i + 1 < line.size() && line[i + 1] == '>') {
      out.push_back({Tok::kPunct, "->", "", col(start)});
      i += 2;
      continue;
    }
    const bool number_start = is_digit(c) || ((c == '-' || c == '+' || c == '.') && i + 1 < line.size() &&
                                              (is_digit(line[i + 1]) || line[i + 1] == '.'));
    if (number_start) {
      if (c == '-' || c == '+') ++i;
      bool digits = false;
      while (i < line.size() && is_digit(line[i])) ++i, digits = true;
      if (i < line.size() && line[i] == '.') {
        ++i;
        while (i < line.size() && is_digit(line[i])) ++i, digits = true;
      }
      if (!digits) throw CircuitError(ErrorCode::kSyntax, "malformed number", line_no, col(start));
      if (i < line.size() && (line[i] == 'e' || line[i] == 'E')) {
        std::size_t j = i + 1;
        if (j < line.size() && (line[j] == '-' || line[j] == '+')) ++j;
        if (j < line.size() && is_digit(line[j])) {
          i = j;
          while (i < line.size() && is_digit(line[i])) ++i;
        }
      }
      Token t{Tok::kNumber, std::string(line.substr(start, i - start)), "", col(start)};
      const std::size_t unit_start = i;
      while (i < line.size() && is_ident_char(line[i])) ++i;
      t.unit = std::string(line.substr(unit_start, i - unit_start));
      if (!t.unit.empty() && t.unit != "deg" && t.unit != "nm")
        throw CircuitError(ErrorCode::kSyntax, "unknown unit suffix '" + t.unit + "'", line_no,
                           col(unit_start));
      out.push_back(std::move(t));
      continue;
    }
    if (c == '{' || c == '}' || c == ',' || c == '=' || c == ':' || c == '.') {
      out.push_back({Tok::kPunct, std::string(1, c), "", col(start)});
      ++i;
      continue;
    }
    throw CircuitError(ErrorCode::kSyntax, std::string("unexpected character '") + c + "'", line_no,
                       col(start));
  }
  out.push_back({Tok::kEnd, "", "", col(line.size())});
  return out;
}

class LineParser {
 public:
  LineParser(std::vector<Token> tokens, int line_no) : toks_(std::move(tokens)), line_(line_no) {}

  const Token& peek() const { return toks_[pos_]; }
  bool at_end() const { return peek().kind == Tok::kEnd; }

  [[noreturn]] void fail(const std::string& what) const {
    const Token& t = peek();
    const std::string found = t.kind == Tok::kEnd ? "end of line" : "'" + t.text + t.unit + "'";
    throw CircuitError(ErrorCode::kSyntax, what + ", found " + found, line_, t.column);
  }

  Token ident(const char* what) {
    if (peek().kind != Tok::kIdent) fail(std::string("expected ") + what);
    return toks_[pos_++];
  }

  void punct(std::string_view p) {
    if (peek().kind != Tok::kPunct || peek().text != p) fail("expected '" + std::string(p) + "'");
    ++pos_;
  }

  bool accept(std::string_view p) {
    if (peek().kind == Tok::kPunct && peek().text == p) {
      ++pos_;
      return true;
    }
    return false;
  }

  Token value() {
    if (peek().kind != Tok::kNumber && peek().kind != Tok::kIdent) fail("expected a value");
    return toks_[pos_++];
  }

  void end() {
    if (!at_end()) fail("expected end of statement");
  }

  int line() const { return line_; }

 private:
  std::vector<Token> toks_;
  std::size_t pos_ = 0;
  int line_;
};

inline ParamValue convert_value(const Token& tok, const ParamSpec& spec, int line) {
  auto bad = [&](const std::string& why) -> CircuitError {
    return CircuitError(ErrorCode::kUnknownParameter, std::string(spec.key) + ": " + why, line, tok.column);
  };
  if (tok.kind == Tok::kIdent) {
    if (spec.kind == ParamKind::kScope) {
      if (tok.text == "both") return PhaseScope::kBoth;
      if (tok.text == "H") return PhaseScope::kHOnly;
      if (tok.text == "V") return PhaseScope::kVOnly;
      throw bad("scope must be both, H or V");
    }
    if (!spec.scannable) throw bad("'" + tok.text + "' is not a number");
    if (tok.text == "scan_phi") return ScanVar::kPhi;
    if (tok.text == "scan_psi") return ScanVar::kPsi;
    if (tok.text == "scan_theta") return ScanVar::kTheta;
    throw bad("unknown symbol '" + tok.text + "'");
  }
  if (spec.kind == ParamKind::kScope) throw bad("scope must be both, H or V");
  double x = 0.0;
  const char* first = tok.text.data() + (tok.text.front() == '+' ? 1 : 0);
  auto [ptr, ec] = std::from_chars(first, tok.text.data() + tok.text.size(), x);
  if (ec != std::errc{} || ptr != tok.text.data() + tok.text.size() || !std::isfinite(x))
    throw CircuitError(ErrorCode::kSyntax, "malformed number '" + tok.text + "'", line, tok.column);
  if (tok.unit == "deg") {
    if (spec.kind != ParamKind::kAngle) throw bad("'deg' only applies to angles");
    return deg_to_rad(x);
  }
  if (tok.unit == "nm") {
    if (spec.kind != ParamKind::kWavelength) throw bad("'nm' only applies to wavelengths");
    return x;
  }
  return x;
}

inline std::string format_value(const ParamValue& value, ParamKind kind) {
  if (const ScanVar* v = std::get_if<ScanVar>(&value)) return std::string(to_string(*v));
  if (const PhaseScope* s = std::get_if<PhaseScope>(&value)) return std::string(to_string(*s));
  const double x = std::get<double>(value);
  if (kind == ParamKind::kWavelength) return shortest(x) + "nm";
  if (kind == ParamKind::kAngle && x != 0.0) {
    // Degrees only when they convert back to the identical radian value.
    const double deg = rad_to_deg(x);
    for (int precision = 1; precision <= 7; ++precision) {
      char buf[32];
      auto [end, ec] = std::to_chars(buf, buf + sizeof buf, deg, std::chars_format::general, precision);
      if (ec != std::errc{}) break;
      double back = 0.0;
      std::from_chars(buf, end, back);
      if (deg_to_rad(back) == x) return shortest(back) + "deg";
    }
  }
  return shortest(x);
}

inline std::optional<ElementKind> kind_from_name(std::string_view s) {
  if (s == "BS") return ElementKind::kBS;
  if (s == "PBS") return ElementKind::kPBS;
  if (s == "HWP") return ElementKind::kHWP;
  if (s == "PHASE") return ElementKind::kPhase;
  if (s == "MIRROR") return ElementKind::kMirror;
  return std::nullopt;
}

inline std::vector<Param> parse_params(LineParser& p, ElementKind kind) {
  std::vector<Param> params;
  if (!p.accept("{")) return params;
  const auto specs = params_of(kind);
  if (p.accept("}")) return params;
  while (true) {
    const Token key = p.ident("parameter name");
    auto it = std::find_if(specs.begin(), specs.end(), [&](const ParamSpec& s) { return s.key == key.text; });
    if (it == specs.end())
      throw CircuitError(ErrorCode::kUnknownParameter,
                         "'" + key.text + "' is not a parameter of " + std::string(to_string(kind)), p.line(),
                         key.column);
    for (const auto& existing : params)
      if (existing.key == key.text)
        throw CircuitError(ErrorCode::kSyntax, "parameter '" + key.text + "' given twice", p.line(), key.column);
    p.punct("=");
    const Token v = p.value();
    params.push_back({key.text, convert_value(v, *it, p.line())});
    if (p.accept("}")) break;
    p.punct(",");
  }
  return params;
}

struct PendingRef {
  PortRef ref;
  int line;
  int column;
};

inline PendingRef port_ref(LineParser& p) {
  const Token e = p.ident("element name");
  p.punct(".");
  const Token port = p.ident("port name");
  return {{e.text, port.text}, p.line(), e.column};
}

}  // namespace detail

/// Parses netlist text. Throws CircuitError on syntax errors, unknown kinds or
/// parameters, duplicate names, references to undeclared ports, and input
/// with no source. Structural problems (dangling or doubly-driven ports,
/// cycles) are left to validate().
inline CircuitSpec parse(std::string_view text) {
  using namespace detail;
  CircuitSpec spec;
  std::vector<std::pair<PendingRef, PendingRef>> pending;
  std::map<std::string, int, std::less<>> names;

  int line_no = 0;
  std::size_t start = 0;
  while (start <= text.size()) {
    std::size_t nl = text.find('\n', start);
    if (nl == std::string_view::npos) nl = text.size();
    const std::string_view line = text.substr(start, nl - start);
    start = nl + 1;
    ++line_no;

    LineParser p(tokenize_line(line, line_no), line_no);
    if (p.at_end()) continue;
    const Token keyword = p.ident("statement keyword");

    if (keyword.text == "connect") {
      PendingRef from = port_ref(p);
      p.punct("->");
      PendingRef to = port_ref(p);
      p.end();
      pending.emplace_back(std::move(from), std::move(to));
      continue;
    }

    Element element;
    element.line = line_no;
    const Token name = p.ident("name");
    element.name = name.text;
    if (keyword.text == "source") {
      element.kind = ElementKind::kSource;
    } else if (keyword.text == "element" || keyword.text == "detector") {
      p.punct(":");
      const Token kind = p.ident("element kind");
      if (keyword.text == "detector") {
        if (kind.text != "SPCM")
          throw CircuitError(ErrorCode::kUnknownKind, "unknown detector kind '" + kind.text + "'", line_no,
                             kind.column);
        element.kind = ElementKind::kDetector;
      } else {
        auto k = kind_from_name(kind.text);
        if (!k)
          throw CircuitError(ErrorCode::kUnknownKind, "unknown element kind '" + kind.text + "'", line_no,
                             kind.column);
        element.kind = *k;
      }
    } else {
      throw CircuitError(ErrorCode::kSyntax, "unknown statement '" + keyword.text + "'", line_no, keyword.column);
    }
    element.params = parse_params(p, element.kind);
    p.end();

    if (names.contains(element.name))
      throw CircuitError(ErrorCode::kDuplicateName,
                         "'" + element.name + "' already declared on line " + std::to_string(names[element.name]),
                         line_no, name.column);
    names.emplace(element.name, line_no);
    spec.elements.push_back(std::move(element));
  }

  if (spec.sources().empty()) throw CircuitError(ErrorCode::kNoSource, "no source declared", line_no, 1);

  auto resolve = [&](const PendingRef& r, bool want_output) {
    const Element* e = spec.find(r.ref.element);
    if (e == nullptr)
      throw CircuitError(ErrorCode::kUnknownPort, "undeclared element '" + r.ref.element + "'", r.line, r.column);
    const PortSet ports = ports_of(e->kind);
    const auto& list = want_output ? ports.outputs : ports.inputs;
    if (std::find(list.begin(), list.end(), r.ref.port) == list.end())
      throw CircuitError(ErrorCode::kUnknownPort,
                         "'" + r.ref.str() + "' is not an " + (want_output ? "output" : "input") + " port",
                         r.line, r.column);
  };
  for (const auto& [from, to] : pending) {
    resolve(from, true);
    resolve(to, false);
    spec.connections.push_back({from.ref, to.ref, from.line});
  }
  return spec;
}

/// Canonical text: declarations in declaration order, then connections, one
/// statement per line with normalized spacing. parse(serialize(s)) == s.
inline std::string serialize(const CircuitSpec& spec) {
  using namespace detail;
  std::string out;
  for (const auto& e : spec.elements) {
    switch (e.kind) {
      case ElementKind::kSource:
        out += "source " + e.name;
        break;
      case ElementKind::kDetector:
        out += "detector " + e.name + " : SPCM";
        break;
      default:
        out += "element " + e.name + " : " + std::string(to_string(e.kind));
    }
    if (!e.params.empty()) {
      const auto specs = params_of(e.kind);
      out += " { ";
      for (std::size_t i = 0; i < e.params.size(); ++i) {
        const auto& p = e.params[i];
        auto it = std::find_if(specs.begin(), specs.end(), [&](const ParamSpec& s) { return s.key == p.key; });
        const ParamKind kind = it == specs.end() ? ParamKind::kPlain : it->kind;
        if (i) out += ", ";
        out += p.key + " = " + format_value(p.value, kind);
      }
      out += " }";
    }
    out += '\n';
  }
  for (const auto& c : spec.connections) out += "connect " + c.from.str() + " -> " + c.to.str() + '\n';
  return out;
}

struct Violation {
  ErrorCode code;
  std::string subject;
  std::string message;
};

struct ValidationReport {
  std::vector<Violation> violations;
  /// max |M^H M - I| of the source-to-detector map; NaN when not computed.
  double isometry_error = std::numeric_limits<double>::quiet_NaN();
  bool ok() const { return violations.empty(); }
};

/// Port wiring, dangling/doubly-driven ports, and cycles.
inline std::vector<Violation> structural_violations(const CircuitSpec& spec) {
  using namespace detail;
  std::vector<Violation> out;
  std::map<PortRef, int> incoming;
  std::map<PortRef, int> outgoing;
  for (const auto& c : spec.connections) {
    ++outgoing[c.from];
    ++incoming[c.to];
  }
  for (const auto& e : spec.elements) {
    const PortSet ports = ports_of(e.kind);
    for (auto port : ports.inputs) {
      PortRef ref{e.name, std::string(port)};
      const int n = incoming[ref];
      if (n == 0) out.push_back({ErrorCode::kDanglingPort, ref.str(), "input port " + ref.str() + " is not driven"});
      if (n > 1)
        out.push_back({ErrorCode::kDoublyDrivenPort, ref.str(),
                       "input port " + ref.str() + " is driven by " + std::to_string(n) + " connections"});
    }
    for (auto port : ports.outputs) {
      PortRef ref{e.name, std::string(port)};
      const int n = outgoing[ref];
      if (n == 0)
        out.push_back({ErrorCode::kDanglingPort, ref.str(), "output port " + ref.str() + " is not connected"});
      if (n > 1)
        out.push_back({ErrorCode::kDoublyDrivenPort, ref.str(),
                       "output port " + ref.str() + " drives " + std::to_string(n) + " inputs"});
    }
  }

  // Kahn's algorithm; anything left over sits on a cycle.
  std::map<std::string, int, std::less<>> index;
  for (std::size_t i = 0; i < spec.elements.size(); ++i) index.emplace(spec.elements[i].name, static_cast<int>(i));
  std::vector<int> indegree(spec.elements.size(), 0);
  std::vector<std::vector<int>> succ(spec.elements.size());
  for (const auto& c : spec.connections) {
    const int a = index.at(c.from.element);
    const int b = index.at(c.to.element);
    succ[a].push_back(b);
    ++indegree[b];
  }
  std::vector<int> queue;
  for (std::size_t i = 0; i < indegree.size(); ++i)
    if (indegree[i] == 0) queue.push_back(static_cast<int>(i));
  std::size_t visited = 0;
  while (!queue.empty()) {
    const int n = queue.back();
    queue.pop_back();
    ++visited;
    for (int m : succ[n])
      if (--indegree[m] == 0) queue.push_back(m);
  }
  if (visited != spec.elements.size()) {
    std::string members;
    for (std::size_t i = 0; i < indegree.size(); ++i)
      if (indegree[i] > 0) members += (members.empty() ? "" : ",") + spec.elements[i].name;
    out.push_back({ErrorCode::kCycle, members, "connection graph has a cycle through " + members});
  }
  return out;
}

/// Value of a numeric element parameter, possibly bound to a scan variable.
struct PlanParam {
  double value = 0.0;
  std::optional<ScanVar> scan;

  double resolve(const Bindings& b) const {
    if (!scan) return value;
    auto v = b.get(*scan);
    if (!v) throw CircuitError(ErrorCode::kMissingBinding, std::string(to_string(*scan)) + " is not bound");
    return *v;
  }
};

struct PlanStep {
  std::string name;
  ElementKind kind = ElementKind::kMirror;
  std::array<int, 2> in{-1, -1};
  std::array<int, 2> out{-1, -1};
  PlanParam param;
  PhaseScope scope = PhaseScope::kBoth;
};

struct PlanSource {
  std::string name;
  int slot = -1;
  JonesVector field;
};

struct PlanDetector {
  std::string name;
  int channel = 0;
  int slot = -1;
};

struct DetectorField {
  std::string name;
  int channel = 0;
  JonesVector field;
};

using DetectorFields = std::vector<DetectorField>;

/// Intensity at the first detector on `channel`; 0 when there is none.
inline double channel_intensity(const DetectorFields& fields, int channel) {
  for (const auto& f : fields)
    if (f.channel == channel) return intensity(f.field);
  return 0.0;
}

inline const JonesVector* channel_field(const DetectorFields& fields, int channel) {
  for (const auto& f : fields)
    if (f.channel == channel) return &f.field;
  return nullptr;
}

/// Complex linear map from source modes (H, V per source) to detector modes
/// (H, V per detector), row-major.
struct TransferMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<Complex<double>> data;
  Complex<double> operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }

  double isometry_error() const {
    double worst = 0.0;
    for (std::size_t a = 0; a < cols; ++a)
      for (std::size_t b = 0; b < cols; ++b) {
        Complex<double> s{};
        for (std::size_t r = 0; r < rows; ++r) s += std::conj((*this)(r, a)) * (*this)(r, b);
        worst = std::max(worst, std::abs(s - Complex<double>(a == b ? 1.0 : 0.0, 0.0)));
      }
    return worst;
  }
};

/// Immutable, topologically ordered element applications with resolved wires.
/// Safe to evaluate concurrently.
class EvaluationPlan {
 public:
  const std::vector<PlanStep>& steps() const { return steps_; }
  const std::vector<PlanSource>& sources() const { return sources_; }
  const std::vector<PlanDetector>& detectors() const { return detectors_; }
  std::size_t slot_count() const { return slots_; }

  bool uses(ScanVar var) const {
    return std::any_of(steps_.begin(), steps_.end(), [&](const PlanStep& s) { return s.param.scan == var; });
  }

  DetectorFields evaluate(const Bindings& bindings) const {
    std::vector<JonesVector> fields;
    fields.reserve(sources_.size());
    for (const auto& s : sources_) fields.push_back(s.field);
    return evaluate(bindings, fields);
  }

  /// Evaluates with `source_fields` (one per source, declaration order) in
  /// place of the declared source fields.
  DetectorFields evaluate(const Bindings& bindings, std::span<const JonesVector> source_fields) const {
    if (source_fields.size() != sources_.size()) throw std::invalid_argument("source field count mismatch");
    std::vector<JonesVector> slot(slots_);
    for (std::size_t i = 0; i < sources_.size(); ++i) slot[sources_[i].slot] = source_fields[i];
    for (const auto& step : steps_) {
      switch (step.kind) {
        case ElementKind::kBS: {
          auto [a, b] = bs_apply(slot[step.in[0]], slot[step.in[1]]);
          slot[step.out[0]] = a;
          slot[step.out[1]] = b;
          break;
        }
        case ElementKind::kPBS: {
          auto [a, b] = pbs_apply(slot[step.in[0]], slot[step.in[1]]);
          slot[step.out[0]] = a;
          slot[step.out[1]] = b;
          break;
        }
        case ElementKind::kHWP:
          slot[step.out[0]] = hwp_apply(slot[step.in[0]], step.param.resolve(bindings));
          break;
        case ElementKind::kPhase:
          slot[step.out[0]] = phase_apply(slot[step.in[0]], step.param.resolve(bindings), step.scope);
          break;
        case ElementKind::kMirror:
          slot[step.out[0]] = mirror_apply(slot[step.in[0]]);
          break;
        case ElementKind::kSource:
        case ElementKind::kDetector:
          break;
      }
    }
    DetectorFields out;
    out.reserve(detectors_.size());
    for (const auto& d : detectors_) out.push_back({d.name, d.channel, slot[d.slot]});
    return out;
  }

  TransferMatrix transfer_matrix(const Bindings& bindings) const {
    TransferMatrix m;
    m.rows = 2 * detectors_.size();
    m.cols = 2 * sources_.size();
    m.data.assign(m.rows * m.cols, {});
    std::vector<JonesVector> unit(sources_.size());
    for (std::size_t c = 0; c < m.cols; ++c) {
      std::fill(unit.begin(), unit.end(), JonesVector{});
      unit[c / 2] = c % 2 == 0 ? JonesVector::horizontal() : JonesVector::vertical();
      const auto out = evaluate(bindings, unit);
      for (std::size_t d = 0; d < out.size(); ++d) {
        m.data[(2 * d) * m.cols + c] = out[d].field.h;
        m.data[(2 * d + 1) * m.cols + c] = out[d].field.v;
      }
    }
    return m;
  }

 private:
  friend EvaluationPlan compile(const CircuitSpec& spec);

  std::vector<PlanStep> steps_;
  std::vector<PlanSource> sources_;
  std::vector<PlanDetector> detectors_;
  std::size_t slots_ = 0;
};

/// Compiles a structurally valid circuit. Ties in the topological order are
/// broken by declaration order. Throws CircuitError with the first structural
/// violation otherwise.
inline EvaluationPlan compile(const CircuitSpec& spec) {
  using namespace detail;
  if (auto v = structural_violations(spec); !v.empty()) throw CircuitError(v.front().code, v.front().message);

  std::map<PortRef, int> wire;  // port -> slot, both ends of each connection
  for (std::size_t i = 0; i < spec.connections.size(); ++i) {
    wire[spec.connections[i].from] = static_cast<int>(i);
    wire[spec.connections[i].to] = static_cast<int>(i);
  }

  const std::size_t n = spec.elements.size();
  std::map<std::string, int, std::less<>> index;
  for (std::size_t i = 0; i < n; ++i) index.emplace(spec.elements[i].name, static_cast<int>(i));
  std::vector<int> indegree(n, 0);
  std::vector<std::vector<int>> succ(n);
  for (const auto& c : spec.connections) {
    succ[index.at(c.from.element)].push_back(index.at(c.to.element));
    ++indegree[index.at(c.to.element)];
  }
  std::priority_queue<int, std::vector<int>, std::greater<>> ready;
  for (std::size_t i = 0; i < n; ++i)
    if (indegree[i] == 0) ready.push(static_cast<int>(i));

  EvaluationPlan plan;
  plan.slots_ = spec.connections.size();
  while (!ready.empty()) {
    const int i = ready.top();
    ready.pop();
    for (int m : succ[i])
      if (--indegree[m] == 0) ready.push(m);

    const Element& e = spec.elements[i];
    const PortSet ports = ports_of(e.kind);
    if (e.kind == ElementKind::kSource) {
      const auto info = SourceInfo{e.name, e.number("wavelength", 532.0), e.number("polarization", 0.0),
                                   e.number("intensity", 1.0)};
      plan.sources_.push_back({e.name, wire.at({e.name, "out"}), info.field()});
      continue;
    }
    if (e.kind == ElementKind::kDetector) {
      plan.detectors_.push_back(
          {e.name, static_cast<int>(std::lround(e.number("channel", 0.0))), wire.at({e.name, "in"})});
      continue;
    }
    PlanStep step;
    step.name = e.name;
    step.kind = e.kind;
    for (std::size_t k = 0; k < ports.inputs.size(); ++k) step.in[k] = wire.at({e.name, std::string(ports.inputs[k])});
    for (std::size_t k = 0; k < ports.outputs.size(); ++k)
      step.out[k] = wire.at({e.name, std::string(ports.outputs[k])});
    const char* key = e.kind == ElementKind::kHWP ? "angle" : "phi";
    if (const ParamValue* v = e.param(key)) {
      if (const double* d = std::get_if<double>(v)) step.param.value = *d;
      if (const ScanVar* s = std::get_if<ScanVar>(v)) step.param.scan = *s;
    }
    if (const ParamValue* v = e.param("scope"))
      if (const PhaseScope* s = std::get_if<PhaseScope>(v)) step.scope = *s;
    plan.steps_.push_back(std::move(step));
  }

  // Sources and detectors keep declaration order regardless of graph order.
  auto by_decl = [&](const auto& a, const auto& b) { return index.at(a.name) < index.at(b.name); };
  std::sort(plan.sources_.begin(), plan.sources_.end(), by_decl);
  std::sort(plan.detectors_.begin(), plan.detectors_.end(), by_decl);
  return plan;
}

/// Structural checks plus a losslessness check: the compiled
/// source-to-detector map must be an isometry within `tolerance`, at zero
/// bindings and at one generic binding.
inline ValidationReport validate(const CircuitSpec& spec, double tolerance = 1e-10) {
  ValidationReport report;
  report.violations = structural_violations(spec);
  if (!report.violations.empty()) return report;
  const EvaluationPlan plan = compile(spec);
  const Bindings zero{0.0, 0.0, 0.0};
  const Bindings generic{0.7, -1.3, 2.1};
  report.isometry_error =
      std::max(plan.transfer_matrix(zero).isometry_error(), plan.transfer_matrix(generic).isometry_error());
  if (!(report.isometry_error <= tolerance)) {
    std::ostringstream msg;
    msg << "source-to-detector map is not lossless (max deviation " << report.isometry_error << ")";
    report.violations.push_back({ErrorCode::kLossy, "circuit", msg.str()});
  }
  return report;
}

/// parse + validate + compile; throws the first violation.
inline EvaluationPlan load_plan(std::string_view text) {
  const CircuitSpec spec = parse(text);
  const ValidationReport report = validate(spec);
  if (!report.ok()) throw CircuitError(report.violations.front().code, report.violations.front().message);
  return compile(spec);
}

}  // namespace fransonsim
