// Copyright 2026 The mbqfi Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <json.hpp>

#include <cmath>
#include <fstream>
#include <numbers>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "mbqfi/mbqfi.hpp"

namespace mbqfi::cli {

using nlohmann::json;

/// Config rejected before any computation; the message names the field.
class ConfigError : public std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Explicit two-level probe, no spin basis involved.
struct TwoLevelSpec {
  double eps = 2.0;
  double lambda_sq = 4.0;
  bool operator==(const TwoLevelSpec&) const = default;
};

using ProbeConfig = std::variant<MaxVarianceProbe, GhzProbe, ProductProbe, IsingMaxVarianceProbe, TwoLevelSpec>;

struct TimeGrid {
  double start = 0.01;
  double stop = 1.0;
  int count = 5;
  bool log = true;
  bool relative_to_tau_d = false;
  bool operator==(const TimeGrid&) const = default;
};

struct ScenarioConfig {
  std::optional<int> n_sites;
  std::vector<long> n_range;
  HamiltonianSpec hamiltonian = SpinChainUniform{1};
  LindbladSpec lindblad = UncorrelatedPBody{1};
  ProbeConfig probe = GhzProbe{};
  double x1 = 1.0;
  double x2 = 1.0;
  double hbar = 1.0;
  double total_time = 1.0;
  long repetitions = 1;
  std::vector<double> times;
  std::optional<TimeGrid> time_grid;
  long fit_min = 0;
  long fit_max = 0;
  double interrogation_factor = 0.1;
  double seminorm = 2.0;
  double lambda_gap_sq = 4.0;
  int dense_limit = kDefaultDenseLimit;
  std::string inject_fault;
  std::string output_csv;
  std::string output_json;

  bool operator==(const ScenarioConfig&) const = default;
};

namespace detail {

inline std::string path_join(const std::string& where, const std::string& key) {
  return where.empty() ? key : where + "." + key;
}

inline void reject_unknown(const json& j, const std::set<std::string>& allowed, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + ": expected an object");
  for (const auto& [key, _] : j.items()) {
    if (!allowed.count(key)) throw ConfigError(path_join(where, key) + ": unknown key");
  }
}

template <typename T>
T get_field(const json& j, const std::string& key, const std::string& where) {
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(path_join(where, key) + ": " + (j.contains(key) ? "wrong type" : "missing"));
  }
}

template <typename T>
void read_optional(const json& j, const std::string& key, T& out, const std::string& where) {
  if (j.contains(key)) out = get_field<T>(j, key, where);
}

inline std::string type_of(const json& j, const std::string& where) {
  return get_field<std::string>(j, "type", where);
}

inline HamiltonianSpec parse_hamiltonian(const json& j) {
  const std::string w = "hamiltonian";
  const std::string t = type_of(j, w);
  if (t == "spin_chain") {
    reject_unknown(j, {"type", "k"}, w);
    return SpinChainUniform{get_field<int>(j, "k", w)};
  }
  if (t == "symmetrized_uniform") {
    reject_unknown(j, {"type", "k", "eps_m", "eps_M"}, w);
    SymmetrizedUniform s{get_field<int>(j, "k", w), -1.0, 1.0};
    read_optional(j, "eps_m", s.eps_m, w);
    read_optional(j, "eps_M", s.eps_M, w);
    if (s.eps_m > s.eps_M) throw ConfigError("hamiltonian.eps_m: must not exceed eps_M");
    return s;
  }
  if (t == "long_range_ising") {
    reject_unknown(j, {"type", "alpha"}, w);
    LongRangeIsing s{get_field<double>(j, "alpha", w)};
    if (!(s.alpha >= 0.0)) throw ConfigError("hamiltonian.alpha: must be >= 0");
    return s;
  }
  if (t == "custom") {
    reject_unknown(j, {"type", "eigenvalues"}, w);
    return CustomDiagonal{get_field<std::vector<double>>(j, "eigenvalues", w)};
  }
  throw ConfigError("hamiltonian.type: unknown value '" + t + "'");
}

inline json dump_hamiltonian(const HamiltonianSpec& h) {
  return std::visit(
      [](const auto& s) -> json {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, SpinChainUniform>) return {{"type", "spin_chain"}, {"k", s.k}};
        if constexpr (std::is_same_v<T, SymmetrizedUniform>) {
          return {{"type", "symmetrized_uniform"}, {"k", s.k}, {"eps_m", s.eps_m}, {"eps_M", s.eps_M}};
        }
        if constexpr (std::is_same_v<T, LongRangeIsing>) return {{"type", "long_range_ising"}, {"alpha", s.alpha}};
        if constexpr (std::is_same_v<T, CustomDiagonal>) return {{"type", "custom"}, {"eigenvalues", s.eigenvalues}};
      },
      h);
}

inline LindbladSpec parse_lindblad(const json& j) {
  const std::string w = "lindblad";
  const std::string t = type_of(j, w);
  if (t == "uncorrelated") {
    reject_unknown(j, {"type", "p"}, w);
    return UncorrelatedPBody{get_field<int>(j, "p", w)};
  }
  if (t == "collective") {
    reject_unknown(j, {"type", "k"}, w);
    return CollectiveSymmetrizedKBody{get_field<int>(j, "k", w)};
  }
  throw ConfigError("lindblad.type: unknown value '" + t + "'");
}

inline json dump_lindblad(const LindbladSpec& l) {
  if (const auto* u = std::get_if<UncorrelatedPBody>(&l)) return {{"type", "uncorrelated"}, {"p", u->p}};
  return {{"type", "collective"}, {"k", std::get<CollectiveSymmetrizedKBody>(l).k}};
}

inline ProbeConfig parse_probe(const json& j) {
  const std::string w = "probe";
  const std::string t = type_of(j, w);
  if (t == "ghz") {
    reject_unknown(j, {"type"}, w);
    return GhzProbe{};
  }
  if (t == "max_variance") {
    reject_unknown(j, {"type"}, w);
    return MaxVarianceProbe{};
  }
  if (t == "ising_max_variance") {
    reject_unknown(j, {"type"}, w);
    return IsingMaxVarianceProbe{};
  }
  if (t == "product") {
    reject_unknown(j, {"type", "phi"}, w);
    ProductProbe p{get_field<double>(j, "phi", w)};
    if (!(p.phi > 0.0 && p.phi < std::numbers::pi / 2)) throw ConfigError("probe.phi: must lie in (0, pi/2)");
    return p;
  }
  if (t == "two_level") {
    reject_unknown(j, {"type", "eps", "lambda_sq"}, w);
    TwoLevelSpec s{get_field<double>(j, "eps", w), get_field<double>(j, "lambda_sq", w)};
    if (!(s.eps >= 0.0)) throw ConfigError("probe.eps: must be >= 0");
    if (!(s.lambda_sq >= 0.0)) throw ConfigError("probe.lambda_sq: must be >= 0");
    return s;
  }
  throw ConfigError("probe.type: unknown value '" + t + "'");
}

inline json dump_probe(const ProbeConfig& p) {
  return std::visit(
      [](const auto& s) -> json {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, GhzProbe>) return {{"type", "ghz"}};
        if constexpr (std::is_same_v<T, MaxVarianceProbe>) return {{"type", "max_variance"}};
        if constexpr (std::is_same_v<T, IsingMaxVarianceProbe>) return {{"type", "ising_max_variance"}};
        if constexpr (std::is_same_v<T, ProductProbe>) return {{"type", "product"}, {"phi", s.phi}};
        if constexpr (std::is_same_v<T, TwoLevelSpec>) {
          return {{"type", "two_level"}, {"eps", s.eps}, {"lambda_sq", s.lambda_sq}};
        }
      },
      p);
}

inline std::vector<long> parse_n_range(const json& j) {
  if (j.is_array()) {
    std::vector<long> out;
    for (const auto& v : j) {
      if (!v.is_number_integer()) throw ConfigError("n_range: entries must be integers");
      out.push_back(v.get<long>());
    }
    return out;
  }
  const std::string w = "n_range";
  reject_unknown(j, {"from", "to", "step", "log_count"}, w);
  const long from = get_field<long>(j, "from", w);
  const long to = get_field<long>(j, "to", w);
  if (from < 1 || to < from) throw ConfigError("n_range: need 1 <= from <= to");
  if (j.contains("log_count")) {
    if (j.contains("step")) throw ConfigError("n_range: step and log_count are exclusive");
    const int count = get_field<int>(j, "log_count", w);
    if (count < 2) throw ConfigError("n_range.log_count: must be >= 2");
    return log_range(from, to, count);
  }
  long step = 1;
  read_optional(j, "step", step, w);
  if (step < 1) throw ConfigError("n_range.step: must be >= 1");
  std::vector<long> out;
  for (long n = from; n <= to; n += step) out.push_back(n);
  return out;
}

inline TimeGrid parse_time_grid(const json& j) {
  const std::string w = "time_grid";
  reject_unknown(j, {"start", "stop", "count", "scale", "unit"}, w);
  TimeGrid g;
  g.start = get_field<double>(j, "start", w);
  g.stop = get_field<double>(j, "stop", w);
  g.count = get_field<int>(j, "count", w);
  std::string scale = "log";
  std::string unit = "absolute";
  read_optional(j, "scale", scale, w);
  read_optional(j, "unit", unit, w);
  if (scale != "log" && scale != "linear") throw ConfigError("time_grid.scale: expected 'log' or 'linear'");
  if (unit != "absolute" && unit != "tau_d") throw ConfigError("time_grid.unit: expected 'absolute' or 'tau_d'");
  g.log = scale == "log";
  g.relative_to_tau_d = unit == "tau_d";
  if (g.count < 1) throw ConfigError("time_grid.count: must be >= 1");
  if (!(g.start >= 0.0) || g.stop < g.start) throw ConfigError("time_grid: need 0 <= start <= stop");
  if (g.log && !(g.start > 0.0)) throw ConfigError("time_grid.start: log grids need start > 0");
  return g;
}

inline json dump_time_grid(const TimeGrid& g) {
  return {{"start", g.start},
          {"stop", g.stop},
          {"count", g.count},
          {"scale", g.log ? "log" : "linear"},
          {"unit", g.relative_to_tau_d ? "tau_d" : "absolute"}};
}

}  // namespace detail

inline ScenarioConfig parse_config(const json& j) {
  using namespace detail;
  reject_unknown(j,
                 {"n_sites", "n_range", "hamiltonian", "lindblad", "probe", "x1", "x2", "hbar", "total_time",
                  "repetitions", "times", "time_grid", "fit_window", "interrogation_factor", "seminorm",
                  "lambda_gap_sq", "dense_limit", "inject_fault", "output"},
                 "");
  ScenarioConfig c;
  if (j.contains("n_sites")) {
    c.n_sites = get_field<int>(j, "n_sites", "");
    if (*c.n_sites < 1) throw ConfigError("n_sites: must be >= 1");
  }
  if (j.contains("n_range")) c.n_range = parse_n_range(j.at("n_range"));
  if (j.contains("hamiltonian")) c.hamiltonian = parse_hamiltonian(j.at("hamiltonian"));
  if (j.contains("lindblad")) c.lindblad = parse_lindblad(j.at("lindblad"));
  if (j.contains("probe")) c.probe = parse_probe(j.at("probe"));
  read_optional(j, "x1", c.x1, "");
  read_optional(j, "x2", c.x2, "");
  read_optional(j, "hbar", c.hbar, "");
  read_optional(j, "total_time", c.total_time, "");
  read_optional(j, "repetitions", c.repetitions, "");
  read_optional(j, "times", c.times, "");
  if (j.contains("time_grid")) c.time_grid = parse_time_grid(j.at("time_grid"));
  if (j.contains("fit_window")) {
    const auto w = get_field<std::vector<long>>(j, "fit_window", "");
    if (w.size() != 2 || w[0] > w[1]) throw ConfigError("fit_window: expected [n_min, n_max]");
    c.fit_min = w[0];
    c.fit_max = w[1];
  }
  read_optional(j, "interrogation_factor", c.interrogation_factor, "");
  read_optional(j, "seminorm", c.seminorm, "");
  read_optional(j, "lambda_gap_sq", c.lambda_gap_sq, "");
  read_optional(j, "dense_limit", c.dense_limit, "");
  read_optional(j, "inject_fault", c.inject_fault, "");
  if (j.contains("output")) {
    const json& o = j.at("output");
    reject_unknown(o, {"csv", "json"}, "output");
    read_optional(o, "csv", c.output_csv, "output");
    read_optional(o, "json", c.output_json, "output");
  }

  if (!(c.x2 >= 0.0)) throw ConfigError("x2: must be >= 0");
  if (!(c.hbar > 0.0)) throw ConfigError("hbar: must be > 0");
  if (!(c.total_time > 0.0)) throw ConfigError("total_time: must be > 0");
  if (c.repetitions < 1) throw ConfigError("repetitions: must be >= 1");
  if (!(c.interrogation_factor > 0.0)) throw ConfigError("interrogation_factor: must be > 0");
  if (!(c.seminorm > 0.0)) throw ConfigError("seminorm: must be > 0");
  if (!(c.lambda_gap_sq >= 0.0)) throw ConfigError("lambda_gap_sq: must be >= 0");
  if (c.dense_limit < 1 || c.dense_limit > 20) throw ConfigError("dense_limit: must lie in 1..20");
  if (!c.inject_fault.empty() && c.inject_fault != "scale_phase_rates") {
    throw ConfigError("inject_fault: only 'scale_phase_rates' is recognised");
  }
  for (double t : c.times) {
    if (!(t >= 0.0)) throw ConfigError("times: entries must be >= 0");
  }
  if (!c.times.empty() && c.time_grid) throw ConfigError("times and time_grid are exclusive");
  return c;
}

inline json to_json(const ScenarioConfig& c) {
  using namespace detail;
  json j;
  if (c.n_sites) j["n_sites"] = *c.n_sites;
  if (!c.n_range.empty()) j["n_range"] = c.n_range;
  j["hamiltonian"] = dump_hamiltonian(c.hamiltonian);
  j["lindblad"] = dump_lindblad(c.lindblad);
  j["probe"] = dump_probe(c.probe);
  j["x1"] = c.x1;
  j["x2"] = c.x2;
  j["hbar"] = c.hbar;
  j["total_time"] = c.total_time;
  j["repetitions"] = c.repetitions;
  if (!c.times.empty()) j["times"] = c.times;
  if (c.time_grid) j["time_grid"] = dump_time_grid(*c.time_grid);
  if (c.fit_min != 0 || c.fit_max != 0) j["fit_window"] = {c.fit_min, c.fit_max};
  j["interrogation_factor"] = c.interrogation_factor;
  j["seminorm"] = c.seminorm;
  j["lambda_gap_sq"] = c.lambda_gap_sq;
  j["dense_limit"] = c.dense_limit;
  if (!c.inject_fault.empty()) j["inject_fault"] = c.inject_fault;
  if (!c.output_csv.empty() || !c.output_json.empty()) {
    json o = json::object();
    if (!c.output_csv.empty()) o["csv"] = c.output_csv;
    if (!c.output_json.empty()) o["json"] = c.output_json;
    j["output"] = o;
  }
  return j;
}

inline ScenarioConfig parse_config_text(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("malformed JSON: ") + e.what());
  }
  return parse_config(j);
}

inline ScenarioConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  const std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return parse_config_text(text);
}

/// Time points for a scenario; tau_d is the probe's decoherence time when the
/// grid is relative.
inline std::vector<double> resolve_times(const ScenarioConfig& c, double tau_d) {
  if (!c.times.empty()) return c.times;
  const TimeGrid g = c.time_grid.value_or(TimeGrid{});
  const double unit = g.relative_to_tau_d ? tau_d : 1.0;
  if (!std::isfinite(unit)) throw ConfigError("time_grid.unit: tau_d is infinite for this scenario (x2 = 0)");
  std::vector<double> out;
  for (int i = 0; i < g.count; ++i) {
    const double f = g.count == 1 ? 0.0 : static_cast<double>(i) / (g.count - 1);
    const double v = g.log ? std::exp(std::log(g.start) * (1.0 - f) + std::log(g.stop) * f)
                           : g.start + (g.stop - g.start) * f;
    out.push_back(v * unit);
  }
  return out;
}

}  // namespace mbqfi::cli
