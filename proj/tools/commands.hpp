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

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <fstream>
#include <functional>
#include <iostream>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "mbqfi/mbqfi.hpp"
#include "scenario.hpp"

namespace mbqfi::cli {

enum ExitCode : int { kSuccess = 0, kAssertionFailure = 1, kUsageError = 2 };

struct RunOptions {
  std::string config_path;
  std::string out_prefix;
  bool oracle = false;
  int threads = 1;
  std::uint64_t seed = kDefaultSeed;
  std::optional<std::pair<double, double>> assert_slope;
  std::string assert_on = "dx1";
};

struct CommandResult {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  json summary = json::object();
  bool pass = true;
};

// ---------------------------------------------------------------------------
// Formatting

inline std::string fmt(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::string fmt(long v) { return std::to_string(v); }
inline std::string fmt(int v) { return std::to_string(v); }
inline std::string fmt(bool v) { return v ? "1" : "0"; }

/// JSON-safe number: infinities become strings.
inline json num(double v) {
  if (std::isfinite(v)) return v;
  return fmt(v);
}

inline std::string render_csv(const CommandResult& r) {
  std::ostringstream os;
  auto line = [&](const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) os << (i ? "," : "") << cells[i];
    os << "\n";
  };
  line(r.header);
  for (const auto& row : r.rows) line(row);
  return os.str();
}

/// Runs f(i) for i in [0, count) on up to `threads` workers; results land by index.
template <typename T, typename F>
std::vector<T> parallel_map(std::size_t count, int threads, F&& f) {
  std::vector<T> out(count);
  std::vector<std::exception_ptr> errors(count);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < count; i = next++) {
      try {
        out[i] = f(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const int n = std::max(1, std::min<int>(threads, static_cast<int>(count)));
  std::vector<std::thread> pool;
  for (int t = 1; t < n; ++t) pool.emplace_back(worker);
  worker();
  for (auto& th : pool) th.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Scenario realisation

struct DenseScenario {
  int n = 0;
  SpinBasis basis{1};
  DiagonalOperatorSet diag;
  PairRates rates;        ///< rates used for evolution (possibly corrupted)
  PairRates true_rates;
  DensityMatrix rho0;
  TimescaleReport timescales;
  bool singular = false;
};

inline ProbeSpec to_probe_spec(const ProbeConfig& p) {
  return std::visit(
      [](const auto& s) -> ProbeSpec {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, TwoLevelSpec>) {
          throw ConfigError("probe: two_level probes have no spin basis");
        } else {
          return s;
        }
      },
      p);
}

inline DenseScenario build_dense(const ScenarioConfig& c, int n) {
  DenseScenario s;
  s.n = n;
  s.basis = SpinBasis(n, c.dense_limit);
  s.diag = build_diagonals(c.hamiltonian, c.lindblad, s.basis);
  s.true_rates = pair_rates(s.diag);
  s.rates = s.true_rates;
  if (c.inject_fault == "scale_phase_rates") s.rates.eps *= 2.0;
  const ProbeSpec spec = to_probe_spec(c.probe);
  s.rho0 = make_probe(spec, s.basis, s.diag);
  s.singular = is_singular(spec);
  s.timescales = probe_timescales(s.rho0, s.diag, c.x1, c.x2, c.hbar, /*allow_degenerate=*/true);
  return s;
}

inline int require_sites(const ScenarioConfig& c) {
  if (!c.n_sites) throw ConfigError("n_sites: required for this command");
  return *c.n_sites;
}

inline TwoLevelProbe two_level_of(const ScenarioConfig& c, const TwoLevelSpec& s) {
  TwoLevelProbe p{s.eps, s.lambda_sq, c.x1, c.x2, c.hbar};
  p.validate();
  return p;
}

inline int hamiltonian_order(const HamiltonianSpec& h) {
  if (const auto* s = std::get_if<SpinChainUniform>(&h)) return s->k;
  if (const auto* s = std::get_if<SymmetrizedUniform>(&h)) return s->k;
  throw ConfigError("hamiltonian: closed-form GHZ sweeps need spin_chain or symmetrized_uniform");
}

// ---------------------------------------------------------------------------
// qfi

inline CommandResult cmd_qfi(const ScenarioConfig& c, const RunOptions& opt) {
  CommandResult r;
  r.header = {"t", "qfi_x1", "qfi_x2", "lower", "upper", "c_m", "c_M", "fidelity", "purity", "qcrb_x1", "qcrb_x2",
              "f12", "sandwich_ok"};
  bool sandwich_ok = true;
  double worst_dev = 0.0;
  auto emit = [&](double t, const DensityMatrix& rho, const DensityMatrix& rho0, const Eigen::MatrixXcd& d1,
                  const Eigen::MatrixXcd& d2, const Eigen::VectorXd& h) {
    const double f1 = spectral_qfi(rho, d1);
    const double f2 = spectral_qfi(rho, d2);
    const BoundReport b = qfi_bounds(rho, h, t, c.hbar);
    const bool ok = sandwich_holds(f1, b, t, c.hbar);
    sandwich_ok = sandwich_ok && ok;
    r.rows.push_back({fmt(t), fmt(f1), fmt(f2), fmt(b.lower), fmt(b.upper), fmt(b.improved ? b.c_improved : b.c_m),
                      fmt(b.c_M), fmt(fidelity(rho, rho0)), fmt(purity(rho)), fmt(qcrb(f1, c.repetitions)),
                      fmt(qcrb(f2, c.repetitions)), fmt(qfi_offdiagonal(rho, d1, d2)), fmt(ok)});
  };

  if (const auto* tl = std::get_if<TwoLevelSpec>(&c.probe)) {
    const TwoLevelProbe p = two_level_of(c, *tl);
    const DensityMatrix rho0 = two_level_state(p, 0.0);
    Eigen::VectorXd h(2);
    h << 0.0, p.eps;
    for (double t : resolve_times(c, p.tau_d())) {
      emit(t, two_level_state(p, t), rho0, two_level_derivative(p, t, Parameter::x1),
           two_level_derivative(p, t, Parameter::x2), h);
    }
    r.summary["tau_Z"] = num(p.tau_z());
    r.summary["tau_D"] = num(p.tau_d());
  } else {
    const DenseScenario s = build_dense(c, require_sites(c));
    const std::vector<double> times = resolve_times(c, s.timescales.tau_D);
    std::vector<DensityMatrix> reference;
    if (opt.oracle) {
      r.header.push_back("oracle_dev");
      const MasterEquationProblem prob = master_equation_from_diagonals(s.diag, c.x1, c.x2, c.hbar);
      std::vector<double> sorted = times;
      std::sort(sorted.begin(), sorted.end());
      if (sorted != times) throw ConfigError("times: must be ascending when --oracle is used");
      reference = integrate_master_equation(prob, s.rho0, times);
    }
    for (std::size_t i = 0; i < times.size(); ++i) {
      const double t = times[i];
      const DensityMatrix rho = evolve_dephasing(s.rho0, s.rates, c.x1, c.x2, t, c.hbar);
      emit(t, rho, s.rho0, dephasing_derivative(s.rho0, s.rates, c.x1, c.x2, t, Parameter::x1, c.hbar),
           dephasing_derivative(s.rho0, s.rates, c.x1, c.x2, t, Parameter::x2, c.hbar), s.diag.hamiltonian);
      if (opt.oracle) {
        const double dev = (rho.matrix() - reference[i].matrix()).cwiseAbs().maxCoeff();
        worst_dev = std::max(worst_dev, dev);
        r.rows.back().push_back(fmt(dev));
      }
    }
    r.summary["n_sites"] = s.n;
    r.summary["tau_Z"] = num(s.timescales.tau_Z);
    r.summary["tau_D"] = num(s.timescales.tau_D);
    r.summary["singular_probe"] = s.singular;
    if (opt.oracle) {
      r.summary["oracle_max_deviation"] = worst_dev;
      r.summary["oracle_tolerance"] = 1e-8;
    }
  }
  r.pass = sandwich_ok && worst_dev <= 1e-8;
  r.summary["command"] = "qfi";
  r.summary["rows"] = r.rows.size();
  r.summary["sandwich_ok"] = sandwich_ok;
  return r;
}

// ---------------------------------------------------------------------------
// Slope assertions

inline json slope_json(const ScalingSeries& s) {
  return {{"slope", s.fitted_slope}, {"stderr", s.slope_stderr}, {"intercept", s.intercept}};
}

inline ScalingSeries fitted(const std::vector<long>& ns, const std::vector<double>& values, const ScenarioConfig& c) {
  ScalingSeries s;
  for (std::size_t i = 0; i < ns.size(); ++i) s.samples.push_back({ns[i], values[i]});
  s.fit_min = c.fit_min;
  s.fit_max = c.fit_max;
  fit_scaling_exponent(s);
  return s;
}

inline void apply_assertion(CommandResult& r, const RunOptions& opt, const std::vector<std::string>& allowed,
                            const std::function<const ScalingSeries&(const std::string&)>& series) {
  if (!opt.assert_slope) return;
  if (std::find(allowed.begin(), allowed.end(), opt.assert_on) == allowed.end()) {
    throw ConfigError("--assert-on: '" + opt.assert_on + "' is not a series of this command");
  }
  const auto [expected, tol] = *opt.assert_slope;
  const double got = series(opt.assert_on).fitted_slope;
  const bool ok = std::abs(got - expected) <= tol;
  r.summary["assertion"] = {{"series", opt.assert_on}, {"expected", expected}, {"tolerance", tol},
                            {"observed", got}, {"pass", ok}};
  r.pass = r.pass && ok;
}

// ---------------------------------------------------------------------------
// sweep

struct SweepRow {
  double tau_Z = 0.0;
  double tau_D = 0.0;
  double dx1 = 0.0;
  double dx2 = 0.0;
};

inline SweepRow sweep_point(const ScenarioConfig& c, long n) {
  SweepRow row;
  auto from_report = [&](const TimescaleReport& rep) {
    row.tau_Z = rep.tau_Z;
    row.tau_D = rep.tau_D;
    row.dx1 = sensitivity_bound(rep, c.total_time, Parameter::x1, c.x1);
    row.dx2 = sensitivity_bound(rep, c.total_time, Parameter::x2, c.x2);
  };
  if (std::holds_alternative<GhzProbe>(c.probe)) {
    const int k = hamiltonian_order(c.hamiltonian);
    if (const auto* col = std::get_if<CollectiveSymmetrizedKBody>(&c.lindblad)) {
      TimescaleReport rep = ghz_timescales(n, k, 1, c.x1, c.x2, c.seminorm, c.lambda_gap_sq, c.hbar);
      rep.tau_D = collective_noise_tau_d(n, col->k, c.x2);
      rep.sum_variance_L = std::pow(binomial(n, col->k), 2);
      from_report(rep);
    } else {
      const int p = std::get<UncorrelatedPBody>(c.lindblad).p;
      from_report(ghz_timescales(n, k, p, c.x1, c.x2, c.seminorm, c.lambda_gap_sq, c.hbar));
    }
    return row;
  }
  if (std::holds_alternative<IsingMaxVarianceProbe>(c.probe) && n > c.dense_limit) {
    const auto* ising = std::get_if<LongRangeIsing>(&c.hamiltonian);
    const auto* unc = std::get_if<UncorrelatedPBody>(&c.lindblad);
    if (!ising || !unc) throw ConfigError("probe: ising_max_variance sweeps need long_range_ising + uncorrelated");
    from_report(ising_timescales(n, ising->alpha, unc->p, c.x1, c.x2, c.hbar));
    return row;
  }
  if (std::holds_alternative<TwoLevelSpec>(c.probe)) throw ConfigError("probe: sweeps need a spin probe");
  if (n > c.dense_limit) {
    throw ConfigError("n_range: n=" + std::to_string(n) + " exceeds dense_limit for this probe");
  }
  const DenseScenario s = build_dense(c, static_cast<int>(n));
  if (!std::holds_alternative<ProductProbe>(c.probe)) {
    from_report(s.timescales);
    return row;
  }
  // Product probe: QFI at t = factor * n * tau_D, nu = T / t repetitions.
  const double t = c.interrogation_factor * static_cast<double>(n) * s.timescales.tau_D;
  if (!std::isfinite(t)) throw ConfigError("x2: product sweeps need dephasing (x2 > 0)");
  const DensityMatrix rho = evolve_dephasing(s.rho0, s.rates, c.x1, c.x2, t, c.hbar);
  const double f1 = spectral_qfi(rho, dephasing_derivative(s.rho0, s.rates, c.x1, c.x2, t, Parameter::x1, c.hbar));
  const double f2 = spectral_qfi(rho, dephasing_derivative(s.rho0, s.rates, c.x1, c.x2, t, Parameter::x2, c.hbar));
  row.tau_Z = s.timescales.tau_Z;
  row.tau_D = s.timescales.tau_D;
  row.dx1 = std::sqrt(t / (c.total_time * f1));
  row.dx2 = std::sqrt(t / (c.total_time * f2));
  return row;
}

inline CommandResult cmd_sweep(const ScenarioConfig& c, const RunOptions& opt) {
  if (c.n_range.size() < 5) throw ConfigError("n_range: sweeps need at least 5 entries");
  CommandResult r;
  r.header = {"n", "tau_Z", "tau_D", "dx1_bound", "dx2_bound"};
  const auto rows = parallel_map<SweepRow>(c.n_range.size(), opt.threads,
                                           [&](std::size_t i) { return sweep_point(c, c.n_range[i]); });
  std::vector<double> dx1;
  std::vector<double> dx2;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    r.rows.push_back({fmt(c.n_range[i]), fmt(rows[i].tau_Z), fmt(rows[i].tau_D), fmt(rows[i].dx1), fmt(rows[i].dx2)});
    dx1.push_back(rows[i].dx1);
    dx2.push_back(rows[i].dx2);
  }
  const ScalingSeries s1 = fitted(c.n_range, dx1, c);
  const ScalingSeries s2 = fitted(c.n_range, dx2, c);
  r.summary["command"] = "sweep";
  r.summary["fit_window"] = {c.fit_min, c.fit_max};
  r.summary["dx1"] = slope_json(s1);
  r.summary["dx2"] = slope_json(s2);
  apply_assertion(r, opt, {"dx1", "dx2"},
                  [&](const std::string& which) -> const ScalingSeries& { return which == "dx1" ? s1 : s2; });
  return r;
}

// ---------------------------------------------------------------------------
// timescales

inline CommandResult cmd_timescales(const ScenarioConfig& c, const RunOptions&) {
  CommandResult r;
  r.header = {"n", "tau_Z", "tau_D", "variance_H", "sum_variance_L", "mu1", "mu2", "kappa1", "kappa2", "dx1_bound",
              "dx2_bound"};
  TimescaleReport rep;
  long n = 0;
  if (const auto* tl = std::get_if<TwoLevelSpec>(&c.probe)) {
    const TwoLevelProbe p = two_level_of(c, *tl);
    rep.tau_Z = p.tau_z();
    rep.tau_D = p.tau_d();
    rep.variance_H = p.eps * p.eps / 4.0;
    rep.sum_variance_L = p.lambda_sq / 4.0;
  } else {
    n = require_sites(c);
    if (n <= c.dense_limit) {
      rep = build_dense(c, static_cast<int>(n)).timescales;
    } else if (std::holds_alternative<GhzProbe>(c.probe)) {
      const int k = hamiltonian_order(c.hamiltonian);
      const auto* unc = std::get_if<UncorrelatedPBody>(&c.lindblad);
      if (!unc) throw ConfigError("lindblad: closed-form GHZ timescales need uncorrelated operators");
      rep = ghz_timescales(n, k, unc->p, c.x1, c.x2, c.seminorm, c.lambda_gap_sq, c.hbar);
    } else if (std::holds_alternative<IsingMaxVarianceProbe>(c.probe)) {
      const auto* ising = std::get_if<LongRangeIsing>(&c.hamiltonian);
      const auto* unc = std::get_if<UncorrelatedPBody>(&c.lindblad);
      if (!ising || !unc) throw ConfigError("probe: ising_max_variance needs long_range_ising + uncorrelated");
      rep = ising_timescales(n, ising->alpha, unc->p, c.x1, c.x2, c.hbar);
    } else {
      throw ConfigError("n_sites: exceeds dense_limit and no closed form covers this probe");
    }
  }
  const bool finite_d = std::isfinite(rep.tau_D);
  const double dx1 = finite_d ? sensitivity_bound(rep, c.total_time, Parameter::x1, c.x1) : kInfinity;
  const double dx2 = finite_d ? sensitivity_bound(rep, c.total_time, Parameter::x2, c.x2) : kInfinity;
  r.rows.push_back({fmt(n), fmt(rep.tau_Z), fmt(rep.tau_D), fmt(rep.variance_H), fmt(rep.sum_variance_L),
                    fmt(optimal_interrogation(Parameter::x1)), fmt(optimal_interrogation(Parameter::x2)),
                    fmt(kappa(Parameter::x1)), fmt(kappa(Parameter::x2)), fmt(dx1), fmt(dx2)});
  r.summary["command"] = "timescales";
  r.summary["tau_Z"] = num(rep.tau_Z);
  r.summary["tau_D"] = num(rep.tau_D);
  return r;
}

// ---------------------------------------------------------------------------
// ising

struct IsingRow {
  SeminormResult exact;
  double asymptotic = 0.0;
  double box = 0.0;
  double product_sd = 0.0;
  double dJ = 0.0;
};

inline CommandResult cmd_ising(const ScenarioConfig& c, const RunOptions& opt) {
  const auto* ising = std::get_if<LongRangeIsing>(&c.hamiltonian);
  if (!ising) throw ConfigError("hamiltonian: the ising command needs long_range_ising");
  const auto* unc = std::get_if<UncorrelatedPBody>(&c.lindblad);
  if (!unc) throw ConfigError("lindblad: the ising command needs uncorrelated operators");
  if (c.n_range.size() < 5) throw ConfigError("n_range: the ising command needs at least 5 entries");
  const double phi = std::holds_alternative<ProductProbe>(c.probe) ? std::get<ProductProbe>(c.probe).phi
                                                                   : std::numbers::pi / 8;
  const double alpha = ising->alpha;
  const auto rows = parallel_map<IsingRow>(c.n_range.size(), opt.threads, [&](std::size_t i) {
    const long n = c.n_range[i];
    IsingRow row;
    row.exact = ising_seminorm_exact(n, alpha);
    row.asymptotic = ising_seminorm_asymptotic(n, alpha);
    row.box = ising_box_closed_form(n, alpha, row.exact.argmax_q);
    row.product_sd = std::sqrt(ising_product_variance(n, alpha, phi).variance);
    const TimescaleReport rep = ising_timescales(n, alpha, unc->p, c.x1, c.x2, c.hbar);
    row.dJ = sensitivity_bound(rep, c.total_time, Parameter::x1, c.x1);
    return row;
  });
  CommandResult r;
  r.header = {"n", "seminorm_exact", "argmax_q", "seminorm_asymptotic", "ratio", "box_integral", "product_sd",
              "dJ_bound"};
  std::vector<double> semi;
  std::vector<double> prod;
  std::vector<double> dj;
  bool argmax_half = true;
  double drift = 0.0;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const long n = c.n_range[i];
    const IsingRow& row = rows[i];
    const double ratio = row.asymptotic / row.exact.value;
    r.rows.push_back({fmt(n), fmt(row.exact.value), fmt(row.exact.argmax_q), fmt(row.asymptotic), fmt(ratio),
                      fmt(row.box), fmt(row.product_sd), fmt(row.dJ)});
    semi.push_back(row.exact.value);
    prod.push_back(row.product_sd);
    dj.push_back(row.dJ);
    argmax_half = argmax_half && row.exact.argmax_q == n / 2;
    if (i > 0) {
      const double prev = rows[i - 1].asymptotic / rows[i - 1].exact.value;
      const double octaves = std::log2(static_cast<double>(n) / static_cast<double>(c.n_range[i - 1]));
      if (octaves > 0) drift = std::max(drift, std::abs(ratio / prev - 1.0) / octaves);
    }
  }
  const ScalingSeries s_semi = fitted(c.n_range, semi, c);
  const ScalingSeries s_prod = fitted(c.n_range, prod, c);
  const ScalingSeries s_dj = fitted(c.n_range, dj, c);
  r.summary["command"] = "ising";
  r.summary["alpha"] = alpha;
  r.summary["seminorm"] = slope_json(s_semi);
  r.summary["product_sd"] = slope_json(s_prod);
  r.summary["dJ"] = slope_json(s_dj);
  r.summary["argmax_is_half"] = argmax_half;
  r.summary["ratio_drift_per_octave"] = drift;
  apply_assertion(r, opt, {"dx1", "seminorm", "product_sd"}, [&](const std::string& w) -> const ScalingSeries& {
    if (w == "seminorm") return s_semi;
    if (w == "product_sd") return s_prod;
    return s_dj;
  });
  return r;
}

// ---------------------------------------------------------------------------
// verify

struct CheckRow {
  std::string suite;
  std::string scenario;
  double value = 0.0;
  double tolerance = 0.0;
  bool pass = false;
};

inline std::string describe(const ScenarioConfig& c) {
  json j = to_json(c);
  std::string s = "n=" + std::to_string(c.n_sites.value_or(0)) + " H=" + j["hamiltonian"].dump() +
                  " L=" + j["lindblad"].dump() + " probe=" + j["probe"].dump();
  std::replace(s.begin(), s.end(), ',', ';');
  return s;
}

inline std::vector<CheckRow> verify_scenario(const ScenarioConfig& c, std::uint64_t seed) {
  const int n = require_sites(c);
  if (n > kOracleSiteLimit) throw ConfigError("n_sites: verify runs oracle suites only for N <= 8");
  const DenseScenario s = build_dense(c, n);
  const std::string tag = describe(c);
  std::vector<double> times = c.times;
  if (times.empty()) {
    if (c.time_grid) {
      times = resolve_times(c, s.timescales.tau_D);
    } else {
      const double base = std::isfinite(s.timescales.tau_D) ? s.timescales.tau_D : s.timescales.tau_Z;
      for (double f : {0.05, 0.2, 0.5, 1.0, 2.0}) times.push_back(f * base);
    }
  }
  std::sort(times.begin(), times.end());
  std::vector<CheckRow> out;

  // Oracle equivalence
  const MasterEquationProblem prob = master_equation_from_diagonals(s.diag, c.x1, c.x2, c.hbar);
  const auto reference = integrate_master_equation(prob, s.rho0, times);
  double dev = 0.0;
  double trace_drift = 0.0;
  for (std::size_t i = 0; i < times.size(); ++i) {
    const DensityMatrix rho = evolve_dephasing(s.rho0, s.rates, c.x1, c.x2, times[i], c.hbar);
    dev = std::max(dev, (rho.matrix() - reference[i].matrix()).cwiseAbs().maxCoeff());
    trace_drift = std::max(trace_drift, std::abs(reference[i].matrix().trace() - Complex(1.0)));
  }
  out.push_back({"oracle_equivalence", tag, dev, 1e-8, dev <= 1e-8});
  out.push_back({"oracle_trace", tag, trace_drift, 1e-10, trace_drift <= 1e-10});

  // Bound sandwich and joint term
  double worst_sandwich = 0.0;
  bool sandwich_ok = true;
  double worst_f12 = 0.0;
  for (double t : times) {
    const DensityMatrix rho = evolve_dephasing(s.rho0, s.rates, c.x1, c.x2, t, c.hbar);
    const double f1 = spectral_qfi(rho, dephasing_derivative(s.rho0, s.rates, c.x1, c.x2, t, Parameter::x1, c.hbar));
    const BoundReport b = qfi_bounds(rho, s.diag.hamiltonian, t, c.hbar);
    const double scale = std::max(4.0 * t * t * b.variance_H / (c.hbar * c.hbar), 1e-5);
    worst_sandwich = std::max({worst_sandwich, (b.lower - f1) / scale, (f1 - b.upper) / scale});
    sandwich_ok = sandwich_ok && sandwich_holds(f1, b, t, c.hbar);

    auto ev1 = [&](double x) { return evolve_dephasing(s.rho0, s.rates, x, c.x2, t, c.hbar).matrix(); };
    auto ev2 = [&](double x) { return evolve_dephasing(s.rho0, s.rates, c.x1, x, t, c.hbar).matrix(); };
    if (c.x2 > default_difference_step(c.x2)) {
      const Eigen::MatrixXcd d1 = finite_difference_drho(ev1, c.x1);
      const Eigen::MatrixXcd d2 = finite_difference_drho(ev2, c.x2);
      worst_f12 = std::max(worst_f12, std::abs(qfi_offdiagonal(rho, d1, d2)));
    }
  }
  out.push_back({"bound_sandwich", tag, worst_sandwich, 1e-9, sandwich_ok});
  out.push_back({"joint_term", tag, worst_f12, 1e-8, worst_f12 < 1e-8});

  // Product-state eigenvalue structure for the same N and p
  if (const auto* unc = std::get_if<UncorrelatedPBody>(&c.lindblad)) {
    const double gamma = c.x2 > 0.0 ? c.x2 : 1.0;
    const DiagonalOperatorSet d0 =
        build_diagonals(CustomDiagonal{std::vector<double>(s.basis.dimension(), 0.0)}, c.lindblad, s.basis);
    const PairRates pr = pair_rates(d0);
    const DensityMatrix p0 = make_probe(ProductProbe{std::numbers::pi / 4}, s.basis, d0);
    std::vector<double> gaps;
    for (const auto& g : gap_spectrum_from_reference(n, unc->p)) gaps.push_back(g.lambda_sq);
    std::vector<double> distinct = gaps;
    std::sort(distinct.begin(), distinct.end());
    distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
    distinct.erase(std::remove(distinct.begin(), distinct.end(), 0.0), distinct.end());
    const double slow = gamma * distinct.front() / 2.0;
    const auto ts = spectrum_sample_times(slow, distinct.size());
    const auto rep = product_state_spectrum_check(p0, pr, ts, gaps, gamma, seed);
    const double residual = std::max({rep.max_residual, rep.fit_residual, rep.unmatched_weight});
    out.push_back({"spectrum_residual", tag, residual, 1e-8, residual < 1e-8});
    out.push_back({"spectrum_kappa_sum", tag, rep.max_kappa_sum, 1e-8, rep.max_kappa_sum < 1e-8});
    const double rel = std::abs(rep.slowest_rate - slow) / slow;
    out.push_back({"spectrum_slowest_rate", tag, rel, 1e-9, rel < 1e-9});
  }
  return out;
}

inline std::vector<ScenarioConfig> bundled_corpus() {
  std::vector<ScenarioConfig> corpus;
  auto add = [&](int n, HamiltonianSpec h, LindbladSpec l, ProbeConfig p, double x2) {
    ScenarioConfig c;
    c.n_sites = n;
    c.hamiltonian = std::move(h);
    c.lindblad = std::move(l);
    c.probe = std::move(p);
    c.x2 = x2;
    corpus.push_back(std::move(c));
  };
  add(4, SpinChainUniform{1}, UncorrelatedPBody{1}, GhzProbe{}, 0.5);
  add(4, SpinChainUniform{3}, UncorrelatedPBody{2}, GhzProbe{}, 0.5);
  add(5, SymmetrizedUniform{3, -1.0, 1.0}, UncorrelatedPBody{2}, MaxVarianceProbe{}, 0.3);
  add(5, SpinChainUniform{2}, UncorrelatedPBody{1}, ProductProbe{std::numbers::pi / 8}, 0.5);
  add(6, SpinChainUniform{1}, UncorrelatedPBody{2}, ProductProbe{3 * std::numbers::pi / 8}, 0.5);
  add(4, LongRangeIsing{1.0}, UncorrelatedPBody{1}, IsingMaxVarianceProbe{}, 0.5);
  add(5, SpinChainUniform{1}, CollectiveSymmetrizedKBody{1}, GhzProbe{}, 0.2);
  return corpus;
}

inline CommandResult cmd_verify(const std::vector<ScenarioConfig>& corpus, const RunOptions& opt) {
  const auto per = parallel_map<std::vector<CheckRow>>(
      corpus.size(), opt.threads, [&](std::size_t i) { return verify_scenario(corpus[i], opt.seed); });
  CommandResult r;
  r.header = {"suite", "scenario", "value", "tolerance", "pass"};
  json checks = json::array();
  for (const auto& rows : per) {
    for (const auto& row : rows) {
      r.rows.push_back({row.suite, row.scenario, fmt(row.value), fmt(row.tolerance), fmt(row.pass)});
      checks.push_back({{"suite", row.suite}, {"scenario", row.scenario}, {"value", num(row.value)},
                        {"tolerance", row.tolerance}, {"pass", row.pass}});
      r.pass = r.pass && row.pass;
    }
  }
  r.summary["command"] = "verify";
  r.summary["checks"] = checks;
  r.summary["scenarios"] = corpus.size();
  return r;
}

// ---------------------------------------------------------------------------
// Entry point

inline std::pair<double, double> parse_assertion(const std::string& text) {
  const auto colon = text.rfind(':');
  if (colon == std::string::npos || colon == 0) throw ConfigError("--assert-slope: expected <float>:<tol>");
  try {
    std::size_t used = 0;
    const double expected = std::stod(text.substr(0, colon), &used);
    if (used != colon) throw std::invalid_argument("trailing");
    const std::string tol_text = text.substr(colon + 1);
    const double tol = std::stod(tol_text, &used);
    if (used != tol_text.size() || !(tol >= 0.0)) throw std::invalid_argument("tol");
    return {expected, tol};
  } catch (const std::logic_error&) {
    throw ConfigError("--assert-slope: expected <float>:<tol>, got '" + text + "'");
  }
}

inline void write_outputs(const CommandResult& r, const ScenarioConfig* c, const RunOptions& opt,
                          std::ostream& out, std::ostream& err) {
  std::string csv_path;
  std::string json_path;
  if (!opt.out_prefix.empty()) {
    csv_path = opt.out_prefix + ".csv";
    json_path = opt.out_prefix + ".json";
  } else if (c != nullptr) {
    csv_path = c->output_csv;
    json_path = c->output_json;
  }
  json summary = r.summary;
  summary["pass"] = r.pass;
  if (c != nullptr) summary["config"] = to_json(*c);
  const std::string csv = render_csv(r);
  const std::string js = summary.dump(2) + "\n";
  auto write_file = [](const std::string& path, const std::string& text) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw ConfigError("cannot write '" + path + "'");
    f << text;
  };
  if (csv_path.empty()) out << csv; else write_file(csv_path, csv);
  if (json_path.empty()) err << js; else write_file(json_path, js);
}

inline int run(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"Quantum Fisher information and scaling analysis for dephased spin ensembles", "mbqfi"};
  app.require_subcommand(1, 1);
  RunOptions opt;
  std::string seed_text;
  std::string assertion;
  auto add_common = [&](CLI::App* sub, bool config_required) {
    auto* cfg = sub->add_option("--config", opt.config_path, "scenario JSON file");
    if (config_required) cfg->required();
    sub->add_option("--out", opt.out_prefix, "write <prefix>.csv and <prefix>.json");
    sub->add_option("--threads", opt.threads, "worker threads")->check(CLI::Range(1, 256));
    sub->add_option("--seed", seed_text, "hex seed for randomized checks");
  };
  auto* qfi = app.add_subcommand("qfi", "QFI, bounds and observables per time point");
  add_common(qfi, true);
  qfi->add_flag("--oracle", opt.oracle, "cross-check against master-equation integration");
  auto* sweep = app.add_subcommand("sweep", "timescales and sensitivity bounds over n_range with slope fits");
  add_common(sweep, true);
  auto* verify = app.add_subcommand("verify", "oracle, sandwich, joint-term and spectrum suites");
  add_common(verify, false);
  auto* ts = app.add_subcommand("timescales", "tau_Z, tau_D and Cramer-Rao bounds for one scenario");
  add_common(ts, true);
  auto* ising = app.add_subcommand("ising", "long-range Ising seminorm and variance scaling");
  add_common(ising, true);
  for (auto* sub : {sweep, ising}) {
    sub->add_option("--assert-slope", assertion, "expected slope and tolerance, <float>:<tol>");
    sub->add_option("--assert-on", opt.assert_on, "series checked by --assert-slope");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    return kUsageError;
  }

  try {
    if (!seed_text.empty()) {
      std::size_t used = 0;
      opt.seed = std::stoull(seed_text, &used, 16);
      if (used != seed_text.size()) throw ConfigError("--seed: expected a hex integer");
    }
    if (!assertion.empty()) opt.assert_slope = parse_assertion(assertion);

    std::optional<ScenarioConfig> config;
    if (!opt.config_path.empty()) config = load_config(opt.config_path);

    CommandResult result;
    if (qfi->parsed()) {
      result = cmd_qfi(*config, opt);
    } else if (sweep->parsed()) {
      result = cmd_sweep(*config, opt);
    } else if (ts->parsed()) {
      result = cmd_timescales(*config, opt);
    } else if (ising->parsed()) {
      result = cmd_ising(*config, opt);
    } else {
      result = cmd_verify(config ? std::vector<ScenarioConfig>{*config} : bundled_corpus(), opt);
    }
    write_outputs(result, config ? &*config : nullptr, opt, out, err);
    return result.pass ? kSuccess : kAssertionFailure;
  } catch (const std::logic_error& e) {
    err << "error: " << e.what() << "\n";
    return kUsageError;
  } catch (const std::runtime_error& e) {
    err << "error: " << e.what() << "\n";
    return kUsageError;
  }
}

}  // namespace mbqfi::cli
