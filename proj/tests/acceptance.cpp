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

// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any failure.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <numbers>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "mbqfi/mbqfi.hpp"

namespace {

using namespace mbqfi;

struct Verdict {
  bool pass = true;
  std::string detail;
};

std::string sci(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

struct Case {
  int n;
  int k;
  int p;
  ProbeSpec probe;
  std::string label;
};

std::vector<double> geomspace(double lo, double hi, int count) {
  std::vector<double> v;
  for (int i = 0; i < count; ++i) v.push_back(lo * std::pow(hi / lo, static_cast<double>(i) / (count - 1)));
  return v;
}

// GHZ needs an odd body order to have a nonzero energy gap between its branches.
ProbeSpec probe_for(int k, int index) {
  if (index % 3 == 0 && k % 2 == 1) return GhzProbe{};
  if (index % 3 == 1) return MaxVarianceProbe{};
  return ProductProbe{std::numbers::pi / 8};
}

const char* probe_name(const ProbeSpec& p) {
  if (std::holds_alternative<GhzProbe>(p)) return "ghz";
  if (std::holds_alternative<MaxVarianceProbe>(p)) return "maxvar";
  return "product";
}

// Time unit for sampling: tau_D, or tau_Z when the probe does not dephase.
double probe_time_unit(const DensityMatrix& rho0, const DiagonalOperatorSet& d) {
  const TimescaleReport r = probe_timescales(rho0, d, 1.0, 1.0, 1.0, true);
  return std::isfinite(r.tau_D) ? r.tau_D : r.tau_Z;
}

// 1. exact dephasing solution vs RK4 integration of the master equation
Verdict criterion_oracle() {
  const std::vector<std::tuple<int, int, int>> grid{{3, 1, 1}, {3, 2, 1}, {4, 2, 2}, {4, 1, 1},
                                                    {5, 3, 2}, {5, 2, 1}, {6, 1, 1}, {6, 2, 2},
                                                    {7, 3, 2}, {7, 2, 1}, {8, 1, 1}, {8, 2, 2}};
  double worst = 0.0;
  std::string where;
  int index = 0;
  for (auto [n, k, p] : grid) {
    const SpinBasis b = build_basis(n);
    const auto d = build_diagonals(SpinChainUniform{k}, UncorrelatedPBody{p}, b);
    const ProbeSpec probe = probe_for(k, index++);
    const DensityMatrix rho0 = make_probe(probe, b, d);
    const auto rates = pair_rates(d);
    const double td = probe_time_unit(rho0, d);
    const std::vector<double> ts = geomspace(0.01 * td, 2.0 * td, 5);
    const auto ref = integrate_master_equation(master_equation_from_diagonals(d, 1.0, 1.0), rho0, ts);
    for (std::size_t i = 0; i < ts.size(); ++i) {
      const double dev =
          (evolve_dephasing(rho0, rates, 1.0, 1.0, ts[i]).matrix() - ref[i].matrix()).cwiseAbs().maxCoeff();
      if (dev > worst) {
        worst = dev;
        where = "N=" + std::to_string(n) + " k=" + std::to_string(k) + " p=" + std::to_string(p) + " " +
                probe_name(probe);
      }
    }
  }
  return {worst <= 1e-8, "12 scenarios x 5 times, max entry deviation " + sci(worst) + " (" + where + ")"};
}

// 2. spectral QFI from finite differences vs the two-level closed forms
Verdict criterion_analytic_qfi() {
  double worst = 0.0;
  const TwoLevelProbe tl{2.0, 4.0, 1.0, 0.5};
  for (double s : geomspace(0.01, 3.0, 30)) {
    const double t = s * tl.tau_d();
    const DensityMatrix rho = two_level_state(tl, t);
    for (Parameter w : {Parameter::x1, Parameter::x2}) {
      auto ev = [&](double x) -> Eigen::MatrixXcd {
        TwoLevelProbe q = tl;
        (w == Parameter::x1 ? q.x1 : q.x2) = x;
        return two_level_state(q, t).matrix();
      };
      const double x = w == Parameter::x1 ? tl.x1 : tl.x2;
      const double f = spectral_qfi(rho, finite_difference_drho(ev, x));
      worst = std::max(worst, std::abs(f / analytic_qfi(tl, w, t) - 1.0));
    }
  }
  const double two_level_worst = worst;

  // N = 4 GHZ, derivative from the integrator, reference from the support block
  for (auto [k, p] : {std::pair{1, 1}, {1, 3}, {3, 1}, {3, 3}}) {
    const SpinBasis b = build_basis(4);
    const auto d = build_diagonals(SpinChainUniform{k}, UncorrelatedPBody{p}, b);
    const DensityMatrix rho0 = make_probe(GhzProbe{}, b, d);
    const auto [lo, hi] = probe_support(GhzProbe{}, b, d);
    const double x1 = 1.0, x2 = 0.5;
    const TwoLevelProbe ref = reduce_to_two_level(d, lo, hi, x1, x2);
    const double dt = std::min(ref.tau_z(), ref.tau_d()) / 2000.0;
    for (double s : {0.01, 0.1, 0.5, 1.0, 3.0}) {
      const double t = s * ref.tau_d();
      const DensityMatrix rho = evolve_dephasing(rho0, pair_rates(d), x1, x2, t);
      for (Parameter w : {Parameter::x1, Parameter::x2}) {
        auto ev = [&](double x) -> Eigen::MatrixXcd {
          const auto prob = master_equation_from_diagonals(d, w == Parameter::x1 ? x : x1, w == Parameter::x2 ? x : x2);
          return integrate_master_equation(prob, rho0, t, dt).matrix();
        };
        const double x = w == Parameter::x1 ? x1 : x2;
        const double f = spectral_qfi(rho, finite_difference_drho(ev, x, 1e-4 * std::max(1.0, x)));
        worst = std::max(worst, std::abs(f / analytic_qfi(ref, w, t) - 1.0));
      }
    }
  }
  return {worst <= 1e-6, "max relative error " + sci(worst) + " (two-level alone " + sci(two_level_worst) +
                             "), t/tau_D in [0.01, 3], N=4 GHZ k,p in {1,3}"};
}

struct CorpusStats {
  double sandwich_excess = -1e300;  // max over (lower - F, F - upper) / scale
  bool sandwich_ok = true;
  long points = 0;
  double f12 = 0.0;
};

// Corpus for 3 and 9: max-variance, GHZ (odd k), product at pi/8 and 3pi/8;
// N <= 8, k, p <= 3, 5 times each.
CorpusStats run_corpus() {
  CorpusStats st;
  for (int n = 3; n <= 8; ++n) {
    const SpinBasis b = build_basis(n);
    for (int k = 1; k <= 3; ++k) {
      for (int p = 1; p <= 3; ++p) {
        const auto d = build_diagonals(SpinChainUniform{k}, UncorrelatedPBody{p}, b);
        const auto rates = pair_rates(d);
        std::vector<ProbeSpec> probes{MaxVarianceProbe{}, ProductProbe{std::numbers::pi / 8},
                                      ProductProbe{3 * std::numbers::pi / 8}};
        if (k % 2 == 1) probes.push_back(GhzProbe{});
        for (const ProbeSpec& probe : probes) {
          const DensityMatrix rho0 = make_probe(probe, b, d);
          const double td = probe_time_unit(rho0, d);
          for (double t : geomspace(0.01 * td, 2.0 * td, 5)) {
            const DensityMatrix rho = evolve_dephasing(rho0, rates, 1.0, 1.0, t);
            const auto d1 = dephasing_derivative(rho0, rates, 1.0, 1.0, t, Parameter::x1);
            const auto d2 = dephasing_derivative(rho0, rates, 1.0, 1.0, t, Parameter::x2);
            const double f = spectral_qfi(rho, d1);
            const BoundReport r = qfi_bounds(rho, d.hamiltonian, t);
            const double scale = std::max(4.0 * t * t * r.variance_H, 1e-5);
            st.sandwich_excess = std::max({st.sandwich_excess, (r.lower - f) / scale, (f - r.upper) / scale});
            st.sandwich_ok = st.sandwich_ok && sandwich_holds(f, r, t);
            st.f12 = std::max(st.f12, std::abs(qfi_offdiagonal(rho, d1, d2)));
            ++st.points;
          }
        }
      }
    }
  }
  return st;
}

// 3. bound sandwich
Verdict criterion_sandwich(const CorpusStats& st) {
  const TwoLevelProbe tl{2.0, 4.0, 1.0, 0.5};
  Eigen::VectorXd h(2);
  h << -1.0, 1.0;
  double coeff = 0.0;
  for (double s : geomspace(0.01, 3.0, 20)) {
    const double t = s * tl.tau_d();
    const BoundReport r = qfi_bounds(two_level_state(tl, t), h, t);
    const double e = std::exp(-4.0 * t / tl.tau_d());
    coeff = std::max({coeff, std::abs(r.c_m - e), std::abs(r.c_M - e)});
  }
  return {st.sandwich_ok && coeff <= 1e-10,
          std::to_string(st.points) + " evolved states, worst relative excess " + sci(st.sandwich_excess) +
              " (slack 1e-9); two-level |c - e^{-4t/tau_D}| max " + sci(coeff)};
}

// 4. interrogation optima
Verdict criterion_optima() {
  const double mu1 = optimal_interrogation(Parameter::x1);
  const double mu2 = optimal_interrogation(Parameter::x2);
  const double res = std::abs(std::exp(-4.0 * mu2) - (1.0 - 2.0 * mu2));
  const bool ok = mu1 == 0.5 && res <= 1e-12 && std::abs(mu2 - 0.40) <= 0.01;
  return {ok, "mu1 = " + sci(mu1) + ", mu2 = " + std::to_string(mu2) + ", residual " + sci(res)};
}

// 5. combinatorics against enumeration
Verdict criterion_combinatorics() {
  long checked = 0;
  bool ok = true;
  for (int n = 1; n <= 12 && ok; ++n) {
    const SpinBasis b = build_basis(n);
    for (int k = 1; k <= n && ok; ++k) {
      for (int q = 0; q <= n; ++q) {
        DegeneracyCount e;
        for_each_combination(n, k, [&](std::span<const int> sites) {
          (zprod_eigenvalue(b, b.reference_index(q), sites) > 0 ? e.plus : e.minus) += 1;
        });
        const DegeneracyCount f = kbody_degeneracy(n, k, q);
        ok = ok && f.plus == e.plus && f.minus == e.minus && f.plus + f.minus == binomial_exact(n, k);
        ++checked;
      }
    }
  }
  long gaps = 0;
  for (int n = 2; n <= 10 && ok; ++n) {
    const SpinBasis b = build_basis(n);
    for (int p = 1; p < n / 2; ++p) {
      const auto rates = pair_rates(build_diagonals(SpinChainUniform{1}, UncorrelatedPBody{p}, b));
      double lo = std::numeric_limits<double>::infinity();
      for (Eigen::Index j = 0; j < rates.lambda_sq.cols(); ++j) {
        for (Eigen::Index i = 0; i < j; ++i) {
          if (rates.lambda_sq(i, j) > 0.5) lo = std::min(lo, rates.lambda_sq(i, j));
        }
      }
      ok = ok && lo == min_nonzero_gap(n, p) && lo == 4.0 * binomial(n - 1, p - 1);
      ++gaps;
    }
  }
  return {ok, std::to_string(checked) + " (n,k,q) degeneracy triples, " + std::to_string(gaps) +
                  " enumerated minimum gaps"};
}

// 6. GHZ scaling exponents
Verdict criterion_ghz() {
  double worst = 0.0;
  for (long k = 1; k <= 3; ++k) {
    for (long p = 1; p <= 3; ++p) {
      for (Parameter w : {Parameter::x1, Parameter::x2}) {
        ScalingSeries s = make_series(integer_range(20, 200), [&](long n) {
          return sensitivity_bound(ghz_timescales(n, k, p, 1.0, 1.0), 1.0, w, 1.0);
        });
        const double expect = w == Parameter::x1 ? -(k - p / 2.0) : -p / 2.0;
        worst = std::max(worst, std::abs(fit_scaling_exponent(s).slope - expect));
      }
    }
  }
  return {worst <= 0.05, "9 (k,p) pairs x 2 parameters, max |slope - expected| " + sci(worst)};
}

// 7. long-range Ising
Verdict criterion_ising() {
  const std::vector<long> ns = log_range(128, 4096, 16);
  double worst_slope = 0.0;
  double worst_drift = 0.0;
  bool argmax_ok = true;
  std::string where;
  for (double alpha : {0.0, 0.5, 1.0, 1.5}) {
    std::vector<double> ratio;
    for (long n : ns) {
      const SeminormResult s = ising_seminorm_exact(n, alpha);
      argmax_ok = argmax_ok && s.argmax_q == n / 2;
      ratio.push_back(ising_seminorm_asymptotic(n, alpha) / s.value);
    }
    for (std::size_t i = 1; i < ns.size(); ++i) {
      const double oct = std::log2(static_cast<double>(ns[i]) / static_cast<double>(ns[i - 1]));
      worst_drift = std::max(worst_drift, std::abs(ratio[i] / ratio[i - 1] - 1.0) / oct);
    }
    for (int p : {1, 2}) {
      ScalingSeries s = make_series(ns, [&](long n) {
        return sensitivity_bound(ising_timescales(n, alpha, p, 1.0, 1.0), 1.0, Parameter::x1, 1.0);
      });
      const double dev = std::abs(fit_scaling_exponent(s).slope + (2.0 - alpha - p / 2.0));
      if (dev > worst_slope) {
        worst_slope = dev;
        where = "alpha=" + sci(alpha) + " p=" + std::to_string(p);
      }
    }
  }
  return {worst_slope <= 0.07 && argmax_ok && worst_drift < 0.02,
          "max |slope - expected| " + sci(worst_slope) + " (" + where + "), argmax floor(N/2) " +
              (argmax_ok ? "everywhere" : "violated") + ", ratio drift " + sci(worst_drift) + " per octave"};
}

// 8. product-state eigenvalue structure
Verdict criterion_product_spectrum() {
  double residual = 0.0;
  double kappa = 0.0;
  double rate_err = 0.0;
  double fit_kappa = 0.0;
  const double gamma = 0.7;
  for (int n = 2; n <= 8; ++n) {
    const SpinBasis b = build_basis(n);
    for (int p = 1; p <= std::min(3, n); ++p) {
      const auto d = build_diagonals(CustomDiagonal{std::vector<double>(b.dimension(), 0.0)}, UncorrelatedPBody{p}, b);
      const auto rates = pair_rates(d);
      const DensityMatrix rho0 = make_probe(ProductProbe{std::numbers::pi / 4}, b, d);
      std::vector<double> gaps;
      std::set<double> distinct;
      for (const auto& g : gap_spectrum_from_reference(n, p)) {
        gaps.push_back(g.lambda_sq);
        if (g.lambda_sq > 0) distinct.insert(g.lambda_sq);
      }
      const double lambda1 = p < n / 2 ? min_nonzero_gap(n, p) : *distinct.begin();
      const double slow = gamma * lambda1 / 2.0;
      const SpectrumCheckReport rep =
          product_state_spectrum_check(rho0, rates, spectrum_sample_times(slow, distinct.size()), gaps, gamma);
      residual = std::max({residual, rep.max_residual, rep.fit_residual, rep.unmatched_weight});
      fit_kappa = std::max(fit_kappa, rep.fit_kappa_deviation);
      kappa = std::max(kappa, rep.max_kappa_sum);
      rate_err = std::max(rate_err, std::abs(rep.slowest_rate - slow) / slow);
    }
  }
  return {residual < 1e-8 && kappa < 1e-8 && rate_err < 1e-12,
          "N 2..8, p 1..3: trajectory residual " + sci(residual) + ", kappa-sum " + sci(kappa) +
              ", slowest-rate relative error " + sci(rate_err) + " (least-squares kappa spread " + sci(fit_kappa) +
              ")"};
}

// 9. vanishing joint term
Verdict criterion_joint(const CorpusStats& st) {
  // finite-difference cross-check on a subset
  double fd = 0.0;
  for (auto [n, k, p] : {std::tuple{4, 2, 1}, {5, 1, 2}, {6, 3, 2}}) {
    const SpinBasis b = build_basis(n);
    const auto d = build_diagonals(SpinChainUniform{k}, UncorrelatedPBody{p}, b);
    const auto rates = pair_rates(d);
    const DensityMatrix rho0 = make_probe(ProductProbe{std::numbers::pi / 8}, b, d);
    for (double t : {0.01, 0.1, 0.3}) {
      auto e1 = [&](double v) -> Eigen::MatrixXcd { return evolve_dephasing(rho0, rates, v, 0.5, t).matrix(); };
      auto e2 = [&](double v) -> Eigen::MatrixXcd { return evolve_dephasing(rho0, rates, 1.0, v, t).matrix(); };
      const DensityMatrix rho = evolve_dephasing(rho0, rates, 1.0, 0.5, t);
      fd = std::max(fd, std::abs(qfi_offdiagonal(rho, finite_difference_drho(e1, 1.0), finite_difference_drho(e2, 0.5))));
    }
  }
  return {st.f12 < 1e-8 && fd < 1e-8, std::to_string(st.points) + " corpus states, max |F12| " + sci(st.f12) +
                                          "; finite-difference subset " + sci(fd)};
}

// 10. fluctuating Hamiltonian
Verdict criterion_collective() {
  double worst = 0.0;
  double tau_rel = 0.0;
  for (long k : {1L, 3L}) {
    for (long n = 20; n <= 200; ++n) {
      const double c = binomial(n, k);
      tau_rel = std::max(tau_rel, std::abs(collective_noise_tau_d(n, k, 1.0) * c * c - 1.0));
    }
    ScalingSeries col = make_series(integer_range(20, 200), [&](long n) {
      TimescaleReport r;
      r.tau_D = collective_noise_tau_d(n, k, 1.0);
      return sensitivity_bound(r, 1.0, Parameter::x2, 1.0);
    });
    ScalingSeries unc = make_series(integer_range(20, 200), [&](long n) {
      return sensitivity_bound(ghz_timescales(n, k, k, 1.0, 1.0), 1.0, Parameter::x2, 1.0);
    });
    worst = std::max(worst, std::abs(fit_scaling_exponent(col).slope + static_cast<double>(k)));
    worst = std::max(worst, std::abs(fit_scaling_exponent(unc).slope + static_cast<double>(k) / 2.0));
  }
  // dense cross-check of the collective tau_D
  double dense = 0.0;
  for (auto [n, k] : {std::pair{4, 1}, {5, 3}, {7, 3}}) {
    const SpinBasis b = build_basis(n);
    const auto d = build_diagonals(SpinChainUniform{1}, CollectiveSymmetrizedKBody{k}, b);
    const double td = probe_timescales(make_probe(GhzProbe{}, b, d), d, 1.0, 1.0).tau_D;
    dense = std::max(dense, std::abs(td / collective_noise_tau_d(n, k, 1.0) - 1.0));
  }
  return {worst <= 0.05 && tau_rel < 1e-12 && dense < 1e-12,
          "k in {1,3}: max |slope - expected| " + sci(worst) + " (collective -k, uncorrelated -k/2); tau_D C^2 "
          "deviation " + sci(tau_rel) + ", dense check " + sci(dense)};
}

}  // namespace

int main() {
  using clock = std::chrono::steady_clock;
  int failures = 0;
  auto report = [&](int id, const char* name, const std::function<Verdict()>& f) {
    const auto t0 = clock::now();
    Verdict v;
    try {
      v = f();
    } catch (const std::exception& e) {
      v = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(clock::now() - t0).count();
    std::printf("criterion %2d %-32s %s  %s [%.1fs]\n", id, name, v.pass ? "PASS" : "FAIL", v.detail.c_str(), secs);
    std::fflush(stdout);
    failures += v.pass ? 0 : 1;
  };
  CorpusStats corpus;
  report(1, "exact-solution-equivalence", criterion_oracle);
  report(2, "analytic-qfi", criterion_analytic_qfi);
  report(3, "bound-sandwich", [&] {
    corpus = run_corpus();
    return criterion_sandwich(corpus);
  });
  report(4, "interrogation-optima", criterion_optima);
  report(5, "combinatorics", criterion_combinatorics);
  report(6, "ghz-scaling", criterion_ghz);
  report(7, "long-range-ising", criterion_ising);
  report(8, "product-state-spectrum", criterion_product_spectrum);
  report(9, "vanishing-joint-term", [&] { return criterion_joint(corpus); });
  report(10, "fluctuating-hamiltonian", criterion_collective);
  std::printf("%d of 10 criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
