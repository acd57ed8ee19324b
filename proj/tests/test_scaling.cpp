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

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "mbqfi/mbqfi.hpp"

namespace mbqfi {
namespace {

TEST(Timescales, GhzClosedForm) {
  const TimescaleReport r = ghz_timescales(10, 1, 1, 1.0, 1.0);
  EXPECT_NEAR(r.tau_Z, 0.05, 1e-15);
  EXPECT_NEAR(r.tau_D, 0.1, 1e-15);
  EXPECT_NEAR(ghz_timescales(20, 1, 2, 1.0, 1.0).tau_D, 1.0 / 190.0, 1e-15);
  EXPECT_THROW(ghz_timescales(5, 6, 1, 1.0, 1.0), std::invalid_argument);
}

TEST(Timescales, DenseProbeMatchesClosedForm) {
  for (auto [n, k, p] : {std::tuple{10, 1, 1}, {7, 3, 3}, {6, 1, 3}, {8, 3, 1}}) {
    const SpinBasis b = build_basis(n);
    const auto d = build_diagonals(SpinChainUniform{k}, UncorrelatedPBody{p}, b);
    const DensityMatrix rho = make_probe(GhzProbe{}, b, d);
    const TimescaleReport dense = probe_timescales(rho, d, 1.0, 1.0);
    const TimescaleReport closed = ghz_timescales(n, k, p, 1.0, 1.0);
    EXPECT_NEAR(dense.tau_Z / closed.tau_Z, 1.0, 1e-12) << n << k << p;
    EXPECT_NEAR(dense.tau_D / closed.tau_D, 1.0, 1e-12) << n << k << p;
  }
}

// Both GHZ branches see the same even-order product, so the probe does not dephase.
TEST(Timescales, EvenDissipatorLeavesGhzCoherent) {
  const SpinBasis b = build_basis(7);
  const auto d = build_diagonals(SpinChainUniform{3}, UncorrelatedPBody{2}, b);
  EXPECT_TRUE(std::isinf(probe_timescales(make_probe(GhzProbe{}, b, d), d, 1.0, 1.0).tau_D));
}

TEST(Timescales, NoDissipationGivesInfiniteTauD) {
  const SpinBasis b = build_basis(3);
  const auto d = build_diagonals(SpinChainUniform{1}, UncorrelatedPBody{1}, b);
  const TimescaleReport r = probe_timescales(make_probe(GhzProbe{}, b, d), d, 1.0, 0.0);
  EXPECT_TRUE(std::isinf(r.tau_D));
  EXPECT_THROW(sensitivity_bound(r, 1.0, Parameter::x1, 1.0), DomainError);
}

TEST(Interrogation, Optima) {
  EXPECT_EQ(optimal_interrogation(Parameter::x1), 0.5);
  const double mu2 = optimal_interrogation(Parameter::x2);
  EXPECT_NEAR(std::exp(-4.0 * mu2), 1.0 - 2.0 * mu2, 1e-12);
  EXPECT_NEAR(mu2, 0.40, 0.01);
  EXPECT_NEAR(mu2, 0.398406, 1e-6);
  EXPECT_NEAR(kappa(Parameter::x1), std::sqrt(0.5) * std::exp(-1.0), 1e-15);
  EXPECT_NEAR(kappa(Parameter::x1), 0.26013, 1e-5);
}

TEST(Interrogation, OptimaMaximiseQfi) {
  const TwoLevelProbe p{2.0, 4.0, 1.0, 0.5};
  const double td = p.tau_d();
  for (Parameter w : {Parameter::x1, Parameter::x2}) {
    const double mu = optimal_interrogation(w);
    auto rate = [&](double m) { return analytic_qfi(p, w, m * td); };
    EXPECT_GT(rate(mu), rate(mu + 0.01));
    EXPECT_GT(rate(mu), rate(mu - 0.01));
  }
}

TEST(Interrogation, BoundEqualsCramerRaoAtOptimum) {
  const TwoLevelProbe p{2.0, 4.0, 1.3, 0.5};
  const TimescaleReport r{p.tau_z(), p.tau_d(), 1.0, 1.0};
  const double total = 1000.0 * p.tau_d();
  for (Parameter w : {Parameter::x1, Parameter::x2}) {
    const double t = optimal_interrogation(w) * p.tau_d();
    const double nu = total / t;
    const double crb = 1.0 / std::sqrt(nu * analytic_qfi(p, w, t));
    const double x = w == Parameter::x1 ? p.x1 : p.x2;
    EXPECT_NEAR(sensitivity_bound(r, total, w, x) / crb, 1.0, 1e-12);
  }
}

TEST(Ising, SeminormExamples) {
  const SeminormResult a0 = ising_seminorm_exact(4, 0.0);
  EXPECT_DOUBLE_EQ(a0.value, 8.0);
  EXPECT_EQ(a0.argmax_q, 2);
  EXPECT_NEAR(ising_seminorm_exact(10, 50.0).value, 2.0, 1e-12);
  for (long n : {5L, 9L, 64L, 101L}) {
    EXPECT_DOUBLE_EQ(ising_seminorm_exact(n, 0.0).value, 2.0 * (n / 2) * (n - n / 2));
  }
  EXPECT_THROW(ising_seminorm_exact(1, 0.5), std::invalid_argument);
  EXPECT_THROW(ising_seminorm_exact(4, -0.1), std::invalid_argument);
}

TEST(Ising, DeltaQMatchesDirectSum) {
  for (double alpha : {0.0, 0.5, 1.0, 2.3}) {
    for (long n : {6L, 11L}) {
      for (long q = 0; q <= n; ++q) {
        double direct = 0.0;
        for (long i = 1; i <= n - q; ++i) {
          for (long j = n - q + 1; j <= n; ++j) direct += std::pow(static_cast<double>(j - i), -alpha);
        }
        EXPECT_NEAR(ising_delta_q(n, alpha, q), 2.0 * direct, 1e-12 * std::max(1.0, direct));
      }
    }
  }
}

TEST(Ising, DeltaQMatchesDenseHamiltonian) {
  const int n = 6;
  const SpinBasis b = build_basis(n);
  const auto d = build_diagonals(LongRangeIsing{0.7}, UncorrelatedPBody{1}, b);
  const double e0 = d.hamiltonian(static_cast<Eigen::Index>(b.reference_index(0)));
  for (int q = 0; q <= n; ++q) {
    const double eq = d.hamiltonian(static_cast<Eigen::Index>(b.reference_index(q)));
    EXPECT_NEAR(eq - e0, ising_delta_q(n, 0.7, q), 1e-12) << q;
  }
}

TEST(Ising, MaximiserIsHalfChain) {
  for (double alpha : {0.0, 0.5, 1.0, 1.5, 2.0, 3.0}) {
    for (long n : {2L, 3L, 8L, 17L, 128L, 1000L}) {
      EXPECT_EQ(ising_seminorm_exact(n, alpha).argmax_q, n / 2) << alpha << " " << n;
    }
  }
}

TEST(Ising, AsymptoticLimits) {
  EXPECT_NEAR(ising_seminorm_asymptotic(1000, 1.0), 2000.0 * std::numbers::ln2, 1e-9);
  EXPECT_NEAR(ising_seminorm_exact(1000, 1.0).value / (2000.0 * std::numbers::ln2), 1.0, 2e-3);
  for (long n : {64L, 256L, 1024L}) {
    EXPECT_NEAR(ising_seminorm_asymptotic(n, 0.0) / ising_seminorm_exact(n, 0.0).value, 1.0, 1e-12);
  }
  // ratio settles to a constant in every regime
  for (double alpha : {0.5, 1.0, 1.5, 2.0, 3.0}) {
    const double r1 = ising_seminorm_asymptotic(1024, alpha) / ising_seminorm_exact(1024, alpha).value;
    const double r2 = ising_seminorm_asymptotic(2048, alpha) / ising_seminorm_exact(2048, alpha).value;
    EXPECT_LT(std::abs(r2 / r1 - 1.0), 0.02) << alpha;
  }
}

TEST(Ising, BoxIntegralClosedForm) {
  for (double alpha : {0.3, 1.0, 1.5, 2.0}) {
    for (long q : {3L, 16L}) {
      EXPECT_NEAR(ising_box_integral(32, alpha, q) / ising_box_closed_form(32, alpha, q), 1.0, 1e-9);
    }
  }
}

TEST(Ising, SeminormSlope) {
  ScalingSeries s = make_series(log_range(64, 4096, 12), [](long n) { return ising_seminorm_exact(n, 0.5).value; });
  EXPECT_NEAR(fit_scaling_exponent(s).slope, 1.5, 0.05);
}

TEST(Ising, TimescalesFromSeminorm) {
  const TimescaleReport r = ising_timescales(16, 0.5, 1, 1.0, 1.0);
  const double s = ising_seminorm_exact(16, 0.5).value;
  EXPECT_NEAR(r.tau_Z, 1.0 / s, 1e-15);
  EXPECT_NEAR(r.tau_D, 1.0 / 8.0, 1e-15);  // q = 8 flipped single sites
  const SpinBasis b = build_basis(8);
  const auto d = build_diagonals(LongRangeIsing{0.5}, UncorrelatedPBody{2}, b);
  const TimescaleReport dense = probe_timescales(make_probe(IsingMaxVarianceProbe{}, b, d), d, 1.0, 1.0);
  const TimescaleReport closed = ising_timescales(8, 0.5, 2, 1.0, 1.0);
  EXPECT_NEAR(dense.tau_Z / closed.tau_Z, 1.0, 1e-12);
  EXPECT_NEAR(dense.tau_D / closed.tau_D, 1.0, 1e-12);
}

double brute_force_product_variance(int n, double alpha, double phi) {
  const SpinBasis b = build_basis(n);
  const auto d = build_diagonals(LongRangeIsing{alpha}, UncorrelatedPBody{1}, b);
  const DensityMatrix rho = make_probe(ProductProbe{phi}, b, d);
  const Eigen::VectorXd pop = rho.matrix().diagonal().real();
  const double m = pop.dot(d.hamiltonian);
  return pop.dot(d.hamiltonian.cwiseProduct(d.hamiltonian)) - m * m;
}

TEST(Ising, ProductVarianceMatchesBruteForce) {
  EXPECT_NEAR(ising_product_variance(3, 1.0, std::numbers::pi / 8).variance,
              brute_force_product_variance(3, 1.0, std::numbers::pi / 8), 1e-12);
  for (int n : {4, 7}) {
    for (double alpha : {0.0, 0.5, 1.5}) {
      for (double phi : {0.3, std::numbers::pi / 4, 1.2}) {
        const double exact = brute_force_product_variance(n, alpha, phi);
        EXPECT_NEAR(ising_product_variance(n, alpha, phi).variance, exact, 1e-11 * std::max(1.0, exact));
      }
    }
  }
}

TEST(Ising, ProductVarianceCoefficients) {
  const auto singular = ising_product_variance(10, 0.5, std::numbers::pi / 4);
  EXPECT_TRUE(singular.singular);
  EXPECT_NEAR(singular.triple_coefficient, 0.0, 1e-15);
  EXPECT_NEAR(singular.variance, singular.pair_sum, 1e-12);
  const auto best = ising_product_variance(10, 0.5, std::numbers::pi / 8);
  EXPECT_TRUE(best.maximizing_angle);
  EXPECT_NEAR(best.triple_coefficient, best.angular_factor / 2.0, 1e-15);
  EXPECT_THROW(ising_product_variance(10, 0.5, 0.0), std::invalid_argument);
}

TEST(Ising, ProductVarianceSlope) {
  ScalingSeries s = make_series(log_range(64, 2048, 10), [](long n) {
    return std::sqrt(ising_product_variance(n, 0.5, std::numbers::pi / 8).variance);
  });
  EXPECT_NEAR(fit_scaling_exponent(s).slope, 1.0, 0.05);
}

TEST(CollectiveNoise, TauD) {
  EXPECT_DOUBLE_EQ(collective_noise_tau_d(4, 1, 1.0), 1.0 / 16.0);
  EXPECT_DOUBLE_EQ(collective_noise_tau_d(6, 3, 1.0), 1.0 / 400.0);
  EXPECT_DOUBLE_EQ(collective_noise_tau_d(6, 3, 2.0), 1.0 / 800.0);
  EXPECT_THROW(collective_noise_tau_d(6, 2, 1.0), UnsupportedConfiguration);
  // dense GHZ probe under the collective operator
  const SpinBasis b = build_basis(5);
  const auto d = build_diagonals(SpinChainUniform{1}, CollectiveSymmetrizedKBody{3}, b);
  const TimescaleReport r = probe_timescales(make_probe(GhzProbe{}, b, d), d, 1.0, 1.0);
  EXPECT_NEAR(r.tau_D, collective_noise_tau_d(5, 3, 1.0), 1e-15);
}

TEST(CollectiveNoise, SensitivitySlope) {
  for (long k : {1L, 3L}) {
    ScalingSeries s = make_series(integer_range(20, 200), [k](long n) {
      TimescaleReport r;
      r.tau_D = collective_noise_tau_d(n, k, 1.0);
      return sensitivity_bound(r, 1.0, Parameter::x2, 1.0);
    });
    EXPECT_NEAR(fit_scaling_exponent(s).slope, -static_cast<double>(k), 0.05) << k;
  }
}

TEST(Fit, ExactPowerLaws) {
  ScalingSeries sq = make_series(integer_range(3, 40), [](long n) { return 3.0 * n * n; });
  const FitResult f = fit_scaling_exponent(sq);
  EXPECT_NEAR(f.slope, 2.0, 1e-12);
  EXPECT_LT(f.stderr_, 1e-12);
  EXPECT_NEAR(std::exp(f.intercept), 3.0, 1e-10);
  EXPECT_NEAR(sq.fitted_slope, 2.0, 1e-12);
  ScalingSeries flat = make_series(integer_range(3, 40), [](long) { return 7.0; });
  EXPECT_NEAR(fit_scaling_exponent(flat).slope, 0.0, 1e-12);
}

TEST(Fit, WindowAndErrors) {
  std::vector<ScalingSample> s;
  for (long n = 1; n <= 30; ++n) s.push_back({n, n < 10 ? 1.0 : std::pow(n, -1.5)});
  const FitResult w = fit_scaling_exponent(s, 10, 30);
  EXPECT_NEAR(w.slope, -1.5, 1e-12);
  EXPECT_EQ(w.used, 21u);
  EXPECT_THROW(fit_scaling_exponent(s, 10, 13), std::invalid_argument);
  s.push_back({31, -1.0});
  EXPECT_THROW(fit_scaling_exponent(s), std::invalid_argument);
  s.back() = {30, 1.0};
  EXPECT_THROW(fit_scaling_exponent(s), std::invalid_argument);
}

TEST(Ranges, Shapes) {
  EXPECT_EQ(integer_range(3, 5), (std::vector<long>{3, 4, 5}));
  const auto lr = log_range(128, 4096, 16);
  EXPECT_EQ(lr.size(), 16u);
  EXPECT_EQ(lr.front(), 128);
  EXPECT_EQ(lr.back(), 4096);
}

TEST(GhzScaling, SlopesForAllBodyOrders) {
  for (long k = 1; k <= 3; ++k) {
    for (long p = 1; p <= 3; ++p) {
      ScalingSeries s1 = make_series(integer_range(20, 200), [&](long n) {
        return sensitivity_bound(ghz_timescales(n, k, p, 1.0, 1.0), 1.0, Parameter::x1, 1.0);
      });
      ScalingSeries s2 = make_series(integer_range(20, 200), [&](long n) {
        return sensitivity_bound(ghz_timescales(n, k, p, 1.0, 1.0), 1.0, Parameter::x2, 1.0);
      });
      EXPECT_NEAR(fit_scaling_exponent(s1).slope, -(k - p / 2.0), 0.05) << k << p;
      EXPECT_NEAR(fit_scaling_exponent(s2).slope, -p / 2.0, 0.05) << k << p;
    }
  }
}

// Product probe at pi/8 interrogated for 0.1 n tau_D versus the GHZ bound.
TEST(ProductEquivalence, SharesGhzExponent) {
  const std::vector<long> ns{4, 5, 6, 7, 8};
  for (int k : {1, 2}) {
    for (int p : {1, 2}) {
      ScalingSeries prod = make_series(ns, [&](long n) {
        const SpinBasis b = build_basis(static_cast<int>(n));
        const auto d = build_diagonals(SpinChainUniform{k}, UncorrelatedPBody{p}, b);
        const auto rates = pair_rates(d);
        const DensityMatrix rho0 = make_probe(ProductProbe{std::numbers::pi / 8}, b, d);
        const double t = 0.1 * static_cast<double>(n) * ghz_timescales(n, k, p, 1.0, 1.0).tau_D;
        const double f = spectral_qfi(evolve_dephasing(rho0, rates, 1.0, 1.0, t),
                                      dephasing_derivative(rho0, rates, 1.0, 1.0, t, Parameter::x1));
        return qcrb(f / t);
      });
      ScalingSeries ghz = make_series(ns, [&](long n) {
        return sensitivity_bound(ghz_timescales(n, k, p, 1.0, 1.0), 1.0, Parameter::x1, 1.0);
      });
      EXPECT_NEAR(fit_scaling_exponent(prod).slope, fit_scaling_exponent(ghz).slope, 0.1) << k << p;
    }
  }
}

}  // namespace
}  // namespace mbqfi
