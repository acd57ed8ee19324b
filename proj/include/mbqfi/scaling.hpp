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

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/special_functions/zeta.hpp>
#include <boost/math/tools/roots.hpp>

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "mbqfi/basis.hpp"
#include "mbqfi/binomial.hpp"
#include "mbqfi/dynamics.hpp"
#include "mbqfi/errors.hpp"

namespace mbqfi {

inline constexpr double kInfinity = std::numeric_limits<double>::infinity();

struct TimescaleReport {
  double tau_Z = kInfinity;
  double tau_D = kInfinity;
  double variance_H = 0.0;
  double sum_variance_L = 0.0;
};

namespace detail {

inline double tau_from(double numerator, double rate) { return rate == 0.0 ? kInfinity : numerator / rate; }

}  // namespace detail

/// tau_Z = hbar / (2 x1 Delta H), tau_D = 1 / (x2 sum_nu Delta L_nu^2), variances on rho0.
inline TimescaleReport probe_timescales(const DensityMatrix& rho0, const DiagonalOperatorSet& diag, double x1,
                                        double x2, double hbar = 1.0, bool allow_degenerate = false) {
  if (rho0.dim() != diag.hamiltonian.size()) throw std::invalid_argument("probe_timescales: dimension mismatch");
  if (!(x2 >= 0.0)) throw std::invalid_argument("probe_timescales: x2 must be >= 0");
  const Eigen::VectorXd pop = rho0.matrix().diagonal().real();
  auto variance = [&](const Eigen::VectorXd& v) {
    const double m = pop.dot(v);
    return std::max(0.0, pop.dot(v.cwiseProduct(v)) - m * m);
  };
  TimescaleReport r;
  r.variance_H = variance(diag.hamiltonian);
  if (r.variance_H <= 1e-300 && !allow_degenerate) {
    throw DegenerateProbeError(
        "probe_timescales: probe has zero energy variance (for GHZ this happens when both branches "
        "share an energy, e.g. even body order); use a max-variance or IsingMaxVariance probe");
  }
  for (Eigen::Index c = 0; c < diag.lindblad.cols(); ++c) r.sum_variance_L += variance(diag.lindblad.col(c));
  r.tau_Z = detail::tau_from(hbar, 2.0 * std::abs(x1) * std::sqrt(r.variance_H));
  r.tau_D = detail::tau_from(1.0, x2 * r.sum_variance_L);
  return r;
}

/// GHZ closed forms tau_Z = hbar / (x1 eps C(n,k)), tau_D = 4 / (x2 Lambda^2 C(n,p)).
inline TimescaleReport ghz_timescales(long n, long k, long p, double x1, double x2, double eps = 2.0,
                                      double lambda_sq = 4.0, double hbar = 1.0) {
  if (n < 1 || k < 1 || k > n || p < 1 || p > n) {
    throw std::invalid_argument("ghz_timescales: need 1 <= k, p <= n");
  }
  if (!(eps > 0.0) || !(lambda_sq >= 0.0) || !(x2 >= 0.0)) {
    throw std::invalid_argument("ghz_timescales: need eps > 0, lambda_sq >= 0, x2 >= 0");
  }
  const double ck = binomial(n, k);
  const double cp = binomial(n, p);
  TimescaleReport r;
  r.variance_H = std::pow(eps * ck / 2.0, 2);
  r.sum_variance_L = lambda_sq * cp / 4.0;
  r.tau_Z = detail::tau_from(hbar, std::abs(x1) * eps * ck);
  r.tau_D = detail::tau_from(4.0, x2 * lambda_sq * cp);
  return r;
}

/// Interrogation time t = mu tau_D maximizing F / t.
/// mu_1 = 1/2; mu_2 solves exp(-4 mu) = 1 - 2 mu on (0, 1/2).
inline double optimal_interrogation(Parameter which) {
  if (which == Parameter::x1) return 0.5;
  auto f = [](double mu) { return std::exp(-4.0 * mu) - (1.0 - 2.0 * mu); };
  // f < 0 just above 0 (slope -2) and f(1/2) = e^{-2} > 0
  auto r = boost::math::tools::bisect(f, 0.1, 0.5, boost::math::tools::eps_tolerance<double>(52));
  return 0.5 * (r.first + r.second);
}

// kappa2 carries the factor 2 that follows from F_x2 = beta^2 / expm1(2 beta x2).
inline double kappa(Parameter which) {
  const double mu = optimal_interrogation(which);
  if (which == Parameter::x1) return std::sqrt(mu) * std::exp(-2.0 * mu);
  return 2.0 * std::sqrt(mu) / std::sqrt(std::expm1(4.0 * mu));
}

/// delta x1 >= (x1 / kappa1) tau_Z / sqrt(T tau_D); delta x2 >= (x2 / kappa2) sqrt(tau_D / T).
inline double sensitivity_bound(const TimescaleReport& report, double total_time, Parameter which,
                                double x_value) {
  if (!(total_time > 0.0)) throw std::invalid_argument("sensitivity_bound: total time must be > 0");
  if (!std::isfinite(report.tau_D)) {
    throw DomainError("sensitivity_bound: tau_D is infinite, the interrogation time is undefined");
  }
  const double k = kappa(which);
  if (which == Parameter::x1) {
    return std::abs(x_value) / k * report.tau_Z / std::sqrt(total_time * report.tau_D);
  }
  return std::abs(x_value) / k * std::sqrt(report.tau_D / total_time);
}

// ---------------------------------------------------------------------------
// Long-range Ising

namespace detail {

/// F[x] = sum_{d=1}^{x} d^{-alpha}, G[x] = sum_{x'=1}^{x} F[x'].
struct PowerPrefix {
  std::vector<long double> f;
  std::vector<long double> g;

  PowerPrefix(long n, double alpha) : f(static_cast<std::size_t>(n + 1), 0.0L), g(static_cast<std::size_t>(n + 1), 0.0L) {
    for (long d = 1; d <= n; ++d) {
      const auto i = static_cast<std::size_t>(d);
      f[i] = f[i - 1] + std::pow(static_cast<long double>(d), -static_cast<long double>(alpha));
      g[i] = g[i - 1] + f[i];
    }
  }

  /// sum_{i <= m < j <= n} (j - i)^{-alpha}
  long double crossing(long n, long m) const {
    if (m <= 0 || m >= n) return 0.0L;
    auto at = [this](long x) { return x <= 0 ? 0.0L : g[static_cast<std::size_t>(x)]; };
    return at(n - 1) - at(n - m - 1) - at(m - 1);
  }
};

inline void check_ising_args(long n, double alpha) {
  if (n < 2) throw std::invalid_argument("Ising seminorm: need n >= 2");
  if (!(alpha >= 0.0)) throw std::invalid_argument("Ising seminorm: alpha must be >= 0");
}

}  // namespace detail

/// delta_q = 2 sum_{i <= N-q < j} (j - i)^{-alpha}: energy of |v_q> above |v_0>.
inline double ising_delta_q(long n, double alpha, long q) {
  detail::check_ising_args(n, alpha);
  if (q < 0 || q > n) throw std::invalid_argument("ising_delta_q: q out of range");
  const detail::PowerPrefix pre(n, alpha);
  return static_cast<double>(2.0L * pre.crossing(n, n - q));
}

struct SeminormResult {
  double value = 0.0;
  long argmax_q = 0;
};

/// max_q delta_q by exhaustive scan; ties go to the q closest to floor(n/2).
inline SeminormResult ising_seminorm_exact(long n, double alpha) {
  detail::check_ising_args(n, alpha);
  const detail::PowerPrefix pre(n, alpha);
  const long half = n / 2;
  SeminormResult best{-1.0, 0};
  for (long q = 1; q < n; ++q) {
    const double v = static_cast<double>(2.0L * pre.crossing(n, n - q));
    const double tol = 1e-9 * std::max(std::abs(best.value), 1e-300);
    if (v > best.value + tol) {
      best = {v, q};
    } else if (std::abs(v - best.value) <= tol && std::abs(q - half) < std::abs(best.argmax_q - half)) {
      best.argmax_q = q;
    }
  }
  return best;
}

/// Large-n form of the seminorm (2 x the crossing sum at q = floor(n/2)).
/// For 1 < alpha < 2 the constant term is zeta(alpha - 1).
inline double ising_seminorm_asymptotic(long n, double alpha) {
  detail::check_ising_args(n, alpha);
  const double nn = static_cast<double>(n);
  const double q = static_cast<double>(n / 2);
  const double m = nn - q;
  if (alpha == 1.0) return 2.0 * nn * std::numbers::ln2;
  if (alpha == 2.0) return 2.0 * std::log(nn);
  if (alpha > 2.0) return 2.0 * (1.0 + 1.0 / ((2.0 - alpha) * (1.0 - alpha)));
  const double e = 2.0 - alpha;
  double s = (std::pow(nn, e) - std::pow(q, e) - std::pow(m, e)) / ((1.0 - alpha) * e);
  if (alpha > 1.0) s += boost::math::zeta(alpha - 1.0);
  return 2.0 * s;
}

/// 1 + int_{N-q+1}^{N} dy int_{1}^{N-q} dx (y - x)^{-alpha}, by nested Gauss-Kronrod.
inline double ising_box_integral(long n, double alpha, long q) {
  detail::check_ising_args(n, alpha);
  if (q < 1 || q >= n) throw std::invalid_argument("ising_box_integral: need 1 <= q < n");
  using boost::math::quadrature::gauss_kronrod;
  const double lo_x = 1.0;
  const double hi_x = static_cast<double>(n - q);
  const double lo_y = hi_x + 1.0;
  const double hi_y = static_cast<double>(n);
  if (hi_y <= lo_y || hi_x <= lo_x) return 1.0;
  auto inner = [&](double y) {
    auto f = [&](double x) { return std::pow(y - x, -alpha); };
    return gauss_kronrod<double, 31>::integrate(f, lo_x, hi_x, 15, 1e-12);
  };
  return 1.0 + gauss_kronrod<double, 31>::integrate(inner, lo_y, hi_y, 15, 1e-12);
}

/// Closed form of the box integral above.
inline double ising_box_closed_form(long n, double alpha, long q) {
  const double N = static_cast<double>(n);
  const double Q = static_cast<double>(q);
  if (alpha == 1.0) return N * std::log((N - 1.0) / (N - Q)) + Q * std::log((N - Q) / Q) - std::log(N - 1.0) + 1.0;
  if (alpha == 2.0) return 1.0 + std::log((N - Q) * Q / (N - 1.0));
  const double e = 2.0 - alpha;
  return 1.0 + (std::pow(N - 1.0, e) - std::pow(N - Q, e) - std::pow(Q, e) + 1.0) / (e * (1.0 - alpha));
}

/// Timescales of the (|v_0> + |v_q*>)/sqrt(2) probe with q* the seminorm maximizer,
/// under uncorrelated p-body sigma^z dephasing.
inline TimescaleReport ising_timescales(long n, double alpha, int p, double x1, double x2, double hbar = 1.0) {
  const SeminormResult s = ising_seminorm_exact(n, alpha);
  if (p < 1 || p > n) throw std::invalid_argument("ising_timescales: need 1 <= p <= n");
  double flipped = 0.0;
  for (long j = 1; j <= p; j += 2) flipped += binomial(s.argmax_q, j) * binomial(n - s.argmax_q, p - j);
  const double lambda_sq = 4.0 * flipped;
  TimescaleReport r;
  r.variance_H = s.value * s.value / 4.0;
  r.sum_variance_L = lambda_sq / 4.0;
  r.tau_Z = detail::tau_from(hbar, std::abs(x1) * s.value);
  r.tau_D = detail::tau_from(4.0, x2 * lambda_sq);
  return r;
}

struct ProductVarianceReport {
  double variance = 0.0;
  double pair_sum = 0.0;            ///< sum_{i<j} |i-j|^{-2 alpha}
  double triple_sum = 0.0;          ///< sum over triples of the three two-bond products
  double pair_coefficient = 0.0;    ///< 1 - cos^4(2 phi)
  double triple_coefficient = 0.0;  ///< 2 (cos^2(2 phi) - cos^4(2 phi)) = sin^2(4 phi) / 2
  double angular_factor = 0.0;      ///< sin^2(4 phi)
  bool singular = false;            ///< phi = pi/4, triple term vanishes
  bool maximizing_angle = false;    ///< sin^2(4 phi) = 1
};

/// Energy variance of the Ising Hamiltonian on (cos(phi)|+> + sin(phi)|->)^{(x)N}.
inline ProductVarianceReport ising_product_variance(long n, double alpha, double phi) {
  detail::check_ising_args(n, alpha);
  if (!(phi > 0.0 && phi < std::numbers::pi / 2)) {
    throw std::invalid_argument("ising_product_variance: phi must lie in (0, pi/2)");
  }
  const detail::PowerPrefix p1(n, alpha);
  const detail::PowerPrefix p2(n, 2.0 * alpha);
  long double pair = 0.0L;
  for (long d = 1; d < n; ++d) {
    pair += static_cast<long double>(n - d) * std::pow(static_cast<long double>(d), -2.0L * alpha);
  }
  // Each triple contributes one product of the two bonds at each of its sites:
  // sum_v [S_v^2 - sum_a J_va^2] / 2, S_v = sum_{a != v} J_va.
  long double triple = 0.0L;
  for (long v = 1; v <= n; ++v) {
    const long double s = p1.f[static_cast<std::size_t>(v - 1)] + p1.f[static_cast<std::size_t>(n - v)];
    const long double s2 = p2.f[static_cast<std::size_t>(v - 1)] + p2.f[static_cast<std::size_t>(n - v)];
    triple += (s * s - s2) / 2.0L;
  }
  const double c = std::cos(2.0 * phi);
  const double c2 = c * c;
  ProductVarianceReport r;
  r.pair_sum = static_cast<double>(pair);
  r.triple_sum = static_cast<double>(triple);
  r.pair_coefficient = 1.0 - c2 * c2;
  r.triple_coefficient = 2.0 * (c2 - c2 * c2);
  r.angular_factor = std::pow(std::sin(4.0 * phi), 2);
  r.variance = r.pair_coefficient * r.pair_sum + r.triple_coefficient * r.triple_sum;
  r.singular = std::abs(phi - std::numbers::pi / 4) < 1e-12;
  r.maximizing_angle = std::abs(r.angular_factor - 1.0) < 1e-12;
  return r;
}

// ---------------------------------------------------------------------------
// Fluctuating Hamiltonian

/// Collective k-body sigma^z noise on the GHZ probe: Delta L = C(n,k), tau_D = 1 / (gamma C(n,k)^2).
inline double collective_noise_tau_d(long n, long k, double gamma) {
  if (k < 1 || k > n) throw std::invalid_argument("collective_noise_tau_d: need 1 <= k <= n");
  if (k % 2 == 0) {
    throw UnsupportedConfiguration(
        "collective_noise_tau_d: k must be odd; for even k the GHZ branches share the same "
        "collective eigenvalue and the probe does not dephase");
  }
  if (!(gamma > 0.0)) throw std::invalid_argument("collective_noise_tau_d: gamma must be > 0");
  const double c = binomial(n, k);
  return 1.0 / (gamma * c * c);
}

// ---------------------------------------------------------------------------
// Exponent fits

struct ScalingSample {
  long n = 0;
  double value = 0.0;
};

struct ScalingSeries {
  std::vector<ScalingSample> samples;
  double fitted_slope = 0.0;
  double slope_stderr = 0.0;
  double intercept = 0.0;
  long fit_min = 0;  ///< 0 means unbounded
  long fit_max = 0;
};

struct FitResult {
  double slope = 0.0;
  double stderr_ = 0.0;
  double intercept = 0.0;
  std::size_t used = 0;
};

/// OLS of ln(value) on ln(n) over the samples inside the fit window.
inline FitResult fit_scaling_exponent(const std::vector<ScalingSample>& samples, long n_min = 0, long n_max = 0) {
  std::vector<std::pair<double, double>> pts;
  std::vector<long> seen;
  for (const auto& s : samples) {
    if (n_min > 0 && s.n < n_min) continue;
    if (n_max > 0 && s.n > n_max) continue;
    if (s.n <= 0) throw std::invalid_argument("fit_scaling_exponent: n must be positive");
    if (!(s.value > 0.0) || !std::isfinite(s.value)) {
      throw std::invalid_argument("fit_scaling_exponent: values must be positive and finite (n=" +
                                  std::to_string(s.n) + ")");
    }
    if (std::find(seen.begin(), seen.end(), s.n) != seen.end()) {
      throw std::invalid_argument("fit_scaling_exponent: duplicate n=" + std::to_string(s.n));
    }
    seen.push_back(s.n);
    pts.emplace_back(std::log(static_cast<double>(s.n)), std::log(s.value));
  }
  if (pts.size() < 5) {
    throw std::invalid_argument("fit_scaling_exponent: need at least 5 samples, got " + std::to_string(pts.size()));
  }
  const double m = static_cast<double>(pts.size());
  double mx = 0.0;
  double my = 0.0;
  for (auto [x, y] : pts) {
    mx += x;
    my += y;
  }
  mx /= m;
  my /= m;
  double sxx = 0.0;
  double sxy = 0.0;
  for (auto [x, y] : pts) {
    sxx += (x - mx) * (x - mx);
    sxy += (x - mx) * (y - my);
  }
  FitResult fr;
  fr.slope = sxy / sxx;
  fr.intercept = my - fr.slope * mx;
  double ssr = 0.0;
  for (auto [x, y] : pts) {
    const double e = y - (fr.intercept + fr.slope * x);
    ssr += e * e;
  }
  fr.stderr_ = std::sqrt(ssr / (m - 2.0) / sxx);
  fr.used = pts.size();
  return fr;
}

inline FitResult fit_scaling_exponent(ScalingSeries& series) {
  const FitResult fr = fit_scaling_exponent(series.samples, series.fit_min, series.fit_max);
  series.fitted_slope = fr.slope;
  series.slope_stderr = fr.stderr_;
  series.intercept = fr.intercept;
  return fr;
}

/// Samples f(n) for each n.
template <typename F>
ScalingSeries make_series(const std::vector<long>& ns, F&& f) {
  ScalingSeries s;
  s.samples.reserve(ns.size());
  for (long n : ns) s.samples.push_back({n, static_cast<double>(f(n))});
  return s;
}

inline std::vector<long> integer_range(long lo, long hi) {
  std::vector<long> out;
  for (long n = lo; n <= hi; ++n) out.push_back(n);
  return out;
}

/// Distinct integers near a geometric grid from lo to hi.
inline std::vector<long> log_range(long lo, long hi, int count) {
  std::vector<long> out;
  for (int i = 0; i < count; ++i) {
    const double f = count == 1 ? 0.0 : static_cast<double>(i) / (count - 1);
    const long n = std::lround(std::exp(std::log(static_cast<double>(lo)) * (1.0 - f) +
                                        std::log(static_cast<double>(hi)) * f));
    if (out.empty() || out.back() != n) out.push_back(n);
  }
  return out;
}

}  // namespace mbqfi
