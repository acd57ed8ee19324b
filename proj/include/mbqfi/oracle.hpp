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

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <numbers>
#include <random>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "mbqfi/basis.hpp"
#include "mbqfi/dynamics.hpp"
#include "mbqfi/errors.hpp"

namespace mbqfi {

inline constexpr std::uint64_t kDefaultSeed = 0x5EED;
inline constexpr int kOracleSiteLimit = 8;

/// d rho / dt = -(i x1 / hbar)[H, rho] + sum_a rate_a (L_a rho L_a - {L_a^2, rho} / 2)
/// with Hermitian L_a.
struct MasterEquationProblem {
  Eigen::MatrixXcd hamiltonian;
  std::vector<Eigen::MatrixXcd> lindblads;
  double x1 = 1.0;
  std::vector<double> rates;
  double hbar = 1.0;

  Eigen::Index dim() const { return hamiltonian.rows(); }

  void validate() const {
    const Eigen::Index d = hamiltonian.rows();
    if (d == 0 || hamiltonian.cols() != d) throw std::invalid_argument("MasterEquationProblem: H must be square");
    if (detail::hermiticity_defect(hamiltonian) > 1e-10 * std::max(1.0, hamiltonian.norm())) {
      throw std::invalid_argument("MasterEquationProblem: H is not Hermitian");
    }
    if (lindblads.size() != rates.size()) {
      throw std::invalid_argument("MasterEquationProblem: one rate per Lindblad operator required");
    }
    for (std::size_t a = 0; a < lindblads.size(); ++a) {
      const auto& l = lindblads[a];
      if (l.rows() != d || l.cols() != d) throw std::invalid_argument("MasterEquationProblem: Lindblad dimension mismatch");
      if (detail::hermiticity_defect(l) > 1e-10 * std::max(1.0, l.norm())) {
        throw std::invalid_argument("MasterEquationProblem: Lindblad operator " + std::to_string(a) +
                                    " is not Hermitian");
      }
      if (!(rates[a] >= 0.0)) throw std::invalid_argument("MasterEquationProblem: rates must be >= 0");
    }
    if (!(hbar > 0.0)) throw std::invalid_argument("MasterEquationProblem: hbar must be > 0");
  }

  bool all_diagonal() const {
    auto diag = [](const Eigen::MatrixXcd& m) {
      Eigen::MatrixXcd off = m;
      off.diagonal().setZero();
      return off.cwiseAbs().maxCoeff() == 0.0;
    };
    if (!diag(hamiltonian)) return false;
    return std::all_of(lindblads.begin(), lindblads.end(), diag);
  }
};

/// Dense problem from diagonal tables; every Lindblad column gets rate x2.
inline MasterEquationProblem master_equation_from_diagonals(const DiagonalOperatorSet& diag, double x1,
                                                            double x2, double hbar = 1.0) {
  MasterEquationProblem p;
  p.hamiltonian = diag.hamiltonian.cast<Complex>().asDiagonal();
  for (Eigen::Index c = 0; c < diag.lindblad.cols(); ++c) {
    p.lindblads.emplace_back(diag.lindblad.col(c).cast<Complex>().asDiagonal());
    p.rates.push_back(x2);
  }
  p.x1 = x1;
  p.hbar = hbar;
  return p;
}

namespace detail {

inline double spectral_spread(const Eigen::MatrixXcd& m) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(m, Eigen::EigenvaluesOnly);
  const auto& v = es.eigenvalues();
  return v.maxCoeff() - v.minCoeff();
}

/// Right-hand side of the master equation. Diagonal operators act by
/// row/column scaling; the superoperator weights are assembled once.
class Liouvillian {
 public:
  explicit Liouvillian(const MasterEquationProblem& p) : p_(p), diagonal_(p.all_diagonal()) {
    if (!diagonal_) return;
    const Eigen::Index d = p.dim();
    const Eigen::VectorXd h = p.hamiltonian.diagonal().real();
    weights_ = Eigen::MatrixXcd::Zero(d, d);
    for (Eigen::Index j = 0; j < d; ++j) {
      for (Eigen::Index i = 0; i < d; ++i) {
        weights_(i, j) = Complex(0.0, -p.x1 * (h(i) - h(j)) / p.hbar);
      }
    }
    for (std::size_t a = 0; a < p.lindblads.size(); ++a) {
      const Eigen::VectorXd l = p.lindblads[a].diagonal().real();
      const Eigen::VectorXd l2 = l.cwiseProduct(l);
      // L rho L  ->  l_i l_j rho_ij ;  {L^2, rho} / 2  ->  (l_i^2 + l_j^2) rho_ij / 2
      weights_.real() += p.rates[a] * (l * l.transpose() - 0.5 * (l2.replicate(1, d) + l2.transpose().replicate(d, 1)));
    }
  }

  Eigen::MatrixXcd operator()(const Eigen::MatrixXcd& rho) const {
    if (diagonal_) return weights_.cwiseProduct(rho);
    const Complex coherent(0.0, -p_.x1 / p_.hbar);
    Eigen::MatrixXcd out = coherent * (p_.hamiltonian * rho - rho * p_.hamiltonian);
    for (std::size_t a = 0; a < p_.lindblads.size(); ++a) {
      const auto& l = p_.lindblads[a];
      const Eigen::MatrixXcd l2 = l * l;
      out += p_.rates[a] * (l * rho * l - 0.5 * (l2 * rho + rho * l2));
    }
    return out;
  }

 private:
  const MasterEquationProblem& p_;
  bool diagonal_;
  Eigen::MatrixXcd weights_;
};

}  // namespace detail

/// min(tau_Z, tau_D) / 200 with tau_Z = hbar / (x1 spread(H)) and
/// tau_D = 1 / sum_a rate_a spread(L_a)^2.
inline double default_time_step(const MasterEquationProblem& p) {
  double tz = std::numeric_limits<double>::infinity();
  double td = std::numeric_limits<double>::infinity();
  const double sh = std::abs(p.x1) * detail::spectral_spread(p.hamiltonian);
  if (sh > 0.0) tz = p.hbar / sh;
  double g = 0.0;
  for (std::size_t a = 0; a < p.lindblads.size(); ++a) {
    const double s = detail::spectral_spread(p.lindblads[a]);
    g += p.rates[a] * s * s;
  }
  if (g > 0.0) td = 1.0 / g;
  const double tau = std::min(tz, td);
  return std::isfinite(tau) ? tau / 200.0 : 1e-2;
}

struct IntegrationOptions {
  double trace_tolerance = 1e-10;
  int max_halvings = 8;
  int site_limit = kOracleSiteLimit;
};

/// Classical RK4 from 0 through each requested time (sorted ascending).
/// Steps are shortened to land on the checkpoints. dt <= 0 selects the default step.
inline std::vector<DensityMatrix> integrate_master_equation(const MasterEquationProblem& problem,
                                                            const DensityMatrix& rho0,
                                                            const std::vector<double>& times, double dt = 0.0,
                                                            const IntegrationOptions& opt = {}) {
  problem.validate();
  if (rho0.dim() != problem.dim()) throw std::invalid_argument("integrate_master_equation: dimension mismatch");
  const Eigen::Index limit_dim = Eigen::Index{1} << opt.site_limit;
  if (problem.dim() > limit_dim) {
    throw CapacityError(static_cast<int>(std::ceil(std::log2(static_cast<double>(problem.dim())))), opt.site_limit);
  }
  for (std::size_t i = 0; i < times.size(); ++i) {
    if (!(times[i] >= 0.0)) throw std::invalid_argument("integrate_master_equation: times must be >= 0");
    if (i > 0 && times[i] < times[i - 1]) throw std::invalid_argument("integrate_master_equation: times must be sorted");
  }
  if (dt <= 0.0) dt = default_time_step(problem);

  const detail::Liouvillian rhs(problem);
  for (int attempt = 0; attempt <= opt.max_halvings; ++attempt, dt /= 2.0) {
    std::vector<DensityMatrix> out;
    out.reserve(times.size());
    Eigen::MatrixXcd rho = rho0.matrix();
    double now = 0.0;
    bool drifted = false;
    for (double target : times) {
      while (now < target && !drifted) {
        const double h = std::min(dt, target - now);
        const Eigen::MatrixXcd k1 = rhs(rho);
        const Eigen::MatrixXcd k2 = rhs(rho + (h / 2.0) * k1);
        const Eigen::MatrixXcd k3 = rhs(rho + (h / 2.0) * k2);
        const Eigen::MatrixXcd k4 = rhs(rho + h * k3);
        rho += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        rho = 0.5 * (rho + rho.adjoint()).eval();
        now = (target - now <= dt) ? target : now + h;
        drifted = std::abs(rho.trace() - Complex(1.0)) > opt.trace_tolerance;
      }
      if (drifted) break;
      out.emplace_back(rho);
    }
    if (!drifted) return out;
  }
  throw AccuracyError("integrate_master_equation: trace drift above " + std::to_string(opt.trace_tolerance) +
                      " after " + std::to_string(opt.max_halvings) + " step halvings; use a smaller dt");
}

inline DensityMatrix integrate_master_equation(const MasterEquationProblem& problem, const DensityMatrix& rho0,
                                               double t, double dt = 0.0, const IntegrationOptions& opt = {}) {
  return integrate_master_equation(problem, rho0, std::vector<double>{t}, dt, opt).front();
}

// ---------------------------------------------------------------------------
// Cyclic Jacobi

struct EigenDecomposition {
  Eigen::VectorXd values;    ///< ascending
  Eigen::MatrixXcd vectors;  ///< columns
  int sweeps = 0;
};

inline EigenDecomposition hermitian_eigendecomposition(const Eigen::MatrixXcd& m, double threshold = 1e-14,
                                                       int max_sweeps = 100) {
  const Eigen::Index n = m.rows();
  if (n == 0 || m.cols() != n) throw std::invalid_argument("hermitian_eigendecomposition: matrix must be square");
  const double norm = m.norm();
  if (detail::hermiticity_defect(m) > 1e-10 * std::max(1.0, norm)) {
    throw std::invalid_argument("hermitian_eigendecomposition: matrix is not Hermitian");
  }
  Eigen::MatrixXcd a = 0.5 * (m + m.adjoint());
  Eigen::MatrixXcd v = Eigen::MatrixXcd::Identity(n, n);
  const double target = threshold * std::max(norm, std::numeric_limits<double>::min());
  int sweep = 0;
  for (; sweep < max_sweeps; ++sweep) {
    double off = 0.0;
    for (Eigen::Index q = 1; q < n; ++q) {
      for (Eigen::Index p = 0; p < q; ++p) off += std::norm(a(p, q));
    }
    if (std::sqrt(2.0 * off) <= target) break;
    for (Eigen::Index p = 0; p + 1 < n; ++p) {
      for (Eigen::Index q = p + 1; q < n; ++q) {
        const Complex apq = a(p, q);
        const double mag = std::abs(apq);
        if (mag == 0.0) continue;
        const Complex phase = apq / mag;
        const double theta = (a(q, q).real() - a(p, p).real()) / (2.0 * mag);
        const double t = (theta >= 0.0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        // J restricted to (p, q): [[c, s], [-s conj(phase), c conj(phase)]]
        const Complex jpp = c;
        const Complex jpq = s;
        const Complex jqp = -s * std::conj(phase);
        const Complex jqq = c * std::conj(phase);
        for (Eigen::Index k = 0; k < n; ++k) {
          const Complex akp = a(k, p);
          const Complex akq = a(k, q);
          a(k, p) = akp * jpp + akq * jqp;
          a(k, q) = akp * jpq + akq * jqq;
        }
        for (Eigen::Index k = 0; k < n; ++k) {
          const Complex apk = a(p, k);
          const Complex aqk = a(q, k);
          a(p, k) = std::conj(jpp) * apk + std::conj(jqp) * aqk;
          a(q, k) = std::conj(jpq) * apk + std::conj(jqq) * aqk;
        }
        a(p, q) = 0.0;
        a(q, p) = 0.0;
        for (Eigen::Index k = 0; k < n; ++k) {
          const Complex vkp = v(k, p);
          const Complex vkq = v(k, q);
          v(k, p) = vkp * jpp + vkq * jqp;
          v(k, q) = vkp * jpq + vkq * jqq;
        }
      }
    }
  }
  if (sweep == max_sweeps) throw AccuracyError("hermitian_eigendecomposition: no convergence");

  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) order[static_cast<std::size_t>(i)] = i;
  std::sort(order.begin(), order.end(),
            [&](Eigen::Index x, Eigen::Index y) { return a(x, x).real() < a(y, y).real(); });
  EigenDecomposition out;
  out.values.resize(n);
  out.vectors.resize(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const Eigen::Index src = order[static_cast<std::size_t>(i)];
    out.values(i) = a(src, src).real();
    out.vectors.col(i) = v.col(src);
  }
  out.sweeps = sweep;
  return out;
}

// ---------------------------------------------------------------------------
// Finite differences

using Evolver = std::function<Eigen::MatrixXcd(double)>;

inline double default_difference_step(double x) { return 1e-5 * std::max(std::abs(x), 1.0); }

/// (rho(x + h) - rho(x - h)) / 2h, re-Hermitized.
inline Eigen::MatrixXcd finite_difference_drho(const Evolver& evolve, double x, double h = 0.0) {
  if (h == 0.0) h = default_difference_step(x);
  if (!(h > 0.0)) throw std::invalid_argument("finite_difference_drho: h must be > 0");
  const Eigen::MatrixXcd d = (evolve(x + h) - evolve(x - h)) / (2.0 * h);
  return 0.5 * (d + d.adjoint());
}

// ---------------------------------------------------------------------------
// Product-state eigenvalue structure

struct SpectrumCheckReport {
  std::vector<double> rates;  ///< gamma Lambda^2 / 2 per distinct nonzero gap, ascending
  Eigen::MatrixXd kappa;      ///< rows: eigenvalue trajectories, cols: rates (scaled by 2^N), by projection
  Eigen::VectorXd constant;   ///< constant term per trajectory (scaled by 2^N)
  double max_residual = 0.0;         ///< worst |2^N xi_n(t) - c_n - sum_a kappa_n^a e^{-r_a t}|
  double fit_residual = 0.0;         ///< worst residual of the least-squares fit on the same basis
  double fit_kappa_deviation = 0.0;  ///< max |kappa_fit - kappa|; large when rates nearly coincide
  double max_kappa_sum = 0.0;        ///< max_alpha |sum_n kappa_n^alpha|
  double unmatched_weight = 0.0;     ///< coherence mass at gaps missing from gap_values
  double commutation_residual = 0.0; ///< off-diagonal weight after joint diagonalization
  double slowest_rate = 0.0;         ///< smallest rate carrying nonzero weight
};

/// Times t_i = -ln(x_i) / slow_rate with x_i on Chebyshev nodes of [x_min, 1].
/// Exponentials in t are powers of x, so this keeps the fit basis well spread.
inline std::vector<double> spectrum_sample_times(double slow_rate, std::size_t n_rates, double x_min = 1e-3) {
  if (!(slow_rate > 0.0)) throw std::invalid_argument("spectrum_sample_times: slow_rate must be > 0");
  const std::size_t count = 3 * (n_rates + 1);
  std::vector<double> ts;
  for (std::size_t i = 0; i < count; ++i) {
    const double c = std::cos(std::numbers::pi * static_cast<double>(i) / static_cast<double>(count - 1));
    const double x = x_min + (1.0 - x_min) * 0.5 * (1.0 + c);
    ts.push_back(-std::log(x) / slow_rate);
  }
  ts.front() = 0.0;
  return ts;
}

/// Pure dephasing of rho0 at rate gamma (x1 = 0) splits as
///   rho(t) = rho0 o [lambda^2 = 0] + sum_alpha e^{-gamma Lambda_alpha^2 t / 2} rho0 o [lambda^2 = Lambda_alpha^2],
/// so with a time-independent eigenbasis v_n,
///   2^N xi_n(t) = c_n + sum_alpha kappa_n^alpha e^{-gamma Lambda_alpha^2 t / 2}.
/// The eigenbasis comes from one decomposition of a seeded random mix of the samples;
/// kappa comes from projecting each masked component onto it, and the resulting family
/// is checked against the sampled eigenvalue trajectories. A least-squares fit on the
/// same exponentials is reported alongside.
inline SpectrumCheckReport product_state_spectrum_check(const DensityMatrix& rho0, const PairRates& pr,
                                                        const std::vector<double>& times,
                                                        const std::vector<double>& gap_values, double gamma,
                                                        std::uint64_t seed = kDefaultSeed,
                                                        double weight_tolerance = 1e-8) {
  if (times.empty()) throw std::invalid_argument("product_state_spectrum_check: no sample times");
  if (!(gamma > 0.0)) throw std::invalid_argument("product_state_spectrum_check: gamma must be > 0");
  const Eigen::Index d = rho0.dim();
  if (pr.lambda_sq.rows() != d) throw std::invalid_argument("product_state_spectrum_check: dimension mismatch");
  std::vector<double> distinct;
  for (double g : gap_values) {
    if (g < 0.0) throw std::invalid_argument("product_state_spectrum_check: negative gap");
    if (g > 0.0) distinct.push_back(g);
  }
  std::sort(distinct.begin(), distinct.end());
  distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
  SpectrumCheckReport rep;
  for (double g : distinct) rep.rates.push_back(gamma * g / 2.0);
  const auto n_rates = static_cast<Eigen::Index>(rep.rates.size());
  const auto n_times = static_cast<Eigen::Index>(times.size());
  if (n_times < n_rates + 2) {
    throw SamplingError("product_state_spectrum_check: " + std::to_string(n_times) + " samples for " +
                        std::to_string(n_rates) + " rates; need at least rates + 2");
  }

  std::vector<DensityMatrix> samples;
  samples.reserve(times.size());
  for (double t : times) samples.push_back(evolve_dephasing(rho0, pr, 0.0, gamma, t));

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.5, 1.5);
  Eigen::MatrixXcd mix = Eigen::MatrixXcd::Zero(d, d);
  for (const auto& s : samples) mix += unit(rng) * s.matrix();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(mix);
  const Eigen::MatrixXcd& v = es.eigenvectors();

  const double scale = static_cast<double>(d);
  Eigen::MatrixXd traj(n_times, d);
  for (Eigen::Index s = 0; s < n_times; ++s) {
    Eigen::MatrixXcd rot = v.adjoint() * samples[static_cast<std::size_t>(s)].matrix() * v;
    traj.row(s) = scale * rot.diagonal().real().transpose();
    rot.diagonal().setZero();
    rep.commutation_residual = std::max(rep.commutation_residual, rot.norm());
  }

  // Masked components of rho0, one per gap plus the stationary part.
  std::vector<Eigen::MatrixXcd> parts(static_cast<std::size_t>(n_rates) + 1, Eigen::MatrixXcd::Zero(d, d));
  for (Eigen::Index j = 0; j < d; ++j) {
    for (Eigen::Index i = 0; i < d; ++i) {
      const double l = pr.lambda_sq(i, j);
      const Complex r = rho0(i, j);
      if (l <= 1e-12 * std::max(1.0, distinct.empty() ? 1.0 : distinct.back())) {
        parts[0](i, j) = r;
        continue;
      }
      auto it = std::lower_bound(distinct.begin(), distinct.end(), l * (1.0 - 1e-9));
      if (it != distinct.end() && std::abs(*it - l) <= 1e-9 * l) {
        parts[static_cast<std::size_t>(it - distinct.begin()) + 1](i, j) = r;
      } else {
        rep.unmatched_weight = std::max(rep.unmatched_weight, std::abs(r));
      }
    }
  }
  Eigen::MatrixXd coef(n_rates + 1, d);
  for (std::size_t a = 0; a < parts.size(); ++a) {
    coef.row(static_cast<Eigen::Index>(a)) = scale * (v.adjoint() * parts[a] * v).diagonal().real().transpose();
  }

  Eigen::MatrixXd design(n_times, n_rates + 1);
  for (Eigen::Index s = 0; s < n_times; ++s) {
    design(s, 0) = 1.0;
    for (Eigen::Index a = 0; a < n_rates; ++a) {
      design(s, a + 1) = std::exp(-rep.rates[static_cast<std::size_t>(a)] * times[static_cast<std::size_t>(s)]);
    }
  }
  rep.max_residual = (design * coef - traj).cwiseAbs().maxCoeff();
  rep.constant = coef.row(0).transpose();
  rep.kappa = coef.bottomRows(n_rates).transpose();
  for (Eigen::Index a = 0; a < n_rates; ++a) {
    rep.max_kappa_sum = std::max(rep.max_kappa_sum, std::abs(rep.kappa.col(a).sum()));
  }

  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(design);
  qr.setThreshold(1e-13);
  if (qr.rank() < design.cols()) {
    throw SamplingError("product_state_spectrum_check: fit matrix has rank " + std::to_string(qr.rank()) +
                        " < " + std::to_string(design.cols()) + "; add time points or spread them out");
  }
  const Eigen::MatrixXd fit = qr.solve(traj);
  rep.fit_residual = (design * fit - traj).cwiseAbs().maxCoeff();
  rep.fit_kappa_deviation = (fit - coef).cwiseAbs().maxCoeff();

  rep.slowest_rate = std::numeric_limits<double>::infinity();
  for (Eigen::Index a = 0; a < n_rates; ++a) {
    if (rep.kappa.col(a).cwiseAbs().maxCoeff() > weight_tolerance) {
      rep.slowest_rate = rep.rates[static_cast<std::size_t>(a)];
      break;
    }
  }
  return rep;
}

}  // namespace mbqfi
