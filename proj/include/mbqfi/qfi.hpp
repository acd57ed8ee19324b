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
#include <limits>
#include <stdexcept>

#include "mbqfi/dynamics.hpp"

namespace mbqfi {

inline constexpr double kDefaultEigenCutoff = 1e-12;

namespace detail {

inline void check_derivative(const Eigen::MatrixXcd& drho, Eigen::Index dim, const char* who) {
  if (drho.rows() != dim || drho.cols() != dim) {
    throw std::invalid_argument(std::string(who) + ": derivative dimension mismatch");
  }
  const double scale = std::max(1.0, drho.norm());
  if (hermiticity_defect(drho) > 1e-10 * scale) {
    throw std::invalid_argument(std::string(who) + ": derivative is not Hermitian");
  }
  if (std::abs(drho.trace()) > 1e-10 * scale) {
    throw std::invalid_argument(std::string(who) + ": derivative is not traceless");
  }
}

struct Spectrum {
  Eigen::VectorXd values;   // ascending, negatives clamped to zero
  Eigen::MatrixXcd vectors;
};

inline Spectrum spectrum_of(const DensityMatrix& rho) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(rho.matrix());
  if (es.info() != Eigen::Success) throw std::runtime_error("eigendecomposition failed");
  return {es.eigenvalues().cwiseMax(0.0), es.eigenvectors()};
}

}  // namespace detail

/// F = sum_{xi_n + xi_n' > cutoff} 4 xi_n |<n|drho|n'>|^2 / (xi_n + xi_n')^2.
inline double spectral_qfi(const DensityMatrix& rho, const Eigen::MatrixXcd& drho,
                           double cutoff = kDefaultEigenCutoff) {
  detail::check_derivative(drho, rho.dim(), "spectral_qfi");
  const auto sp = detail::spectrum_of(rho);
  const Eigen::MatrixXcd d = sp.vectors.adjoint() * drho * sp.vectors;
  const Eigen::VectorXd& xi = sp.values;
  double f = 0.0;
  for (Eigen::Index b = 0; b < xi.size(); ++b) {
    for (Eigen::Index a = 0; a < xi.size(); ++a) {
      const double s = xi(a) + xi(b);
      if (s <= cutoff) continue;
      f += 4.0 * xi(a) * std::norm(d(a, b)) / (s * s);
    }
  }
  return f;
}

/// Off-diagonal QFI-matrix element sum 2 Re[<k|d1|l><l|d2|k>] / (xi_k + xi_l).
inline double qfi_offdiagonal(const DensityMatrix& rho, const Eigen::MatrixXcd& drho1,
                              const Eigen::MatrixXcd& drho2, double cutoff = kDefaultEigenCutoff) {
  detail::check_derivative(drho1, rho.dim(), "qfi_offdiagonal");
  detail::check_derivative(drho2, rho.dim(), "qfi_offdiagonal");
  const auto sp = detail::spectrum_of(rho);
  const Eigen::MatrixXcd d1 = sp.vectors.adjoint() * drho1 * sp.vectors;
  const Eigen::MatrixXcd d2 = sp.vectors.adjoint() * drho2 * sp.vectors;
  const Eigen::VectorXd& xi = sp.values;
  double f = 0.0;
  for (Eigen::Index l = 0; l < xi.size(); ++l) {
    for (Eigen::Index k = 0; k < xi.size(); ++k) {
      const double s = xi(k) + xi(l);
      if (s <= cutoff) continue;
      f += 2.0 * (d1(k, l) * d2(l, k)).real() / s;
    }
  }
  return f;
}

/// Bound sandwich for the x1 (Hamiltonian coupling) QFI of a state whose
/// x1-derivative is -(i t / hbar)[H, rho].
struct BoundReport {
  double lower = 0.0;
  double upper = 0.0;
  double c_m = 0.0;
  double c_M = 0.0;
  double r = 0.0;
  double variance_H = 0.0;
  /// Variance of H's diagonal in the eigenbasis of rho; it never enters F.
  double leakage = 0.0;
  /// A zero eigenvector of rho is linked through H to the support.
  bool zero_space_coupled = false;
  /// c_m collapsed (degenerate spectrum) and the top-eigenvector bound was used.
  bool improved = false;
  double c_improved = 0.0;
};

struct BoundOptions {
  double zero_cutoff = kDefaultEigenCutoff;
  double degeneracy_tolerance = 1e-9;
  double coupling_tolerance = 1e-9;
};

inline BoundReport qfi_bounds(const DensityMatrix& rho, const Eigen::VectorXd& h_diag, double t,
                              double hbar = 1.0, const BoundOptions& opt = {}) {
  if (h_diag.size() != rho.dim()) throw std::invalid_argument("qfi_bounds: dimension mismatch");
  BoundReport rep;
  const Eigen::VectorXd pop = rho.matrix().diagonal().real();
  const double mean = pop.dot(h_diag);
  rep.variance_H = std::max(0.0, pop.dot(h_diag.cwiseProduct(h_diag)) - mean * mean);

  const auto sp = detail::spectrum_of(rho);
  const Eigen::VectorXd& xi = sp.values;
  const Eigen::MatrixXcd hp = sp.vectors.adjoint() * h_diag.asDiagonal() * sp.vectors;
  const Eigen::Index d = xi.size();

  Eigen::Index first_pos = 0;
  while (first_pos < d && xi(first_pos) <= opt.zero_cutoff) ++first_pos;
  const Eigen::Index top = d - 1;

  const double hscale = std::max(1.0, h_diag.cwiseAbs().maxCoeff());
  if (first_pos > 0 && first_pos < d) {
    const double link = hp.block(first_pos, 0, d - first_pos, first_pos).cwiseAbs().maxCoeff();
    rep.zero_space_coupled = link > opt.coupling_tolerance * hscale;
  }

  double diag_mean = 0.0;
  double diag_sq = 0.0;
  for (Eigen::Index n = first_pos; n < d; ++n) {
    diag_mean += xi(n) * hp(n, n).real();
    diag_sq += xi(n) * hp(n, n).real() * hp(n, n).real();
  }
  rep.leakage = std::max(0.0, diag_sq - diag_mean * diag_mean);

  const double xi_max = xi(top);
  const double xi_min = xi(first_pos);
  rep.c_M = rep.zero_space_coupled ? 1.0 : std::pow((xi_max - xi_min) / (xi_max + xi_min), 2);

  double r = 0.0;
  for (Eigen::Index n = first_pos; n + 1 < d; ++n) r = std::max(r, xi(n) / xi(n + 1));
  if (r > 1.0 - opt.degeneracy_tolerance) r = 1.0;
  rep.r = r;
  rep.c_m = std::pow((1.0 - r) / (1.0 + r), 2);

  const double scale = 4.0 * t * t / (hbar * hbar);
  rep.upper = rep.c_M * scale * rep.variance_H;
  rep.lower = rep.c_m * scale * std::max(0.0, rep.variance_H - rep.leakage);

  if (r == 1.0) {
    rep.improved = true;
    const double below = top > first_pos ? xi(top - 1) : 0.0;
    if (xi_max - below > opt.degeneracy_tolerance * xi_max) {
      rep.c_improved = std::pow((xi_max - below) / (xi_max + below), 2);
      double var_top = 0.0;
      for (Eigen::Index n = 0; n < d; ++n) {
        if (n != top) var_top += std::norm(hp(n, top));
      }
      rep.lower = rep.c_improved * xi_max * scale * var_top;
    } else {
      rep.lower = 0.0;
    }
  }
  return rep;
}

struct QfiReport {
  double qfi = 0.0;
  double lower_bound = 0.0;
  double upper_bound = 0.0;
  double c_m = 0.0;
  double c_M = 0.0;
  double variance_H = 0.0;
  double qcrb = 0.0;
  bool improved = false;
};

/// Two-level closed forms:
///   F_x1 = t^2 / (x1^2 tau_Z^2) e^{-4t/tau_D}
///   F_x2 = 4 t^2 / (x2^2 tau_D^2) e^{-4t/tau_D} / (1 - e^{-4t/tau_D})
/// i.e. beta^2 / (e^{2 beta x2} - 1) with beta = lambda^2 t / 2.
inline double analytic_qfi(const TwoLevelProbe& probe, Parameter which, double t) {
  probe.validate();
  if (!(t >= 0.0)) throw std::invalid_argument("analytic_qfi: t must be >= 0");
  const double u = probe.x2 * probe.lambda_sq * t;  // 4 t / tau_D
  if (which == Parameter::x1) {
    const double w = probe.eps * t / probe.hbar;
    return w * w * std::exp(-u);
  }
  if (t == 0.0 || probe.lambda_sq == 0.0) return 0.0;
  if (probe.x2 == 0.0) return std::numeric_limits<double>::infinity();
  const double a = probe.lambda_sq * t / 2.0;
  return a * a / std::expm1(u);
}

/// 1 / sqrt(repetitions * qfi); +inf when qfi == 0.
inline double qcrb(double qfi, long repetitions = 1) {
  if (repetitions < 1) throw std::invalid_argument("qcrb: repetitions must be >= 1");
  if (!(qfi >= 0.0)) throw std::invalid_argument("qcrb: qfi must be >= 0");
  if (qfi == 0.0) return std::numeric_limits<double>::infinity();
  return 1.0 / std::sqrt(static_cast<double>(repetitions) * qfi);
}

inline QfiReport make_qfi_report(const DensityMatrix& rho, const Eigen::MatrixXcd& drho_x1,
                                 const Eigen::VectorXd& h_diag, double t, long repetitions = 1,
                                 double hbar = 1.0) {
  QfiReport q;
  q.qfi = spectral_qfi(rho, drho_x1);
  const BoundReport b = qfi_bounds(rho, h_diag, t, hbar);
  q.lower_bound = b.lower;
  q.upper_bound = b.upper;
  q.c_m = b.improved ? b.c_improved : b.c_m;
  q.c_M = b.c_M;
  q.variance_H = b.variance_H;
  q.improved = b.improved;
  q.qcrb = qcrb(q.qfi, repetitions);
  return q;
}

/// lower - slack <= qfi <= upper + slack with slack relative to 4 t^2 Var(H).
inline bool sandwich_holds(double qfi, const BoundReport& b, double t, double hbar = 1.0,
                           double rel = 1e-9) {
  const double slack = rel * std::max(4.0 * t * t * b.variance_H / (hbar * hbar), 1e-5);
  return b.lower - slack <= qfi && qfi <= b.upper + slack;
}

}  // namespace mbqfi
