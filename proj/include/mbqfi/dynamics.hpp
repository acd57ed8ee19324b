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
#include <complex>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <string>
#include <type_traits>
#include <utility>
#include <variant>

#include "mbqfi/basis.hpp"
#include "mbqfi/errors.hpp"

namespace mbqfi {

using Complex = std::complex<double>;

enum class Parameter { x1, x2 };

inline const char* to_string(Parameter p) { return p == Parameter::x1 ? "x1" : "x2"; }

namespace detail {

inline double frobenius(const Eigen::MatrixXcd& m) { return m.norm(); }

inline double hermiticity_defect(const Eigen::MatrixXcd& m) {
  return (m - m.adjoint()).norm();
}

}  // namespace detail

/// Dense Hermitian, unit-trace matrix. Positivity is checked on demand
/// because it costs a full eigendecomposition.
class DensityMatrix {
 public:
  static constexpr double kTraceTolerance = 1e-12;
  static constexpr double kHermitianTolerance = 1e-10;
  static constexpr double kPositivityFloor = -1e-10;

  DensityMatrix() = default;

  explicit DensityMatrix(Eigen::MatrixXcd m) : m_(std::move(m)) {
    if (m_.rows() != m_.cols() || m_.rows() == 0) {
      throw std::invalid_argument("DensityMatrix: matrix must be square and nonempty");
    }
    if (detail::hermiticity_defect(m_) > kHermitianTolerance * std::max(1.0, m_.norm())) {
      throw std::invalid_argument("DensityMatrix: matrix is not Hermitian");
    }
    const Complex tr = m_.trace();
    if (std::abs(tr.real() - 1.0) > kTraceTolerance || std::abs(tr.imag()) > kTraceTolerance) {
      throw std::invalid_argument("DensityMatrix: trace differs from 1 by " +
                                  std::to_string(std::abs(tr - Complex(1.0))));
    }
  }

  static DensityMatrix from_pure(const Eigen::VectorXcd& psi) {
    const double norm = psi.norm();
    if (norm == 0.0) throw std::invalid_argument("DensityMatrix: zero state vector");
    const Eigen::VectorXcd u = psi / norm;
    return DensityMatrix(u * u.adjoint());
  }

  const Eigen::MatrixXcd& matrix() const noexcept { return m_; }
  Eigen::Index dim() const noexcept { return m_.rows(); }
  Complex operator()(Eigen::Index i, Eigen::Index j) const { return m_(i, j); }
  double trace() const { return m_.trace().real(); }

  Eigen::VectorXd eigenvalues() const {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(m_, Eigen::EigenvaluesOnly);
    return es.eigenvalues();
  }

  bool is_positive(double floor = kPositivityFloor) const {
    return eigenvalues().minCoeff() >= floor;
  }

 private:
  Eigen::MatrixXcd m_;
};

// ---------------------------------------------------------------------------
// Probes

/// (|E_m> + |E_M>)/sqrt(2) for the extremal eigenstates of H.
struct MaxVarianceProbe {
  bool operator==(const MaxVarianceProbe&) const = default;
};
/// (|-...-> + |+...+>)/sqrt(2).
struct GhzProbe {
  bool operator==(const GhzProbe&) const = default;
};
/// (cos(phi)|+> + sin(phi)|->)^{(x)N}, so <sigma^z> = cos(2 phi).
struct ProductProbe {
  double phi = std::numbers::pi / 8;
  bool operator==(const ProductProbe&) const = default;
};
/// (|v_0> + |v_{floor(N/2)}>)/sqrt(2).
struct IsingMaxVarianceProbe {
  bool operator==(const IsingMaxVarianceProbe&) const = default;
};

using ProbeSpec = std::variant<MaxVarianceProbe, GhzProbe, ProductProbe, IsingMaxVarianceProbe>;

inline bool is_singular(const ProbeSpec& spec) {
  const auto* p = std::get_if<ProductProbe>(&spec);
  return p != nullptr && std::abs(p->phi - std::numbers::pi / 4) < 1e-12;
}

/// Indices of the lowest and highest Hamiltonian eigenvalues (first occurrence).
inline std::pair<Eigen::Index, Eigen::Index> extremal_indices(const Eigen::VectorXd& h) {
  Eigen::Index lo = 0;
  Eigen::Index hi = 0;
  h.minCoeff(&lo);
  h.maxCoeff(&hi);
  return {lo, hi};
}

/// Basis indices holding the two branches of a two-level probe.
inline std::pair<Eigen::Index, Eigen::Index> probe_support(const ProbeSpec& spec, const SpinBasis& basis,
                                                           const DiagonalOperatorSet& diag) {
  const Eigen::VectorXd& h = diag.hamiltonian;
  if (std::holds_alternative<MaxVarianceProbe>(spec)) {
    auto [lo, hi] = extremal_indices(h);
    if (h(hi) - h(lo) <= 1e-12 * std::max(1.0, h.cwiseAbs().maxCoeff())) {
      throw DegenerateProbeError(
          "max-variance probe: E_m == E_M, the Hamiltonian has no spread; "
          "use an IsingMaxVariance-style reference pair instead");
    }
    return {lo, hi};
  }
  if (std::holds_alternative<GhzProbe>(spec)) {
    // Both branches may carry the same energy (even body order); the state is
    // still valid and the zero variance is reported by the timescale analysis.
    const auto last = static_cast<Eigen::Index>(basis.dimension() - 1);
    return {0, last};
  }
  if (std::holds_alternative<IsingMaxVarianceProbe>(spec)) {
    if (basis.sites() < 2) throw std::invalid_argument("IsingMaxVariance probe needs N >= 2");
    return {static_cast<Eigen::Index>(basis.reference_index(0)),
            static_cast<Eigen::Index>(basis.reference_index(basis.sites() / 2))};
  }
  throw std::invalid_argument("probe_support: product probes are not two-level");
}

inline Eigen::VectorXcd probe_state_vector(const ProbeSpec& spec, const SpinBasis& basis,
                                           const DiagonalOperatorSet& diag) {
  const auto dim = static_cast<Eigen::Index>(basis.dimension());
  if (diag.hamiltonian.size() != dim) throw std::invalid_argument("make_probe: dimension mismatch");
  Eigen::VectorXcd psi = Eigen::VectorXcd::Zero(dim);
  if (const auto* p = std::get_if<ProductProbe>(&spec)) {
    if (!(p->phi > 0.0 && p->phi < std::numbers::pi / 2)) {
      throw std::invalid_argument("product probe: phi must lie in (0, pi/2)");
    }
    const double up = std::cos(p->phi);
    const double down = std::sin(p->phi);
    for (Eigen::Index i = 0; i < dim; ++i) {
      const int plus = basis.plus_count(static_cast<std::size_t>(i));
      psi(i) = std::pow(up, plus) * std::pow(down, basis.sites() - plus);
    }
    return psi;
  }
  auto [a, b] = probe_support(spec, basis, diag);
  psi(a) = 1.0 / std::numbers::sqrt2;
  psi(b) = 1.0 / std::numbers::sqrt2;
  return psi;
}

inline DensityMatrix make_probe(const ProbeSpec& spec, const SpinBasis& basis,
                                const DiagonalOperatorSet& diag) {
  return DensityMatrix::from_pure(probe_state_vector(spec, basis, diag));
}

// ---------------------------------------------------------------------------
// Exact evolution

inline void check_evolution_args(double x2, double t) {
  if (!(t >= 0.0)) throw std::invalid_argument("evolution time must be nonnegative");
  if (!(x2 >= 0.0)) throw std::invalid_argument("dephasing rate x2 must be nonnegative");
}

/// rho_ij(t) = rho_ij(0) exp((-i x1 eps_ij / hbar - x2 lambda_ij^2 / 2) t).
inline DensityMatrix evolve_dephasing(const DensityMatrix& rho0, const PairRates& rates, double x1,
                                      double x2, double t, double hbar = 1.0) {
  check_evolution_args(x2, t);
  if (rho0.dim() != rates.dimension()) throw std::invalid_argument("evolve_dephasing: dimension mismatch");
  const Eigen::Index d = rho0.dim();
  Eigen::MatrixXcd out(d, d);
  for (Eigen::Index j = 0; j < d; ++j) {
    for (Eigen::Index i = 0; i < d; ++i) {
      const Complex rate(-x2 * rates.lambda_sq(i, j) / 2.0, -x1 * rates.eps(i, j) / hbar);
      out(i, j) = rho0(i, j) * std::exp(rate * t);
    }
  }
  return DensityMatrix(std::move(out));
}

/// Exact d rho(t) / d x_alpha for the dephasing solution.
inline Eigen::MatrixXcd dephasing_derivative(const DensityMatrix& rho0, const PairRates& rates, double x1,
                                             double x2, double t, Parameter which, double hbar = 1.0) {
  const DensityMatrix rho = evolve_dephasing(rho0, rates, x1, x2, t, hbar);
  const Eigen::Index d = rho.dim();
  Eigen::MatrixXcd out(d, d);
  for (Eigen::Index j = 0; j < d; ++j) {
    for (Eigen::Index i = 0; i < d; ++i) {
      const Complex factor = which == Parameter::x1 ? Complex(0.0, -rates.eps(i, j) * t / hbar)
                                                    : Complex(-rates.lambda_sq(i, j) * t / 2.0, 0.0);
      out(i, j) = factor * rho(i, j);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Two-level reduction

struct TwoLevelProbe {
  double eps = 0.0;        ///< E_M - E_m
  double lambda_sq = 0.0;  ///< sum_nu (lambda_M - lambda_m)^2
  double x1 = 1.0;
  double x2 = 0.0;
  double hbar = 1.0;

  void validate() const {
    if (!(eps >= 0.0)) throw std::invalid_argument("TwoLevelProbe: eps must be >= 0");
    if (!(lambda_sq >= 0.0)) throw std::invalid_argument("TwoLevelProbe: lambda_sq must be >= 0");
    if (!(x2 >= 0.0)) throw std::invalid_argument("TwoLevelProbe: x2 must be >= 0");
    if (!(hbar > 0.0)) throw std::invalid_argument("TwoLevelProbe: hbar must be > 0");
  }

  double tau_z() const {
    const double w = x1 * eps;
    return w == 0.0 ? std::numeric_limits<double>::infinity() : hbar / std::abs(w);
  }
  double tau_d() const {
    const double g = x2 * lambda_sq;
    return g == 0.0 ? std::numeric_limits<double>::infinity() : 4.0 / g;
  }
};

/// Reduced probe for the pair (i_m, i_M) of a diagonal operator set.
inline TwoLevelProbe reduce_to_two_level(const DiagonalOperatorSet& diag, Eigen::Index i_m,
                                         Eigen::Index i_M, double x1, double x2, double hbar = 1.0) {
  TwoLevelProbe p;
  p.eps = diag.hamiltonian(i_M) - diag.hamiltonian(i_m);
  p.lambda_sq = (diag.lindblad.row(i_M) - diag.lindblad.row(i_m)).squaredNorm();
  p.x1 = x1;
  p.x2 = x2;
  p.hbar = hbar;
  if (p.eps < 0.0) {
    p.eps = -p.eps;
  }
  p.validate();
  return p;
}

/// 2x2 state in the (E_m, E_M) ordering:
///   rho = 1/2 [[1, e^a], [e^a*, 1]],  a = i x1 eps t / hbar - x2 lambda^2 t / 2.
inline DensityMatrix two_level_state(const TwoLevelProbe& probe, double t) {
  probe.validate();
  check_evolution_args(probe.x2, t);
  const Complex a(-probe.x2 * probe.lambda_sq * t / 2.0, probe.x1 * probe.eps * t / probe.hbar);
  Eigen::MatrixXcd m(2, 2);
  m(0, 0) = 0.5;
  m(1, 1) = 0.5;
  m(0, 1) = 0.5 * std::exp(a);
  m(1, 0) = std::conj(m(0, 1));
  return DensityMatrix(std::move(m));
}

inline Eigen::MatrixXcd two_level_derivative(const TwoLevelProbe& probe, double t, Parameter which) {
  const DensityMatrix rho = two_level_state(probe, t);
  const Complex factor = which == Parameter::x1 ? Complex(0.0, probe.eps * t / probe.hbar)
                                                : Complex(-probe.lambda_sq * t / 2.0, 0.0);
  Eigen::MatrixXcd d = Eigen::MatrixXcd::Zero(2, 2);
  d(0, 1) = factor * rho(0, 1);
  d(1, 0) = std::conj(d(0, 1));
  return d;
}

/// Closed-form eigenvalues (xi_-, xi_+) = ((1 -+ e^{-2t/tau_D}) / 2).
inline std::pair<double, double> two_level_eigenvalues(const TwoLevelProbe& probe, double t) {
  const double c = std::exp(-probe.x2 * probe.lambda_sq * t / 2.0);
  return {(1.0 - c) / 2.0, (1.0 + c) / 2.0};
}

/// tr(rho_t rho_0).
inline double fidelity(const DensityMatrix& rho_t, const DensityMatrix& rho0) {
  if (rho_t.dim() != rho0.dim()) throw std::invalid_argument("fidelity: dimension mismatch");
  // tr(AB) for Hermitian A, B is sum_ij A_ij conj(B_ij)
  return rho_t.matrix().cwiseProduct(rho0.matrix().conjugate()).sum().real();
}

/// tr(rho^2).
inline double purity(const DensityMatrix& rho) { return rho.matrix().squaredNorm(); }

inline double two_level_fidelity(const TwoLevelProbe& probe, double t) {
  return 0.5 * (1.0 + std::exp(-2.0 * t / probe.tau_d()) * std::cos(t / probe.tau_z()));
}

inline double two_level_purity(const TwoLevelProbe& probe, double t) {
  return 0.5 * (1.0 + std::exp(-4.0 * t / probe.tau_d()));
}

}  // namespace mbqfi
