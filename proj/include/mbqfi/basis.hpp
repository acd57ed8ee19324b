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

#include <bit>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <type_traits>
#include <variant>
#include <vector>

#include "mbqfi/binomial.hpp"
#include "mbqfi/errors.hpp"

namespace mbqfi {

inline constexpr int kDefaultDenseLimit = 14;

// Computational basis of N two-level systems.
//
// A basis index is its own occupation word: bit (s - 1) set means site s is
// in |+> (single-body eigenvalue +1), clear means |->. The reference vectors
// |v_q> = |-...-+...+> carry + on the last q sites.
class SpinBasis {
 public:
  explicit SpinBasis(int n_sites, int dense_limit = kDefaultDenseLimit)
      : n_sites_(n_sites) {
    if (n_sites < 1) throw std::invalid_argument("SpinBasis: need at least one site");
    if (n_sites > dense_limit) throw CapacityError(n_sites, dense_limit);
    if (n_sites > 30) throw CapacityError(n_sites, 30);
  }

  int sites() const noexcept { return n_sites_; }
  std::size_t dimension() const noexcept { return std::size_t{1} << n_sites_; }

  std::uint32_t bits(std::size_t index) const {
    check_index(index);
    return static_cast<std::uint32_t>(index);
  }

  std::size_t index_of(std::uint32_t bits) const {
    if (bits >= dimension()) throw std::out_of_range("SpinBasis: bit word out of range");
    return bits;
  }

  /// +1 or -1 for site in 1..N.
  int spin(std::size_t index, int site) const {
    check_index(index);
    check_site(site);
    return ((index >> (site - 1)) & 1U) ? 1 : -1;
  }

  int plus_count(std::size_t index) const {
    check_index(index);
    return std::popcount(static_cast<std::uint32_t>(index));
  }

  std::size_t reference_index(int q) const {
    if (q < 0 || q > n_sites_) throw std::out_of_range("SpinBasis: q out of range");
    const std::size_t ones = (std::size_t{1} << q) - 1;
    return ones << (n_sites_ - q);
  }

  std::vector<std::size_t> states_with_plus_count(int q) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < dimension(); ++i) {
      if (std::popcount(static_cast<std::uint32_t>(i)) == q) out.push_back(i);
    }
    return out;
  }

  /// Ket label with site 1 leftmost, e.g. "|--++>".
  std::string ket(std::size_t index) const {
    check_index(index);
    std::string s = "|";
    for (int site = 1; site <= n_sites_; ++site) s += spin(index, site) > 0 ? '+' : '-';
    return s + ">";
  }

 private:
  void check_index(std::size_t index) const {
    if (index >= dimension()) throw std::out_of_range("SpinBasis: index out of range");
  }
  void check_site(int site) const {
    if (site < 1 || site > n_sites_) throw std::invalid_argument("SpinBasis: site out of range");
  }

  int n_sites_;
};

inline SpinBasis build_basis(int n_sites, int dense_limit = kDefaultDenseLimit) {
  return SpinBasis(n_sites, dense_limit);
}

/// Calls f(tuple) for every strictly increasing k-tuple of sites in 1..n.
template <typename F>
void for_each_combination(int n, int k, F&& f) {
  if (k < 0 || k > n) return;
  std::vector<int> idx(static_cast<std::size_t>(k));
  for (int i = 0; i < k; ++i) idx[static_cast<std::size_t>(i)] = i + 1;
  while (true) {
    f(std::span<const int>(idx));
    int pos = k - 1;
    while (pos >= 0 && idx[static_cast<std::size_t>(pos)] == n - k + pos + 1) --pos;
    if (pos < 0) return;
    ++idx[static_cast<std::size_t>(pos)];
    for (int j = pos + 1; j < k; ++j) {
      idx[static_cast<std::size_t>(j)] = idx[static_cast<std::size_t>(j - 1)] + 1;
    }
  }
}

/// Eigenvalue of sigma^z_{i1} ... sigma^z_{ik} on a basis state.
inline int zprod_eigenvalue(const SpinBasis& basis, std::size_t state_index,
                            std::span<const int> sites) {
  int prev = 0;
  int value = 1;
  for (int s : sites) {
    if (s <= prev) throw std::invalid_argument("zprod_eigenvalue: sites must be strictly increasing");
    if (s > basis.sites()) throw std::invalid_argument("zprod_eigenvalue: site out of range");
    value *= basis.spin(state_index, s);
    prev = s;
  }
  return value;
}

struct DegeneracyCount {
  BigCount plus = 0;
  BigCount minus = 0;
};

// Multiplicities of +1 and -1 among the C(n, k) products sigma^z_{i1}..sigma^z_{ik}
// evaluated on |v_q>. A tuple taking j sites from the + block has eigenvalue
// (-1)^(k - j); odd j sums to +1 when k is odd and to -1 when k is even.
inline DegeneracyCount kbody_degeneracy(int n, int k, int q) {
  if (k < 1 || k > n) throw std::invalid_argument("kbody_degeneracy: need 1 <= k <= n");
  if (q < 0 || q > n) throw std::invalid_argument("kbody_degeneracy: need 0 <= q <= n");
  BigCount odd = 0;
  BigCount even = 0;
  for (int j = 0; j <= k; ++j) {
    const BigCount term = binomial_exact(q, j) * binomial_exact(n - q, k - j);
    (j % 2 == 1 ? odd : even) += term;
  }
  if (k % 2 == 1) return {odd, even};
  return {even, odd};
}

struct GapEntry {
  int q = 0;
  double lambda_sq = 0.0;
};

/// lambda^2 between |v_0> and |v_q> under uncorrelated p-body sigma^z products:
/// 4 times the number of p-tuples holding an odd number of + sites.
inline std::vector<GapEntry> gap_spectrum_from_reference(int n, int p) {
  if (p < 1 || p > n) throw std::invalid_argument("gap_spectrum_from_reference: need 1 <= p <= n");
  std::vector<GapEntry> out;
  out.reserve(static_cast<std::size_t>(n));
  for (int q = 1; q <= n; ++q) {
    double flipped = 0.0;
    for (int j = 1; j <= p; j += 2) flipped += binomial(q, j) * binomial(n - q, p - j);
    out.push_back({q, 4.0 * flipped});
  }
  return out;
}

/// Smallest nonzero dephasing gap, 4 C(n-1, p-1); valid for p < floor(n/2).
inline double min_nonzero_gap(int n, int p) {
  if (p < 1) throw std::invalid_argument("min_nonzero_gap: need p >= 1");
  if (p >= n / 2) {
    throw DomainError("min_nonzero_gap: closed form requires p < floor(n/2), got p=" +
                      std::to_string(p) + ", n=" + std::to_string(n));
  }
  return 4.0 * binomial(n - 1, p - 1);
}

// ---------------------------------------------------------------------------
// Operator specifications

/// H = sum over k-tuples of h_{i1} x ... x h_{ik}, h = diag(eps_m on |->, eps_M on |+>).
struct SymmetrizedUniform {
  int k = 1;
  double eps_m = -1.0;
  double eps_M = 1.0;
  bool operator==(const SymmetrizedUniform&) const = default;
};

/// H = -sum_{i<j} s_i s_j / |i-j|^alpha (coupling J factored out).
struct LongRangeIsing {
  double alpha = 0.0;
  bool operator==(const LongRangeIsing&) const = default;
};

/// sum over k-tuples of sigma^z products. The chain's -J is absorbed into the
/// estimated parameter, so eigenvalues here are +sum of products.
struct SpinChainUniform {
  int k = 1;
  bool operator==(const SpinChainUniform&) const = default;
};

struct CustomDiagonal {
  std::vector<double> eigenvalues;
  bool operator==(const CustomDiagonal&) const = default;
};

using HamiltonianSpec =
    std::variant<SymmetrizedUniform, LongRangeIsing, SpinChainUniform, CustomDiagonal>;

/// One Lindblad operator sigma^z_{i1}..sigma^z_{ip} per p-tuple.
struct UncorrelatedPBody {
  int p = 1;
  bool operator==(const UncorrelatedPBody&) const = default;
};

/// A single Lindblad operator: the sum of all k-body sigma^z products.
struct CollectiveSymmetrizedKBody {
  int k = 1;
  bool operator==(const CollectiveSymmetrizedKBody&) const = default;
};

using LindbladSpec = std::variant<UncorrelatedPBody, CollectiveSymmetrizedKBody>;

/// Diagonals of the commuting Hamiltonian and Lindblad operators.
struct DiagonalOperatorSet {
  int n_sites = 0;
  Eigen::VectorXd hamiltonian;  ///< total eigenvalues eps_i
  Eigen::MatrixXd lindblad;     ///< one column per operator, rows = basis states
  bool collective = false;

  std::size_t dimension() const { return static_cast<std::size_t>(hamiltonian.size()); }
  Eigen::Index operator_count() const { return lindblad.cols(); }
};

/// Element budget for the Lindblad table (dimension x operator count).
inline constexpr std::size_t kLindbladTableBudget = std::size_t{1} << 25;

namespace detail {

/// sum over k-tuples of prod(value(site)) on a state with q sites in |+>.
inline double symmetric_product_sum(int n, int k, int q, double plus_value, double minus_value) {
  double total = 0.0;
  for (int j = 0; j <= k; ++j) {
    const double ways = binomial(q, j) * binomial(n - q, k - j);
    if (ways == 0.0) continue;
    total += ways * std::pow(plus_value, j) * std::pow(minus_value, k - j);
  }
  return total;
}

inline void check_body_order(const char* what, int order, int n) {
  if (order < 1 || order > n) {
    throw std::invalid_argument(std::string(what) + ": body order " + std::to_string(order) +
                                " outside 1.." + std::to_string(n));
  }
}

}  // namespace detail

inline Eigen::VectorXd hamiltonian_diagonal(const HamiltonianSpec& spec, const SpinBasis& basis) {
  const int n = basis.sites();
  const auto dim = static_cast<Eigen::Index>(basis.dimension());
  Eigen::VectorXd h(dim);
  std::visit(
      [&](const auto& s) {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, SymmetrizedUniform>) {
          detail::check_body_order("SymmetrizedUniform", s.k, n);
          if (s.eps_m > s.eps_M) throw std::invalid_argument("SymmetrizedUniform: eps_m > eps_M");
          for (Eigen::Index i = 0; i < dim; ++i) {
            h(i) = detail::symmetric_product_sum(n, s.k, basis.plus_count(static_cast<std::size_t>(i)),
                                                 s.eps_M, s.eps_m);
          }
        } else if constexpr (std::is_same_v<T, SpinChainUniform>) {
          detail::check_body_order("SpinChainUniform", s.k, n);
          for (Eigen::Index i = 0; i < dim; ++i) {
            h(i) = detail::symmetric_product_sum(n, s.k, basis.plus_count(static_cast<std::size_t>(i)),
                                                 1.0, -1.0);
          }
        } else if constexpr (std::is_same_v<T, LongRangeIsing>) {
          if (!(s.alpha >= 0.0)) throw std::invalid_argument("LongRangeIsing: alpha must be >= 0");
          for (Eigen::Index idx = 0; idx < dim; ++idx) {
            const auto state = static_cast<std::size_t>(idx);
            double e = 0.0;
            for (int i = 1; i <= n; ++i) {
              for (int j = i + 1; j <= n; ++j) {
                e -= basis.spin(state, i) * basis.spin(state, j) * std::pow(double(j - i), -s.alpha);
              }
            }
            h(idx) = e;
          }
        } else {
          if (static_cast<Eigen::Index>(s.eigenvalues.size()) != dim) {
            throw std::invalid_argument("CustomDiagonal: expected " + std::to_string(dim) +
                                        " eigenvalues, got " + std::to_string(s.eigenvalues.size()));
          }
          for (Eigen::Index i = 0; i < dim; ++i) h(i) = s.eigenvalues[static_cast<std::size_t>(i)];
        }
      },
      spec);
  return h;
}

inline DiagonalOperatorSet build_diagonals(const HamiltonianSpec& spec_h, const LindbladSpec& spec_l,
                                           const SpinBasis& basis) {
  const int n = basis.sites();
  const auto dim = static_cast<Eigen::Index>(basis.dimension());
  DiagonalOperatorSet out;
  out.n_sites = n;
  out.hamiltonian = hamiltonian_diagonal(spec_h, basis);
  if (const auto* u = std::get_if<UncorrelatedPBody>(&spec_l)) {
    detail::check_body_order("UncorrelatedPBody", u->p, n);
    const double ops = binomial(n, u->p);
    if (ops * static_cast<double>(dim) > static_cast<double>(kLindbladTableBudget)) {
      throw CapacityError("Lindblad table of " + std::to_string(static_cast<long long>(ops)) + " operators exceeds the element budget",
                          n, basis.sites());
    }
    out.lindblad.resize(dim, static_cast<Eigen::Index>(ops));
    Eigen::Index col = 0;
    for_each_combination(n, u->p, [&](std::span<const int> sites) {
      for (Eigen::Index i = 0; i < dim; ++i) {
        out.lindblad(i, col) = zprod_eigenvalue(basis, static_cast<std::size_t>(i), sites);
      }
      ++col;
    });
  } else {
    const auto& c = std::get<CollectiveSymmetrizedKBody>(spec_l);
    detail::check_body_order("CollectiveSymmetrizedKBody", c.k, n);
    out.collective = true;
    out.lindblad.resize(dim, 1);
    for (Eigen::Index i = 0; i < dim; ++i) {
      out.lindblad(i, 0) = detail::symmetric_product_sum(
          n, c.k, basis.plus_count(static_cast<std::size_t>(i)), 1.0, -1.0);
    }
  }
  return out;
}

/// Coherent and dissipative rates for every index pair:
///   eps(i,j) = eps_i - eps_j,  lambda_sq(i,j) = sum_nu (lambda_i - lambda_j)^2.
struct PairRates {
  Eigen::MatrixXd eps;
  Eigen::MatrixXd lambda_sq;

  Eigen::Index dimension() const { return eps.rows(); }
};

inline PairRates pair_rates(const DiagonalOperatorSet& diag) {
  const Eigen::Index dim = diag.hamiltonian.size();
  if (diag.lindblad.rows() != dim) throw std::invalid_argument("pair_rates: dimension mismatch");
  PairRates r;
  const Eigen::VectorXd& h = diag.hamiltonian;
  r.eps = h.replicate(1, dim) - h.transpose().replicate(dim, 1);
  // sum_nu (a_i - a_j)^2 = |a_i|^2 + |a_j|^2 - 2 a_i.a_j
  const Eigen::VectorXd norms = diag.lindblad.rowwise().squaredNorm();
  r.lambda_sq = norms.replicate(1, dim) + norms.transpose().replicate(dim, 1);
  r.lambda_sq.noalias() -= 2.0 * diag.lindblad * diag.lindblad.transpose();
  r.lambda_sq.diagonal().setZero();
  return r;
}

}  // namespace mbqfi
