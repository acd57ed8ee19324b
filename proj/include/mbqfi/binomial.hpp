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

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>

namespace mbqfi {

using BigCount = unsigned __int128;

/// Largest n for which every C(n, k) fits in 128 bits.
inline constexpr long kExactBinomialLimit = 120;

/// C(n, k) in exact 128-bit arithmetic, or nullopt on overflow.
/// C(n, k) = 0 for k < 0 or k > n.
inline std::optional<BigCount> checked_binomial(long n, long k) {
  if (n < 0) throw std::invalid_argument("binomial: negative n");
  if (k < 0 || k > n) return BigCount{0};
  k = std::min(k, n - k);
  BigCount c = 1;
  for (long i = 1; i <= k; ++i) {
    BigCount next;
    // c * (n - k + i) is divisible by i at every step.
    if (__builtin_mul_overflow(c, static_cast<BigCount>(n - k + i), &next)) {
      return std::nullopt;
    }
    c = next / static_cast<BigCount>(i);
  }
  return c;
}

inline BigCount binomial_exact(long n, long k) {
  auto c = checked_binomial(n, k);
  if (!c) {
    throw std::overflow_error("C(" + std::to_string(n) + ", " +
                              std::to_string(k) + ") overflows 128 bits");
  }
  return *c;
}

/// C(n, k) as a double. Exact integers up to n = 120 (rounded once);
/// beyond that a long-double product, and log-gamma for very wide k.
inline double binomial(long n, long k) {
  if (n < 0) throw std::invalid_argument("binomial: negative n");
  if (k < 0 || k > n) return 0.0;
  if (n <= kExactBinomialLimit) {
    return static_cast<double>(binomial_exact(n, k));
  }
  k = std::min(k, n - k);
  if (k <= 100000) {
    long double c = 1.0L;
    for (long i = 1; i <= k; ++i) {
      c = c * static_cast<long double>(n - k + i) / static_cast<long double>(i);
    }
    return static_cast<double>(c);
  }
  return static_cast<double>(std::exp(std::lgamma(static_cast<long double>(n) + 1) -
                                      std::lgamma(static_cast<long double>(k) + 1) -
                                      std::lgamma(static_cast<long double>(n - k) + 1)));
}

inline double log_binomial(long n, long k) {
  if (k < 0 || k > n) return -INFINITY;
  return static_cast<double>(std::lgamma(static_cast<long double>(n) + 1) -
                             std::lgamma(static_cast<long double>(k) + 1) -
                             std::lgamma(static_cast<long double>(n - k) + 1));
}

inline std::string to_string(BigCount v) {
  if (v == 0) return "0";
  std::string s;
  while (v > 0) {
    s.push_back(static_cast<char>('0' + static_cast<int>(v % 10)));
    v /= 10;
  }
  std::reverse(s.begin(), s.end());
  return s;
}

}  // namespace mbqfi
