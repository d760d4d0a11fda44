#pragma once

// Orthogonal polynomials and combinatorics used by the characteristic
// functions and the homodyne pattern functions.

#include <array>
#include <cmath>
#include <complex>
#include <cstdint>
#include <string>
#include <vector>

#include "qbochner/error.hpp"

namespace qbochner::specfun {

namespace detail {

inline bool is_finite(double v) { return std::isfinite(v); }
inline bool is_finite(const Complex& v) {
  return std::isfinite(v.real()) && std::isfinite(v.imag());
}
inline double magnitude(double v) { return std::abs(v); }
inline double magnitude(const Complex& v) { return std::abs(v); }

template <class T>
void require_finite(const T& v, const char* name, int n) {
  if (!is_finite(v)) {
    throw RangeError(std::string(name) + "(" + std::to_string(n) +
                         ") is not representable",
                     HUGE_VAL);
  }
}

inline void require_order(int n, const char* name) {
  if (n < 0) {
    throw Error(ErrorKind::domain,
                std::string(name) + ": negative order " + std::to_string(n));
  }
}

}  // namespace detail

/// Physicists' Hermite polynomial H_n(z), three-term recurrence.
template <class T>
T hermite(int n, T z) {
  detail::require_order(n, "hermite");
  T prev{1.0};
  if (n == 0) return prev;
  T cur = T{2.0} * z;
  for (int k = 1; k < n; ++k) {
    T next = T{2.0} * z * cur - T{2.0 * k} * prev;
    prev = cur;
    cur = next;
  }
  detail::require_finite(cur, "hermite", n);
  return cur;
}

/// H_0(z) .. H_nmax(z) in one sweep.
template <class T>
std::vector<T> hermite_table(int nmax, T z) {
  detail::require_order(nmax, "hermite_table");
  std::vector<T> h(static_cast<std::size_t>(nmax) + 1);
  h[0] = T{1.0};
  if (nmax >= 1) h[1] = T{2.0} * z;
  for (int k = 1; k < nmax; ++k) {
    h[k + 1] = T{2.0} * z * h[k] - T{2.0 * k} * h[k - 1];
  }
  detail::require_finite(h[nmax], "hermite_table", nmax);
  return h;
}

/// Probabilists' Hermite polynomials He_0(z) .. He_nmax(z).
/// He_n(x) = 2^{-n/2} H_n(x/sqrt 2).
template <class T>
std::vector<T> hermite_prob_table(int nmax, T z) {
  detail::require_order(nmax, "hermite_prob_table");
  std::vector<T> h(static_cast<std::size_t>(nmax) + 1);
  h[0] = T{1.0};
  if (nmax >= 1) h[1] = z;
  for (int k = 1; k < nmax; ++k) {
    h[k + 1] = z * h[k] - T{static_cast<double>(k)} * h[k - 1];
  }
  detail::require_finite(h[nmax], "hermite_prob_table", nmax);
  return h;
}

/// Laguerre polynomial L_n(z) (alpha = 0).
inline double laguerre(int n, double z) {
  detail::require_order(n, "laguerre");
  double prev = 1.0;
  if (n == 0) return prev;
  double cur = 1.0 - z;
  for (int k = 1; k < n; ++k) {
    double next = ((2.0 * k + 1.0 - z) * cur - k * prev) / (k + 1.0);
    prev = cur;
    cur = next;
  }
  detail::require_finite(cur, "laguerre", n);
  return cur;
}

/// Power-series coefficients c_j of L_n(z) = sum_j c_j z^j.
inline std::vector<double> laguerre_coefficients(int n) {
  detail::require_order(n, "laguerre_coefficients");
  std::vector<double> c(static_cast<std::size_t>(n) + 1);
  // c_j = (-1)^j C(n, j) / j!, built incrementally.
  c[0] = 1.0;
  for (int j = 1; j <= n; ++j) {
    c[j] = -c[j - 1] * static_cast<double>(n - j + 1) /
           (static_cast<double>(j) * static_cast<double>(j));
  }
  return c;
}

inline double log_factorial(int n) {
  detail::require_order(n, "log_factorial");
  return std::lgamma(static_cast<double>(n) + 1.0);
}

/// n!; exact through 20, exp(lgamma) beyond.
inline double factorial(int n) {
  detail::require_order(n, "factorial");
  if (n <= 20) {
    std::uint64_t f = 1;
    for (int k = 2; k <= n; ++k) f *= static_cast<std::uint64_t>(k);
    return static_cast<double>(f);
  }
  if (n > 170) {
    throw RangeError("factorial(" + std::to_string(n) + ") overflows",
                     log_factorial(n));
  }
  return std::exp(log_factorial(n));
}

inline double binomial(int n, int k) {
  detail::require_order(n, "binomial");
  if (k < 0 || k > n) return 0.0;
  k = std::min(k, n - k);
  double b = 1.0;
  for (int i = 1; i <= k; ++i) {
    b = b * static_cast<double>(n - k + i) / static_cast<double>(i);
  }
  return std::round(b);
}

/// r! / (k1! k2! k3!) with k1 + k2 + k3 = r.
inline double multinomial(int r, int k1, int k2, int k3) {
  if (r < 0 || k1 < 0 || k2 < 0 || k3 < 0) {
    throw Error(ErrorKind::domain, "multinomial: negative argument");
  }
  if (k1 + k2 + k3 != r) {
    throw Error(ErrorKind::domain, "multinomial: parts do not sum to r");
  }
  if (r <= 20) {
    // binomial products stay exact in this range
    return binomial(r, k1) * binomial(r - k1, k2);
  }
  double lg = log_factorial(r) - log_factorial(k1) - log_factorial(k2) -
              log_factorial(k3);
  if (lg > std::log(1.79e308)) {
    throw RangeError("multinomial overflows", lg);
  }
  return std::exp(lg);
}

struct Composition3 {
  int k1 = 0;
  int k2 = 0;
  int k3 = 0;

  friend bool operator==(const Composition3&, const Composition3&) = default;
};

/// All (k1, k2, k3) >= 0 with k1 + k2 + k3 = r, lexicographic order.
inline std::vector<Composition3> compositions3(int r) {
  detail::require_order(r, "compositions3");
  std::vector<Composition3> out;
  out.reserve(static_cast<std::size_t>((r + 1) * (r + 2) / 2));
  for (int k1 = 0; k1 <= r; ++k1) {
    for (int k2 = 0; k2 <= r - k1; ++k2) {
      out.push_back({k1, k2, r - k1 - k2});
    }
  }
  return out;
}

}  // namespace qbochner::specfun
