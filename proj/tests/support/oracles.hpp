#pragma once

// Reference implementations used only by the tests. None of them call into
// the library's numerical paths.

#include <cmath>
#include <complex>
#include <functional>
#include <vector>

namespace oracle {

using Complex = std::complex<double>;

inline double fact(int n) {
  double r = 1.0;
  for (int i = 2; i <= n; ++i) r *= i;
  return r;
}

inline double choose(int n, int k) { return fact(n) / (fact(k) * fact(n - k)); }

/// H_n(z) = n! sum_m (-1)^m (2z)^{n-2m} / (m! (n-2m)!)
inline Complex hermite(int n, Complex z) {
  Complex s = 0.0;
  for (int m = 0; 2 * m <= n; ++m) {
    s += (m % 2 ? -1.0 : 1.0) * std::pow(2.0 * z, n - 2 * m) / (fact(m) * fact(n - 2 * m));
  }
  return fact(n) * s;
}

/// L_n(x) = sum_j (-1)^j C(n, j) x^j / j!
inline double laguerre(int n, double x) {
  double s = 0.0;
  for (int j = 0; j <= n; ++j) s += (j % 2 ? -1.0 : 1.0) * choose(n, j) * std::pow(x, j) / fact(j);
  return s;
}

/// Fornberg weights for the k-th derivative on the integer nodes -p..p.
inline std::vector<double> stencil(int k, int p) {
  const int n = 2 * p + 1;
  std::vector<double> x(n);
  for (int i = 0; i < n; ++i) x[i] = i - p;
  std::vector<std::vector<double>> c(n, std::vector<double>(k + 1, 0.0));
  double c1 = 1.0, c4 = x[0];
  c[0][0] = 1.0;
  for (int i = 1; i < n; ++i) {
    const int mn = std::min(i, k);
    double c2 = 1.0;
    const double c5 = c4;
    c4 = x[i];
    for (int j = 0; j < i; ++j) {
      const double c3 = x[i] - x[j];
      c2 *= c3;
      if (j == i - 1) {
        for (int s = mn; s >= 1; --s) c[i][s] = c1 * (s * c[i - 1][s - 1] - c5 * c[i - 1][s]) / c2;
        c[i][0] = -c1 * c5 * c[i - 1][0] / c2;
      }
      for (int s = mn; s >= 1; --s) c[j][s] = (c4 * c[j][s] - s * c[j][s - 1]) / c3;
      c[j][0] = c4 * c[j][0] / c3;
    }
    c1 = c2;
  }
  std::vector<double> w(n);
  for (int i = 0; i < n; ++i) w[i] = c[i][k];
  return w;
}

/// d^a/dx^a d^b/dy^b f(x + i y) by tensor-product central stencils of
/// accuracy order 6 (before
/// extrapolation).
inline Complex partial(const std::function<Complex(Complex)>& f, int a, int b, Complex at,
                       double h) {
  const int pa = a == 0 ? 0 : (a + 1) / 2 + 2;
  const int pb = b == 0 ? 0 : (b + 1) / 2 + 2;
  const auto wa = stencil(a, pa);
  const auto wb = stencil(b, pb);
  Complex s = 0.0;
  for (int i = -pa; i <= pa; ++i) {
    for (int j = -pb; j <= pb; ++j) {
      const double w = wa[i + pa] * wb[j + pb];
      if (w != 0.0) s += w * f(at + Complex(i * h, j * h));
    }
  }
  return s / std::pow(h, a + b);
}

/// Wirtinger derivative d^m/dbeta^m d^n/dbeta*^n via
/// 2^{-(m+n)} (d_x - i d_y)^m (d_x + i d_y)^n expanded into mixed partials.
inline Complex wirtinger(const std::function<Complex(Complex)>& f, int m, int n, Complex at) {
  const int k = m + n;
  if (k == 0) return f(at);
  const double h = std::pow(2.2e-16, 1.0 / (k + 8));
  // coefficients of d_x^a d_y^b
  std::vector<Complex> poly{1.0};
  auto mul = [&](Complex cy) {
    std::vector<Complex> out(poly.size() + 1, 0.0);
    for (std::size_t b = 0; b < poly.size(); ++b) {
      out[b] += poly[b];           // times d_x
      out[b + 1] += cy * poly[b];  // times cy d_y
    }
    poly = out;
  };
  for (int i = 0; i < m; ++i) mul({0.0, -1.0});
  for (int i = 0; i < n; ++i) mul({0.0, 1.0});
  auto combine = [&](double step) {
    Complex s = 0.0;
    for (int b = 0; b <= k; ++b) {
      if (poly[b] != 0.0) s += poly[b] * partial(f, k - b, b, at, step);
    }
    return s / std::pow(2.0, k);
  };
  // one Richardson step on the sixth-order stencils
  return (64.0 * combine(0.5 * h) - combine(h)) / 63.0;
}

/// Squeezed-vacuum CF from the rotated-frame variances.
inline Complex squeezed_cf(double vmin, double vmax, double theta, Complex beta) {
  const Complex r = beta * std::polar(1.0, theta);
  const double v = r.real(), u = r.imag();
  return std::exp(0.5 * std::norm(beta) - 0.5 * (vmax * u * u + vmin * v * v));
}

/// Fock-state moments <a^dag^k a^l> = delta_kl n! / (n-k)!.
inline double fock_moment(int n, int k, int l) {
  if (k != l || k > n) return 0.0;
  return fact(n) / fact(n - k);
}

/// Upper-tail quantile of the standard normal: crude bisection on erfc.
inline double normal_quantile(double p) {
  double lo = -10.0, hi = 10.0;
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    (0.5 * std::erfc(-mid / std::sqrt(2.0)) < p ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

}  // namespace oracle

namespace oracle {

/// Quadrature density p(x | phi) of x(phi) = e^{i phi} a + e^{-i phi} a^dag.
inline double gaussian_density(double x, double mean, double var) {
  return std::exp(-0.5 * (x - mean) * (x - mean) / var) / std::sqrt(2.0 * M_PI * var);
}

inline double fock_density(int n, double x) {
  const double h = hermite(n, x / std::sqrt(2.0)).real();
  return std::exp(-0.5 * x * x) / std::sqrt(2.0 * M_PI) * h * h / (std::pow(2.0, n) * fact(n));
}

inline double squeezed_variance(double vmin, double vmax, double theta, double phi) {
  const double c = std::cos(phi - theta), s = std::sin(phi - theta);
  return vmax * c * c + vmin * s * s;
}

}  // namespace oracle
