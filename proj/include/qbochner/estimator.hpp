#pragma once

// Sampling of the characteristic function, its Wirtinger derivatives and
// normally ordered moments from phase-tagged balanced homodyne records.
//
// Every estimate is a sample mean of a per-record kernel, so the standard
// error and the joint covariance of several estimates follow from the
// sample covariance of the kernel vectors.

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <cstddef>
#include <limits>
#include <map>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <thread>
#include <tuple>
#include <utility>
#include <vector>

#include <boost/math/distributions/chi_squared.hpp>

#include "qbochner/error.hpp"
#include "qbochner/gbm.hpp"
#include "qbochner/linalg.hpp"
#include "qbochner/specfun.hpp"
#include "qbochner/states.hpp"

namespace qbochner::estimator {

using linalg::ComplexMatrix;

struct QuadratureRecord {
  double x = 0.0;
  /// Local-oscillator phase in [0, pi).
  double phi = 0.0;

  friend bool operator==(const QuadratureRecord&, const QuadratureRecord&) = default;
};

/// Non-empty set of records with finite x and phi in [0, pi).
class QuadratureDataset {
 public:
  QuadratureDataset() = default;

  explicit QuadratureDataset(std::vector<QuadratureRecord> records)
      : records_(std::move(records)) {
    if (records_.empty()) {
      throw Error(ErrorKind::insufficient_data, "dataset must hold at least one record");
    }
    for (std::size_t i = 0; i < records_.size(); ++i) {
      const auto& r = records_[i];
      if (!std::isfinite(r.x) || !(r.phi >= 0.0 && r.phi < std::numbers::pi)) {
        throw Error(ErrorKind::configuration,
                    "record " + std::to_string(i) + " has non-finite x or phi outside [0, pi)");
      }
    }
  }

  std::size_t size() const { return records_.size(); }
  const std::vector<QuadratureRecord>& records() const { return records_; }
  const QuadratureRecord& operator[](std::size_t i) const { return records_[i]; }

  friend bool operator==(const QuadratureDataset&, const QuadratureDataset&) = default;

 private:
  std::vector<QuadratureRecord> records_;
};

/// Complex estimate with the covariance of its real and imaginary parts.
struct ComplexEstimate {
  Complex value;
  /// {var(re), cov(re, im), var(im)} of the estimate (not of a single record).
  std::array<double, 3> cov{};
  std::size_t count = 0;
  std::size_t excluded = 0;

  double std_re() const { return std::sqrt(cov[0]); }
  double std_im() const { return std::sqrt(cov[2]); }
};

/// N x N estimated matrix with the joint covariance of all 2 N^2 real
/// components. Component 2k is Re, 2k + 1 is Im of entry k = i N + j.
struct EstimatedMatrix {
  ComplexMatrix value;
  std::vector<double> covariance;
  std::size_t count = 0;
  std::size_t excluded = 0;

  std::size_t size() const { return value.size(); }
  std::size_t components() const { return 2 * size() * size(); }

  double cov(std::size_t a, std::size_t b) const { return covariance[a * components() + b]; }

  ComplexEstimate entry(std::size_t i, std::size_t j) const {
    const std::size_t k = 2 * (i * size() + j);
    return {value(i, j), {cov(k, k), cov(k, k + 1), cov(k + 1, k + 1)}, count, excluded};
  }
};

enum class CovarianceMode { full, diagonal };

struct EstimatorOptions {
  /// Worker threads; 0 picks the hardware concurrency.
  unsigned threads = 0;
  /// Fixed block size of the accumulation; results do not depend on threads.
  std::size_t block_size = 65536;
  /// Reject data whose phases fail the uniformity test.
  bool check_uniformity = true;
  int uniformity_bins = 20;
  /// Fraction of records that may be dropped for unrepresentable kernels.
  double max_excluded_fraction = 1e-3;
};

// ---------------------------------------------------------------------------
// Phase uniformity

struct UniformityDiagnostic {
  double chi2 = 0.0;
  double threshold = 0.0;
  bool pass = false;
};

/// Chi-square of the phase histogram on [0, pi) against the uniform law;
/// passes below the 99.9% quantile for bins - 1 degrees of freedom.
inline UniformityDiagnostic phase_uniformity(const QuadratureDataset& data, int bins) {
  if (bins < 2) throw Error(ErrorKind::configuration, "phase_uniformity: bins must be >= 2");
  std::vector<double> counts(static_cast<std::size_t>(bins), 0.0);
  for (const auto& r : data.records()) {
    auto b = static_cast<std::size_t>(r.phi / std::numbers::pi * bins);
    counts[std::min(b, counts.size() - 1)] += 1.0;
  }
  const double expected = static_cast<double>(data.size()) / bins;
  UniformityDiagnostic d;
  for (double c : counts) d.chi2 += (c - expected) * (c - expected) / expected;
  d.threshold = boost::math::quantile(boost::math::chi_squared(bins - 1.0), 0.999);
  d.pass = d.chi2 < d.threshold;
  return d;
}

inline void require_uniform_phases(const QuadratureDataset& data, const EstimatorOptions& opt) {
  if (!opt.check_uniformity) return;
  // too few records for a meaningful chi-square
  if (data.size() < 5u * static_cast<std::size_t>(opt.uniformity_bins)) return;
  const auto d = phase_uniformity(data, opt.uniformity_bins);
  if (!d.pass) {
    throw Error(ErrorKind::data_quality,
                "phases are not uniform on [0, pi): chi2 " + std::to_string(d.chi2) +
                    " exceeds " + std::to_string(d.threshold));
  }
}

// ---------------------------------------------------------------------------
// Pattern functions

/// D_q^r(x, gamma) =
///   sum_{k1+k2+k3=r} r! (-1)^{q+k1+k3} (q+k1)! 2^{-k3/2}
///       / [k1! k2! k3! (gamma + gamma^*)^{q+k1+1}]
///       x^{k2} exp(x gamma - gamma^2/2) H_{k3}(gamma / sqrt 2),
/// zero for q < 0 or r < 0. Pole at Re gamma = 0.
///
/// The (k2, k3) sum collapses by the Hermite addition theorem, leaving
///   exp(x gamma - gamma^2/2) sum_k C(r, k) (-1)^{q+k} (q+k)! s^{-(q+k+1)} He_{r-k}(x - gamma)
/// with s = gamma + gamma^*.
inline Complex pattern_D(int q, int r, double x, Complex gamma) {
  if (q < 0 || r < 0) return 0.0;
  const double s = 2.0 * gamma.real();
  if (s == 0.0) {
    throw Error(ErrorKind::pole, "pattern_D: pole at Re(gamma) = 0");
  }
  const Complex exponent = x * gamma - 0.5 * gamma * gamma;
  const auto he = specfun::hermite_prob_table(r, Complex(x) - gamma);

  if (q + r <= 170 && exponent.real() < 700.0) {
    Complex sum = 0.0;
    double inv = 1.0 / std::pow(s, q + 1);
    for (int k = 0; k <= r; ++k) {
      const double sign = ((q + k) % 2 == 0) ? 1.0 : -1.0;
      sum += sign * specfun::binomial(r, k) * specfun::factorial(q + k) * inv *
             he[static_cast<std::size_t>(r - k)];
      inv /= s;
    }
    const Complex v = sum * std::exp(exponent);
    if (std::isfinite(v.real()) && std::isfinite(v.imag())) return v;
  }

  // (log-magnitude, phase) assembly
  std::vector<std::pair<double, double>> terms;
  const double log_s = std::log(std::abs(s));
  for (int k = 0; k <= r; ++k) {
    const Complex h = he[static_cast<std::size_t>(r - k)];
    if (h == Complex{}) continue;
    const int power = q + k + 1;
    double angle = std::arg(h);
    if ((q + k) % 2 != 0) angle += std::numbers::pi;
    if (s < 0.0 && power % 2 != 0) angle += std::numbers::pi;
    terms.emplace_back(std::log(specfun::binomial(r, k)) + specfun::log_factorial(q + k) +
                           std::log(std::abs(h)) - power * log_s,
                       angle);
  }
  if (terms.empty()) return 0.0;
  double top = -std::numeric_limits<double>::infinity();
  for (const auto& t : terms) top = std::max(top, t.first);
  Complex scaled = 0.0;
  for (const auto& t : terms) scaled += std::polar(std::exp(t.first - top), t.second);
  if (scaled == Complex{}) return 0.0;
  const double log_mag = top + std::log(std::abs(scaled)) + exponent.real();
  if (log_mag > std::log(std::numeric_limits<double>::max())) {
    throw RangeError("pattern_D: magnitude exp(" + std::to_string(log_mag) + ") overflows",
                     log_mag);
  }
  return std::polar(std::exp(log_mag), std::arg(scaled) + exponent.imag());
}

namespace detail {

/// Coefficients of the complete homogeneous symmetric polynomial of
/// (h x (m+1), -h x (n+1)) divided by h^j, for j < count.
inline std::vector<double> confluent_weights(int m, int n, std::size_t count) {
  std::vector<double> a(count), b(count), out(count, 0.0);
  for (std::size_t i = 0; i < count; ++i) {
    a[i] = specfun::binomial(m + static_cast<int>(i), static_cast<int>(i));
    b[i] = (i % 2 == 0 ? 1.0 : -1.0) *
           specfun::binomial(n + static_cast<int>(i), static_cast<int>(i));
  }
  for (std::size_t j = 0; j < count; ++j) {
    for (std::size_t i = 0; i <= j; ++i) out[j] += a[i] * b[j - i];
  }
  return out;
}

inline const std::vector<double>& cached_confluent_weights(int m, int n) {
  static constexpr std::size_t kTerms = 256;
  // orders are bounded by the catalog limit, so the table is small
  static const auto table = [] {
    std::vector<std::vector<double>> t;
    for (int mm = 0; mm <= states::kMaxDerivativeOrder; ++mm) {
      for (int nn = 0; nn <= states::kMaxDerivativeOrder; ++nn) {
        t.push_back(confluent_weights(mm, nn, kTerms));
      }
    }
    return t;
  }();
  return table[static_cast<std::size_t>(m * (states::kMaxDerivativeOrder + 1) + n)];
}

/// Confluent divided difference f[u x (m+1), v x (n+1)] of
/// f(t) = t exp(x t - t^2/2) with u = gamma, v = -gamma^*, expanded around
/// the midpoint i Im(gamma). Stable for small |Re gamma|.
inline Complex confluent_difference(int m, int n, double x, Complex gamma) {
  const Complex c{0.0, gamma.imag()};
  const double h = gamma.real();
  const Complex y = x - c;
  const auto& w = cached_confluent_weights(m, n);
  const int p = m + n + 2;

  // g_k = He_k(y) / k!
  Complex g_prev = 1.0;  // g_0
  Complex g_cur = y;     // g_1
  int k = 1;
  auto advance = [&] {
    const Complex next = (y * g_cur - g_prev) / static_cast<double>(k + 1);
    g_prev = g_cur;
    g_cur = next;
    ++k;
  };
  // bring g_cur to index p - 1, g_prev to p - 2
  while (k < p - 1) advance();

  Complex sum = 0.0;
  double hj = 1.0;
  int quiet = 0;
  for (std::size_t j = 0; j < w.size(); ++j) {
    const Complex term = (c * g_cur + g_prev) * w[j] * hj;
    sum += term;
    if (j > 4 && std::abs(term) <= 1e-17 * std::abs(sum)) {
      if (++quiet >= 3) break;
    } else {
      quiet = 0;
    }
    hj *= h;
    advance();
  }
  const Complex exponent = x * c - 0.5 * c * c;
  return sum * std::exp(exponent);
}

}  // namespace detail

namespace detail {

/// sum_k C(r, k) (-1)^{q+k} (q+k)! s^{-(q+k+1)} He_{r-k}, the reduced
/// pattern sum without its exponential factor.
inline Complex reduced_pattern_sum(int q, int r, double s, const Complex* he) {
  static const auto fact = [] {
    std::array<double, 2 * states::kMaxDerivativeOrder + 2> f{};
    f[0] = 1.0;
    for (std::size_t i = 1; i < f.size(); ++i) f[i] = f[i - 1] * static_cast<double>(i);
    return f;
  }();
  Complex sum = 0.0;
  double inv = 1.0 / s;
  for (int i = 0; i < q; ++i) inv /= s;
  double binom = 1.0;
  for (int k = 0; k <= r; ++k) {
    const double sign = ((q + k) % 2 == 0) ? 1.0 : -1.0;
    sum += sign * binom * fact[static_cast<std::size_t>(q + k)] * inv * he[r - k];
    binom = binom * static_cast<double>(r - k) / static_cast<double>(k + 1);
    inv /= s;
  }
  return sum;
}

}  // namespace detail

namespace detail {

/// Direct-path value of the kernel bracket; falls back to the
/// log-magnitude pattern functions when the shared form overflows.
inline Complex direct_bracket(int m, int n, double x, Complex g, Complex ea, Complex eb,
                              const Complex* he_a, const Complex* he_b) {
  const double s = 2.0 * g.real();
  const Complex gc = std::conj(g);
  Complex a = g * reduced_pattern_sum(n, m, s, he_a);
  if (m > 0) a += static_cast<double>(m) * reduced_pattern_sum(n, m - 1, s, he_a);
  Complex b = gc * reduced_pattern_sum(m, n, s, he_b);
  if (n > 0) b += static_cast<double>(n) * reduced_pattern_sum(m, n - 1, s, he_b);
  const Complex fast = ea * a + eb * b;
  if (std::isfinite(fast.real()) && std::isfinite(fast.imag())) return fast;
  Complex bracket = g * pattern_D(n, m, x, g) + gc * pattern_D(m, n, -x, gc);
  if (m > 0) bracket += static_cast<double>(m) * pattern_D(n, m - 1, x, g);
  if (n > 0) bracket += static_cast<double>(n) * pattern_D(m, n - 1, -x, gc);
  return bracket;
}

/// Evaluates the derivative kernel for several orders at one point and one
/// record, sharing the rotation, exponentials and Hermite tables.
inline void derivative_kernels(std::span<const DerivativeOrder> orders, Complex beta, double x,
                               double phi, std::span<Complex> out) {
  constexpr int kMax = states::kMaxDerivativeOrder;
  int max_m = 0;
  int max_n = 0;
  for (const auto& o : orders) {
    states::require_order(o);
    max_m = std::max(max_m, o.m);
    max_n = std::max(max_n, o.n);
  }
  const Complex rot = std::polar(1.0, phi);
  const Complex g = beta * rot;

  // rot^k for k = -kMax..kMax
  std::array<Complex, 2 * kMax + 1> powers{};
  powers[kMax] = 1.0;
  for (int k = 1; k <= std::max(max_m, max_n); ++k) {
    powers[kMax + k] = powers[kMax + k - 1] * rot;
    powers[kMax - k] = std::conj(powers[kMax + k]);
  }

  if (std::abs(g.real()) < 0.5) {
    // series around c = i Im(g); G[k] = He_k(y) / k!, filled on demand
    const Complex c{0.0, g.imag()};
    const double h = g.real();
    const Complex y = x - c;
    const Complex scale = std::exp(x * c - 0.5 * c * c);
    std::array<Complex, 2 * kMax + 2 + 256> G;
    G[0] = 1.0;
    G[1] = y;
    std::size_t filled = 2;
    for (std::size_t i = 0; i < orders.size(); ++i) {
      const int m = orders[i].m;
      const int n = orders[i].n;
      const auto& w = cached_confluent_weights(m, n);
      const std::size_t base = static_cast<std::size_t>(m + n);  // p - 2
      Complex sum = 0.0;
      double hj = 1.0;
      int quiet = 0;
      for (std::size_t j = 0; j < w.size(); ++j) {
        while (filled <= base + j + 1) {
          const std::size_t k = filled - 1;
          G[filled] = (y * G[k] - G[k - 1]) / static_cast<double>(k + 1);
          ++filled;
        }
        const Complex term = (c * G[base + j + 1] + G[base + j]) * (w[j] * hj);
        sum += term;
        if (j > 4 && std::norm(term) <= 1e-34 * std::norm(sum)) {
          if (++quiet >= 3) break;
        } else {
          quiet = 0;
        }
        hj *= h;
      }
      const double sign = (n % 2 == 0) ? 1.0 : -1.0;
      out[i] = powers[kMax + m - n] * sign * specfun::factorial(m) * specfun::factorial(n) *
               (sum * scale);
    }
    return;
  }

  const Complex gc = std::conj(g);
  std::array<Complex, kMax + 1> he_a{}, he_b{};
  auto fill = [](std::array<Complex, kMax + 1>& t, int order, Complex z) {
    t[0] = 1.0;
    if (order >= 1) t[1] = z;
    for (int k = 1; k < order; ++k) t[k + 1] = z * t[k] - static_cast<double>(k) * t[k - 1];
  };
  fill(he_a, max_m, x - g);
  fill(he_b, max_n, -x - gc);
  const Complex ea = std::exp(x * g - 0.5 * g * g);
  const Complex eb = std::conj(std::exp(-x * g - 0.5 * g * g));
  for (std::size_t i = 0; i < orders.size(); ++i) {
    const int m = orders[i].m;
    const int n = orders[i].n;
    out[i] = powers[kMax + m - n] *
             direct_bracket(m, n, x, g, ea, eb, he_a.data(), he_b.data());
  }
}

}  // namespace detail

/// Per-record kernel whose mean over uniformly phased records estimates
/// d^m/dbeta d^n/dbeta* Phi(beta):
///   e^{i(m-n)phi} [ m D_n^{m-1}(x, g) + g D_n^m(x, g)
///                 + n D_m^{n-1}(-x, g^*) + g^* D_m^n(-x, g^*) ],  g = beta e^{i phi}.
/// Near Re g = 0 the bracket is evaluated as the equivalent confluent
/// divided difference, which has no pole.
inline Complex derivative_kernel(DerivativeOrder order, Complex beta, double x, double phi) {
  Complex out;
  detail::derivative_kernels(std::span(&order, 1), beta, x, phi, std::span(&out, 1));
  return out;
}

/// Per-record kernel of <a^dag^k a^l>:
///   e^{i(k-l)phi} k! l! / (sqrt(2^{k+l}) (k+l)!) H_{k+l}(x / sqrt 2).
inline Complex moment_kernel(int k, int l, double x, double phi) {
  if (k < 0 || l < 0) throw Error(ErrorKind::domain, "moment_kernel: negative order");
  const int s = k + l;
  const double coef = specfun::factorial(k) * specfun::factorial(l) /
                      (std::pow(2.0, 0.5 * s) * specfun::factorial(s));
  return std::polar(1.0, (k - l) * phi) * coef *
         specfun::hermite(s, x / std::numbers::sqrt2);
}

// ---------------------------------------------------------------------------
// Accumulation

namespace detail {

/// Neumaier-compensated running sum.
struct CompensatedSum {
  double sum = 0.0;
  double carry = 0.0;

  void add(double v) {
    const double t = sum + v;
    if (std::abs(sum) >= std::abs(v)) {
      carry += (sum - t) + v;
    } else {
      carry += (v - t) + sum;
    }
    sum = t;
  }
  double value() const { return sum + carry; }
};

/// Count, mean and centered second-moment matrix of d-dimensional samples.
struct Moments {
  std::size_t count = 0;
  std::vector<double> mean;
  std::vector<double> m2;  // d x d

  explicit Moments(std::size_t d = 0) : mean(d, 0.0), m2(d * d, 0.0) {}

  void merge(const Moments& o) {
    if (o.count == 0) return;
    if (count == 0) {
      *this = o;
      return;
    }
    const std::size_t d = mean.size();
    const double na = static_cast<double>(count);
    const double nb = static_cast<double>(o.count);
    const double n = na + nb;
    std::vector<double> delta(d);
    for (std::size_t a = 0; a < d; ++a) delta[a] = o.mean[a] - mean[a];
    for (std::size_t a = 0; a < d; ++a) {
      for (std::size_t b = 0; b < d; ++b) {
        m2[a * d + b] += o.m2[a * d + b] + delta[a] * delta[b] * na * nb / n;
      }
    }
    for (std::size_t a = 0; a < d; ++a) mean[a] += delta[a] * nb / n;
    count += o.count;
  }
};

struct BlockResult {
  Moments moments;
  std::size_t excluded = 0;
};

/// Shifted, compensated sums over one block of records.
template <class Kernel>
BlockResult accumulate_block(std::span<const QuadratureRecord> block, std::size_t d,
                             const Kernel& kernel, bool joint) {
  BlockResult out{Moments(d), 0};
  std::vector<double> v(d), shift(d), delta(d);
  std::vector<CompensatedSum> s1(d), s2(d * d);
  bool have_shift = false;
  std::size_t n = 0;
  for (const auto& rec : block) {
    bool ok = false;
    try {
      ok = kernel(rec, std::span<double>(v));
    } catch (const RangeError&) {
      ok = false;
    }
    if (ok) {
      for (double c : v) {
        if (!std::isfinite(c)) {
          ok = false;
          break;
        }
      }
    }
    if (!ok) {
      ++out.excluded;
      continue;
    }
    if (!have_shift) {
      shift = v;
      have_shift = true;
    }
    for (std::size_t a = 0; a < d; ++a) delta[a] = v[a] - shift[a];
    for (std::size_t a = 0; a < d; ++a) {
      s1[a].add(delta[a]);
      const std::size_t last = joint ? d : (a | 1) + 1;
      for (std::size_t b = a; b < last; ++b) s2[a * d + b].add(delta[a] * delta[b]);
    }
    ++n;
  }
  out.moments.count = n;
  if (n == 0) return out;
  const double nn = static_cast<double>(n);
  for (std::size_t a = 0; a < d; ++a) out.moments.mean[a] = shift[a] + s1[a].value() / nn;
  for (std::size_t a = 0; a < d; ++a) {
    const std::size_t last = joint ? d : (a | 1) + 1;
    for (std::size_t b = a; b < last; ++b) {
      const double c = s2[a * d + b].value() - s1[a].value() * s1[b].value() / nn;
      out.moments.m2[a * d + b] = c;
      out.moments.m2[b * d + a] = c;
    }
  }
  return out;
}

inline unsigned resolve_threads(unsigned requested) {
  if (requested != 0) return requested;
  return std::max(1u, std::thread::hardware_concurrency());
}

/// Mean and covariance of the mean of kernel vectors over all records.
/// Block partition and merge order are fixed. Without `joint`, only the
/// 2 x 2 blocks of consecutive (Re, Im) pairs are accumulated.
template <class Kernel>
BlockResult accumulate(const QuadratureDataset& data, std::size_t d, const Kernel& kernel,
                       const EstimatorOptions& opt, bool joint = true) {
  const auto& recs = data.records();
  const std::size_t bs = std::max<std::size_t>(1, opt.block_size);
  const std::size_t nblocks = (recs.size() + bs - 1) / bs;
  std::vector<BlockResult> blocks(nblocks);
  auto run = [&](std::size_t first, std::size_t stride) {
    for (std::size_t b = first; b < nblocks; b += stride) {
      const std::size_t lo = b * bs;
      const std::size_t hi = std::min(recs.size(), lo + bs);
      blocks[b] = accumulate_block(std::span(recs).subspan(lo, hi - lo), d, kernel, joint);
    }
  };
  const unsigned threads =
      std::min<unsigned>(resolve_threads(opt.threads), static_cast<unsigned>(nblocks));
  if (threads <= 1) {
    run(0, 1);
  } else {
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errors(threads);
    for (unsigned t = 0; t < threads; ++t) {
      pool.emplace_back([&, t] {
        try {
          run(t, threads);
        } catch (...) {
          errors[t] = std::current_exception();
        }
      });
    }
    for (auto& th : pool) th.join();
    for (auto& e : errors) {
      if (e) std::rethrow_exception(e);
    }
  }
  BlockResult total{Moments(d), 0};
  for (const auto& b : blocks) {
    total.moments.merge(b.moments);
    total.excluded += b.excluded;
  }
  if (!joint) {
    for (std::size_t a = 0; a < d; ++a) {
      for (std::size_t b = 0; b < d; ++b) {
        if (a / 2 != b / 2) total.moments.m2[a * d + b] = 0.0;
      }
    }
  }
  const double limit = opt.max_excluded_fraction * static_cast<double>(recs.size());
  if (static_cast<double>(total.excluded) > limit) {
    throw Error(ErrorKind::data_quality,
                std::to_string(total.excluded) + " of " + std::to_string(recs.size()) +
                    " records have unrepresentable kernels");
  }
  if (total.moments.count == 0) {
    throw Error(ErrorKind::insufficient_data, "no usable records");
  }
  return total;
}

/// Covariance of the mean: M2 / ((n - 1) n), zero for a single record.
inline std::vector<double> covariance_of_mean(const Moments& m) {
  std::vector<double> c(m.m2.size(), 0.0);
  if (m.count < 2) return c;
  const double n = static_cast<double>(m.count);
  for (std::size_t i = 0; i < c.size(); ++i) c[i] = m.m2[i] / ((n - 1.0) * n);
  return c;
}

inline ComplexEstimate to_estimate(const BlockResult& r) {
  const auto c = covariance_of_mean(r.moments);
  return {{r.moments.mean[0], r.moments.mean[1]}, {c[0], c[1], c[3]},
          r.moments.count, r.excluded};
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Estimators

/// Phi(beta) ~ e^{|beta|^2/2} mean(e^{i |beta| x_j}) over records with phase
/// within `window` of pi/2 - arg(beta) (mod pi). Records at phi + k pi enter
/// with x -> (-1)^k x.
inline ComplexEstimate sample_cf_direct(const QuadratureDataset& data, Complex beta,
                                        double window = 0.01) {
  const double r = std::abs(beta);
  if (r == 0.0) return {1.0, {0.0, 0.0, 0.0}, data.size(), 0};
  const double target = 0.5 * std::numbers::pi - std::arg(beta);
  const double scale = std::exp(0.5 * r * r);
  detail::Moments m(2);
  std::vector<double> v(2);
  std::size_t n = 0;
  detail::CompensatedSum s_re, s_im, s_rr, s_ri, s_ii;
  for (const auto& rec : data.records()) {
    const double delta = rec.phi - target;
    const double k = std::round(delta / std::numbers::pi);
    const double residual = delta - k * std::numbers::pi;
    if (std::abs(residual) > window) continue;
    const double x = (static_cast<long long>(k) % 2 == 0) ? rec.x : -rec.x;
    const double re = scale * std::cos(r * x);
    const double im = scale * std::sin(r * x);
    s_re.add(re);
    s_im.add(im);
    s_rr.add(re * re);
    s_ri.add(re * im);
    s_ii.add(im * im);
    ++n;
  }
  if (n == 0) {
    throw Error(ErrorKind::insufficient_data,
                "sample_cf_direct: no records within the phase window");
  }
  const double nn = static_cast<double>(n);
  const Complex mean{s_re.value() / nn, s_im.value() / nn};
  ComplexEstimate e{mean, {0.0, 0.0, 0.0}, n, 0};
  if (n > 1) {
    const double f = 1.0 / ((nn - 1.0) * nn);
    e.cov[0] = std::max(0.0, (s_rr.value() - nn * mean.real() * mean.real()) * f);
    e.cov[1] = (s_ri.value() - nn * mean.real() * mean.imag()) * f;
    e.cov[2] = std::max(0.0, (s_ii.value() - nn * mean.imag() * mean.imag()) * f);
  }
  return e;
}

inline ComplexEstimate sample_cf_derivative(const QuadratureDataset& data, DerivativeOrder order,
                                            Complex beta, const EstimatorOptions& opt = {}) {
  states::require_order(order);
  require_uniform_phases(data, opt);
  auto kernel = [&](const QuadratureRecord& rec, std::span<double> out) {
    const Complex k = derivative_kernel(order, beta, rec.x, rec.phi);
    out[0] = k.real();
    out[1] = k.imag();
    return true;
  };
  return detail::to_estimate(detail::accumulate(data, 2, kernel, opt));
}

/// Several derivative orders at one point from a single pass over the
/// records. Each estimate equals the corresponding sample_cf_derivative.
inline std::vector<ComplexEstimate> sample_cf_derivatives(const QuadratureDataset& data,
                                                          std::span<const DerivativeOrder> orders,
                                                          Complex beta,
                                                          const EstimatorOptions& opt = {}) {
  for (const auto& o : orders) states::require_order(o);
  require_uniform_phases(data, opt);
  const std::size_t k = orders.size();
  if (k == 0) return {};
  auto kernel = [&](const QuadratureRecord& rec, std::span<double> out) {
    thread_local std::vector<Complex> values;
    values.resize(k);
    detail::derivative_kernels(orders, beta, rec.x, rec.phi, values);
    for (std::size_t i = 0; i < k; ++i) {
      out[2 * i] = values[i].real();
      out[2 * i + 1] = values[i].imag();
    }
    return true;
  };
  const auto acc = detail::accumulate(data, 2 * k, kernel, opt, false);
  const auto c = detail::covariance_of_mean(acc.moments);
  const std::size_t d = 2 * k;
  std::vector<ComplexEstimate> result;
  for (std::size_t i = 0; i < k; ++i) {
    const std::size_t a = 2 * i;
    result.push_back({{acc.moments.mean[a], acc.moments.mean[a + 1]},
                      {c[a * d + a], c[a * d + a + 1], c[(a + 1) * d + a + 1]},
                      acc.moments.count,
                      acc.excluded});
  }
  return result;
}

inline ComplexEstimate sample_moment(const QuadratureDataset& data, int k, int l,
                                     const EstimatorOptions& opt = {}) {
  if (k < 0 || l < 0) throw Error(ErrorKind::domain, "sample_moment: negative order");
  require_uniform_phases(data, opt);
  auto kernel = [&](const QuadratureRecord& rec, std::span<double> out) {
    const Complex v = moment_kernel(k, l, rec.x, rec.phi);
    out[0] = v.real();
    out[1] = v.imag();
    return true;
  };
  return detail::to_estimate(detail::accumulate(data, 2, kernel, opt));
}

/// All entries of the GBM estimated from the same records in one pass,
/// with their joint covariance.
inline EstimatedMatrix estimate_gbm(const QuadratureDataset& data, const gbm::GbmSpec& spec,
                                    const EstimatorOptions& opt = {}) {
  spec.validate();
  require_uniform_phases(data, opt);
  const std::size_t n = spec.size();
  const std::size_t d = 2 * n * n;

  // distinct (order, point) pairs are evaluated once per record
  // grouped by point so each group shares one batched kernel call
  struct Group {
    Complex point;
    std::vector<DerivativeOrder> orders;
    std::size_t offset = 0;
  };
  std::vector<Group> groups;
  std::vector<std::pair<std::size_t, std::size_t>> where(n * n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      const DerivativeOrder ord = spec.order(i, j);
      states::require_order(ord);
      const Complex pt = spec.point(i, j);
      std::size_t g = 0;
      while (g < groups.size() && groups[g].point != pt) ++g;
      if (g == groups.size()) groups.push_back({pt, {}, 0});
      auto& os = groups[g].orders;
      std::size_t o = 0;
      while (o < os.size() && !(os[o] == ord)) ++o;
      if (o == os.size()) os.push_back(ord);
      where[i * n + j] = {g, o};
    }
  }
  std::size_t total_slots = 0;
  for (auto& g : groups) {
    g.offset = total_slots;
    total_slots += g.orders.size();
  }
  std::vector<std::size_t> slot_of(n * n);
  for (std::size_t k = 0; k < n * n; ++k) {
    slot_of[k] = groups[where[k].first].offset + where[k].second;
  }

  auto kernel = [&](const QuadratureRecord& rec, std::span<double> out) {
    thread_local std::vector<Complex> values;
    values.resize(total_slots);
    for (const auto& g : groups) {
      detail::derivative_kernels(g.orders, g.point, rec.x, rec.phi,
                                 std::span(values).subspan(g.offset, g.orders.size()));
    }
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) {
        const std::size_t k = i * n + j;
        const Complex v = spec.sign(i) * values[slot_of[k]];
        out[2 * k] = v.real();
        out[2 * k + 1] = v.imag();
      }
    }
    return true;
  };
  const auto acc = detail::accumulate(data, d, kernel, opt);

  EstimatedMatrix em;
  em.value = ComplexMatrix(n);
  for (std::size_t k = 0; k < n * n; ++k) {
    em.value(k / n, k % n) = {acc.moments.mean[2 * k], acc.moments.mean[2 * k + 1]};
  }
  em.covariance = detail::covariance_of_mean(acc.moments);
  em.count = acc.moments.count;
  em.excluded = acc.excluded;

  // entry (j, i) must match conj(entry (i, j)) within the combined error
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i; j < n; ++j) {
      const auto a = em.entry(i, j);
      const auto b = em.entry(j, i);
      const Complex diff = a.value - std::conj(b.value);
      const double tol_re = 5.0 * std::sqrt(a.cov[0] + b.cov[0]) + 1e-9 * (1.0 + std::abs(a.value));
      const double tol_im = 5.0 * std::sqrt(a.cov[2] + b.cov[2]) + 1e-9 * (1.0 + std::abs(a.value));
      if (std::abs(diff.real()) > tol_re || std::abs(diff.imag()) > tol_im) {
        throw Error(ErrorKind::numerical_inconsistency,
                    "estimated GBM is not Hermitian at (" + std::to_string(i) + ", " +
                        std::to_string(j) + ")");
      }
    }
  }
  return em;
}

/// Determinant of the estimated matrix with first-order error propagation.
/// d det / d a_ij is the cofactor C_ij, contracted against the entry
/// covariance (all cross terms in full mode, variances only in diagonal mode).
inline gbm::CriterionResult det_with_error(const EstimatedMatrix& em,
                                           CovarianceMode mode = CovarianceMode::full) {
  const std::size_t n = em.size();
  const double det = linalg::determinant(em.value).real();
  const auto cof = linalg::cofactors(em.value);
  const std::size_t d = em.components();
  std::vector<double> grad(d);
  for (std::size_t k = 0; k < n * n; ++k) {
    const Complex c = cof(k / n, k % n);
    grad[2 * k] = c.real();       // d Re det / d Re a
    grad[2 * k + 1] = -c.imag();  // d Re det / d Im a
  }
  double var = 0.0;
  for (std::size_t a = 0; a < d; ++a) {
    if (mode == CovarianceMode::diagonal) {
      var += grad[a] * grad[a] * em.cov(a, a);
      continue;
    }
    for (std::size_t b = 0; b < d; ++b) var += grad[a] * em.cov(a, b) * grad[b];
  }
  return gbm::CriterionResult::statistical(det, std::sqrt(std::max(var, 0.0)));
}

/// Dataset-backed source. Works as a CfProvider (estimate values only) and
/// as a scan criterion with propagated errors.
class DatasetSource {
 public:
  DatasetSource(const QuadratureDataset& data, EstimatorOptions opt = {},
                CovarianceMode mode = CovarianceMode::full)
      : data_(&data), opt_(opt), mode_(mode) {
    require_uniform_phases(data, opt_);
    opt_.check_uniformity = false;
  }

  Complex cf(Complex beta) const { return derivative({0, 0}, beta); }

  Complex derivative(DerivativeOrder order, Complex beta) const {
    return sample_cf_derivative(*data_, order, beta, opt_).value;
  }

  gbm::CriterionResult operator()(const gbm::GbmSpec& spec) const {
    return det_with_error(estimate_gbm(*data_, spec, opt_), mode_);
  }

 private:
  const QuadratureDataset* data_;
  EstimatorOptions opt_;
  CovarianceMode mode_;
};

}  // namespace qbochner::estimator
