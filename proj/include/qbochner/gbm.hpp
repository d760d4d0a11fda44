#pragma once

// Generalized Bochner matrices (GBM)
//
//   M_ij = (-1)^{n_i + m_i} d^{n_i + m_j}/dbeta d^{n_j + m_i}/dbeta* Phi(beta)
//          evaluated at beta = beta_i - beta_j.
//
// M is Hermitian for every state and positive semidefinite for every state
// with a classical P function, so det M < 0 certifies nonclassicality.
// n = m = 0 recovers the Bochner matrix [Phi(beta_i - beta_j)], beta = 0
// recovers the matrix of normally ordered moments.

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <concepts>
#include <exception>
#include <functional>
#include <numbers>
#include <optional>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include "qbochner/error.hpp"
#include "qbochner/linalg.hpp"
#include "qbochner/states.hpp"

namespace qbochner::gbm {

using linalg::ComplexMatrix;

/// Any source of Phi and its Wirtinger derivatives.
template <class T>
concept CfProvider = requires(const T& p, Complex beta, DerivativeOrder order) {
  { p.cf(beta) } -> std::convertible_to<Complex>;
  { p.derivative(order, beta) } -> std::convertible_to<Complex>;
};

/// Criterion selector: dimension, derivative orders and phase-space points.
struct GbmSpec {
  std::vector<int> n;
  std::vector<int> m;
  std::vector<Complex> betas;

  std::size_t size() const { return betas.size(); }

  void validate() const {
    if (betas.empty()) {
      throw Error(ErrorKind::configuration, "GbmSpec: dimension must be >= 1");
    }
    if (n.size() != betas.size() || m.size() != betas.size()) {
      throw Error(ErrorKind::configuration,
                  "GbmSpec: n, m and betas must all have length N");
    }
    for (std::size_t i = 0; i < size(); ++i) {
      if (n[i] < 0 || m[i] < 0) {
        throw Error(ErrorKind::configuration, "GbmSpec: orders must be >= 0");
      }
      if (!std::isfinite(betas[i].real()) || !std::isfinite(betas[i].imag())) {
        throw Error(ErrorKind::configuration, "GbmSpec: betas must be finite");
      }
    }
  }

  /// Derivative order and evaluation point of entry (i, j).
  DerivativeOrder order(std::size_t i, std::size_t j) const {
    return {n[i] + m[j], n[j] + m[i]};
  }
  Complex point(std::size_t i, std::size_t j) const { return betas[i] - betas[j]; }
  double sign(std::size_t i) const { return (n[i] + m[i]) % 2 == 0 ? 1.0 : -1.0; }

  int max_total_order() const {
    int best = 0;
    for (std::size_t i = 0; i < size(); ++i) {
      for (std::size_t j = 0; j < size(); ++j) best = std::max(best, order(i, j).total());
    }
    return best;
  }

  friend bool operator==(const GbmSpec&, const GbmSpec&) = default;
};

/// Square complex matrix verified Hermitian on construction.
class HermitianMatrix {
 public:
  static constexpr double kTolerance = 1e-9;

  explicit HermitianMatrix(ComplexMatrix a) : a_(std::move(a)) {
    const double scale = std::max(a_.max_norm(), std::numeric_limits<double>::min());
    const double defect = a_.hermiticity_defect();
    if (!(defect <= kTolerance * scale)) {
      throw Error(ErrorKind::numerical_inconsistency,
                  "matrix is not Hermitian: defect " + std::to_string(defect) +
                      " against max-norm " + std::to_string(scale));
    }
  }

  std::size_t size() const { return a_.size(); }
  const Complex& operator()(std::size_t i, std::size_t j) const { return a_(i, j); }
  const ComplexMatrix& matrix() const { return a_; }

 private:
  ComplexMatrix a_;
};

/// Determinant value with its propagated standard deviation.
struct CriterionResult {
  double det = 0.0;
  double sigma = 0.0;
  /// det / sigma; empty when sigma is zero (analytic input).
  std::optional<double> significance;

  static CriterionResult analytic(double det) { return {det, 0.0, std::nullopt}; }

  static CriterionResult statistical(double det, double sigma) {
    CriterionResult r{det, sigma, std::nullopt};
    if (sigma > 0.0) r.significance = det / sigma;
    return r;
  }

  bool nonclassical() const { return det < 0.0; }
};

template <CfProvider Source>
HermitianMatrix build_gbm(const Source& source, const GbmSpec& spec) {
  spec.validate();
  const std::size_t n = spec.size();
  ComplexMatrix a(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      const DerivativeOrder ord = spec.order(i, j);
      const Complex b = spec.point(i, j);
      const Complex v = ord.total() == 0 ? source.cf(b) : source.derivative(ord, b);
      a(i, j) = spec.sign(i) * v;
    }
  }
  return HermitianMatrix(std::move(a));
}

/// Real determinant of a Hermitian matrix. The imaginary part of the
/// factorized determinant must vanish to 1e-8 (|Re| + 1).
inline double det_hermitian(const HermitianMatrix& m) {
  const Complex d = linalg::determinant(m.matrix());
  if (!(std::abs(d.imag()) <= 1e-8 * (std::abs(d.real()) + 1.0))) {
    throw Error(ErrorKind::numerical_inconsistency,
                "determinant of Hermitian matrix has imaginary part " +
                    std::to_string(d.imag()));
  }
  return d.real();
}

template <CfProvider Source>
CriterionResult evaluate(const Source& source, const GbmSpec& spec) {
  return CriterionResult::analytic(det_hermitian(build_gbm(source, spec)));
}

// ---------------------------------------------------------------------------
// Presets

/// bochner2, example3x3, squeezing, mom2, gbm2. Beta is ignored by the
/// beta-free presets (squeezing, mom2).
inline GbmSpec preset(std::string_view name, Complex beta = {}) {
  if (name == "bochner2") return {{0, 0}, {0, 0}, {beta, 0.0}};
  if (name == "example3x3") return {{0, 0, 1}, {0, 1, 0}, {beta, 0.0, beta}};
  if (name == "squeezing") return {{0, 0, 1}, {0, 1, 0}, {0.0, 0.0, 0.0}};
  if (name == "mom2") return {{0, 1}, {0, 0}, {0.0, 0.0}};
  if (name == "gbm2") return {{0, 1}, {0, 0}, {beta, 0.0}};
  throw Error(ErrorKind::configuration, "unknown preset '" + std::string(name) + "'");
}

inline const std::vector<std::string>& preset_names() {
  static const std::vector<std::string> names{"bochner2", "example3x3", "squeezing",
                                              "mom2", "gbm2"};
  return names;
}

/// Family of specs parameterized by a phase-space point.
using GbmFamily = std::function<GbmSpec(Complex)>;

inline GbmFamily preset_family(std::string name) {
  preset(name);  // validates the name
  return [name = std::move(name)](Complex beta) { return preset(name, beta); };
}

/// Parses "name" or "name(re,im)".
struct PresetRef {
  std::string name;
  Complex beta;
};

inline PresetRef parse_preset(std::string_view text) {
  PresetRef ref;
  const auto open = text.find('(');
  if (open == std::string_view::npos) {
    ref.name = std::string(text);
  } else {
    if (text.back() != ')') {
      throw Error(ErrorKind::configuration, "preset: missing ')' in '" + std::string(text) + "'");
    }
    ref.name = std::string(text.substr(0, open));
    const std::string_view args = text.substr(open + 1, text.size() - open - 2);
    const auto comma = args.find(',');
    const auto parse = [&](std::string_view s) {
      while (!s.empty() && s.front() == ' ') s.remove_prefix(1);
      while (!s.empty() && s.back() == ' ') s.remove_suffix(1);
      double v = 0.0;
      const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
      if (ec != std::errc{} || ptr != s.data() + s.size()) {
        throw Error(ErrorKind::configuration, "preset: bad number '" + std::string(s) + "'");
      }
      return v;
    };
    if (comma == std::string_view::npos) {
      ref.beta = parse(args);
    } else {
      ref.beta = {parse(args.substr(0, comma)), parse(args.substr(comma + 1))};
    }
  }
  preset(ref.name);
  return ref;
}

// ---------------------------------------------------------------------------
// Quadrature variances behind the squeezing preset

struct QuadratureVariances {
  double phi_min = 0.0;
  double phi_max = 0.0;
  /// <:[Delta x(phi_min)]^2:> and <:[Delta x(phi_max)]^2:>
  double var_min = 0.0;
  double var_max = 0.0;
};

/// Extremal normally ordered quadrature variances from the first and second
/// moments. Phase-symmetric input yields phi_min = 0.
inline QuadratureVariances normally_ordered_variances(Complex mean_a, Complex mean_a2,
                                                      double mean_n) {
  const Complex c = mean_a2 - mean_a * mean_a;
  const double incoherent = mean_n - std::norm(mean_a);
  const double amp = std::abs(c);
  QuadratureVariances q;
  // <:Dx(phi)^2:> = 2 Re(e^{2i phi} c) + 2 incoherent
  q.phi_min = amp == 0.0 ? 0.0 : std::remainder(0.5 * (std::numbers::pi - std::arg(c)), std::numbers::pi);
  if (q.phi_min < 0.0) q.phi_min += std::numbers::pi;
  q.phi_max = std::fmod(q.phi_min + 0.5 * std::numbers::pi, std::numbers::pi);
  q.var_min = 2.0 * incoherent - 2.0 * amp;
  q.var_max = 2.0 * incoherent + 2.0 * amp;
  return q;
}

inline QuadratureVariances normally_ordered_variances(const states::StateModel& s) {
  return normally_ordered_variances(std::conj(states::moment(s, 1, 0)),
                                    states::moment(s, 0, 2),
                                    states::moment(s, 1, 1).real());
}

// ---------------------------------------------------------------------------
// Grid scans

/// Rectangular lattice in (Re beta, Im beta), bounds inclusive.
struct Grid {
  double re_min = 0.0, re_max = 0.0, re_step = 1.0;
  double im_min = 0.0, im_max = 0.0, im_step = 1.0;

  void validate() const {
    const double v[] = {re_min, re_max, re_step, im_min, im_max, im_step};
    for (double x : v) {
      if (!std::isfinite(x)) throw Error(ErrorKind::configuration, "grid: bounds must be finite");
    }
    if (!(re_step > 0.0) || !(im_step > 0.0)) {
      throw Error(ErrorKind::configuration, "grid: steps must be > 0");
    }
    if (re_max < re_min || im_max < im_min) {
      throw Error(ErrorKind::configuration, "grid: max must not be below min");
    }
  }

  std::size_t re_count() const { return count(re_min, re_max, re_step); }
  std::size_t im_count() const { return count(im_min, im_max, im_step); }
  std::size_t size() const { return re_count() * im_count(); }

  /// Row-major: Re beta is the slow index.
  Complex point(std::size_t index) const {
    const std::size_t ir = index / im_count();
    const std::size_t ii = index % im_count();
    return {re_min + static_cast<double>(ir) * re_step,
            im_min + static_cast<double>(ii) * im_step};
  }

  /// Single point at beta.
  static Grid single(Complex beta) {
    return {beta.real(), beta.real(), 1.0, beta.imag(), beta.imag(), 1.0};
  }

 private:
  static std::size_t count(double lo, double hi, double step) {
    return static_cast<std::size_t>(std::floor((hi - lo) / step + 1e-9)) + 1;
  }
};

struct ScanPoint {
  Complex beta;
  std::optional<CriterionResult> result;
  /// "ok" or the error message of the failed evaluation.
  std::string status = "ok";
  std::optional<ErrorKind> error;
};

/// Evaluates `criterion(family(beta))` at every lattice point. Failures are
/// recorded per point. Results land in fixed slots, so the output does not
/// depend on the thread count.
template <class Criterion>
std::vector<ScanPoint> grid_scan(const Criterion& criterion, const GbmFamily& family,
                                 const Grid& grid, unsigned threads = 1) {
  grid.validate();
  const std::size_t total = grid.size();
  std::vector<ScanPoint> out(total);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < total; i = next++) {
      ScanPoint& p = out[i];
      p.beta = grid.point(i);
      try {
        p.result = criterion(family(p.beta));
      } catch (const Error& e) {
        p.result.reset();
        p.status = e.what();
        p.error = e.kind();
      } catch (const std::exception& e) {
        p.result.reset();
        p.status = e.what();
        p.error = ErrorKind::numerical_inconsistency;
      }
    }
  };
  threads = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(total)));
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  return out;
}

/// Criterion callable for an analytic source.
template <CfProvider Source>
auto analytic_criterion(const Source& source) {
  return [&source](const GbmSpec& spec) { return evaluate(source, spec); };
}

}  // namespace qbochner::gbm
