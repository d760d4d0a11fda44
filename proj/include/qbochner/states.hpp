#pragma once

// Reference states with closed-form normally ordered characteristic
// functions Phi(beta) = <:exp(beta a^dag - beta^* a):>.
//
// Quadrature convention: x(phi) = e^{i phi} a + e^{-i phi} a^dag, vacuum
// variance 1. Derivatives are Wirtinger derivatives, with beta and beta^*
// treated as independent variables z and w.

#include <cmath>
#include <complex>
#include <functional>
#include <limits>
#include <numbers>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "qbochner/error.hpp"
#include "qbochner/specfun.hpp"

namespace qbochner {

/// Order m in beta and n in beta^* of a Wirtinger derivative.
struct DerivativeOrder {
  int m = 0;
  int n = 0;

  int total() const { return m + n; }
  friend bool operator==(const DerivativeOrder&, const DerivativeOrder&) = default;
};

}  // namespace qbochner

namespace qbochner::states {

inline constexpr int kMaxDerivativeOrder = 8;

struct Coherent {
  Complex alpha;
};

struct Thermal {
  double nbar = 0.0;
};

struct Fock {
  int n = 0;
};

struct PhotonAddedThermal {
  int k = 0;
  double nbar = 0.0;
};

/// Gaussian squeezed vacuum given by its principal quadrature variances.
/// The quadrature x(theta) carries vmax, x(theta + pi/2) carries vmin.
struct SqueezedVacuum {
  double vmin = 1.0;
  double vmax = 1.0;
  double theta = 0.0;
};

class StateModel;

struct Mixture {
  std::vector<double> weights;
  std::vector<StateModel> components;
};

/// Immutable description of one catalog state. Construct through the
/// named factories, which enforce the parameter invariants.
class StateModel {
 public:
  using Variant = std::variant<Coherent, Thermal, Fock, PhotonAddedThermal,
                               SqueezedVacuum, Mixture>;

  static StateModel coherent(Complex alpha) {
    require(std::isfinite(alpha.real()) && std::isfinite(alpha.imag()),
            "coherent: alpha must be finite");
    return StateModel(Coherent{alpha});
  }

  static StateModel thermal(double nbar) {
    require(std::isfinite(nbar) && nbar >= 0.0, "thermal: nbar must be >= 0");
    return StateModel(Thermal{nbar});
  }

  static StateModel vacuum() { return thermal(0.0); }

  static StateModel fock(int n) {
    require(n >= 0, "fock: n must be >= 0");
    return StateModel(Fock{n});
  }

  static StateModel photon_added_thermal(int k, double nbar) {
    require(k >= 0, "photon_added_thermal: k must be >= 0");
    require(std::isfinite(nbar) && nbar >= 0.0,
            "photon_added_thermal: nbar must be >= 0");
    return StateModel(PhotonAddedThermal{k, nbar});
  }

  static StateModel squeezed_vacuum(double vmin, double vmax, double theta = 0.0) {
    require(std::isfinite(vmin) && std::isfinite(vmax) && std::isfinite(theta),
            "squeezed_vacuum: parameters must be finite");
    require(vmin > 0.0 && vmax > 0.0, "squeezed_vacuum: variances must be > 0");
    require(vmin <= vmax, "squeezed_vacuum: vmin must not exceed vmax");
    return StateModel(SqueezedVacuum{vmin, vmax, theta});
  }

  /// Variances from decibels relative to vacuum, V = 10^(dB/10).
  static StateModel squeezed_vacuum_db(double squeezing_db,
                                       double antisqueezing_db,
                                       double theta = 0.0) {
    return squeezed_vacuum(std::pow(10.0, squeezing_db / 10.0),
                           std::pow(10.0, antisqueezing_db / 10.0), theta);
  }

  static StateModel mixture(std::vector<double> weights,
                            std::vector<StateModel> components) {
    require(!weights.empty(), "mixture: needs at least one component");
    require(weights.size() == components.size(),
            "mixture: weights and components differ in length");
    double total = 0.0;
    for (double w : weights) {
      require(std::isfinite(w) && w >= 0.0, "mixture: weights must be >= 0");
      total += w;
    }
    require(std::abs(total - 1.0) <= 1e-12, "mixture: weights must sum to 1");
    return StateModel(Mixture{std::move(weights), std::move(components)});
  }

  const Variant& variant() const { return v_; }

  template <class T>
  const T* get_if() const {
    return std::get_if<T>(&v_);
  }

  /// True for coherent, thermal and mixtures of those. Such states have a
  /// non-negative P function.
  bool is_classical() const {
    return std::visit(
        [](const auto& s) -> bool {
          using S = std::decay_t<decltype(s)>;
          if constexpr (std::is_same_v<S, Coherent> || std::is_same_v<S, Thermal>) {
            return true;
          } else if constexpr (std::is_same_v<S, Fock>) {
            return s.n == 0;
          } else if constexpr (std::is_same_v<S, PhotonAddedThermal>) {
            return s.k == 0;
          } else if constexpr (std::is_same_v<S, SqueezedVacuum>) {
            return s.vmin >= 1.0;
          } else {
            for (const auto& c : s.components) {
              if (!c.is_classical()) return false;
            }
            return true;
          }
        },
        v_);
  }

  std::string name() const {
    static constexpr const char* names[] = {
        "coherent", "thermal", "fock", "photon_added_thermal",
        "squeezed_vacuum", "mixture"};
    return names[v_.index()];
  }

 private:
  explicit StateModel(Variant v) : v_(std::move(v)) {}

  static void require(bool ok, const char* what) {
    if (!ok) throw Error(ErrorKind::configuration, what);
  }

  Variant v_;
};

namespace detail {

/// Quadratic exponent q_zz z^2 + q_ww w^2 + q_zw z w + q_z z + q_w w.
struct Quadratic {
  Complex zz, ww, zw, z, w;

  Complex operator()(Complex zv, Complex wv) const {
    return zz * zv * zv + ww * wv * wv + zw * zv * wv + z * zv + w * wv;
  }
};

/// Dense bivariate polynomial sum c(a, b) z^a w^b with a, b <= degree.
class Bivariate {
 public:
  explicit Bivariate(int degree = 0)
      : deg_(degree), c_(static_cast<std::size_t>((degree + 1) * (degree + 1))) {}

  int degree() const { return deg_; }
  Complex& at(int a, int b) { return c_[index(a, b)]; }
  Complex at(int a, int b) const { return c_[index(a, b)]; }

  Complex operator()(Complex zv, Complex wv) const {
    // Horner in w of Horner in z
    Complex out = 0.0;
    for (int b = deg_; b >= 0; --b) {
      Complex row = 0.0;
      for (int a = deg_; a >= 0; --a) row = row * zv + at(a, b);
      out = out * wv + row;
    }
    return out;
  }

  /// (d/dz + dQ/dz) applied to p e^Q, returned as the new polynomial factor.
  Bivariate apply_dz(const Quadratic& q) const {
    Bivariate out(deg_ + 1);
    for (int a = 0; a <= deg_; ++a) {
      for (int b = 0; b <= deg_; ++b) {
        const Complex c = at(a, b);
        if (c == Complex{}) continue;
        if (a > 0) out.at(a - 1, b) += static_cast<double>(a) * c;
        out.at(a + 1, b) += 2.0 * q.zz * c;
        out.at(a, b + 1) += q.zw * c;
        out.at(a, b) += q.z * c;
      }
    }
    return out;
  }

  Bivariate apply_dw(const Quadratic& q) const {
    Bivariate out(deg_ + 1);
    for (int a = 0; a <= deg_; ++a) {
      for (int b = 0; b <= deg_; ++b) {
        const Complex c = at(a, b);
        if (c == Complex{}) continue;
        if (b > 0) out.at(a, b - 1) += static_cast<double>(b) * c;
        out.at(a, b + 1) += 2.0 * q.ww * c;
        out.at(a + 1, b) += q.zw * c;
        out.at(a, b) += q.w * c;
      }
    }
    return out;
  }

 private:
  std::size_t index(int a, int b) const {
    return static_cast<std::size_t>(a * (deg_ + 1) + b);
  }

  int deg_;
  std::vector<Complex> c_;
};

/// weight * poly(z, w) * exp(q(z, w))
struct PolyExpTerm {
  double weight = 1.0;
  Bivariate poly;
  Quadratic q;
};

/// poly in the product z w, i.e. sum_j c_j (scale z w)^j
inline Bivariate poly_in_zw(const std::vector<double>& coeffs, double scale) {
  const int deg = static_cast<int>(coeffs.size()) - 1;
  Bivariate p(deg);
  double s = 1.0;
  for (int j = 0; j <= deg; ++j) {
    p.at(j, j) = coeffs[j] * s;
    s *= scale;
  }
  return p;
}

inline Bivariate unit_poly() {
  Bivariate p(0);
  p.at(0, 0) = 1.0;
  return p;
}

inline void expand_into(const StateModel& state, double weight,
                        std::vector<PolyExpTerm>& out) {
  std::visit(
      [&](const auto& s) {
        using S = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<S, Coherent>) {
          out.push_back({weight, unit_poly(), {0.0, 0.0, 0.0, std::conj(s.alpha), -s.alpha}});
        } else if constexpr (std::is_same_v<S, Thermal>) {
          out.push_back({weight, unit_poly(), {0.0, 0.0, -s.nbar, 0.0, 0.0}});
        } else if constexpr (std::is_same_v<S, Fock>) {
          out.push_back({weight, poly_in_zw(specfun::laguerre_coefficients(s.n), 1.0),
                         {0.0, 0.0, 0.0, 0.0, 0.0}});
        } else if constexpr (std::is_same_v<S, PhotonAddedThermal>) {
          out.push_back({weight,
                         poly_in_zw(specfun::laguerre_coefficients(s.k), 1.0 + s.nbar),
                         {0.0, 0.0, -s.nbar, 0.0, 0.0}});
        } else if constexpr (std::is_same_v<S, SqueezedVacuum>) {
          const Complex a = (s.vmax - s.vmin) / 8.0 * std::polar(1.0, 2.0 * s.theta);
          const double b = (s.vmax + s.vmin - 2.0) / 4.0;
          out.push_back({weight, unit_poly(), {a, std::conj(a), -b, 0.0, 0.0}});
        } else {
          for (std::size_t i = 0; i < s.components.size(); ++i) {
            expand_into(s.components[i], weight * s.weights[i], out);
          }
        }
      },
      state.variant());
}

inline std::vector<PolyExpTerm> expand(const StateModel& state) {
  std::vector<PolyExpTerm> out;
  expand_into(state, 1.0, out);
  return out;
}

inline Complex evaluate_checked(const Bivariate& p, const Quadratic& q,
                                Complex zv, Complex wv) {
  const Complex pv = p(zv, wv);
  const Complex qv = q(zv, wv);
  if (qv.real() > 700.0) {
    const double logmag = qv.real() + std::log(std::abs(pv));
    if (logmag > 709.0) {
      throw RangeError("characteristic function derivative overflows", logmag);
    }
  }
  return pv * std::exp(qv);
}

}  // namespace detail

inline void require_order(DerivativeOrder order) {
  if (order.m < 0 || order.n < 0) {
    throw Error(ErrorKind::domain, "derivative order must be non-negative");
  }
  if (order.total() > kMaxDerivativeOrder) {
    throw Error(ErrorKind::unsupported_order,
                "derivative order " + std::to_string(order.total()) +
                    " exceeds the catalog limit of " +
                    std::to_string(kMaxDerivativeOrder));
  }
}

/// Phi(beta).
inline Complex cf(const StateModel& state, Complex beta) {
  const double r2 = std::norm(beta);
  return std::visit(
      [&](const auto& s) -> Complex {
        using S = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<S, Coherent>) {
          return std::exp(beta * std::conj(s.alpha) - std::conj(beta) * s.alpha);
        } else if constexpr (std::is_same_v<S, Thermal>) {
          return std::exp(-s.nbar * r2);
        } else if constexpr (std::is_same_v<S, Fock>) {
          return specfun::laguerre(s.n, r2);
        } else if constexpr (std::is_same_v<S, PhotonAddedThermal>) {
          return specfun::laguerre(s.k, (1.0 + s.nbar) * r2) * std::exp(-s.nbar * r2);
        } else if constexpr (std::is_same_v<S, SqueezedVacuum>) {
          // rotate into the frame where Re carries vmin and Im carries vmax
          const Complex r = beta * std::polar(1.0, s.theta);
          const double v = r.real();
          const double u = r.imag();
          return std::exp(0.5 * r2 - 0.5 * (s.vmax * u * u + s.vmin * v * v));
        } else {
          Complex sum = 0.0;
          for (std::size_t i = 0; i < s.components.size(); ++i) {
            sum += s.weights[i] * cf(s.components[i], beta);
          }
          return sum;
        }
      },
      state.variant());
}

/// d^m/dbeta^m d^n/dbeta*^n of sum_t weight_t poly_t e^{q_t}.
inline Complex derivative_of_terms(const std::vector<detail::PolyExpTerm>& terms,
                                   DerivativeOrder order, Complex beta) {
  Complex sum = 0.0;
  const Complex w = std::conj(beta);
  for (const auto& t : terms) {
    detail::Bivariate p = t.poly;
    for (int i = 0; i < order.m; ++i) p = p.apply_dz(t.q);
    for (int i = 0; i < order.n; ++i) p = p.apply_dw(t.q);
    sum += t.weight * detail::evaluate_checked(p, t.q, beta, w);
  }
  return sum;
}

/// Exact Wirtinger derivative of Phi at beta.
inline Complex cf_derivative(const StateModel& state, DerivativeOrder order,
                             Complex beta) {
  require_order(order);
  if (order.total() == 0) return cf(state, beta);
  return derivative_of_terms(detail::expand(state), order, beta);
}

/// Normally ordered moment <a^dag^k a^l>.
inline Complex moment(const StateModel& state, int k, int l) {
  require_order({k, l});
  return std::visit(
      [&](const auto& s) -> Complex {
        using S = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<S, Coherent>) {
          return std::pow(std::conj(s.alpha), k) * std::pow(s.alpha, l);
        } else if constexpr (std::is_same_v<S, Thermal>) {
          return k == l ? specfun::factorial(k) * std::pow(s.nbar, k) : 0.0;
        } else if constexpr (std::is_same_v<S, Mixture>) {
          Complex sum = 0.0;
          for (std::size_t i = 0; i < s.components.size(); ++i) {
            sum += s.weights[i] * moment(s.components[i], k, l);
          }
          return sum;
        } else {
          const double sign = (l % 2 == 0) ? 1.0 : -1.0;
          return sign * cf_derivative(state, {k, l}, Complex{});
        }
      },
      state.variant());
}

/// Central-difference Wirtinger derivative of an arbitrary CF with one
/// Richardson step. Used when no closed form exists.
inline Complex wirtinger_fd(const std::function<Complex(Complex)>& f,
                            DerivativeOrder order, Complex beta) {
  require_order(order);
  const int k = order.total();
  if (k == 0) return f(beta);
  const double eps = std::numeric_limits<double>::epsilon();
  const double h = k == 1 ? 1e-4 : std::pow(eps, 1.0 / (k + 4));

  // ops[i] is true for d/dbeta, false for d/dbeta*
  std::vector<bool> ops;
  for (int i = 0; i < order.m; ++i) ops.push_back(true);
  for (int i = 0; i < order.n; ++i) ops.push_back(false);

  std::function<Complex(std::size_t, Complex, double)> nested =
      [&](std::size_t depth, Complex b, double step) -> Complex {
    if (depth == ops.size()) return f(b);
    const Complex dx = (nested(depth + 1, b + step, step) -
                        nested(depth + 1, b - step, step)) / (2.0 * step);
    const Complex istep{0.0, step};
    const Complex dy = (nested(depth + 1, b + istep, step) -
                        nested(depth + 1, b - istep, step)) / (2.0 * step);
    const Complex i{0.0, 1.0};
    return ops[depth] ? 0.5 * (dx - i * dy) : 0.5 * (dx + i * dy);
  };
  const Complex coarse = nested(0, beta, h);
  const Complex fine = nested(0, beta, 0.5 * h);
  return (4.0 * fine - coarse) / 3.0;
}

/// CF source backed by a catalog state; the term expansion is built once.
class AnalyticCf {
 public:
  explicit AnalyticCf(StateModel state)
      : state_(std::move(state)), terms_(detail::expand(state_)) {}

  const StateModel& state() const { return state_; }

  Complex cf(Complex beta) const { return states::cf(state_, beta); }

  Complex derivative(DerivativeOrder order, Complex beta) const {
    require_order(order);
    if (order.total() == 0) return cf(beta);
    return derivative_of_terms(terms_, order, beta);
  }

  int max_order() const { return kMaxDerivativeOrder; }

 private:
  StateModel state_;
  std::vector<detail::PolyExpTerm> terms_;
};

/// CF source backed by a user callable; derivatives by finite differences.
class FunctionCf {
 public:
  explicit FunctionCf(std::function<Complex(Complex)> f) : f_(std::move(f)) {}

  Complex cf(Complex beta) const { return f_(beta); }

  Complex derivative(DerivativeOrder order, Complex beta) const {
    return wirtinger_fd(f_, order, beta);
  }

  int max_order() const { return kMaxDerivativeOrder; }

 private:
  std::function<Complex(Complex)> f_;
};

}  // namespace qbochner::states
