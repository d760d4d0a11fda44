#pragma once

// Seeded random inputs for property tests.

#include <cmath>
#include <complex>
#include <numbers>
#include <random>
#include <vector>

#include "qbochner/gbm.hpp"
#include "qbochner/states.hpp"

namespace gen {

using qbochner::Complex;
using qbochner::states::StateModel;

class Gen {
 public:
  explicit Gen(std::uint64_t seed) : rng_(seed) {}

  double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng_); }
  int integer(int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng_); }

  /// Uniform in the disc |z| <= radius.
  Complex disc(double radius) {
    const double r = radius * std::sqrt(uniform(0.0, 1.0));
    return std::polar(r, uniform(0.0, 2.0 * std::numbers::pi));
  }

  StateModel coherent() { return StateModel::coherent(disc(1.5)); }
  StateModel thermal() { return StateModel::thermal(uniform(0.0, 2.0)); }

  /// Convex combination of 2-3 coherent or thermal states.
  StateModel classical_mixture() {
    const int k = integer(2, 3);
    std::vector<double> w;
    std::vector<StateModel> c;
    double total = 0.0;
    for (int i = 0; i < k; ++i) {
      w.push_back(uniform(0.1, 1.0));
      total += w.back();
      c.push_back(integer(0, 1) ? coherent() : thermal());
    }
    for (auto& x : w) x /= total;
    double sum = 0.0;
    for (int i = 0; i + 1 < k; ++i) sum += w[i];
    w.back() = 1.0 - sum;
    return StateModel::mixture(w, c);
  }

  StateModel classical() {
    switch (integer(0, 2)) {
      case 0: return coherent();
      case 1: return thermal();
      default: return classical_mixture();
    }
  }

  qbochner::gbm::GbmSpec spec(int max_n, int max_order, double radius) {
    qbochner::gbm::GbmSpec s;
    const int n = integer(1, max_n);
    for (int i = 0; i < n; ++i) {
      s.n.push_back(integer(0, max_order));
      s.m.push_back(integer(0, max_order));
      s.betas.push_back(disc(radius));
    }
    return s;
  }

  std::mt19937_64& engine() { return rng_; }

 private:
  std::mt19937_64 rng_;
};

/// The catalog used by the property tests; one member per variant.
inline std::vector<StateModel> catalog() {
  return {StateModel::coherent({0.7, -0.4}),
          StateModel::thermal(0.3),
          StateModel::fock(2),
          StateModel::photon_added_thermal(1, 0.2),
          StateModel::squeezed_vacuum(0.386, 4.083, 0.3),
          StateModel::mixture({0.5, 0.3, 0.2}, {StateModel::thermal(0.1),
                                               StateModel::photon_added_thermal(3, 0.12),
                                               StateModel::coherent({0.2, 0.1})})};
}

}  // namespace gen
