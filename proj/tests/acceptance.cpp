// Acceptance gate: one PASS/FAIL line per criterion, nonzero exit on any FAIL.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <string>
#include <vector>

#include "qbochner/bhdsim.hpp"
#include "qbochner/estimator.hpp"
#include "qbochner/gbm.hpp"
#include "qbochner/states.hpp"
#include "support/generators.hpp"
#include "support/oracles.hpp"

using namespace qbochner;
using gbm::GbmSpec;
using states::AnalyticCf;
using states::StateModel;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

struct Criterion {
  int id;
  const char* name;
  double limit_s;
  std::function<Outcome()> run;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

const double kVmin = std::pow(10.0, -0.413);
const double kVmax = std::pow(10.0, 0.611);
const double kSqueezingTarget = -0.473;

StateModel pat_mixture() {
  return StateModel::mixture({0.944, 0.03, 0.026},
                             {StateModel::thermal(0.1), StateModel::photon_added_thermal(3, 0.12),
                              StateModel::photon_added_thermal(4, 0.182)});
}

estimator::QuadratureDataset simulate(const StateModel& s, std::size_t m, std::uint64_t seed) {
  bhdsim::SimConfig c;
  c.state = s;
  c.samples = m;
  c.seed = seed;
  c.efficiency = 1.0;
  return bhdsim::generate(c);
}

// ---------------------------------------------------------------------------

Outcome pat_mixture_negativity() {
  const AnalyticCf src(pat_mixture());
  const auto crit = gbm::analytic_criterion(src);
  const gbm::Grid radial{0.0, 7.0, 0.01, 0.0, 0.0, 1.0};
  const auto g2 = gbm::grid_scan(crit, gbm::preset_family("gbm2"), radial);
  const auto bo = gbm::grid_scan(crit, gbm::preset_family("bochner2"), radial);
  double best = 1e300, best_r = 0.0, bochner_min = 1e300;
  for (std::size_t i = 0; i < g2.size(); ++i) {
    if (!g2[i].result || !bo[i].result) return {false, "evaluation failed at " + g2[i].status};
    const double r = g2[i].beta.real();
    if (r >= 5.0 && r <= 6.5 && g2[i].result->det < best) {
      best = g2[i].result->det;
      best_r = r;
    }
    bochner_min = std::min(bochner_min, bo[i].result->det);
  }
  const double mom2 = gbm::evaluate(src, gbm::preset("mom2")).det;
  const bool ok = best < 0.0 && bochner_min >= 0.0 && mom2 >= 0.0;
  return {ok, fmt("gbm2 min %.4g at |beta|=%.2f, min(1-|Phi|^2)=%.4g, mom2=%.4g", best, best_r,
                  bochner_min, mom2)};
}

Outcome squeezing_analytic() {
  const AnalyticCf src(StateModel::squeezed_vacuum(kVmin, kVmax));
  const double det = gbm::evaluate(src, gbm::preset("squeezing")).det;
  const double closed = 0.25 * (kVmin - 1.0) * (kVmax - 1.0);
  const bool ok = std::abs(det - kSqueezingTarget) <= 0.005 && std::abs(det - closed) <= 1e-12;
  return {ok, fmt("det=%.6f, closed form %.6f, target %.3f +- 0.005", det, closed,
                  kSqueezingTarget)};
}

Outcome squeezing_simulated() {
  const auto data = simulate(StateModel::squeezed_vacuum(kVmin, kVmax), 1000000, 20260101);
  const auto em = estimator::estimate_gbm(data, gbm::preset("squeezing"));
  const auto r = estimator::det_with_error(em);
  const double sig = r.significance.value_or(0.0);
  const bool ok = std::abs(r.det - kSqueezingTarget) <= 3.0 * r.sigma && sig <= -20.0;
  return {ok, fmt("det=%.4f +- %.4f (%.2f sigma from %.3f), Sigma=%.1f", r.det, r.sigma,
                  std::abs(r.det - kSqueezingTarget) / r.sigma, kSqueezingTarget, sig)};
}

Outcome estimator_oracle() {
  // simulatable members of the catalog: the photon-added mixture is replaced
  // by a mixture that includes a Fock component
  const std::vector<StateModel> states{
      StateModel::coherent({0.7, -0.4}),
      StateModel::thermal(0.3),
      StateModel::fock(2),
      StateModel::squeezed_vacuum(0.386, 4.083, 0.3),
      StateModel::mixture({0.5, 0.3, 0.2}, {StateModel::thermal(0.1), StateModel::fock(1),
                                           StateModel::coherent({0.2, 0.1})})};
  const std::vector<DerivativeOrder> orders{{0, 0}, {1, 0}, {0, 1}, {2, 0}, {1, 1}, {0, 2}};
  const std::vector<Complex> betas{{0.0, 0.0}, {0.5, 0.0}, {-0.3, 0.6}, {1.0, 0.5}, {-0.9, -1.2}};
  // the data are uniform by construction; the 99.9% phase gate is run once
  // per dataset and reported instead of aborting the run
  estimator::EstimatorOptions opt;
  opt.threads = 1;
  opt.check_uniformity = false;
  std::size_t cases = 0, inside = 0, flagged = 0;
  std::vector<std::size_t> misses(states.size(), 0);
  for (std::size_t si = 0; si < states.size(); ++si) {
    const AnalyticCf src(states[si]);
    for (int rep = 0; rep < 50; ++rep) {
      const auto data = simulate(states[si], 100000, 1000 * (si + 1) + rep);
      if (!estimator::phase_uniformity(data, opt.uniformity_bins).pass) ++flagged;
      for (const auto& b : betas) {
        const auto est = estimator::sample_cf_derivatives(data, orders, b, opt);
        for (std::size_t o = 0; o < orders.size(); ++o) {
          const Complex ref = src.derivative(orders[o], b);
          const Complex d = est[o].value - ref;
          const bool ok = std::abs(d.real()) <= 3.0 * est[o].std_re() + 1e-12 &&
                          std::abs(d.imag()) <= 3.0 * est[o].std_im() + 1e-12;
          ++cases;
          if (ok) {
            ++inside;
          } else {
            ++misses[si];
          }
        }
      }
    }
  }
  const double frac = static_cast<double>(inside) / static_cast<double>(cases);
  std::string per_state;
  for (std::size_t si = 0; si < states.size(); ++si) {
    per_state += (si ? "," : "") + std::to_string(misses[si]);
  }
  return {frac >= 0.96,
          fmt("%zu/%zu cases within 3 SE (%.2f%%), misses per state [%s], %zu/250 datasets "
              "flagged by the phase gate",
              inside, cases, 100.0 * frac, per_state.c_str(), flagged)};
}

Outcome reductions() {
  gen::Gen g(501);
  std::size_t checked = 0;
  double worst_moment = 0.0;
  bool bochner_exact = true;
  for (const auto& s : gen::catalog()) {
    const AnalyticCf src(s);
    for (int trial = 0; trial < 20; ++trial) {
      GbmSpec spec;
      const int n = g.integer(1, 5);
      for (int i = 0; i < n; ++i) {
        spec.n.push_back(0);
        spec.m.push_back(0);
        spec.betas.push_back(g.disc(2.0));
      }
      const auto m = gbm::build_gbm(src, spec);
      for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) {
          if (m(i, j) != states::cf(s, spec.betas[i] - spec.betas[j])) bochner_exact = false;
          ++checked;
        }
      }
    }
    for (int trial = 0; trial < 20; ++trial) {
      const GbmSpec spec = g.spec(4, 2, 0.0);
      const auto m = gbm::build_gbm(src, spec);
      for (std::size_t i = 0; i < spec.size(); ++i) {
        for (std::size_t j = 0; j < spec.size(); ++j) {
          const double sign = (spec.n[i] + spec.n[j]) % 2 ? -1.0 : 1.0;
          const Complex ref =
              sign * states::moment(s, spec.n[i] + spec.m[j], spec.n[j] + spec.m[i]);
          worst_moment =
              std::max(worst_moment, std::abs(m(i, j) - ref) / std::max(1.0, std::abs(ref)));
          ++checked;
        }
      }
    }
  }
  const bool ok = bochner_exact && worst_moment <= 1e-8;
  return {ok, fmt("%zu entries, Bochner path %s, worst moment relative error %.2e", checked,
                  bochner_exact ? "exact" : "NOT exact", worst_moment)};
}

Outcome classical_positivity() {
  gen::Gen g(601);
  double worst = 1e300;
  int failures = 0;
  for (int trial = 0; trial < 200; ++trial) {
    const auto s = g.classical();
    const auto spec = g.spec(4, 2, 2.0);
    const double d = gbm::evaluate(AnalyticCf(s), spec).det;
    worst = std::min(worst, d);
    if (d < -1e-8) ++failures;
  }
  return {failures == 0, fmt("200 specs, %d below -1e-8, smallest det %.3e", failures, worst)};
}

Outcome two_estimators() {
  const auto data = simulate(StateModel::thermal(0.1), 1000000, 701);
  const AnalyticCf src(StateModel::thermal(0.1));
  estimator::EstimatorOptions opt;
  opt.threads = 1;
  int agree = 0;
  double worst = 0.0;
  for (int dir = 0; dir < 8; ++dir) {
    for (double r : {1.0, 2.0}) {
      const Complex b = std::polar(r, dir * std::numbers::pi / 4.0);
      const auto a = estimator::sample_cf_direct(data, b);
      const auto k = estimator::sample_cf_derivative(data, {0, 0}, b, opt);
      const Complex d = a.value - k.value;
      const double zr = std::abs(d.real()) / std::sqrt(a.cov[0] + k.cov[0]);
      const double zi = std::abs(d.imag()) / std::sqrt(a.cov[2] + k.cov[2]);
      worst = std::max({worst, zr, zi});
      if (zr <= 3.0 && zi <= 3.0) ++agree;
    }
  }
  return {agree == 16, fmt("%d/16 points agree, largest deviation %.2f combined sigma", agree,
                           worst)};
}

Outcome derivative_fd() {
  gen::Gen g(801);
  double worst = 0.0;
  std::size_t checked = 0;
  for (const auto& s : gen::catalog()) {
    const auto f = [&s](Complex b) { return states::cf(s, b); };
    for (int trial = 0; trial < 20; ++trial) {
      const Complex b = g.disc(2.0);
      for (int m = 0; m <= 3; ++m) {
        for (int n = 0; m + n <= 3; ++n) {
          const Complex a = states::cf_derivative(s, {m, n}, b);
          const Complex r = oracle::wirtinger(f, m, n, b);
          worst = std::max(worst, std::abs(a - r) / std::max(std::abs(r), 1e-2));
          ++checked;
        }
      }
    }
  }
  return {worst <= 1e-6, fmt("%zu derivatives, worst relative error %.2e", checked, worst)};
}

}  // namespace

int main() {
  const std::vector<Criterion> criteria{
      {1, "photon-added mixture gbm2 negativity", 10.0, pat_mixture_negativity},
      {2, "squeezing determinant (analytic)", 1.0, squeezing_analytic},
      {3, "squeezing determinant (simulated)", 120.0, squeezing_simulated},
      {4, "estimator-oracle equivalence", 300.0, estimator_oracle},
      {5, "reduction equalities", 5.0, reductions},
      {6, "classical positivity", 30.0, classical_positivity},
      {7, "direct vs derivative CF estimators", 60.0, two_estimators},
      {8, "derivative vs finite differences", 10.0, derivative_fd},
  };
  int failed = 0;
  for (const auto& c : criteria) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const bool in_time = secs <= c.limit_s;
    const bool pass = o.pass && in_time;
    if (!pass) ++failed;
    std::printf("%s [%d] %s: %s; %.2f s (limit %.0f s%s)\n", pass ? "PASS" : "FAIL", c.id, c.name,
                o.detail.c_str(), secs, c.limit_s, in_time ? "" : ", exceeded");
    std::fflush(stdout);
  }
  return failed == 0 ? 0 : 1;
}
