#pragma once

// Synthetic balanced homodyne data: phase-tagged quadrature records of
// catalog states behind a detector of efficiency eta, plus the plain-text
// dataset format
//
//   x,phi
//   <x>,<phi>      one record per line, 17 significant digits, phi in [0, pi)
//
// Random numbers: record block b (65536 records) draws from std::mt19937_64
// seeded with splitmix64(seed + b * 0x9E3779B97F4A7C15). Output depends on
// the seed only.

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <map>
#include <memory>
#include <numbers>
#include <random>
#include <sstream>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "qbochner/error.hpp"
#include "qbochner/estimator.hpp"
#include "qbochner/states.hpp"

namespace qbochner::bhdsim {

using estimator::QuadratureDataset;
using estimator::QuadratureRecord;
using states::StateModel;

struct UniformPhase {};

/// Local-oscillator phase swept by a triangle wave 0 -> pi -> 0 over
/// `period` records.
struct TriangularSweep {
  std::size_t period = 10000;
};

using PhaseMode = std::variant<UniformPhase, TriangularSweep>;

struct SimConfig {
  StateModel state = StateModel::vacuum();
  /// Overall detection efficiency in (0, 1].
  double efficiency = 1.0;
  std::size_t samples = 100000;
  std::uint64_t seed = 0;
  PhaseMode phase_mode = UniformPhase{};

  void validate() const {
    if (!(efficiency > 0.0 && efficiency <= 1.0)) {
      throw Error(ErrorKind::configuration, "efficiency must lie in (0, 1]");
    }
    if (samples < 1) throw Error(ErrorKind::configuration, "samples must be >= 1");
    if (const auto* sweep = std::get_if<TriangularSweep>(&phase_mode)) {
      if (sweep->period < 2) {
        throw Error(ErrorKind::configuration, "triangular sweep period must be >= 2");
      }
    }
  }
};

inline constexpr std::size_t kRecordsPerStream = 65536;

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

/// Generator of record block `block`.
inline std::mt19937_64 block_stream(std::uint64_t seed, std::uint64_t block) {
  return std::mt19937_64(splitmix64(seed + block * 0x9E3779B97F4A7C15ULL));
}

/// Inverse-CDF table of the Fock-state quadrature density
/// p_n(x) = He_n(x)^2 exp(-x^2/2) / (n! sqrt(2 pi)).
class FockSampler {
 public:
  static constexpr std::size_t kNodes = 4096;

  explicit FockSampler(int n) : n_(n) {
    const double half = 6.0 + 2.0 * std::sqrt(static_cast<double>(n));
    x_.resize(kNodes);
    cdf_.resize(kNodes);
    std::vector<double> pdf(kNodes);
    for (std::size_t i = 0; i < kNodes; ++i) {
      x_[i] = -half + 2.0 * half * static_cast<double>(i) / (kNodes - 1);
      pdf[i] = density(n, x_[i]);
    }
    cdf_[0] = 0.0;
    for (std::size_t i = 1; i < kNodes; ++i) {
      cdf_[i] = cdf_[i - 1] + 0.5 * (pdf[i] + pdf[i - 1]) * (x_[i] - x_[i - 1]);
    }
    const double total = cdf_.back();
    for (double& c : cdf_) c /= total;
  }

  /// Normalized Hermite functions keep the recurrence in range.
  static double density(int n, double x) {
    double prev = 0.0;
    double cur = 1.0;  // He_0 / sqrt(0!)
    for (int k = 0; k < n; ++k) {
      const double next = (x * cur - std::sqrt(static_cast<double>(k)) * prev) /
                          std::sqrt(static_cast<double>(k + 1));
      prev = cur;
      cur = next;
    }
    return cur * cur * std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi);
  }

  double quantile(double u) const {
    const auto it = std::upper_bound(cdf_.begin(), cdf_.end(), u);
    if (it == cdf_.begin()) return x_.front();
    if (it == cdf_.end()) return x_.back();
    const std::size_t i = static_cast<std::size_t>(it - cdf_.begin());
    const double c0 = cdf_[i - 1];
    const double c1 = cdf_[i];
    const double t = c1 > c0 ? (u - c0) / (c1 - c0) : 0.0;
    return x_[i - 1] + t * (x_[i] - x_[i - 1]);
  }

  /// Table CDF at x (linear interpolation), for diagnostics.
  double cdf(double x) const {
    if (x <= x_.front()) return 0.0;
    if (x >= x_.back()) return 1.0;
    const auto it = std::upper_bound(x_.begin(), x_.end(), x);
    const std::size_t i = static_cast<std::size_t>(it - x_.begin());
    const double t = (x - x_[i - 1]) / (x_[i] - x_[i - 1]);
    return cdf_[i - 1] + t * (cdf_[i] - cdf_[i - 1]);
  }

  int n() const { return n_; }

 private:
  int n_;
  std::vector<double> x_;
  std::vector<double> cdf_;
};

namespace detail {

/// A non-mixture component with its cumulative selection weight.
struct Leaf {
  double cumulative = 0.0;
  const StateModel* state = nullptr;
  std::shared_ptr<FockSampler> fock;
};

inline void flatten(const StateModel& s, double weight, std::vector<Leaf>& out,
                    std::map<int, std::shared_ptr<FockSampler>>& tables) {
  if (const auto* mix = s.get_if<states::Mixture>()) {
    for (std::size_t i = 0; i < mix->components.size(); ++i) {
      flatten(mix->components[i], weight * mix->weights[i], out, tables);
    }
    return;
  }
  if (s.get_if<states::PhotonAddedThermal>() != nullptr) {
    throw Error(ErrorKind::unsupported_state,
                "the simulator cannot sample photon-added thermal states");
  }
  Leaf leaf{weight, &s, nullptr};
  if (const auto* f = s.get_if<states::Fock>()) {
    auto& t = tables[f->n];
    if (!t) t = std::make_shared<FockSampler>(f->n);
    leaf.fock = t;
  }
  if (weight > 0.0) out.push_back(leaf);
}

struct GaussianLaw {
  double mean = 0.0;
  double variance = 1.0;
};

/// Ideal phase-conditional quadrature law of a Gaussian leaf.
inline GaussianLaw gaussian_law(const StateModel& s, double phi) {
  if (const auto* c = s.get_if<states::Coherent>()) {
    return {2.0 * (c->alpha * std::polar(1.0, phi)).real(), 1.0};
  }
  if (const auto* t = s.get_if<states::Thermal>()) return {0.0, 1.0 + 2.0 * t->nbar};
  const auto& q = *s.get_if<states::SqueezedVacuum>();
  const double c = std::cos(phi - q.theta);
  const double sn = std::sin(phi - q.theta);
  return {0.0, q.vmax * c * c + q.vmin * sn * sn};
}

inline double phase_at(const PhaseMode& mode, std::size_t index, std::mt19937_64& rng) {
  double phi = 0.0;
  if (const auto* sweep = std::get_if<TriangularSweep>(&mode)) {
    const double p = static_cast<double>(index % sweep->period) /
                     static_cast<double>(sweep->period);
    phi = std::numbers::pi * (p < 0.5 ? 2.0 * p : 2.0 * (1.0 - p));
  } else {
    const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
    phi = std::numbers::pi * u;
  }
  if (phi >= std::numbers::pi) phi = 0.0;
  return phi;
}

}  // namespace detail

/// Quadrature variance the detector sees for an ideal variance v.
inline double detected_variance(double v, double efficiency) {
  return efficiency * v + (1.0 - efficiency);
}

inline QuadratureDataset generate(const SimConfig& config) {
  config.validate();
  std::vector<detail::Leaf> leaves;
  std::map<int, std::shared_ptr<FockSampler>> tables;
  detail::flatten(config.state, 1.0, leaves, tables);
  double acc = 0.0;
  for (auto& l : leaves) {
    acc += l.cumulative;
    l.cumulative = acc;
  }
  const double eta = config.efficiency;
  const double gain = std::sqrt(eta);
  const double noise = std::sqrt(1.0 - eta);

  std::vector<QuadratureRecord> records(config.samples);
  const std::size_t blocks = (config.samples + kRecordsPerStream - 1) / kRecordsPerStream;
  for (std::size_t b = 0; b < blocks; ++b) {
    auto rng = block_stream(config.seed, b);
    std::normal_distribution<double> normal(0.0, 1.0);
    const std::size_t lo = b * kRecordsPerStream;
    const std::size_t hi = std::min(config.samples, lo + kRecordsPerStream);
    for (std::size_t j = lo; j < hi; ++j) {
      const double phi = detail::phase_at(config.phase_mode, j, rng);
      const detail::Leaf* leaf = &leaves.front();
      if (leaves.size() > 1) {
        const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53 * acc;
        for (const auto& l : leaves) {
          leaf = &l;
          if (u < l.cumulative) break;
        }
      }
      double x = 0.0;
      if (leaf->fock) {
        const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
        x = gain * leaf->fock->quantile(u);
        if (noise > 0.0) x += noise * normal(rng);
      } else {
        const auto law = detail::gaussian_law(*leaf->state, phi);
        x = gain * law.mean +
            std::sqrt(detected_variance(law.variance, eta)) * normal(rng);
      }
      records[j] = {x, phi};
    }
  }
  return QuadratureDataset(std::move(records));
}

// ---------------------------------------------------------------------------
// Dataset files

inline constexpr std::string_view kDatasetHeader = "x,phi";

inline void write_dataset(const QuadratureDataset& data, const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::io, "cannot open '" + path + "' for writing");
  out << kDatasetHeader << '\n';
  char buf[64];
  for (const auto& r : data.records()) {
    const int len = std::snprintf(buf, sizeof buf, "%.17g,%.17g\n", r.x, r.phi);
    out.write(buf, len);
  }
  out.flush();
  if (!out) throw Error(ErrorKind::io, "write to '" + path + "' failed");
}

struct ReadResult {
  QuadratureDataset data;
  /// Records whose phase was folded into [0, pi).
  std::size_t normalized_phases = 0;
};

namespace detail {

inline double parse_field(std::string_view s, std::size_t line) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size() || s.empty()) {
    throw ParseError("malformed number '" + std::string(s) + "'", line);
  }
  if (!std::isfinite(v)) throw ParseError("non-finite value", line);
  return v;
}

}  // namespace detail

/// Parses the dataset format. A phase outside [0, pi) is folded as
/// (x, phi) -> ((-1)^k x, phi - k pi), which describes the same measurement.
inline ReadResult read_dataset_stream(std::istream& in) {
  std::string line;
  std::size_t lineno = 1;
  if (!std::getline(in, line)) throw ParseError("missing header", lineno);
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != kDatasetHeader) {
    throw ParseError("expected header '" + std::string(kDatasetHeader) + "'", lineno);
  }
  std::vector<QuadratureRecord> records;
  std::size_t folded = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line == "\r") continue;
    const auto comma = line.find(',');
    if (comma == std::string::npos || line.find(',', comma + 1) != std::string::npos) {
      throw ParseError("expected two comma-separated fields", lineno);
    }
    const std::string_view view(line);
    double x = detail::parse_field(view.substr(0, comma), lineno);
    double phi = detail::parse_field(view.substr(comma + 1), lineno);
    if (!(phi >= 0.0 && phi < std::numbers::pi)) {
      double k = std::floor(phi / std::numbers::pi);
      phi -= k * std::numbers::pi;
      if (phi >= std::numbers::pi) {
        phi -= std::numbers::pi;
        k += 1.0;
      }
      if (phi < 0.0) {
        phi += std::numbers::pi;
        k -= 1.0;
      }
      if (std::fmod(std::abs(k), 2.0) == 1.0) x = -x;
      ++folded;
    }
    records.push_back({x, phi});
  }
  if (records.empty()) {
    throw Error(ErrorKind::insufficient_data, "dataset holds no records");
  }
  return {QuadratureDataset(std::move(records)), folded};
}

inline ReadResult read_dataset(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::io, "cannot open '" + path + "' for reading");
  return read_dataset_stream(in);
}

/// FNV-1a 64-bit digest of a file, as 16 hex digits.
inline std::string file_checksum(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::io, "cannot open '" + path + "' for checksum");
  std::uint64_t h = 0xcbf29ce484222325ULL;
  char buf[1 << 16];
  while (in) {
    in.read(buf, sizeof buf);
    for (std::streamsize i = 0; i < in.gcount(); ++i) {
      h ^= static_cast<unsigned char>(buf[i]);
      h *= 0x100000001b3ULL;
    }
  }
  char hex[17];
  std::snprintf(hex, sizeof hex, "%016llx", static_cast<unsigned long long>(h));
  return hex;
}

}  // namespace qbochner::bhdsim
