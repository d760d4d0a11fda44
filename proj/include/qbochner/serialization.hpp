#pragma once

// JSON forms of states, criterion specs, simulator configs and results.
//
//   state:  {"type": "coherent", "alpha": [re, im]}
//           {"type": "thermal", "nbar": 0.1}
//           {"type": "fock", "n": 2}
//           {"type": "photon_added_thermal", "k": 3, "nbar": 0.12}
//           {"type": "squeezed_vacuum", "vmin": 0.386, "vmax": 4.083, "theta": 0}
//           {"type": "squeezed_vacuum", "squeezing_db": -4.13, "antisqueezing_db": 6.11}
//           {"type": "mixture", "components": [{"weight": 0.5, "state": {...}}, ...]}
//   spec:   {"n": [..], "m": [..], "betas": [[re, im], ..]}
//           {"preset": "gbm2", "beta": [re, im]}

#include <fstream>
#include <sstream>
#include <string>

#include "json.hpp"

#include "qbochner/bhdsim.hpp"
#include "qbochner/error.hpp"
#include "qbochner/estimator.hpp"
#include "qbochner/gbm.hpp"
#include "qbochner/states.hpp"

namespace qbochner::serialization {

using nlohmann::json;

namespace detail {

template <class T>
T field(const json& j, const char* key) {
  if (!j.contains(key)) {
    throw Error(ErrorKind::configuration, std::string("missing field '") + key + "'");
  }
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw Error(ErrorKind::configuration, std::string("field '") + key + "': " + e.what());
  }
}

template <class T>
T field_or(const json& j, const char* key, T fallback) {
  return j.contains(key) ? field<T>(j, key) : fallback;
}

}  // namespace detail

inline json complex_to_json(Complex z) { return json::array({z.real(), z.imag()}); }

inline Complex complex_from_json(const json& j) {
  if (j.is_number()) return {j.get<double>(), 0.0};
  if (!j.is_array() || j.size() != 2 || !j[0].is_number() || !j[1].is_number()) {
    throw Error(ErrorKind::configuration, "complex value must be [re, im]");
  }
  return {j[0].get<double>(), j[1].get<double>()};
}

inline json state_to_json(const states::StateModel& s) {
  using namespace states;
  return std::visit(
      [](const auto& v) -> json {
        using S = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<S, Coherent>) {
          return {{"type", "coherent"}, {"alpha", complex_to_json(v.alpha)}};
        } else if constexpr (std::is_same_v<S, Thermal>) {
          return {{"type", "thermal"}, {"nbar", v.nbar}};
        } else if constexpr (std::is_same_v<S, Fock>) {
          return {{"type", "fock"}, {"n", v.n}};
        } else if constexpr (std::is_same_v<S, PhotonAddedThermal>) {
          return {{"type", "photon_added_thermal"}, {"k", v.k}, {"nbar", v.nbar}};
        } else if constexpr (std::is_same_v<S, SqueezedVacuum>) {
          return {{"type", "squeezed_vacuum"}, {"vmin", v.vmin}, {"vmax", v.vmax},
                  {"theta", v.theta}};
        } else {
          json comps = json::array();
          for (std::size_t i = 0; i < v.components.size(); ++i) {
            comps.push_back({{"weight", v.weights[i]}, {"state", state_to_json(v.components[i])}});
          }
          return {{"type", "mixture"}, {"components", comps}};
        }
      },
      s.variant());
}

inline states::StateModel state_from_json(const json& j) {
  using states::StateModel;
  if (!j.is_object()) throw Error(ErrorKind::configuration, "state must be a JSON object");
  const auto type = detail::field<std::string>(j, "type");
  if (type == "coherent") return StateModel::coherent(complex_from_json(j.at("alpha")));
  if (type == "thermal") return StateModel::thermal(detail::field<double>(j, "nbar"));
  if (type == "vacuum") return StateModel::vacuum();
  if (type == "fock") return StateModel::fock(detail::field<int>(j, "n"));
  if (type == "photon_added_thermal") {
    return StateModel::photon_added_thermal(detail::field<int>(j, "k"),
                                            detail::field<double>(j, "nbar"));
  }
  if (type == "squeezed_vacuum") {
    const double theta = detail::field_or<double>(j, "theta", 0.0);
    if (j.contains("squeezing_db") || j.contains("antisqueezing_db")) {
      return StateModel::squeezed_vacuum_db(detail::field<double>(j, "squeezing_db"),
                                            detail::field<double>(j, "antisqueezing_db"), theta);
    }
    return StateModel::squeezed_vacuum(detail::field<double>(j, "vmin"),
                                       detail::field<double>(j, "vmax"), theta);
  }
  if (type == "mixture") {
    const auto comps = j.at("components");
    if (!comps.is_array()) throw Error(ErrorKind::configuration, "components must be an array");
    std::vector<double> weights;
    std::vector<StateModel> states;
    for (const auto& c : comps) {
      weights.push_back(detail::field<double>(c, "weight"));
      states.push_back(state_from_json(c.at("state")));
    }
    return StateModel::mixture(std::move(weights), std::move(states));
  }
  throw Error(ErrorKind::configuration, "unknown state type '" + type + "'");
}

inline json spec_to_json(const gbm::GbmSpec& spec) {
  json betas = json::array();
  for (const auto& b : spec.betas) betas.push_back(complex_to_json(b));
  return {{"n", spec.n}, {"m", spec.m}, {"betas", betas}};
}

inline gbm::GbmSpec spec_from_json(const json& j) {
  if (!j.is_object()) throw Error(ErrorKind::configuration, "spec must be a JSON object");
  if (j.contains("preset")) {
    const Complex beta = j.contains("beta") ? complex_from_json(j.at("beta")) : Complex{};
    return gbm::preset(detail::field<std::string>(j, "preset"), beta);
  }
  gbm::GbmSpec spec;
  spec.n = detail::field<std::vector<int>>(j, "n");
  spec.m = detail::field<std::vector<int>>(j, "m");
  for (const auto& b : j.at("betas")) spec.betas.push_back(complex_from_json(b));
  spec.validate();
  return spec;
}

inline json sim_config_to_json(const bhdsim::SimConfig& c) {
  json phase;
  if (const auto* sweep = std::get_if<bhdsim::TriangularSweep>(&c.phase_mode)) {
    phase = {{"type", "triangular_sweep"}, {"period", sweep->period}};
  } else {
    phase = {{"type", "uniform"}};
  }
  return {{"state", state_to_json(c.state)},
          {"efficiency", c.efficiency},
          {"samples", c.samples},
          {"seed", c.seed},
          {"phase_mode", phase}};
}

inline bhdsim::SimConfig sim_config_from_json(const json& j) {
  if (!j.is_object()) throw Error(ErrorKind::configuration, "config must be a JSON object");
  bhdsim::SimConfig c;
  c.state = state_from_json(j.at("state"));
  c.efficiency = detail::field_or<double>(j, "efficiency", 1.0);
  c.samples = detail::field_or<std::size_t>(j, "samples", c.samples);
  c.seed = detail::field_or<std::uint64_t>(j, "seed", 0);
  if (j.contains("phase_mode")) {
    const auto& p = j.at("phase_mode");
    const auto type = detail::field<std::string>(p, "type");
    if (type == "uniform") {
      c.phase_mode = bhdsim::UniformPhase{};
    } else if (type == "triangular_sweep") {
      c.phase_mode = bhdsim::TriangularSweep{detail::field_or<std::size_t>(p, "period", 10000)};
    } else {
      throw Error(ErrorKind::configuration, "unknown phase mode '" + type + "'");
    }
  }
  c.validate();
  return c;
}

inline json result_to_json(const gbm::CriterionResult& r) {
  json j{{"det", r.det}, {"sigma", r.sigma}};
  j["significance"] = r.significance ? json(*r.significance) : json(nullptr);
  return j;
}

inline json estimate_to_json(const estimator::ComplexEstimate& e) {
  return {{"value", complex_to_json(e.value)},
          {"std_error", {e.std_re(), e.std_im()}},
          {"cov", e.cov}};
}

/// Parses `text` as JSON, or reads the file it names when prefixed by '@'.
inline json parse_json_argument(const std::string& text) {
  std::string body = text;
  if (!text.empty() && text.front() == '@') {
    std::ifstream in(text.substr(1));
    if (!in) throw Error(ErrorKind::io, "cannot open '" + text.substr(1) + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    body = ss.str();
  }
  try {
    return json::parse(body);
  } catch (const json::parse_error& e) {
    throw Error(ErrorKind::configuration, std::string("invalid JSON: ") + e.what());
  }
}

}  // namespace qbochner::serialization
