#pragma once

// Command-line front end: simulate, eval, scan, moments.
//
// Exit codes: 0 success, 2 usage, 3 I/O, 4 data quality, 5 numerical
// inconsistency.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "qbochner/bhdsim.hpp"
#include "qbochner/error.hpp"
#include "qbochner/estimator.hpp"
#include "qbochner/gbm.hpp"
#include "qbochner/serialization.hpp"
#include "qbochner/states.hpp"

namespace qbochner::cli {

using nlohmann::json;

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitAllPointsFailed = 5;

/// Significance below which scan points are masked for display.
inline constexpr double kDefaultMask = 5.0;

/// Parses "remin:remax:step,immin:immax:step".
inline gbm::Grid parse_grid(const std::string& text) {
  const auto comma = text.find(',');
  if (comma == std::string::npos) {
    throw Error(ErrorKind::configuration, "grid must be remin:remax:step,immin:immax:step");
  }
  auto axis = [&](const std::string& part, double& lo, double& hi, double& step) {
    std::vector<double> v;
    std::stringstream ss(part);
    std::string item;
    while (std::getline(ss, item, ':')) {
      try {
        std::size_t used = 0;
        v.push_back(std::stod(item, &used));
        if (used != item.size()) throw std::invalid_argument(item);
      } catch (const std::exception&) {
        throw Error(ErrorKind::configuration, "grid: bad number '" + item + "'");
      }
    }
    if (v.size() != 3) throw Error(ErrorKind::configuration, "grid: each axis needs min:max:step");
    lo = v[0];
    hi = v[1];
    step = v[2];
  };
  gbm::Grid g;
  axis(text.substr(0, comma), g.re_min, g.re_max, g.re_step);
  axis(text.substr(comma + 1), g.im_min, g.im_max, g.im_step);
  g.validate();
  return g;
}

namespace detail {

struct SourceOptions {
  std::string state;
  std::string data;
  std::string preset;
  std::string spec;
  std::string cov = "full";
  unsigned threads = 0;
  bool reproducible = false;
};

inline void add_source_options(CLI::App* cmd, SourceOptions& o) {
  cmd->add_option("--state", o.state, "State JSON (or @file)");
  cmd->add_option("--data", o.data, "Dataset file");
  cmd->add_option("--preset", o.preset, "Preset name, optionally name(re,im)");
  cmd->add_option("--spec", o.spec, "GbmSpec JSON (or @file)");
  cmd->add_option("--cov", o.cov, "Covariance mode for data: full|diagonal")
      ->check(CLI::IsMember({"full", "diagonal"}));
  cmd->add_option("--threads", o.threads, "Worker threads (0 = all cores)");
  cmd->add_flag("--reproducible", o.reproducible, "Single-threaded deterministic run");
}

inline void require_one(const std::string& a, const std::string& b, const char* what) {
  if (a.empty() == b.empty()) {
    throw Error(ErrorKind::configuration, std::string("give exactly one of ") + what);
  }
}

/// Criterion family: a preset, or a spec whose betas move with the scan
/// point according to the optional "scan" coefficients.
struct Criterion {
  json description;
  gbm::GbmFamily family;
  Complex beta;  // preset argument for single evaluations
};

inline Criterion make_criterion(const SourceOptions& o) {
  require_one(o.preset, o.spec, "--preset or --spec");
  Criterion c;
  if (!o.preset.empty()) {
    const auto ref = gbm::parse_preset(o.preset);
    c.description = {{"preset", ref.name}, {"beta", serialization::complex_to_json(ref.beta)}};
    c.family = gbm::preset_family(ref.name);
    c.beta = ref.beta;
    return c;
  }
  const json j = serialization::parse_json_argument(o.spec);
  c.description = j;
  if (j.contains("preset")) {
    const std::string name = j.at("preset").get<std::string>();
    c.family = gbm::preset_family(name);
    c.beta = j.contains("beta") ? serialization::complex_from_json(j.at("beta")) : Complex{};
    return c;
  }
  const gbm::GbmSpec base = serialization::spec_from_json(j);
  std::vector<double> coeff(base.size(), 0.0);
  if (j.contains("scan")) {
    coeff = j.at("scan").get<std::vector<double>>();
    if (coeff.size() != base.size()) {
      throw Error(ErrorKind::configuration, "spec: 'scan' must have length N");
    }
  }
  c.family = [base, coeff](Complex beta) {
    gbm::GbmSpec s = base;
    for (std::size_t i = 0; i < s.size(); ++i) s.betas[i] += coeff[i] * beta;
    return s;
  };
  return c;
}

struct LoadedData {
  estimator::QuadratureDataset data;
  std::string checksum;
  std::size_t normalized_phases = 0;
};

inline LoadedData load_data(const std::string& path) {
  auto r = bhdsim::read_dataset(path);
  return {std::move(r.data), bhdsim::file_checksum(path), r.normalized_phases};
}

inline estimator::EstimatorOptions estimator_options(const SourceOptions& o) {
  estimator::EstimatorOptions opt;
  opt.threads = o.reproducible ? 1 : o.threads;
  return opt;
}

inline estimator::CovarianceMode cov_mode(const SourceOptions& o) {
  return o.cov == "diagonal" ? estimator::CovarianceMode::diagonal
                             : estimator::CovarianceMode::full;
}

inline json source_description(const SourceOptions& o, const LoadedData* data) {
  json j;
  if (data != nullptr) {
    j = {{"data", o.data},
         {"checksum", data->checksum},
         {"records", data->data.size()},
         {"normalized_phases", data->normalized_phases},
         {"cov", o.cov}};
  } else {
    j = {{"state", serialization::state_to_json(
                       serialization::state_from_json(serialization::parse_json_argument(o.state)))}};
  }
  return j;
}

inline void ensure_parent_exists(const std::string& path) {
  const auto parent = std::filesystem::path(path).parent_path();
  if (!parent.empty() && !std::filesystem::is_directory(parent)) {
    throw Error(ErrorKind::io, "output directory '" + parent.string() + "' does not exist");
  }
}

inline void write_text(const std::string& path, const std::string& text) {
  ensure_parent_exists(path);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::io, "cannot open '" + path + "' for writing");
  out << text;
  if (!out) throw Error(ErrorKind::io, "write to '" + path + "' failed");
}

inline std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::string csv_safe(std::string s) {
  for (char& ch : s) {
    if (ch == ',' || ch == '\n' || ch == '\r' || ch == '"') ch = ' ';
  }
  return s;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Commands

struct SimulateOptions {
  std::string state;
  std::string config;
  std::size_t samples = 100000;
  double efficiency = 1.0;
  std::uint64_t seed = 0;
  std::string phase_mode = "uniform";
  std::size_t period = 10000;
  std::string out;
};

inline int cmd_simulate(const SimulateOptions& o, std::ostream& out) {
  bhdsim::SimConfig config;
  detail::require_one(o.state, o.config, "--state or --config");
  if (!o.config.empty()) {
    config = serialization::sim_config_from_json(serialization::parse_json_argument(o.config));
  } else {
    config.state = serialization::state_from_json(serialization::parse_json_argument(o.state));
    config.samples = o.samples;
    config.efficiency = o.efficiency;
    config.seed = o.seed;
    if (o.phase_mode == "sweep") {
      config.phase_mode = bhdsim::TriangularSweep{o.period};
    } else {
      config.phase_mode = bhdsim::UniformPhase{};
    }
  }
  config.validate();
  detail::ensure_parent_exists(o.out);
  const auto data = bhdsim::generate(config);
  bhdsim::write_dataset(data, o.out);
  const json sidecar{{"command", "simulate"},
                     {"config", serialization::sim_config_to_json(config)},
                     {"output", o.out},
                     {"records", data.size()},
                     {"checksum", bhdsim::file_checksum(o.out)}};
  detail::write_text(o.out + ".json", sidecar.dump(2) + "\n");
  out << sidecar.dump(2) << "\n";
  return kExitOk;
}

inline int cmd_eval(const detail::SourceOptions& o, std::ostream& out) {
  detail::require_one(o.state, o.data, "--state or --data");
  const auto criterion = detail::make_criterion(o);
  const gbm::GbmSpec spec = criterion.family(criterion.beta);
  json result;
  if (!o.state.empty()) {
    const states::AnalyticCf source(
        serialization::state_from_json(serialization::parse_json_argument(o.state)));
    result = serialization::result_to_json(gbm::evaluate(source, spec));
    result["source"] = detail::source_description(o, nullptr);
  } else {
    const auto loaded = detail::load_data(o.data);
    const auto opt = detail::estimator_options(o);
    const auto em = estimator::estimate_gbm(loaded.data, spec, opt);
    result = serialization::result_to_json(estimator::det_with_error(em, detail::cov_mode(o)));
    result["excluded"] = em.excluded;
    result["source"] = detail::source_description(o, &loaded);
  }
  result["criterion"] = criterion.description;
  result["spec"] = serialization::spec_to_json(spec);
  out << result.dump(2) << "\n";
  return kExitOk;
}

struct ScanOptions {
  detail::SourceOptions source;
  std::string grid;
  std::string out;
  double mask = kDefaultMask;
};

inline int cmd_scan(const ScanOptions& o, std::ostream& out) {
  const auto& so = o.source;
  detail::require_one(so.state, so.data, "--state or --data");
  const auto criterion = detail::make_criterion(so);
  const gbm::Grid grid = parse_grid(o.grid);
  detail::ensure_parent_exists(o.out);

  std::vector<gbm::ScanPoint> points;
  json source;
  const unsigned threads = so.reproducible ? 1u : estimator::detail::resolve_threads(so.threads);
  if (!so.state.empty()) {
    const states::AnalyticCf cf(
        serialization::state_from_json(serialization::parse_json_argument(so.state)));
    points = gbm::grid_scan(gbm::analytic_criterion(cf), criterion.family, grid, threads);
    source = detail::source_description(so, nullptr);
  } else {
    const auto loaded = detail::load_data(so.data);
    auto opt = detail::estimator_options(so);
    opt.threads = 1;  // parallel over grid points instead
    const estimator::DatasetSource ds(loaded.data, opt, detail::cov_mode(so));
    points = gbm::grid_scan(ds, criterion.family, grid, threads);
    source = detail::source_description(so, &loaded);
  }

  std::ostringstream csv;
  csv << "re_beta,im_beta,det,sigma,significance,status,masked\n";
  std::size_t failures = 0;
  std::optional<std::size_t> min_det;
  std::optional<ErrorKind> failure_kind;
  for (std::size_t i = 0; i < points.size(); ++i) {
    const auto& p = points[i];
    csv << detail::format_double(p.beta.real()) << ',' << detail::format_double(p.beta.imag())
        << ',';
    if (!p.result) {
      ++failures;
      failure_kind = p.error;
      csv << ",,," << detail::csv_safe("error: " + p.status) << ",0\n";
      continue;
    }
    const auto& r = *p.result;
    csv << detail::format_double(r.det) << ',' << detail::format_double(r.sigma) << ','
        << (r.significance ? detail::format_double(*r.significance) : std::string()) << ",ok,"
        << (r.significance && std::abs(*r.significance) < o.mask ? 1 : 0) << '\n';
    if (!min_det || r.det < points[*min_det].result->det) min_det = i;
  }
  detail::write_text(o.out, csv.str());

  json sidecar{{"command", "scan"},
               {"source", source},
               {"criterion", criterion.description},
               {"grid",
                {{"re", {grid.re_min, grid.re_max, grid.re_step}},
                 {"im", {grid.im_min, grid.im_max, grid.im_step}},
                 {"order", "row-major, re slow"}}},
               {"mask_threshold", o.mask},
               {"points", points.size()},
               {"failures", failures},
               {"output", o.out},
               {"output_checksum", bhdsim::file_checksum(o.out)}};
  detail::write_text(o.out + ".json", sidecar.dump(2) + "\n");

  json summary{{"points", points.size()}, {"failures", failures}, {"output", o.out}};
  if (min_det) {
    const auto& p = points[*min_det];
    summary["min_det"] = serialization::result_to_json(*p.result);
    summary["min_det"]["beta"] = serialization::complex_to_json(p.beta);
  }
  out << summary.dump(2) << "\n";
  if (failures == points.size()) {
    return failure_kind ? exit_code(*failure_kind) : kExitAllPointsFailed;
  }
  return kExitOk;
}

struct MomentsOptions {
  std::string data;
  int max_order = 4;
  std::string out;
  unsigned threads = 0;
  bool reproducible = false;
};

inline int cmd_moments(const MomentsOptions& o, std::ostream& out) {
  if (o.max_order < 0) throw Error(ErrorKind::configuration, "--max-order must be >= 0");
  const auto loaded = detail::load_data(o.data);
  estimator::EstimatorOptions opt;
  opt.threads = o.reproducible ? 1 : o.threads;
  json table = json::array();
  for (int s = 0; s <= o.max_order; ++s) {
    for (int k = s; k >= 0; --k) {
      const int l = s - k;
      const auto e = estimator::sample_moment(loaded.data, k, l, opt);
      json row = serialization::estimate_to_json(e);
      row["k"] = k;
      row["l"] = l;
      table.push_back(row);
    }
  }
  const json doc{{"command", "moments"},
                 {"source",
                  {{"data", o.data},
                   {"checksum", loaded.checksum},
                   {"records", loaded.data.size()},
                   {"normalized_phases", loaded.normalized_phases}}},
                 {"max_order", o.max_order},
                 {"moments", table}};
  if (!o.out.empty()) detail::write_text(o.out, doc.dump(2) + "\n");
  out << doc.dump(2) << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------------------

/// Runs the command line `args` (args[0] is the program name).
inline int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Nonclassicality tests from generalized Bochner matrices", "qbochner"};
  app.require_subcommand(1);

  SimulateOptions sim;
  auto* simulate = app.add_subcommand("simulate", "Generate a synthetic homodyne dataset");
  simulate->add_option("--state", sim.state, "State JSON (or @file)");
  simulate->add_option("--config", sim.config, "Full simulator config JSON (or @file)");
  simulate->add_option("--samples", sim.samples, "Number of records");
  simulate->add_option("--efficiency", sim.efficiency, "Detection efficiency in (0, 1]");
  simulate->add_option("--seed", sim.seed, "RNG seed");
  simulate->add_option("--phase-mode", sim.phase_mode, "uniform|sweep")
      ->check(CLI::IsMember({"uniform", "sweep"}));
  simulate->add_option("--sweep-period", sim.period, "Records per triangular sweep");
  simulate->add_option("--out", sim.out, "Dataset path")->required();

  detail::SourceOptions eval_opt;
  auto* eval = app.add_subcommand("eval", "Evaluate one criterion");
  detail::add_source_options(eval, eval_opt);

  ScanOptions scan_opt;
  auto* scan = app.add_subcommand("scan", "Evaluate a criterion family over a grid");
  detail::add_source_options(scan, scan_opt.source);
  scan->add_option("--grid", scan_opt.grid, "remin:remax:step,immin:immax:step")->required();
  scan->add_option("--out", scan_opt.out, "CSV output path")->required();
  scan->add_option("--mask", scan_opt.mask, "Display mask threshold on |significance|");

  MomentsOptions mom;
  auto* moments = app.add_subcommand("moments", "Estimate normally ordered moments");
  moments->add_option("--data", mom.data, "Dataset file")->required();
  moments->add_option("--max-order", mom.max_order, "Largest k + l");
  moments->add_option("--out", mom.out, "Optional JSON output path");
  moments->add_option("--threads", mom.threads, "Worker threads (0 = all cores)");
  moments->add_flag("--reproducible", mom.reproducible, "Single-threaded deterministic run");

  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (simulate->parsed()) return cmd_simulate(sim, out);
    if (eval->parsed()) return cmd_eval(eval_opt, out);
    if (scan->parsed()) return cmd_scan(scan_opt, out);
    return cmd_moments(mom, out);
  } catch (const Error& e) {
    err << "error (" << to_string(e.kind()) << "): " << e.what() << "\n";
    return exit_code(e.kind());
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace qbochner::cli
