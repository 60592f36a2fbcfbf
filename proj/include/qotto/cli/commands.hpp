// commands.hpp: the experiments behind the command-line tool. Each command
// turns a Config into a Dataset plus a manifest that records every resolved
// parameter, so a run can be repeated bit for bit.
#pragma once

#include <nlohmann/json.hpp>

#include <cmath>
#include <cstdint>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "../apt.hpp"
#include "../otto.hpp"
#include "../parallel.hpp"
#include "../piston.hpp"
#include "config.hpp"
#include "dataset.hpp"

#ifndef QOTTO_VERSION
#define QOTTO_VERSION "unversioned"
#endif

namespace qotto::cli {

inline constexpr const char* kLibraryVersion = QOTTO_VERSION;

struct RunConfig {
  std::string experiment;
  std::string out;
  Format format = Format::csv;
  std::optional<std::uint64_t> seed;
  std::size_t threads = 1;

  std::string output_path() const {
    return out.empty() ? experiment + "." + format_extension(format) : out;
  }
  std::string manifest_path() const { return output_path() + ".manifest.json"; }
};

struct CommandResult {
  RunConfig run;
  Dataset data;
  nlohmann::json manifest;
  // False when a built-in numerical check on the output failed.
  bool checks_passed = true;
  std::string failure;
};

namespace detail {

inline const std::set<std::string> kCommonKeys = {"out", "format", "seed", "threads"};

inline std::set<std::string> with_common(std::set<std::string> keys) {
  keys.insert(kCommonKeys.begin(), kCommonKeys.end());
  return keys;
}

inline RunConfig common(const Config& c, const std::string& experiment) {
  RunConfig r;
  r.experiment = experiment;
  r.out = c.get_string("out", "");
  try {
    r.format = parse_format(c.get_string("format", "csv"));
  } catch (const std::invalid_argument& e) {
    throw config_error(c.origin("format"), "format", e.what());
  }
  r.seed = c.find_u64("seed");
  const std::uint64_t threads = c.get_u64("threads", 1);
  if (threads == 0 || threads > 1024) throw config_error(c.origin("threads"), "threads", "must lie in [1, 1024]");
  r.threads = static_cast<std::size_t>(threads);
  return r;
}

inline double positive(const Config& c, const std::string& key, double fallback) {
  const double v = c.get_double(key, fallback);
  if (!(v > 0.0) || !std::isfinite(v)) throw config_error(c.origin(key), key, "must be positive and finite");
  return v;
}

inline std::size_t grid_count(const Config& c, const std::string& key, std::size_t fallback) {
  const std::uint64_t v = c.get_u64(key, fallback);
  if (v < 2) throw config_error(c.origin(key), key, "sweep grids need at least 2 points");
  if (v > 100'000'000) throw config_error(c.origin(key), key, "grid too large");
  return static_cast<std::size_t>(v);
}

inline std::vector<double> linspace(double a, double b, std::size_t n) {
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i)
    out[i] = (i + 1 == n) ? b : a + (b - a) * static_cast<double>(i) / static_cast<double>(n - 1);
  return out;
}

inline nlohmann::json base_manifest(const RunConfig& r, const Config& c) {
  nlohmann::json m;
  m["command"] = r.experiment;
  m["library_version"] = kLibraryVersion;
  m["output"] = r.output_path();
  m["format"] = format_extension(r.format);
  m["seed"] = r.seed ? nlohmann::json(*r.seed) : nlohmann::json(nullptr);
  m["threads"] = r.threads;
  nlohmann::json given = nlohmann::json::object();
  for (const auto& [key, entry] : c.entries()) given[key] = {{"value", entry.value}, {"origin", entry.origin}};
  m["config_entries"] = given;
  return m;
}

inline void finish(CommandResult& res) {
  res.manifest["columns"] = res.data.columns;
  res.manifest["rows"] = res.data.rows.size();
  res.manifest["checks_passed"] = res.checks_passed;
  if (!res.checks_passed) res.manifest["failure"] = res.failure;
}

}  // namespace detail

// ---------------------------------------------------------------- scaling

// Extra work of one piston stroke against tau: exact solver, first-order
// mean and oscillating parts. One row per (temperature, tau).
inline CommandResult cmd_scaling(const Config& c) {
  c.require_known(detail::with_common({"mass", "L0", "L1", "temperatures", "betas", "tau_min", "tau_max",
                                       "tau_count", "exact", "oscillating", "band", "tail_tolerance"}));
  CommandResult res;
  res.run = detail::common(c, "scaling");

  piston::PistonProtocol base;
  base.mass = detail::positive(c, "mass", 1.0);
  base.L0 = detail::positive(c, "L0", 1.0);
  base.L1 = detail::positive(c, "L1", 2.0);
  if (base.L0 == base.L1) throw config_error(c.origin("L1"), "L1", "must differ from L0");

  if (c.has("temperatures") && c.has("betas")) {
    throw config_error(c.origin("betas"), "betas", "give either temperatures or betas, not both");
  }
  std::vector<double> temps;
  if (c.has("betas")) {
    for (double b : c.get_list("betas", {})) {
      if (!(b > 0.0)) throw config_error(c.origin("betas"), "betas", "inverse temperatures must be positive");
      temps.push_back(1.0 / b);
    }
  } else {
    temps = c.get_list("temperatures", {1.0, 50.0, 100.0});
    for (double t : temps)
      if (!(t > 0.0) || !std::isfinite(t)) {
        throw config_error(c.origin("temperatures"), "temperatures", "temperatures must be positive");
      }
  }
  const double tau_min = detail::positive(c, "tau_min", 5.0);
  const double tau_max = detail::positive(c, "tau_max", 50.0);
  if (!(tau_max > tau_min)) throw config_error(c.origin("tau_max"), "tau_max", "must exceed tau_min");
  const std::size_t tau_count = detail::grid_count(c, "tau_count", 451);
  const bool exact = c.get_bool("exact", true);
  const bool oscillating = c.get_bool("oscillating", true);
  const std::uint64_t band = c.get_u64("band", 40);
  if (band == 0) throw config_error(c.origin("band"), "band", "must be at least 1");
  const double tail = detail::positive(c, "tail_tolerance", 1e-12);

  const AptOptions apt{static_cast<std::size_t>(band), kGapFloor};
  const ThermalOptions thermal{tail};
  const std::vector<double> taus = detail::linspace(tau_min, tau_max, tau_count);

  struct PerTemperature {
    ThermalEnsemble exact_ensemble;
    std::optional<FirstOrderModel> model;
  };
  std::vector<PerTemperature> per(temps.size());
  nlohmann::json temp_info = nlohmann::json::array();
  for (std::size_t i = 0; i < temps.size(); ++i) {
    const double beta = 1.0 / temps[i];
    const std::size_t n_th = piston::thermal_level_count(base, beta, tail);
    per[i].exact_ensemble = piston::thermal_ensemble(base, beta, n_th, thermal);
    const piston::PistonSystem sys(base, n_th + apt.band);
    per[i].model.emplace(sys, thermal_populations(sys, beta, thermal), apt);
    temp_info.push_back({{"T", temps[i]},
                         {"beta", beta},
                         {"thermal_levels", n_th},
                         {"sigma_first_order", per[i].model->sigma()},
                         {"sigma_closed_form", piston::sigma_exact(base, per[i].exact_ensemble)},
                         {"sigma_high_temperature", piston::sigma_high_temperature(base)}});
  }

  const std::size_t n_rows = temps.size() * taus.size();
  std::vector<std::vector<Cell>> rows(n_rows);
  std::vector<double> truncation(n_rows, 0.0);
  parallel_for(n_rows, res.run.threads, [&](std::size_t k) {
    const std::size_t it = k / taus.size();
    const double tau = taus[k % taus.size()];
    const ExtraWorkReport rep = per[it].model->report(tau, oscillating);
    double w_exact = std::nan("");
    if (exact) {
      piston::PistonProtocol p = base;
      p.tau = tau;
      const auto cw = piston::exact_extra_work_extrapolated(p, per[it].exact_ensemble);
      w_exact = cw.work.extra_work;
      truncation[k] = cw.truncation_estimate;
    }
    const double w_osc = oscillating ? rep.oscillating_part : std::nan("");
    rows[k] = {temps[it], tau, w_exact, rep.mean_part, w_osc, rep.total, tau * tau * w_exact};
  });

  res.data.columns = {"T", "tau", "W_ex_exact", "W_mean", "W_osc", "W_firstorder_total", "tau2_times_W_ex"};
  res.data.rows = std::move(rows);

  auto& m = res.manifest = detail::base_manifest(res.run, c);
  m["parameters"] = {{"mass", base.mass},       {"L0", base.L0},         {"L1", base.L1},
                     {"temperatures", temps},   {"tau_min", tau_min},    {"tau_max", tau_max},
                     {"tau_count", tau_count},  {"exact", exact},        {"oscillating", oscillating},
                     {"band", band},            {"tail_tolerance", tail}};
  const piston::ExactOptions eo;
  m["tolerances"] = {{"gap_floor", kGapFloor},
                     {"phase_tolerance", kPhaseTolerance},
                     {"tail_tolerance", tail},
                     {"exact_nodes_per_oscillation", eo.nodes_per_oscillation},
                     {"exact_completeness_tolerance", eo.completeness_tolerance},
                     {"exact_min_levels", eo.min_levels}};
  double worst = 0.0;
  for (double t : truncation) worst = std::max(worst, t);
  m["results"] = {{"temperatures", temp_info}, {"max_exact_truncation_estimate", worst}};
  detail::finish(res);
  return res;
}

// ------------------------------------------------------------- emp-curves

inline CommandResult cmd_emp_curves(const Config& c) {
  c.require_known(detail::with_common({"thetas", "eta_c_min", "eta_c_max", "eta_c_count"}));
  CommandResult res;
  res.run = detail::common(c, "emp-curves");
  const std::vector<double> thetas = c.get_list("thetas", {0.5, 1.0});
  for (double t : thetas)
    if (!(t >= 0.0 && t <= 1.0)) throw config_error(c.origin("thetas"), "thetas", "theta must lie in [0, 1]");
  const double lo = c.get_double("eta_c_min", 0.0);
  const double hi = c.get_double("eta_c_max", 0.99);
  if (!(lo >= 0.0 && hi < 1.0 && hi > lo)) {
    throw config_error(c.origin("eta_c_max"), "eta_c_max", "need 0 <= eta_c_min < eta_c_max < 1");
  }
  const std::size_t count = detail::grid_count(c, "eta_c_count", 100);
  const std::vector<double> grid = detail::linspace(lo, hi, count);

  res.data.columns = {"eta_C", "theta", "emp_upper", "emp_lower", "eta_CL_plus", "eta_CL_minus", "surpass_flag"};
  nlohmann::json summary = nlohmann::json::array();
  for (double theta : thetas) {
    std::size_t surpass = 0, upper_above = 0;
    for (double eta_c : grid) {
      const auto b = otto::bound_suite(eta_c, theta);
      surpass += b.surpass;
      upper_above += b.emp_plus > b.cl_plus;
      res.data.add({eta_c, theta, b.emp_plus, b.emp_minus, b.cl_plus, b.cl_minus, b.surpass});
    }
    summary.push_back({{"theta", theta}, {"surpass_points", surpass}, {"emp_upper_above_cl_plus", upper_above}});
  }
  auto& m = res.manifest = detail::base_manifest(res.run, c);
  m["parameters"] = {{"thetas", thetas}, {"eta_c_min", lo}, {"eta_c_max", hi}, {"eta_c_count", count}};
  m["tolerances"] = nlohmann::json::object();
  m["results"] = {{"per_theta", summary}};
  detail::finish(res);
  return res;
}

// ------------------------------------------------------------- piston-emp

inline CommandResult cmd_piston_emp(const Config& c) {
  c.require_known(detail::with_common({"tc_over_th", "Th", "Tc", "r_min", "r_max", "r_count"}));
  CommandResult res;
  res.run = detail::common(c, "piston-emp");
  double ratio = 0.5;
  if (c.has("Th") || c.has("Tc")) {
    if (c.has("tc_over_th")) throw config_error(c.origin("tc_over_th"), "tc_over_th", "give Th/Tc or tc_over_th");
    const double th = detail::positive(c, "Th", 100.0);
    const double tc = detail::positive(c, "Tc", 50.0);
    ratio = tc / th;
  } else {
    ratio = c.get_double("tc_over_th", 0.5);
  }
  if (!(ratio > 0.0 && ratio < 1.0)) throw config_error(c.origin("tc_over_th"), "tc_over_th", "Tc/Th must lie in (0, 1)");
  const double r_min = c.get_double("r_min", 0.5);
  const double r_max = c.get_double("r_max", 0.999);
  if (!(r_min > 0.0 && r_max < 1.0 && r_max > r_min)) {
    throw config_error(c.origin("r_max"), "r_max", "need 0 < r_min < r_max < 1");
  }
  const std::size_t count = detail::grid_count(c, "r_count", 500);
  const double eta_cl = otto::carnot_like_upper(1.0 - ratio);
  const double boundary = otto::piston_positive_power_boundary(ratio);

  res.data.columns = {"r", "eta_EMP_piston", "eta_CL_plus", "region"};
  for (double r : detail::linspace(r_min, r_max, count)) {
    const double e = otto::piston_emp(r);
    const char* region = otto::piston_quasistatic_work(1.0, ratio, r) <= 0.0 ? "negative_power"
                         : e > eta_cl                                         ? "above_CL"
                                                                              : "below_CL";
    res.data.add({r, e, eta_cl, std::string(region)});
  }
  const auto crossing = otto::piston_crossing_ratio(ratio);
  auto& m = res.manifest = detail::base_manifest(res.run, c);
  m["parameters"] = {{"tc_over_th", ratio}, {"r_min", r_min}, {"r_max", r_max}, {"r_count", count}};
  m["tolerances"] = {{"bisection_width", 1e-12}};
  nlohmann::json results = {{"eta_CL_plus", eta_cl},
                            {"positive_power_boundary", boundary},
                            {"positive_power_boundary_closed_form", std::sqrt(ratio)}};
  if (crossing) {
    results["r_star"] = crossing->root;
    results["r_star_residual"] = crossing->residual;
    results["r_star_iterations"] = crossing->iterations;
  } else {
    results["r_star"] = nullptr;
  }
  m["results"] = results;
  detail::finish(res);
  return res;
}

// ------------------------------------------------------------------ cloud

inline CommandResult cmd_cloud(const Config& c) {
  c.require_known(detail::with_common({"Th", "Tc", "mass", "L0", "L1", "samples", "tau_min", "tau_max",
                                       "log_uniform", "include_optimum", "exact_sums", "thermal_sigma"}));
  CommandResult res;
  res.run = detail::common(c, "cloud");
  if (!res.run.seed) throw config_error(c.origin("seed"), "seed", "sampling needs an explicit seed");
  const double th = detail::positive(c, "Th", 100.0);
  const double tc = detail::positive(c, "Tc", 20.0);
  const double mass = detail::positive(c, "mass", 1.0);
  const double l0 = detail::positive(c, "L0", 1.0);
  const double l1 = detail::positive(c, "L1", 2.0);
  const std::uint64_t samples = c.get_u64("samples", 600000);
  if (samples == 0) throw config_error(c.origin("samples"), "samples", "must be at least 1");
  const double tau_min = detail::positive(c, "tau_min", 0.05);
  const double tau_max = detail::positive(c, "tau_max", 5.0);
  if (!(tau_max > tau_min)) throw config_error(c.origin("tau_max"), "tau_max", "must exceed tau_min");
  otto::CloudOptions co;
  co.log_uniform = c.get_bool("log_uniform", false);
  co.include_optimum = c.get_bool("include_optimum", false);
  co.threads = res.run.threads;
  otto::PistonCycleOptions po;
  po.exact_sums = c.get_bool("exact_sums", false);
  po.thermal_sigma = c.get_bool("thermal_sigma", false);

  otto::OttoCycleSpec spec;
  try {
    spec = otto::piston_cycle(th, tc, mass, l0, l1, po);
  } catch (const std::exception& e) {
    throw config_error(c.origin("L0"), "L0", e.what());
  }
  const auto cloud = otto::sample_cloud(spec, static_cast<std::size_t>(samples), tau_min, tau_max, *res.run.seed, co);
  const auto t = otto::optimal_times(spec);
  const double pmax = otto::max_power(spec);

  res.data.columns = {"tau1", "tau3", "power", "efficiency"};
  res.data.rows.reserve(cloud.size());
  double best = -std::numeric_limits<double>::infinity();
  std::size_t engines = 0;
  for (const auto& op : cloud) {
    res.data.rows.push_back({op.tau1, op.tau3, op.power, op.efficiency});
    best = std::max(best, op.power);
    engines += op.is_engine();
  }
  const bool dominated = best <= pmax * (1.0 + 1e-9);
  if (!dominated) {
    res.checks_passed = false;
    res.failure = "sampled power exceeds the analytic maximum";
  }
  auto& m = res.manifest = detail::base_manifest(res.run, c);
  m["parameters"] = {{"Th", th},
                     {"Tc", tc},
                     {"mass", mass},
                     {"L0", l0},
                     {"L1", l1},
                     {"samples", samples},
                     {"tau_min", tau_min},
                     {"tau_max", tau_max},
                     {"log_uniform", co.log_uniform},
                     {"include_optimum", co.include_optimum},
                     {"exact_sums", po.exact_sums},
                     {"thermal_sigma", po.thermal_sigma}};
  m["tolerances"] = {{"dominance_relative", 1e-9}};
  // Analytic entries depend only on the cycle, never on the seed.
  m["results"] = {{"analytic",
                   {{"W_T_adi", spec.W_T_adi},
                    {"Q_h_adi", spec.Q_h_adi},
                    {"eta_adi", spec.eta_adi},
                    {"Sigma1", spec.Sigma1},
                    {"Sigma3", spec.Sigma3},
                    {"tau1_star", t.tau1},
                    {"tau3_star", t.tau3},
                    {"P_max", pmax},
                    {"eta_EMP", otto::emp(spec)},
                    {"de_broglie_over_length", otto::piston_high_temperature_diagnostic(th, tc, mass, l0, l1)}}},
                  {"sampled",
                   {{"max_power", best},
                    {"engine_fraction", static_cast<double>(engines) / static_cast<double>(cloud.size())},
                    {"dominance_ok", dominated}}}};
  detail::finish(res);
  return res;
}

// --------------------------------------------------------------- dispatch

inline const std::vector<std::string>& command_names() {
  static const std::vector<std::string> names = {"scaling", "emp-curves", "piston-emp", "cloud"};
  return names;
}

inline CommandResult run_command(const std::string& name, const Config& c) {
  if (name == "scaling") return cmd_scaling(c);
  if (name == "emp-curves") return cmd_emp_curves(c);
  if (name == "piston-emp") return cmd_piston_emp(c);
  if (name == "cloud") return cmd_cloud(c);
  throw config_error("<command line>", "", "unknown command '" + name + "'");
}

// Writes the dataset and its manifest next to it.
inline void write_outputs(const CommandResult& res) {
  std::ostringstream data;
  write_dataset(data, res.data, res.run.format);
  try {
    write_file(res.run.output_path(), data.str());
    write_file(res.run.manifest_path(), res.manifest.dump(2) + "\n");
  } catch (const std::runtime_error& e) {
    throw config_error("--out", "out", e.what());
  }
}

}  // namespace qotto::cli
