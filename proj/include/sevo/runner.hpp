#pragma once

#include <charconv>
#include <filesystem>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "sevo/csv.hpp"
#include "sevo/ldp.hpp"
#include "sevo/manifest.hpp"

namespace sevo {

/// Anything wrong with the configuration or its surroundings (unreadable
/// file, malformed text, unknown ids, unwritable output directory). The CLI
/// maps it to the usage exit status, distinct from verification failures.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

using KeyValues = std::map<std::string, std::string>;

/// Parsed "sevo-ini/1" configuration: four fixed sections of key = value
/// lines, full-line # comments, no implicit defaults for model id, grid,
/// experiment type, or seed.
struct RunConfig {
  KeyValues model, grid, experiment, run;
  std::string raw_text;
};

namespace detail {

inline std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

inline const std::string& require_key(const KeyValues& kv, const std::string& key,
                                      const std::string& section) {
  const auto it = kv.find(key);
  if (it == kv.end()) throw ConfigError("missing required key '" + key + "' in [" + section + "]");
  return it->second;
}

inline std::string get_or(const KeyValues& kv, const std::string& key, std::string fallback) {
  const auto it = kv.find(key);
  return it == kv.end() ? fallback : it->second;
}

inline double to_double(const std::string& v, const std::string& where) {
  try {
    return csv_parse_double(v);
  } catch (const std::invalid_argument&) {
    throw ConfigError(where + ": expected a number, got '" + v + "'");
  }
}

inline long long to_int(const std::string& v, const std::string& where) {
  long long out = 0;
  const auto res = std::from_chars(v.data(), v.data() + v.size(), out);
  if (res.ec != std::errc{} || res.ptr != v.data() + v.size())
    throw ConfigError(where + ": expected an integer, got '" + v + "'");
  return out;
}

inline std::uint64_t to_seed(const std::string& v, const std::string& where) {
  std::uint64_t out = 0;
  const auto res = std::from_chars(v.data(), v.data() + v.size(), out);
  if (res.ec != std::errc{} || res.ptr != v.data() + v.size())
    throw ConfigError(where + ": expected a non-negative integer seed, got '" + v + "'");
  return out;
}

inline std::vector<double> to_list(const std::string& v, const std::string& where) {
  std::vector<double> out;
  std::size_t pos = 0;
  while (pos <= v.size()) {
    const std::size_t comma = v.find(',', pos);
    const std::string item = trim(std::string_view(v).substr(
        pos, comma == std::string::npos ? std::string::npos : comma - pos));
    if (item.empty()) throw ConfigError(where + ": empty list entry");
    out.push_back(to_double(item, where));
    if (comma == std::string::npos) break;
    pos = comma + 1;
  }
  if (out.empty()) throw ConfigError(where + ": empty list");
  return out;
}

inline void check_keys(const KeyValues& kv, const std::set<std::string>& allowed,
                       const std::string& section) {
  for (const auto& [key, value] : kv)
    if (!allowed.count(key))
      throw ConfigError("unknown key '" + key + "' in [" + section + "]");
}

}  // namespace detail

inline RunConfig parse_run_config(const std::string& text) {
  RunConfig cfg;
  cfg.raw_text = text;
  std::map<std::string, KeyValues*> sections{{"model", &cfg.model},
                                             {"grid", &cfg.grid},
                                             {"experiment", &cfg.experiment},
                                             {"run", &cfg.run}};
  KeyValues* current = nullptr;
  std::istringstream in(text);
  std::string raw;
  int line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    const std::string line = detail::trim(raw);
    if (line.empty() || line[0] == '#') continue;
    const std::string where = "line " + std::to_string(line_no);
    if (line.front() == '[') {
      if (line.back() != ']') throw ConfigError(where + ": unterminated section header");
      const std::string name = detail::trim(std::string_view(line).substr(1, line.size() - 2));
      const auto it = sections.find(name);
      if (it == sections.end()) throw ConfigError(where + ": unknown section [" + name + "]");
      current = it->second;
      continue;
    }
    const std::size_t eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError(where + ": expected key = value");
    if (current == nullptr) throw ConfigError(where + ": key outside any section");
    const std::string key = detail::trim(std::string_view(line).substr(0, eq));
    const std::string value = detail::trim(std::string_view(line).substr(eq + 1));
    if (key.empty()) throw ConfigError(where + ": empty key");
    if (!current->emplace(key, value).second)
      throw ConfigError(where + ": duplicate key '" + key + "'");
  }
  return cfg;
}

inline RunConfig load_run_config(const std::string& path) {
  std::string text;
  try {
    text = read_file_bytes(path);
  } catch (const std::runtime_error& e) {
    throw ConfigError(e.what());
  }
  return parse_run_config(text);
}

namespace detail {

inline EquationModel build_model(const RunConfig& cfg) {
  const std::string id = require_key(cfg.model, "id", "model");
  auto sigma_of = [&](std::vector<double> fallback) {
    const auto it = cfg.model.find("sigma");
    return it == cfg.model.end() ? fallback : to_list(it->second, "[model] sigma");
  };
  if (id == "heat") {
    check_keys(cfg.model, {"id", "lambda", "mu", "sigma", "n_modes", "length"}, "model");
    return heat_model(to_double(get_or(cfg.model, "lambda", "0.5"), "[model] lambda"),
                      to_double(get_or(cfg.model, "mu", "0.3"), "[model] mu"),
                      sigma_of({0.4, 0.2}),
                      static_cast<int>(to_int(get_or(cfg.model, "n_modes", "32"), "[model] n_modes")),
                      to_double(get_or(cfg.model, "length", "1"), "[model] length"));
  }
  if (id == "hyperbolic") {
    check_keys(cfg.model, {"id", "a", "b", "lambda", "mu", "sigma", "n_pairs", "length"}, "model");
    return hyperbolic_model(to_double(get_or(cfg.model, "a", "1"), "[model] a"),
                            to_double(get_or(cfg.model, "b", "-0.1"), "[model] b"),
                            to_double(get_or(cfg.model, "lambda", "0.5"), "[model] lambda"),
                            to_double(get_or(cfg.model, "mu", "0.3"), "[model] mu"),
                            sigma_of({0.3, 0.2}),
                            static_cast<int>(to_int(get_or(cfg.model, "n_pairs", "16"),
                                                    "[model] n_pairs")),
                            to_double(get_or(cfg.model, "length", "1"), "[model] length"));
  }
  if (id == "modal") {
    check_keys(cfg.model,
               {"id", "eigenvalues", "length", "drift", "gain", "lambda", "mu", "diffusion",
                "sigma"},
               "model");
    const auto basis =
        SpectralBasis::modal(to_list(require_key(cfg.model, "eigenvalues", "model"),
                                     "[model] eigenvalues"),
                             to_double(get_or(cfg.model, "length", "1"), "[model] length"));
    const std::string drift = get_or(cfg.model, "drift", "zero");
    DriftSpec f = DriftSpec::zero();
    if (drift == "linear")
      f = DriftSpec::linear(to_double(get_or(cfg.model, "gain", "0"), "[model] gain"));
    else if (drift == "double_well")
      f = DriftSpec::double_well(to_double(get_or(cfg.model, "lambda", "0.5"), "[model] lambda"),
                                 to_double(get_or(cfg.model, "mu", "0.3"), "[model] mu"));
    else if (drift != "zero")
      throw ConfigError("[model] drift must be zero, linear, or double_well");
    const std::string diffusion = get_or(cfg.model, "diffusion", "constant");
    DiffusionSpec g = DiffusionSpec::zero();
    if (diffusion == "constant")
      g = DiffusionSpec::constant_modes(sigma_of({1.0}));
    else if (diffusion == "sine")
      g = DiffusionSpec::sine_modes(sigma_of({1.0}));
    else if (diffusion != "zero")
      throw ConfigError("[model] diffusion must be zero, constant, or sine");
    return EquationModel(basis, f, g);
  }
  throw ConfigError("unknown model id '" + id + "' (catalog: heat, hyperbolic, modal)");
}

inline TimeGrid build_grid(const RunConfig& cfg) {
  check_keys(cfg.grid, {"t", "n_steps"}, "grid");
  const double T = to_double(require_key(cfg.grid, "t", "grid"), "[grid] t");
  const long long n = to_int(require_key(cfg.grid, "n_steps", "grid"), "[grid] n_steps");
  if (!(T > 0.0) || n < 1) throw ConfigError("[grid] needs t > 0 and n_steps >= 1");
  return TimeGrid(T, static_cast<int>(n));
}

inline StateVector build_x0(const KeyValues& exp, int dim) {
  const bool has_list = exp.count("x0") != 0;
  const bool has_scale = exp.count("x0_scale") != 0;
  if (has_list && has_scale)
    throw ConfigError("[experiment] give either x0 or x0_scale, not both");
  if (has_list) {
    const auto coeffs = to_list(exp.at("x0"), "[experiment] x0");
    if (static_cast<int>(coeffs.size()) != dim)
      throw ConfigError("[experiment] x0 must list one coefficient per mode");
    StateVector v(dim);
    for (int k = 0; k < dim; ++k) v[k] = coeffs[static_cast<std::size_t>(k)];
    return v;
  }
  if (has_scale) {
    const double s = to_double(exp.at("x0_scale"), "[experiment] x0_scale");
    StateVector v(dim);
    for (int k = 0; k < dim; ++k) v[k] = s / ((k + 1.0) * (k + 1.0));
    return v;
  }
  return StateVector::Zero(dim);
}

inline CsvTable trajectory_table(const Trajectory& z) {
  std::vector<std::string> header{"t"};
  for (int k = 0; k < z.states.cols(); ++k) header.push_back("coeff_" + std::to_string(k));
  CsvTable table(std::move(header));
  for (int j = 0; j <= z.grid.n_steps; ++j) {
    std::vector<std::string> row{csv_cell(j * z.grid.dt())};
    for (int k = 0; k < z.states.cols(); ++k) row.push_back(csv_cell(z.states(j, k)));
    table.add_row(std::move(row));
  }
  return table;
}

struct ExperimentOutput {
  std::vector<std::pair<std::string, std::string>> files;  // name -> bytes
  bool checks_passed = true;
};

constexpr std::uint64_t kStreamSimulate = 0x73696dULL;
constexpr std::uint64_t kStreamIto = 0x69746fULL;
constexpr std::uint64_t kStreamBracket = 0x62726bULL;
constexpr std::uint64_t kStreamMoments = 0x6d6f6dULL;
constexpr std::uint64_t kStreamLdp = 0x6c6470ULL;

inline OptimizerOptions optimizer_options(const KeyValues& exp, int threads) {
  OptimizerOptions opt;
  opt.max_iterations =
      static_cast<int>(to_int(get_or(exp, "max_iterations", "400"), "[experiment] max_iterations"));
  opt.restarts = static_cast<int>(to_int(get_or(exp, "restarts", "3"), "[experiment] restarts"));
  opt.feasibility_tolerance =
      to_double(get_or(exp, "feasibility_tol", "0.001"), "[experiment] feasibility_tol");
  opt.gradient_tolerance =
      to_double(get_or(exp, "gradient_tol", "1e-6"), "[experiment] gradient_tol");
  opt.n_threads = threads;
  return opt;
}

inline RateProblem build_rate_problem(const RunConfig& cfg, const EquationModel& model,
                                      const TimeGrid& grid, int threads) {
  const auto center_list = to_list(require_key(cfg.experiment, "center", "experiment"),
                                   "[experiment] center");
  if (static_cast<int>(center_list.size()) != model.basis().dim())
    throw ConfigError("[experiment] center must list one coefficient per mode");
  StateVector center(model.basis().dim());
  for (int k = 0; k < center.size(); ++k) center[k] = center_list[static_cast<std::size_t>(k)];
  const double radius = to_double(get_or(cfg.experiment, "radius", "0"), "[experiment] radius");
  std::vector<double> schedule{1.0, 10.0, 100.0, 1000.0};
  if (cfg.experiment.count("schedule"))
    schedule = to_list(cfg.experiment.at("schedule"), "[experiment] schedule");
  return RateProblem{model, build_x0(cfg.experiment, model.basis().dim()),
                     EndpointBall{center, radius}, grid, schedule,
                     optimizer_options(cfg.experiment, threads)};
}

inline std::vector<std::string> rate_row(const RateSolution& sol) {
  return {csv_cell(sol.I_value),        csv_cell(sol.residual),
          csv_cell(sol.gradient_norm),  csv_cell(sol.iterations),
          csv_cell(sol.converged),      csv_cell(sol.restart_index)};
}

inline ExperimentOutput run_simulate(const RunConfig& cfg, const EquationModel& model,
                                     const TimeGrid& grid, std::uint64_t seed) {
  check_keys(cfg.experiment, {"type", "eps", "x0", "x0_scale"}, "experiment");
  const double eps = to_double(require_key(cfg.experiment, "eps", "experiment"),
                               "[experiment] eps");
  if (!(eps > 0.0) || eps > 1.0) throw ConfigError("[experiment] eps must lie in (0, 1]");
  const StateVector x0 = build_x0(cfg.experiment, model.basis().dim());
  const NoisePath noise = sample_noise(grid, model.m_noise(), derive_seed(seed, kStreamSimulate, 0));
  ExperimentOutput out;
  try {
    const Trajectory z = simulate_mild(model, x0, eps, noise, grid);
    out.files.emplace_back("trajectory.csv", trajectory_table(z).to_string());
  } catch (const BlowupError&) {
    std::vector<std::string> header{"t"};
    for (int k = 0; k < model.basis().dim(); ++k) header.push_back("coeff_" + std::to_string(k));
    out.files.emplace_back("trajectory.csv", CsvTable(std::move(header)).to_string());
    out.checks_passed = false;
  }
  return out;
}

inline ExperimentOutput run_skeleton(const RunConfig& cfg, const EquationModel& model,
                                     const TimeGrid& grid) {
  check_keys(cfg.experiment, {"type", "control", "control_value", "yosida_k", "x0", "x0_scale"},
             "experiment");
  const StateVector x0 = build_x0(cfg.experiment, model.basis().dim());
  const std::string control = get_or(cfg.experiment, "control", "zero");
  ControlPath u = ControlPath::zero(grid, model.m_noise());
  if (control == "constant")
    u.values.setConstant(to_double(get_or(cfg.experiment, "control_value", "0"),
                                   "[experiment] control_value"));
  else if (control != "zero")
    throw ConfigError("[experiment] control must be zero or constant");
  Trajectory z = cfg.experiment.count("yosida_k")
                     ? solve_skeleton_yosida(model,
                                             to_double(cfg.experiment.at("yosida_k"),
                                                       "[experiment] yosida_k"),
                                             x0, u, grid)
                     : solve_skeleton(model, x0, u, grid);
  ExperimentOutput out;
  out.files.emplace_back("trajectory.csv", trajectory_table(z).to_string());
  return out;
}

inline ExperimentOutput run_rate(const RunConfig& cfg, const EquationModel& model,
                                 const TimeGrid& grid, int threads) {
  check_keys(cfg.experiment,
             {"type", "center", "radius", "schedule", "max_iterations", "restarts",
              "feasibility_tol", "gradient_tol", "x0", "x0_scale"},
             "experiment");
  const RateSolution sol = minimize_rate(build_rate_problem(cfg, model, grid, threads));
  CsvTable table(std::vector<std::string>{"i_value", "residual", "gradient_norm", "iterations",
                                          "converged", "restart_index"});
  table.add_row(rate_row(sol));
  ExperimentOutput out;
  out.files.emplace_back("rate.csv", table.to_string());
  out.checks_passed = sol.converged;
  return out;
}

inline ExperimentOutput run_verify_ldp(const RunConfig& cfg, const EquationModel& model,
                                       const TimeGrid& grid, std::uint64_t seed, int threads) {
  check_keys(cfg.experiment,
             {"type", "center", "radius", "schedule", "max_iterations", "restarts",
              "feasibility_tol", "gradient_tol", "x0", "x0_scale", "eps_list", "n_paths",
              "intercept_rtol"},
             "experiment");
  std::vector<double> eps_list{0.5, 0.3, 0.2, 0.1};
  if (cfg.experiment.count("eps_list"))
    eps_list = to_list(cfg.experiment.at("eps_list"), "[experiment] eps_list");
  const int n_paths = static_cast<int>(
      to_int(get_or(cfg.experiment, "n_paths", "10000"), "[experiment] n_paths"));
  const double rtol = to_double(get_or(cfg.experiment, "intercept_rtol", "0.15"),
                                "[experiment] intercept_rtol");
  if (!(rtol > 0.0)) throw ConfigError("[experiment] intercept_rtol must be positive");
  for (double e : eps_list)
    if (!(e > 0.0) || e > 1.0) throw ConfigError("[experiment] eps_list entries must lie in (0, 1]");
  if (eps_list.size() < 2) throw ConfigError("[experiment] eps_list needs at least two entries");
  if (n_paths < 2) throw ConfigError("[experiment] n_paths must be at least 2");

  const RateProblem prob = build_rate_problem(cfg, model, grid, threads);
  const RateSolution sol = minimize_rate(prob);

  CsvTable table(std::vector<std::string>{"eps", "log_p_hat", "ci_lo", "ci_hi", "eps2_logp",
                                          "minus_i", "method", "ess"});
  ExperimentOutput out;
  if (!std::isfinite(sol.I_value)) {
    out.files.emplace_back("ldp.csv", table.to_string());
    out.checks_passed = false;
    return out;
  }
  const LdpScaling scaling =
      ldp_scaling_experiment(prob.model, prob.x0, std::get<EndpointBall>(prob.target), grid,
                             eps_list, n_paths, sol, derive_seed(seed, kStreamLdp, 0), threads);
  bool ok = sol.converged && scaling.monotone;
  for (const auto& e : scaling.table) {
    table.add_row({csv_cell(e.eps), csv_cell(e.log_p), csv_cell(e.ci_lo), csv_cell(e.ci_hi),
                   csv_cell(e.eps2_logp), csv_cell(scaling.minus_I), e.method, csv_cell(e.ess)});
    if (e.eps2_logp > 1e-12 || e.zero_hits || e.degenerate_ess) ok = false;
  }
  if (std::abs(scaling.minus_I) > 1e-9) {
    if (std::abs(scaling.intercept - scaling.minus_I) > rtol * std::abs(scaling.minus_I))
      ok = false;
  } else if (std::abs(scaling.intercept) > 0.05) {
    ok = false;
  }
  out.files.emplace_back("ldp.csv", table.to_string());
  out.checks_passed = ok;
  return out;
}

inline ExperimentOutput run_check_hypotheses(const RunConfig& cfg, const EquationModel& model,
                                             std::uint64_t seed) {
  check_keys(cfg.experiment, {"type", "radius", "n_samples"}, "experiment");
  const double radius = to_double(get_or(cfg.experiment, "radius", "10"), "[experiment] radius");
  const int n_samples = static_cast<int>(
      to_int(get_or(cfg.experiment, "n_samples", "10000"), "[experiment] n_samples"));
  const HypothesisReport rep = verify_hypotheses(model, n_samples, radius, seed);
  CsvTable table(std::vector<std::string>{"check_id", "n_samples", "margin", "tolerance", "pass"});
  for (const auto& c : rep.clauses)
    table.add_row({c.id, csv_cell(rep.n_samples), csv_cell(c.empirical - c.declared),
                   csv_cell(1e-6), csv_cell(c.pass)});
  ExperimentOutput out;
  out.files.emplace_back("hypotheses.csv", table.to_string());
  out.checks_passed = rep.all_pass();
  return out;
}

inline ExperimentOutput run_inequality_suite(const RunConfig& cfg, const EquationModel& model,
                                             const TimeGrid& grid, std::uint64_t seed,
                                             int threads) {
  check_keys(cfg.experiment, {"type", "n_paths", "eps", "p", "eps_list", "x0", "x0_scale"},
             "experiment");
  const int n_paths =
      static_cast<int>(to_int(get_or(cfg.experiment, "n_paths", "1000"), "[experiment] n_paths"));
  const double eps = to_double(get_or(cfg.experiment, "eps", "0.3"), "[experiment] eps");
  const int p = static_cast<int>(to_int(get_or(cfg.experiment, "p", "2"), "[experiment] p"));
  std::vector<double> eps_list{0.1, 0.5, 1.0};
  if (cfg.experiment.count("eps_list"))
    eps_list = to_list(cfg.experiment.at("eps_list"), "[experiment] eps_list");
  if (n_paths < 1) throw ConfigError("[experiment] n_paths must be at least 1");
  if (!(eps > 0.0) || eps > 1.0) throw ConfigError("[experiment] eps must lie in (0, 1]");
  const StateVector x0 = build_x0(cfg.experiment, model.basis().dim());
  const int d = model.basis().dim();

  CsvTable table(std::vector<std::string>{"check_id", "n_samples", "margin", "tolerance", "pass"});

  {
    // pathwise energy bound along the zero-control skeleton: the integrand is
    // the drift evaluated on the path, so the reconstruction is the same flow
    const Trajectory z = solve_skeleton(model, x0, ControlPath::zero(grid, model.m_noise()), grid);
    Eigen::MatrixXd a(grid.n_steps, d);
    for (int j = 0; j < grid.n_steps; ++j) a.row(j) = model.drift_apply(z.state(j)).transpose();
    const EnergyCheckReport rep = energy_inequality_check(model.basis(), x0, a, grid);
    table.add_row({"energy", csv_cell(rep.n_times), csv_cell(rep.max_excess),
                   csv_cell(rep.tolerance), csv_cell(rep.pass)});
  }

  {
    const NoisePath noise =
        sample_noise(grid, model.m_noise(), derive_seed(seed, kStreamIto, 0));
    try {
      StepParts parts;
      const Trajectory x = simulate_mild(model, x0, eps, noise, grid, &parts);
      const ItoCheckReport rep = ito_inequality_check(model.basis(), x, parts);
      table.add_row({"ito", csv_cell(rep.n_times), csv_cell(rep.max_excess),
                     csv_cell(rep.tolerance), csv_cell(rep.pass)});
    } catch (const BlowupError&) {
      table.add_row({"ito", csv_cell(grid.n_steps),
                     csv_cell(std::numeric_limits<double>::infinity()), csv_cell(0.0),
                     csv_cell(false)});
    }
  }

  {
    std::vector<Eigen::MatrixXd> mart;
    int blowups = 0;
    for (int i = 0; i < n_paths; ++i) {
      const NoisePath noise =
          sample_noise(grid, model.m_noise(), derive_seed(seed, kStreamBracket, i));
      try {
        StepParts parts;
        simulate_mild(model, x0, eps, noise, grid, &parts);
        mart.push_back(std::move(parts.mart));
      } catch (const BlowupError&) {
        ++blowups;
      }
    }
    const BurkholderReport rep = burkholder_check(model.basis(), grid, mart, p);
    table.add_row({"burkholder", csv_cell(static_cast<int>(mart.size())),
                   csv_cell(std::max(0.0, rep.ratio - rep.bound)), csv_cell(0.0),
                   csv_cell(rep.pass && blowups == 0)});
  }

  {
    const MomentBoundReport rep =
        moment_bound_estimate(model, x0, grid, eps_list, p, n_paths,
                              derive_seed(seed, kStreamMoments, 0), threads);
    double margin = 0.0;
    for (const auto& s : rep.stats) {
      if (s.mean == rep.median) continue;  // covers the all-deterministic case
      margin = rep.median > 0.0
                   ? std::max(margin, std::abs(std::log2(s.mean / rep.median)))
                   : std::numeric_limits<double>::infinity();
    }
    table.add_row({"moment", csv_cell(n_paths), csv_cell(margin), csv_cell(1.0),
                   csv_cell(rep.pass)});
  }

  ExperimentOutput out;
  out.files.emplace_back("inequality.csv", table.to_string());
  out.checks_passed = true;
  for (const auto& row : table.rows())
    if (row.back() == "false") out.checks_passed = false;
  return out;
}

}  // namespace detail

/// Executes the configured experiment, writes its CSV artifacts into the
/// [run] out directory, and finishes with manifest.json recording digests of
/// everything written. Identical (config, seed, version) give byte-identical
/// CSVs regardless of thread count.
inline RunManifest run_config(const RunConfig& cfg) {
  detail::check_keys(cfg.run, {"seed", "threads", "out"}, "run");
  const std::uint64_t seed = detail::to_seed(detail::require_key(cfg.run, "seed", "run"),
                                             "[run] seed");
  const int threads = static_cast<int>(
      detail::to_int(detail::get_or(cfg.run, "threads", "1"), "[run] threads"));
  if (threads < 1) throw ConfigError("[run] threads must be at least 1");
  const std::string out_dir = detail::get_or(cfg.run, "out", ".");
  const std::string experiment = detail::require_key(cfg.experiment, "type", "experiment");

  const EquationModel model = detail::build_model(cfg);
  const TimeGrid grid = detail::build_grid(cfg);

  detail::ExperimentOutput result;
  if (experiment == "simulate")
    result = detail::run_simulate(cfg, model, grid, seed);
  else if (experiment == "skeleton")
    result = detail::run_skeleton(cfg, model, grid);
  else if (experiment == "rate")
    result = detail::run_rate(cfg, model, grid, threads);
  else if (experiment == "verify-ldp")
    result = detail::run_verify_ldp(cfg, model, grid, seed, threads);
  else if (experiment == "check-hypotheses")
    result = detail::run_check_hypotheses(cfg, model, seed);
  else if (experiment == "inequality-suite")
    result = detail::run_inequality_suite(cfg, model, grid, seed, threads);
  else
    throw ConfigError("unknown experiment '" + experiment +
                      "' (one of: simulate, skeleton, rate, verify-ldp, check-hypotheses, "
                      "inequality-suite)");

  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw ConfigError("cannot create output directory '" + out_dir + "': " + ec.message());

  RunManifest manifest;
  manifest.experiment = experiment;
  manifest.wall_clock_utc = utc_timestamp_now();
  manifest.seed = seed;
  manifest.threads = threads;
  manifest.checks_passed = result.checks_passed;
  manifest.config_echo = cfg.raw_text;
  for (const auto& [name, bytes] : result.files) {
    const std::string path = (std::filesystem::path(out_dir) / name).string();
    std::ofstream f(path, std::ios::binary);
    if (!f) throw ConfigError("cannot open for writing: " + path);
    f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    f.close();
    if (!f) throw ConfigError("write failed: " + path);
    manifest.outputs.push_back({name, fnv1a64_hex(bytes)});
  }
  const std::string mpath = (std::filesystem::path(out_dir) / "manifest.json").string();
  std::ofstream mf(mpath, std::ios::binary);
  if (!mf) throw ConfigError("cannot open for writing: " + mpath);
  const std::string mbody = manifest.to_json();
  mf.write(mbody.data(), static_cast<std::streamsize>(mbody.size()));
  mf.close();
  if (!mf) throw ConfigError("write failed: " + mpath);
  return manifest;
}

}  // namespace sevo
