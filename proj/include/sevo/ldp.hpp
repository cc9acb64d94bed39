#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

#include "sevo/rate.hpp"
#include "sevo/simulate.hpp"

namespace sevo {

enum class EstimatorMethod { Naive, Importance };

/// One small-noise log-probability estimate. With zero hits the log is the
/// log(1/n) ceiling and flagged. The effective sample size counts only paths
/// that contribute to the estimate (weight times indicator).
struct LogProbEstimate {
  double eps = 0.0;
  double log_p = 0.0;
  double ci_lo = 0.0;
  double ci_hi = 0.0;
  double eps2_logp = 0.0;
  std::string method = "naive";
  double ess = 0.0;
  double weight_mean = 1.0;
  double weight_se = 0.0;
  int n_paths = 0;
  int n_hits = 0;
  int n_blowups = 0;
  bool zero_hits = false;
  bool degenerate_ess = false;
};

namespace detail {

constexpr double kZ95 = 1.959963984540054;

struct LogMean {
  double log_mean = -std::numeric_limits<double>::infinity();
  double se_log = std::numeric_limits<double>::infinity();  // sd(a)/(sqrt(n) mean(a))
  double ess = 0.0;
  double max_exponent = -std::numeric_limits<double>::infinity();
  bool all_zero = true;
};

/// Stable statistics of (1/n) sum exp(e_i); entries of -inf contribute zero.
inline LogMean log_mean_exp(const std::vector<double>& exponents) {
  LogMean out;
  for (double e : exponents) out.max_exponent = std::max(out.max_exponent, e);
  if (!std::isfinite(out.max_exponent)) return out;
  out.all_zero = false;
  const int n = static_cast<int>(exponents.size());
  std::vector<double> a(exponents.size());
  for (std::size_t i = 0; i < exponents.size(); ++i)
    a[i] = std::isfinite(exponents[i]) ? std::exp(exponents[i] - out.max_exponent) : 0.0;
  const double sum = kahan_sum(a);
  const double mean = sum / n;
  out.log_mean = out.max_exponent + std::log(mean);
  std::vector<double> dev2(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) dev2[i] = (a[i] - mean) * (a[i] - mean);
  const double sd = n > 1 ? std::sqrt(kahan_sum(dev2) / (n - 1)) : 0.0;
  out.se_log = sd / (std::sqrt(static_cast<double>(n)) * mean);
  std::vector<double> a2(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) a2[i] = a[i] * a[i];
  const double s2 = kahan_sum(a2);
  out.ess = s2 > 0.0 ? sum * sum / s2 : 0.0;
  return out;
}

/// log of the Girsanov density dP/dQ along one sampled path:
/// -(1/eps) sum <u_j, dW_j> - (1/(2 eps^2)) sum |u_j|^2 dt.
inline double log_girsanov_weight(const ControlPath& u, const NoisePath& noise, double eps) {
  double dot = 0.0, uu = 0.0;
  for (int j = 0; j < u.values.rows(); ++j) {
    dot += u.values.row(j).dot(noise.increments.row(j));
    uu += u.values.row(j).squaredNorm();
  }
  return -dot / eps - 0.5 * uu * u.grid.dt() / (eps * eps);
}

}  // namespace detail

inline LogProbEstimate estimate_log_prob(const EquationModel& model, const StateVector& x0,
                                         const EndpointBall& event, double eps,
                                         const TimeGrid& grid, int n_paths,
                                         EstimatorMethod method, const ControlPath* u_tilt,
                                         std::uint64_t seed, int n_threads = 1,
                                         double ess_floor = 50.0) {
  model.basis().check_dim(event.center, "estimate_log_prob");
  if (event.radius < 0.0) throw std::invalid_argument("estimate_log_prob: negative radius");
  if (!(eps > 0.0) || eps > 1.0)
    throw std::invalid_argument("estimate_log_prob: eps must lie in (0, 1]");
  if (n_paths < 2) throw std::invalid_argument("estimate_log_prob: need at least two paths");
  if (method == EstimatorMethod::Importance && u_tilt == nullptr)
    throw std::invalid_argument("estimate_log_prob: importance sampling needs a tilt");
  if (method == EstimatorMethod::Naive && u_tilt != nullptr)
    throw std::invalid_argument("estimate_log_prob: the naive estimator takes no tilt");
  if (u_tilt) detail::check_same_grid(u_tilt->grid, grid, "estimate_log_prob");

  const int m = model.m_noise();
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> logw(static_cast<std::size_t>(n_paths), 0.0);
  std::vector<char> hit(static_cast<std::size_t>(n_paths), 0);
  std::vector<char> blown(static_cast<std::size_t>(n_paths), 0);

  parallel_for(n_paths, n_threads, [&](int i) {
    const NoisePath noise = sample_noise(grid, m, derive_seed(seed, 0x6c6f6770ULL, i));
    try {
      const Trajectory z = u_tilt ? simulate_controlled(model, x0, eps, *u_tilt, noise, grid)
                                  : simulate_mild(model, x0, eps, noise, grid);
      hit[static_cast<std::size_t>(i)] =
          (z.state(grid.n_steps) - event.center).norm() <= event.radius;
      if (u_tilt)
        logw[static_cast<std::size_t>(i)] = detail::log_girsanov_weight(*u_tilt, noise, eps);
    } catch (const BlowupError&) {
      blown[static_cast<std::size_t>(i)] = 1;
      logw[static_cast<std::size_t>(i)] = -inf;
    }
  });

  LogProbEstimate est;
  est.eps = eps;
  est.method = method == EstimatorMethod::Naive ? "naive" : "importance";
  est.n_paths = n_paths;
  for (char b : blown) est.n_blowups += b;
  for (char h : hit) est.n_hits += h;

  std::vector<double> contrib(logw.size());
  for (std::size_t i = 0; i < logw.size(); ++i) contrib[i] = hit[i] ? logw[i] : -inf;
  const detail::LogMean lm = detail::log_mean_exp(contrib);

  if (lm.all_zero) {
    est.zero_hits = true;
    est.log_p = std::log(1.0 / n_paths);
    est.ci_lo = est.ci_hi = est.log_p;
    est.degenerate_ess = method == EstimatorMethod::Importance;
  } else {
    est.log_p = lm.log_mean;
    est.ci_lo = est.log_p - detail::kZ95 * lm.se_log;
    est.ci_hi = est.log_p + detail::kZ95 * lm.se_log;
    est.ess = lm.ess;
    est.degenerate_ess = method == EstimatorMethod::Importance && lm.ess < ess_floor;
  }
  est.eps2_logp = eps * eps * est.log_p;

  const detail::LogMean wm = detail::log_mean_exp(logw);
  est.weight_mean = std::exp(wm.log_mean);
  est.weight_se = est.weight_mean * wm.se_log;
  return est;
}

/// Small-noise scaling table for one endpoint event: per-eps importance
/// estimates tilted by the minimizing control, the reference -I, and the
/// affine extrapolation of eps^2 log p-hat through the two smallest eps.
struct LdpScaling {
  std::vector<LogProbEstimate> table;
  double minus_I = 0.0;
  double intercept = 0.0;
  bool monotone = true;
};

inline LdpScaling ldp_scaling_experiment(const EquationModel& model, const StateVector& x0,
                                         const EndpointBall& event, const TimeGrid& grid,
                                         const std::vector<double>& eps_list, int n_paths,
                                         const RateSolution& rate, std::uint64_t seed,
                                         int n_threads = 1, double ess_floor = 50.0) {
  if (eps_list.size() < 2)
    throw std::invalid_argument("ldp_scaling_experiment: need at least two eps values");
  if (!std::isfinite(rate.I_value))
    throw std::invalid_argument("ldp_scaling_experiment: rate solution must be feasible");

  LdpScaling out;
  out.minus_I = -rate.I_value;
  for (std::size_t k = 0; k < eps_list.size(); ++k)
    out.table.push_back(estimate_log_prob(model, x0, event, eps_list[k], grid, n_paths,
                                          EstimatorMethod::Importance, &rate.u_star,
                                          derive_seed(seed, 0x7363616cULL, static_cast<int>(k)),
                                          n_threads, ess_floor));

  std::vector<std::size_t> order(eps_list.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return eps_list[a] < eps_list[b]; });
  const auto& s1 = out.table[order[0]];  // smallest eps
  const auto& s2 = out.table[order[1]];
  out.intercept = s1.eps2_logp -
                  s1.eps * (s2.eps2_logp - s1.eps2_logp) / (s2.eps - s1.eps);
  for (std::size_t i = 0; i + 1 < order.size(); ++i) {
    // the sub-exponential prefactor drags eps^2 log p further below the
    // intercept as eps grows, so the value at larger eps must not exceed it
    const double small_eps_v = out.table[order[i]].eps2_logp;
    const double large_eps_v = out.table[order[i + 1]].eps2_logp;
    if (!(large_eps_v <= small_eps_v + 1e-12)) out.monotone = false;
  }
  return out;
}

/// Terminal functionals used by the exponential-integral checks.
inline TerminalFunctional capped_quadratic(const StateVector& center, double scale, double cap) {
  if (cap <= 0.0) throw std::invalid_argument("capped_quadratic: cap must be positive");
  return {[center, scale, cap](const StateVector& x) {
            return scale * std::min((x - center).squaredNorm(), cap);
          },
          [center, scale, cap](const StateVector& x) {
            const StateVector d = x - center;
            if (d.squaredNorm() >= cap) return StateVector(StateVector::Zero(d.size()));
            return StateVector(2.0 * scale * d);
          }};
}

inline TerminalFunctional constant_functional(double c, int dim) {
  return {[c](const StateVector&) { return c; },
          [dim](const StateVector&) { return StateVector(StateVector::Zero(dim)); }};
}

struct LaplaceEntry {
  double eps = 0.0;
  double lhs = 0.0;  // eps^2 log E exp(-h(X_T)/eps^2)
  double se = 0.0;
  double ess = 0.0;
  bool degenerate = false;
};

struct LaplaceReport {
  std::vector<LaplaceEntry> entries;
  double rhs = 0.0;  // -(min_u action + h(z_T))
  double minimizer_action = 0.0;
  double minimizer_terminal = 0.0;
  ControlPath u_tilt;
};

/// Exponential-integral check: the left side is estimated under the tilt of
/// the deterministic minimizer (the integrand concentrates there), the right
/// side is the minimizer's value with flipped sign.
inline LaplaceReport laplace_check(const EquationModel& model, const StateVector& x0,
                                   const TimeGrid& grid, const TerminalFunctional& h,
                                   const std::vector<double>& eps_list, int n_paths,
                                   std::uint64_t seed, int n_threads = 1,
                                   OptimizerOptions opt = {}, double ess_floor = 50.0) {
  if (eps_list.empty()) throw std::invalid_argument("laplace_check: empty eps ladder");
  for (double eps : eps_list)
    if (!(eps > 0.0) || eps > 1.0)
      throw std::invalid_argument("laplace_check: eps must lie in (0, 1]");

  opt.n_threads = std::max(opt.n_threads, 1);
  const TerminalSolution mini = minimize_terminal(model, x0, grid, h, opt);

  LaplaceReport report;
  report.rhs = -mini.objective;
  report.minimizer_action = mini.action_value;
  report.minimizer_terminal = mini.terminal_value;
  report.u_tilt = mini.u;

  const int m = model.m_noise();
  const double inf = std::numeric_limits<double>::infinity();
  for (std::size_t ei = 0; ei < eps_list.size(); ++ei) {
    const double eps = eps_list[ei];
    const std::uint64_t eps_seed = derive_seed(seed, 0x6c61706cULL, static_cast<int>(ei));
    std::vector<double> exponent(static_cast<std::size_t>(n_paths));
    parallel_for(n_paths, n_threads, [&](int i) {
      const NoisePath noise = sample_noise(grid, m, derive_seed(eps_seed, 0x70ULL, i));
      try {
        const Trajectory z = simulate_controlled(model, x0, eps, mini.u, noise, grid);
        exponent[static_cast<std::size_t>(i)] =
            -h.value(z.state(grid.n_steps)) / (eps * eps) +
            detail::log_girsanov_weight(mini.u, noise, eps);
      } catch (const BlowupError&) {
        exponent[static_cast<std::size_t>(i)] = -inf;
      }
    });
    const detail::LogMean lm = detail::log_mean_exp(exponent);
    LaplaceEntry entry;
    entry.eps = eps;
    entry.lhs = eps * eps * lm.log_mean;
    entry.se = eps * eps * lm.se_log;
    entry.ess = lm.ess;
    entry.degenerate = lm.all_zero || lm.ess < ess_floor;
    report.entries.push_back(entry);
  }
  return report;
}

/// Bounded functional of a finite-dimensional Brownian path; rows of the path
/// matrix are W(t_0) .. W(t_n). When the functional is alpha |W(T)|^2 the
/// exact discrete feedback value is available and enables a two-sided check.
struct BrownianFunctional {
  std::function<double(const TimeGrid&, const Eigen::MatrixXd&)> value;
  double terminal_quadratic = std::numeric_limits<double>::quiet_NaN();
};

inline BrownianFunctional terminal_quadratic_functional(double alpha) {
  BrownianFunctional h;
  h.value = [alpha](const TimeGrid&, const Eigen::MatrixXd& path) {
    return alpha * path.row(path.rows() - 1).squaredNorm();
  };
  h.terminal_quadratic = alpha;
  return h;
}

inline BrownianFunctional constant_brownian_functional(double c) {
  BrownianFunctional h;
  h.value = [c](const TimeGrid&, const Eigen::MatrixXd&) { return c; };
  return h;
}

inline BrownianFunctional capped_terminal_norm(double scale, double cap) {
  BrownianFunctional h;
  h.value = [scale, cap](const TimeGrid&, const Eigen::MatrixXd& path) {
    return scale * std::min(path.row(path.rows() - 1).norm(), cap);
  };
  return h;
}

struct VariationalReport {
  int dim = 0;
  int n_paths = 0;
  double lhs = 0.0;  // -log E exp(-h(W))
  double lhs_se = 0.0;
  double rhs = 0.0;  // best deterministic-control value of E[h(W + U)] + action
  double rhs_se = 0.0;
  bool one_sided_pass = false;
  double adapted_value = std::numeric_limits<double>::quiet_NaN();
  bool two_sided_pass = true;
};

/// Checks -log E e^{-h(W)} = inf_u E[ (1/2)int|u|^2 + h(W + int u) ] from the
/// computable side: deterministic controls bound the adapted infimum from
/// above (candidates selected on one half of the budget, reported on the
/// other), and for quadratic terminal h the adapted value itself follows from
/// the one-dimensional Riccati recursion on the grid.
inline VariationalReport variational_representation_check(int dim, const BrownianFunctional& h,
                                                          const TimeGrid& grid, int n_paths,
                                                          std::uint64_t seed,
                                                          int n_threads = 1) {
  if (dim < 1 || dim > 3)
    throw std::invalid_argument("variational_representation_check: dim must be 1..3");
  if (!h.value) throw std::invalid_argument("variational_representation_check: missing h");
  if (n_paths < 8) throw std::invalid_argument("variational_representation_check: too few paths");

  const int n = grid.n_steps;
  const double dt = grid.dt(), T = grid.horizon;
  auto brownian_path = [&](std::uint64_t path_seed) {
    const Eigen::MatrixXd inc = sample_noise(grid, dim, path_seed).increments;
    Eigen::MatrixXd path(n + 1, dim);
    path.row(0).setZero();
    for (int j = 0; j < n; ++j) path.row(j + 1) = path.row(j) + inc.row(j);
    return path;
  };

  VariationalReport report;
  report.dim = dim;
  report.n_paths = n_paths;

  {
    std::vector<double> exponent(static_cast<std::size_t>(n_paths));
    parallel_for(n_paths, n_threads, [&](int i) {
      exponent[static_cast<std::size_t>(i)] =
          -h.value(grid, brownian_path(derive_seed(seed, 0x766c6873ULL, i)));
    });
    const detail::LogMean lm = detail::log_mean_exp(exponent);
    report.lhs = -lm.log_mean;
    report.lhs_se = lm.se_log;
  }

  // Constant controls per axis as the deterministic candidate family.
  std::vector<Eigen::VectorXd> candidates;
  candidates.push_back(Eigen::VectorXd::Zero(dim));
  for (int ax = 0; ax < dim; ++ax)
    for (double c : {-2.0, -1.5, -1.0, -0.5, 0.5, 1.0, 1.5, 2.0}) {
      Eigen::VectorXd u = Eigen::VectorXd::Zero(dim);
      u[ax] = c;
      candidates.push_back(u);
    }
  const int n_cand = static_cast<int>(candidates.size());
  const int n_half = n_paths / 2;

  auto candidate_cost = [&](const Eigen::VectorXd& u, const Eigen::MatrixXd& path) {
    Eigen::MatrixXd shifted = path;
    for (int j = 0; j <= n; ++j) shifted.row(j) += (j * dt) * u.transpose();
    return 0.5 * u.squaredNorm() * T + h.value(grid, shifted);
  };

  Eigen::MatrixXd select(n_half, n_cand);
  parallel_for(n_half, n_threads, [&](int i) {
    const Eigen::MatrixXd path = brownian_path(derive_seed(seed, 0x766c7341ULL, i));
    for (int k = 0; k < n_cand; ++k) select(i, k) = candidate_cost(candidates[k], path);
  });
  int best = 0;
  double best_mean = std::numeric_limits<double>::infinity();
  for (int k = 0; k < n_cand; ++k) {
    std::vector<double> col(select.col(k).data(), select.col(k).data() + n_half);
    const double mean = kahan_sum(col) / n_half;
    if (mean < best_mean - 1e-12) {
      best_mean = mean;
      best = k;
    }
  }

  std::vector<double> fresh(static_cast<std::size_t>(n_half));
  parallel_for(n_half, n_threads, [&](int i) {
    const Eigen::MatrixXd path = brownian_path(derive_seed(seed, 0x766c7342ULL, i));
    fresh[static_cast<std::size_t>(i)] = candidate_cost(candidates[best], path);
  });
  const double mean_b = kahan_sum(fresh) / n_half;
  std::vector<double> dev2(fresh.size());
  for (std::size_t i = 0; i < fresh.size(); ++i)
    dev2[i] = (fresh[i] - mean_b) * (fresh[i] - mean_b);
  report.rhs = mean_b;
  report.rhs_se = std::sqrt(kahan_sum(dev2) / (n_half - 1) / n_half);

  report.one_sided_pass =
      report.lhs <=
      report.rhs + 3.0 * std::sqrt(report.lhs_se * report.lhs_se + report.rhs_se * report.rhs_se);

  if (std::isfinite(h.terminal_quadratic)) {
    double p = 2.0 * h.terminal_quadratic, q = 0.0;
    for (int s = 0; s < n; ++s) {
      q += 0.5 * p * dim * dt;
      p = p / (1.0 + p * dt);
    }
    report.adapted_value = q;
    report.two_sided_pass =
        std::abs(report.lhs - q) <= 0.05 * std::max(0.05, std::abs(q));
  }
  return report;
}

struct EpsConvergenceReport {
  std::vector<double> eps_list;
  std::vector<double> mean_sup_distance;
  bool decreasing = true;
  double ratio = 0.0;
  bool pass = false;
  int n_paths = 0;
};

/// Mean sup-distance between the small-noise controlled flow and the limit
/// skeleton, coupled by common noise across the eps ladder.
inline EpsConvergenceReport convergence_experiment_thm52(
    const EquationModel& model, const StateVector& x0,
    const std::function<ControlPath(double)>& u_family, const std::vector<double>& eps_list,
    const TimeGrid& grid, int n_paths, std::uint64_t seed, int n_threads = 1) {
  if (eps_list.size() < 2)
    throw std::invalid_argument("convergence_experiment_thm52: need an eps ladder");
  for (std::size_t i = 0; i < eps_list.size(); ++i) {
    if (!(eps_list[i] > 0.0) || eps_list[i] > 1.0)
      throw std::invalid_argument("convergence_experiment_thm52: eps must lie in (0, 1]");
    if (i > 0 && !(eps_list[i] < eps_list[i - 1]))
      throw std::invalid_argument("convergence_experiment_thm52: eps ladder must decrease");
  }
  const ControlPath u0 = u_family(0.0);
  detail::check_same_grid(u0.grid, grid, "convergence_experiment_thm52");
  const Trajectory z0 = solve_skeleton(model, x0, u0, grid);
  const int m = model.m_noise();
  const double inf = std::numeric_limits<double>::infinity();

  EpsConvergenceReport report;
  report.eps_list = eps_list;
  report.n_paths = n_paths;
  for (double eps : eps_list) {
    const ControlPath ue = u_family(eps);
    detail::check_same_grid(ue.grid, grid, "convergence_experiment_thm52");
    std::vector<double> dist(static_cast<std::size_t>(n_paths));
    parallel_for(n_paths, n_threads, [&](int i) {
      // same per-path seed across the ladder: common random numbers
      const NoisePath noise = sample_noise(grid, m, derive_seed(seed, 0x3532ULL, i));
      try {
        dist[static_cast<std::size_t>(i)] =
            sup_distance(simulate_controlled(model, x0, eps, ue, noise, grid), z0);
      } catch (const BlowupError&) {
        dist[static_cast<std::size_t>(i)] = inf;
      }
    });
    report.mean_sup_distance.push_back(kahan_sum(dist) / n_paths);
  }
  for (std::size_t i = 1; i < report.mean_sup_distance.size(); ++i)
    if (!(report.mean_sup_distance[i] <=
          report.mean_sup_distance[i - 1] * (1.0 + 1e-12) + 1e-15))
      report.decreasing = false;
  const double first = report.mean_sup_distance.front();
  const double last = report.mean_sup_distance.back();
  report.ratio = first == 0.0 ? (last == 0.0 ? 0.0 : inf) : last / first;
  report.pass = report.decreasing && report.ratio <= 0.25;
  return report;
}

/// Oscillating control ladder u + amplitude sin(n pi t / T) e_channel with
/// midpoint time sampling; weakly but not strongly convergent to u.
inline std::vector<ControlPath> oscillating_controls(const ControlPath& u0, double amplitude,
                                                     int channel,
                                                     const std::vector<int>& n_values) {
  if (channel < 0 || channel >= u0.channels())
    throw std::invalid_argument("oscillating_controls: channel out of range");
  const double dt = u0.grid.dt(), T = u0.grid.horizon;
  std::vector<ControlPath> ladder;
  for (int n : n_values) {
    ControlPath un = u0;
    for (int j = 0; j < un.values.rows(); ++j)
      un.values(j, channel) +=
          amplitude * std::sin(n * std::numbers::pi * (j + 0.5) * dt / T);
    ladder.push_back(std::move(un));
  }
  return ladder;
}

struct OscillationReport {
  std::vector<double> sup_dist;     // exact-semigroup skeleton distances to u0
  Eigen::MatrixXd yosida_table;     // ladder index x k index
  std::vector<double> k_values;
  bool below_ten_percent = false;   // last <= 10% of first
  bool yosida_decreasing = true;    // per-row sup over k non-increasing
};

/// Sequential-continuity surrogate: skeleton distances along a weakly
/// converging control ladder, with the same table under Yosida-approximated
/// generators.
inline OscillationReport continuity_experiment_thm41(
    const EquationModel& model, const StateVector& x0, const TimeGrid& grid,
    const std::vector<ControlPath>& ladder, const ControlPath& u0,
    const std::vector<double>& k_values = {1e2, 1e3, 1e4}) {
  if (ladder.empty()) throw std::invalid_argument("continuity_experiment_thm41: empty ladder");
  OscillationReport report;
  report.k_values = k_values;
  const Trajectory z0 = solve_skeleton(model, x0, u0, grid);
  for (const auto& un : ladder)
    report.sup_dist.push_back(sup_distance(solve_skeleton(model, x0, un, grid), z0));

  report.yosida_table.resize(static_cast<int>(ladder.size()), static_cast<int>(k_values.size()));
  for (std::size_t kk = 0; kk < k_values.size(); ++kk) {
    const Trajectory z0k = solve_skeleton_yosida(model, k_values[kk], x0, u0, grid);
    for (std::size_t i = 0; i < ladder.size(); ++i)
      report.yosida_table(static_cast<int>(i), static_cast<int>(kk)) =
          sup_distance(solve_skeleton_yosida(model, k_values[kk], x0, ladder[i], grid), z0k);
  }

  report.below_ten_percent =
      report.sup_dist.back() <= 0.1 * report.sup_dist.front() + 1e-15;
  for (int i = 1; i < report.yosida_table.rows(); ++i) {
    const double prev = report.yosida_table.row(i - 1).maxCoeff();
    const double cur = report.yosida_table.row(i).maxCoeff();
    if (!(cur <= prev * (1.0 + 1e-12) + 1e-15)) report.yosida_decreasing = false;
  }
  return report;
}

}  // namespace sevo
