#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <exception>
#include <random>
#include <stdexcept>
#include <thread>
#include <vector>

#include "sevo/rng.hpp"
#include "sevo/skeleton.hpp"

namespace sevo {

/// Runs fn(0..n-1) on up to n_threads workers in contiguous index blocks.
/// Each index must do work that depends only on the index (seeds derived from
/// it), so the partition never changes results. Exceptions are rethrown in
/// index order after all workers join.
template <typename Fn>
void parallel_for(int n, int n_threads, Fn&& fn) {
  if (n <= 0) return;
  const int workers = std::max(1, std::min(n_threads, n));
  if (workers == 1) {
    for (int i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(workers));
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(workers));
  const int per = (n + workers - 1) / workers;
  for (int w = 0; w < workers; ++w) {
    const int lo = w * per;
    const int hi = std::min(n, lo + per);
    pool.emplace_back([&, w, lo, hi] {
      try {
        for (int i = lo; i < hi; ++i) fn(i);
      } catch (...) {
        errors[static_cast<std::size_t>(w)] = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);
}

inline double kahan_sum(const std::vector<double>& xs) {
  double sum = 0.0, carry = 0.0;
  for (double x : xs) {
    const double y = x - carry;
    const double t = sum + y;
    carry = (t - sum) - y;
    sum = t;
  }
  return sum;
}

struct EnsembleStats {
  long n = 0;
  std::uint64_t seed = 0;
  double mean = 0.0;
  double variance = 0.0;  // unbiased sample variance
  double ci_lo = 0.0;     // 95% normal CI for the mean
  double ci_hi = 0.0;
};

inline EnsembleStats make_stats(const std::vector<double>& xs, std::uint64_t seed) {
  EnsembleStats s;
  s.n = static_cast<long>(xs.size());
  s.seed = seed;
  if (xs.empty()) return s;
  s.mean = kahan_sum(xs) / static_cast<double>(s.n);
  if (s.n > 1) {
    std::vector<double> sq(xs.size());
    for (std::size_t i = 0; i < xs.size(); ++i) sq[i] = (xs[i] - s.mean) * (xs[i] - s.mean);
    s.variance = kahan_sum(sq) / static_cast<double>(s.n - 1);
  }
  const double half = 1.959963984540054 * std::sqrt(s.variance / static_cast<double>(s.n));
  s.ci_lo = s.mean - half;
  s.ci_hi = s.mean + half;
  return s;
}

/// Independent N(0, dt) increments per step and channel, step-major order.
inline NoisePath sample_noise(const TimeGrid& grid, int m, std::uint64_t seed) {
  if (m < 0) throw std::invalid_argument("sample_noise: channel count must be non-negative");
  NoisePath w;
  w.grid = grid;
  w.seed = seed;
  w.increments.resize(grid.n_steps, m);
  auto rng = make_rng(seed);
  std::normal_distribution<double> gauss(0.0, std::sqrt(grid.dt()));
  for (int j = 0; j < grid.n_steps; ++j)
    for (int i = 0; i < m; ++i) w.increments(j, i) = gauss(rng);
  return w;
}

/// Mild-solution path X_{j+1} = S(dt)(X_j + dt f(X_j) + eps g(X_j) dW_j).
inline Trajectory simulate_mild(const EquationModel& model, const StateVector& x0, double eps,
                                const NoisePath& noise, const TimeGrid& grid,
                                StepParts* parts = nullptr) {
  detail::check_same_grid(noise.grid, grid, "simulate_mild");
  const Propagator prop(model.basis(), grid.dt());
  return detail::evolve(model, grid, x0, nullptr, eps, &noise.increments, prop, parts);
}

/// Controlled path z_{j+1} = S(dt)(z_j + dt (f + g u_j) + eps g dW_j);
/// eps = 0 reduces bitwise to solve_skeleton, u = 0 bitwise to simulate_mild.
inline Trajectory simulate_controlled(const EquationModel& model, const StateVector& x0,
                                      double eps, const ControlPath& u, const NoisePath& noise,
                                      const TimeGrid& grid, StepParts* parts = nullptr) {
  detail::check_same_grid(u.grid, grid, "simulate_controlled");
  detail::check_same_grid(noise.grid, grid, "simulate_controlled");
  const Propagator prop(model.basis(), grid.dt());
  return detail::evolve(model, grid, x0, &u.values, eps, &noise.increments, prop, parts);
}

struct ItoCheckReport {
  int n_times = 0;
  int n_violations = 0;
  double max_excess = 0.0;  // worst LHS - RHS before tolerance
  double tolerance = 0.0;   // final (largest) cumulative tolerance
  bool pass = true;
};

/// Pathwise semimartingale energy inequality
///   |X_t|^2 <= e^{2 lam t}|x0|^2 + 2 int e^{2 lam (t-s)} <X, dZ> +
///              e^{2 lam t} [int e^{-lam s} dZ]_t + tol_t
/// with dZ_j = drift_j dt + mart_j and the discrete bracket sum |mart_j|^2.
/// The tolerance accumulates the expansion defect dt^2 |d|^2 + 2 dt |d||m| of
/// each step (an O(sqrt(dt)) path functional), so an exactly simulated path
/// never violates.
inline ItoCheckReport ito_inequality_check(const SpectralBasis& basis, const Trajectory& x,
                                           const StepParts& parts) {
  const int n = x.grid.n_steps;
  const double dt = x.grid.dt();
  if (x.states.rows() != n + 1 || x.states.cols() != basis.dim())
    throw std::invalid_argument("ito_inequality_check: trajectory shape mismatch");
  if (parts.drift.rows() != n || parts.mart.rows() != n)
    throw std::invalid_argument("ito_inequality_check: step decomposition shape mismatch");
  const double lam = basis.growth_rate();
  const double e2l = std::exp(2.0 * lam * dt);
  const double defect_gain = std::exp(2.0 * std::max(lam, 0.0) * x.grid.horizon);
  const double x0n2 = x.states.row(0).squaredNorm();
  const double floor = 1e-12 * (1.0 + x0n2);

  ItoCheckReport rep;
  rep.n_times = n + 1;
  rep.max_excess = -std::numeric_limits<double>::infinity();
  double weight = 1.0, integral = 0.0, bracket = 0.0, tol = floor;
  for (int j = 0; j <= n; ++j) {
    const double lhs = x.states.row(j).squaredNorm();
    const double excess = lhs - (weight * x0n2 + 2.0 * integral + bracket);
    rep.max_excess = std::max(rep.max_excess, excess);
    if (excess > tol) ++rep.n_violations;
    if (j == n) break;
    const double dn = parts.drift.row(j).norm();
    const double mn = parts.mart.row(j).norm();
    const double inner =
        x.states.row(j).dot(dt * parts.drift.row(j) + parts.mart.row(j));
    integral = e2l * (integral + inner);
    bracket = e2l * (bracket + mn * mn);
    weight *= e2l;
    tol += defect_gain * (dt * dt * dn * dn + 2.0 * dt * dn * mn);
  }
  rep.tolerance = tol;
  rep.pass = rep.n_violations == 0;
  return rep;
}

struct BurkholderReport {
  int n_paths = 0;
  int p = 1;
  double lhs = 0.0;   // E sup_t |int S(t-s) dM|^{2p}
  double rhs = 0.0;   // E [M]_T^p
  double ratio = 0.0;
  double bound = 0.0;
  bool pass = true;
};

/// Compares the stochastic-convolution sup moment against the bracket moment
/// over an ensemble of martingale increment paths (rows = steps).
inline BurkholderReport burkholder_check(const SpectralBasis& basis, const TimeGrid& grid,
                                         const std::vector<Eigen::MatrixXd>& mart, int p) {
  if (p < 1) throw std::invalid_argument("burkholder_check: p must be >= 1");
  const Propagator prop(basis, grid.dt());
  const int n = grid.n_steps;
  std::vector<double> sup2p(mart.size()), bracket_p(mart.size());
  for (std::size_t i = 0; i < mart.size(); ++i) {
    if (mart[i].rows() != n || mart[i].cols() != basis.dim())
      throw std::invalid_argument("burkholder_check: increment path shape mismatch");
    StateVector y = StateVector::Zero(basis.dim());
    double sup = 0.0, qv = 0.0;
    for (int j = 0; j < n; ++j) {
      y += mart[i].row(j).transpose();
      prop.apply_in_place(y);
      sup = std::max(sup, y.norm());
      qv += mart[i].row(j).squaredNorm();
    }
    sup2p[i] = std::pow(sup, 2 * p);
    bracket_p[i] = std::pow(qv, p);
  }
  BurkholderReport rep;
  rep.n_paths = static_cast<int>(mart.size());
  rep.p = p;
  rep.lhs = mart.empty() ? 0.0 : kahan_sum(sup2p) / static_cast<double>(mart.size());
  rep.rhs = mart.empty() ? 0.0 : kahan_sum(bracket_p) / static_cast<double>(mart.size());
  rep.bound = 4.0 * p * std::exp(2.0 * p * std::max(basis.growth_rate(), 0.0) * grid.horizon);
  rep.ratio = rep.rhs > 0.0 ? rep.lhs / rep.rhs : 0.0;
  rep.pass = rep.rhs > 0.0 ? rep.ratio <= rep.bound : rep.lhs == 0.0;
  return rep;
}

struct MomentBoundReport {
  std::vector<double> eps;
  std::vector<EnsembleStats> stats;  // per eps: mean of sup-norm^p
  double median = 0.0;
  int n_blowups = 0;
  bool pass = true;  // no blow-ups and every estimate within [0.5, 2] x median
};

/// Estimates E sup_t |X^eps|^p on an eps ladder; the "uniform in eps"
/// surrogate requires all estimates to sit within a factor 2 of their median.
inline MomentBoundReport moment_bound_estimate(const EquationModel& model, const StateVector& x0,
                                               const TimeGrid& grid,
                                               const std::vector<double>& eps_list, int p,
                                               int n_paths, std::uint64_t seed,
                                               int n_threads = 1) {
  if (p < 2 || p % 2 != 0)
    throw std::invalid_argument("moment_bound_estimate: p must be a positive even integer");
  if (n_paths < 1) throw std::invalid_argument("moment_bound_estimate: need at least one path");
  for (double e : eps_list)
    if (!(e > 0.0 && e <= 1.0))
      throw std::invalid_argument("moment_bound_estimate: eps values must lie in (0, 1]");

  MomentBoundReport rep;
  rep.eps = eps_list;
  std::vector<int> blowups(eps_list.size(), 0);
  for (std::size_t ei = 0; ei < eps_list.size(); ++ei) {
    std::vector<double> vals(static_cast<std::size_t>(n_paths), 0.0);
    std::vector<char> blown(static_cast<std::size_t>(n_paths), 0);
    parallel_for(n_paths, n_threads, [&](int i) {
      const NoisePath w =
          sample_noise(grid, model.m_noise(),
                       derive_seed(seed, 0x6d6f6dULL + static_cast<std::uint64_t>(ei), i));
      try {
        const Trajectory x = simulate_mild(model, x0, eps_list[ei], w, grid);
        vals[static_cast<std::size_t>(i)] = std::pow(x.sup_norm(), p);
      } catch (const BlowupError&) {
        blown[static_cast<std::size_t>(i)] = 1;
      }
    });
    for (char b : blown) blowups[ei] += b;
    rep.stats.push_back(make_stats(vals, seed));
  }
  for (int b : blowups) rep.n_blowups += b;

  std::vector<double> means;
  for (const auto& s : rep.stats) means.push_back(s.mean);
  std::vector<double> sorted = means;
  std::sort(sorted.begin(), sorted.end());
  rep.median = sorted[sorted.size() / 2];
  rep.pass = rep.n_blowups == 0;
  for (double m : means)
    if (!(m >= 0.5 * rep.median && m <= 2.0 * rep.median)) rep.pass = false;
  return rep;
}

}  // namespace sevo
