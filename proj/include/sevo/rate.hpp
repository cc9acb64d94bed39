#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <stdexcept>
#include <utility>
#include <variant>
#include <vector>

#include "sevo/rng.hpp"
#include "sevo/simulate.hpp"
#include "sevo/skeleton.hpp"

namespace sevo {

/// Endpoint event {|z_T - center| <= radius}.
struct EndpointBall {
  StateVector center;
  double radius = 0.0;
};

/// Whole-path tracking target.
struct ExactPath {
  Trajectory path;
};

using RateTarget = std::variant<EndpointBall, ExactPath>;

struct OptimizerOptions {
  int max_iterations = 400;            // per penalty stage
  double gradient_tolerance = 1e-6;    // on the L2-in-time gradient norm
  double feasibility_tolerance = 1e-3;
  int restarts = 3;                    // seeded restarts in addition to u = 0
  std::uint64_t restart_seed = 1337;
  double restart_scale = 1.0;
  int n_threads = 1;
};

struct RateProblem {
  EquationModel model;
  StateVector x0;
  RateTarget target;
  TimeGrid grid;
  std::vector<double> penalty_schedule = {1.0, 10.0, 100.0, 1000.0};
  OptimizerOptions options;
};

struct RateSolution {
  ControlPath u_star;
  double I_value = std::numeric_limits<double>::infinity();
  double residual = std::numeric_limits<double>::infinity();
  double gradient_norm = std::numeric_limits<double>::infinity();
  int iterations = 0;
  bool converged = false;
  int restart_index = -1;
  /// Accepted objective values as (penalty stage, J) pairs for the winning
  /// restart; J is non-increasing within each stage.
  std::vector<std::pair<int, double>> objective_trace;
};

inline double action(const ControlPath& u) { return u.energy(); }

namespace detail {

struct AdjointEval {
  double value = 0.0;     // full objective
  double action = 0.0;    // energy part
  double residual = 0.0;  // target residual (ball-adjusted or sup-distance)
  ControlPath grad;       // raw d(objective)/d(u_j), carries a dt factor
  double grad_l2 = 0.0;   // L2([0,T];U) norm of the gradient
  StateVector z_terminal;
};

/// Objective J(u) = action(u) + penalty terms, differentiated by one backward
/// (adjoint) sweep through the exponential-Euler recursion. Either a terminal
/// functional h(z_T) is supplied, or a path-tracking penalty
/// (w/2) dt sum |z_j - y_j|^2.
struct PenaltySpec {
  std::function<double(const StateVector&)> terminal_value;
  std::function<StateVector(const StateVector&)> terminal_gradient;
  const Trajectory* track_path = nullptr;
  double track_weight = 0.0;
  std::function<double(const Trajectory&)> residual_of;
};

inline AdjointEval adjoint_eval(const EquationModel& model, const StateVector& x0,
                                const TimeGrid& grid, const ControlPath& u,
                                const PenaltySpec& pen) {
  const auto& basis = model.basis();
  const int n = grid.n_steps;
  const int m = model.m_noise();
  const double dt = grid.dt();
  const Propagator prop(basis, dt);
  const bool sine = model.diffusion().kind == DiffusionKind::SineModes;
  const bool has_g = m > 0 && model.diffusion().kind != DiffusionKind::Zero;

  if (pen.track_path && (pen.track_path->states.rows() != n + 1 ||
                         pen.track_path->states.cols() != basis.dim()))
    throw std::invalid_argument("adjoint_eval: tracking path does not match grid");

  Trajectory z = evolve(model, grid, x0, &u.values, 0.0, nullptr, prop);

  AdjointEval ev;
  ev.action = u.energy();
  ev.value = ev.action;
  ev.grad = ControlPath::zero(grid, m);
  ev.z_terminal = z.state(n);
  if (pen.terminal_value) ev.value += pen.terminal_value(ev.z_terminal);
  if (pen.track_path) {
    double acc = 0.0;
    for (int j = 1; j <= n; ++j)
      acc += (z.states.row(j) - pen.track_path->states.row(j)).squaredNorm();
    ev.value += 0.5 * pen.track_weight * dt * acc;
  }
  ev.residual = pen.residual_of(z);

  // Backward sweep: mu_j = dJ/dz_j along the recursion
  // z_{j+1} = S (z_j + dt (f(z_j) + g(z_j) u_j)).
  StateVector mu;
  if (pen.terminal_value)
    mu = pen.terminal_gradient(ev.z_terminal);
  else
    mu = StateVector(pen.track_weight * dt *
                     (z.states.row(n) - pen.track_path->states.row(n)).transpose());
  for (int j = n - 1; j >= 0; --j) {
    StateVector mu_bar = mu;
    prop.apply_adjoint_in_place(mu_bar);
    const Eigen::VectorXd vals = basis.synthesize(z.state(j));
    const Eigen::VectorXd mu_nodes = basis.synthesize(mu_bar);

    if (has_g) {
      Eigen::VectorXd weighted = basis.weights().cwiseProduct(mu_nodes);
      if (sine) weighted.array() *= model.diffusion_factor(vals).array();
      ev.grad.values.row(j) =
          dt * (u.values.row(j) + (model.noise_columns().transpose() * weighted).transpose());
    } else {
      ev.grad.values.row(j) = dt * u.values.row(j);
    }

    mu = mu_bar + dt * basis.project(model.drift_slopes(vals).cwiseProduct(mu_nodes));
    if (has_g && sine) {
      const Eigen::VectorXd gu_nodes = model.noise_columns() * u.values.row(j).transpose();
      mu += dt * basis.project(model.diffusion_factor_slope(vals)
                                   .cwiseProduct(gu_nodes)
                                   .cwiseProduct(mu_nodes));
    }
    if (pen.track_path && j > 0)
      mu += StateVector(pen.track_weight * dt *
                        (z.states.row(j) - pen.track_path->states.row(j)).transpose());
  }
  ev.grad_l2 = ev.grad.values.norm() / std::sqrt(dt);
  return ev;
}

inline void check_target(const RateProblem& p) {
  if (const auto* ball = std::get_if<EndpointBall>(&p.target)) {
    p.model.basis().check_dim(ball->center, "rate target");
    if (ball->radius < 0.0) throw std::invalid_argument("rate target: negative radius");
  } else {
    const auto& tr = std::get<ExactPath>(p.target);
    check_same_grid(tr.path.grid, p.grid, "rate target");
    if (tr.path.states.cols() != p.model.basis().dim())
      throw std::invalid_argument("rate target: path dimension does not match model");
  }
}

inline PenaltySpec make_penalty(const RateTarget& target, double weight) {
  PenaltySpec pen;
  if (const auto* ball = std::get_if<EndpointBall>(&target)) {
    const StateVector center = ball->center;
    const double radius = ball->radius;
    pen.terminal_value = [center, radius, weight](const StateVector& zT) {
      const double gap = std::max(0.0, (zT - center).norm() - radius);
      return 0.5 * weight * gap * gap;
    };
    pen.terminal_gradient = [center, radius, weight](const StateVector& zT) {
      const StateVector diff = zT - center;
      const double dist = diff.norm();
      if (dist <= radius || dist == 0.0) return StateVector(StateVector::Zero(diff.size()));
      return StateVector(weight * (1.0 - radius / dist) * diff);
    };
    pen.residual_of = [center, radius](const Trajectory& z) {
      return std::max(0.0, (z.state(z.grid.n_steps) - center).norm() - radius);
    };
  } else {
    const auto& track = std::get<ExactPath>(target);
    pen.track_path = &track.path;
    pen.track_weight = weight;
    pen.residual_of = [p = &track.path](const Trajectory& z) { return sup_distance(z, *p); };
  }
  return pen;
}

/// Monotone (Armijo) descent with Barzilai-Borwein step proposals.
/// Returns the final evaluation; appends accepted objective values to trace.
inline AdjointEval descend(const EquationModel& model, const StateVector& x0,
                           const TimeGrid& grid, ControlPath& u, const PenaltySpec& pen,
                           const OptimizerOptions& opt, int stage, int* iteration_counter,
                           std::vector<std::pair<int, double>>* trace) {
  auto safe_eval = [&](const ControlPath& cand, bool* ok) {
    try {
      AdjointEval ev = adjoint_eval(model, x0, grid, cand, pen);
      *ok = std::isfinite(ev.value);
      return ev;
    } catch (const BlowupError&) {
      *ok = false;
      return AdjointEval{};
    }
  };
  bool ok = false;
  AdjointEval cur = safe_eval(u, &ok);
  if (!ok) throw BlowupError(0, std::numeric_limits<double>::quiet_NaN());
  if (trace) trace->emplace_back(stage, cur.value);

  double step = 1.0 / (1.0 + cur.grad.values.norm());
  for (int it = 0; it < opt.max_iterations; ++it) {
    if (cur.grad_l2 <= opt.gradient_tolerance) break;
    const double g2 = cur.grad.values.squaredNorm();
    double s = step;
    ControlPath cand = u;
    AdjointEval nxt;
    bool accepted = false;
    for (int bt = 0; bt < 60; ++bt) {
      cand.values = u.values - s * cur.grad.values;
      bool fin = false;
      nxt = safe_eval(cand, &fin);
      if (fin && nxt.value <= cur.value - 1e-4 * s * g2) {
        accepted = true;
        break;
      }
      s *= 0.5;
    }
    ++(*iteration_counter);
    if (!accepted) break;
    const Eigen::MatrixXd du = cand.values - u.values;
    const Eigen::MatrixXd dg = nxt.grad.values - cur.grad.values;
    const double denom = (du.array() * dg.array()).sum();
    step = denom > 0.0 ? std::clamp(du.squaredNorm() / denom, 1e-12, 1e8) : 2.0 * s;
    u = std::move(cand);
    cur = nxt;
    if (trace) trace->emplace_back(stage, cur.value);
  }
  return cur;
}

}  // namespace detail

/// Gradient of action(u) + weight * (target penalty) with respect to every
/// control value, via one adjoint sweep.
inline ControlPath adjoint_gradient(const RateProblem& problem, const ControlPath& u,
                                    double penalty_weight) {
  detail::check_same_grid(u.grid, problem.grid, "adjoint_gradient");
  detail::check_target(problem);
  return detail::adjoint_eval(problem.model, problem.x0, problem.grid, u,
                              detail::make_penalty(problem.target, penalty_weight))
      .grad;
}

/// Penalty-continuation minimization of the control energy subject to the
/// target: each weight in the schedule is solved warm-started, u = 0 plus
/// seeded random restarts hedge non-convexity, the smallest feasible action
/// wins (ties by restart index). An unreachable target is reported as
/// converged = false with the +infinity sentinel.
inline RateSolution minimize_rate(const RateProblem& problem) {
  for (std::size_t i = 1; i < problem.penalty_schedule.size(); ++i)
    if (!(problem.penalty_schedule[i] > problem.penalty_schedule[i - 1]))
      throw std::invalid_argument("minimize_rate: penalty weights must increase strictly");
  if (problem.penalty_schedule.empty())
    throw std::invalid_argument("minimize_rate: empty penalty schedule");
  detail::check_target(problem);
  const OptimizerOptions& opt = problem.options;
  const int m = problem.model.m_noise();
  const int n_starts = 1 + std::max(0, opt.restarts);

  struct Attempt {
    RateSolution sol;
    bool feasible = false;
    bool valid = false;
  };
  std::vector<Attempt> attempts(static_cast<std::size_t>(n_starts));

  parallel_for(n_starts, opt.n_threads, [&](int r) {
    ControlPath u = ControlPath::zero(problem.grid, m);
    if (r > 0) {
      auto rng = make_rng(derive_seed(opt.restart_seed, 0x7261746575ULL, r));
      std::normal_distribution<double> gauss(0.0, opt.restart_scale);
      for (int j = 0; j < u.values.rows(); ++j)
        for (int i = 0; i < m; ++i) u.values(j, i) = gauss(rng);
    }
    Attempt& att = attempts[static_cast<std::size_t>(r)];
    att.sol.restart_index = r;
    int iters = 0;
    detail::AdjointEval last;
    try {
      for (std::size_t s = 0; s < problem.penalty_schedule.size(); ++s) {
        const auto pen = detail::make_penalty(problem.target, problem.penalty_schedule[s]);
        last = detail::descend(problem.model, problem.x0, problem.grid, u, pen, opt,
                               static_cast<int>(s), &iters, &att.sol.objective_trace);
      }
    } catch (const BlowupError&) {
      att.valid = false;
      return;
    }
    att.valid = true;
    att.sol.u_star = u;
    att.sol.residual = last.residual;
    att.sol.gradient_norm = last.grad_l2;
    att.sol.iterations = iters;
    att.feasible = last.residual <= opt.feasibility_tolerance;
    att.sol.I_value = att.feasible ? action(u) : std::numeric_limits<double>::infinity();
    att.sol.converged = att.feasible && last.grad_l2 <= opt.gradient_tolerance;
  });

  int best = -1;
  for (int r = 0; r < n_starts; ++r) {
    const Attempt& a = attempts[static_cast<std::size_t>(r)];
    if (!a.valid) continue;
    if (best < 0) {
      best = r;
      continue;
    }
    const Attempt& b = attempts[static_cast<std::size_t>(best)];
    if (a.feasible != b.feasible) {
      if (a.feasible) best = r;
      continue;
    }
    if (a.feasible) {
      if (a.sol.I_value < b.sol.I_value - 1e-8) best = r;  // ties keep lowest index
    } else {
      if (a.sol.residual < b.sol.residual) best = r;
    }
  }
  if (best < 0) {
    RateSolution none;
    none.u_star = ControlPath::zero(problem.grid, m);
    return none;
  }
  return attempts[static_cast<std::size_t>(best)].sol;
}

struct TerminalFunctional {
  std::function<double(const StateVector&)> value;
  std::function<StateVector(const StateVector&)> gradient;
};

struct TerminalSolution {
  ControlPath u;
  double objective = 0.0;  // action + h(z_T)
  double action_value = 0.0;
  double terminal_value = 0.0;
  double gradient_norm = 0.0;
  int iterations = 0;
};

/// Minimizes action(u) + h(z_T(u)) for a smooth terminal functional h; used
/// for exponential-integral (Laplace) reference values.
inline TerminalSolution minimize_terminal(const EquationModel& model, const StateVector& x0,
                                          const TimeGrid& grid, const TerminalFunctional& h,
                                          const OptimizerOptions& opt) {
  if (!h.value || !h.gradient)
    throw std::invalid_argument("minimize_terminal: functional needs value and gradient");
  detail::PenaltySpec pen;
  pen.terminal_value = h.value;
  pen.terminal_gradient = h.gradient;
  pen.residual_of = [](const Trajectory&) { return 0.0; };

  const int n_starts = 1 + std::max(0, opt.restarts);
  struct Att {
    TerminalSolution sol;
    bool valid = false;
  };
  std::vector<Att> attempts(static_cast<std::size_t>(n_starts));
  parallel_for(n_starts, opt.n_threads, [&](int r) {
    ControlPath u = ControlPath::zero(grid, model.m_noise());
    if (r > 0) {
      auto rng = make_rng(derive_seed(opt.restart_seed, 0x746572ULL, r));
      std::normal_distribution<double> gauss(0.0, opt.restart_scale);
      for (int j = 0; j < u.values.rows(); ++j)
        for (int i = 0; i < model.m_noise(); ++i) u.values(j, i) = gauss(rng);
    }
    int iters = 0;
    try {
      detail::AdjointEval ev = detail::descend(model, x0, grid, u, pen, opt, 0, &iters, nullptr);
      Att& att = attempts[static_cast<std::size_t>(r)];
      att.valid = true;
      att.sol.u = u;
      att.sol.objective = ev.value;
      att.sol.action_value = ev.action;
      att.sol.terminal_value = ev.value - ev.action;
      att.sol.gradient_norm = ev.grad_l2;
      att.sol.iterations = iters;
    } catch (const BlowupError&) {
    }
  });
  int best = -1;
  for (int r = 0; r < n_starts; ++r) {
    if (!attempts[static_cast<std::size_t>(r)].valid) continue;
    if (best < 0 ||
        attempts[static_cast<std::size_t>(r)].sol.objective <
            attempts[static_cast<std::size_t>(best)].sol.objective - 1e-8)
      best = r;
  }
  if (best < 0) throw std::runtime_error("minimize_terminal: every restart blew up");
  return attempts[static_cast<std::size_t>(best)].sol;
}

/// Exact minimum energy (1/2) xi^T W^{-1} xi for linear models with constant
/// per-mode noise: W is the controllability Gramian, assembled in closed form
/// block by block (scalar modes and rotation pairs decouple).
inline double rate_closed_form_linear(const EquationModel& model, const StateVector& x0,
                                      const StateVector& y_star, const TimeGrid& grid) {
  if (model.drift().kind == DriftKind::DoubleWell)
    throw std::invalid_argument("rate_closed_form_linear: drift must be zero or linear");
  if (model.diffusion().kind != DiffusionKind::ConstantModes)
    throw std::invalid_argument("rate_closed_form_linear: diffusion must be constant modes");
  const auto& basis = model.basis();
  basis.check_dim(x0, "rate_closed_form_linear");
  basis.check_dim(y_star, "rate_closed_form_linear");
  const double T = grid.horizon;
  const double c = model.drift().kind == DriftKind::Linear ? model.drift().gain : 0.0;
  const int m = model.m_noise();
  const double inf = std::numeric_limits<double>::infinity();

  auto sigma_at = [&](int coord) {
    return coord < m ? model.diffusion().sigma[coord] : 0.0;
  };

  double total = 0.0;
  int off = 0;
  for (const auto& blk : basis.blocks()) {
    if (blk.kind == BlockKind::Scalar) {
      const double lam = blk.z.real() + c;
      const double sig = sigma_at(off);
      const double xi = y_star[off] - std::exp(lam * T) * x0[off];
      if (sig == 0.0) {
        if (std::abs(xi) > 1e-12 * (1.0 + std::abs(y_star[off]))) return inf;
      } else {
        const double gram = std::abs(2.0 * lam) < 1e-12
                                ? sig * sig * T
                                : sig * sig * (std::exp(2.0 * lam * T) - 1.0) / (2.0 * lam);
        total += 0.5 * xi * xi / gram;
      }
      off += 1;
    } else {
      const double b = blk.z.real() + c;
      const double ak = blk.z.imag();
      const double sp = sigma_at(off), sq = sigma_at(off + 1);
      // xi = y - e^{BT} x0 with e^{Bt} = e^{bt} [[cos, sin], [-sin, cos]](ak t).
      const double ebt = std::exp(b * T), ct = std::cos(ak * T), st = std::sin(ak * T);
      Eigen::Vector2d xi;
      xi[0] = y_star[off] - ebt * (ct * x0[off] + st * x0[off + 1]);
      xi[1] = y_star[off + 1] - ebt * (ct * x0[off + 1] - st * x0[off]);
      const double mavg = 0.5 * (sp * sp + sq * sq);
      const double ddif = 0.5 * (sp * sp - sq * sq);
      const double w = 2.0 * ak, b2 = 2.0 * b;
      double e0, ec, es;
      if (b2 * b2 + w * w < 1e-28) {
        e0 = T;
        ec = T;
        es = 0.0;
      } else {
        e0 = std::abs(b2) < 1e-14 ? T : (std::exp(b2 * T) - 1.0) / b2;
        const double den = b2 * b2 + w * w;
        ec = (std::exp(b2 * T) * (b2 * std::cos(w * T) + w * std::sin(w * T)) - b2) / den;
        es = (std::exp(b2 * T) * (b2 * std::sin(w * T) - w * std::cos(w * T)) + w) / den;
      }
      Eigen::Matrix2d W;
      W(0, 0) = mavg * e0 + ddif * ec;
      W(1, 1) = mavg * e0 - ddif * ec;
      W(0, 1) = W(1, 0) = -ddif * es;
      const double det = W(0, 0) * W(1, 1) - W(0, 1) * W(1, 0);
      const double scale = mavg * e0;
      if (det <= 1e-14 * scale * scale) {
        if (xi.norm() > 1e-12 * (1.0 + y_star.segment(off, 2).norm())) return inf;
      } else {
        Eigen::Vector2d sol;
        sol[0] = (W(1, 1) * xi[0] - W(0, 1) * xi[1]) / det;
        sol[1] = (W(0, 0) * xi[1] - W(1, 0) * xi[0]) / det;
        total += 0.5 * xi.dot(sol);
      }
      off += 2;
    }
  }
  return total;
}

}  // namespace sevo
