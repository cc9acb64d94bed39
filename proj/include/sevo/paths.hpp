#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <stdexcept>
#include <utility>

#include "sevo/spectral.hpp"

namespace sevo {

/// Piecewise-constant U-valued control; row j acts on [t_j, t_{j+1}).
struct ControlPath {
  TimeGrid grid;
  Eigen::MatrixXd values;  // n_steps x channels

  ControlPath() = default;
  ControlPath(const TimeGrid& g, Eigen::MatrixXd v) : grid(g), values(std::move(v)) {
    if (values.rows() != grid.n_steps)
      throw std::invalid_argument("ControlPath: need one control row per time step");
  }

  static ControlPath zero(const TimeGrid& g, int channels) {
    return ControlPath(g, Eigen::MatrixXd::Zero(g.n_steps, channels));
  }

  int channels() const { return static_cast<int>(values.cols()); }
  double energy() const { return 0.5 * grid.dt() * values.squaredNorm(); }
  double squared_l2() const { return grid.dt() * values.squaredNorm(); }
  /// Membership in the level set S_N: integral of |u|^2 at most N.
  bool in_level_set(double level) const { return squared_l2() <= level; }

  /// Same L2 function on a grid refined by an integer factor (left-endpoint
  /// injection of the piecewise-constant values).
  ControlPath refined(int factor) const {
    if (factor < 1) throw std::invalid_argument("ControlPath::refined: factor must be >= 1");
    Eigen::MatrixXd v(grid.n_steps * factor, values.cols());
    for (int j = 0; j < v.rows(); ++j) v.row(j) = values.row(j / factor);
    return ControlPath(TimeGrid(grid.horizon, grid.n_steps * factor), std::move(v));
  }
};

/// Grid-sampled solution path; row j holds the state coefficients at t_j.
struct Trajectory {
  TimeGrid grid;
  Eigen::MatrixXd states;  // (n_steps + 1) x dim

  StateVector state(int j) const { return states.row(j).transpose(); }
  double sup_norm() const { return states.rowwise().norm().maxCoeff(); }
};

/// Max state distance over shared grid times. Accepts nested grids (one
/// step count an integer multiple of the other) with equal horizons.
inline double sup_distance(const Trajectory& a, const Trajectory& b) {
  if (a.grid.horizon != b.grid.horizon)
    throw std::invalid_argument("sup_distance: trajectories live on different horizons");
  const Trajectory& coarse = a.grid.n_steps <= b.grid.n_steps ? a : b;
  const Trajectory& fine = a.grid.n_steps <= b.grid.n_steps ? b : a;
  if (fine.grid.n_steps % coarse.grid.n_steps != 0)
    throw std::invalid_argument("sup_distance: grids are not nested");
  const int factor = fine.grid.n_steps / coarse.grid.n_steps;
  double worst = 0.0;
  for (int j = 0; j <= coarse.grid.n_steps; ++j)
    worst = std::max(worst, (coarse.states.row(j) - fine.states.row(j * factor)).norm());
  return worst;
}

/// Brownian increments per step and channel, tagged with the seed that
/// produced them.
struct NoisePath {
  TimeGrid grid;
  Eigen::MatrixXd increments;  // n_steps x channels
  std::uint64_t seed = 0;
};

}  // namespace sevo
