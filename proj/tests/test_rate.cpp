#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <limits>
#include <random>
#include <vector>

#include "sevo/rate.hpp"

using namespace sevo;

namespace {

ControlPath random_control(const TimeGrid& grid, int m, double scale, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, scale);
  Eigen::MatrixXd v(grid.n_steps, m);
  for (int j = 0; j < v.rows(); ++j)
    for (int i = 0; i < m; ++i) v(j, i) = g(rng);
  return ControlPath(grid, std::move(v));
}

double objective_ball(const EquationModel& model, const StateVector& x0, const TimeGrid& grid,
                      const ControlPath& u, const StateVector& center, double radius, double w) {
  Trajectory z = solve_skeleton(model, x0, u, grid);
  const double gap = std::max(0.0, (z.state(grid.n_steps) - center).norm() - radius);
  return action(u) + 0.5 * w * gap * gap;
}

double objective_track(const EquationModel& model, const StateVector& x0, const TimeGrid& grid,
                       const ControlPath& u, const Trajectory& y, double w) {
  Trajectory z = solve_skeleton(model, x0, u, grid);
  double acc = 0.0;
  for (int j = 1; j <= grid.n_steps; ++j)
    acc += (z.states.row(j) - y.states.row(j)).squaredNorm();
  return action(u) + 0.5 * w * grid.dt() * acc;
}

// Restriction of the minimum-energy problem to piecewise-constant controls,
// solved exactly for one diagonal mode: the step map and the per-step input
// integral are both closed-form, so the restricted optimum is
// xi^2 / (2 sum_j a_j^2 / dt) with a_j the exact influence coefficients.
double restricted_mode_energy(double lam, double sig, double x0, double y, const TimeGrid& grid) {
  const int n = grid.n_steps;
  const double dt = grid.dt(), T = grid.horizon;
  const double xi = y - std::exp(lam * T) * x0;
  double sum = 0.0;
  for (int j = 0; j < n; ++j) {
    const double tail = T - (j + 1) * dt;
    const double pulse = std::abs(lam) < 1e-14 ? dt : (std::exp(lam * dt) - 1.0) / lam;
    const double a = sig * std::exp(lam * tail) * pulse;
    sum += a * a;
  }
  return 0.5 * xi * xi / (sum / dt);
}

}  // namespace

TEST_CASE("adjoint gradient matches central finite differences") {
  auto model = heat_model(0.8, 0.5, {0.5, 0.25}, 8);
  const int d = model.basis().dim(), m = model.m_noise();
  TimeGrid grid(0.5, 40);
  StateVector x0(d);
  for (int k = 0; k < d; ++k) x0[k] = 0.6 / std::pow(k + 1.0, 2);

  ControlPath u = random_control(grid, m, 0.8, 91);
  std::mt19937_64 rng(417);
  std::uniform_int_distribution<int> pick_row(0, grid.n_steps - 1);
  std::uniform_int_distribution<int> pick_col(0, m - 1);
  const double h = 1e-5;

  SECTION("terminal ball penalty") {
    StateVector center = StateVector::Zero(d);
    center[0] = 0.9;
    center[1] = -0.2;
    const double radius = 0.1, w = 7.0;
    RateProblem prob{model, x0, EndpointBall{center, radius}, grid, {1.0}, {}};
    ControlPath grad = adjoint_gradient(prob, u, w);
    for (int trial = 0; trial < 20; ++trial) {
      const int r = pick_row(rng), c = pick_col(rng);
      ControlPath up = u, dn = u;
      up.values(r, c) += h;
      dn.values(r, c) -= h;
      const double fd = (objective_ball(model, x0, grid, up, center, radius, w) -
                         objective_ball(model, x0, grid, dn, center, radius, w)) /
                        (2.0 * h);
      CHECK(std::abs(grad.values(r, c) - fd) <= 1e-4 * std::max(1e-8, std::abs(fd)));
    }
  }

  SECTION("whole-path tracking penalty") {
    Trajectory y = solve_skeleton(model, x0, random_control(grid, m, 0.5, 92), grid);
    const double w = 3.0;
    RateProblem prob{model, x0, ExactPath{y}, grid, {1.0}, {}};
    ControlPath grad = adjoint_gradient(prob, u, w);
    for (int trial = 0; trial < 12; ++trial) {
      const int r = pick_row(rng), c = pick_col(rng);
      ControlPath up = u, dn = u;
      up.values(r, c) += h;
      dn.values(r, c) -= h;
      const double fd = (objective_track(model, x0, grid, up, y, w) -
                         objective_track(model, x0, grid, dn, y, w)) /
                        (2.0 * h);
      CHECK(std::abs(grad.values(r, c) - fd) <= 1e-4 * std::max(1e-8, std::abs(fd)));
    }
  }
}

TEST_CASE("closed-form minimum energy matches dense quadratic solves") {
  SECTION("diagonal modes against the restricted discrete problem") {
    EquationModel model(SpectralBasis::modal({-0.5, -0.2}, 1.0), DriftSpec::linear(0.1),
                        DiffusionSpec::constant_modes({0.9, 0.7}));
    TimeGrid grid(1.0, 4000);
    StateVector x0(2), y(2);
    x0 << 0.4, -0.3;
    y << 1.1, 0.5;
    const double closed = rate_closed_form_linear(model, x0, y, grid);
    const double dense = restricted_mode_energy(-0.5 + 0.1, 0.9, x0[0], y[0], grid) +
                         restricted_mode_energy(-0.2 + 0.1, 0.7, x0[1], y[1], grid);
    CHECK(std::abs(closed - dense) <= 1e-8 * (1.0 + std::abs(closed)));
    CHECK(closed > 0.1);
  }

  SECTION("rotation pairs against a Simpson-assembled Gramian") {
    EquationModel model(SpectralBasis::periodic_advection(2, 1.0, 1.3, -0.15),
                        DriftSpec::linear(0.1),
                        DiffusionSpec::constant_modes({0.8, 0.5, 0.6, 0.9}));
    TimeGrid grid(1.0, 100);
    const double T = grid.horizon;
    StateVector x0(4), y(4);
    x0 << 0.3, -0.2, 0.1, 0.4;
    y << -0.5, 0.7, 0.6, -0.1;

    double dense = 0.0;
    int off = 0;
    for (const auto& blk : model.basis().blocks()) {
      REQUIRE(blk.kind == BlockKind::Rotation);
      const double b = blk.z.real() + 0.1, ak = blk.z.imag();
      const Eigen::Matrix2d gg =
          Eigen::Vector2d(model.diffusion().sigma[off] * model.diffusion().sigma[off],
                          model.diffusion().sigma[off + 1] * model.diffusion().sigma[off + 1])
              .asDiagonal();
      auto flow = [&](double t) {
        Eigen::Matrix2d r;
        const double c = std::cos(ak * t), s = std::sin(ak * t);
        r << c, s, -s, c;
        return Eigen::Matrix2d(std::exp(b * t) * r);
      };
      const int panels = 20000;
      const double hh = T / panels;
      Eigen::Matrix2d W = Eigen::Matrix2d::Zero();
      for (int i = 0; i <= panels; ++i) {
        const Eigen::Matrix2d e = flow(i * hh);
        const double coef = (i == 0 || i == panels) ? 1.0 : (i % 2 == 1 ? 4.0 : 2.0);
        W += coef * e * gg * e.transpose();
      }
      W *= hh / 3.0;
      const Eigen::Vector2d xi =
          y.segment(off, 2) - flow(T) * Eigen::Vector2d(x0.segment(off, 2));
      dense += 0.5 * xi.dot(W.inverse() * xi);
      off += 2;
    }
    const double closed = rate_closed_form_linear(model, x0, y, grid);
    CHECK(std::abs(closed - dense) <= 1e-8 * (1.0 + std::abs(closed)));
    CHECK(closed > 0.1);
  }

  SECTION("zero eigenvalue reduces to the elementary formula") {
    EquationModel model(SpectralBasis::modal({0.0}, 1.0), DriftSpec::zero(),
                        DiffusionSpec::constant_modes({1.0}));
    TimeGrid grid(2.0, 10);
    StateVector x0(1), y(1);
    x0 << 0.3;
    y << 1.7;
    const double expect = (1.7 - 0.3) * (1.7 - 0.3) / (2.0 * 2.0);
    CHECK(rate_closed_form_linear(model, x0, y, grid) == Catch::Approx(expect).epsilon(1e-12));

    EquationModel near(SpectralBasis::modal({1e-9}, 1.0), DriftSpec::zero(),
                       DiffusionSpec::constant_modes({1.0}));
    CHECK(rate_closed_form_linear(near, x0, y, grid) ==
          Catch::Approx(expect).epsilon(1e-6));
  }

  SECTION("uncontrolled coordinates are unreachable unless already on target") {
    EquationModel model(SpectralBasis::modal({-0.3, -0.4}, 1.0), DriftSpec::zero(),
                        DiffusionSpec::constant_modes({0.8}));
    TimeGrid grid(1.0, 10);
    StateVector x0(2), y(2);
    x0 << 0.5, 0.2;
    y << 1.0, 0.9;
    CHECK(std::isinf(rate_closed_form_linear(model, x0, y, grid)));

    y[1] = std::exp(-0.4) * x0[1];  // free flow of the silent mode
    const double partial = rate_closed_form_linear(model, x0, y, grid);
    CHECK(std::isfinite(partial));
    EquationModel lone(SpectralBasis::modal({-0.3}, 1.0), DriftSpec::zero(),
                       DiffusionSpec::constant_modes({0.8}));
    StateVector x1(1), y1(1);
    x1 << 0.5;
    y1 << 1.0;
    CHECK(partial == Catch::Approx(rate_closed_form_linear(lone, x1, y1, grid)).epsilon(1e-12));
  }

  SECTION("nonlinear drift or state-dependent noise is rejected") {
    auto dw = heat_model(0.5, 0.3, {0.4}, 4);
    TimeGrid grid(1.0, 10);
    StateVector x0 = StateVector::Zero(4), y = StateVector::Ones(4);
    CHECK_THROWS_AS(rate_closed_form_linear(dw, x0, y, grid), std::invalid_argument);
    EquationModel sine(SpectralBasis::modal({-0.3}, 1.0), DriftSpec::zero(),
                       DiffusionSpec::sine_modes({0.4}));
    StateVector x1 = StateVector::Zero(1), y1 = StateVector::Ones(1);
    CHECK_THROWS_AS(rate_closed_form_linear(sine, x1, y1, grid), std::invalid_argument);
  }
}

TEST_CASE("penalty continuation reproduces the linear minimum energy") {
  EquationModel model(SpectralBasis::modal({-0.5, -0.2}, 1.0), DriftSpec::zero(),
                      DiffusionSpec::constant_modes({0.9, 0.7}));
  TimeGrid grid(1.0, 400);
  StateVector x0(2), y(2);
  x0 << 0.4, -0.3;
  y << 1.1, 0.5;

  RateProblem prob{model, x0, EndpointBall{y, 0.0}, grid,
                   {1.0, 10.0, 100.0, 1e3, 1e4, 1e5}, {}};
  prob.options.max_iterations = 800;
  prob.options.gradient_tolerance = 1e-5;
  prob.options.feasibility_tolerance = 1e-3;

  RateSolution sol = minimize_rate(prob);
  const double closed = rate_closed_form_linear(model, x0, y, grid);

  REQUIRE(sol.residual <= 1e-3);
  CHECK(sol.converged);
  CHECK(sol.restart_index == 0);
  CHECK(std::abs(sol.I_value - closed) <= 0.01 * closed);
  CHECK(sol.I_value == action(sol.u_star));
  CHECK(sol.u_star.in_level_set(2.0 * sol.I_value * (1.0 + 1e-12)));

  SECTION("objective decreases monotonically within each penalty stage") {
    for (std::size_t i = 1; i < sol.objective_trace.size(); ++i) {
      if (sol.objective_trace[i].first != sol.objective_trace[i - 1].first) continue;
      CHECK(sol.objective_trace[i].second <=
            sol.objective_trace[i - 1].second + 1e-12 * (1.0 + std::abs(sol.objective_trace[i - 1].second)));
    }
  }
}

TEST_CASE("stationary targets cost nothing and unreachable ones return the sentinel") {
  auto model = heat_model(0.6, 0.4, {0.3}, 6);
  TimeGrid grid(0.5, 100);
  StateVector x0(6);
  for (int k = 0; k < 6; ++k) x0[k] = 0.5 / std::pow(k + 1.0, 2);
  Trajectory free_flow = solve_skeleton(model, x0, ControlPath::zero(grid, 1), grid);

  SECTION("free endpoint needs zero control") {
    RateProblem prob{model, x0, EndpointBall{free_flow.state(100), 0.0}, grid, {1.0, 100.0}, {}};
    RateSolution sol = minimize_rate(prob);
    CHECK(sol.converged);
    CHECK(sol.I_value <= 1e-12);
    CHECK(sol.restart_index == 0);
    CHECK(sol.u_star.values.norm() <= 1e-6);
  }

  SECTION("without noise channels every other endpoint is unreachable") {
    EquationModel silent(SpectralBasis::dirichlet_heat(6, 1.0),
                         DriftSpec::double_well(0.6, 0.4), DiffusionSpec::zero());
    StateVector center = free_flow.state(100);
    center[0] += 1.0;
    RateProblem prob{silent, x0, EndpointBall{center, 0.1}, grid, {1.0, 100.0}, {}};
    RateSolution sol = minimize_rate(prob);
    CHECK_FALSE(sol.converged);
    CHECK(std::isinf(sol.I_value));
    CHECK(sol.residual == Catch::Approx(0.9).margin(1e-6));
  }
}

TEST_CASE("action is quadratic and the unweighted gradient is the control") {
  EquationModel model(SpectralBasis::modal({-0.5, -0.2}, 1.0), DriftSpec::zero(),
                      DiffusionSpec::constant_modes({0.9, 0.7}));
  TimeGrid grid(1.0, 50);
  ControlPath u = random_control(grid, 2, 1.0, 77);
  CHECK(action(ControlPath(grid, Eigen::MatrixXd(2.5 * u.values))) ==
        Catch::Approx(6.25 * action(u)).epsilon(1e-12));

  StateVector x0 = StateVector::Zero(2), y = StateVector::Ones(2);
  RateProblem prob{model, x0, EndpointBall{y, 0.0}, grid, {1.0}, {}};
  ControlPath grad = adjoint_gradient(prob, u, 0.0);
  CHECK((grad.values - grid.dt() * u.values).norm() <= 1e-15 * u.values.norm());
}

TEST_CASE("larger target balls never cost more") {
  EquationModel model(SpectralBasis::modal({-0.5, -0.2}, 1.0), DriftSpec::zero(),
                      DiffusionSpec::constant_modes({0.9, 0.7}));
  TimeGrid grid(1.0, 200);
  StateVector x0(2), y(2);
  x0 << 0.4, -0.3;
  y << 1.1, 0.5;
  double prev = std::numeric_limits<double>::infinity();
  for (double radius : {0.0, 0.05, 0.1, 0.2}) {
    RateProblem prob{model, x0, EndpointBall{y, radius}, grid,
                     {1.0, 10.0, 100.0, 1e3, 1e4, 1e5}, {}};
    prob.options.max_iterations = 800;
    prob.options.restarts = 1;
    RateSolution sol = minimize_rate(prob);
    REQUIRE(sol.residual <= prob.options.feasibility_tolerance);
    CHECK(sol.I_value <= prev + 1e-8);
    prev = sol.I_value;
  }
  CHECK(prev > 0.0);
}

TEST_CASE("path tracking recovers a control of comparable energy") {
  auto model = heat_model(0.5, 0.3, {0.4, 0.2}, 6);
  TimeGrid grid(0.5, 100);
  StateVector x0(6);
  for (int k = 0; k < 6; ++k) x0[k] = 0.4 / std::pow(k + 1.0, 2);
  ControlPath u0 = random_control(grid, 2, 1.0, 55);
  u0.values *= std::sqrt(1.0 / u0.squared_l2());
  Trajectory y = solve_skeleton(model, x0, u0, grid);

  RateProblem prob{model, x0, ExactPath{y}, grid, {10.0, 100.0, 1e3, 1e4, 1e5}, {}};
  prob.options.max_iterations = 400;
  prob.options.feasibility_tolerance = 5e-3;
  prob.options.restarts = 1;
  RateSolution sol = minimize_rate(prob);

  REQUIRE(sol.residual <= 5e-3);
  CHECK(sol.I_value <= action(u0) * 1.02 + 1e-9);
  CHECK(sol.I_value > 1e-4);
  for (std::size_t i = 1; i < sol.objective_trace.size(); ++i) {
    if (sol.objective_trace[i].first != sol.objective_trace[i - 1].first) continue;
    CHECK(sol.objective_trace[i].second <= sol.objective_trace[i - 1].second + 1e-10);
  }
}

TEST_CASE("rate problem validation") {
  EquationModel model(SpectralBasis::modal({-0.5}, 1.0), DriftSpec::zero(),
                      DiffusionSpec::constant_modes({1.0}));
  TimeGrid grid(1.0, 20), other(1.0, 30);
  StateVector x0 = StateVector::Zero(1), y = StateVector::Ones(1);
  RateProblem prob{model, x0, EndpointBall{y, 0.0}, grid, {1.0}, {}};

  CHECK_THROWS_AS(adjoint_gradient(prob, ControlPath::zero(other, 1), 1.0),
                  std::invalid_argument);

  RateProblem bad_radius = prob;
  bad_radius.target = EndpointBall{y, -0.1};
  CHECK_THROWS_AS(minimize_rate(bad_radius), std::invalid_argument);

  RateProblem bad_track = prob;
  bad_track.target = ExactPath{Trajectory{other, Eigen::MatrixXd::Zero(31, 1)}};
  CHECK_THROWS_AS(minimize_rate(bad_track), std::invalid_argument);

  RateProblem empty = prob;
  empty.penalty_schedule = {};
  CHECK_THROWS_AS(minimize_rate(empty), std::invalid_argument);

  RateProblem flat = prob;
  flat.penalty_schedule = {1.0, 1.0};
  CHECK_THROWS_AS(minimize_rate(flat), std::invalid_argument);

  TerminalFunctional missing;
  CHECK_THROWS_AS(minimize_terminal(model, x0, grid, missing, {}), std::invalid_argument);
}
