#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <limits>
#include <numbers>
#include <random>

#include "sevo/model.hpp"

using namespace sevo;

namespace {

// Projection of nodal data through an independently built midpoint rule with
// `panels` panels, bypassing the basis-owned quadrature.
StateVector refined_projection(const SpectralBasis& basis, const DriftSpec& drift,
                               const StateVector& v, int panels) {
  const double ell = basis.domain_length();
  const double h = ell / panels;
  const int d = basis.dim();
  StateVector out = StateVector::Zero(d);
  for (int q = 0; q < panels; ++q) {
    const double x = (q + 0.5) * h;
    // Evaluate u(x) and each phi_k(x) directly from the block structure.
    double ux = 0.0;
    Eigen::VectorXd phi(d);
    int off = 0;
    const double amp = std::sqrt(2.0 / ell);
    for (const auto& blk : basis.blocks()) {
      if (blk.kind == BlockKind::Scalar) {
        phi[off] = amp * std::sin((off + 1) * std::numbers::pi * x / ell);
        ux += v[off] * phi[off];
        off += 1;
      } else {
        const int pair = off / 2 + 1;
        const double freq = 2.0 * std::numbers::pi * pair / ell;
        phi[off] = amp * std::cos(freq * x);
        phi[off + 1] = amp * std::sin(freq * x);
        ux += v[off] * phi[off] + v[off + 1] * phi[off + 1];
        off += 2;
      }
    }
    out += h * drift.value(ux) * phi;
  }
  return out;
}

}  // namespace

TEST_CASE("double-well drift values, slopes and declared bounds") {
  const double lam = 0.2, mu = 1.0;
  DriftSpec f = DriftSpec::double_well(lam, mu);

  CHECK(f.value(0.0) == 0.0);
  CHECK(f.value(1.0) == Catch::Approx(2.0 * mu - 2.0 * lam).epsilon(1e-14));
  CHECK(f.value(-3.0) == Catch::Approx(-f.value(3.0)).epsilon(1e-14));

  // Slopes against central differences.
  for (double y : {-7.3, -1.0, -0.2, 0.0, 0.4, 1.9, 12.0}) {
    const double h = 1e-6 * (1.0 + std::abs(y));
    const double fd = (f.value(y + h) - f.value(y - h)) / (2.0 * h);
    CHECK(f.slope(y) == Catch::Approx(fd).margin(1e-6));
  }

  // Dense scan: the true slope supremum is 2 mu (attained at 0) and the
  // declared one-sided bound 2 mu + 4 lambda dominates it.
  double sup_slope = -1e300, sup_growth = 0.0;
  for (int i = 0; i <= 600000; ++i) {
    const double y = -30.0 + i * 1e-4;
    sup_slope = std::max(sup_slope, f.slope(y));
    sup_growth = std::max(sup_growth, std::abs(f.value(y)) / (1.0 + std::abs(y)));
  }
  CHECK(sup_slope == Catch::Approx(2.0 * mu).margin(1e-6));
  CHECK(sup_slope <= f.monotone_bound());
  CHECK(sup_growth <= f.growth_bound() + 1e-12);

  CHECK(f.monotone_bound() == Catch::Approx(2.0 * mu + 4.0 * lam));
  CHECK_THROWS_AS(DriftSpec::double_well(-0.1, 1.0), std::invalid_argument);
}

TEST_CASE("collocated drift matches a 10x refined quadrature") {
  auto model = heat_model(0.2, 1.0, {0.5}, 24);
  const auto& basis = model.basis();

  StateVector v = StateVector::Zero(basis.dim());
  SECTION("single mode") { v[0] = 0.8; }
  SECTION("smooth multi-mode state") {
    std::mt19937_64 rng(42);
    std::normal_distribution<double> g(0.0, 1.0);
    for (int k = 0; k < basis.dim(); ++k) v[k] = g(rng) / ((k + 1.0) * (k + 1.0));
  }

  const StateVector coarse = model.drift_apply(v);
  const StateVector fine = refined_projection(basis, model.drift(), v, 10 * basis.n_nodes());
  REQUIRE(coarse.norm() > 0.1);
  CHECK((coarse - fine).norm() <= 1e-6 * coarse.norm());
}

TEST_CASE("collocated drift on the periodic basis matches refined quadrature") {
  auto model = hyperbolic_model(1.0, 0.0, 0.2, 1.0, {0.5}, 12);
  const auto& basis = model.basis();
  StateVector v = StateVector::Zero(basis.dim());
  std::mt19937_64 rng(7);
  std::normal_distribution<double> g(0.0, 1.0);
  for (int k = 0; k < basis.dim(); ++k) v[k] = g(rng) / std::pow(k / 2 + 1.0, 2);

  const StateVector coarse = model.drift_apply(v);
  const StateVector fine = refined_projection(basis, model.drift(), v, 10 * basis.n_nodes());
  REQUIRE(coarse.norm() > 1e-3);
  CHECK((coarse - fine).norm() <= 1e-6 * coarse.norm());
}

TEST_CASE("diffusion matrix agrees with channel-wise application") {
  auto model = heat_model(0.2, 1.0, {0.5, -0.3, 0.1}, 16);
  std::mt19937_64 rng(11);
  std::normal_distribution<double> g(0.0, 1.0);
  for (int rep = 0; rep < 20; ++rep) {
    StateVector v(16);
    for (int k = 0; k < 16; ++k) v[k] = g(rng);
    Eigen::VectorXd u(3);
    for (int i = 0; i < 3; ++i) u[i] = g(rng);
    const StateVector via_matrix = model.diffusion_matrix(v) * u;
    const StateVector direct = model.diffusion_apply(v, u);
    CHECK((via_matrix - direct).norm() <= 1e-13 * (1.0 + direct.norm()));
  }
}

TEST_CASE("constant-mode diffusion projects onto unit coordinate columns") {
  EquationModel model(SpectralBasis::dirichlet_heat(12, 1.0), DriftSpec::zero(),
                      DiffusionSpec::constant_modes({0.7, 0.4}));
  StateVector v = StateVector::Random(12);
  const Eigen::MatrixXd G = model.diffusion_matrix(v);
  Eigen::MatrixXd expected = Eigen::MatrixXd::Zero(12, 2);
  expected(0, 0) = 0.7;
  expected(1, 1) = 0.4;
  CHECK((G - expected).cwiseAbs().maxCoeff() < 1e-12);
  // State independence: same matrix at a different state.
  const Eigen::MatrixXd G2 = model.diffusion_matrix(StateVector::Zero(12));
  CHECK((G - G2).cwiseAbs().maxCoeff() == 0.0);
  CHECK(model.lipschitz_bound() == 0.0);
}

TEST_CASE("sine-factor diffusion stays within its declared Lipschitz constant") {
  auto model = heat_model(0.0, 0.0, {0.5, 0.25}, 16);
  const double D = model.lipschitz_bound();
  CHECK(D == Catch::Approx(std::sqrt(0.5 * 0.5 + 0.25 * 0.25) * std::sqrt(2.0)));

  std::mt19937_64 rng(23);
  std::normal_distribution<double> g(0.0, 1.0);
  double worst = 0.0;
  for (int rep = 0; rep < 1000; ++rep) {
    StateVector x(16), y(16);
    for (int k = 0; k < 16; ++k) {
      x[k] = 3.0 * g(rng);
      y[k] = (rep % 2 == 0) ? 3.0 * g(rng) : x[k] + 1e-4 * g(rng);
    }
    const double dist = (x - y).norm();
    if (dist == 0.0) continue;
    worst = std::max(worst, (model.diffusion_matrix(x) - model.diffusion_matrix(y)).norm() / dist);
  }
  CHECK(worst <= D + 1e-9);
  CHECK(worst > 0.3 * D);  // the bound is not vacuous at this sample size
}

TEST_CASE("linear drift has empirical semimonotone quotient equal to its gain") {
  const double c = -0.7;
  EquationModel model(SpectralBasis::dirichlet_heat(10, 1.0), DriftSpec::linear(c),
                      DiffusionSpec::zero());
  std::mt19937_64 rng(5);
  std::normal_distribution<double> g(0.0, 1.0);
  for (int rep = 0; rep < 50; ++rep) {
    StateVector x(10), y(10);
    for (int k = 0; k < 10; ++k) {
      x[k] = g(rng);
      y[k] = g(rng);
    }
    const StateVector dx = x - y;
    if (dx.squaredNorm() == 0.0) continue;
    const double q = (model.drift_apply(x) - model.drift_apply(y)).dot(dx) / dx.squaredNorm();
    CHECK(q == Catch::Approx(c).margin(1e-9));
  }
  CHECK(model.monotone_bound() == c);
}

TEST_CASE("hypothesis verifier passes the shipped models and flags corrupted constants") {
  auto model = heat_model(0.2, 1.0, {0.5}, 24);
  auto report = verify_hypotheses(model, 600, 10.0, 2024);
  for (const auto& cl : report.clauses) {
    INFO(cl.id << " declared=" << cl.declared << " empirical=" << cl.empirical);
    CHECK(cl.pass);
  }
  CHECK(report.all_pass());

  // The empirical supremum must sit close enough to the declared constants
  // that halving either of them is detected.
  auto bad_m = model.with_monotone_bound(0.5 * model.monotone_bound());
  auto rep_m = verify_hypotheses(bad_m, 600, 10.0, 2024);
  CHECK_FALSE(rep_m.clause("semimonotone_drift").pass);
  CHECK_FALSE(rep_m.all_pass());

  auto bad_d = model.with_lipschitz_bound(0.5 * model.lipschitz_bound());
  auto rep_d = verify_hypotheses(bad_d, 600, 10.0, 2024);
  CHECK_FALSE(rep_d.clause("lipschitz_diffusion").pass);

  auto hyp = hyperbolic_model(1.0, 0.25, 0.2, 1.0, {0.5, 0.3}, 12);
  CHECK(verify_hypotheses(hyp, 400, 10.0, 99).all_pass());

  // Determinism of the report for a fixed seed.
  auto again = verify_hypotheses(model, 600, 10.0, 2024);
  for (std::size_t i = 0; i < report.clauses.size(); ++i)
    CHECK(again.clauses[i].empirical == report.clauses[i].empirical);
}

TEST_CASE("model construction and evaluation reject invalid inputs") {
  CHECK_THROWS_AS(heat_model(0.2, 1.0, {0.5, 0.5, 0.5}, 2), std::invalid_argument);

  auto model = heat_model(0.2, 1.0, {0.5}, 8);
  CHECK_THROWS_AS(model.diffusion_apply(StateVector::Zero(8), Eigen::VectorXd::Zero(3)),
                  std::invalid_argument);
  CHECK_THROWS_AS(model.drift_apply(StateVector::Zero(4)), std::invalid_argument);

  StateVector bad = StateVector::Zero(8);
  bad[0] = std::numeric_limits<double>::infinity();
  CHECK_THROWS_AS(model.drift_apply(bad), std::domain_error);

  // Zero-channel diffusion is legal and yields the zero field.
  EquationModel nodiff(SpectralBasis::dirichlet_heat(6, 1.0), DriftSpec::linear(1.0),
                       DiffusionSpec::zero());
  CHECK(nodiff.m_noise() == 0);
  CHECK(nodiff.diffusion_apply(StateVector::Zero(6), Eigen::VectorXd(0)).norm() == 0.0);
}
