#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <complex>
#include <numbers>
#include <random>

#include "sevo/rng.hpp"
#include "sevo/spectral.hpp"

using namespace sevo;

namespace {

StateVector random_state(std::mt19937_64& rng, int d, double scale = 1.0) {
  std::normal_distribution<double> g(0.0, scale);
  StateVector v(d);
  for (int i = 0; i < d; ++i) v[i] = g(rng);
  return v;
}

}  // namespace

TEST_CASE("time grid basics") {
  TimeGrid g(2.0, 8);
  CHECK(g.dt() == Catch::Approx(0.25));
  CHECK(g.time(0) == 0.0);
  CHECK(g.time(8) == Catch::Approx(2.0));
  CHECK_THROWS_AS(TimeGrid(0.0, 4), std::invalid_argument);
  CHECK_THROWS_AS(TimeGrid(1.0, 0), std::invalid_argument);
}

TEST_CASE("heat basis spectrum and growth record") {
  auto basis = SpectralBasis::dirichlet_heat(32, 1.0);
  CHECK(basis.dim() == 32);
  CHECK(basis.growth_scale() == 1.0);
  CHECK(basis.growth_rate() == 0.0);
  CHECK(basis.blocks()[0].z.real() == Catch::Approx(-std::numbers::pi * std::numbers::pi));
  CHECK(basis.blocks()[31].z.real() == Catch::Approx(-1024.0 * std::numbers::pi * std::numbers::pi));
}

TEST_CASE("quadrature is positive and Parseval-exact") {
  for (auto basis : {SpectralBasis::dirichlet_heat(32, 1.0),
                     SpectralBasis::dirichlet_heat(7, 2.5),
                     SpectralBasis::periodic_advection(16, 1.0, 1.0, 0.25),
                     SpectralBasis::periodic_advection(5, 3.0, -0.7, 0.0)}) {
    CHECK(basis.n_nodes() == 4 * basis.dim());
    CHECK(basis.weights().minCoeff() > 0.0);
    CHECK(basis.nodes().minCoeff() > 0.0);
    CHECK(basis.nodes().maxCoeff() < basis.domain_length());
    CHECK(basis.parseval_defect() < 1e-10);
  }
}

TEST_CASE("coefficient norm equals quadrature norm of the reconstruction") {
  auto rng = make_rng(41);
  for (auto basis : {SpectralBasis::dirichlet_heat(16, 1.0),
                     SpectralBasis::periodic_advection(8, 2.0, 0.5, 0.1)}) {
    for (int rep = 0; rep < 20; ++rep) {
      StateVector v = random_state(rng, basis.dim(), 2.0);
      const double qn = basis.quadrature_norm(basis.synthesize(v));
      CHECK(qn == Catch::Approx(v.norm()).epsilon(1e-8));
    }
  }
}

TEST_CASE("semigroup identity at t = 0 and negative-time rejection") {
  auto basis = SpectralBasis::dirichlet_heat(8, 1.0);
  auto rng = make_rng(7);
  StateVector v = random_state(rng, 8);
  CHECK((semigroup_apply(basis, 0.0, v) - v).norm() == 0.0);
  CHECK_THROWS_AS(semigroup_apply(basis, -1e-9, v), std::invalid_argument);
  StateVector wrong(7);
  wrong.setZero();
  CHECK_THROWS_AS(semigroup_apply(basis, 0.5, wrong), std::invalid_argument);
}

TEST_CASE("scalar heat mode decays at its eigenvalue rate") {
  auto basis = SpectralBasis::dirichlet_heat(4, 1.0);
  StateVector v = StateVector::Zero(4);
  v[0] = 1.0;
  const double lam = basis.blocks()[0].z.real();
  StateVector w = semigroup_apply(basis, 0.3, v);
  CHECK(w[0] == Catch::Approx(std::exp(lam * 0.3)).epsilon(1e-14));
  CHECK(w.tail(3).norm() == 0.0);
}

TEST_CASE("rotation blocks: scaled planar rotation, isometric when b = 0") {
  auto basis = SpectralBasis::periodic_advection(3, 1.0, 1.0, 0.0);
  auto rng = make_rng(11);
  StateVector v = random_state(rng, basis.dim());
  StateVector w = semigroup_apply(basis, 0.77, v);
  CHECK(w.norm() == Catch::Approx(v.norm()).epsilon(1e-13));

  // Pure transport of the first cosine mode: u(t,x) = cos(kappa(x + a t)).
  const double a = 1.0, t = 0.21, kappa = 2.0 * std::numbers::pi;
  StateVector e = StateVector::Zero(basis.dim());
  e[0] = 1.0;
  StateVector s = semigroup_apply(basis, t, e);
  CHECK(s[0] == Catch::Approx(std::cos(kappa * a * t)).margin(1e-14));
  CHECK(s[1] == Catch::Approx(-std::sin(kappa * a * t)).margin(1e-14));
}

TEST_CASE("semigroup law and growth bound hold on random states") {
  auto rng = make_rng(2024);
  std::uniform_real_distribution<double> tdist(0.0, 1.5);
  for (auto basis : {SpectralBasis::dirichlet_heat(24, 1.0),
                     SpectralBasis::periodic_advection(12, 1.0, 1.3, 0.4)}) {
    for (int rep = 0; rep < 50; ++rep) {
      StateVector v = random_state(rng, basis.dim());
      const double s = tdist(rng), t = tdist(rng);
      StateVector via_two = semigroup_apply(basis, t, semigroup_apply(basis, s, v));
      StateVector direct = semigroup_apply(basis, s + t, v);
      CHECK((via_two - direct).norm() <= 1e-10 * v.norm());
      const double bound =
          basis.growth_scale() * std::exp(basis.growth_rate() * (s + t)) * v.norm();
      CHECK(direct.norm() <= bound * (1.0 + 1e-12));
    }
  }
}

TEST_CASE("propagator matches semigroup_apply and its adjoint is the transpose") {
  auto basis = SpectralBasis::periodic_advection(6, 1.0, 0.9, -0.2);
  const double dt = 0.05;
  Propagator prop(basis, dt);
  auto rng = make_rng(5);
  for (int rep = 0; rep < 10; ++rep) {
    StateVector v = random_state(rng, basis.dim());
    StateVector w = random_state(rng, basis.dim());
    CHECK((prop.apply(v) - semigroup_apply(basis, dt, v)).norm() < 1e-15);
    StateVector pv = prop.apply(v);
    StateVector ptw = w;
    prop.apply_adjoint_in_place(ptw);
    CHECK(pv.dot(w) == Catch::Approx(v.dot(ptw)).epsilon(1e-12));
  }
}

TEST_CASE("yosida eigenvalues: formula, monotonicity, convergence rate") {
  // Scalar formula k*lam/(k - lam).
  auto basis = SpectralBasis::modal({-2.0}, 1.0);
  StateVector e(1);
  e[0] = 1.0;
  const double k = 50.0;
  CHECK(yosida_apply(basis, k, e)[0] == Catch::Approx(k * -2.0 / (k + 2.0)).epsilon(1e-14));

  // Monotone approach from above (toward lam) as k grows, for lam <= 0.
  auto heat = SpectralBasis::dirichlet_heat(16, 1.0);
  StateVector v = StateVector::Ones(16);
  double prev_err = std::numeric_limits<double>::infinity();
  for (double kk : {10.0, 100.0, 1000.0, 10000.0}) {
    const double err = (yosida_apply(heat, kk, v) - heat.apply_generator(v)).norm();
    CHECK(err < prev_err);
    prev_err = err;
  }

  // First-order convergence in 1/k: error ratio between k = 1e2 and k = 1e3
  // equals (k2 - lam)/(k1 - lam) ~ 10 for a mild mode.
  auto mild = SpectralBasis::modal({-0.5}, 1.0);
  StateVector one(1);
  one[0] = 1.0;
  const double e2 = std::abs(yosida_apply(mild, 100.0, one)[0] + 0.5);
  const double e3 = std::abs(yosida_apply(mild, 1000.0, one)[0] + 0.5);
  CHECK(e2 / e3 == Catch::Approx(10.0).epsilon(0.05));
}

TEST_CASE("yosida action on rotation blocks matches the dense 2x2 resolvent") {
  auto basis = SpectralBasis::periodic_advection(4, 1.0, 1.1, 0.3);
  auto rng = make_rng(13);
  StateVector v = random_state(rng, basis.dim());
  const double k = 37.0;
  StateVector got = yosida_apply(basis, k, v);
  for (int b = 0; b < 4; ++b) {
    const auto z = basis.blocks()[b].z;
    Eigen::Matrix2d B;
    B << z.real(), z.imag(), -z.imag(), z.real();
    Eigen::Matrix2d Ak = k * B * (k * Eigen::Matrix2d::Identity() - B).inverse();
    Eigen::Vector2d pq(v[2 * b], v[2 * b + 1]);
    Eigen::Vector2d expect = Ak * pq;
    CHECK(got[2 * b] == Catch::Approx(expect[0]).margin(1e-12));
    CHECK(got[2 * b + 1] == Catch::Approx(expect[1]).margin(1e-12));
  }
}

TEST_CASE("yosida semigroup converges to the exact one along the k-ladder") {
  auto basis = SpectralBasis::dirichlet_heat(8, 1.0);
  auto rng = make_rng(17);
  StateVector v = random_state(rng, basis.dim());
  double prev = std::numeric_limits<double>::infinity();
  for (double k : {10.0, 100.0, 1000.0, 10000.0}) {
    double sup = 0.0;
    for (double t : {0.1, 0.25, 0.5, 1.0})
      sup = std::max(sup, (yosida_semigroup_apply(basis, k, t, v) - semigroup_apply(basis, t, v)).norm());
    CHECK(sup < prev);
    prev = sup;
  }
  CHECK(prev < 1e-2 * v.norm());
}

TEST_CASE("generator application matches block definition") {
  auto basis = SpectralBasis::periodic_advection(2, 1.0, 0.8, 0.1);
  StateVector v(4);
  v << 1.0, 2.0, -0.5, 0.25;
  StateVector av = basis.apply_generator(v);
  const double kap1 = 2.0 * std::numbers::pi * 0.8;
  CHECK(av[0] == Catch::Approx(0.1 * 1.0 + kap1 * 2.0));
  CHECK(av[1] == Catch::Approx(-kap1 * 1.0 + 0.1 * 2.0));
}
