#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "sevo/rng.hpp"
#include "sevo/spectral.hpp"

namespace sevo {

enum class DriftKind { Zero, Linear, DoubleWell };

/// Pointwise drift family f(y). All members vanish at y = 0.
///   Zero:       f = 0
///   Linear:     f = gain * y
///   DoubleWell: f = 2 mu y - 4 lambda y^3 / (1 + y^2)   (saturated double well)
struct DriftSpec {
  DriftKind kind = DriftKind::Zero;
  double gain = 0.0;
  double well_lambda = 0.0;
  double well_mu = 0.0;

  static DriftSpec zero() { return {}; }
  static DriftSpec linear(double gain) { return {DriftKind::Linear, gain, 0.0, 0.0}; }
  static DriftSpec double_well(double lambda, double mu) {
    if (!(lambda >= 0.0))
      throw std::invalid_argument("DriftSpec: double-well lambda must be non-negative");
    return {DriftKind::DoubleWell, 0.0, lambda, mu};
  }

  double value(double y) const {
    switch (kind) {
      case DriftKind::Zero: return 0.0;
      case DriftKind::Linear: return gain * y;
      case DriftKind::DoubleWell: return 2.0 * well_mu * y - 4.0 * well_lambda * y * y * y / (1.0 + y * y);
    }
    return 0.0;
  }

  double slope(double y) const {
    switch (kind) {
      case DriftKind::Zero: return 0.0;
      case DriftKind::Linear: return gain;
      case DriftKind::DoubleWell: {
        const double y2 = y * y;
        const double den = (1.0 + y2) * (1.0 + y2);
        return 2.0 * well_mu - 4.0 * well_lambda * y2 * (3.0 + y2) / den;
      }
    }
    return 0.0;
  }

  /// One-sided slope bound: (f(a) - f(b))(a - b) <= M (a - b)^2.
  double monotone_bound() const {
    switch (kind) {
      case DriftKind::Zero: return 0.0;
      case DriftKind::Linear: return gain;
      case DriftKind::DoubleWell: return 2.0 * well_mu + 4.0 * well_lambda;
    }
    return 0.0;
  }

  /// C with |f(y)| <= C (1 + |y|).
  double growth_bound() const {
    switch (kind) {
      case DriftKind::Zero: return 0.0;
      case DriftKind::Linear: return std::abs(gain);
      case DriftKind::DoubleWell: return 2.0 * std::abs(well_mu) + 4.0 * well_lambda;
    }
    return 0.0;
  }
};

enum class DiffusionKind { Zero, ConstantModes, SineModes };

/// Columns g_i(x, y) = sigma_i * r(y) * phi_i(x), with the state factor
///   Zero:          r = 0
///   ConstantModes: r = 1
///   SineModes:     r = 1 + sin(y)
struct DiffusionSpec {
  DiffusionKind kind = DiffusionKind::Zero;
  Eigen::VectorXd sigma;

  static DiffusionSpec zero() { return {}; }
  static DiffusionSpec constant_modes(const std::vector<double>& s) {
    return {DiffusionKind::ConstantModes, Eigen::Map<const Eigen::VectorXd>(s.data(), static_cast<Eigen::Index>(s.size()))};
  }
  static DiffusionSpec sine_modes(const std::vector<double>& s) {
    return {DiffusionKind::SineModes, Eigen::Map<const Eigen::VectorXd>(s.data(), static_cast<Eigen::Index>(s.size()))};
  }

  double factor(double y) const {
    switch (kind) {
      case DiffusionKind::Zero: return 0.0;
      case DiffusionKind::ConstantModes: return 1.0;
      case DiffusionKind::SineModes: return 1.0 + std::sin(y);
    }
    return 0.0;
  }

  double factor_slope(double y) const {
    return kind == DiffusionKind::SineModes ? std::cos(y) : 0.0;
  }
};

/// Spectral discretization of one stochastic evolution equation: a basis, a
/// pointwise drift applied by collocation, and a finite family of noise
/// columns. Declared structure constants travel with the model so the
/// hypothesis verifier can audit them.
class EquationModel {
 public:
  EquationModel(SpectralBasis basis, DriftSpec drift, DiffusionSpec diffusion)
      : basis_(std::move(basis)), drift_(drift), diffusion_(diffusion) {
    m_noise_ = static_cast<int>(diffusion_.sigma.size());
    if (m_noise_ > basis_.dim())
      throw std::invalid_argument("EquationModel: more noise channels than basis modes");
    noise_columns_ = basis_.node_values().leftCols(m_noise_) * diffusion_.sigma.asDiagonal();

    monotone_bound_ = drift_.monotone_bound();
    growth_bound_ = drift_.growth_bound();
    growth_exponent_ = 1;
    // Hilbert-Schmidt Lipschitz constant: the state factor is 1-Lipschitz and
    // |phi_i| <= sup_phi, so ||g(x) - g(y)||_HS <= |sigma|_2 sup_phi ||x - y||.
    lipschitz_bound_ = diffusion_.kind == DiffusionKind::SineModes
                           ? diffusion_.sigma.norm() * basis_.basis_function_sup()
                           : 0.0;
    const double g0 = diffusion_matrix(StateVector::Zero(basis_.dim())).norm();
    diffusion_growth_bound_ = std::max(g0, lipschitz_bound_);
  }

  const SpectralBasis& basis() const { return basis_; }
  const DriftSpec& drift() const { return drift_; }
  const DiffusionSpec& diffusion() const { return diffusion_; }
  int m_noise() const { return m_noise_; }

  double monotone_bound() const { return monotone_bound_; }
  double lipschitz_bound() const { return lipschitz_bound_; }
  double growth_bound() const { return growth_bound_; }
  int growth_exponent() const { return growth_exponent_; }
  double diffusion_growth_bound() const { return diffusion_growth_bound_; }

  /// Copy with an overridden declared constant (used to probe the verifier).
  EquationModel with_monotone_bound(double m) const {
    EquationModel c = *this;
    c.monotone_bound_ = m;
    return c;
  }
  EquationModel with_lipschitz_bound(double d) const {
    EquationModel c = *this;
    c.lipschitz_bound_ = d;
    return c;
  }

  // Node-space pieces; `vals` are pointwise state values at quadrature nodes.
  Eigen::VectorXd drift_values(const Eigen::VectorXd& vals) const {
    return vals.unaryExpr([this](double y) { return drift_.value(y); });
  }
  Eigen::VectorXd drift_slopes(const Eigen::VectorXd& vals) const {
    return vals.unaryExpr([this](double y) { return drift_.slope(y); });
  }
  Eigen::VectorXd diffusion_factor(const Eigen::VectorXd& vals) const {
    return vals.unaryExpr([this](double y) { return diffusion_.factor(y); });
  }
  Eigen::VectorXd diffusion_factor_slope(const Eigen::VectorXd& vals) const {
    return vals.unaryExpr([this](double y) { return diffusion_.factor_slope(y); });
  }
  const Eigen::MatrixXd& noise_columns() const { return noise_columns_; }

  StateVector drift_apply(const StateVector& v) const {
    basis_.check_dim(v, "drift_apply");
    Eigen::VectorXd fv = drift_values(basis_.synthesize(v));
    for (int q = 0; q < fv.size(); ++q)
      if (!std::isfinite(fv[q]))
        throw std::domain_error("drift_apply: non-finite drift value at node x = " +
                                std::to_string(basis_.nodes()[q]));
    return basis_.project(fv);
  }

  /// g(v) u for a channel weight vector u of length m_noise.
  StateVector diffusion_apply(const StateVector& v, const Eigen::VectorXd& u) const {
    basis_.check_dim(v, "diffusion_apply");
    if (u.size() != m_noise_)
      throw std::invalid_argument("diffusion_apply: control dimension does not match m_noise");
    if (m_noise_ == 0 || diffusion_.kind == DiffusionKind::Zero)
      return StateVector::Zero(basis_.dim());
    Eigen::VectorXd combo = noise_columns_ * u;
    if (diffusion_.kind == DiffusionKind::SineModes)
      combo.array() *= diffusion_factor(basis_.synthesize(v)).array();
    return basis_.project(combo);
  }

  /// Projected noise columns at state v, as a dim x m_noise matrix.
  Eigen::MatrixXd diffusion_matrix(const StateVector& v) const {
    basis_.check_dim(v, "diffusion_matrix");
    if (m_noise_ == 0 || diffusion_.kind == DiffusionKind::Zero)
      return Eigen::MatrixXd::Zero(basis_.dim(), std::max(m_noise_, 0));
    if (diffusion_.kind == DiffusionKind::ConstantModes)
      return basis_.project(noise_columns_, /*factor=*/nullptr);
    Eigen::VectorXd r = diffusion_factor(basis_.synthesize(v));
    return basis_.project(noise_columns_, &r);
  }

 private:
  SpectralBasis basis_;
  DriftSpec drift_;
  DiffusionSpec diffusion_;
  Eigen::MatrixXd noise_columns_;  // n_nodes x m: sigma_i phi_i(x_q)
  int m_noise_ = 0;
  double monotone_bound_ = 0.0;
  double lipschitz_bound_ = 0.0;
  double growth_bound_ = 0.0;
  int growth_exponent_ = 1;
  double diffusion_growth_bound_ = 0.0;
};

/// Reaction-diffusion model on (0, length): Dirichlet Laplacian modes, a
/// saturated double-well reaction f(y) = 2 mu y - 4 lambda y^3/(1+y^2) and
/// multiplicative noise columns sigma_i (1 + sin y) phi_i(x).
inline EquationModel heat_model(double lambda_dw, double mu_dw, const std::vector<double>& sigma,
                                int n_modes = 32, double domain_length = 1.0) {
  return EquationModel(SpectralBasis::dirichlet_heat(n_modes, domain_length),
                       DriftSpec::double_well(lambda_dw, mu_dw), DiffusionSpec::sine_modes(sigma));
}

/// Constant-coefficient transport-reaction model on the periodic interval:
/// A = a d/dx + b with rotation-pair modes, same drift/diffusion families.
inline EquationModel hyperbolic_model(double a, double b, double lambda_dw, double mu_dw,
                                      const std::vector<double>& sigma, int n_pairs = 16,
                                      double domain_length = 1.0) {
  return EquationModel(SpectralBasis::periodic_advection(n_pairs, domain_length, a, b),
                       DriftSpec::double_well(lambda_dw, mu_dw), DiffusionSpec::sine_modes(sigma));
}

struct HypothesisClause {
  std::string id;
  double declared = 0.0;
  double empirical = 0.0;
  bool pass = true;
};

struct HypothesisReport {
  std::vector<HypothesisClause> clauses;
  int n_samples = 0;
  std::uint64_t seed = 0;
  bool all_pass() const {
    for (const auto& c : clauses)
      if (!c.pass) return false;
    return true;
  }
  const HypothesisClause& clause(const std::string& id) const {
    for (const auto& c : clauses)
      if (c.id == id) return c;
    throw std::out_of_range("HypothesisReport: unknown clause " + id);
  }
};

/// Samples random states in a ball and reports empirical worst-case structure
/// constants against the declared ones. Reports failures, never throws for
/// them. Tolerance on every clause: declared + 1e-6.
inline HypothesisReport verify_hypotheses(const EquationModel& model, int n_samples, double radius,
                                          std::uint64_t seed) {
  if (n_samples <= 0) throw std::invalid_argument("verify_hypotheses: n_samples must be positive");
  if (!(radius > 0.0)) throw std::invalid_argument("verify_hypotheses: radius must be positive");
  const int d = model.basis().dim();
  const int m = model.m_noise();
  auto rng = make_rng(derive_seed(seed, 0x68797073ULL, 0));
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> unif(0.0, 1.0);

  auto random_direction = [&](int n) {
    Eigen::VectorXd v(n);
    double norm2 = 0.0;
    do {
      for (int i = 0; i < n; ++i) v[i] = gauss(rng);
      norm2 = v.squaredNorm();
    } while (norm2 == 0.0);
    return Eigen::VectorXd(v / std::sqrt(norm2));
  };
  // Scales mix bulk draws with logarithmically small ones so local slopes
  // near the origin are probed as well as far-field growth.
  auto random_scale = [&]() {
    if (unif(rng) < 0.5) return radius * std::pow(unif(rng), 1.0 / 3.0);
    return radius * std::pow(10.0, -3.0 * unif(rng));
  };

  double semi_sup = -std::numeric_limits<double>::infinity();
  double lip_sup = 0.0;
  double growth_f_sup = 0.0;
  double growth_g_sup = 0.0;
  double pairing_sup = -std::numeric_limits<double>::infinity();

  const double f0_norm = model.drift_apply(StateVector::Zero(d)).norm();

  for (int s = 0; s < n_samples; ++s) {
    StateVector x = random_scale() * random_direction(d);
    StateVector y;
    switch (s % 3) {
      case 0: y = random_scale() * random_direction(d); break;
      case 1: y = x + 1e-2 * (1.0 + x.norm()) * random_direction(d); break;
      default: y = x + 1e-6 * (1.0 + x.norm()) * random_direction(d); break;
    }
    const StateVector dx = x - y;
    const double dn2 = dx.squaredNorm();
    const StateVector fx = model.drift_apply(x);
    if (dn2 > 0.0) {
      const double q = (fx - model.drift_apply(y)).dot(dx) / dn2;
      semi_sup = std::max(semi_sup, q);
      if (m > 0) {
        const double lq =
            (model.diffusion_matrix(x) - model.diffusion_matrix(y)).norm() / std::sqrt(dn2);
        lip_sup = std::max(lip_sup, lq);
      }
    }
    const double xn = x.norm();
    growth_f_sup = std::max(growth_f_sup, fx.norm() / (1.0 + std::pow(xn, model.growth_exponent())));
    growth_g_sup = std::max(growth_g_sup, model.diffusion_matrix(x).norm() / (1.0 + xn));
    pairing_sup = std::max(pairing_sup, fx.dot(x) / (1.0 + xn * xn));
  }

  const double tol = 1e-6;
  HypothesisReport rep;
  rep.n_samples = n_samples;
  rep.seed = seed;
  const double pairing_declared = std::max(model.monotone_bound(), 0.0) + f0_norm;
  rep.clauses = {
      {"semimonotone_drift", model.monotone_bound(), semi_sup,
       semi_sup <= model.monotone_bound() + tol},
      {"lipschitz_diffusion", model.lipschitz_bound(), lip_sup,
       lip_sup <= model.lipschitz_bound() + tol},
      {"growth_drift", model.growth_bound(), growth_f_sup,
       growth_f_sup <= model.growth_bound() + tol},
      {"growth_diffusion", model.diffusion_growth_bound(), growth_g_sup,
       growth_g_sup <= model.diffusion_growth_bound() + tol},
      {"drift_state_pairing", pairing_declared, pairing_sup, pairing_sup <= pairing_declared + tol},
  };
  return rep;
}

}  // namespace sevo
