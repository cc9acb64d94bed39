#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <complex>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

namespace sevo {

using StateVector = Eigen::VectorXd;

/// Uniform grid on [0, horizon] with nodes t_j = j * horizon / n_steps.
struct TimeGrid {
  double horizon = 1.0;
  int n_steps = 1;

  TimeGrid() = default;
  TimeGrid(double T, int n) : horizon(T), n_steps(n) {
    if (!(T > 0.0) || n <= 0)
      throw std::invalid_argument("TimeGrid: horizon and n_steps must be positive");
  }
  double dt() const { return horizon / static_cast<double>(n_steps); }
  double time(int j) const { return horizon * static_cast<double>(j) / static_cast<double>(n_steps); }
};

enum class BlockKind { Scalar, Rotation };

/// One diagonal block of the generator. A Scalar block acts on a single
/// coefficient by a real eigenvalue. A Rotation block acts on a coefficient
/// pair (p, q) as the 2x2 matrix [[b, ak], [-ak, b]]; it is stored as the
/// complex number z = b + i*ak, and every analytic function psi(A) acts on
/// the pair through w = p - i*q  ->  psi(z) * w.
struct EigenBlock {
  BlockKind kind = BlockKind::Scalar;
  std::complex<double> z{0.0, 0.0};
  int dim() const { return kind == BlockKind::Scalar ? 1 : 2; }
};

/// Truncated orthonormal eigenbasis of the linear part together with a fixed
/// quadrature rule used for collocation of pointwise nonlinearities.
///
/// The quadrature is a composite Gauss-Legendre rule with one node per panel
/// (midpoints) and 4 * dim() panels. For both shipped families the rule
/// integrates all products of basis functions exactly, so the discrete
/// Parseval identity holds to round-off.
class SpectralBasis {
 public:
  SpectralBasis() = default;

  /// Laplacian with zero boundary values on (0, length):
  /// phi_k = sqrt(2/length) sin(k pi x / length), eigenvalue -(k pi / length)^2.
  /// Recorded growth pair is (1, 0): a contraction family.
  static SpectralBasis dirichlet_heat(int n_modes, double length) {
    require(n_modes > 0, "dirichlet_heat: n_modes must be positive");
    require(length > 0.0, "dirichlet_heat: length must be positive");
    SpectralBasis b;
    b.domain_length_ = length;
    b.growth_scale_ = 1.0;
    b.growth_rate_ = 0.0;
    b.blocks_.reserve(static_cast<std::size_t>(n_modes));
    for (int k = 1; k <= n_modes; ++k) {
      const double lam = -std::pow(k * std::numbers::pi / length, 2);
      b.blocks_.push_back({BlockKind::Scalar, {lam, 0.0}});
    }
    b.build_quadrature();
    const double amp = std::sqrt(2.0 / length);
    b.sup_value_ = amp;
    b.values_.resize(b.nodes_.size(), n_modes);
    for (int q = 0; q < b.nodes_.size(); ++q)
      for (int k = 1; k <= n_modes; ++k)
        b.values_(q, k - 1) = amp * std::sin(k * std::numbers::pi * b.nodes_[q] / length);
    b.finalize();
    return b;
  }

  /// First-order operator a d/dx + b on the periodic interval [0, length):
  /// paired modes sqrt(2/length) {cos, sin}(kappa_k x), kappa_k = 2 pi k / length,
  /// giving rotation blocks z = b + i a kappa_k. Recorded growth pair (1, b).
  static SpectralBasis periodic_advection(int n_pairs, double length, double a, double bcoef) {
    require(n_pairs > 0, "periodic_advection: n_pairs must be positive");
    require(length > 0.0, "periodic_advection: length must be positive");
    SpectralBasis b;
    b.domain_length_ = length;
    b.growth_scale_ = 1.0;
    b.growth_rate_ = bcoef;
    b.blocks_.reserve(static_cast<std::size_t>(n_pairs));
    for (int k = 1; k <= n_pairs; ++k) {
      const double kappa = 2.0 * std::numbers::pi * k / length;
      b.blocks_.push_back({BlockKind::Rotation, {bcoef, a * kappa}});
    }
    b.build_quadrature();
    const double amp = std::sqrt(2.0 / length);
    b.sup_value_ = amp;
    const int d = 2 * n_pairs;
    b.values_.resize(b.nodes_.size(), d);
    for (int q = 0; q < b.nodes_.size(); ++q) {
      for (int k = 1; k <= n_pairs; ++k) {
        const double kappa = 2.0 * std::numbers::pi * k / length;
        b.values_(q, 2 * (k - 1)) = amp * std::cos(kappa * b.nodes_[q]);
        b.values_(q, 2 * (k - 1) + 1) = amp * std::sin(kappa * b.nodes_[q]);
      }
    }
    b.finalize();
    return b;
  }

  /// Sine basis as in dirichlet_heat but with a caller-chosen spectrum; used
  /// for small linear reference problems where eigenvalues must be mild.
  static SpectralBasis modal(const std::vector<double>& eigenvalues, double length) {
    require(!eigenvalues.empty(), "modal: need at least one eigenvalue");
    require(length > 0.0, "modal: length must be positive");
    SpectralBasis b;
    const int n = static_cast<int>(eigenvalues.size());
    b.domain_length_ = length;
    b.growth_scale_ = 1.0;
    double lam_max = eigenvalues[0];
    for (double lam : eigenvalues) lam_max = std::max(lam_max, lam);
    b.growth_rate_ = std::max(0.0, lam_max);
    for (double lam : eigenvalues) b.blocks_.push_back({BlockKind::Scalar, {lam, 0.0}});
    b.build_quadrature();
    const double amp = std::sqrt(2.0 / length);
    b.sup_value_ = amp;
    b.values_.resize(b.nodes_.size(), n);
    for (int q = 0; q < b.nodes_.size(); ++q)
      for (int k = 1; k <= n; ++k)
        b.values_(q, k - 1) = amp * std::sin(k * std::numbers::pi * b.nodes_[q] / length);
    b.finalize();
    return b;
  }

  int dim() const { return dim_; }
  int n_nodes() const { return static_cast<int>(nodes_.size()); }
  double domain_length() const { return domain_length_; }
  /// Growth pair (L, rate): every block multiplier of S(t) has modulus
  /// <= L * exp(rate * t) for t >= 0.
  double growth_scale() const { return growth_scale_; }
  double growth_rate() const { return growth_rate_; }
  const std::vector<EigenBlock>& blocks() const { return blocks_; }
  const Eigen::VectorXd& nodes() const { return nodes_; }
  const Eigen::VectorXd& weights() const { return weights_; }
  const Eigen::MatrixXd& node_values() const { return values_; }
  /// Supremum of |phi_i| over the domain (identical for all shipped families).
  double basis_function_sup() const { return sup_value_; }

  /// Pointwise values of the represented function at the quadrature nodes.
  Eigen::VectorXd synthesize(const StateVector& v) const {
    check_dim(v, "synthesize");
    return values_ * v;
  }

  /// L2 projection of nodal values back onto the basis.
  StateVector project(const Eigen::VectorXd& node_vals) const {
    if (node_vals.size() != nodes_.size())
      throw std::invalid_argument("project: node value count does not match quadrature");
    return projector_ * node_vals;
  }

  /// Column-wise projection of a matrix of nodal columns; an optional
  /// pointwise factor multiplies every column first.
  Eigen::MatrixXd project(const Eigen::MatrixXd& node_cols, const Eigen::VectorXd* factor) const {
    if (node_cols.rows() != nodes_.size())
      throw std::invalid_argument("project: node value count does not match quadrature");
    if (factor == nullptr) return projector_ * node_cols;
    return projector_ * factor->asDiagonal() * node_cols;
  }

  /// Quadrature L2 norm of a nodal value vector.
  double quadrature_norm(const Eigen::VectorXd& node_vals) const {
    return std::sqrt(weights_.dot(node_vals.cwiseProduct(node_vals)));
  }

  /// Exact action of the generator, block by block.
  StateVector apply_generator(const StateVector& v) const {
    check_dim(v, "apply_generator");
    StateVector out(dim_);
    int off = 0;
    for (const auto& blk : blocks_) {
      if (blk.kind == BlockKind::Scalar) {
        out[off] = blk.z.real() * v[off];
        off += 1;
      } else {
        const double re = blk.z.real(), im = blk.z.imag();
        out[off] = re * v[off] + im * v[off + 1];
        out[off + 1] = -im * v[off] + re * v[off + 1];
        off += 2;
      }
    }
    return out;
  }

  /// Max deviation of the discrete Gram matrix from the identity.
  double parseval_defect() const {
    Eigen::MatrixXd gram = projector_ * values_;
    gram.diagonal().array() -= 1.0;
    return gram.cwiseAbs().maxCoeff();
  }

  void check_dim(const StateVector& v, const char* where) const {
    if (v.size() != dim_)
      throw std::invalid_argument(std::string(where) + ": state dimension " +
                                  std::to_string(v.size()) + " does not match basis dimension " +
                                  std::to_string(dim_));
  }

 private:
  static void require(bool ok, const char* msg) {
    if (!ok) throw std::invalid_argument(msg);
  }

  void build_quadrature() {
    int d = 0;
    for (const auto& blk : blocks_) d += blk.dim();
    dim_ = d;
    const int n_q = 4 * d;
    nodes_.resize(n_q);
    weights_.resize(n_q);
    const double h = domain_length_ / n_q;
    for (int q = 0; q < n_q; ++q) {
      nodes_[q] = (q + 0.5) * h;
      weights_[q] = h;
    }
  }

  void finalize() { projector_ = values_.transpose() * weights_.asDiagonal(); }

  double domain_length_ = 1.0;
  double growth_scale_ = 1.0;
  double growth_rate_ = 0.0;
  double sup_value_ = 1.0;
  int dim_ = 0;
  std::vector<EigenBlock> blocks_;
  Eigen::VectorXd nodes_;
  Eigen::VectorXd weights_;
  Eigen::MatrixXd values_;     // n_nodes x dim
  Eigen::MatrixXd projector_;  // dim x n_nodes
};

namespace detail {

inline std::complex<double> yosida_eigenvalue(const std::complex<double>& z, double k) {
  const std::complex<double> denom = k - z;
  if (std::abs(denom) <= 1e-14 * (k + std::abs(z)))
    throw std::invalid_argument("yosida: parameter k collides with an eigenvalue");
  return k * z / denom;
}

// Applies a per-block complex multiplier field to a coefficient vector.
inline void apply_multipliers(const SpectralBasis& basis,
                              const std::vector<std::complex<double>>& mult, StateVector& v,
                              bool adjoint) {
  int off = 0;
  const auto& blocks = basis.blocks();
  for (std::size_t b = 0; b < blocks.size(); ++b) {
    const double mr = mult[b].real();
    const double mi = adjoint ? -mult[b].imag() : mult[b].imag();
    if (blocks[b].kind == BlockKind::Scalar) {
      v[off] *= mr;
      off += 1;
    } else {
      const double p = v[off], q = v[off + 1];
      v[off] = mr * p + mi * q;
      v[off + 1] = mr * q - mi * p;
      off += 2;
    }
  }
}

}  // namespace detail

/// Precomputed block multipliers of e^{dt A} (or e^{dt A_k} when a Yosida
/// parameter is supplied); one construction amortizes over a whole solve.
class Propagator {
 public:
  Propagator(const SpectralBasis& basis, double dt) : basis_(&basis) {
    if (!(dt >= 0.0)) throw std::invalid_argument("Propagator: dt must be non-negative");
    mult_.reserve(basis.blocks().size());
    for (const auto& blk : basis.blocks()) mult_.push_back(std::exp(dt * blk.z));
  }

  Propagator(const SpectralBasis& basis, double dt, double yosida_k) : basis_(&basis) {
    if (!(dt >= 0.0)) throw std::invalid_argument("Propagator: dt must be non-negative");
    if (!(yosida_k > 0.0)) throw std::invalid_argument("Propagator: yosida_k must be positive");
    mult_.reserve(basis.blocks().size());
    for (const auto& blk : basis.blocks())
      mult_.push_back(std::exp(dt * detail::yosida_eigenvalue(blk.z, yosida_k)));
  }

  void apply_in_place(StateVector& v) const {
    basis_->check_dim(v, "Propagator::apply");
    detail::apply_multipliers(*basis_, mult_, v, false);
  }

  void apply_adjoint_in_place(StateVector& v) const {
    basis_->check_dim(v, "Propagator::apply_adjoint");
    detail::apply_multipliers(*basis_, mult_, v, true);
  }

  StateVector apply(StateVector v) const {
    apply_in_place(v);
    return v;
  }

 private:
  const SpectralBasis* basis_;
  std::vector<std::complex<double>> mult_;
};

/// v -> S(t) v, exact per block. Rejects negative times.
inline StateVector semigroup_apply(const SpectralBasis& basis, double t, const StateVector& v) {
  if (!(t >= 0.0)) throw std::invalid_argument("semigroup_apply: t must be non-negative");
  basis.check_dim(v, "semigroup_apply");
  std::vector<std::complex<double>> mult;
  mult.reserve(basis.blocks().size());
  for (const auto& blk : basis.blocks()) mult.push_back(std::exp(t * blk.z));
  StateVector out = v;
  detail::apply_multipliers(basis, mult, out, false);
  return out;
}

/// v -> A_k v with A_k = A (I - A/k)^{-1}; per block z -> k z / (k - z).
inline StateVector yosida_apply(const SpectralBasis& basis, double k, const StateVector& v) {
  if (!(k > 0.0)) throw std::invalid_argument("yosida_apply: k must be positive");
  basis.check_dim(v, "yosida_apply");
  std::vector<std::complex<double>> mult;
  mult.reserve(basis.blocks().size());
  for (const auto& blk : basis.blocks()) mult.push_back(detail::yosida_eigenvalue(blk.z, k));
  StateVector out = v;
  detail::apply_multipliers(basis, mult, out, false);
  return out;
}

/// v -> e^{t A_k} v, exact per block.
inline StateVector yosida_semigroup_apply(const SpectralBasis& basis, double k, double t,
                                          const StateVector& v) {
  if (!(t >= 0.0)) throw std::invalid_argument("yosida_semigroup_apply: t must be non-negative");
  if (!(k > 0.0)) throw std::invalid_argument("yosida_semigroup_apply: k must be positive");
  basis.check_dim(v, "yosida_semigroup_apply");
  std::vector<std::complex<double>> mult;
  mult.reserve(basis.blocks().size());
  for (const auto& blk : basis.blocks())
    mult.push_back(std::exp(t * detail::yosida_eigenvalue(blk.z, k)));
  StateVector out = v;
  detail::apply_multipliers(basis, mult, out, false);
  return out;
}

}  // namespace sevo
