#pragma once

#include <cmath>
#include <stdexcept>
#include <vector>

namespace sevo {

/// Evaluates the discrete Gronwall majorant for sequences alpha, beta >= 0 on
/// a uniform step dt:
///
///   bound_j = alpha_j + sum_{i<j} alpha_i beta_i exp(sum_{i<r<j} beta_r dt) dt.
///
/// When alpha is constant the sharper classical form
///   bound_j = alpha * exp(sum_{r<j} beta_r dt)
/// is returned instead. Either form dominates every solution of
///   f_j <= alpha_j + sum_{i<j} beta_i f_i dt.
inline std::vector<double> discrete_gronwall(const std::vector<double>& alpha,
                                             const std::vector<double>& beta, double dt) {
  if (alpha.empty() || alpha.size() != beta.size())
    throw std::invalid_argument("discrete_gronwall: alpha and beta must be non-empty, equal length");
  if (!(dt > 0.0)) throw std::invalid_argument("discrete_gronwall: dt must be positive");
  for (double a : alpha)
    if (!(a >= 0.0)) throw std::invalid_argument("discrete_gronwall: alpha must be non-negative");
  for (double b : beta)
    if (!(b >= 0.0)) throw std::invalid_argument("discrete_gronwall: beta must be non-negative");

  const std::size_t n = alpha.size();
  bool constant_alpha = true;
  for (std::size_t j = 1; j < n; ++j)
    if (alpha[j] != alpha[0]) {
      constant_alpha = false;
      break;
    }

  std::vector<double> bound(n);
  if (constant_alpha) {
    double acc = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      bound[j] = alpha[0] * std::exp(acc);
      acc += beta[j] * dt;
    }
    return bound;
  }

  // Backward-weighted accumulation: carry = sum_{i<j} alpha_i beta_i
  // exp(sum_{i<r<j} beta_r dt); advancing j multiplies the carry by
  // exp(beta_{j-1} dt) and then absorbs the i = j-1 term.
  double carry = 0.0;
  for (std::size_t j = 0; j < n; ++j) {
    bound[j] = alpha[j] + carry * dt;
    carry = carry * std::exp(beta[j] * dt) + alpha[j] * beta[j];
  }
  return bound;
}

}  // namespace sevo
