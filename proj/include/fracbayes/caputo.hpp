#pragma once

#include <Eigen/Core>

#include "fracbayes/mixed_fem.hpp"

namespace fracbayes {

/// Two fractional orders in (0,1) with their positive multipliers. A single
/// term is recovered with gamma2 = 0.
struct MultiTermOrders {
  double alpha1 = 0.5;
  double alpha2 = 0.5;
  double gamma1 = 1.0;
  double gamma2 = 0.0;
};

/// Precomputed coefficients of the two-term L1 time march. The per-order
/// factors are s_i = dt^{alpha_i} Gamma(2 - alpha_i); the combined factor
/// satisfies gamma1/s1 + gamma2/s2 = 1/s exactly. The history weights b_n
/// (n = 1..M) and c_k (k = 1..M-1) feed the right-hand side of each step.
struct MultiTermScheme {
  MultiTermOrders orders;
  double dt = 0.0;
  int steps = 0;
  double s1 = 0.0, s2 = 0.0, s = 0.0;
  Eigen::VectorXd b;  // b[n-1] = b_n, b_1 = 1 exactly
  Eigen::VectorXd c;  // c[k-1] = c_k, all positive

  double time(int n) const { return n * dt; }
};

/// L1 weights of a single Caputo order at step n:
/// w_k = (n+1-k)^{1-alpha} - (n-k)^{1-alpha}, k = 1..n. Positive,
/// increasing in k, w_n = 1.
Eigen::VectorXd l1_weights(double alpha, int n);

MultiTermScheme multiterm_scheme(const MultiTermOrders& orders, double dt,
                                 int steps);

struct Trajectory {
  Eigen::MatrixXd sigma;  // edges x steps, columns n = 1..M
  Eigen::MatrixXd beta;   // cells x steps
};

/// History-carrying march of the block system: at each step n solve
///   [[A, B], [-s B^T, C + s D]] (sigma^n; beta^n) =
///   (G(:,n); s F(:,n) + C (c_1 beta^{n-1} + ... + c_{n-1} beta^1) + b_n C beta^0).
Trajectory march(const ForwardSystem& sys, const MultiTermScheme& scheme,
                 const Loads& loads, const Eigen::VectorXd& beta0);

/// March with an externally owned factorization (reused across calls).
Trajectory march(const SaddleSolver& solver, const ForwardSystem& sys,
                 const MultiTermScheme& scheme, const Loads& loads,
                 const Eigen::VectorXd& beta0);

}  // namespace fracbayes
