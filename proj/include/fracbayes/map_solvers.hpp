#pragma once

#include <Eigen/Core>
#include <vector>

#include "fracbayes/exec.hpp"
#include "fracbayes/fields.hpp"

namespace fracbayes {

/// One-sided finite-difference linearization of the forward map.
struct SensitivityMatrix {
  Eigen::MatrixXd Hbar;   // observations x parameters
  Eigen::VectorXd point;  // evaluation point
  Eigen::VectorXd base;   // H(point)
  double step = 0.0;
};

struct IterationRecord {
  int iter = 0;
  double misfit = 0.0;     // |H(v)-d|^2, unscaled
  double lambda = 0.0;
  double step_norm = 0.0;
};

struct MapResult {
  Eigen::VectorXd v_map;
  double lambda_final = 0.0;
  std::vector<IterationRecord> trace;
};

/// Column j = (H(v + step e_j) - H(v)) / step. Columns are independent
/// forward solves and run under the given execution policy. Central
/// differences are available for oracle comparisons.
SensitivityMatrix sensitivity(const ForwardFn& forward, const Eigen::VectorXd& v,
                              double step, ExecPolicy policy = ExecPolicy::Serial,
                              bool central = false);

struct AugTikhonovOptions {
  double mu0 = 1e-2;       // initial regularization weight
  int max_iterations = 30;
  double step_tolerance = 1e-6;
  double fd_step = 0.5;
  bool central_differences = false;
  ExecPolicy policy = ExecPolicy::Serial;
};

/// Hierarchical-Gaussian MAP iteration: Gauss-Newton steps
/// h_k = (Hbar^T Hbar + mu_{k-1} I)^{-1} Hbar^T (d - H(v_{k-1})) with the
/// hyper-parameter update lambda_k = (l/2 + a - 1) / (|v_k|^2/2 + b) and
/// mu_k = lambda_k sigma^2. Terminates on |h_k| < eps or the iteration cap.
MapResult augmented_tikhonov(const ForwardFn& forward, const Eigen::VectorXd& d,
                             const PriorSpec& prior, const Eigen::VectorXd& v0,
                             const AugTikhonovOptions& opts = {});

/// Smoothed l1 reweighting vector w_i = (v_i^2 + eps)^{-1/2}.
Eigen::VectorXd irls_weights(const Eigen::VectorXd& v, double eps);

struct IrlsOptions {
  double eps = 1e-6;       // smoothing constant
  int max_iterations = 30;
  double fd_step = 0.5;
  bool central_differences = false;
  ExecPolicy policy = ExecPolicy::Serial;
};

/// Iteratively reweighted MAP for the Laplace prior:
/// v_k = (Hbar^T Hbar + mu W)^{-1} Hbar^T (d - H(v_{k-1}) + Hbar v_{k-1}).
MapResult irls(const ForwardFn& forward, const Eigen::VectorXd& d, double mu,
               const Eigen::VectorXd& v0, const IrlsOptions& opts = {});

}  // namespace fracbayes
