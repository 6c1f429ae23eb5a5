#pragma once

#include <Eigen/Core>
#include <Eigen/SparseCore>
#include <Eigen/SparseLU>
#include <functional>
#include <memory>
#include <utility>
#include <vector>

#include "fracbayes/grid.hpp"

namespace fracbayes {

using SpMat = Eigen::SparseMatrix<double>;

/// Scalar data f(x, y, t) used for sources and boundary traces.
using SpaceTimeFn = std::function<double(double x, double y, double t)>;

/// Assembled blocks of the velocity-pressure system. With velocity DoFs
/// sigma and pressure DoFs beta, the stationary relations read
///   A sigma + B beta = G,   -B^T sigma + D beta = F,
/// and the time march couples them through the scalar s (see caputo.hpp).
/// A is the k^{-1}-weighted velocity mass operator, B the (negated)
/// divergence coupling, C the pressure mass and D the q-weighted reaction
/// mass; C and D are diagonal in the piecewise-constant pressure space.
struct ForwardSystem {
  SpMat A;                 // edges x edges, SPD for k > 0
  SpMat B;                 // edges x cells, B(e,c) = -int_c div(psi_e)
  Eigen::VectorXd C_diag;  // cell areas
  Eigen::VectorXd D_diag;  // q-weighted cell areas
  int n_velocity = 0;
  int n_pressure = 0;

  SpMat C_matrix() const;
  SpMat D_matrix() const;
};

/// Time-indexed load vectors: one column per time step.
struct Loads {
  Eigen::MatrixXd G;  // edges x steps, boundary term, nonzero on boundary rows
  Eigen::MatrixXd F;  // cells x steps, source term
  int steps() const { return static_cast<int>(F.cols()); }
};

ForwardSystem assemble_mixed(const RectGrid& grid, const CellField& k,
                             const CellField& q);

/// Loads from a source f(x,t) sampled at cell midpoints and a boundary trace
/// g(x,t) sampled at boundary-edge midpoints (exact for affine data).
Loads assemble_loads(const RectGrid& grid, const SpaceTimeFn& f,
                     const SpaceTimeFn& g, const std::vector<double>& times);

/// Factorization of the block operator [[A, B], [-s B^T, C + s D]], reused
/// across time steps. Immutable after construction; clone per thread for
/// concurrent back-substitution.
class SaddleSolver {
 public:
  SaddleSolver(const ForwardSystem& sys, double s);

  /// Solve for the stacked right-hand side (rhs_v; rhs_p).
  std::pair<Eigen::VectorXd, Eigen::VectorXd> solve(
      const Eigen::VectorXd& rhs_v, const Eigen::VectorXd& rhs_p) const;

  double coupling() const { return s_; }
  /// Relative residual of the last solve.
  double last_residual() const { return last_residual_; }

 private:
  double s_;
  int n_velocity_, n_pressure_;
  SpMat block_;
  std::unique_ptr<Eigen::SparseLU<SpMat>> lu_;
  mutable double last_residual_ = 0.0;
};

/// One-shot stationary solve of the block system.
std::pair<Eigen::VectorXd, Eigen::VectorXd> solve_saddle(
    const ForwardSystem& sys, double s, const Eigen::VectorXd& rhs_v,
    const Eigen::VectorXd& rhs_p);

struct Probe {
  int edge = 0;
  int time_index = 0;
};

/// Normal-flux DoF values at (boundary edge, time) probes; order-preserving.
Eigen::VectorXd extract_boundary_flux(const RectGrid& grid,
                                      const Eigen::MatrixXd& sigma_history,
                                      const std::vector<Probe>& probes);

}  // namespace fracbayes
