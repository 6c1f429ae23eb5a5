#pragma once

#include <Eigen/Core>
#include <Eigen/SparseCore>
#include <array>
#include <vector>

#include "fracbayes/exec.hpp"
#include "fracbayes/mixed_fem.hpp"

namespace fracbayes {

/// Coarse partition conforming to a fine grid (integer refinement ratio).
/// Every coarse edge knows the fine edges tiling it and its neighbourhood
/// of one (boundary) or two (interior) coarse cells.
struct CoarseGrid {
  RectGrid grid;       // coarse cells
  int ratio_x = 1;     // fine cells per coarse cell, per axis
  int ratio_y = 1;
  std::vector<std::vector<int>> fine_edges;   // per coarse edge
  std::vector<std::array<int, 2>> neighbors;  // coarse cells, -1 if absent
  std::vector<std::vector<int>> cell_fine_cells;  // per coarse cell

  int edge_count() const { return grid.edge_count(); }
  int snapshots_per_edge(int e) const {
    return static_cast<int>(fine_edges[e].size());
  }
};

CoarseGrid build_coarse_grid(const RectGrid& fine, int ncx, int ncy);

/// Local unit-flux solutions, one group of columns per coarse edge.
struct SnapshotSpace {
  SpMat R_snap;              // fine edges x total snapshot count
  std::vector<int> offsets;  // per-edge column ranges, size = edges + 1

  int count(int coarse_edge) const {
    return offsets[coarse_edge + 1] - offsets[coarse_edge];
  }
  int total() const { return offsets.back(); }
};

SnapshotSpace build_snapshots(const RectGrid& fine, const CoarseGrid& coarse,
                              const CellField& k,
                              ExecPolicy policy = ExecPolicy::Serial);

/// Union of snapshot spaces built from several diffusion realizations,
/// keeping per-edge column grouping.
SnapshotSpace merge_snapshots(const std::vector<SnapshotSpace>& parts);

struct OfflineBasis {
  SpMat R_off;   // fine velocity DoFs x Mt
  SpMat G_off;   // coarse cells x fine cells, 0/1 aggregation
  int Lb = 0;
  std::vector<Eigen::VectorXd> kept_eigenvalues;  // per edge, ascending
  std::vector<char> regularized;                  // per-edge mass regularization flag

  int Mt() const { return static_cast<int>(R_off.cols()); }
};

/// Per-edge spectral reduction of the snapshot space: solve
/// A_snap Z = lambda S_snap Z, keep the Lb smallest pairs, and scale each
/// kept combination to unit S-norm.
OfflineBasis spectral_reduce(const RectGrid& fine, const CoarseGrid& coarse,
                             const SnapshotSpace& snaps, const CellField& k,
                             int Lb, ExecPolicy policy = ExecPolicy::Serial);

/// Galerkin projection of the fine blocks onto the offline spaces.
ForwardSystem project_coarse(const OfflineBasis& basis,
                             const ForwardSystem& fine);
Loads project_loads(const OfflineBasis& basis, const Loads& fine);

/// sigma_f = R_off sigma_c, beta_f = G_off^T beta_c.
std::pair<Eigen::VectorXd, Eigen::VectorXd> prolongate(
    const OfflineBasis& basis, const Eigen::VectorXd& sigma_c,
    const Eigen::VectorXd& beta_c);

}  // namespace fracbayes
