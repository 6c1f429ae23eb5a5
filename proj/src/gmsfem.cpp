#include "fracbayes/gmsfem.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <Eigen/SparseLU>
#include <cmath>
#include <stdexcept>
#include <unordered_map>

namespace fracbayes {

CoarseGrid build_coarse_grid(const RectGrid& fine, int ncx, int ncy) {
  if (ncx < 1 || ncy < 1)
    throw std::invalid_argument("build_coarse_grid: coarse counts must be positive");
  if (fine.nx() % ncx != 0 || fine.ny() % ncy != 0)
    throw std::invalid_argument("build_coarse_grid: coarse grid does not conform to fine grid");

  CoarseGrid cg{RectGrid(ncx, ncy, fine.domain()), fine.nx() / ncx,
                fine.ny() / ncy, {}, {}, {}};
  const int rx = cg.ratio_x, ry = cg.ratio_y;

  cg.fine_edges.resize(cg.grid.edge_count());
  cg.neighbors.resize(cg.grid.edge_count());
  for (int I = 0; I <= ncx; ++I)
    for (int J = 0; J < ncy; ++J) {
      const int E = cg.grid.vertical_edge_id(I, J);
      for (int j = 0; j < ry; ++j)
        cg.fine_edges[E].push_back(fine.vertical_edge_id(I * rx, J * ry + j));
      cg.neighbors[E] = cg.grid.edge_cells(E);
    }
  for (int I = 0; I < ncx; ++I)
    for (int J = 0; J <= ncy; ++J) {
      const int E = cg.grid.horizontal_edge_id(I, J);
      for (int i = 0; i < rx; ++i)
        cg.fine_edges[E].push_back(fine.horizontal_edge_id(I * rx + i, J * ry));
      cg.neighbors[E] = cg.grid.edge_cells(E);
    }

  cg.cell_fine_cells.resize(cg.grid.cell_count());
  for (int J = 0; J < ncy; ++J)
    for (int I = 0; I < ncx; ++I) {
      auto& cells = cg.cell_fine_cells[cg.grid.cell_id(I, J)];
      for (int j = 0; j < ry; ++j)
        for (int i = 0; i < rx; ++i)
          cells.push_back(fine.cell_id(I * rx + i, J * ry + j));
    }
  return cg;
}

namespace {

/// Constrained mixed solve on one coarse cell: all boundary-edge fluxes
/// prescribed, divergence prescribed per fine cell, mean-zero pressure via
/// a bordered Lagrange multiplier. The factorization is shared by every
/// snapshot right-hand side of the cell.
class PatchSolver {
 public:
  PatchSolver(const RectGrid& fine, const CoarseGrid& coarse,
              const CellField& k, int coarse_cell) {
    const auto& cells = coarse.cell_fine_cells[coarse_cell];
    const double hx = fine.hx(), hy = fine.hy(), area = fine.cell_area();

    for (size_t lc = 0; lc < cells.size(); ++lc) cell_index_[cells[lc]] = int(lc);

    // Classify patch edges: an edge interior to the patch has both
    // neighbours inside, otherwise its flux is prescribed.
    auto local_edge = [&](int e) -> int {
      auto it = edge_index_.find(e);
      return it == edge_index_.end() ? -1 : it->second;
    };
    for (int c : cells) {
      const int i = c % fine.nx(), j = c / fine.nx();
      for (int e : fine.cell_edges(i, j)) {
        if (edge_index_.count(e) || prescribed_index_.count(e)) continue;
        const auto nb = fine.edge_cells(e);
        const bool interior = nb[0] >= 0 && nb[1] >= 0 &&
                              cell_index_.count(nb[0]) && cell_index_.count(nb[1]);
        if (interior) {
          const int id = static_cast<int>(edge_index_.size());
          edge_index_[e] = id;
          interior_edges_.push_back(e);
        } else {
          const int id = static_cast<int>(prescribed_index_.size());
          prescribed_index_[e] = id;
          prescribed_edges_.push_back(e);
        }
      }
    }

    const int nv = static_cast<int>(interior_edges_.size());
    const int np = static_cast<int>(cells.size());
    nv_ = nv;
    np_ = np;

    std::vector<Eigen::Triplet<double>> trip;
    std::vector<Eigen::Triplet<double>> trip_bdry;  // couples prescribed DoFs
    auto add_pair = [&](int ea, int eb, double w) {
      const int la = local_edge(ea), lb = local_edge(eb);
      if (la >= 0 && lb >= 0) {
        trip.emplace_back(la, lb, w);
      } else if (la >= 0) {
        trip_bdry.emplace_back(la, prescribed_index_.at(eb), w);
      }
      // rows of prescribed edges are dropped (test space has zero trace)
    };

    for (int c : cells) {
      const int i = c % fine.nx(), j = c / fine.nx();
      const double w = area / k[c];
      const auto [we, ea, so, no] = fine.cell_edges(i, j);
      for (auto [p, q] : {std::pair{we, ea}, std::pair{so, no}}) {
        add_pair(p, p, w / 3.0);
        add_pair(q, q, w / 3.0);
        add_pair(p, q, w / 6.0);
        add_pair(q, p, w / 6.0);
      }
      const int lc = cell_index_.at(c);
      // B(e,c) = -int_c div(psi_e) and its transpose rows
      for (auto [e, s] : {std::pair{we, hy}, std::pair{ea, -hy},
                          std::pair{so, hx}, std::pair{no, -hx}}) {
        const int le = local_edge(e);
        if (le >= 0) {
          trip.emplace_back(le, nv + lc, s);
          trip.emplace_back(nv + lc, le, s);
        } else {
          trip_bdry.emplace_back(nv + lc, prescribed_index_.at(e), s);
        }
      }
      // mean-zero pressure constraint
      trip.emplace_back(nv + lc, nv + np, area);
      trip.emplace_back(nv + np, nv + lc, area);
    }

    matrix_.resize(nv + np + 1, nv + np + 1);
    matrix_.setFromTriplets(trip.begin(), trip.end());
    boundary_coupling_.resize(nv + np + 1,
                              static_cast<int>(prescribed_edges_.size()));
    boundary_coupling_.setFromTriplets(trip_bdry.begin(), trip_bdry.end());

    lu_.compute(matrix_);
    if (lu_.info() != Eigen::Success)
      throw std::runtime_error("build_snapshots: local patch factorization failed");

    patch_area_ = np * area;
    cell_area_ = area;
  }

  /// Solve with unit flux on `flux_edge` (given in the global +direction),
  /// zero flux on the rest of the patch boundary, and constant divergence
  /// matching the injected flux. Writes interior fluxes into `column`.
  void solve_unit_flux(const RectGrid& fine, int flux_edge,
                       std::vector<Eigen::Triplet<double>>& column,
                       int column_index) const {
    const auto nb = fine.edge_cells(flux_edge);
    // +1 when the global direction leaves the patch through this edge
    const int orientation = (nb[0] >= 0 && cell_index_.count(nb[0])) ? 1 : -1;
    const double edge_len = fine.edge_length(flux_edge);
    const double alpha = orientation * edge_len / patch_area_;

    Eigen::VectorXd sigma_b =
        Eigen::VectorXd::Zero(static_cast<int>(prescribed_edges_.size()));
    sigma_b[prescribed_index_.at(flux_edge)] = 1.0;

    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(nv_ + np_ + 1);
    rhs -= boundary_coupling_ * sigma_b;
    // pressure rows carry (B^T sigma)_c = -alpha |c|
    for (int lc = 0; lc < np_; ++lc) rhs[nv_ + lc] += -alpha * cell_area_;

    Eigen::VectorXd x = lu_.solve(rhs);
    if (lu_.info() != Eigen::Success)
      throw std::runtime_error("build_snapshots: local patch solve failed");

    for (int le = 0; le < nv_; ++le)
      if (x[le] != 0.0)
        column.emplace_back(interior_edges_[le], column_index, x[le]);
  }

 private:
  std::unordered_map<int, int> cell_index_;
  std::unordered_map<int, int> edge_index_;
  std::unordered_map<int, int> prescribed_index_;
  std::vector<int> interior_edges_;
  std::vector<int> prescribed_edges_;
  int nv_ = 0, np_ = 0;
  double patch_area_ = 0.0, cell_area_ = 0.0;
  SpMat matrix_;
  SpMat boundary_coupling_;
  Eigen::SparseLU<SpMat> lu_;
};

}  // namespace

SnapshotSpace build_snapshots(const RectGrid& fine, const CoarseGrid& coarse,
                              const CellField& k, ExecPolicy policy) {
  if (k.size() != fine.cell_count())
    throw std::invalid_argument("build_snapshots: field size mismatch");

  const int n_edges = coarse.edge_count();
  SnapshotSpace snaps;
  snaps.offsets.resize(n_edges + 1);
  snaps.offsets[0] = 0;
  for (int e = 0; e < n_edges; ++e)
    snaps.offsets[e + 1] = snaps.offsets[e] + coarse.snapshots_per_edge(e);

  // Prescribed unit fluxes, shared by both patch solves of an edge.
  std::vector<Eigen::Triplet<double>> all;
  for (int E = 0; E < n_edges; ++E)
    for (int j = 0; j < coarse.snapshots_per_edge(E); ++j)
      all.emplace_back(coarse.fine_edges[E][j], snaps.offsets[E] + j, 1.0);

  // One factorization per coarse cell serves the snapshots of all four of
  // its edges. Patches touch disjoint interior DoFs, so the per-cell
  // triplet lists merge without races regardless of thread count.
  const int n_cells = coarse.grid.cell_count();
  std::vector<std::vector<Eigen::Triplet<double>>> per_cell(n_cells);
  parallel_for(n_cells, policy, [&](int K) {
    const PatchSolver patch(fine, coarse, k, K);
    const int I = K % coarse.grid.nx(), J = K / coarse.grid.nx();
    for (int E : coarse.grid.cell_edges(I, J))
      for (int j = 0; j < coarse.snapshots_per_edge(E); ++j)
        patch.solve_unit_flux(fine, coarse.fine_edges[E][j], per_cell[K],
                              snaps.offsets[E] + j);
  });

  for (auto& trip : per_cell) all.insert(all.end(), trip.begin(), trip.end());
  snaps.R_snap.resize(fine.edge_count(), snaps.total());
  snaps.R_snap.setFromTriplets(all.begin(), all.end());
  return snaps;
}

SnapshotSpace merge_snapshots(const std::vector<SnapshotSpace>& parts) {
  if (parts.empty()) throw std::invalid_argument("merge_snapshots: empty input");
  const int n_edges = static_cast<int>(parts[0].offsets.size()) - 1;
  for (const auto& p : parts)
    if (static_cast<int>(p.offsets.size()) - 1 != n_edges ||
        p.R_snap.rows() != parts[0].R_snap.rows())
      throw std::invalid_argument("merge_snapshots: incompatible snapshot spaces");

  SnapshotSpace out;
  out.offsets.resize(n_edges + 1);
  out.offsets[0] = 0;
  for (int e = 0; e < n_edges; ++e) {
    int total = 0;
    for (const auto& p : parts) total += p.count(e);
    out.offsets[e + 1] = out.offsets[e] + total;
  }

  std::vector<Eigen::Triplet<double>> trip;
  for (int e = 0; e < n_edges; ++e) {
    int base = out.offsets[e];
    for (const auto& p : parts) {
      for (int j = 0; j < p.count(e); ++j) {
        const int src = p.offsets[e] + j;
        for (SpMat::InnerIterator it(p.R_snap, src); it; ++it)
          trip.emplace_back(it.row(), base + j, it.value());
      }
      base += p.count(e);
    }
  }
  out.R_snap.resize(parts[0].R_snap.rows(), out.offsets.back());
  out.R_snap.setFromTriplets(trip.begin(), trip.end());
  return out;
}

OfflineBasis spectral_reduce(const RectGrid& fine, const CoarseGrid& coarse,
                             const SnapshotSpace& snaps, const CellField& k,
                             int Lb, ExecPolicy policy) {
  const int n_edges = coarse.edge_count();
  int min_count = snaps.count(0);
  for (int e = 0; e < n_edges; ++e) min_count = std::min(min_count, snaps.count(e));
  if (Lb < 1 || Lb > min_count)
    throw std::invalid_argument("spectral_reduce: basis count must lie in [1, min_i J_i]");

  // S_fine = k^{-1} velocity mass + div-div form.
  const ForwardSystem sys = assemble_mixed(fine, k, CellField::Zero(fine.cell_count()));
  SpMat S_fine = sys.A;
  {
    const Eigen::VectorXd inv_area = sys.C_diag.cwiseInverse();
    S_fine += SpMat(sys.B * inv_area.asDiagonal() * SpMat(sys.B.transpose()));
  }

  // Edge form a_i: diagonal over the fine edges of E_i, entries
  // |e| * mean of 1/k over adjacent cells.
  auto edge_weight = [&](int e) {
    const auto nb = fine.edge_cells(e);
    double kinv = 0.0;
    int cnt = 0;
    for (int c : nb)
      if (c >= 0) { kinv += 1.0 / k[c]; ++cnt; }
    return fine.edge_length(e) * kinv / cnt;
  };

  OfflineBasis basis;
  basis.Lb = Lb;
  basis.kept_eigenvalues.resize(n_edges);
  basis.regularized.assign(n_edges, 0);

  std::vector<std::vector<Eigen::Triplet<double>>> columns(n_edges);
  parallel_for(n_edges, policy, [&](int E) {
    const int J = snaps.count(E);
    const int off = snaps.offsets[E];

    Eigen::MatrixXd R = Eigen::MatrixXd::Zero(fine.edge_count(), J);
    for (int j = 0; j < J; ++j)
      for (SpMat::InnerIterator it(snaps.R_snap, off + j); it; ++it)
        R(it.row(), j) = it.value();

    Eigen::MatrixXd S_snap = R.transpose() * (S_fine * R);
    Eigen::MatrixXd A_snap = Eigen::MatrixXd::Zero(J, J);
    for (int fe : coarse.fine_edges[E]) {
      const double w = edge_weight(fe);
      for (int j = 0; j < J; ++j)
        for (int j2 = 0; j2 < J; ++j2)
          A_snap(j, j2) += w * R(fe, j) * R(fe, j2);
    }

    Eigen::MatrixXd S_used = S_snap;
    Eigen::LLT<Eigen::MatrixXd> llt(S_used);
    if (llt.info() != Eigen::Success) {
      S_used += 1e-12 * S_snap.trace() * Eigen::MatrixXd::Identity(J, J);
      basis.regularized[E] = 1;
    }

    Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> ges(A_snap, S_used);
    if (ges.info() != Eigen::Success)
      throw std::runtime_error("spectral_reduce: eigenproblem failed on edge " +
                               std::to_string(E));

    basis.kept_eigenvalues[E] = ges.eigenvalues().head(Lb);
    auto& trip = columns[E];
    for (int m = 0; m < Lb; ++m) {
      Eigen::VectorXd z = ges.eigenvectors().col(m);
      const double snorm = std::sqrt(z.dot(S_snap * z));
      if (snorm > 0) z /= snorm;
      const Eigen::VectorXd col = R * z;
      const int col_id = E * Lb + m;
      for (int row = 0; row < col.size(); ++row)
        if (col[row] != 0.0) trip.emplace_back(row, col_id, col[row]);
    }
  });

  std::vector<Eigen::Triplet<double>> all;
  for (auto& t : columns) all.insert(all.end(), t.begin(), t.end());
  basis.R_off.resize(fine.edge_count(), n_edges * Lb);
  basis.R_off.setFromTriplets(all.begin(), all.end());

  std::vector<Eigen::Triplet<double>> gtrip;
  for (int K = 0; K < coarse.grid.cell_count(); ++K)
    for (int c : coarse.cell_fine_cells[K]) gtrip.emplace_back(K, c, 1.0);
  basis.G_off.resize(coarse.grid.cell_count(), fine.cell_count());
  basis.G_off.setFromTriplets(gtrip.begin(), gtrip.end());
  return basis;
}

ForwardSystem project_coarse(const OfflineBasis& basis,
                             const ForwardSystem& fine) {
  if (basis.R_off.rows() != fine.n_velocity ||
      basis.G_off.cols() != fine.n_pressure)
    throw std::invalid_argument("project_coarse: DoF counts mismatch");

  ForwardSystem coarse;
  coarse.n_velocity = basis.Mt();
  coarse.n_pressure = static_cast<int>(basis.G_off.rows());
  const SpMat Rt = basis.R_off.transpose();
  coarse.A = Rt * fine.A * basis.R_off;
  coarse.B = Rt * fine.B * SpMat(basis.G_off.transpose());
  coarse.C_diag = basis.G_off * fine.C_diag;
  coarse.D_diag = basis.G_off * fine.D_diag;
  return coarse;
}

Loads project_loads(const OfflineBasis& basis, const Loads& fine) {
  Loads coarse;
  coarse.G = basis.R_off.transpose() * fine.G;
  coarse.F = basis.G_off * fine.F;
  return coarse;
}

std::pair<Eigen::VectorXd, Eigen::VectorXd> prolongate(
    const OfflineBasis& basis, const Eigen::VectorXd& sigma_c,
    const Eigen::VectorXd& beta_c) {
  if (sigma_c.size() != basis.Mt() || beta_c.size() != basis.G_off.rows())
    throw std::invalid_argument("prolongate: coarse solution size mismatch");
  return {basis.R_off * sigma_c, basis.G_off.transpose() * beta_c};
}

}  // namespace fracbayes
