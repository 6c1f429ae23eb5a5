#include "fracbayes/mixed_fem.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace fracbayes {

namespace {

void check_field_size(const CellField& field, int cells, const char* name) {
  if (static_cast<int>(field.size()) != cells)
    throw std::invalid_argument(std::string(name) +
                                ": field size does not match cell count");
}

}  // namespace

SpMat ForwardSystem::C_matrix() const {
  SpMat C(n_pressure, n_pressure);
  C.reserve(Eigen::VectorXi::Constant(n_pressure, 1));
  for (int c = 0; c < n_pressure; ++c) C.insert(c, c) = C_diag[c];
  C.makeCompressed();
  return C;
}

SpMat ForwardSystem::D_matrix() const {
  SpMat D(n_pressure, n_pressure);
  D.reserve(Eigen::VectorXi::Constant(n_pressure, 1));
  for (int c = 0; c < n_pressure; ++c) D.insert(c, c) = D_diag[c];
  D.makeCompressed();
  return D;
}

ForwardSystem assemble_mixed(const RectGrid& grid, const CellField& k,
                             const CellField& q) {
  const int cells = grid.cell_count();
  const int edges = grid.edge_count();
  check_field_size(k, cells, "assemble_mixed");
  check_field_size(q, cells, "assemble_mixed");
  for (int c = 0; c < cells; ++c)
    if (!(k[c] > 0.0))
      throw std::domain_error("assemble_mixed: nonpositive diffusion value in cell " +
                              std::to_string(c));

  const double hx = grid.hx();
  const double hy = grid.hy();
  const double area = grid.cell_area();

  std::vector<Eigen::Triplet<double>> a_trip, b_trip;
  a_trip.reserve(static_cast<size_t>(cells) * 8);
  b_trip.reserve(static_cast<size_t>(cells) * 4);

  // Per-cell lowest-order edge basis: along each axis the two shape
  // functions are linear hat traces, giving the 2x2 mass block
  // area * [[1/3, 1/6], [1/6, 1/3]] weighted by 1/k.
  for (int j = 0; j < grid.ny(); ++j)
    for (int i = 0; i < grid.nx(); ++i) {
      const int c = grid.cell_id(i, j);
      const double w = area / k[c];
      const auto [we, ea, so, no] = grid.cell_edges(i, j);

      a_trip.emplace_back(we, we, w / 3.0);
      a_trip.emplace_back(ea, ea, w / 3.0);
      a_trip.emplace_back(we, ea, w / 6.0);
      a_trip.emplace_back(ea, we, w / 6.0);
      a_trip.emplace_back(so, so, w / 3.0);
      a_trip.emplace_back(no, no, w / 3.0);
      a_trip.emplace_back(so, no, w / 6.0);
      a_trip.emplace_back(no, so, w / 6.0);

      // B(e,c) = -int_c div(psi_e): inflow edges +, outflow edges -.
      b_trip.emplace_back(we, c, hy);
      b_trip.emplace_back(ea, c, -hy);
      b_trip.emplace_back(so, c, hx);
      b_trip.emplace_back(no, c, -hx);
    }

  ForwardSystem sys;
  sys.n_velocity = edges;
  sys.n_pressure = cells;
  sys.A.resize(edges, edges);
  sys.A.setFromTriplets(a_trip.begin(), a_trip.end());
  sys.B.resize(edges, cells);
  sys.B.setFromTriplets(b_trip.begin(), b_trip.end());
  sys.C_diag = Eigen::VectorXd::Constant(cells, area);
  sys.D_diag = area * q;
  return sys;
}

Loads assemble_loads(const RectGrid& grid, const SpaceTimeFn& f,
                     const SpaceTimeFn& g, const std::vector<double>& times) {
  if (times.empty())
    throw std::invalid_argument("assemble_loads: empty time list");
  const int steps = static_cast<int>(times.size());

  Loads loads;
  loads.F.setZero(grid.cell_count(), steps);
  loads.G.setZero(grid.edge_count(), steps);

  for (int n = 0; n < steps; ++n) {
    const double t = times[n];
    for (int c = 0; c < grid.cell_count(); ++c) {
      const auto [x, y] = grid.cell_center(c);
      loads.F(c, n) = f(x, y, t) * grid.cell_area();
    }
    for (int e : grid.boundary_edges()) {
      const auto [x, y] = grid.edge_midpoint(e);
      const double sign = grid.boundary_orientation(e);
      loads.G(e, n) = -sign * g(x, y, t) * grid.edge_length(e);
    }
  }
  return loads;
}

SaddleSolver::SaddleSolver(const ForwardSystem& sys, double s)
    : s_(s), n_velocity_(sys.n_velocity), n_pressure_(sys.n_pressure) {
  if (!(s > 0.0)) throw std::invalid_argument("SaddleSolver: s must be positive");

  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(sys.A.nonZeros() + 2 * sys.B.nonZeros() + n_pressure_);
  for (int col = 0; col < sys.A.outerSize(); ++col)
    for (SpMat::InnerIterator it(sys.A, col); it; ++it)
      trip.emplace_back(it.row(), it.col(), it.value());
  for (int col = 0; col < sys.B.outerSize(); ++col)
    for (SpMat::InnerIterator it(sys.B, col); it; ++it) {
      trip.emplace_back(it.row(), n_velocity_ + it.col(), it.value());
      trip.emplace_back(n_velocity_ + it.col(), it.row(), -s * it.value());
    }
  for (int c = 0; c < n_pressure_; ++c)
    trip.emplace_back(n_velocity_ + c, n_velocity_ + c,
                      sys.C_diag[c] + s * sys.D_diag[c]);

  block_.resize(n_velocity_ + n_pressure_, n_velocity_ + n_pressure_);
  block_.setFromTriplets(trip.begin(), trip.end());
  block_.makeCompressed();

  lu_ = std::make_unique<Eigen::SparseLU<SpMat>>();
  lu_->compute(block_);
  if (lu_->info() != Eigen::Success)
    throw std::runtime_error("SaddleSolver: block system factorization failed (singular system?)");
}

std::pair<Eigen::VectorXd, Eigen::VectorXd> SaddleSolver::solve(
    const Eigen::VectorXd& rhs_v, const Eigen::VectorXd& rhs_p) const {
  if (rhs_v.size() != n_velocity_ || rhs_p.size() != n_pressure_)
    throw std::invalid_argument("SaddleSolver::solve: rhs block sizes mismatch");
  Eigen::VectorXd rhs(n_velocity_ + n_pressure_);
  rhs.head(n_velocity_) = rhs_v;
  rhs.tail(n_pressure_) = rhs_p;

  Eigen::VectorXd x = lu_->solve(rhs);
  if (lu_->info() != Eigen::Success)
    throw std::runtime_error("SaddleSolver::solve: back-substitution failed");

  const double rhs_norm = rhs.norm();
  last_residual_ = rhs_norm > 0 ? (block_ * x - rhs).norm() / rhs_norm : 0.0;
  if (!std::isfinite(last_residual_) || last_residual_ > 1e-10)
    throw std::runtime_error("SaddleSolver::solve: relative residual " +
                             std::to_string(last_residual_) +
                             " exceeds 1e-10 (singular or ill-conditioned system)");
  return {x.head(n_velocity_), x.tail(n_pressure_)};
}

std::pair<Eigen::VectorXd, Eigen::VectorXd> solve_saddle(
    const ForwardSystem& sys, double s, const Eigen::VectorXd& rhs_v,
    const Eigen::VectorXd& rhs_p) {
  return SaddleSolver(sys, s).solve(rhs_v, rhs_p);
}

Eigen::VectorXd extract_boundary_flux(const RectGrid& grid,
                                      const Eigen::MatrixXd& sigma_history,
                                      const std::vector<Probe>& probes) {
  Eigen::VectorXd out(static_cast<int>(probes.size()));
  for (size_t p = 0; p < probes.size(); ++p) {
    const auto& probe = probes[p];
    if (probe.edge < 0 || probe.edge >= grid.edge_count())
      throw std::invalid_argument("extract_boundary_flux: edge id out of range");
    if (!grid.is_boundary(probe.edge))
      throw std::invalid_argument("extract_boundary_flux: edge " +
                                  std::to_string(probe.edge) + " is interior");
    if (probe.time_index < 0 || probe.time_index >= sigma_history.cols())
      throw std::invalid_argument("extract_boundary_flux: time index out of range");
    out[static_cast<int>(p)] = sigma_history(probe.edge, probe.time_index);
  }
  return out;
}

}  // namespace fracbayes
