#include "fracbayes/forward_model.hpp"

#include <stdexcept>

namespace fracbayes {

std::vector<Probe> ProbeSet::flatten() const {
  std::vector<Probe> out;
  out.reserve(edges.size() * time_indices.size());
  for (int t : time_indices)
    for (int e : edges) out.push_back({e, t});
  return out;
}

Parameterization::Decoded Parameterization::decode(
    const Eigen::VectorXd& v) const {
  if (v.size() != dim())
    throw std::invalid_argument("Parameterization: parameter size mismatch");

  Decoded dec{fixed_orders, fixed_k, fixed_q};
  int off = 0;
  if (invert_orders) {
    dec.orders.alpha1 = bounded_transform(v[0]);
    dec.orders.alpha2 = bounded_transform(v[1]);
    off = 2;
  }
  if (target == FieldTarget::Diffusion)
    dec.k = field_from_coeffs(basis, v.segment(off, basis.modes()));
  else if (target == FieldTarget::Reaction)
    dec.q = field_from_coeffs(basis, v.segment(off, basis.modes()));
  return dec;
}

FineForwardModel::FineForwardModel(RectGrid grid, Parameterization param,
                                   Loads loads, double dt, int steps,
                                   ProbeSet probes)
    : grid_(std::move(grid)),
      param_(std::move(param)),
      loads_(std::move(loads)),
      dt_(dt),
      steps_(steps),
      probes_(std::move(probes)) {
  if (loads_.steps() != steps_)
    throw std::invalid_argument("FineForwardModel: loads do not span the march");
  if (param_.target == Parameterization::FieldTarget::None)
    fixed_system_ = std::make_shared<const ForwardSystem>(
        assemble_mixed(grid_, param_.fixed_k, param_.fixed_q));
}

Trajectory FineForwardModel::solve(const Eigen::VectorXd& v) const {
  const auto dec = param_.decode(v);
  const MultiTermScheme scheme = multiterm_scheme(dec.orders, dt_, steps_);
  if (fixed_system_) return march(*fixed_system_, scheme, loads_, Eigen::VectorXd::Zero(grid_.cell_count()));
  const ForwardSystem sys = assemble_mixed(grid_, dec.k, dec.q);
  return march(sys, scheme, loads_, Eigen::VectorXd::Zero(grid_.cell_count()));
}

Eigen::VectorXd FineForwardModel::observe(const Eigen::VectorXd& v) const {
  const Trajectory traj = solve(v);
  return extract_boundary_flux(grid_, traj.sigma, probes_.flatten());
}

GmsForwardModel::GmsForwardModel(RectGrid fine, CoarseGrid coarse,
                                 OfflineBasis basis, Parameterization param,
                                 Loads fine_loads, double dt, int steps,
                                 ProbeSet probes)
    : fine_(std::move(fine)),
      coarse_(std::move(coarse)),
      basis_(std::move(basis)),
      param_(std::move(param)),
      coarse_loads_(project_loads(basis_, fine_loads)),
      dt_(dt),
      steps_(steps),
      probes_(std::move(probes)) {
  if (fine_loads.steps() != steps_)
    throw std::invalid_argument("GmsForwardModel: loads do not span the march");

  // Restriction of R_off to probe rows for cheap flux prolongation.
  probe_rows_.setZero(static_cast<int>(probes_.edges.size()), basis_.Mt());
  std::vector<int> probe_of_edge(fine_.edge_count(), -1);
  for (size_t p = 0; p < probes_.edges.size(); ++p) {
    const int e = probes_.edges[p];
    if (!fine_.is_boundary(e))
      throw std::invalid_argument("GmsForwardModel: probe edge is interior");
    probe_of_edge[e] = static_cast<int>(p);
  }
  for (int col = 0; col < basis_.R_off.outerSize(); ++col)
    for (SpMat::InnerIterator it(basis_.R_off, col); it; ++it)
      if (probe_of_edge[it.row()] >= 0)
        probe_rows_(probe_of_edge[it.row()], col) = it.value();

  using Target = Parameterization::FieldTarget;
  if (param_.target == Target::None) {
    fixed_coarse_ = std::make_shared<const ForwardSystem>(project_coarse(
        basis_, assemble_mixed(fine_, param_.fixed_k, param_.fixed_q)));
  } else if (param_.target == Target::Reaction) {
    fixed_partial_ = std::make_shared<const ForwardSystem>(project_coarse(
        basis_, assemble_mixed(fine_, param_.fixed_k, param_.fixed_q)));
  } else {
    // diffusion varies per sample: keep the fine divergence block around
    const ForwardSystem f =
        assemble_mixed(fine_, CellField::Ones(fine_.cell_count()), param_.fixed_q);
    fixed_partial_ = std::make_shared<const ForwardSystem>(project_coarse(basis_, f));
    fixed_Bf_ = f.B;
  }
}

Eigen::VectorXd GmsForwardModel::observe(const Eigen::VectorXd& v) const {
  using Target = Parameterization::FieldTarget;
  const auto dec = param_.decode(v);
  const MultiTermScheme scheme = multiterm_scheme(dec.orders, dt_, steps_);

  ForwardSystem coarse_sys;
  const ForwardSystem* sys = nullptr;
  if (param_.target == Target::None) {
    sys = fixed_coarse_.get();
  } else if (param_.target == Target::Reaction) {
    coarse_sys = *fixed_partial_;
    coarse_sys.D_diag = basis_.G_off * CellField(fine_.cell_area() * dec.q);
    sys = &coarse_sys;
  } else {
    coarse_sys = *fixed_partial_;
    const ForwardSystem f = assemble_mixed(fine_, dec.k, param_.fixed_q);
    coarse_sys.A = basis_.R_off.transpose() * f.A * basis_.R_off;
    sys = &coarse_sys;
  }

  Trajectory traj = march(*sys, scheme, coarse_loads_,
                          Eigen::VectorXd::Zero(sys->n_pressure));

  Eigen::VectorXd obs(probes_.size());
  int idx = 0;
  for (int t : probes_.time_indices) {
    if (t < 0 || t >= steps_)
      throw std::invalid_argument("GmsForwardModel: probe time index out of range");
    obs.segment(idx, probes_.edges.size()) = probe_rows_ * traj.sigma.col(t);
    idx += static_cast<int>(probes_.edges.size());
  }
  return obs;
}

}  // namespace fracbayes
