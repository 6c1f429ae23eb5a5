#pragma once

#include <Eigen/Core>
#include <memory>
#include <vector>

#include "fracbayes/caputo.hpp"
#include "fracbayes/fields.hpp"
#include "fracbayes/gmsfem.hpp"
#include "fracbayes/grid.hpp"
#include "fracbayes/mixed_fem.hpp"

namespace fracbayes {

/// Observation layout: for each probe time (outer), each probe edge (inner).
struct ProbeSet {
  std::vector<int> edges;         // boundary edge ids on the fine grid
  std::vector<int> time_indices;  // 0-based march step columns

  int size() const {
    return static_cast<int>(edges.size() * time_indices.size());
  }
  std::vector<Probe> flatten() const;
};

/// Which parts of the parameter vector drive the model: optionally the two
/// fractional orders (through the bounded transform) followed by KL
/// coefficients of one log-field.
struct Parameterization {
  enum class FieldTarget { None, Diffusion, Reaction };

  bool invert_orders = false;
  FieldTarget target = FieldTarget::None;
  KLBasis basis;  // used when target != None

  MultiTermOrders fixed_orders;
  CellField fixed_k;
  CellField fixed_q;

  int dim() const {
    return (invert_orders ? 2 : 0) + (target != FieldTarget::None ? basis.modes() : 0);
  }

  struct Decoded {
    MultiTermOrders orders;
    CellField k;
    CellField q;
  };
  Decoded decode(const Eigen::VectorXd& v) const;
};

/// Parameter-to-observation map. Implementations are immutable after
/// construction and safe to call concurrently; every call owns its
/// factorization workspace.
class ForwardModel {
 public:
  virtual ~ForwardModel() = default;
  virtual Eigen::VectorXd observe(const Eigen::VectorXd& v) const = 0;
  virtual int obs_dim() const = 0;
  virtual int param_dim() const = 0;

  ForwardFn as_function() const {
    return [this](const Eigen::VectorXd& v) { return observe(v); };
  }
};

/// Fine-grid mixed FEM forward map.
class FineForwardModel : public ForwardModel {
 public:
  FineForwardModel(RectGrid grid, Parameterization param, Loads loads,
                   double dt, int steps, ProbeSet probes);

  Eigen::VectorXd observe(const Eigen::VectorXd& v) const override;
  int obs_dim() const override { return probes_.size(); }
  int param_dim() const override { return param_.dim(); }

  /// Full trajectory for a parameter vector (used by dumps and tests).
  Trajectory solve(const Eigen::VectorXd& v) const;
  const RectGrid& grid() const { return grid_; }
  const ProbeSet& probes() const { return probes_; }
  const Parameterization& parameterization() const { return param_; }
  double dt() const { return dt_; }
  int steps() const { return steps_; }

 private:
  RectGrid grid_;
  Parameterization param_;
  Loads loads_;
  double dt_;
  int steps_;
  ProbeSet probes_;
  std::shared_ptr<const ForwardSystem> fixed_system_;  // set when fields fixed
};

/// Mixed GMsFEM forward map: project, march on the coarse blocks, prolong
/// the velocity at probe edges only.
class GmsForwardModel : public ForwardModel {
 public:
  GmsForwardModel(RectGrid fine, CoarseGrid coarse, OfflineBasis basis,
                  Parameterization param, Loads fine_loads, double dt,
                  int steps, ProbeSet probes);

  Eigen::VectorXd observe(const Eigen::VectorXd& v) const override;
  int obs_dim() const override { return probes_.size(); }
  int param_dim() const override { return param_.dim(); }

  const OfflineBasis& basis() const { return basis_; }
  const RectGrid& fine_grid() const { return fine_; }

 private:
  RectGrid fine_;
  CoarseGrid coarse_;
  OfflineBasis basis_;
  Parameterization param_;
  Loads coarse_loads_;
  double dt_;
  int steps_;
  ProbeSet probes_;
  Eigen::MatrixXd probe_rows_;  // probe edges x Mt slice of R_off
  std::shared_ptr<const ForwardSystem> fixed_coarse_;  // all blocks fixed
  std::shared_ptr<const ForwardSystem> fixed_partial_; // A,B,C fixed, D varies
  SpMat fixed_Bf_;  // fine B (needed when A must be re-projected)
};

}  // namespace fracbayes
