#pragma once

#include <memory>
#include <optional>
#include <string>

#include "fracbayes/config.hpp"
#include "fracbayes/forward_model.hpp"
#include "fracbayes/map_solvers.hpp"
#include "fracbayes/sampling.hpp"

namespace fracbayes {

/// Offline basis persistence, keyed by coarse edge. Reloadable across runs.
void save_offline_basis(const std::string& dir, const OfflineBasis& basis);
std::optional<OfflineBasis> load_offline_basis(const std::string& dir,
                                               const RectGrid& fine,
                                               const CoarseGrid& coarse, int Lb);

/// Batch pipeline bound to one configuration and output directory. Stages
/// write CSV artifacts plus a manifest recording the config hash, seeds and
/// per-file content hashes.
class Experiment {
 public:
  Experiment(ExperimentConfig cfg, std::string cfg_hash = "",
             ExecPolicy policy = ExecPolicy::Parallel);

  void synth();
  void forward();
  void map();
  void implicit();
  void lmap();
  void mcmc();
  void diagnose();
  void run_stage(const std::string& name);

  // Building blocks, shared with the acceptance suite.
  const ExperimentConfig& config() const { return cfg_; }
  const RectGrid& fine_grid() const { return fine_; }
  const CoarseGrid& coarse_grid() const { return coarse_; }
  const Parameterization& parameterization() const { return param_; }
  ProbeSet probe_set() const { return probes_; }
  Eigen::VectorXd truth_vector() const;
  std::unique_ptr<FineForwardModel> fine_model() const;
  std::unique_ptr<GmsForwardModel> gms_model(int Lb_override = 0) const;
  std::unique_ptr<ForwardModel> solver_model() const;
  OfflineBasis build_offline_basis(int Lb) const;

  /// Load data/map artifacts produced by earlier stages.
  Eigen::VectorXd load_data() const;
  MapResult load_map() const;
  PriorSpec prior_spec(double lambda) const;

  /// Evaluate F over an ensemble and record per-sample model predictions.
  Eigen::MatrixXd evaluate_posterior(SampleEnsemble& ens,
                                     const ForwardModel& model,
                                     const Eigen::VectorXd& d,
                                     const PriorSpec& prior) const;

  /// Surrogate around a MAP estimate for the configured prior family.
  PosteriorSurrogate make_surrogate(const ForwardModel& model,
                                    const Eigen::VectorXd& d,
                                    const MapResult& map_result) const;

  std::string out_path(const std::string& name) const;

 private:
  void ensure_output_dir() const;
  void record_outputs(const std::string& stage,
                      const std::vector<std::string>& files,
                      const std::string& extra_json = "") const;

  ExperimentConfig cfg_;
  std::string cfg_hash_;
  ExecPolicy policy_;
  RectGrid fine_;
  CoarseGrid coarse_;
  Parameterization param_;
  Loads loads_;
  ProbeSet probes_;
};

}  // namespace fracbayes
