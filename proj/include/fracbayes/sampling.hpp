#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <functional>
#include <vector>

#include "fracbayes/exec.hpp"

namespace fracbayes {

using ObjectiveFn = std::function<double(const Eigen::VectorXd&)>;

/// Quadratic expansion of the negative log posterior around the MAP point,
/// together with a factor L of the inverse Hessian (Hinv = L^T L) used to
/// draw proposal samples theta = theta_map + L^T xi.
class PosteriorSurrogate {
 public:
  /// `hess_inverse` is symmetrized and eigenvalues below 1e-12 of the
  /// largest are clipped up so that a real factor always exists.
  PosteriorSurrogate(Eigen::VectorXd theta_map, double phi_F,
                     const Eigen::MatrixXd& hess_inverse);

  const Eigen::VectorXd& theta_map() const { return theta_map_; }
  double phi_F() const { return phi_F_; }
  const Eigen::MatrixXd& L() const { return L_; }
  Eigen::MatrixXd hess_inverse() const;

  /// Fhat(theta) = phi_F + (theta - map)^T Hess (theta - map) / 2.
  double fhat(const Eigen::VectorXd& theta) const;

 private:
  Eigen::VectorXd theta_map_;
  double phi_F_;
  Eigen::MatrixXd eigvec_;     // eigenvectors of Hinv
  Eigen::VectorXd eigval_;     // clipped eigenvalues of Hinv
  Eigen::MatrixXd L_;          // diag(sqrt(eigval)) * eigvec^T
};

/// Gaussian-prior inverse Hessian
/// Hinv = C - C Hbar^T (Hbar C Hbar^T + Gamma)^{-1} Hbar C.
Eigen::MatrixXd hessian_gaussian_inverse(const Eigen::MatrixXd& Hbar,
                                         const Eigen::MatrixXd& C,
                                         const Eigen::MatrixXd& Gamma);

/// Laplace-prior Hessian Hess = Hbar^T Gamma^{-1} Hbar + 2 lambda W with W
/// the positive diagonal reweighting at the MAP point. Returns the Hessian;
/// invert with hessian_inverse below.
Eigen::MatrixXd hessian_laplace(const Eigen::MatrixXd& Hbar,
                                const Eigen::MatrixXd& Gamma, double lambda,
                                const Eigen::VectorXd& W_diag);

/// Dense symmetric inverse; fails loudly on a rank-deficient matrix.
Eigen::MatrixXd hessian_inverse(const Eigen::MatrixXd& hess);

struct SampleEnsemble {
  Eigen::MatrixXd samples;   // dim x N
  Eigen::VectorXd F;         // negative log posterior per sample
  Eigen::VectorXd Fhat;      // surrogate value per sample
  Eigen::VectorXd weights;   // normalized
  double theta_scale = 1.0;  // tempering scale used for `weights`
  double ess = 0.0;
  bool theta_warning = false;     // ESS target unreached in the scale search
  std::vector<int> flagged;       // samples with non-finite F, weight forced to 0

  int size() const { return static_cast<int>(samples.cols()); }
};

/// theta_i = theta_map + L^T xi_i with xi_i standard normal; the per-sample
/// RNG streams depend only on (seed, i), so results are reproducible and
/// thread-schedule independent.
SampleEnsemble draw_samples(const PosteriorSurrogate& surrogate, int n_samples,
                            std::uint64_t seed);

/// Tempered weights w_i proportional to exp((Fhat_i - F_i)/theta), computed
/// with an exponent shift by the maximum. Non-finite F values give zero
/// weight and are flagged.
Eigen::VectorXd tempered_weights(const Eigen::VectorXd& F,
                                 const Eigen::VectorXd& Fhat, double theta,
                                 std::vector<int>* flagged = nullptr);

/// Effective sample size 1 / sum w_i^2 of normalized weights.
double effective_sample_size(const Eigen::VectorXd& weights);

struct ThetaSelection {
  double theta = 1.0;
  double ess = 0.0;
  bool target_reached = true;
};

/// Unit-increment scale search: starting at theta = 1, increase by 1 until
/// ESS >= target or the iteration budget is spent.
ThetaSelection select_theta(const Eigen::VectorXd& F, const Eigen::VectorXd& Fhat,
                            double ess_target, int max_iterations);

/// Stochastic universal resampling pointers: one uniform draw, equally
/// spaced pointers against the cumulative weights. Returns the source index
/// of each resampled slot; copy counts differ from N w_i by less than one.
std::vector<int> sus_indices(const Eigen::VectorXd& weights, std::uint64_t seed);

SampleEnsemble sus_resample(const SampleEnsemble& ensemble, std::uint64_t seed);

/// Evaluate F across the ensemble (each sample owns its forward workspace);
/// exceptions are converted to non-finite F so that weighting can flag them.
void evaluate_ensemble(SampleEnsemble& ensemble, const ObjectiveFn& F,
                       ExecPolicy policy = ExecPolicy::Serial);

struct Chain {
  Eigen::MatrixXd states;          // dim x length
  std::vector<std::uint8_t> accepted;
  double acceptance_rate = 0.0;
};

/// Preconditioned Crank-Nicolson kernel in whitened coordinates: proposal
/// v' = sqrt(1-beta^2) v + beta xi, acceptance min(1, exp(Phi(v) - Phi(v')))
/// with Phi the data misfit alone.
Chain pcn_mcmc(const ObjectiveFn& misfit, const Eigen::VectorXd& v0, double beta,
               int length, std::uint64_t seed);

/// Plain Gaussian approximation N(theta_map, Hinv): identical draws to
/// draw_samples under the same seed, uniform weights, no resampling.
SampleEnsemble lmap_samples(const PosteriorSurrogate& surrogate, int n_samples,
                            std::uint64_t seed);

}  // namespace fracbayes
