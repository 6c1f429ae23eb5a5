#include "fracbayes/sampling.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <cmath>
#include <limits>
#include <random>
#include <stdexcept>

namespace fracbayes {

PosteriorSurrogate::PosteriorSurrogate(Eigen::VectorXd theta_map, double phi_F,
                                       const Eigen::MatrixXd& hess_inverse)
    : theta_map_(std::move(theta_map)), phi_F_(phi_F) {
  if (hess_inverse.rows() != hess_inverse.cols() ||
      hess_inverse.rows() != theta_map_.size())
    throw std::invalid_argument("PosteriorSurrogate: dimension mismatch");

  const Eigen::MatrixXd sym = 0.5 * (hess_inverse + hess_inverse.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sym);
  if (es.info() != Eigen::Success)
    throw std::runtime_error("PosteriorSurrogate: eigendecomposition failed");

  eigvec_ = es.eigenvectors();
  eigval_ = es.eigenvalues();
  const double lambda_max = eigval_.maxCoeff();
  if (!(lambda_max > 0.0))
    throw std::runtime_error("PosteriorSurrogate: inverse Hessian has no positive direction");
  const double floor = 1e-12 * lambda_max;
  for (int i = 0; i < eigval_.size(); ++i)
    if (eigval_[i] < floor) eigval_[i] = floor;

  L_ = eigval_.array().sqrt().matrix().asDiagonal() * eigvec_.transpose();
}

Eigen::MatrixXd PosteriorSurrogate::hess_inverse() const {
  return L_.transpose() * L_;
}

double PosteriorSurrogate::fhat(const Eigen::VectorXd& theta) const {
  const Eigen::VectorXd y = eigvec_.transpose() * (theta - theta_map_);
  return phi_F_ + 0.5 * (y.array().square() / eigval_.array()).sum();
}

Eigen::MatrixXd hessian_gaussian_inverse(const Eigen::MatrixXd& Hbar,
                                         const Eigen::MatrixXd& C,
                                         const Eigen::MatrixXd& Gamma) {
  if (Hbar.cols() != C.rows() || C.rows() != C.cols() ||
      Gamma.rows() != Gamma.cols() || Gamma.rows() != Hbar.rows())
    throw std::invalid_argument("hessian_gaussian_inverse: dimension mismatch");
  const Eigen::MatrixXd CHt = C * Hbar.transpose();
  const Eigen::MatrixXd S = Hbar * CHt + Gamma;
  Eigen::LDLT<Eigen::MatrixXd> ldlt(S);
  if (ldlt.info() != Eigen::Success)
    throw std::runtime_error("hessian_gaussian_inverse: innovation matrix not factorizable");
  return C - CHt * ldlt.solve(CHt.transpose());
}

Eigen::MatrixXd hessian_laplace(const Eigen::MatrixXd& Hbar,
                                const Eigen::MatrixXd& Gamma, double lambda,
                                const Eigen::VectorXd& W_diag) {
  if (W_diag.size() != Hbar.cols())
    throw std::invalid_argument("hessian_laplace: weight size mismatch");
  if ((W_diag.array() <= 0.0).any())
    throw std::invalid_argument("hessian_laplace: reweighting diagonal must be positive");
  if (lambda < 0.0)
    throw std::invalid_argument("hessian_laplace: lambda must be nonnegative");

  Eigen::LDLT<Eigen::MatrixXd> ldlt(Gamma);
  if (ldlt.info() != Eigen::Success)
    throw std::runtime_error("hessian_laplace: noise covariance not factorizable");
  Eigen::MatrixXd hess = Hbar.transpose() * ldlt.solve(Hbar);
  hess += 2.0 * lambda * Eigen::MatrixXd(W_diag.asDiagonal());
  return hess;
}

Eigen::MatrixXd hessian_inverse(const Eigen::MatrixXd& hess) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(
      0.5 * (hess + hess.transpose()));
  if (es.info() != Eigen::Success)
    throw std::runtime_error("hessian_inverse: eigendecomposition failed");
  const double lambda_max = es.eigenvalues().maxCoeff();
  if (!(lambda_max > 0.0) ||
      es.eigenvalues().minCoeff() <= 1e-14 * lambda_max)
    throw std::runtime_error("hessian_inverse: Hessian is rank deficient");
  return es.eigenvectors() *
         es.eigenvalues().cwiseInverse().asDiagonal() *
         es.eigenvectors().transpose();
}

SampleEnsemble draw_samples(const PosteriorSurrogate& surrogate, int n_samples,
                            std::uint64_t seed) {
  if (n_samples < 1)
    throw std::invalid_argument("draw_samples: sample count must be >= 1");
  const int dim = static_cast<int>(surrogate.theta_map().size());

  SampleEnsemble ens;
  ens.samples.resize(dim, n_samples);
  ens.F.setZero(n_samples);
  ens.Fhat.setZero(n_samples);
  ens.weights = Eigen::VectorXd::Constant(n_samples, 1.0 / n_samples);
  ens.ess = n_samples;

  for (int i = 0; i < n_samples; ++i) {
    std::mt19937_64 rng(substream_seed(seed, i));
    std::normal_distribution<double> normal(0.0, 1.0);
    Eigen::VectorXd xi(dim);
    for (int j = 0; j < dim; ++j) xi[j] = normal(rng);
    ens.samples.col(i) = surrogate.theta_map() + surrogate.L().transpose() * xi;
    ens.Fhat[i] = surrogate.phi_F() + 0.5 * xi.squaredNorm();
  }
  return ens;
}

Eigen::VectorXd tempered_weights(const Eigen::VectorXd& F,
                                 const Eigen::VectorXd& Fhat, double theta,
                                 std::vector<int>* flagged) {
  if (!(theta >= 1.0))
    throw std::invalid_argument("tempered_weights: scale must be >= 1");
  if (F.size() != Fhat.size())
    throw std::invalid_argument("tempered_weights: size mismatch");
  const int n = static_cast<int>(F.size());

  Eigen::VectorXd exponent(n);
  double shift = -std::numeric_limits<double>::infinity();
  for (int i = 0; i < n; ++i) {
    const double z = (Fhat[i] - F[i]) / theta;
    exponent[i] = std::isfinite(F[i]) ? z : -std::numeric_limits<double>::infinity();
    if (!std::isfinite(F[i]) && flagged) flagged->push_back(i);
    shift = std::max(shift, exponent[i]);
  }
  if (!std::isfinite(shift))
    throw std::runtime_error("tempered_weights: no sample has finite F");

  Eigen::VectorXd w(n);
  for (int i = 0; i < n; ++i)
    w[i] = std::isfinite(exponent[i]) ? std::exp(exponent[i] - shift) : 0.0;
  return w / w.sum();
}

double effective_sample_size(const Eigen::VectorXd& weights) {
  return 1.0 / weights.squaredNorm();
}

ThetaSelection select_theta(const Eigen::VectorXd& F, const Eigen::VectorXd& Fhat,
                            double ess_target, int max_iterations) {
  if (ess_target > F.size())
    throw std::invalid_argument("select_theta: target exceeds sample count");
  ThetaSelection sel;
  sel.theta = 1.0;
  for (int k = 0; k < max_iterations; ++k) {
    sel.ess = effective_sample_size(tempered_weights(F, Fhat, sel.theta));
    if (sel.ess >= ess_target) return sel;
    sel.theta += 1.0;
  }
  sel.ess = effective_sample_size(tempered_weights(F, Fhat, sel.theta));
  sel.target_reached = sel.ess >= ess_target;
  return sel;
}

std::vector<int> sus_indices(const Eigen::VectorXd& weights, std::uint64_t seed) {
  const int n = static_cast<int>(weights.size());
  if (n < 1) throw std::invalid_argument("sus_indices: empty weight vector");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> uniform(0.0, 1.0 / n);
  const double start = uniform(rng);

  std::vector<int> picks(n);
  double cumulative = weights[0];
  int j = 0;
  for (int i = 0; i < n; ++i) {
    const double pointer = start + static_cast<double>(i) / n;
    while (cumulative < pointer && j + 1 < n) cumulative += weights[++j];
    picks[i] = j;
  }
  return picks;
}

SampleEnsemble sus_resample(const SampleEnsemble& ensemble, std::uint64_t seed) {
  const int n = ensemble.size();
  const std::vector<int> picks = sus_indices(ensemble.weights, seed);

  SampleEnsemble out = ensemble;
  for (int i = 0; i < n; ++i) {
    out.samples.col(i) = ensemble.samples.col(picks[i]);
    out.F[i] = ensemble.F[picks[i]];
    out.Fhat[i] = ensemble.Fhat[picks[i]];
  }
  out.weights = Eigen::VectorXd::Constant(n, 1.0 / n);
  out.ess = n;
  return out;
}

void evaluate_ensemble(SampleEnsemble& ensemble, const ObjectiveFn& F,
                       ExecPolicy policy) {
  const int n = ensemble.size();
  parallel_for(n, policy, [&](int i) {
    double value;
    try {
      value = F(ensemble.samples.col(i));
    } catch (const std::exception&) {
      value = std::numeric_limits<double>::quiet_NaN();
    }
    ensemble.F[i] = value;
  });
}

Chain pcn_mcmc(const ObjectiveFn& misfit, const Eigen::VectorXd& v0, double beta,
               int length, std::uint64_t seed) {
  if (!(beta >= 0.0 && beta < 1.0))
    throw std::invalid_argument("pcn_mcmc: tuning parameter must lie in [0,1)");
  if (length < 1) throw std::invalid_argument("pcn_mcmc: chain length must be >= 1");
  const int dim = static_cast<int>(v0.size());
  const double keep = std::sqrt(1.0 - beta * beta);

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> uniform(0.0, 1.0);

  Chain chain;
  chain.states.resize(dim, length);
  chain.accepted.assign(length, 0);

  Eigen::VectorXd v = v0;
  double phi = misfit(v);
  int accepted = 0;
  for (int t = 0; t < length; ++t) {
    Eigen::VectorXd xi(dim);
    for (int j = 0; j < dim; ++j) xi[j] = normal(rng);
    const Eigen::VectorXd proposal = keep * v + beta * xi;
    const double phi_prop = misfit(proposal);
    if (uniform(rng) < std::exp(std::min(0.0, phi - phi_prop))) {
      v = proposal;
      phi = phi_prop;
      chain.accepted[t] = 1;
      ++accepted;
    }
    chain.states.col(t) = v;
  }
  chain.acceptance_rate = static_cast<double>(accepted) / length;
  return chain;
}

SampleEnsemble lmap_samples(const PosteriorSurrogate& surrogate, int n_samples,
                            std::uint64_t seed) {
  return draw_samples(surrogate, n_samples, seed);
}

}  // namespace fracbayes
