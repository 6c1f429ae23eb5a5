#pragma once

#include <Eigen/Core>
#include <functional>

#include "fracbayes/grid.hpp"

namespace fracbayes {

/// Separable squared-exponential covariance
/// C(x;y) = rho^2 exp(-|x1-y1|^2/(2 l1^2) - |x2-y2|^2/(2 l2^2)).
struct CovarianceSpec {
  double rho = 1.0;
  double l1 = 0.1;
  double l2 = 0.1;
};

/// Truncated Karhunen-Loeve basis of a log-field on cell centers.
/// Column j of Phi is sqrt(lambda_j) * zeta_j with zeta_j the orthonormal
/// eigenvectors of the covariance matrix, eigenvalues descending.
struct KLBasis {
  Eigen::MatrixXd Phi;          // points x l
  Eigen::VectorXd eigenvalues;  // descending, positive
  Eigen::VectorXd kappa;        // mean log-field

  int modes() const { return static_cast<int>(Phi.cols()); }
};

KLBasis kl_decompose(const CovarianceSpec& cov, const RectGrid& grid,
                     int truncation, const Eigen::VectorXd& kappa);

/// field = exp(Phi v + kappa), strictly positive.
CellField field_from_coeffs(const KLBasis& basis, const Eigen::VectorXd& v);

/// h(x) = 1/2 + arctan(x)/pi, a strictly increasing bijection R -> (0,1).
double bounded_transform(double x);
/// Inverse of h; the argument must lie strictly inside (0,1).
double bounded_transform_inverse(double u);

struct PriorSpec {
  enum class Family { HierGaussian, Laplace };
  Family family = Family::HierGaussian;
  double a = 1.0;        // Gamma hyperprior shape
  double b = 1e-4;       // Gamma hyperprior rate
  double lambda = 1.0;   // rate (Laplace) or collapsed precision (Gaussian)
  double sigma = 0.01;   // observation noise level
};

using ForwardFn = std::function<Eigen::VectorXd(const Eigen::VectorXd&)>;

/// Negative log posterior with additive constants dropped:
///   Gaussian: |H(v)-d|^2/(2 sigma^2) + (lambda/2)|v|^2
///   Laplace:  |H(v)-d|^2/(2 sigma^2) + lambda |v|_1
double neg_log_posterior(const Eigen::VectorXd& v, const Eigen::VectorXd& d,
                         const PriorSpec& prior, const ForwardFn& forward);

/// The data-misfit part alone, |H(v)-d|^2/(2 sigma^2).
double data_misfit(const Eigen::VectorXd& v, const Eigen::VectorXd& d,
                   double sigma, const ForwardFn& forward);

}  // namespace fracbayes
