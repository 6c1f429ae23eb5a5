#include "fracbayes/fields.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace fracbayes {

KLBasis kl_decompose(const CovarianceSpec& cov, const RectGrid& grid,
                     int truncation, const Eigen::VectorXd& kappa) {
  if (!(cov.rho > 0.0 && cov.l1 > 0.0 && cov.l2 > 0.0))
    throw std::invalid_argument("kl_decompose: covariance parameters must be positive");
  const int m = grid.cell_count();
  if (truncation < 1 || truncation > m)
    throw std::invalid_argument("kl_decompose: truncation exceeds point count");
  if (kappa.size() != m)
    throw std::invalid_argument("kl_decompose: mean field size mismatch");

  Eigen::MatrixXd C(m, m);
  const double inv_l1 = 0.5 / (cov.l1 * cov.l1);
  const double inv_l2 = 0.5 / (cov.l2 * cov.l2);
  const double var = cov.rho * cov.rho;
  for (int i = 0; i < m; ++i) {
    const auto [xi, yi] = grid.cell_center(i);
    for (int j = 0; j <= i; ++j) {
      const auto [xj, yj] = grid.cell_center(j);
      const double dx = xi - xj, dy = yi - yj;
      const double v = var * std::exp(-dx * dx * inv_l1 - dy * dy * inv_l2);
      C(i, j) = v;
      C(j, i) = v;
    }
  }

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(C);
  if (es.info() != Eigen::Success)
    throw std::runtime_error("kl_decompose: eigendecomposition failed");

  // Eigen returns ascending order; take the largest `truncation` pairs.
  KLBasis basis;
  basis.kappa = kappa;
  basis.eigenvalues.resize(truncation);
  basis.Phi.resize(m, truncation);
  for (int j = 0; j < truncation; ++j) {
    const int src = m - 1 - j;
    const double lambda = es.eigenvalues()[src];
    if (!(lambda > 0.0))
      throw std::runtime_error("kl_decompose: truncation exceeds numerical rank");
    basis.eigenvalues[j] = lambda;
    basis.Phi.col(j) = std::sqrt(lambda) * es.eigenvectors().col(src);
  }
  return basis;
}

CellField field_from_coeffs(const KLBasis& basis, const Eigen::VectorXd& v) {
  if (v.size() != basis.Phi.cols())
    throw std::invalid_argument("field_from_coeffs: coefficient size mismatch");
  return (basis.Phi * v + basis.kappa).array().exp();
}

double bounded_transform(double x) {
  return 0.5 + std::atan(x) / std::numbers::pi;
}

double bounded_transform_inverse(double u) {
  if (!(u > 0.0 && u < 1.0))
    throw std::invalid_argument("bounded_transform_inverse: argument must lie in (0,1)");
  return std::tan(std::numbers::pi * (u - 0.5));
}

double neg_log_posterior(const Eigen::VectorXd& v, const Eigen::VectorXd& d,
                         const PriorSpec& prior, const ForwardFn& forward) {
  const double misfit = data_misfit(v, d, prior.sigma, forward);
  if (prior.family == PriorSpec::Family::Laplace)
    return misfit + prior.lambda * v.lpNorm<1>();
  return misfit + 0.5 * prior.lambda * v.squaredNorm();
}

double data_misfit(const Eigen::VectorXd& v, const Eigen::VectorXd& d,
                   double sigma, const ForwardFn& forward) {
  if (!(sigma > 0.0)) throw std::invalid_argument("data_misfit: sigma must be positive");
  const Eigen::VectorXd r = forward(v) - d;
  return r.squaredNorm() / (2.0 * sigma * sigma);
}

}  // namespace fracbayes
