#include "fracbayes/map_solvers.hpp"

#include <Eigen/Cholesky>
#include <cmath>
#include <stdexcept>
#include <string>

namespace fracbayes {

SensitivityMatrix sensitivity(const ForwardFn& forward, const Eigen::VectorXd& v,
                              double step, ExecPolicy policy, bool central) {
  if (!(step > 0.0)) throw std::invalid_argument("sensitivity: step must be positive");
  const int l = static_cast<int>(v.size());

  SensitivityMatrix sens;
  sens.point = v;
  sens.step = step;
  sens.base = forward(v);
  sens.Hbar.resize(sens.base.size(), l);

  std::vector<std::string> errors(l);
  parallel_for(l, policy, [&](int j) {
    try {
      Eigen::VectorXd vp = v;
      vp[j] += step;
      const Eigen::VectorXd fp = forward(vp);
      if (central) {
        Eigen::VectorXd vm = v;
        vm[j] -= step;
        sens.Hbar.col(j) = (fp - forward(vm)) / (2.0 * step);
      } else {
        sens.Hbar.col(j) = (fp - sens.base) / step;
      }
    } catch (const std::exception& e) {
      errors[j] = e.what();
    }
  });
  for (int j = 0; j < l; ++j)
    if (!errors[j].empty())
      throw std::runtime_error("sensitivity: forward solve failed for column " +
                               std::to_string(j) + ": " + errors[j]);
  return sens;
}

namespace {

Eigen::VectorXd solve_normal_equations(const Eigen::MatrixXd& lhs,
                                       const Eigen::VectorXd& rhs,
                                       const char* who) {
  Eigen::LDLT<Eigen::MatrixXd> ldlt(lhs);
  if (ldlt.info() != Eigen::Success)
    throw std::runtime_error(std::string(who) + ": singular normal equations");
  const Eigen::VectorXd x = ldlt.solve(rhs);
  if (!x.allFinite())
    throw std::runtime_error(std::string(who) + ": singular normal equations");
  return x;
}

}  // namespace

MapResult augmented_tikhonov(const ForwardFn& forward, const Eigen::VectorXd& d,
                             const PriorSpec& prior, const Eigen::VectorXd& v0,
                             const AugTikhonovOptions& opts) {
  if (!(prior.sigma > 0.0))
    throw std::invalid_argument("augmented_tikhonov: sigma must be positive");
  const int l = static_cast<int>(v0.size());

  MapResult result;
  result.v_map = v0;
  double mu = opts.mu0;
  double lambda = mu / (prior.sigma * prior.sigma);

  for (int k = 1; k <= opts.max_iterations; ++k) {
    const SensitivityMatrix sens = sensitivity(
        forward, result.v_map, opts.fd_step, opts.policy, opts.central_differences);
    const Eigen::VectorXd residual = d - sens.base;

    const Eigen::MatrixXd lhs =
        sens.Hbar.transpose() * sens.Hbar +
        mu * Eigen::MatrixXd::Identity(l, l);
    const Eigen::VectorXd h = solve_normal_equations(
        lhs, sens.Hbar.transpose() * residual, "augmented_tikhonov");

    result.v_map += h;
    lambda = (0.5 * l + prior.a - 1.0) /
             (0.5 * result.v_map.squaredNorm() + prior.b);
    mu = lambda * prior.sigma * prior.sigma;

    const double misfit = (forward(result.v_map) - d).squaredNorm();
    result.trace.push_back({k, misfit, lambda, h.norm()});
    if (h.norm() < opts.step_tolerance) break;
  }
  result.lambda_final = lambda;
  return result;
}

Eigen::VectorXd irls_weights(const Eigen::VectorXd& v, double eps) {
  if (!(eps >= 0.0)) throw std::invalid_argument("irls_weights: eps must be nonnegative");
  return (v.array().square() + eps).rsqrt();
}

MapResult irls(const ForwardFn& forward, const Eigen::VectorXd& d, double mu,
               const Eigen::VectorXd& v0, const IrlsOptions& opts) {
  if (!(mu > 0.0)) throw std::invalid_argument("irls: mu must be positive");
  if (!(opts.eps > 0.0)) throw std::invalid_argument("irls: eps must be positive");

  MapResult result;
  result.v_map = v0;
  result.lambda_final = mu;  // caller maps to a Laplace rate via mu = 2 lambda sigma^2

  for (int k = 1; k <= opts.max_iterations; ++k) {
    const SensitivityMatrix sens = sensitivity(
        forward, result.v_map, opts.fd_step, opts.policy, opts.central_differences);
    const Eigen::VectorXd w = irls_weights(result.v_map, opts.eps);

    const Eigen::MatrixXd lhs =
        sens.Hbar.transpose() * sens.Hbar + mu * Eigen::MatrixXd(w.asDiagonal());
    const Eigen::VectorXd rhs =
        sens.Hbar.transpose() * (d - sens.base + sens.Hbar * result.v_map);

    const Eigen::VectorXd v_next = solve_normal_equations(lhs, rhs, "irls");
    const double step_norm = (v_next - result.v_map).norm();
    result.v_map = v_next;

    const double misfit = (forward(result.v_map) - d).squaredNorm();
    result.trace.push_back({k, misfit, mu, step_norm});
  }
  return result;
}

}  // namespace fracbayes
