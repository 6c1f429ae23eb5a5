#include "fracbayes/caputo.hpp"

#include <cmath>
#include <stdexcept>

namespace fracbayes {

namespace {

void check_order(double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0))
    throw std::invalid_argument("fractional order must lie in (0,1)");
}

}  // namespace

Eigen::VectorXd l1_weights(double alpha, int n) {
  check_order(alpha);
  if (n < 1) throw std::invalid_argument("l1_weights: step index must be >= 1");
  const double p = 1.0 - alpha;
  Eigen::VectorXd w(n);
  for (int k = 1; k <= n; ++k)
    w[k - 1] = std::pow(double(n + 1 - k), p) - std::pow(double(n - k), p);
  return w;
}

MultiTermScheme multiterm_scheme(const MultiTermOrders& orders, double dt,
                                 int steps) {
  check_order(orders.alpha1);
  check_order(orders.alpha2);
  if (orders.gamma1 < 0.0 || orders.gamma2 < 0.0 ||
      orders.gamma1 + orders.gamma2 <= 0.0)
    throw std::invalid_argument("multiterm_scheme: multipliers must be nonnegative with positive sum");
  if (!(dt > 0.0)) throw std::invalid_argument("multiterm_scheme: dt must be positive");
  if (steps < 1) throw std::invalid_argument("multiterm_scheme: step count must be >= 1");

  MultiTermScheme sc;
  sc.orders = orders;
  sc.dt = dt;
  sc.steps = steps;
  sc.s1 = std::pow(dt, orders.alpha1) * std::tgamma(2.0 - orders.alpha1);
  sc.s2 = std::pow(dt, orders.alpha2) * std::tgamma(2.0 - orders.alpha2);
  const double denom = orders.gamma1 * sc.s2 + orders.gamma2 * sc.s1;
  sc.s = sc.s1 * sc.s2 / denom;

  // Per-order factors of the history weights; the pairing uses the other
  // order's s so that gamma_i s_{i+1} / denom = s gamma_i / s_i.
  const double f1 = orders.gamma1 * sc.s2 / denom;
  const double f2 = orders.gamma2 * sc.s1 / denom;
  const double p1 = 1.0 - orders.alpha1;
  const double p2 = 1.0 - orders.alpha2;

  sc.b.resize(steps);
  for (int n = 1; n <= steps; ++n)
    sc.b[n - 1] = f1 * (std::pow(double(n), p1) - std::pow(double(n - 1), p1)) +
                  f2 * (std::pow(double(n), p2) - std::pow(double(n - 1), p2));

  sc.c.resize(std::max(steps - 1, 0));
  for (int k = 1; k <= steps - 1; ++k) {
    const double br1 = 2.0 * std::pow(double(k), p1) -
                       std::pow(double(k + 1), p1) - std::pow(double(k - 1), p1);
    const double br2 = 2.0 * std::pow(double(k), p2) -
                       std::pow(double(k + 1), p2) - std::pow(double(k - 1), p2);
    sc.c[k - 1] = f1 * br1 + f2 * br2;
  }
  return sc;
}

Trajectory march(const SaddleSolver& solver, const ForwardSystem& sys,
                 const MultiTermScheme& scheme, const Loads& loads,
                 const Eigen::VectorXd& beta0) {
  const int M = scheme.steps;
  if (loads.steps() != M)
    throw std::invalid_argument("march: load column count does not match step count");
  if (beta0.size() != sys.n_pressure)
    throw std::invalid_argument("march: initial pressure size mismatch");

  Trajectory traj;
  traj.sigma.setZero(sys.n_velocity, M);
  traj.beta.setZero(sys.n_pressure, M);

  const double s = scheme.s;
  Eigen::VectorXd history(sys.n_pressure);
  for (int n = 1; n <= M; ++n) {
    history.setZero();
    for (int k = 1; k <= n - 1; ++k)
      history += scheme.c[k - 1] * traj.beta.col(n - k - 1);
    history += scheme.b[n - 1] * beta0;

    const Eigen::VectorXd rhs_p =
        s * loads.F.col(n - 1) + sys.C_diag.cwiseProduct(history);
    auto [sig, bet] = solver.solve(loads.G.col(n - 1), rhs_p);
    traj.sigma.col(n - 1) = sig;
    traj.beta.col(n - 1) = bet;
  }
  return traj;
}

Trajectory march(const ForwardSystem& sys, const MultiTermScheme& scheme,
                 const Loads& loads, const Eigen::VectorXd& beta0) {
  SaddleSolver solver(sys, scheme.s);
  return march(solver, sys, scheme, loads, beta0);
}

}  // namespace fracbayes
