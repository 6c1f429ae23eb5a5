#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/Dense>
#include <random>

#include "fracbayes/grid.hpp"
#include "fracbayes/mixed_fem.hpp"

using namespace fracbayes;

namespace {

Eigen::MatrixXd dense_block(const ForwardSystem& sys, double s) {
  const int nv = sys.n_velocity, np = sys.n_pressure;
  Eigen::MatrixXd M = Eigen::MatrixXd::Zero(nv + np, nv + np);
  M.topLeftCorner(nv, nv) = Eigen::MatrixXd(sys.A);
  M.topRightCorner(nv, np) = Eigen::MatrixXd(sys.B);
  M.bottomLeftCorner(np, nv) = -s * Eigen::MatrixXd(sys.B).transpose();
  M.bottomRightCorner(np, np) =
      Eigen::MatrixXd((sys.C_diag + s * sys.D_diag).asDiagonal());
  return M;
}

}  // namespace

TEST_CASE("grid counts and classification") {
  const RectGrid g22 = build_rect_grid(2, 2);
  CHECK(g22.cell_count() == 4);
  CHECK(g22.edge_count() == 12);

  const RectGrid g11 = build_rect_grid(1, 1);
  CHECK(g11.cell_count() == 1);
  CHECK(g11.edge_count() == 4);
  for (int e = 0; e < 4; ++e) CHECK(g11.is_boundary(e));

  const RectGrid g80 = build_rect_grid(80, 80);
  CHECK(g80.cell_count() == 6400);
  CHECK(g80.edge_count() == 12960);

  CHECK_THROWS_AS(build_rect_grid(0, 2), std::invalid_argument);
  CHECK_THROWS_AS(build_rect_grid(3, -1), std::invalid_argument);
}

TEST_CASE("grid adjacency: interior edges touch two cells, boundary one") {
  const RectGrid g(4, 3);
  for (int e = 0; e < g.edge_count(); ++e) {
    const auto cells = g.edge_cells(e);
    const int adjacent = (cells[0] >= 0) + (cells[1] >= 0);
    CHECK(adjacent == (g.is_boundary(e) ? 1 : 2));
  }
  for (int e : g.boundary_edges()) {
    const auto n = g.edge_normal(e);
    CHECK(n[0] * n[0] + n[1] * n[1] == doctest::Approx(1.0));
    const int o = g.boundary_orientation(e);
    CHECK((o == 1 || o == -1));
  }
  CHECK_THROWS_AS(g.boundary_orientation(g.vertical_edge_id(2, 1)),
                  std::invalid_argument);
}

TEST_CASE("reference-cell velocity mass values on the unit cell") {
  // closed form: along each axis the two linear shape functions give
  // diag 1/3 and cross 1/6 on a unit cell with k = 1
  const RectGrid g(1, 1);
  const ForwardSystem sys =
      assemble_mixed(g, CellField::Ones(1), CellField::Zero(1));
  const Eigen::MatrixXd A(sys.A);
  const int we = g.vertical_edge_id(0, 0), ea = g.vertical_edge_id(1, 0);
  const int so = g.horizontal_edge_id(0, 0), no = g.horizontal_edge_id(0, 1);
  CHECK(A(we, we) == doctest::Approx(1.0 / 3).epsilon(1e-14));
  CHECK(A(ea, ea) == doctest::Approx(1.0 / 3).epsilon(1e-14));
  CHECK(A(we, ea) == doctest::Approx(1.0 / 6).epsilon(1e-14));
  CHECK(A(so, no) == doctest::Approx(1.0 / 6).epsilon(1e-14));
  CHECK(A(we, so) == 0.0);
  CHECK(A(we, no) == 0.0);
}

TEST_CASE("assembly scaling, symmetry and positivity") {
  const RectGrid g(3, 2);
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> unif(0.5, 3.0);
  CellField k(g.cell_count()), q(g.cell_count());
  for (int c = 0; c < g.cell_count(); ++c) {
    k[c] = unif(rng);
    q[c] = unif(rng);
  }
  const ForwardSystem sys = assemble_mixed(g, k, q);
  const ForwardSystem scaled = assemble_mixed(g, 2.0 * k, q);

  CHECK((Eigen::MatrixXd(scaled.A) - 0.5 * Eigen::MatrixXd(sys.A)).norm() <
        1e-14);
  CHECK((Eigen::MatrixXd(scaled.B) - Eigen::MatrixXd(sys.B)).norm() == 0.0);
  CHECK((scaled.C_diag - sys.C_diag).norm() == 0.0);
  CHECK((scaled.D_diag - sys.D_diag).norm() == 0.0);

  CHECK((Eigen::MatrixXd(sys.A) - Eigen::MatrixXd(sys.A).transpose()).norm() ==
        0.0);

  std::normal_distribution<double> normal;
  for (int trial = 0; trial < 10; ++trial) {
    Eigen::VectorXd x(sys.n_velocity);
    for (int i = 0; i < x.size(); ++i) x[i] = normal(rng);
    CHECK(x.dot(sys.A * x) > 0.0);
    Eigen::VectorXd y(sys.n_pressure);
    for (int i = 0; i < y.size(); ++i) y[i] = normal(rng);
    CHECK(y.dot((sys.C_diag + 0.7 * sys.D_diag).cwiseProduct(y)) > 0.0);
  }

  CHECK(assemble_mixed(g, k, CellField::Zero(g.cell_count())).D_diag.norm() ==
        0.0);

  k[3] = -1.0;
  CHECK_THROWS_WITH_AS(assemble_mixed(g, k, q), doctest::Contains("cell 3"),
                       std::domain_error);
}

TEST_CASE("loads: source and boundary terms") {
  const RectGrid g(4, 4);
  const std::vector<double> times = {0.1, 0.2};

  SUBCASE("zero trace gives zero boundary load, constant source scales by area") {
    const Loads loads = assemble_loads(
        g, [](double, double, double) { return 3.0; },
        [](double, double, double) { return 0.0; }, times);
    CHECK(loads.G.norm() == 0.0);
    CHECK((loads.F.array() - 3.0 * g.cell_area()).abs().maxCoeff() < 1e-15);
  }

  SUBCASE("unit trace loads boundary edges with signed edge length") {
    // 1-d quadrature of the constant edge trace gives |e|; the sign flips
    // with the outward normal
    const Loads loads = assemble_loads(
        g, [](double, double, double) { return 0.0; },
        [](double, double, double) { return 1.0; }, times);
    const int west = g.vertical_edge_id(0, 2);
    const int east = g.vertical_edge_id(4, 2);
    CHECK(loads.G(west, 0) == doctest::Approx(g.hy()).epsilon(1e-14));
    CHECK(loads.G(east, 0) == doctest::Approx(-g.hy()).epsilon(1e-14));
    for (int e = 0; e < g.edge_count(); ++e)
      if (!g.is_boundary(e)) CHECK(loads.G(e, 0) == 0.0);
  }

  CHECK_THROWS_AS(assemble_loads(
                      g, [](double, double, double) { return 0.0; },
                      [](double, double, double) { return 0.0; }, {}),
                  std::invalid_argument);
}

TEST_CASE("saddle solve against a dense factorization oracle") {
  const RectGrid g(2, 2);
  const ForwardSystem sys =
      assemble_mixed(g, CellField::Ones(4), CellField::Ones(4));
  const double s = 0.37;

  SUBCASE("zero rhs gives the zero solution") {
    auto [sigma, beta] =
        solve_saddle(sys, s, Eigen::VectorXd::Zero(sys.n_velocity),
                     Eigen::VectorXd::Zero(sys.n_pressure));
    CHECK(sigma.norm() == 0.0);
    CHECK(beta.norm() == 0.0);
  }

  SUBCASE("consistency: injected solution is recovered") {
    std::mt19937_64 rng(5);
    std::normal_distribution<double> normal;
    Eigen::VectorXd sig_star(sys.n_velocity), bet_star(sys.n_pressure);
    for (int i = 0; i < sig_star.size(); ++i) sig_star[i] = normal(rng);
    for (int i = 0; i < bet_star.size(); ++i) bet_star[i] = normal(rng);

    const Eigen::MatrixXd M = dense_block(sys, s);
    Eigen::VectorXd x(sys.n_velocity + sys.n_pressure);
    x << sig_star, bet_star;
    const Eigen::VectorXd rhs = M * x;
    auto [sigma, beta] = solve_saddle(sys, s, rhs.head(sys.n_velocity),
                                      rhs.tail(sys.n_pressure));
    CHECK((sigma - sig_star).norm() < 1e-10);
    CHECK((beta - bet_star).norm() < 1e-10);
  }

  SUBCASE("dense LU oracle agreement") {
    std::mt19937_64 rng(6);
    std::normal_distribution<double> normal;
    Eigen::VectorXd rhs(sys.n_velocity + sys.n_pressure);
    for (int i = 0; i < rhs.size(); ++i) rhs[i] = normal(rng);

    const Eigen::VectorXd x_oracle =
        Eigen::FullPivLU<Eigen::MatrixXd>(dense_block(sys, s)).solve(rhs);
    auto [sigma, beta] = solve_saddle(sys, s, rhs.head(sys.n_velocity),
                                      rhs.tail(sys.n_pressure));
    CHECK((sigma - x_oracle.head(sys.n_velocity)).norm() < 1e-10);
    CHECK((beta - x_oracle.tail(sys.n_pressure)).norm() < 1e-10);
  }
}

TEST_CASE("singular block system is reported") {
  ForwardSystem sys;
  sys.n_velocity = 1;
  sys.n_pressure = 1;
  sys.A.resize(1, 1);
  sys.A.insert(0, 0) = 1.0;
  sys.B.resize(1, 1);  // zero coupling and zero mass: singular pressure row
  sys.C_diag = Eigen::VectorXd::Zero(1);
  sys.D_diag = Eigen::VectorXd::Zero(1);
  CHECK_THROWS_AS(solve_saddle(sys, 1.0, Eigen::VectorXd::Ones(1),
                               Eigen::VectorXd::Ones(1)),
                  std::runtime_error);
}

TEST_CASE("stationary solve conserves total boundary flux") {
  // drop the time mass (C = 0) and the reaction: the divergence rows then
  // state that the total outflux equals the integrated source
  const RectGrid g(6, 5);
  ForwardSystem sys = assemble_mixed(g, CellField::Ones(g.cell_count()),
                                     CellField::Zero(g.cell_count()));
  sys.C_diag.setZero();

  const Loads loads = assemble_loads(
      g, [](double x, double, double) { return std::sin(2.0 * M_PI * x); },
      [](double, double, double) { return 0.0; }, {1.0});

  auto [sigma, beta] = solve_saddle(sys, 1.0, loads.G.col(0), loads.F.col(0));
  double outflux = 0.0;
  for (int e : g.boundary_edges())
    outflux += g.boundary_orientation(e) * sigma[e] * g.edge_length(e);
  const double total_source = loads.F.col(0).sum();
  CHECK(std::abs(outflux - total_source) < 1e-10);
}

TEST_CASE("boundary flux extraction") {
  const RectGrid g(60, 60);  // 120 left/right edges
  const auto lr = g.left_right_boundary_edges();
  CHECK(lr.size() == 120);

  Eigen::MatrixXd sigma = Eigen::MatrixXd::Zero(g.edge_count(), 3);
  SUBCASE("zero history gives zero observations, 120 edges x 2 times = 240") {
    std::vector<Probe> probes;
    for (int t : {0, 2})
      for (int e : lr) probes.push_back({e, t});
    const Eigen::VectorXd obs = extract_boundary_flux(g, sigma, probes);
    CHECK(obs.size() == 240);
    CHECK(obs.norm() == 0.0);
  }

  SUBCASE("duplicates preserved in order") {
    sigma(lr[3], 1) = 4.5;
    const std::vector<Probe> probes = {{lr[3], 1}, {lr[0], 0}, {lr[3], 1}};
    const Eigen::VectorXd obs = extract_boundary_flux(g, sigma, probes);
    CHECK(obs[0] == 4.5);
    CHECK(obs[1] == 0.0);
    CHECK(obs[2] == 4.5);
  }

  SUBCASE("interior probes are rejected") {
    const std::vector<Probe> probes = {{g.vertical_edge_id(30, 30), 0}};
    CHECK_THROWS_AS(extract_boundary_flux(g, sigma, probes),
                    std::invalid_argument);
  }

  SUBCASE("out-of-range time index is rejected") {
    const std::vector<Probe> probes = {{lr[0], 3}};
    CHECK_THROWS_AS(extract_boundary_flux(g, sigma, probes),
                    std::invalid_argument);
  }
}
