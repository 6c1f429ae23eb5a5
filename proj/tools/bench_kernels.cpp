// Timing comparison of the serial reference kernels against their
// OpenMP-parallel counterparts: snapshot construction, spectral reduction,
// finite-difference sensitivities and ensemble posterior evaluation.

#include <chrono>
#include <cstdio>

#include "fracbayes/caputo.hpp"
#include "fracbayes/config.hpp"
#include "fracbayes/exec.hpp"
#include "fracbayes/forward_model.hpp"
#include "fracbayes/gmsfem.hpp"
#include "fracbayes/map_solvers.hpp"
#include "fracbayes/sampling.hpp"

using namespace fracbayes;
using Clock = std::chrono::steady_clock;

namespace {

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

template <class Fn>
double timed(Fn&& fn) {
  const auto t0 = Clock::now();
  fn();
  return seconds_since(t0);
}

void report(const char* name, double serial, double parallel) {
  std::printf("%-28s serial %8.3f s   parallel %8.3f s   speedup %.2fx\n", name,
              serial, parallel, serial / parallel);
}

}  // namespace

int main() {
  std::printf("threads available: %d\n\n", hardware_threads());

  const RectGrid fine(60, 60);
  const CoarseGrid coarse = build_coarse_grid(fine, 6, 6);
  const CellField k = field_preset("channel", fine);
  const CellField q = CellField::Ones(fine.cell_count());

  SnapshotSpace snaps;
  report("snapshot build",
         timed([&] { snaps = build_snapshots(fine, coarse, k, ExecPolicy::Serial); }),
         timed([&] { snaps = build_snapshots(fine, coarse, k, ExecPolicy::Parallel); }));

  OfflineBasis basis;
  report("spectral reduction",
         timed([&] { basis = spectral_reduce(fine, coarse, snaps, k, 6, ExecPolicy::Serial); }),
         timed([&] { basis = spectral_reduce(fine, coarse, snaps, k, 6, ExecPolicy::Parallel); }));

  // forward model with the orders as unknowns
  Parameterization param;
  param.invert_orders = true;
  param.fixed_orders = {0.3, 0.6, 0.2, 0.8};
  param.fixed_k = k;
  param.fixed_q = q;

  const int steps = 50;
  std::vector<double> times(steps);
  for (int n = 1; n <= steps; ++n) times[n - 1] = 0.02 * n;
  const Loads loads = assemble_loads(
      fine, [](double, double, double) { return 10.0; },
      [](double, double, double) { return 1.0; }, times);

  ProbeSet probes;
  probes.edges = fine.left_right_boundary_edges();
  probes.time_indices = {19, 49};

  const GmsForwardModel model(fine, coarse, basis, param, loads, 0.02, steps,
                              probes);
  const ForwardFn fwd = model.as_function();
  const Eigen::VectorXd v0 = Eigen::VectorXd::Zero(2);

  report("sensitivity columns",
         timed([&] { sensitivity(fwd, v0, 0.5, ExecPolicy::Serial); }),
         timed([&] { sensitivity(fwd, v0, 0.5, ExecPolicy::Parallel); }));

  const Eigen::VectorXd d = model.observe(v0);
  const ObjectiveFn objective = [&](const Eigen::VectorXd& v) {
    return (model.observe(v) - d).squaredNorm();
  };
  const PosteriorSurrogate surrogate(v0, 0.0, 0.01 * Eigen::MatrixXd::Identity(2, 2));
  SampleEnsemble ens = draw_samples(surrogate, 64, 7);

  report("ensemble evaluation",
         timed([&] { evaluate_ensemble(ens, objective, ExecPolicy::Serial); }),
         timed([&] { evaluate_ensemble(ens, objective, ExecPolicy::Parallel); }));
  return 0;
}
