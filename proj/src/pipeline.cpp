#include "fracbayes/pipeline.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <random>
#include <stdexcept>

#include <json.hpp>

#include "fracbayes/csv.hpp"
#include "fracbayes/diagnostics.hpp"

namespace fracbayes {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* kBasisFile = "offline_basis.csv";
constexpr const char* kBasisEigFile = "offline_eigenvalues.csv";

Eigen::VectorXd standard_normal_vector(int n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::VectorXd out(n);
  for (int i = 0; i < n; ++i) out[i] = normal(rng);
  return out;
}

std::string time_tag(double t) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%g", t);
  return buf;
}

}  // namespace

void save_offline_basis(const std::string& dir, const OfflineBasis& basis) {
  const int Lb = basis.Lb;
  std::vector<std::array<double, 4>> rows;
  for (int col = 0; col < basis.R_off.outerSize(); ++col)
    for (SpMat::InnerIterator it(basis.R_off, col); it; ++it)
      rows.push_back({double(col / Lb), double(col % Lb), double(it.row()),
                      it.value()});

  CsvTable table;
  table.header = {"coarse_edge", "local_index", "fine_edge", "value"};
  table.rows.resize(static_cast<int>(rows.size()), 4);
  for (size_t r = 0; r < rows.size(); ++r)
    for (int c = 0; c < 4; ++c) table.rows(static_cast<int>(r), c) = rows[r][c];
  write_csv(dir + "/" + kBasisFile, table);

  CsvTable eig;
  eig.header = {"coarse_edge", "local_index", "eigenvalue"};
  const int edges = static_cast<int>(basis.kept_eigenvalues.size());
  eig.rows.resize(edges * Lb, 3);
  for (int e = 0; e < edges; ++e)
    for (int m = 0; m < Lb; ++m) {
      eig.rows(e * Lb + m, 0) = e;
      eig.rows(e * Lb + m, 1) = m;
      eig.rows(e * Lb + m, 2) = basis.kept_eigenvalues[e][m];
    }
  write_csv(dir + "/" + kBasisEigFile, eig);
}

std::optional<OfflineBasis> load_offline_basis(const std::string& dir,
                                               const RectGrid& fine,
                                               const CoarseGrid& coarse,
                                               int Lb) {
  const std::string path = dir + "/" + kBasisFile;
  const std::string eig_path = dir + "/" + kBasisEigFile;
  if (!fs::exists(path) || !fs::exists(eig_path)) return std::nullopt;

  const CsvTable table = read_csv(path);
  const CsvTable eig = read_csv(eig_path);
  const int n_edges = coarse.edge_count();
  if (eig.row_count() != n_edges * Lb) return std::nullopt;  // stale dump

  OfflineBasis basis;
  basis.Lb = Lb;
  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(table.row_count());
  for (int r = 0; r < table.row_count(); ++r) {
    const int edge = static_cast<int>(table.rows(r, 0));
    const int local = static_cast<int>(table.rows(r, 1));
    const int fine_edge = static_cast<int>(table.rows(r, 2));
    if (edge >= n_edges || local >= Lb || fine_edge >= fine.edge_count())
      return std::nullopt;
    trip.emplace_back(fine_edge, edge * Lb + local, table.rows(r, 3));
  }
  basis.R_off.resize(fine.edge_count(), n_edges * Lb);
  basis.R_off.setFromTriplets(trip.begin(), trip.end());

  basis.kept_eigenvalues.assign(n_edges, Eigen::VectorXd(Lb));
  for (int r = 0; r < eig.row_count(); ++r) {
    const int edge = static_cast<int>(eig.rows(r, 0));
    const int local = static_cast<int>(eig.rows(r, 1));
    basis.kept_eigenvalues[edge][local] = eig.rows(r, 2);
  }
  basis.regularized.assign(n_edges, 0);

  std::vector<Eigen::Triplet<double>> gtrip;
  for (int K = 0; K < coarse.grid.cell_count(); ++K)
    for (int c : coarse.cell_fine_cells[K]) gtrip.emplace_back(K, c, 1.0);
  basis.G_off.resize(coarse.grid.cell_count(), fine.cell_count());
  basis.G_off.setFromTriplets(gtrip.begin(), gtrip.end());
  return basis;
}

Experiment::Experiment(ExperimentConfig cfg, std::string cfg_hash,
                       ExecPolicy policy)
    : cfg_(std::move(cfg)),
      cfg_hash_(std::move(cfg_hash)),
      policy_(policy),
      fine_(cfg_.fine_nx, cfg_.fine_ny),
      coarse_(build_coarse_grid(fine_, cfg_.coarse_nx, cfg_.coarse_ny)) {
  param_.invert_orders = cfg_.unknowns.orders;
  param_.fixed_orders = {cfg_.truth.alpha1, cfg_.truth.alpha2,
                         cfg_.model.gamma1, cfg_.model.gamma2};
  param_.fixed_k = cfg_.model.diffusion.resolve(fine_);
  param_.fixed_q = cfg_.model.reaction.resolve(fine_);
  if (cfg_.unknowns.field == "diffusion")
    param_.target = Parameterization::FieldTarget::Diffusion;
  else if (cfg_.unknowns.field == "reaction")
    param_.target = Parameterization::FieldTarget::Reaction;
  if (param_.target != Parameterization::FieldTarget::None) {
    const CovarianceSpec cov{cfg_.unknowns.kl.rho, cfg_.unknowns.kl.len1,
                             cfg_.unknowns.kl.len2};
    param_.basis = kl_decompose(cov, fine_, cfg_.unknowns.kl.modes,
                                cfg_.unknowns.kl.mean.resolve(fine_));
  }

  const int steps = cfg_.time.steps();
  std::vector<double> times(steps);
  for (int n = 1; n <= steps; ++n) times[n - 1] = n * cfg_.time.dt;
  const auto& src = cfg_.model.source;
  const auto& bnd = cfg_.model.boundary;
  loads_ = assemble_loads(
      fine_, [&](double x, double y, double) { return src.evaluate(x, y); },
      [&](double x, double y, double) { return bnd.evaluate(x, y); }, times);

  if (!cfg_.probes.edge_ids.empty())
    probes_.edges = cfg_.probes.edge_ids;
  else if (cfg_.probes.edges == "left_right")
    probes_.edges = fine_.left_right_boundary_edges();
  else if (cfg_.probes.edges == "all_boundary")
    probes_.edges = fine_.boundary_edges();
  else
    throw std::invalid_argument("config: probes.edges must be left_right|all_boundary");
  for (double t : cfg_.probes.times) {
    const int idx = static_cast<int>(std::lround(t / cfg_.time.dt)) - 1;
    if (idx < 0 || idx >= steps || std::abs((idx + 1) * cfg_.time.dt - t) > 1e-9)
      throw std::invalid_argument("config: probe time is not on the time grid");
    probes_.time_indices.push_back(idx);
  }
}

std::string Experiment::out_path(const std::string& name) const {
  return cfg_.output + "/" + name;
}

void Experiment::ensure_output_dir() const { fs::create_directories(cfg_.output); }

void Experiment::record_outputs(const std::string& stage,
                                const std::vector<std::string>& files,
                                const std::string& extra_json) const {
  const std::string manifest_path = out_path("manifest.json");
  json manifest;
  if (fs::exists(manifest_path)) {
    std::ifstream in(manifest_path);
    in >> manifest;
  }
  manifest["config_hash"] = cfg_hash_;
  manifest["seeds"] = {{"data", cfg_.seeds.data},
                       {"sampling", cfg_.seeds.sampling},
                       {"mcmc", cfg_.seeds.mcmc}};
  json stage_info;
  if (!extra_json.empty()) stage_info = json::parse(extra_json);
  manifest["stages"][stage] = stage_info;
  for (const auto& f : files) {
    const std::string full = out_path(f);
    manifest["outputs"][f] = file_hash(full);
  }
  std::ofstream out(manifest_path);
  out << manifest.dump(2) << "\n";
}

Eigen::VectorXd Experiment::truth_vector() const {
  Eigen::VectorXd v(param_.dim());
  int off = 0;
  if (param_.invert_orders) {
    v[0] = bounded_transform_inverse(cfg_.truth.alpha1);
    v[1] = bounded_transform_inverse(cfg_.truth.alpha2);
    off = 2;
  }
  if (param_.target != Parameterization::FieldTarget::None) {
    const int l = param_.basis.modes();
    if (cfg_.truth.coeffs) {
      if (static_cast<int>(cfg_.truth.coeffs->size()) != l)
        throw std::invalid_argument("truth: coefficient count mismatch");
      for (int i = 0; i < l; ++i) v[off + i] = (*cfg_.truth.coeffs)[i];
    } else {
      v.segment(off, l) = standard_normal_vector(l, cfg_.truth.coeffs_seed);
    }
  }
  return v;
}

std::unique_ptr<FineForwardModel> Experiment::fine_model() const {
  return std::make_unique<FineForwardModel>(fine_, param_, loads_, cfg_.time.dt,
                                            cfg_.time.steps(), probes_);
}

OfflineBasis Experiment::build_offline_basis(int Lb) const {
  using Target = Parameterization::FieldTarget;
  if (param_.target == Target::Diffusion && cfg_.training.count > 1) {
    // union-then-reduce over training realizations of the diffusion field;
    // the spectral forms use the prior-mean field
    std::vector<SnapshotSpace> parts;
    parts.reserve(cfg_.training.count);
    for (int r = 0; r < cfg_.training.count; ++r) {
      const Eigen::VectorXd vr = standard_normal_vector(
          param_.basis.modes(), substream_seed(cfg_.training.seed, r));
      parts.push_back(build_snapshots(fine_, coarse_,
                                      field_from_coeffs(param_.basis, vr),
                                      policy_));
    }
    const CellField k_mean =
        field_from_coeffs(param_.basis, Eigen::VectorXd::Zero(param_.basis.modes()));
    return spectral_reduce(fine_, coarse_, merge_snapshots(parts), k_mean, Lb,
                           policy_);
  }

  const CellField k_ref =
      param_.target == Target::Diffusion
          ? field_from_coeffs(param_.basis,
                              Eigen::VectorXd::Zero(param_.basis.modes()))
          : param_.fixed_k;
  const SnapshotSpace snaps = build_snapshots(fine_, coarse_, k_ref, policy_);
  return spectral_reduce(fine_, coarse_, snaps, k_ref, Lb, policy_);
}

std::unique_ptr<GmsForwardModel> Experiment::gms_model(int Lb_override) const {
  const int Lb = Lb_override > 0 ? Lb_override : cfg_.basis_per_edge;
  OfflineBasis basis;
  if (auto loaded = load_offline_basis(cfg_.output, fine_, coarse_, Lb)) {
    basis = std::move(*loaded);
  } else {
    basis = build_offline_basis(Lb);
    if (Lb == cfg_.basis_per_edge && fs::exists(cfg_.output))
      save_offline_basis(cfg_.output, basis);
  }
  return std::make_unique<GmsForwardModel>(fine_, coarse_, std::move(basis),
                                           param_, loads_, cfg_.time.dt,
                                           cfg_.time.steps(), probes_);
}

std::unique_ptr<ForwardModel> Experiment::solver_model() const {
  if (cfg_.solver == "fine") return fine_model();
  return gms_model();
}

PriorSpec Experiment::prior_spec(double lambda) const {
  PriorSpec prior;
  prior.family = cfg_.prior.family == "laplace" ? PriorSpec::Family::Laplace
                                                : PriorSpec::Family::HierGaussian;
  prior.a = cfg_.prior.a;
  prior.b = cfg_.prior.b;
  prior.lambda = lambda;
  prior.sigma = cfg_.noise_sigma;
  return prior;
}

void Experiment::synth() {
  ensure_output_dir();
  const auto model = fine_model();  // data always comes from the fine solver
  const Eigen::VectorXd vstar = truth_vector();
  Eigen::VectorXd d = model->observe(vstar);
  if (cfg_.noise_sigma > 0.0)
    d += cfg_.noise_sigma *
         standard_normal_vector(static_cast<int>(d.size()), cfg_.seeds.data);

  CsvTable data;
  data.header = {"probe_id", "edge", "time", "value"};
  data.rows.resize(d.size(), 4);
  const auto flat = probes_.flatten();
  for (int i = 0; i < d.size(); ++i) {
    data.rows(i, 0) = i;
    data.rows(i, 1) = flat[i].edge;
    data.rows(i, 2) = (flat[i].time_index + 1) * cfg_.time.dt;
    data.rows(i, 3) = d[i];
  }
  write_csv(out_path("data.csv"), data);

  CsvTable truth;
  truth.header = {"index", "value"};
  truth.rows.resize(vstar.size(), 2);
  for (int i = 0; i < vstar.size(); ++i) {
    truth.rows(i, 0) = i;
    truth.rows(i, 1) = vstar[i];
  }
  write_csv(out_path("truth.csv"), truth);
  record_outputs("synth", {"data.csv", "truth.csv"});
}

void Experiment::forward() {
  ensure_output_dir();
  const Eigen::VectorXd vstar = truth_vector();
  const auto dec = param_.decode(vstar);

  std::vector<std::string> files;
  auto dump_field = [&](const std::string& name, const CellField& field) {
    CsvTable t;
    t.header = {"x", "y", "value"};
    t.rows.resize(fine_.cell_count(), 3);
    for (int c = 0; c < fine_.cell_count(); ++c) {
      const auto [x, y] = fine_.cell_center(c);
      t.rows(c, 0) = x;
      t.rows(c, 1) = y;
      t.rows(c, 2) = field[c];
    }
    write_csv(out_path(name), t);
    files.push_back(name);
  };
  dump_field("field_diffusion.csv", dec.k);
  dump_field("field_reaction.csv", dec.q);

  Eigen::MatrixXd sigma, beta;
  if (cfg_.solver == "fine") {
    const Trajectory traj = fine_model()->solve(vstar);
    sigma = traj.sigma;
    beta = traj.beta;
  } else {
    const auto model = gms_model();
    const ForwardSystem coarse_sys =
        project_coarse(model->basis(), assemble_mixed(fine_, dec.k, dec.q));
    const MultiTermScheme scheme =
        multiterm_scheme(dec.orders, cfg_.time.dt, cfg_.time.steps());
    const Trajectory traj =
        march(coarse_sys, scheme, project_loads(model->basis(), loads_),
              Eigen::VectorXd::Zero(coarse_sys.n_pressure));
    sigma.resize(fine_.edge_count(), traj.sigma.cols());
    beta.resize(fine_.cell_count(), traj.beta.cols());
    for (int n = 0; n < traj.sigma.cols(); ++n) {
      auto [sf, bf] = prolongate(model->basis(), traj.sigma.col(n), traj.beta.col(n));
      sigma.col(n) = sf;
      beta.col(n) = bf;
    }
  }

  for (int t : probes_.time_indices) {
    const double time = (t + 1) * cfg_.time.dt;
    CsvTable pressure;
    pressure.header = {"x", "y", "value"};
    pressure.rows.resize(fine_.cell_count(), 3);
    for (int c = 0; c < fine_.cell_count(); ++c) {
      const auto [x, y] = fine_.cell_center(c);
      pressure.rows(c, 0) = x;
      pressure.rows(c, 1) = y;
      pressure.rows(c, 2) = beta(c, t);
    }
    const std::string pname = "pressure_t" + time_tag(time) + ".csv";
    write_csv(out_path(pname), pressure);
    files.push_back(pname);

    CsvTable flux;
    flux.header = {"edge_id", "value"};
    flux.rows.resize(fine_.edge_count(), 2);
    for (int e = 0; e < fine_.edge_count(); ++e) {
      flux.rows(e, 0) = e;
      flux.rows(e, 1) = sigma(e, t);
    }
    const std::string fname = "flux_t" + time_tag(time) + ".csv";
    write_csv(out_path(fname), flux);
    files.push_back(fname);
  }
  record_outputs("forward", files);
}

Eigen::VectorXd Experiment::load_data() const {
  const std::string path = out_path("data.csv");
  if (!fs::exists(path))
    throw std::runtime_error("missing data file " + path +
                             "; run the synth stage first");
  const CsvTable table = read_csv(path);
  const int vcol = table.col("value");
  if (vcol < 0) throw std::runtime_error("data.csv has no value column");
  return table.rows.col(vcol);
}

MapResult Experiment::load_map() const {
  const std::string path = out_path("map.csv");
  if (!fs::exists(path))
    throw std::runtime_error("missing MAP estimate " + path +
                             "; run the map stage first");
  const CsvTable table = read_csv(path);
  MapResult result;
  const int vcol = table.col("value");
  const int lcol = table.col("lambda");
  result.v_map.resize(table.row_count());
  for (int r = 0; r < table.row_count(); ++r) result.v_map[r] = table.rows(r, vcol);
  result.lambda_final = table.rows(0, lcol);
  return result;
}

void Experiment::map() {
  ensure_output_dir();
  const Eigen::VectorXd d = load_data();
  const auto model = solver_model();
  const ForwardFn fwd = model->as_function();

  MapResult result;
  if (cfg_.prior.family == "laplace") {
    IrlsOptions opts;
    opts.eps = cfg_.prior.irls_eps;
    opts.max_iterations = cfg_.map.max_iterations;
    opts.fd_step = cfg_.map.fd_step;
    opts.central_differences = cfg_.map.central_differences;
    opts.policy = policy_;
    result = irls(fwd, d, cfg_.prior.mu, Eigen::VectorXd::Zero(param_.dim()), opts);
    // Laplace rate implied by mu = 2 lambda sigma^2
    result.lambda_final =
        cfg_.prior.mu / (2.0 * cfg_.noise_sigma * cfg_.noise_sigma);
  } else {
    AugTikhonovOptions opts;
    opts.mu0 = cfg_.prior.mu0;
    opts.max_iterations = cfg_.map.max_iterations;
    opts.step_tolerance = cfg_.map.step_tolerance;
    opts.fd_step = cfg_.map.fd_step;
    opts.central_differences = cfg_.map.central_differences;
    opts.policy = policy_;
    result = augmented_tikhonov(fwd, d, prior_spec(0.0),
                                Eigen::VectorXd::Zero(param_.dim()), opts);
  }

  CsvTable map_table;
  map_table.header = {"index", "value", "lambda"};
  map_table.rows.resize(result.v_map.size(), 3);
  for (int i = 0; i < result.v_map.size(); ++i) {
    map_table.rows(i, 0) = i;
    map_table.rows(i, 1) = result.v_map[i];
    map_table.rows(i, 2) = result.lambda_final;
  }
  write_csv(out_path("map.csv"), map_table);

  CsvTable trace;
  trace.header = {"iter", "misfit", "lambda", "step_norm"};
  trace.rows.resize(static_cast<int>(result.trace.size()), 4);
  for (size_t i = 0; i < result.trace.size(); ++i) {
    trace.rows(static_cast<int>(i), 0) = result.trace[i].iter;
    trace.rows(static_cast<int>(i), 1) = result.trace[i].misfit;
    trace.rows(static_cast<int>(i), 2) = result.trace[i].lambda;
    trace.rows(static_cast<int>(i), 3) = result.trace[i].step_norm;
  }
  write_csv(out_path("map_trace.csv"), trace);
  record_outputs("map", {"map.csv", "map_trace.csv"});
}

PosteriorSurrogate Experiment::make_surrogate(const ForwardModel& model,
                                              const Eigen::VectorXd& d,
                                              const MapResult& map_result) const {
  const ForwardFn fwd = model.as_function();
  const SensitivityMatrix sens =
      sensitivity(fwd, map_result.v_map, cfg_.map.fd_step, policy_,
                  cfg_.map.central_differences);
  const int n = static_cast<int>(d.size());
  const int l = param_.dim();
  const double sigma2 = cfg_.noise_sigma * cfg_.noise_sigma;
  const Eigen::MatrixXd Gamma = sigma2 * Eigen::MatrixXd::Identity(n, n);

  Eigen::MatrixXd hinv;
  if (cfg_.prior.family == "laplace") {
    const Eigen::VectorXd W =
        irls_weights(map_result.v_map, cfg_.prior.irls_eps);
    hinv = hessian_inverse(
        hessian_laplace(sens.Hbar, Gamma, map_result.lambda_final, W));
  } else {
    const Eigen::MatrixXd C =
        Eigen::MatrixXd::Identity(l, l) / map_result.lambda_final;
    hinv = hessian_gaussian_inverse(sens.Hbar, C, Gamma);
  }

  const PriorSpec prior = prior_spec(map_result.lambda_final);
  const double phi_F = neg_log_posterior(map_result.v_map, d, prior,
                                         model.as_function());
  return PosteriorSurrogate(map_result.v_map, phi_F, hinv);
}

Eigen::MatrixXd Experiment::evaluate_posterior(SampleEnsemble& ens,
                                               const ForwardModel& model,
                                               const Eigen::VectorXd& d,
                                               const PriorSpec& prior) const {
  const int n = ens.size();
  Eigen::MatrixXd predictions(d.size(), n);
  const double sigma2 = prior.sigma * prior.sigma;
  parallel_for(n, policy_, [&](int i) {
    try {
      const Eigen::VectorXd v = ens.samples.col(i);
      const Eigen::VectorXd h = model.observe(v);
      predictions.col(i) = h;
      const double misfit = (h - d).squaredNorm() / (2.0 * sigma2);
      const double penalty = prior.family == PriorSpec::Family::Laplace
                                 ? prior.lambda * v.lpNorm<1>()
                                 : 0.5 * prior.lambda * v.squaredNorm();
      ens.F[i] = misfit + penalty;
    } catch (const std::exception&) {
      ens.F[i] = std::numeric_limits<double>::quiet_NaN();
      predictions.col(i).setZero();
    }
  });
  return predictions;
}

void Experiment::implicit() {
  ensure_output_dir();
  const Eigen::VectorXd d = load_data();
  const MapResult map_result = load_map();
  const auto model = solver_model();
  const PriorSpec prior = prior_spec(map_result.lambda_final);
  const PosteriorSurrogate surrogate = make_surrogate(*model, d, map_result);

  SampleEnsemble ens = draw_samples(surrogate, cfg_.sampler.count,
                                    cfg_.seeds.sampling);
  const Eigen::MatrixXd predictions = evaluate_posterior(ens, *model, d, prior);

  ThetaSelection theta;
  if (cfg_.sampler.scale > 0.0) {
    theta.theta = cfg_.sampler.scale;
  } else {
    theta = select_theta(ens.F, ens.Fhat, cfg_.sampler.ess_target,
                         cfg_.sampler.max_scale_iterations);
  }
  ens.theta_scale = theta.theta;
  ens.flagged.clear();
  ens.weights = tempered_weights(ens.F, ens.Fhat, theta.theta, &ens.flagged);
  ens.ess = effective_sample_size(ens.weights);
  ens.theta_warning = !theta.target_reached;

  const SampleEnsemble resampled = sus_resample(ens, cfg_.seeds.sampling + 1);

  auto dump_ensemble = [&](const std::string& name, const SampleEnsemble& e) {
    CsvTable t;
    t.header = {"sample_id", "weight", "F", "Fhat"};
    for (int k = 1; k <= param_.dim(); ++k)
      t.header.push_back("v_" + std::to_string(k));
    t.rows.resize(e.size(), 4 + param_.dim());
    for (int i = 0; i < e.size(); ++i) {
      t.rows(i, 0) = i;
      t.rows(i, 1) = e.weights[i];
      t.rows(i, 2) = e.F[i];
      t.rows(i, 3) = e.Fhat[i];
      for (int k = 0; k < param_.dim(); ++k) t.rows(i, 4 + k) = e.samples(k, i);
    }
    write_csv(out_path(name), t);
  };
  dump_ensemble("ensemble.csv", ens);
  dump_ensemble("ensemble_resampled.csv", resampled);

  // predictions of the resampled set feed the interval bands
  const std::vector<int> picks = sus_indices(ens.weights, cfg_.seeds.sampling + 1);
  CsvTable pred;
  pred.header = {"sample_id"};
  for (int p = 0; p < probes_.size(); ++p)
    pred.header.push_back("h_" + std::to_string(p + 1));
  pred.rows.resize(resampled.size(), 1 + probes_.size());
  for (int i = 0; i < resampled.size(); ++i) {
    pred.rows(i, 0) = i;
    for (int p = 0; p < probes_.size(); ++p)
      pred.rows(i, 1 + p) = predictions(p, picks[i]);
  }
  write_csv(out_path("predictions.csv"), pred);

  json extra = {{"theta_scale", theta.theta},
                {"ess", ens.ess},
                {"theta_warning", ens.theta_warning},
                {"flagged_samples", ens.flagged.size()}};
  record_outputs("implicit",
                 {"ensemble.csv", "ensemble_resampled.csv", "predictions.csv"},
                 extra.dump());
}

void Experiment::lmap() {
  ensure_output_dir();
  const Eigen::VectorXd d = load_data();
  const MapResult map_result = load_map();
  const auto model = solver_model();
  const PosteriorSurrogate surrogate = make_surrogate(*model, d, map_result);

  const SampleEnsemble ens =
      lmap_samples(surrogate, cfg_.sampler.count, cfg_.seeds.sampling);
  CsvTable t;
  t.header = {"sample_id", "weight"};
  for (int k = 1; k <= param_.dim(); ++k)
    t.header.push_back("v_" + std::to_string(k));
  t.rows.resize(ens.size(), 2 + param_.dim());
  for (int i = 0; i < ens.size(); ++i) {
    t.rows(i, 0) = i;
    t.rows(i, 1) = ens.weights[i];
    for (int k = 0; k < param_.dim(); ++k) t.rows(i, 2 + k) = ens.samples(k, i);
  }
  write_csv(out_path("lmap_ensemble.csv"), t);
  record_outputs("lmap", {"lmap_ensemble.csv"});
}

void Experiment::mcmc() {
  ensure_output_dir();
  if (cfg_.prior.family != "hier_gaussian")
    throw std::runtime_error(
        "mcmc stage requires the hierarchical Gaussian prior (whitened pCN)");
  const Eigen::VectorXd d = load_data();
  const MapResult map_result = load_map();
  const auto model = solver_model();

  const double root_lambda = std::sqrt(map_result.lambda_final);
  const ObjectiveFn misfit = [&](const Eigen::VectorXd& u) {
    return data_misfit(u / root_lambda, d, cfg_.noise_sigma,
                       model->as_function());
  };
  const Eigen::VectorXd u0 = root_lambda * map_result.v_map;
  const Chain chain = pcn_mcmc(misfit, u0, cfg_.sampler.pcn_beta,
                               cfg_.sampler.chain_length, cfg_.seeds.mcmc);

  CsvTable t;
  t.header = {"step", "accepted"};
  for (int k = 1; k <= param_.dim(); ++k)
    t.header.push_back("v_" + std::to_string(k));
  t.rows.resize(cfg_.sampler.chain_length, 2 + param_.dim());
  for (int i = 0; i < cfg_.sampler.chain_length; ++i) {
    t.rows(i, 0) = i;
    t.rows(i, 1) = chain.accepted[i];
    for (int k = 0; k < param_.dim(); ++k)
      t.rows(i, 2 + k) = chain.states(k, i) / root_lambda;
  }
  write_csv(out_path("chain.csv"), t);

  json extra = {{"acceptance_rate", chain.acceptance_rate}};
  record_outputs("mcmc", {"chain.csv"}, extra.dump());
}

void Experiment::diagnose() {
  ensure_output_dir();
  const std::string ens_path = out_path("ensemble_resampled.csv");
  if (!fs::exists(ens_path))
    throw std::runtime_error("missing ensemble " + ens_path +
                             "; run the implicit stage first");

  std::vector<std::string> files;
  const CsvTable ens_table = read_csv(ens_path);
  const int l = param_.dim();
  Eigen::MatrixXd samples(l, ens_table.row_count());
  for (int k = 0; k < l; ++k)
    samples.row(k) = ens_table.rows.col(ens_table.col("v_" + std::to_string(k + 1)));

  const Moments mom = moments(samples);
  CsvTable mt;
  mt.header = {"dimension", "mean", "stddev", "skewness", "kurtosis"};
  mt.rows.resize(l, 5);
  for (int k = 0; k < l; ++k) {
    mt.rows(k, 0) = k + 1;
    mt.rows(k, 1) = mom.mean[k];
    mt.rows(k, 2) = mom.stddev[k];
    mt.rows(k, 3) = mom.skewness[k];
    mt.rows(k, 4) = mom.kurtosis[k];
  }
  write_csv(out_path("diag_moments.csv"), mt);
  files.push_back("diag_moments.csv");

  if (param_.invert_orders) {
    Eigen::MatrixXd orders(2, samples.cols());
    for (int i = 0; i < samples.cols(); ++i) {
      orders(0, i) = bounded_transform(samples(0, i));
      orders(1, i) = bounded_transform(samples(1, i));
    }
    const Moments om = moments(orders);
    CsvTable ot;
    ot.header = {"order", "mean", "stddev", "skewness", "kurtosis", "correlation"};
    const double corr =
        sample_correlation(orders.row(0).transpose(), orders.row(1).transpose());
    ot.rows.resize(2, 6);
    for (int k = 0; k < 2; ++k) {
      ot.rows(k, 0) = k + 1;
      ot.rows(k, 1) = om.mean[k];
      ot.rows(k, 2) = om.stddev[k];
      ot.rows(k, 3) = om.skewness[k];
      ot.rows(k, 4) = om.kurtosis[k];
      ot.rows(k, 5) = corr;
    }
    write_csv(out_path("diag_orders.csv"), ot);
    files.push_back("diag_orders.csv");
  }

  {  // weight histogram of the pre-resampling ensemble
    const CsvTable raw = read_csv(out_path("ensemble.csv"));
    const Eigen::VectorXd w = raw.rows.col(raw.col("weight"));
    const auto counts = weight_histogram(w);
    CsvTable ht;
    ht.header = {"bucket_lo", "bucket_hi", "count"};
    ht.rows.resize(7, 3);
    for (int b = 0; b < 7; ++b) {
      ht.rows(b, 0) = kWeightBucketEdges[b];
      ht.rows(b, 1) = kWeightBucketEdges[b + 1];
      ht.rows(b, 2) = counts[b];
    }
    write_csv(out_path("diag_weight_hist.csv"), ht);
    files.push_back("diag_weight_hist.csv");
  }

  {  // autocorrelation of the resampled ensemble, read as a sequence
    const int max_lag = std::min(50, static_cast<int>(samples.cols()) - 1);
    const Eigen::VectorXd rho = acf(samples, max_lag);
    CsvTable at;
    at.header = {"lag", "rho"};
    at.rows.resize(max_lag + 1, 2);
    for (int k = 0; k <= max_lag; ++k) {
      at.rows(k, 0) = k;
      at.rows(k, 1) = rho[k];
    }
    write_csv(out_path("diag_acf_ensemble.csv"), at);
    files.push_back("diag_acf_ensemble.csv");
  }

  if (fs::exists(out_path("chain.csv"))) {
    const CsvTable chain_table = read_csv(out_path("chain.csv"));
    const int T = chain_table.row_count();
    const int burn = std::min(cfg_.sampler.burn_in, T / 2);
    Eigen::MatrixXd chain(l, T - burn);
    for (int k = 0; k < l; ++k)
      chain.row(k) = chain_table.rows
                         .col(chain_table.col("v_" + std::to_string(k + 1)))
                         .segment(burn, T - burn);
    const int max_lag = std::min(100, static_cast<int>(chain.cols()) - 1);
    const Eigen::VectorXd rho = acf(chain, max_lag);
    CsvTable at;
    at.header = {"lag", "rho"};
    at.rows.resize(max_lag + 1, 2);
    for (int k = 0; k <= max_lag; ++k) {
      at.rows(k, 0) = k;
      at.rows(k, 1) = rho[k];
    }
    write_csv(out_path("diag_acf_chain.csv"), at);
    files.push_back("diag_acf_chain.csv");

    const IactResult ir = iact_ess(chain, max_lag);
    CsvTable et;
    et.header = {"iact", "ess"};
    et.rows.resize(1, 2);
    et.rows(0, 0) = ir.iact;
    et.rows(0, 1) = ir.ess;
    write_csv(out_path("diag_chain_ess.csv"), et);
    files.push_back("diag_chain_ess.csv");
  }

  if (fs::exists(out_path("predictions.csv")) && fs::exists(out_path("data.csv"))) {
    const CsvTable pred = read_csv(out_path("predictions.csv"));
    const CsvTable data = read_csv(out_path("data.csv"));
    const int n_probe = probes_.size();
    Eigen::MatrixXd realizations(n_probe, pred.row_count());
    for (int p = 0; p < n_probe; ++p)
      realizations.row(p) = pred.rows.col(pred.col("h_" + std::to_string(p + 1)));
    const IntervalBand band = intervals(realizations, cfg_.noise_sigma, 0.95,
                                        cfg_.seeds.sampling + 2);
    CsvTable it;
    it.header = {"probe_id", "edge",    "time",    "observed",
                 "cred_lo",  "cred_hi", "pred_lo", "pred_hi"};
    it.rows.resize(n_probe, 8);
    for (int p = 0; p < n_probe; ++p) {
      it.rows(p, 0) = p;
      it.rows(p, 1) = data.rows(p, data.col("edge"));
      it.rows(p, 2) = data.rows(p, data.col("time"));
      it.rows(p, 3) = data.rows(p, data.col("value"));
      it.rows(p, 4) = band.credible_lo[p];
      it.rows(p, 5) = band.credible_hi[p];
      it.rows(p, 6) = band.predictive_lo[p];
      it.rows(p, 7) = band.predictive_hi[p];
    }
    write_csv(out_path("diag_intervals.csv"), it);
    files.push_back("diag_intervals.csv");
  }

  record_outputs("diagnose", files);
}

void Experiment::run_stage(const std::string& name) {
  if (name == "synth") return synth();
  if (name == "forward") return forward();
  if (name == "map") return map();
  if (name == "implicit") return implicit();
  if (name == "lmap") return lmap();
  if (name == "mcmc") return mcmc();
  if (name == "diagnose") return diagnose();
  throw std::invalid_argument("unknown pipeline stage '" + name + "'");
}

}  // namespace fracbayes
