#include "fracbayes/config.hpp"

#include <cmath>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

#include "fracbayes/csv.hpp"

namespace fracbayes {

using nlohmann::json;

CellField field_preset(const std::string& name, const RectGrid& grid) {
  CellField out(grid.cell_count());
  if (name == "channel") {
    // heterogeneous diffusion demo: a winding high-permeability channel
    // over unit background with a low-permeability inclusion
    for (int c = 0; c < grid.cell_count(); ++c) {
      const auto [x, y] = grid.cell_center(c);
      const double channel = y - 0.5 - 0.2 * std::sin(2.0 * M_PI * x);
      const double lk = 2.2 * std::exp(-channel * channel / 0.0225) -
                        0.9 * std::exp(-((x - 0.25) * (x - 0.25) +
                                         (y - 0.25) * (y - 0.25)) /
                                       0.02);
      out[c] = std::exp(lk);
    }
  } else if (name == "blocks") {
    // piecewise-constant reaction demo with a sharp interior jump
    for (int c = 0; c < grid.cell_count(); ++c) {
      const auto [x, y] = grid.cell_center(c);
      const bool inside = x >= 0.3 && x <= 0.7 && y >= 0.3 && y <= 0.7;
      out[c] = std::exp(1.0 + (inside ? 1.0 : 0.0));
    }
  } else if (name == "smooth_bump") {
    for (int c = 0; c < grid.cell_count(); ++c) {
      const auto [x, y] = grid.cell_center(c);
      out[c] = 0.3 + 0.4 * std::exp(-((x - 0.5) * (x - 0.5) +
                                      (y - 0.5) * (y - 0.5)) /
                                    0.08);
    }
  } else {
    throw std::invalid_argument("field_preset: unknown preset '" + name + "'");
  }
  return out;
}

CellField FieldDescriptor::resolve(const RectGrid& grid) const {
  switch (kind) {
    case Kind::Constant:
      return CellField::Constant(grid.cell_count(), value);
    case Kind::Affine: {
      CellField out(grid.cell_count());
      for (int c = 0; c < grid.cell_count(); ++c) {
        const auto [x, y] = grid.cell_center(c);
        out[c] = a0 + ax * x + ay * y;
      }
      return out;
    }
    case Kind::Preset:
      return field_preset(name, grid);
    case Kind::File: {
      const CsvTable table = read_csv(path);
      const int vcol = table.col("value");
      if (vcol < 0 || table.row_count() != grid.cell_count())
        throw std::runtime_error("FieldDescriptor: field file " + path +
                                 " does not match the grid");
      return table.rows.col(vcol);
    }
  }
  throw std::logic_error("FieldDescriptor: unhandled kind");
}

double FieldDescriptor::evaluate(double x, double y) const {
  switch (kind) {
    case Kind::Constant:
      return value;
    case Kind::Affine:
      return a0 + ax * x + ay * y;
    default:
      throw std::invalid_argument(
          "FieldDescriptor: pointwise evaluation needs a constant or affine descriptor");
  }
}

int TimeConfig::steps() const {
  const double ratio = final_time / dt;
  const int steps = static_cast<int>(std::lround(ratio));
  if (steps < 1 || std::abs(ratio - steps) > 1e-9)
    throw std::invalid_argument("TimeConfig: final time must be a multiple of dt");
  return steps;
}

namespace {

FieldDescriptor parse_field(const json& j) {
  FieldDescriptor d;
  if (j.is_number()) {
    d.kind = FieldDescriptor::Kind::Constant;
    d.value = j.get<double>();
    return d;
  }
  const std::string kind = j.at("kind").get<std::string>();
  if (kind == "constant") {
    d.kind = FieldDescriptor::Kind::Constant;
    d.value = j.at("value").get<double>();
  } else if (kind == "affine") {
    d.kind = FieldDescriptor::Kind::Affine;
    d.a0 = j.value("a0", 0.0);
    d.ax = j.value("ax", 0.0);
    d.ay = j.value("ay", 0.0);
  } else if (kind == "preset") {
    d.kind = FieldDescriptor::Kind::Preset;
    d.name = j.at("name").get<std::string>();
  } else if (kind == "file") {
    d.kind = FieldDescriptor::Kind::File;
    d.path = j.at("path").get<std::string>();
  } else {
    throw std::invalid_argument("config: unknown field descriptor kind '" + kind + "'");
  }
  return d;
}

}  // namespace

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("load_config: cannot open " + path);
  json j;
  in >> j;

  ExperimentConfig cfg;
  if (j.contains("fine_grid")) {
    cfg.fine_nx = j["fine_grid"].at(0).get<int>();
    cfg.fine_ny = j["fine_grid"].at(1).get<int>();
  }
  if (j.contains("coarse_grid")) {
    cfg.coarse_nx = j["coarse_grid"].at(0).get<int>();
    cfg.coarse_ny = j["coarse_grid"].at(1).get<int>();
  }
  cfg.basis_per_edge = j.value("basis_per_edge", cfg.basis_per_edge);

  if (j.contains("time")) {
    cfg.time.dt = j["time"].value("dt", cfg.time.dt);
    cfg.time.final_time = j["time"].value("final", cfg.time.final_time);
  }

  if (j.contains("model")) {
    const auto& m = j["model"];
    cfg.model.gamma1 = m.value("gamma1", cfg.model.gamma1);
    cfg.model.gamma2 = m.value("gamma2", cfg.model.gamma2);
    if (m.contains("source")) cfg.model.source = parse_field(m["source"]);
    if (m.contains("boundary")) cfg.model.boundary = parse_field(m["boundary"]);
    if (m.contains("diffusion")) cfg.model.diffusion = parse_field(m["diffusion"]);
    if (m.contains("reaction")) cfg.model.reaction = parse_field(m["reaction"]);
  }

  if (j.contains("unknowns")) {
    const auto& u = j["unknowns"];
    cfg.unknowns.orders = u.value("orders", false);
    cfg.unknowns.field = u.value("field", std::string("none"));
    if (cfg.unknowns.field != "none" && cfg.unknowns.field != "diffusion" &&
        cfg.unknowns.field != "reaction")
      throw std::invalid_argument("config: unknowns.field must be none|diffusion|reaction");
    if (u.contains("kl")) {
      const auto& k = u["kl"];
      cfg.unknowns.kl.rho = k.value("rho", cfg.unknowns.kl.rho);
      cfg.unknowns.kl.len1 = k.value("len1", cfg.unknowns.kl.len1);
      cfg.unknowns.kl.len2 = k.value("len2", cfg.unknowns.kl.len2);
      cfg.unknowns.kl.modes = k.value("modes", cfg.unknowns.kl.modes);
      if (k.contains("mean")) cfg.unknowns.kl.mean = parse_field(k["mean"]);
    }
  }

  if (j.contains("truth")) {
    const auto& t = j["truth"];
    cfg.truth.alpha1 = t.value("alpha1", cfg.truth.alpha1);
    cfg.truth.alpha2 = t.value("alpha2", cfg.truth.alpha2);
    if (t.contains("coeffs"))
      cfg.truth.coeffs = t["coeffs"].get<std::vector<double>>();
    cfg.truth.coeffs_seed = t.value("coeffs_seed", cfg.truth.coeffs_seed);
    if (t.contains("field")) cfg.truth.field = parse_field(t["field"]);
  }

  if (j.contains("probes")) {
    const auto& p = j["probes"];
    cfg.probes.edges = p.value("edges", cfg.probes.edges);
    if (p.contains("edge_ids"))
      cfg.probes.edge_ids = p["edge_ids"].get<std::vector<int>>();
    if (p.contains("times"))
      cfg.probes.times = p["times"].get<std::vector<double>>();
  }
  if (cfg.probes.times.empty()) cfg.probes.times = {cfg.time.final_time};

  cfg.noise_sigma = j.value("noise_sigma", cfg.noise_sigma);

  if (j.contains("prior")) {
    const auto& p = j["prior"];
    cfg.prior.family = p.value("family", cfg.prior.family);
    if (cfg.prior.family != "hier_gaussian" && cfg.prior.family != "laplace")
      throw std::invalid_argument("config: prior.family must be hier_gaussian|laplace");
    cfg.prior.a = p.value("a", cfg.prior.a);
    cfg.prior.b = p.value("b", cfg.prior.b);
    cfg.prior.mu0 = p.value("mu0", cfg.prior.mu0);
    cfg.prior.mu = p.value("mu", cfg.prior.mu);
    cfg.prior.irls_eps = p.value("irls_eps", cfg.prior.irls_eps);
  }

  if (j.contains("map")) {
    const auto& m = j["map"];
    cfg.map.max_iterations = m.value("max_iterations", cfg.map.max_iterations);
    cfg.map.step_tolerance = m.value("step_tolerance", cfg.map.step_tolerance);
    cfg.map.fd_step = m.value("fd_step", cfg.map.fd_step);
    cfg.map.central_differences =
        m.value("central_differences", cfg.map.central_differences);
  }

  if (j.contains("sampler")) {
    const auto& s = j["sampler"];
    cfg.sampler.count = s.value("count", cfg.sampler.count);
    cfg.sampler.scale = s.value("scale", cfg.sampler.scale);
    cfg.sampler.ess_target = s.value("ess_target", cfg.sampler.ess_target);
    cfg.sampler.max_scale_iterations =
        s.value("max_scale_iterations", cfg.sampler.max_scale_iterations);
    cfg.sampler.pcn_beta = s.value("pcn_beta", cfg.sampler.pcn_beta);
    cfg.sampler.chain_length = s.value("chain_length", cfg.sampler.chain_length);
    cfg.sampler.burn_in = s.value("burn_in", cfg.sampler.burn_in);
  }

  if (j.contains("training")) {
    cfg.training.count = j["training"].value("count", cfg.training.count);
    cfg.training.seed = j["training"].value("seed", cfg.training.seed);
  }

  cfg.solver = j.value("solver", cfg.solver);
  if (cfg.solver != "gmsfem" && cfg.solver != "fine")
    throw std::invalid_argument("config: solver must be gmsfem|fine");

  if (j.contains("seeds")) {
    cfg.seeds.data = j["seeds"].value("data", cfg.seeds.data);
    cfg.seeds.sampling = j["seeds"].value("sampling", cfg.seeds.sampling);
    cfg.seeds.mcmc = j["seeds"].value("mcmc", cfg.seeds.mcmc);
  }
  cfg.output = j.value("output", cfg.output);
  return cfg;
}

std::string config_hash(const std::string& path) { return file_hash(path); }

}  // namespace fracbayes
