#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "fracbayes/fields.hpp"
#include "fracbayes/grid.hpp"

namespace fracbayes {

/// Scalar field descriptor resolved at cell centers: a constant, an affine
/// function a0 + ax x + ay y, a named preset, or a CSV field file.
struct FieldDescriptor {
  enum class Kind { Constant, Affine, Preset, File };
  Kind kind = Kind::Constant;
  double value = 0.0;            // Constant
  double a0 = 0.0, ax = 0.0, ay = 0.0;  // Affine
  std::string name;              // Preset
  std::string path;              // File

  CellField resolve(const RectGrid& grid) const;
  /// Pointwise evaluation; File descriptors cannot be evaluated this way.
  double evaluate(double x, double y) const;
};

CellField field_preset(const std::string& name, const RectGrid& grid);

struct TimeConfig {
  double dt = 0.02;
  double final_time = 1.0;
  int steps() const;
};

struct ModelConfig {
  double gamma1 = 1.0;
  double gamma2 = 1.0;
  FieldDescriptor source;     // f(x)
  FieldDescriptor boundary;   // g(x)
  FieldDescriptor diffusion;  // fixed k(x)
  FieldDescriptor reaction;   // fixed q(x)
};

struct KlConfig {
  double rho = 0.5;
  double len1 = 0.1;
  double len2 = 0.1;
  int modes = 12;
  FieldDescriptor mean;  // kappa, log-space mean
};

struct UnknownsConfig {
  bool orders = false;
  std::string field = "none";  // none | diffusion | reaction
  KlConfig kl;
};

struct TruthConfig {
  double alpha1 = 0.3;
  double alpha2 = 0.6;
  std::optional<std::vector<double>> coeffs;  // explicit KL truth
  std::uint64_t coeffs_seed = 7;              // otherwise drawn from N(0,I)
  std::optional<FieldDescriptor> field;       // direct truth field (no KL)
};

struct ProbeConfig {
  std::string edges = "left_right";  // left_right | all_boundary
  std::vector<int> edge_ids;         // explicit override
  std::vector<double> times;
};

struct PriorConfig {
  std::string family = "hier_gaussian";  // hier_gaussian | laplace
  double a = 1.0;
  double b = 1e-4;
  double mu0 = 1e-2;    // initial regularization weight (hierarchical path)
  double mu = 5e-3;     // fixed regularization weight (Laplace path)
  double irls_eps = 1e-6;
};

struct MapConfig {
  int max_iterations = 20;
  double step_tolerance = 1e-6;
  double fd_step = 0.5;
  bool central_differences = false;
};

struct SamplerConfig {
  int count = 1000;
  double scale = 1.0;          // tempering scale; <= 0 selects via ESS target
  double ess_target = 0.0;
  int max_scale_iterations = 50;
  double pcn_beta = 0.05;
  int chain_length = 5000;
  int burn_in = 1000;
};

struct TrainingConfig {
  int count = 1;  // diffusion realizations feeding the offline basis
  std::uint64_t seed = 404;
};

struct SeedConfig {
  std::uint64_t data = 101;
  std::uint64_t sampling = 202;
  std::uint64_t mcmc = 303;
};

struct ExperimentConfig {
  int fine_nx = 40, fine_ny = 40;
  int coarse_nx = 4, coarse_ny = 4;
  int basis_per_edge = 6;
  TimeConfig time;
  ModelConfig model;
  UnknownsConfig unknowns;
  TruthConfig truth;
  ProbeConfig probes;
  double noise_sigma = 0.01;
  PriorConfig prior;
  MapConfig map;
  SamplerConfig sampler;
  TrainingConfig training;
  std::string solver = "gmsfem";  // gmsfem | fine
  SeedConfig seeds;
  std::string output = "out";
};

ExperimentConfig load_config(const std::string& path);
/// Stable content hash of the configuration for run manifests.
std::string config_hash(const std::string& path);

}  // namespace fracbayes
