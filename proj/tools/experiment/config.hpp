#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "vdlab/adjoint.hpp"
#include "vdlab/hj_solvers.hpp"
#include "vdlab/scheme.hpp"
#include "vdlab/selection.hpp"

namespace vdlab::experiment {

struct EtaSpec {
  enum class Kind { power, constant };
  Kind kind = Kind::power;
  double power = 2.0;
  double scale = 1.0;  ///< constant value when kind == constant

  EtaRule rule() const;
  std::string describe() const;
};

struct LpSettings {
  bool enabled = true;
  int grid = 0;  ///< LP grid nodes per axis; 0 picks min(N, 128) in 1D, min(N, 16) in 2D
  VelocityGrid velocity{};
  int modes = 5;  ///< K, Fourier modes per axis in the holonomy test
};

struct SolverSettings {
  SolveConfig discounted{};
  SolveConfig critical{};
  ErgodicOptions ergodic{};
  double ergodic_eta = 1e-4;
};

struct SelectionSettings {
  std::vector<std::string> seeds{"zero", "cos:1", "-cos:1", "sin:1", "-sin:1", "discounted"};
  CandidateOptions candidates{};
  double convergence_tol = 5e-2;
  double convergence_slack = 0.1;
  double upper_tol = 1e-2;
  double lower_tol = 1e-2;
};

struct ExperimentConfig {
  std::string model = "A";
  std::string alpha = "zero";
  int dim = 1;
  int N = 128;
  std::vector<double> lambdas{};
  EtaSpec eta{};
  /// Adjoint source nodes (flat indices); empty means `sources_per_axis` evenly spaced per axis.
  std::vector<std::size_t> x0{};
  int sources_per_axis = 8;
  LpSettings lp{};
  SolverSettings solver{};
  SelectionSettings selection{};
  AdjointMode adjoint_mode = AdjointMode::frozen;
  bool h6_variant = false;
  std::uint64_t seed = 1;
  int threads = 1;
  std::string output = "run";

  /// Resolved source list for the configured grid.
  std::vector<std::size_t> sources() const;
};

/// Parses a YAML mapping. Unknown and duplicate keys, wrong types and invalid
/// values raise ConfigError naming the key (and the line when known).
ExperimentConfig parse_config(const std::string& text);
ExperimentConfig load_config(const std::string& path);

/// Checks cross-field constraints. Called by parse_config.
void validate(const ExperimentConfig& cfg);

}  // namespace vdlab::experiment
