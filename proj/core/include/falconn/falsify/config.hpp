#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "falconn/ocp/problem.hpp"
#include "falconn/surrogate/model.hpp"
#include "falconn/symreg/regression.hpp"

namespace falconn::falsify {

struct RunConfig {
  std::string plant;
  std::string spec;
  int budget = 10;
  /// Experiment horizon in seconds; 0 takes the spec horizon.
  double horizon = 0.0;
  /// Collocation step; 0 picks 0.2 s for horizons of 20 s or more, else 0.1 s.
  double dt = 0.0;
  double k = 2.0;
  /// Corners-random segment length.
  double segment = 5.0;
  /// Lifting order per plant output; empty means 2 for every output.
  std::vector<int> orders;
  std::string known_dynamics = "none";
  double state_bound = ocp::kDefaultStateBound;
  surrogate::TrainConfig train;
  symreg::SrConfig symreg;
  ocp::SolverOptions solver;
  /// See ocp::make_solver.
  std::string solver_method = "reduced-space";
  std::uint64_t seed = 0;
  std::filesystem::path output_dir;

  /// Throws ConfigError.
  void validate() const;
};

/// Key-value text with optional [train], [symreg] and [solver] sections:
///
///   plant = "LinearSecondOrder"
///   spec = "G[0,10](abs(Pos) < 2)"
///   budget = 10
///   [train]
///   hidden = [16, 8]
///
/// Unknown keys and malformed lines throw ConfigError with the line number.
RunConfig parse_config(const std::string& text);
RunConfig load_config(const std::filesystem::path& path);
/// Inverse of parse_config (all keys, fixed order).
std::string format_config(const RunConfig& config);

}  // namespace falconn::falsify
