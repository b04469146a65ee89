#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "falconn/sim/system.hpp"
#include "falconn/surrogate/model.hpp"
#include "falconn/symreg/expr.hpp"

namespace falconn::symreg {

struct SrConfig {
  int iterations = 100;
  int population = 50;
  /// Emitted expressions have complexity strictly below this.
  int complexity_cap = 30;
  int tournament = 5;
  double crossover_rate = 0.3;
  double mutation_rate = 0.7;
  /// Chance that a new offspring gets its constants refined.
  double optimize_probability = 0.1;
  /// Quasi-Newton iterations per constant refinement.
  int constant_steps = 8;
  /// Fitness uses at most this many samples (deterministic stride).
  int max_samples = 1000;
  /// Extra state-space samples per trajectory point and their spread.
  double extra_per_point = 2.0;
  double perturb_scale = 0.25;
  std::uint64_t seed = 0;

  void validate() const;
};

/// Lifted states, inputs and the surrogate's driven-row derivatives.
struct DerivativeSamples {
  Eigen::MatrixXd z;        // N x dim
  Eigen::MatrixXd u;        // N x inputs
  Eigen::MatrixXd targets;  // N x driven rows

  Eigen::Index size() const { return z.rows(); }
};

/// Samples along each trace's surrogate trajectory (on the training grid of
/// `solve_step`) plus `n_extra` Gaussian perturbations of those states with
/// scale perturb_scale * per-dimension std of the visited states.
DerivativeSamples sample_derivatives(const surrogate::SurrogateModel& model,
                                     std::span<const sim::Trace> traces, Eigen::Index n_extra,
                                     double perturb_scale, double solve_step,
                                     std::uint64_t seed);

struct Candidate {
  Expr expr;
  double mse = 0.0;  // derivative MSE on the samples
  int complexity() const { return expr.complexity(); }
};

/// Best candidate per complexity, then reduced to the Pareto front
/// (strictly decreasing MSE with growing complexity).
using Front = std::vector<Candidate>;

/// Genetic programming for one driven row. Deterministic given the seed.
Front evolve(const DerivativeSamples& samples, int row, const SrConfig& config);

/// Derivative MSE of `e` against column `row` of the targets; inf if any
/// evaluation is non-finite.
double derivative_mse(const Expr& e, const DerivativeSamples& samples, int row);

/// Refines the constants of `e` by quasi-Newton steps on the derivative MSE.
Candidate optimize_constants(const Expr& e, const DerivativeSamples& samples, int row,
                             int steps);

}  // namespace falconn::symreg
