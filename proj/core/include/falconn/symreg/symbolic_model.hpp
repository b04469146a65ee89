#pragma once

#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "falconn/sim/system.hpp"
#include "falconn/surrogate/lifting.hpp"
#include "falconn/surrogate/model.hpp"
#include "falconn/symreg/expr.hpp"
#include "falconn/symreg/regression.hpp"

namespace falconn::symreg {

/// dz/dt = A z + B f(z, u) with one expression per driven row.
class SymbolicModel {
 public:
  SymbolicModel() = default;
  SymbolicModel(surrogate::StateLifting lifting, std::vector<Expr> rows,
                std::vector<std::string> input_names, std::vector<std::string> output_names);

  const surrogate::StateLifting& lifting() const { return lifting_; }
  const std::vector<Expr>& rows() const { return rows_; }
  const std::vector<std::string>& input_names() const { return input_names_; }
  const std::vector<std::string>& output_names() const { return output_names_; }
  int dim() const { return lifting_.dim(); }
  int num_inputs() const { return static_cast<int>(input_names_.size()); }

  Eigen::VectorXd derivative(const Eigen::VectorXd& z, const Eigen::VectorXd& u) const;
  /// d(dz/dt)/dz (dim x dim) and d(dz/dt)/du (dim x inputs) from the symbolic
  /// partials.
  void jacobians(const Eigen::VectorXd& z, const Eigen::VectorXd& u, Eigen::MatrixXd& jz,
                 Eigen::MatrixXd& ju) const;
  sim::Dynamics dynamics() const;

  /// True if some row has a partial in an input that is non-zero at one of
  /// the sample points.
  bool input_driven(const Eigen::MatrixXd& z, const Eigen::MatrixXd& u) const;

  /// Infix text, one row per line.
  std::string to_string() const;

  std::vector<double> derivative_mse;
  double trajectory_mse = 0.0;

 private:
  surrogate::StateLifting lifting_;
  std::vector<Expr> rows_;
  std::vector<std::vector<Expr>> dz_, du_;
  std::vector<std::string> input_names_, output_names_;
};

/// Summed per-trace output MSE of the symbolic model simulated from each
/// trace's lifted initial state; inf when any simulation leaves the finite /
/// 1e6 range.
double trajectory_mse(const SymbolicModel& model,
                      std::span<const surrogate::TrainingTrace> data);

struct SelectionReport {
  SymbolicModel model;
  /// Per front member (single-row case: index into the front) its trajectory
  /// MSE, or inf when filtered out.
  std::vector<std::vector<double>> scores;
};

/// Picks the combination of front members (coordinate-wise over rows) with
/// the least trajectory MSE after the input-dependence and stability
/// filters. Throws DistillationError when every candidate is filtered.
SelectionReport select_candidate(const std::vector<Front>& fronts,
                                 std::span<const sim::Trace> traces,
                                 const surrogate::StateLifting& lifting,
                                 const std::vector<std::string>& input_names,
                                 const std::vector<std::string>& output_names,
                                 double solve_step, const DerivativeSamples& probe);

/// sample_derivatives + evolve per row + select_candidate.
SelectionReport distill(const surrogate::SurrogateModel& model,
                        std::span<const sim::Trace> traces, const SrConfig& config,
                        double solve_step);

}  // namespace falconn::symreg
