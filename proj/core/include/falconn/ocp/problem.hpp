#pragma once

#include <functional>
#include <memory>
#include <ostream>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <Eigen/SparseCore>

#include "falconn/sim/input_signal.hpp"
#include "falconn/stl/formula.hpp"
#include "falconn/stl/robustness.hpp"
#include "falconn/symreg/symbolic_model.hpp"

namespace falconn::ocp {

/// Vector field with Jacobians, as seen by the transcription.
struct CollocationDynamics {
  int nx = 0;
  int nu = 0;
  std::function<Eigen::VectorXd(const Eigen::VectorXd& x, const Eigen::VectorXd& u)> f;
  /// Writes df/dx (nx x nx) and df/du (nx x nu).
  std::function<void(const Eigen::VectorXd& x, const Eigen::VectorXd& u, Eigen::MatrixXd& jx,
                     Eigen::MatrixXd& ju)>
      jacobians;
};

CollocationDynamics symbolic_dynamics(const symreg::SymbolicModel& model);

/// Objective to maximize over the state (T+1 x nx) and input (T+1 x nu)
/// trajectories; writes the gradients with the same shapes.
using TrajectoryObjective = std::function<double(const Eigen::MatrixXd& X, const Eigen::MatrixXd& U,
                                                 Eigen::MatrixXd& gX, Eigen::MatrixXd& gU)>;

struct OcpBounds {
  Eigen::VectorXd x_min, x_max;
  Eigen::VectorXd u_min, u_max;
};

/// Default state bound magnitude when a plant declares none.
inline constexpr double kDefaultStateBound = 1e3;

/// Trapezoidal direct collocation on a fixed grid t_k = k dt, k = 0..T.
/// Decision vector: x_0..x_T then u_0..u_T, each stacked per time step.
class OcpProblem {
 public:
  OcpProblem(CollocationDynamics dynamics, int steps, double dt, Eigen::VectorXd x0,
             OcpBounds bounds, TrajectoryObjective objective);

  int steps() const { return T_; }
  double dt() const { return dt_; }
  int nx() const { return dyn_.nx; }
  int nu() const { return dyn_.nu; }
  const Eigen::VectorXd& x0() const { return x0_; }
  const OcpBounds& bounds() const { return bounds_; }
  const CollocationDynamics& dynamics() const { return dyn_; }

  Eigen::Index num_variables() const;
  /// nx * T trapezoidal defects.
  Eigen::Index num_constraints() const;
  /// Bounds on the decision vector; x_0 is pinned by equal bounds.
  Eigen::VectorXd lower() const;
  Eigen::VectorXd upper() const;

  Eigen::VectorXd pack(const Eigen::MatrixXd& X, const Eigen::MatrixXd& U) const;
  Eigen::MatrixXd states(const Eigen::VectorXd& w) const;  // (T+1) x nx
  Eigen::MatrixXd inputs(const Eigen::VectorXd& w) const;  // (T+1) x nu

  /// Objective value (to maximize) and its gradient in w.
  double objective(const Eigen::VectorXd& w, Eigen::VectorXd& grad) const;
  /// x_{k+1} - x_k - dt/2 (f_k + f_{k+1}) for k = 0..T-1, stacked per
  /// interval. Fills the defect Jacobian when `jacobian` is given.
  Eigen::VectorXd defects(const Eigen::VectorXd& w,
                          Eigen::SparseMatrix<double>* jacobian = nullptr) const;

 private:
  CollocationDynamics dyn_;
  int T_;
  double dt_;
  Eigen::VectorXd x0_;
  OcpBounds bounds_;
  TrajectoryObjective objective_;
};

/// Smooth robustness of `formula` over the outputs C x_k and inputs u_k.
/// The channel layout is outputs then inputs.
TrajectoryObjective robustness_objective(const stl::Formula& formula, const Eigen::MatrixXd& C,
                                         std::vector<std::string> output_names,
                                         std::vector<std::string> input_names, int steps,
                                         double dt, double k);

struct TranscribeOptions {
  double dt = 0.2;
  double horizon = 0.0;
  double k = 2.0;
  Eigen::VectorXd x0;          // lifted initial state
  Eigen::VectorXd u_min, u_max;
  double state_bound = kDefaultStateBound;
};

/// Transcribes max rho^{not spec} subject to the symbolic dynamics. Throws
/// HorizonError when the spec horizon exceeds T dt.
OcpProblem transcribe(const symreg::SymbolicModel& model, const stl::Formula& spec,
                      const TranscribeOptions& options);

/// Default collocation step: 0.2 s for horizons of 20 s or more, else 0.1 s.
double default_collocation_step(double horizon);

/// States (T+1 x nx) of the implicit trapezoidal rollout under the input
/// samples U, each step solved by damped Newton. Throws DivergenceError.
Eigen::MatrixXd collocation_rollout(const OcpProblem& problem, const Eigen::MatrixXd& U);

/// Objective of the rollout under U and its total derivative with respect to
/// U (T+1 x nu), by an adjoint solve on the defect Jacobian. Non-finite when
/// the Jacobian is singular. Writes the rollout states to `X` when given.
/// Throws DivergenceError like collocation_rollout.
double reduced_objective(const OcpProblem& problem, const Eigen::MatrixXd& U,
                         Eigen::MatrixXd& grad, Eigen::MatrixXd* X = nullptr);

/// Decision vector whose states are the implicit trapezoidal rollout of the
/// dynamics under u_init sampled at t_k (clipped to bounds), so every defect
/// vanishes up to Newton tolerance. Throws DivergenceError.
Eigen::VectorXd warm_start(const OcpProblem& problem, const sim::InputSignal& u_init);

enum class SolveStatus { kConverged, kIterationLimit, kInfeasibleStall };
std::string to_string(SolveStatus s);

struct NlpSolution {
  SolveStatus status = SolveStatus::kInfeasibleStall;
  double objective = 0.0;
  Eigen::VectorXd w;
  double residual = 0.0;         // max |defect|
  double projected_gradient = 0.0;
  int iterations = 0;            // major (quasi-Newton) iterations
  /// Best objective among near-feasible iterates, one entry per major iteration.
  std::vector<double> best_objective;
};

struct SolverOptions {
  int max_iterations = 2000;
  double constraint_tolerance = 1e-6;
  double gradient_tolerance = 1e-5;
  double initial_penalty = 10.0;
  double penalty_growth = 10.0;
  /// Penalty grows when the violation does not shrink by this factor.
  double required_violation_drop = 0.25;
  int max_inner_iterations = 300;
  int lbfgs_memory = 10;
  /// Per-iteration log lines go here when set.
  std::ostream* log = nullptr;
};

class NlpSolver {
 public:
  virtual ~NlpSolver() = default;
  virtual NlpSolution solve(const OcpProblem& problem, const Eigen::VectorXd& init) = 0;
};

/// Augmented Lagrangian on the defects with projected L-BFGS inner solves.
class AugmentedLagrangianSolver : public NlpSolver {
 public:
  explicit AugmentedLagrangianSolver(SolverOptions options = {}) : options_(options) {}
  NlpSolution solve(const OcpProblem& problem, const Eigen::VectorXd& init) override;

 private:
  SolverOptions options_;
};

/// Feasible-path method: the states are eliminated through
/// collocation_rollout, the reduced gradient comes from an adjoint solve on
/// the defect Jacobian, and projected L-BFGS runs on the inputs. Every
/// iterate satisfies the defects to Newton tolerance. State bounds act as a
/// barrier (rollouts leaving them are rejected by the line search).
class ReducedSpaceSolver : public NlpSolver {
 public:
  explicit ReducedSpaceSolver(SolverOptions options = {}) : options_(options) {}
  NlpSolution solve(const OcpProblem& problem, const Eigen::VectorXd& init) override;

 private:
  SolverOptions options_;
};

/// "reduced-space" or "augmented-lagrangian"; throws ConfigError otherwise.
std::unique_ptr<NlpSolver> make_solver(const std::string& method, SolverOptions options);

/// Zero-order-hold signal from u_0..u_{T-1} on the collocation grid,
/// clipped to the input bounds.
sim::InputSignal extract_input(const NlpSolution& solution, const OcpProblem& problem,
                               std::vector<std::string> input_names);

}  // namespace falconn::ocp
