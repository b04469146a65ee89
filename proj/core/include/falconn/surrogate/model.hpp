#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "falconn/sim/input_signal.hpp"
#include "falconn/sim/system.hpp"
#include "falconn/surrogate/lifting.hpp"
#include "falconn/surrogate/mlp.hpp"

namespace falconn::surrogate {

/// Prior knowledge f_k on the driven rows, with its Jacobian in z.
struct KnownDynamics {
  std::string id = "none";
  std::function<Eigen::VectorXd(const Eigen::VectorXd& z, const Eigen::VectorXd& u, double t)> eval;
  std::function<Eigen::MatrixXd(const Eigen::VectorXd& z, const Eigen::VectorXd& u, double t)> jacobian_z;

  bool present() const { return static_cast<bool>(eval); }
};

/// Registered priors: "none", and "decay" (f_k = -y on every driven row).
KnownDynamics known_dynamics(const std::string& id, const StateLifting& lifting);

/// dz/dt = A z + B (f_k(z,u,t) + f_theta([z; u])).
struct SurrogateModel {
  StateLifting lifting;
  KnownDynamics known;
  Mlp mlp;
  std::vector<std::string> input_names;
  std::vector<std::string> output_names;

  int dim() const { return lifting.dim(); }
  int num_inputs() const { return static_cast<int>(input_names.size()); }

  /// Values on the driven rows only: f_k + f_theta.
  Eigen::VectorXd driven(const Eigen::VectorXd& z, const Eigen::VectorXd& u, double t) const;
  /// Full lifted derivative.
  Eigen::VectorXd derivative(const Eigen::VectorXd& z, const Eigen::VectorXd& u, double t) const;
  sim::Dynamics dynamics() const;
};

/// Fresh model with hidden tanh layers `hidden`; `zero_init` leaves the MLP at
/// zero so the model starts as pure f_k.
SurrogateModel make_model(const StateLifting& lifting, KnownDynamics known,
                          std::vector<std::string> input_names,
                          std::vector<std::string> output_names,
                          const std::vector<int>& hidden, std::uint64_t seed,
                          bool zero_init = false);

/// Lifted initial state of a trace: outputs at t=0 and higher derivatives from
/// a one-sided finite-difference stencil on the first samples.
Eigen::VectorXd initial_state(const StateLifting& lifting, const sim::Trace& trace);

/// States (samples x dim) of the surrogate ODE integrated with RK4 on t_grid.
Eigen::MatrixXd simulate_states(const SurrogateModel& model, const Eigen::VectorXd& z0,
                                const sim::InputSignal& u, std::span<const double> t_grid);
/// Outputs C z at every grid point (samples x outputs).
Eigen::MatrixXd simulate_surrogate(const SurrogateModel& model, const Eigen::VectorXd& z0,
                                   const sim::InputSignal& u, std::span<const double> t_grid);

struct TrainConfig {
  double learning_rate = 5e-2;
  int adam_epochs = 300;
  int lbfgs_iterations = 20;
  int lbfgs_memory = 10;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  /// Integration step of the training unroll; observations are subsampled to it.
  double solve_step = 0.1;
  std::vector<int> hidden{16, 8};
  bool zero_init = false;
  std::uint64_t seed = 0;

  /// Throws ConfigError on non-positive counts or rates.
  void validate() const;
};

/// A trace prepared for training: lifted z0 and the observation subgrid.
struct TrainingTrace {
  Eigen::VectorXd z0;
  std::vector<double> times;  // unroll grid, a subset of the trace samples
  Eigen::MatrixXd inputs;     // held over each step, rows = times.size()
  Eigen::MatrixXd outputs;    // observed outputs at `times`
};

TrainingTrace prepare_trace(const StateLifting& lifting, const sim::Trace& trace,
                            double solve_step);
std::vector<TrainingTrace> prepare_dataset(const StateLifting& lifting,
                                           std::span<const sim::Trace> traces,
                                           double solve_step);

/// Sum over traces of the per-trace mean squared output error.
/// Throws DivergenceError if any unroll diverges.
double dataset_loss(const SurrogateModel& model, std::span<const TrainingTrace> data);
/// Loss and its exact gradient with respect to the MLP parameters, by reverse
/// mode through the RK4 unroll. Throws DivergenceError like dataset_loss.
double loss_gradient(const SurrogateModel& model, std::span<const TrainingTrace> data,
                     Eigen::VectorXd& grad);

struct TrainResult {
  SurrogateModel model;
  double loss = 0.0;                 // dataset loss of the returned parameters
  std::vector<double> loss_history;  // one entry per ADAM epoch, then per L-BFGS iteration
  int diverged_epochs = 0;
};

/// Trains from scratch: ADAM epochs then L-BFGS refinement, returning the
/// parameters with the lowest loss seen. Throws TrainingError if no finite
/// loss was ever reached.
TrainResult train(std::span<const sim::Trace> traces, const TrainConfig& config,
                  const StateLifting& lifting, const KnownDynamics& known);

/// JSON checkpoint of the model plus the training constants.
std::string checkpoint_json(const SurrogateModel& model, const TrainConfig& config);
void save_checkpoint(const SurrogateModel& model, const TrainConfig& config,
                     const std::string& path);
/// Throws SchemaError on version or shape mismatch, or an unregistered prior.
SurrogateModel load_checkpoint(const std::string& path, TrainConfig* config = nullptr);
SurrogateModel parse_checkpoint(const std::string& json_text, TrainConfig* config = nullptr);

}  // namespace falconn::surrogate
