#pragma once

#include <functional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "falconn/sim/input_signal.hpp"
#include "falconn/stl/signal.hpp"

namespace falconn::sim {

/// Right-hand side dx/dt = f(x, u, t).
using Dynamics = std::function<Eigen::VectorXd(
    const Eigen::VectorXd& x, const Eigen::VectorXd& u, double t)>;
/// Output map y = g(x, u).
using OutputMap =
    std::function<Eigen::VectorXd(const Eigen::VectorXd& x, const Eigen::VectorXd& u)>;

/// Any state component with magnitude above this aborts a solve.
inline constexpr double kDivergenceThreshold = 1e6;

/// Input/output record of one experiment or simulation.
struct Trace {
  std::string plant;
  double period = 0.0;
  Eigen::VectorXd x0;
  std::vector<double> times;
  std::vector<std::string> input_names;
  std::vector<std::string> output_names;
  Eigen::MatrixXd inputs;   // samples x input channels
  Eigen::MatrixXd outputs;  // samples x output channels

  std::size_t size() const { return times.size(); }
  double horizon() const { return times.empty() ? 0.0 : times.back(); }

  /// Outputs followed by inputs as named channels, for monitoring.
  stl::SampledSignal signal() const;
  /// The sampled input as a zero-order-hold signal over [0, horizon].
  InputSignal input_signal() const;

  bool operator==(const Trace& other) const;
};

/// Black-box system under test. Immutable after construction.
struct SutSpec {
  std::string name;
  int state_dim = 0;
  std::vector<std::string> input_names;
  Eigen::VectorXd input_min;
  Eigen::VectorXd input_max;
  std::vector<std::string> output_names;
  Eigen::VectorXd x0;
  double period = 0.01;
  Dynamics dynamics;
  OutputMap output;

  /// Throws BoundViolationError when the bounds are inconsistent.
  void validate() const;
};

/// Classical fixed-step RK4 over `t_grid` with the input held at its value at
/// the start of each step. Returns samples x state. Throws DivergenceError at
/// the first grid time with a non-finite or exploding state.
Eigen::MatrixXd integrate_rk4(const Dynamics& f, const Eigen::VectorXd& x0,
                              const InputSignal& u, std::span<const double> t_grid);

/// Runs the SUT on `u` sampled at the SUT period over [0, u.horizon()].
/// Deterministic. Throws BoundViolationError if `u` leaves the input bounds.
Trace run_experiment(const SutSpec& sut, const InputSignal& u);

/// Built-in plants: "MagLevAnalog", "LinearSecondOrder", "VanDerPolForced".
SutSpec make_plant(const std::string& name);
std::vector<std::string> plant_names();

}  // namespace falconn::sim
