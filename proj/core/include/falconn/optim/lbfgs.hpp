#pragma once

#include <functional>
#include <string>

#include <Eigen/Core>

namespace falconn::optim {

/// Returns f(x) and writes its gradient. A non-finite return value marks the
/// point as unusable; line searches then shrink the step.
using Objective = std::function<double(const Eigen::VectorXd& x, Eigen::VectorXd& grad)>;

struct IterationInfo {
  int iteration = 0;
  double f = 0.0;
  double projected_gradient = 0.0;  // inf-norm
  double step_norm = 0.0;           // inf-norm of x_{k+1} - x_k
};

struct LbfgsOptions {
  int memory = 10;
  int max_iterations = 20;
  /// Stop when the (projected) gradient inf-norm falls below this.
  double gradient_tolerance = 1e-10;
  /// Stop when the relative decrease of f over one iteration falls below this.
  double relative_decrease_tolerance = 0.0;
  double c1 = 1e-4;
  double c2 = 0.9;
  int max_line_search = 40;
  /// Called after every accepted iteration; returning false stops the run.
  std::function<bool(const IterationInfo&)> on_iteration;
};

enum class LbfgsStatus { kConverged, kIterationLimit, kLineSearchFailed, kStopped, kNonFinite };

struct LbfgsResult {
  Eigen::VectorXd x;
  double f = 0.0;
  Eigen::VectorXd grad;
  int iterations = 0;
  int evaluations = 0;
  LbfgsStatus status = LbfgsStatus::kIterationLimit;
};

std::string to_string(LbfgsStatus s);

/// Unconstrained limited-memory BFGS with a strong-Wolfe line search.
LbfgsResult minimize_lbfgs(const Objective& f, Eigen::VectorXd x0,
                           const LbfgsOptions& options = {});

/// Bound-constrained variant: quasi-Newton steps on the free variables and a
/// projected backtracking (Armijo) search along the projection arc. `lower`
/// and `upper` may contain infinities.
LbfgsResult minimize_lbfgs_bounded(const Objective& f, Eigen::VectorXd x0,
                                   const Eigen::VectorXd& lower,
                                   const Eigen::VectorXd& upper,
                                   const LbfgsOptions& options = {});

/// inf-norm of P(x - g) - x, the first-order optimality measure with bounds.
double projected_gradient_norm(const Eigen::VectorXd& x, const Eigen::VectorXd& g,
                               const Eigen::VectorXd& lower,
                               const Eigen::VectorXd& upper);

}  // namespace falconn::optim
