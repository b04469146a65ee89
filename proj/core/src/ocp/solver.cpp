#include <cmath>
#include <cstdio>
#include <limits>

#include "falconn/error.hpp"
#include "falconn/ocp/problem.hpp"
#include "falconn/optim/lbfgs.hpp"

namespace falconn::ocp {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kMaxPenalty = 1e12;

void log_line(std::ostream* os, int iteration, double objective, double residual, double step) {
  if (!os) return;
  char buf[160];
  std::snprintf(buf, sizeof buf, "major %d objective %.9g residual %.3e step %.3e", iteration,
                objective, residual, step);
  *os << buf << '\n';
}

}  // namespace

std::string to_string(SolveStatus s) {
  switch (s) {
    case SolveStatus::kConverged: return "converged";
    case SolveStatus::kIterationLimit: return "iteration-limit";
    case SolveStatus::kInfeasibleStall: return "infeasible-stall";
  }
  return "unknown";
}

NlpSolution AugmentedLagrangianSolver::solve(const OcpProblem& p, const Eigen::VectorXd& init) {
  const SolverOptions& o = options_;
  const Eigen::VectorXd lo = p.lower(), hi = p.upper();
  NlpSolution sol;
  sol.w = init.cwiseMax(lo).cwiseMin(hi);

  Eigen::VectorXd lambda = Eigen::VectorXd::Zero(p.num_constraints());
  double mu = o.initial_penalty;

  // Objective value and residual at the most recent evaluation; the bounded
  // L-BFGS accepts the last point it evaluates.
  double last_obj = 0.0, last_res = 0.0;
  auto merit = [&](const Eigen::VectorXd& w, Eigen::VectorXd& grad) {
    Eigen::VectorXd gJ;
    const double J = p.objective(w, gJ);
    Eigen::SparseMatrix<double> jac;
    const Eigen::VectorXd c = p.defects(w, &jac);
    last_obj = J;
    last_res = c.size() ? c.lpNorm<Eigen::Infinity>() : 0.0;
    if (!std::isfinite(J) || !c.allFinite() || !gJ.allFinite()) {
      grad = Eigen::VectorXd::Zero(w.size());
      return kInf;
    }
    const Eigen::VectorXd v = lambda + mu * c;
    grad = -gJ + jac.transpose() * v;
    return -J + lambda.dot(c) + 0.5 * mu * c.squaredNorm();
  };

  double best = -kInf;
  {
    Eigen::VectorXd g;
    merit(sol.w, g);
    sol.objective = last_obj;
    sol.residual = last_res;
    if (!std::isfinite(last_obj) || !std::isfinite(last_res)) {
      sol.status = SolveStatus::kInfeasibleStall;
      return sol;
    }
    if (last_res <= o.constraint_tolerance) best = last_obj;
  }
  double prev_violation = sol.residual;
  int stalls = 0;
  double inner_tol = std::max(0.5 * o.gradient_tolerance, 1e-2);

  while (true) {
    optim::LbfgsOptions lo_opts;
    lo_opts.memory = o.lbfgs_memory;
    lo_opts.max_iterations = std::min(o.max_inner_iterations, o.max_iterations - sol.iterations);
    lo_opts.gradient_tolerance = inner_tol;
    lo_opts.on_iteration = [&](const optim::IterationInfo& info) {
      ++sol.iterations;
      if (std::isfinite(last_obj) && last_res <= o.constraint_tolerance) {
        best = std::max(best, last_obj);
      }
      sol.best_objective.push_back(best);
      log_line(o.log, sol.iterations, last_obj, last_res, info.step_norm);
      return true;
    };
    const optim::LbfgsResult r =
        optim::minimize_lbfgs_bounded(merit, sol.w, lo, hi, lo_opts);
    if (r.status == optim::LbfgsStatus::kNonFinite) {
      sol.status = SolveStatus::kInfeasibleStall;
      return sol;
    }
    sol.w = r.x;
    Eigen::VectorXd g;
    merit(sol.w, g);
    sol.objective = last_obj;
    sol.residual = last_res;
    sol.projected_gradient = optim::projected_gradient_norm(sol.w, g, lo, hi);
    const Eigen::VectorXd c = p.defects(sol.w);

    if (sol.residual <= o.constraint_tolerance &&
        sol.projected_gradient <= o.gradient_tolerance) {
      sol.status = SolveStatus::kConverged;
      return sol;
    }
    if (sol.iterations >= o.max_iterations) {
      sol.status = SolveStatus::kIterationLimit;
      return sol;
    }
    stalls = r.iterations == 0 ? stalls + 1 : 0;
    if (stalls >= 3) {
      sol.status = SolveStatus::kInfeasibleStall;
      return sol;
    }
    lambda += mu * c;
    if (sol.residual > o.required_violation_drop * prev_violation &&
        sol.residual > o.constraint_tolerance) {
      mu *= o.penalty_growth;
      if (mu > kMaxPenalty) {
        sol.status = SolveStatus::kInfeasibleStall;
        return sol;
      }
    }
    prev_violation = sol.residual;
    inner_tol = std::max(0.5 * o.gradient_tolerance, 0.1 * inner_tol);
  }
}

NlpSolution ReducedSpaceSolver::solve(const OcpProblem& p, const Eigen::VectorXd& init) {
  const SolverOptions& o = options_;
  const Eigen::VectorXd lo = p.lower(), hi = p.upper();
  const int T = p.steps(), nx = p.nx(), nu = p.nu();
  const Eigen::Index nxs = static_cast<Eigen::Index>(T + 1) * nx;
  const Eigen::Index nus = static_cast<Eigen::Index>(T + 1) * nu;
  const Eigen::VectorXd ulo = lo.tail(nus), uhi = hi.tail(nus);

  NlpSolution sol;
  sol.w = init.cwiseMax(lo).cwiseMin(hi);

  auto unpack = [&](const Eigen::VectorXd& v) {
    Eigen::MatrixXd U(T + 1, nu);
    for (int k = 0; k <= T; ++k) U.row(k) = v.segment(k * nu, nu).transpose();
    return U;
  };

  double last_obj = 0.0;
  Eigen::VectorXd last_w = sol.w;
  auto reduced = [&](const Eigen::VectorXd& v, Eigen::VectorXd& grad) {
    grad = Eigen::VectorXd::Zero(v.size());
    const Eigen::MatrixXd U = unpack(v);
    Eigen::MatrixXd X, gU;
    double J = 0.0;
    try {
      J = reduced_objective(p, U, gU, &X);
    } catch (const DivergenceError&) {
      return kInf;
    }
    const Eigen::VectorXd w = p.pack(X, U);
    if ((w.head(nxs).array() < lo.head(nxs).array()).any() ||
        (w.head(nxs).array() > hi.head(nxs).array()).any()) {
      return kInf;
    }
    if (!std::isfinite(J) || !gU.allFinite()) return kInf;
    for (int k = 0; k <= T; ++k) grad.segment(k * nu, nu) = -gU.row(k).transpose();
    last_obj = J;
    last_w = w;
    return -J;
  };

  double best = -kInf;
  Eigen::VectorXd g0;
  if (!std::isfinite(reduced(sol.w.tail(nus), g0))) {
    sol.objective = last_obj;
    sol.residual = p.defects(sol.w).size() ? p.defects(sol.w).lpNorm<Eigen::Infinity>() : 0.0;
    sol.status = SolveStatus::kInfeasibleStall;
    return sol;
  }
  best = last_obj;

  optim::LbfgsOptions lo_opts;
  lo_opts.memory = o.lbfgs_memory;
  lo_opts.max_iterations = o.max_iterations;
  lo_opts.gradient_tolerance = o.gradient_tolerance;
  lo_opts.on_iteration = [&](const optim::IterationInfo& info) {
    ++sol.iterations;
    best = std::max(best, last_obj);
    sol.best_objective.push_back(best);
    const Eigen::VectorXd c = p.defects(last_w);
    log_line(o.log, sol.iterations, last_obj, c.size() ? c.lpNorm<Eigen::Infinity>() : 0.0,
             info.step_norm);
    return true;
  };
  const optim::LbfgsResult r =
      optim::minimize_lbfgs_bounded(reduced, sol.w.tail(nus), ulo, uhi, lo_opts);

  Eigen::VectorXd g;
  reduced(r.x, g);
  sol.w = last_w;
  sol.objective = last_obj;
  const Eigen::VectorXd c = p.defects(sol.w);
  sol.residual = c.size() ? c.lpNorm<Eigen::Infinity>() : 0.0;
  sol.projected_gradient = optim::projected_gradient_norm(r.x, g, ulo, uhi);
  const bool kkt = sol.residual <= o.constraint_tolerance &&
                   sol.projected_gradient <= o.gradient_tolerance;
  if (kkt) {
    sol.status = SolveStatus::kConverged;
  } else if (r.status == optim::LbfgsStatus::kIterationLimit) {
    sol.status = SolveStatus::kIterationLimit;
  } else {
    sol.status = SolveStatus::kInfeasibleStall;
  }
  return sol;
}

std::unique_ptr<NlpSolver> make_solver(const std::string& method, SolverOptions options) {
  if (method == "reduced-space") return std::make_unique<ReducedSpaceSolver>(options);
  if (method == "augmented-lagrangian") return std::make_unique<AugmentedLagrangianSolver>(options);
  throw ConfigError("unknown solver method '" + method + "'");
}

}  // namespace falconn::ocp
