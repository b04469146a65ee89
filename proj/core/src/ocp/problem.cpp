#include "falconn/ocp/problem.hpp"

#include <cmath>
#include <limits>
#include <memory>

#include <Eigen/LU>
#include <Eigen/SparseLU>

#include "falconn/error.hpp"
#include "falconn/sim/system.hpp"

namespace falconn::ocp {

CollocationDynamics symbolic_dynamics(const symreg::SymbolicModel& model) {
  CollocationDynamics d;
  d.nx = model.dim();
  d.nu = model.num_inputs();
  d.f = [model](const Eigen::VectorXd& x, const Eigen::VectorXd& u) {
    return model.derivative(x, u);
  };
  d.jacobians = [model](const Eigen::VectorXd& x, const Eigen::VectorXd& u, Eigen::MatrixXd& jx,
                        Eigen::MatrixXd& ju) { model.jacobians(x, u, jx, ju); };
  return d;
}

OcpProblem::OcpProblem(CollocationDynamics dynamics, int steps, double dt, Eigen::VectorXd x0,
                       OcpBounds bounds, TrajectoryObjective objective)
    : dyn_(std::move(dynamics)),
      T_(steps),
      dt_(dt),
      x0_(std::move(x0)),
      bounds_(std::move(bounds)),
      objective_(std::move(objective)) {
  if (T_ < 1) throw ConfigError("collocation needs at least one interval");
  if (!(dt_ > 0.0)) throw ConfigError("collocation step must be positive");
  if (x0_.size() != dyn_.nx) throw ConfigError("x0 does not match the state dimension");
  if (bounds_.x_min.size() != dyn_.nx || bounds_.x_max.size() != dyn_.nx ||
      bounds_.u_min.size() != dyn_.nu || bounds_.u_max.size() != dyn_.nu) {
    throw ConfigError("bounds do not match the problem dimensions");
  }
  if ((bounds_.u_min.array() > bounds_.u_max.array()).any() ||
      (bounds_.x_min.array() > bounds_.x_max.array()).any()) {
    throw BoundViolationError("lower bound above upper bound");
  }
  if (!objective_) throw ConfigError("missing objective");
}

Eigen::Index OcpProblem::num_variables() const {
  return static_cast<Eigen::Index>(T_ + 1) * (dyn_.nx + dyn_.nu);
}

Eigen::Index OcpProblem::num_constraints() const {
  return static_cast<Eigen::Index>(T_) * dyn_.nx;
}

Eigen::VectorXd OcpProblem::lower() const {
  Eigen::MatrixXd X(T_ + 1, dyn_.nx), U(T_ + 1, dyn_.nu);
  X.rowwise() = bounds_.x_min.transpose();
  U.rowwise() = bounds_.u_min.transpose();
  X.row(0) = x0_.transpose();
  return pack(X, U);
}

Eigen::VectorXd OcpProblem::upper() const {
  Eigen::MatrixXd X(T_ + 1, dyn_.nx), U(T_ + 1, dyn_.nu);
  X.rowwise() = bounds_.x_max.transpose();
  U.rowwise() = bounds_.u_max.transpose();
  X.row(0) = x0_.transpose();
  return pack(X, U);
}

Eigen::VectorXd OcpProblem::pack(const Eigen::MatrixXd& X, const Eigen::MatrixXd& U) const {
  Eigen::VectorXd w(num_variables());
  const Eigen::Index nxs = static_cast<Eigen::Index>(T_ + 1) * dyn_.nx;
  for (int k = 0; k <= T_; ++k) {
    w.segment(k * dyn_.nx, dyn_.nx) = X.row(k).transpose();
    w.segment(nxs + k * dyn_.nu, dyn_.nu) = U.row(k).transpose();
  }
  return w;
}

Eigen::MatrixXd OcpProblem::states(const Eigen::VectorXd& w) const {
  Eigen::MatrixXd X(T_ + 1, dyn_.nx);
  for (int k = 0; k <= T_; ++k) X.row(k) = w.segment(k * dyn_.nx, dyn_.nx).transpose();
  return X;
}

Eigen::MatrixXd OcpProblem::inputs(const Eigen::VectorXd& w) const {
  const Eigen::Index nxs = static_cast<Eigen::Index>(T_ + 1) * dyn_.nx;
  Eigen::MatrixXd U(T_ + 1, dyn_.nu);
  for (int k = 0; k <= T_; ++k) U.row(k) = w.segment(nxs + k * dyn_.nu, dyn_.nu).transpose();
  return U;
}

double OcpProblem::objective(const Eigen::VectorXd& w, Eigen::VectorXd& grad) const {
  const Eigen::MatrixXd X = states(w);
  const Eigen::MatrixXd U = inputs(w);
  Eigen::MatrixXd gX = Eigen::MatrixXd::Zero(X.rows(), X.cols());
  Eigen::MatrixXd gU = Eigen::MatrixXd::Zero(U.rows(), U.cols());
  const double v = objective_(X, U, gX, gU);
  grad = pack(gX, gU);
  return v;
}

Eigen::VectorXd OcpProblem::defects(const Eigen::VectorXd& w,
                                    Eigen::SparseMatrix<double>* jacobian) const {
  const int nx = dyn_.nx, nu = dyn_.nu;
  const Eigen::Index nxs = static_cast<Eigen::Index>(T_ + 1) * nx;
  std::vector<Eigen::VectorXd> f(static_cast<std::size_t>(T_ + 1));
  std::vector<Eigen::MatrixXd> jx(f.size()), ju(f.size());
  for (int k = 0; k <= T_; ++k) {
    const Eigen::VectorXd x = w.segment(k * nx, nx);
    const Eigen::VectorXd u = w.segment(nxs + k * nu, nu);
    const auto kk = static_cast<std::size_t>(k);
    f[kk] = dyn_.f(x, u);
    if (jacobian) {
      jx[kk].resize(nx, nx);
      ju[kk].resize(nx, nu);
      dyn_.jacobians(x, u, jx[kk], ju[kk]);
    }
  }
  Eigen::VectorXd c(num_constraints());
  const double h = 0.5 * dt_;
  for (int k = 0; k < T_; ++k) {
    const auto kk = static_cast<std::size_t>(k);
    c.segment(k * nx, nx) = w.segment((k + 1) * nx, nx) - w.segment(k * nx, nx) -
                            h * (f[kk] + f[kk + 1]);
  }
  if (jacobian) {
    std::vector<Eigen::Triplet<double>> trip;
    trip.reserve(static_cast<std::size_t>(T_) * static_cast<std::size_t>(nx) *
                 static_cast<std::size_t>(2 * (nx + nu)));
    for (int k = 0; k < T_; ++k) {
      const auto kk = static_cast<std::size_t>(k);
      for (int i = 0; i < nx; ++i) {
        const int row = k * nx + i;
        for (int j = 0; j < nx; ++j) {
          const double eye = i == j ? 1.0 : 0.0;
          trip.emplace_back(row, k * nx + j, -eye - h * jx[kk](i, j));
          trip.emplace_back(row, (k + 1) * nx + j, eye - h * jx[kk + 1](i, j));
        }
        for (int j = 0; j < nu; ++j) {
          trip.emplace_back(row, nxs + k * nu + j, -h * ju[kk](i, j));
          trip.emplace_back(row, nxs + (k + 1) * nu + j, -h * ju[kk + 1](i, j));
        }
      }
    }
    jacobian->resize(num_constraints(), num_variables());
    jacobian->setFromTriplets(trip.begin(), trip.end());
  }
  return c;
}

TrajectoryObjective robustness_objective(const stl::Formula& formula, const Eigen::MatrixXd& C,
                                         std::vector<std::string> output_names,
                                         std::vector<std::string> input_names, int steps,
                                         double dt, double k) {
  if (!(k > 0.0)) throw ConfigError("smoothing parameter must be positive");
  std::vector<std::string> channels = output_names;
  channels.insert(channels.end(), input_names.begin(), input_names.end());
  std::vector<double> times(static_cast<std::size_t>(steps + 1));
  for (int i = 0; i <= steps; ++i) times[static_cast<std::size_t>(i)] = i * dt;
  auto eval = std::make_shared<const stl::RobustnessEvaluator>(formula, channels, times);
  const auto p = static_cast<Eigen::Index>(output_names.size());
  const auto m = static_cast<Eigen::Index>(input_names.size());
  return [eval, C, p, m, k](const Eigen::MatrixXd& X, const Eigen::MatrixXd& U,
                            Eigen::MatrixXd& gX, Eigen::MatrixXd& gU) {
    Eigen::MatrixXd values(p + m, X.rows());
    values.topRows(p) = C * X.transpose();
    values.bottomRows(m) = U.transpose();
    const stl::RobustnessResult r = eval->smooth(values, k, true);
    gX = r.gradient.topRows(p).transpose() * C;
    gU = r.gradient.bottomRows(m).transpose();
    return r.value;
  };
}

double default_collocation_step(double horizon) { return horizon >= 20.0 ? 0.2 : 0.1; }

OcpProblem transcribe(const symreg::SymbolicModel& model, const stl::Formula& spec,
                      const TranscribeOptions& o) {
  if (!(o.dt > 0.0)) throw ConfigError("collocation step must be positive");
  const int steps = static_cast<int>(std::llround(o.horizon / o.dt));
  if (steps < 1) throw HorizonError("collocation horizon shorter than one step");
  const double need = stl::formula_horizon(spec);
  if (need > steps * o.dt + 1e-9) {
    throw HorizonError("spec horizon " + std::to_string(need) + " s exceeds the collocation horizon " +
                       std::to_string(steps * o.dt) + " s");
  }
  const int nx = model.dim();
  OcpBounds b;
  b.x_min = Eigen::VectorXd::Constant(nx, -o.state_bound);
  b.x_max = Eigen::VectorXd::Constant(nx, o.state_bound);
  b.u_min = o.u_min;
  b.u_max = o.u_max;
  const stl::Formula negated = stl::to_nnf(stl::Formula::negation(spec));
  TrajectoryObjective obj =
      robustness_objective(negated, model.lifting().C, model.output_names(),
                           model.input_names(), steps, o.dt, o.k);
  Eigen::VectorXd x0 = o.x0.size() == 0 ? Eigen::VectorXd::Zero(nx) : o.x0;
  return OcpProblem(symbolic_dynamics(model), steps, o.dt, std::move(x0), std::move(b),
                    std::move(obj));
}

Eigen::MatrixXd collocation_rollout(const OcpProblem& p, const Eigen::MatrixXd& U) {
  const int T = p.steps(), nx = p.nx(), nu = p.nu();
  const auto& dyn = p.dynamics();
  const double h = 0.5 * p.dt();
  Eigen::MatrixXd X(T + 1, nx);
  X.row(0) = p.x0().transpose();
  Eigen::MatrixXd jx(nx, nx), ju(nx, nu);
  const Eigen::MatrixXd eye = Eigen::MatrixXd::Identity(nx, nx);
  for (int k = 0; k < T; ++k) {
    const Eigen::VectorXd xk = X.row(k).transpose();
    const Eigen::VectorXd u1 = U.row(k + 1).transpose();
    const Eigen::VectorXd fk = dyn.f(xk, U.row(k).transpose());
    const Eigen::VectorXd base = xk + h * fk;
    auto residual = [&](const Eigen::VectorXd& z) {
      return Eigen::VectorXd(z - base - h * dyn.f(z, u1));
    };
    Eigen::VectorXd x = xk + p.dt() * fk;
    Eigen::VectorXd r = residual(x);
    double rn = r.lpNorm<Eigen::Infinity>();
    for (int it = 0; it < 50 && rn > 1e-13 * std::max(1.0, x.lpNorm<Eigen::Infinity>()); ++it) {
      dyn.jacobians(x, u1, jx, ju);
      const Eigen::VectorXd step = (eye - h * jx).partialPivLu().solve(r);
      double alpha = 1.0;
      bool improved = false;
      for (int ls = 0; ls < 30; ++ls) {
        const Eigen::VectorXd trial = x - alpha * step;
        const Eigen::VectorXd rt = residual(trial);
        const double rtn = rt.lpNorm<Eigen::Infinity>();
        if (std::isfinite(rtn) && rtn < rn) {
          x = trial;
          r = rt;
          rn = rtn;
          improved = true;
          break;
        }
        alpha *= 0.5;
      }
      if (!improved) break;
    }
    const double t = (k + 1) * p.dt();
    if (!x.allFinite() || !(rn < 1e-10)) {
      throw DivergenceError("implicit trapezoid step did not converge", t);
    }
    if (x.lpNorm<Eigen::Infinity>() > sim::kDivergenceThreshold) {
      throw DivergenceError("collocation rollout diverged", t);
    }
    X.row(k + 1) = x.transpose();
  }
  return X;
}

double reduced_objective(const OcpProblem& p, const Eigen::MatrixXd& U, Eigen::MatrixXd& grad,
                         Eigen::MatrixXd* X_out) {
  const int T = p.steps(), nx = p.nx(), nu = p.nu();
  const Eigen::Index nus = static_cast<Eigen::Index>(T + 1) * nu;
  const Eigen::Index nfree = static_cast<Eigen::Index>(T) * nx;
  const Eigen::MatrixXd X = collocation_rollout(p, U);
  if (X_out) *X_out = X;
  const Eigen::VectorXd w = p.pack(X, U);
  Eigen::VectorXd gJ;
  const double J = p.objective(w, gJ);
  Eigen::VectorXd du = gJ.tail(nus);
  if (nfree > 0) {
    Eigen::SparseMatrix<double> jac;
    p.defects(w, &jac);
    const Eigen::SparseMatrix<double> At = jac.middleCols(nx, nfree).transpose();
    Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
    lu.compute(At);
    if (lu.info() != Eigen::Success) {
      grad = Eigen::MatrixXd::Zero(T + 1, nu);
      return std::numeric_limits<double>::quiet_NaN();
    }
    const Eigen::VectorXd adj = lu.solve(Eigen::VectorXd(gJ.segment(nx, nfree)));
    du -= jac.rightCols(nus).transpose() * adj;
  }
  grad.resize(T + 1, nu);
  for (int k = 0; k <= T; ++k) grad.row(k) = du.segment(k * nu, nu).transpose();
  return J;
}

Eigen::VectorXd warm_start(const OcpProblem& p, const sim::InputSignal& u_init) {
  const int T = p.steps(), nu = p.nu();
  if (static_cast<int>(u_init.num_channels()) != nu) {
    throw BoundViolationError("warm-start input has the wrong channel count");
  }
  const auto& b = p.bounds();
  Eigen::MatrixXd U(T + 1, nu);
  for (int k = 0; k <= T; ++k) {
    U.row(k) = u_init.at(k * p.dt()).cwiseMax(b.u_min).cwiseMin(b.u_max).transpose();
  }
  return p.pack(collocation_rollout(p, U), U);
}

sim::InputSignal extract_input(const NlpSolution& sol, const OcpProblem& p,
                               std::vector<std::string> input_names) {
  const Eigen::MatrixXd U = p.inputs(sol.w);
  const int T = p.steps();
  std::vector<double> bp(static_cast<std::size_t>(T));
  for (int k = 0; k < T; ++k) bp[static_cast<std::size_t>(k)] = k * p.dt();
  Eigen::MatrixXd v = U.topRows(T);
  for (Eigen::Index i = 0; i < v.rows(); ++i) {
    v.row(i) = v.row(i).cwiseMax(p.bounds().u_min.transpose()).cwiseMin(p.bounds().u_max.transpose());
  }
  return sim::InputSignal(std::move(input_names), std::move(bp), std::move(v), T * p.dt());
}

}  // namespace falconn::ocp
