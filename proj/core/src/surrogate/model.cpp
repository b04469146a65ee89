#include "falconn/surrogate/model.hpp"

#include <cmath>
#include <memory>

#include "falconn/error.hpp"

namespace falconn::surrogate {
namespace {

Eigen::VectorXd concat(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  Eigen::VectorXd out(a.size() + b.size());
  out << a, b;
  return out;
}

// Fornberg's recursion: weights of the derivative of order `d` at x = 0 for
// nodes 0, 1, ..., n-1 (unit spacing).
std::vector<double> fd_weights(int d, int n) {
  Eigen::MatrixXd c = Eigen::MatrixXd::Zero(n, d + 1);
  c(0, 0) = 1.0;
  double c1 = 1.0, c4 = 0.0;
  for (int i = 1; i < n; ++i) {
    const int mn = std::min(i, d);
    double c2 = 1.0;
    const double c5 = c4;
    c4 = i;
    for (int j = 0; j < i; ++j) {
      const double c3 = i - j;
      c2 *= c3;
      if (j == i - 1) {
        for (int k = mn; k >= 1; --k) {
          c(i, k) = c1 * (k * c(i - 1, k - 1) - c5 * c(i - 1, k)) / c2;
        }
        c(i, 0) = -c1 * c5 * c(i - 1, 0) / c2;
      }
      for (int k = mn; k >= 1; --k) c(j, k) = (c4 * c(j, k) - k * c(j, k - 1)) / c3;
      c(j, 0) = c4 * c(j, 0) / c3;
    }
    c1 = c2;
  }
  std::vector<double> w(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) w[static_cast<std::size_t>(i)] = c(i, d);
  return w;
}

bool blown_up(const Eigen::VectorXd& z) {
  return !z.allFinite() || z.lpNorm<Eigen::Infinity>() > sim::kDivergenceThreshold;
}

// Forward evaluation of one RK4 stage, keeping what backward() needs.
struct Stage {
  Eigen::VectorXd z;
  Mlp::Tape tape;
};

class Unroll {
 public:
  explicit Unroll(const SurrogateModel& m) : m_(m) {}

  Eigen::VectorXd f(const Eigen::VectorXd& z, const Eigen::VectorXd& u, double t,
                    Stage* stage) const {
    Eigen::VectorXd drive;
    if (stage) {
      stage->z = z;
      drive = m_.mlp.forward(concat(z, u), stage->tape);
    } else {
      drive = m_.mlp.forward(concat(z, u));
    }
    if (m_.known.present()) drive += m_.known.eval(z, u, t);
    return m_.lifting.A * z + m_.lifting.B * drive;
  }

  // v^T dF/dz, accumulating v^T dF/dtheta into dparams.
  Eigen::VectorXd vjp(const Stage& s, const Eigen::VectorXd& u, double t,
                      const Eigen::VectorXd& v, Eigen::VectorXd& dparams) const {
    const Eigen::VectorXd w = m_.lifting.B.transpose() * v;
    Eigen::VectorXd dz = m_.lifting.A.transpose() * v;
    const Eigen::VectorXd din = m_.mlp.backward(s.tape, w, dparams);
    dz += din.head(s.z.size());
    if (m_.known.present()) dz += m_.known.jacobian_z(s.z, u, t).transpose() * w;
    return dz;
  }

  Eigen::VectorXd step(const Eigen::VectorXd& z, const Eigen::VectorXd& u, double t,
                       double h, Stage* st = nullptr) const {
    const Eigen::VectorXd k1 = f(z, u, t, st ? &st[0] : nullptr);
    const Eigen::VectorXd k2 = f(z + 0.5 * h * k1, u, t + 0.5 * h, st ? &st[1] : nullptr);
    const Eigen::VectorXd k3 = f(z + 0.5 * h * k2, u, t + 0.5 * h, st ? &st[2] : nullptr);
    const Eigen::VectorXd k4 = f(z + h * k3, u, t + h, st ? &st[3] : nullptr);
    return z + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  }

  // Given dL/dz_{k+1}, returns dL/dz_k and accumulates the parameter gradient.
  Eigen::VectorXd step_back(const Eigen::VectorXd& z, const Eigen::VectorXd& u, double t,
                            double h, const Eigen::VectorXd& g,
                            Eigen::VectorXd& dparams) const {
    Stage st[4];
    step(z, u, t, h, st);
    Eigen::VectorXd dz = g;
    Eigen::VectorXd dk1 = (h / 6.0) * g, dk2 = (h / 3.0) * g, dk3 = (h / 3.0) * g;
    const Eigen::VectorXd dk4 = (h / 6.0) * g;
    Eigen::VectorXd da = vjp(st[3], u, t + h, dk4, dparams);
    dz += da;
    dk3 += h * da;
    da = vjp(st[2], u, t + 0.5 * h, dk3, dparams);
    dz += da;
    dk2 += 0.5 * h * da;
    da = vjp(st[1], u, t + 0.5 * h, dk2, dparams);
    dz += da;
    dk1 += 0.5 * h * da;
    dz += vjp(st[0], u, t, dk1, dparams);
    return dz;
  }

 private:
  const SurrogateModel& m_;
};

double trace_loss(const SurrogateModel& m, const TrainingTrace& tt, Eigen::VectorXd* grad) {
  const Unroll unroll(m);
  const std::size_t n = tt.times.size();
  std::vector<Eigen::VectorXd> zs(n);
  zs[0] = tt.z0;
  for (std::size_t k = 0; k + 1 < n; ++k) {
    zs[k + 1] = unroll.step(zs[k], tt.inputs.row(static_cast<Eigen::Index>(k)).transpose(),
                            tt.times[k], tt.times[k + 1] - tt.times[k]);
    if (blown_up(zs[k + 1])) throw DivergenceError("surrogate unroll diverged", tt.times[k + 1]);
  }
  const auto p = static_cast<double>(tt.outputs.cols());
  const double scale = 1.0 / (static_cast<double>(n) * p);
  double loss = 0.0;
  std::vector<Eigen::VectorXd> resid(n);
  for (std::size_t k = 0; k < n; ++k) {
    resid[k] = m.lifting.C * zs[k] - tt.outputs.row(static_cast<Eigen::Index>(k)).transpose();
    loss += resid[k].squaredNorm();
  }
  loss *= scale;
  if (grad) {
    Eigen::VectorXd g = m.lifting.C.transpose() * (2.0 * scale * resid[n - 1]);
    for (std::size_t k = n - 1; k-- > 0;) {
      g = unroll.step_back(zs[k], tt.inputs.row(static_cast<Eigen::Index>(k)).transpose(),
                           tt.times[k], tt.times[k + 1] - tt.times[k], g, *grad);
      g += m.lifting.C.transpose() * (2.0 * scale * resid[k]);
    }
  }
  return loss;
}

}  // namespace

KnownDynamics known_dynamics(const std::string& id, const StateLifting& lifting) {
  KnownDynamics k;
  k.id = id;
  if (id == "none") return k;
  if (id == "decay") {
    const std::vector<int> out = lifting.output_rows;
    const int dim = lifting.dim();
    k.eval = [out](const Eigen::VectorXd& z, const Eigen::VectorXd&, double) {
      Eigen::VectorXd v(static_cast<Eigen::Index>(out.size()));
      for (std::size_t i = 0; i < out.size(); ++i) v(static_cast<Eigen::Index>(i)) = -z(out[i]);
      return v;
    };
    k.jacobian_z = [out, dim](const Eigen::VectorXd&, const Eigen::VectorXd&, double) {
      Eigen::MatrixXd J = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(out.size()), dim);
      for (std::size_t i = 0; i < out.size(); ++i) J(static_cast<Eigen::Index>(i), out[i]) = -1.0;
      return J;
    };
    return k;
  }
  throw SchemaError("unknown prior dynamics '" + id + "'");
}

Eigen::VectorXd SurrogateModel::driven(const Eigen::VectorXd& z, const Eigen::VectorXd& u,
                                       double t) const {
  Eigen::VectorXd d = mlp.forward(concat(z, u));
  if (known.present()) d += known.eval(z, u, t);
  return d;
}

Eigen::VectorXd SurrogateModel::derivative(const Eigen::VectorXd& z, const Eigen::VectorXd& u,
                                           double t) const {
  return lifting.A * z + lifting.B * driven(z, u, t);
}

sim::Dynamics SurrogateModel::dynamics() const {
  auto self = std::make_shared<const SurrogateModel>(*this);
  return [self](const Eigen::VectorXd& z, const Eigen::VectorXd& u, double t) {
    return self->derivative(z, u, t);
  };
}

SurrogateModel make_model(const StateLifting& lifting, KnownDynamics known,
                          std::vector<std::string> input_names,
                          std::vector<std::string> output_names,
                          const std::vector<int>& hidden, std::uint64_t seed, bool zero_init) {
  if (static_cast<int>(output_names.size()) != lifting.num_outputs()) {
    throw ConfigError("lifting orders must match the output channels");
  }
  std::vector<int> sizes;
  sizes.push_back(lifting.dim() + static_cast<int>(input_names.size()));
  sizes.insert(sizes.end(), hidden.begin(), hidden.end());
  sizes.push_back(lifting.num_outputs());
  SurrogateModel m;
  m.lifting = lifting;
  m.known = std::move(known);
  m.mlp = zero_init ? Mlp(sizes) : Mlp::random(sizes, seed);
  m.input_names = std::move(input_names);
  m.output_names = std::move(output_names);
  return m;
}

Eigen::VectorXd initial_state(const StateLifting& lifting, const sim::Trace& trace) {
  Eigen::VectorXd z0 = Eigen::VectorXd::Zero(lifting.dim());
  const double h = trace.size() > 1 ? trace.times[1] - trace.times[0] : 0.0;
  for (int i = 0; i < lifting.num_outputs(); ++i) {
    const int row = lifting.output_rows[static_cast<std::size_t>(i)];
    const int order = lifting.orders[static_cast<std::size_t>(i)];
    z0(row) = trace.outputs(0, i);
    if (order > 1 && trace.size() < static_cast<std::size_t>(order + 1)) {
      throw Error("trace too short to estimate initial derivatives");
    }
    for (int d = 1; d < order; ++d) {
      const std::vector<double> w = fd_weights(d, order + 1);
      double acc = 0.0;
      for (int j = 0; j <= order; ++j) acc += w[static_cast<std::size_t>(j)] * trace.outputs(j, i);
      z0(row + d) = acc / std::pow(h, d);
    }
  }
  return z0;
}

Eigen::MatrixXd simulate_states(const SurrogateModel& model, const Eigen::VectorXd& z0,
                                const sim::InputSignal& u, std::span<const double> t_grid) {
  return sim::integrate_rk4(model.dynamics(), z0, u, t_grid);
}

Eigen::MatrixXd simulate_surrogate(const SurrogateModel& model, const Eigen::VectorXd& z0,
                                   const sim::InputSignal& u, std::span<const double> t_grid) {
  return simulate_states(model, z0, u, t_grid) * model.lifting.C.transpose();
}

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0)) throw ConfigError("learning rate must be positive");
  if (adam_epochs < 0 || lbfgs_iterations < 0) throw ConfigError("epoch counts must be >= 0");
  if (lbfgs_memory < 1) throw ConfigError("L-BFGS memory must be >= 1");
  if (!(beta1 >= 0.0 && beta1 < 1.0 && beta2 >= 0.0 && beta2 < 1.0)) {
    throw ConfigError("ADAM betas must lie in [0, 1)");
  }
  if (!(epsilon > 0.0) || !(solve_step > 0.0)) {
    throw ConfigError("epsilon and solve step must be positive");
  }
  for (int h : hidden) {
    if (h < 1) throw ConfigError("hidden layer sizes must be positive");
  }
}

TrainingTrace prepare_trace(const StateLifting& lifting, const sim::Trace& trace,
                            double solve_step) {
  if (static_cast<int>(trace.output_names.size()) != lifting.num_outputs()) {
    throw ConfigError("trace outputs do not match the lifting");
  }
  const double period = trace.period > 0.0 ? trace.period
                        : trace.size() > 1 ? trace.times[1] - trace.times[0]
                                           : solve_step;
  const auto stride = static_cast<std::size_t>(std::max<long long>(1, std::llround(solve_step / period)));
  TrainingTrace tt;
  tt.z0 = initial_state(lifting, trace);
  std::vector<Eigen::Index> idx;
  for (std::size_t i = 0; i < trace.size(); i += stride) idx.push_back(static_cast<Eigen::Index>(i));
  tt.inputs.resize(static_cast<Eigen::Index>(idx.size()), trace.inputs.cols());
  tt.outputs.resize(static_cast<Eigen::Index>(idx.size()), trace.outputs.cols());
  for (std::size_t k = 0; k < idx.size(); ++k) {
    const auto r = static_cast<Eigen::Index>(k);
    tt.times.push_back(trace.times[static_cast<std::size_t>(idx[k])]);
    tt.inputs.row(r) = trace.inputs.row(idx[k]);
    tt.outputs.row(r) = trace.outputs.row(idx[k]);
  }
  return tt;
}

std::vector<TrainingTrace> prepare_dataset(const StateLifting& lifting,
                                           std::span<const sim::Trace> traces,
                                           double solve_step) {
  std::vector<TrainingTrace> out;
  out.reserve(traces.size());
  for (const sim::Trace& t : traces) out.push_back(prepare_trace(lifting, t, solve_step));
  return out;
}

double dataset_loss(const SurrogateModel& model, std::span<const TrainingTrace> data) {
  double loss = 0.0;
  for (const TrainingTrace& tt : data) loss += trace_loss(model, tt, nullptr);
  return loss;
}

double loss_gradient(const SurrogateModel& model, std::span<const TrainingTrace> data,
                     Eigen::VectorXd& grad) {
  grad = Eigen::VectorXd::Zero(model.mlp.num_params());
  double loss = 0.0;
  for (const TrainingTrace& tt : data) loss += trace_loss(model, tt, &grad);
  return loss;
}

}  // namespace falconn::surrogate
