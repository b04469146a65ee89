#include "falconn/sim/system.hpp"

#include <cmath>

#include "falconn/error.hpp"

namespace falconn::sim {

stl::SampledSignal Trace::signal() const {
  std::vector<stl::Channel> channels;
  auto column = [&](const Eigen::MatrixXd& m, Eigen::Index c) {
    std::vector<double> v(times.size());
    for (std::size_t i = 0; i < times.size(); ++i) v[i] = m(static_cast<Eigen::Index>(i), c);
    return v;
  };
  for (std::size_t c = 0; c < output_names.size(); ++c) {
    channels.push_back({output_names[c], column(outputs, static_cast<Eigen::Index>(c))});
  }
  for (std::size_t c = 0; c < input_names.size(); ++c) {
    channels.push_back({input_names[c], column(inputs, static_cast<Eigen::Index>(c))});
  }
  return stl::SampledSignal(times, std::move(channels));
}

InputSignal Trace::input_signal() const {
  const std::size_t segments = times.size() > 1 ? times.size() - 1 : 1;
  std::vector<double> bp(times.begin(), times.begin() + static_cast<std::ptrdiff_t>(segments));
  return InputSignal(input_names, std::move(bp),
                     inputs.topRows(static_cast<Eigen::Index>(segments)), horizon());
}

bool Trace::operator==(const Trace& o) const {
  return plant == o.plant && period == o.period && x0 == o.x0 &&
         times == o.times && input_names == o.input_names &&
         output_names == o.output_names && inputs == o.inputs &&
         outputs == o.outputs;
}

void SutSpec::validate() const {
  const auto m = static_cast<Eigen::Index>(input_names.size());
  if (input_min.size() != m || input_max.size() != m) {
    throw BoundViolationError("input bounds must match input channels");
  }
  for (Eigen::Index i = 0; i < m; ++i) {
    if (!(input_min(i) <= input_max(i))) {
      throw BoundViolationError("input bound u_min > u_max for " +
                                input_names[static_cast<std::size_t>(i)]);
    }
  }
  if (x0.size() != state_dim) throw Error("x0 does not match state dimension");
  if (!(period > 0.0)) throw Error("sampling period must be positive");
}

namespace {

void check_state(const Eigen::VectorXd& x, double t) {
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    if (!std::isfinite(x(i))) throw DivergenceError("non-finite state", t);
    if (std::abs(x(i)) > kDivergenceThreshold) {
      throw DivergenceError("state magnitude above divergence threshold", t);
    }
  }
}

}  // namespace

Eigen::MatrixXd integrate_rk4(const Dynamics& f, const Eigen::VectorXd& x0,
                              const InputSignal& u, std::span<const double> t_grid) {
  if (t_grid.empty()) throw Error("empty time grid");
  Eigen::MatrixXd states(static_cast<Eigen::Index>(t_grid.size()), x0.size());
  Eigen::VectorXd x = x0;
  check_state(x, t_grid[0]);
  states.row(0) = x.transpose();
  for (std::size_t k = 0; k + 1 < t_grid.size(); ++k) {
    const double t = t_grid[k];
    const double h = t_grid[k + 1] - t;
    if (!(h > 0.0)) throw Error("time grid must be strictly increasing");
    const Eigen::VectorXd uk = u.at(t);
    const Eigen::VectorXd k1 = f(x, uk, t);
    const Eigen::VectorXd k2 = f(x + 0.5 * h * k1, uk, t + 0.5 * h);
    const Eigen::VectorXd k3 = f(x + 0.5 * h * k2, uk, t + 0.5 * h);
    const Eigen::VectorXd k4 = f(x + h * k3, uk, t + h);
    x += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    check_state(x, t_grid[k + 1]);
    states.row(static_cast<Eigen::Index>(k + 1)) = x.transpose();
  }
  return states;
}

Trace run_experiment(const SutSpec& sut, const InputSignal& u) {
  sut.validate();
  if (u.num_channels() != sut.input_names.size()) {
    throw BoundViolationError("input has " + std::to_string(u.num_channels()) +
                              " channels, plant expects " +
                              std::to_string(sut.input_names.size()));
  }
  if (!u.within(sut.input_min, sut.input_max)) {
    throw BoundViolationError("input leaves the plant bounds");
  }
  const std::vector<double> grid = uniform_grid(u.horizon(), sut.period);
  const Eigen::MatrixXd states = integrate_rk4(sut.dynamics, sut.x0, u, grid);

  Trace tr;
  tr.plant = sut.name;
  tr.period = sut.period;
  tr.x0 = sut.x0;
  tr.times = grid;
  tr.input_names = sut.input_names;
  tr.output_names = sut.output_names;
  const auto n = static_cast<Eigen::Index>(grid.size());
  tr.inputs.resize(n, static_cast<Eigen::Index>(sut.input_names.size()));
  tr.outputs.resize(n, static_cast<Eigen::Index>(sut.output_names.size()));
  for (Eigen::Index i = 0; i < n; ++i) {
    const Eigen::VectorXd ui = u.at(grid[static_cast<std::size_t>(i)]);
    tr.inputs.row(i) = ui.transpose();
    tr.outputs.row(i) = sut.output(states.row(i).transpose(), ui).transpose();
  }
  return tr;
}

}  // namespace falconn::sim
