#pragma once

#include <cstdint>
#include <random>

#include "falconn/sim/system.hpp"

namespace falconn::testing {

/// dx/dt = -x + u, u in [-1, 1], x0 = 0, output y = x.
inline sim::SutSpec first_order_plant(double a = -1.0, double b = 1.0) {
  sim::SutSpec s;
  s.name = "FirstOrder";
  s.state_dim = 1;
  s.input_names = {"u"};
  s.input_min = Eigen::VectorXd::Constant(1, -1.0);
  s.input_max = Eigen::VectorXd::Constant(1, 1.0);
  s.output_names = {"y"};
  s.x0 = Eigen::VectorXd::Zero(1);
  s.dynamics = [a, b](const Eigen::VectorXd& x, const Eigen::VectorXd& u, double) {
    return Eigen::VectorXd(a * x + b * u);
  };
  s.output = [](const Eigen::VectorXd& x, const Eigen::VectorXd&) { return x; };
  return s;
}

/// Piecewise-constant input choosing a bound per segment at random.
inline sim::InputSignal corner_input(const sim::SutSpec& sut, double horizon,
                                     double segment, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::bernoulli_distribution coin(0.5);
  std::vector<double> bp;
  for (double t = 0.0; t < horizon - 1e-9; t += segment) bp.push_back(t);
  Eigen::MatrixXd v(static_cast<Eigen::Index>(bp.size()), sut.input_min.size());
  for (Eigen::Index i = 0; i < v.rows(); ++i) {
    for (Eigen::Index c = 0; c < v.cols(); ++c) {
      v(i, c) = coin(rng) ? sut.input_max(c) : sut.input_min(c);
    }
  }
  return sim::InputSignal(sut.input_names, bp, v, horizon);
}

}  // namespace falconn::testing
