#include <algorithm>

#include "falconn/error.hpp"
#include "falconn/sim/system.hpp"

namespace falconn::sim {
namespace {

Eigen::VectorXd vec(std::initializer_list<double> v) {
  Eigen::VectorXd out(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double x : v) out(i++) = x;
  return out;
}

// Magnet holding a ball at height x (measured from the coil face) through a
// saturated PD loop on the coil voltage.
SutSpec maglev() {
  struct Constants {
    double g = 1.0, alpha = 1.0, beta = 1.0, c = 1.0;
    double kp = 150.0, kd = 19.5, v_max = 10.0;
  } k;
  SutSpec s;
  s.name = "MagLevAnalog";
  s.state_dim = 2;
  s.input_names = {"Ref"};
  s.input_min = vec({1.0});
  s.input_max = vec({3.0});
  s.output_names = {"Pos"};
  s.x0 = vec({1.0, 0.0});
  s.dynamics = [k](const Eigen::VectorXd& x, const Eigen::VectorXd& u, double) {
    const double v =
        std::clamp(k.kp * (u(0) - x(0)) - k.kd * x(1), 0.0, k.v_max);
    const double gap = k.beta + x(0);
    Eigen::VectorXd dx(2);
    dx(0) = x(1);
    dx(1) = -k.c * x(1) - k.g + k.alpha * v * v / (gap * gap);
    return dx;
  };
  s.output = [](const Eigen::VectorXd& x, const Eigen::VectorXd&) {
    return vec({x(0)});
  };
  return s;
}

SutSpec linear_second_order() {
  constexpr double omega = 2.0, zeta = 0.3;
  SutSpec s;
  s.name = "LinearSecondOrder";
  s.state_dim = 2;
  s.input_names = {"Ref"};
  s.input_min = vec({-1.0});
  s.input_max = vec({1.0});
  s.output_names = {"Pos"};
  s.x0 = vec({0.0, 0.0});
  s.dynamics = [](const Eigen::VectorXd& x, const Eigen::VectorXd& u, double) {
    Eigen::VectorXd dx(2);
    dx(0) = x(1);
    dx(1) = -2.0 * zeta * omega * x(1) - omega * omega * x(0) + omega * omega * u(0);
    return dx;
  };
  s.output = [](const Eigen::VectorXd& x, const Eigen::VectorXd&) {
    return vec({x(0)});
  };
  return s;
}

SutSpec van_der_pol() {
  constexpr double mu = 1.0;
  SutSpec s;
  s.name = "VanDerPolForced";
  s.state_dim = 2;
  s.input_names = {"u"};
  s.input_min = vec({-1.0});
  s.input_max = vec({1.0});
  s.output_names = {"Pos"};
  s.x0 = vec({1.0, 0.0});
  s.dynamics = [](const Eigen::VectorXd& x, const Eigen::VectorXd& u, double) {
    Eigen::VectorXd dx(2);
    dx(0) = x(1);
    dx(1) = mu * (1.0 - x(0) * x(0)) * x(1) - x(0) + u(0);
    return dx;
  };
  s.output = [](const Eigen::VectorXd& x, const Eigen::VectorXd&) {
    return vec({x(0)});
  };
  return s;
}

}  // namespace

SutSpec make_plant(const std::string& name) {
  if (name == "MagLevAnalog") return maglev();
  if (name == "LinearSecondOrder") return linear_second_order();
  if (name == "VanDerPolForced") return van_der_pol();
  throw ConfigError("unknown plant '" + name + "'");
}

std::vector<std::string> plant_names() {
  return {"MagLevAnalog", "LinearSecondOrder", "VanDerPolForced"};
}

}  // namespace falconn::sim
