#include "falconn/sim/input_signal.hpp"

#include <algorithm>
#include <cmath>

#include "falconn/error.hpp"

namespace falconn::sim {

namespace {
constexpr double kBreakpointTolerance = 1e-9;
}

InputSignal::InputSignal(std::vector<std::string> channels,
                         std::vector<double> breakpoints, Eigen::MatrixXd values,
                         double horizon)
    : channels_(std::move(channels)),
      breakpoints_(std::move(breakpoints)),
      values_(std::move(values)),
      horizon_(horizon) {
  if (breakpoints_.empty()) throw Error("input signal needs a segment");
  if (std::abs(breakpoints_.front()) > kBreakpointTolerance) {
    throw Error("first breakpoint must be 0");
  }
  for (std::size_t i = 1; i < breakpoints_.size(); ++i) {
    if (!(breakpoints_[i] > breakpoints_[i - 1])) {
      throw Error("breakpoints must be strictly increasing");
    }
  }
  if (breakpoints_.back() > horizon_ + kBreakpointTolerance) {
    throw Error("breakpoint beyond horizon");
  }
  if (values_.rows() != static_cast<Eigen::Index>(breakpoints_.size()) ||
      values_.cols() != static_cast<Eigen::Index>(channels_.size())) {
    throw Error("input values must be segments x channels");
  }
}

InputSignal InputSignal::constant(std::vector<std::string> channels,
                                  const Eigen::VectorXd& value, double horizon) {
  return InputSignal(std::move(channels), {0.0}, value.transpose(), horizon);
}

std::size_t InputSignal::segment_at(double t) const {
  auto it = std::upper_bound(breakpoints_.begin(), breakpoints_.end(),
                             t + kBreakpointTolerance);
  if (it == breakpoints_.begin()) return 0;
  return static_cast<std::size_t>(it - breakpoints_.begin()) - 1;
}

Eigen::VectorXd InputSignal::at(double t) const {
  return values_.row(static_cast<Eigen::Index>(segment_at(t))).transpose();
}

bool InputSignal::within(const Eigen::VectorXd& lo,
                         const Eigen::VectorXd& hi) const {
  for (Eigen::Index i = 0; i < values_.rows(); ++i) {
    for (Eigen::Index c = 0; c < values_.cols(); ++c) {
      const double v = values_(i, c);
      if (!(v >= lo(c) && v <= hi(c))) return false;
    }
  }
  return true;
}

InputSignal InputSignal::clipped(const Eigen::VectorXd& lo,
                                 const Eigen::VectorXd& hi) const {
  Eigen::MatrixXd v = values_;
  for (Eigen::Index i = 0; i < v.rows(); ++i) {
    v.row(i) = v.row(i).cwiseMax(lo.transpose()).cwiseMin(hi.transpose());
  }
  return InputSignal(channels_, breakpoints_, std::move(v), horizon_);
}

std::size_t grid_size(double horizon, double period) {
  if (!(period > 0.0)) throw Error("period must be positive");
  return static_cast<std::size_t>(std::llround(horizon / period)) + 1;
}

std::vector<double> uniform_grid(double horizon, double period) {
  const std::size_t n = grid_size(horizon, period);
  std::vector<double> t(n);
  for (std::size_t k = 0; k < n; ++k) t[k] = static_cast<double>(k) * period;
  return t;
}

InputSignal resample_input(const InputSignal& u, double period) {
  if (!(period > 0.0)) throw Error("resample period must be positive");
  // One segment per grid step strictly inside the horizon.
  std::size_t steps = grid_size(u.horizon(), period) - 1;
  if (steps == 0) steps = 1;
  std::vector<double> bp(steps);
  Eigen::MatrixXd values(static_cast<Eigen::Index>(steps),
                         static_cast<Eigen::Index>(u.num_channels()));
  for (std::size_t k = 0; k < steps; ++k) {
    bp[k] = static_cast<double>(k) * period;
    values.row(static_cast<Eigen::Index>(k)) = u.at(bp[k]).transpose();
  }
  return InputSignal(u.channels(), std::move(bp), std::move(values), u.horizon());
}

}  // namespace falconn::sim
