#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace falconn::sim {

/// Piecewise-constant multi-channel input. Segment i holds `values.row(i)`
/// on [breakpoints[i], breakpoints[i+1]) and the last segment extends to the
/// horizon.
class InputSignal {
 public:
  InputSignal() = default;
  InputSignal(std::vector<std::string> channels, std::vector<double> breakpoints,
              Eigen::MatrixXd values, double horizon);

  static InputSignal constant(std::vector<std::string> channels,
                              const Eigen::VectorXd& value, double horizon);

  /// Value held at time t (zero-order hold; breakpoints are matched with a
  /// 1e-9 s tolerance so grid arithmetic does not slip a segment).
  Eigen::VectorXd at(double t) const;
  std::size_t segment_at(double t) const;

  const std::vector<std::string>& channels() const { return channels_; }
  const std::vector<double>& breakpoints() const { return breakpoints_; }
  const Eigen::MatrixXd& values() const { return values_; }
  double horizon() const { return horizon_; }
  std::size_t num_segments() const { return breakpoints_.size(); }
  std::size_t num_channels() const { return channels_.size(); }

  bool within(const Eigen::VectorXd& lo, const Eigen::VectorXd& hi) const;
  InputSignal clipped(const Eigen::VectorXd& lo, const Eigen::VectorXd& hi) const;

 private:
  std::vector<std::string> channels_;
  std::vector<double> breakpoints_;
  Eigen::MatrixXd values_;  // segments x channels
  double horizon_ = 0.0;
};

/// Re-expresses `u` on a uniform grid of `period`; the value at every time is
/// unchanged when the original breakpoints lie on that grid.
InputSignal resample_input(const InputSignal& u, double period);

/// Number of grid points k * period in [0, horizon], i.e. round(h/p) + 1.
std::size_t grid_size(double horizon, double period);
std::vector<double> uniform_grid(double horizon, double period);

}  // namespace falconn::sim
