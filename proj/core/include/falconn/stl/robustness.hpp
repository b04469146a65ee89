#pragma once

#include <cstddef>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "falconn/stl/formula.hpp"
#include "falconn/stl/signal.hpp"

namespace falconn::stl {

/// Inclusive index range [first, last].
struct IndexRange {
  std::size_t first = 0;
  std::size_t last = 0;
  std::size_t size() const { return last - first + 1; }
};

/// All sample indices j with t_anchor + a - eps <= times[j] <= t_anchor + b +
/// eps, where eps is half the local sampling step. Throws HorizonError if no
/// sample falls in the interval.
IndexRange interval_indices(std::span<const double> times, double t_anchor,
                            double a, double b);

enum class RobustnessMode { kExact, kSmooth };

struct RobustnessResult {
  double value = 0.0;
  RobustnessMode mode = RobustnessMode::kExact;
  double k = 0.0;  // smoothing parameter, 0 in exact mode
  /// d value / d sample, rows follow the evaluator's channel order and
  /// columns the time index. Empty in exact mode.
  Eigen::MatrixXd gradient;
  /// Largest number of operands fed to a single min/max.
  std::size_t max_arity = 1;
};

/// Smoothing constant inside sqrt(x^2 + eps) used for abs() in smooth mode.
inline constexpr double kSmoothAbsEpsilon = 1e-12;

/// Robustness of one formula anchored at one time index, compiled against a
/// fixed channel layout and time grid. Evaluation is const and reentrant, so
/// one evaluator can be shared across threads.
class RobustnessEvaluator {
 public:
  /// Throws UnknownChannelError if a predicate references a channel not in
  /// `channels`, HorizonError if the formula does not fit the grid.
  RobustnessEvaluator(const Formula& formula, std::vector<std::string> channels,
                      std::vector<double> times, std::size_t t_index = 0);
  ~RobustnessEvaluator();
  RobustnessEvaluator(RobustnessEvaluator&&) noexcept;
  RobustnessEvaluator& operator=(RobustnessEvaluator&&) noexcept;

  /// `values` is channels x samples.
  double exact(const Eigen::Ref<const Eigen::MatrixXd>& values) const;

  /// LSE-smoothed robustness with k > 0. The gradient is filled when
  /// `with_gradient` is set.
  RobustnessResult smooth(const Eigen::Ref<const Eigen::MatrixXd>& values,
                          double k, bool with_gradient = true) const;

  const std::vector<std::string>& channels() const;
  std::size_t num_samples() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

double robustness_exact(const Formula& f, const SampledSignal& s,
                        std::size_t t_index = 0);

RobustnessResult robustness_smooth(const Formula& f, const SampledSignal& s,
                                   std::size_t t_index, double k);

/// Worst relative error (max-norm, relative to the finite-difference
/// gradient's max-norm) between the analytic smooth gradient and central
/// differences with step 1e-6 * max(1, |sample|).
double robustness_gradient_check(const Formula& f, const SampledSignal& s,
                                 std::size_t t_index, double k);

/// Packs a signal's channels into the channels x samples layout.
Eigen::MatrixXd signal_matrix(const SampledSignal& s);

}  // namespace falconn::stl
