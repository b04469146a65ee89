#pragma once

#include <vector>

#include <Eigen/Core>

namespace falconn::surrogate {

/// Companion-form lifting of outputs with derivative orders o_i. Output i
/// owns a block of o_i rows (y_i, y_i', ..., y_i^(o_i - 1)); the learned field
/// drives only the last row of each block.
struct StateLifting {
  std::vector<int> orders;
  Eigen::MatrixXd A;  // dim x dim block companion
  Eigen::MatrixXd B;  // dim x outputs
  Eigen::MatrixXd C;  // outputs x dim
  std::vector<int> driven_rows;
  std::vector<int> output_rows;

  int dim() const { return static_cast<int>(A.rows()); }
  int num_outputs() const { return static_cast<int>(orders.size()); }
};

/// Throws ConfigError unless every order is >= 1.
StateLifting build_lifting(const std::vector<int>& orders);

}  // namespace falconn::surrogate
