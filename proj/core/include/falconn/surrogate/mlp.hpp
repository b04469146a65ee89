#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Core>

namespace falconn::surrogate {

/// Fully connected network, tanh on hidden layers and identity on the output.
/// Parameters are one flat vector: per layer the weight matrix (column-major,
/// out x in) followed by the bias.
class Mlp {
 public:
  /// Activations of every layer from one forward pass, kept for backward().
  struct Tape {
    std::vector<Eigen::VectorXd> activations;
  };

  Mlp() = default;
  /// All parameters zero.
  explicit Mlp(std::vector<int> sizes);
  /// Weights uniform in +-1/sqrt(fan_in), biases zero.
  static Mlp random(std::vector<int> sizes, std::uint64_t seed);

  const std::vector<int>& sizes() const { return sizes_; }
  int input_size() const { return sizes_.front(); }
  int output_size() const { return sizes_.back(); }
  Eigen::Index num_params() const { return params_.size(); }
  const Eigen::VectorXd& params() const { return params_; }
  void set_params(const Eigen::VectorXd& p);

  Eigen::VectorXd forward(const Eigen::VectorXd& in) const;
  Eigen::VectorXd forward(const Eigen::VectorXd& in, Tape& tape) const;
  /// Adds d(out)/d(params)^T dout into `dparams` and returns d(out)/d(in)^T dout.
  Eigen::VectorXd backward(const Tape& tape, const Eigen::VectorXd& dout,
                           Eigen::VectorXd& dparams) const;

 private:
  std::vector<int> sizes_;
  Eigen::VectorXd params_;
};

}  // namespace falconn::surrogate
