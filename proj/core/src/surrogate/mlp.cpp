#include "falconn/surrogate/mlp.hpp"

#include <cmath>
#include <random>

#include "falconn/error.hpp"

namespace falconn::surrogate {
namespace {

Eigen::Index count_params(const std::vector<int>& sizes) {
  Eigen::Index n = 0;
  for (std::size_t l = 0; l + 1 < sizes.size(); ++l) n += (sizes[l] + 1) * sizes[l + 1];
  return n;
}

}  // namespace

Mlp::Mlp(std::vector<int> sizes) : sizes_(std::move(sizes)) {
  if (sizes_.size() < 2) throw ConfigError("an MLP needs input and output sizes");
  for (int s : sizes_) {
    if (s < 1) throw ConfigError("MLP layer sizes must be positive");
  }
  params_ = Eigen::VectorXd::Zero(count_params(sizes_));
}

Mlp Mlp::random(std::vector<int> sizes, std::uint64_t seed) {
  Mlp m(std::move(sizes));
  std::mt19937_64 rng(seed);
  Eigen::Index offset = 0;
  for (std::size_t l = 0; l + 1 < m.sizes_.size(); ++l) {
    const int in = m.sizes_[l], out = m.sizes_[l + 1];
    const double bound = 1.0 / std::sqrt(static_cast<double>(in));
    std::uniform_real_distribution<double> dist(-bound, bound);
    for (Eigen::Index i = 0; i < in * out; ++i) m.params_(offset + i) = dist(rng);
    offset += (in + 1) * out;
  }
  return m;
}

void Mlp::set_params(const Eigen::VectorXd& p) {
  if (p.size() != params_.size()) throw Error("MLP parameter count mismatch");
  params_ = p;
}

Eigen::VectorXd Mlp::forward(const Eigen::VectorXd& in) const {
  Tape tape;
  return forward(in, tape);
}

Eigen::VectorXd Mlp::forward(const Eigen::VectorXd& in, Tape& tape) const {
  const std::size_t layers = sizes_.size() - 1;
  tape.activations.resize(layers + 1);
  tape.activations[0] = in;
  Eigen::Index offset = 0;
  for (std::size_t l = 0; l < layers; ++l) {
    const int n_in = sizes_[l], n_out = sizes_[l + 1];
    Eigen::Map<const Eigen::MatrixXd> W(params_.data() + offset, n_out, n_in);
    Eigen::Map<const Eigen::VectorXd> b(params_.data() + offset + n_in * n_out, n_out);
    Eigen::VectorXd a = W * tape.activations[l] + b;
    if (l + 1 < layers) a = a.array().tanh();
    tape.activations[l + 1] = std::move(a);
    offset += (n_in + 1) * n_out;
  }
  return tape.activations.back();
}

Eigen::VectorXd Mlp::backward(const Tape& tape, const Eigen::VectorXd& dout,
                              Eigen::VectorXd& dparams) const {
  const std::size_t layers = sizes_.size() - 1;
  Eigen::VectorXd delta = dout;
  Eigen::Index offset = params_.size();
  for (std::size_t l = layers; l-- > 0;) {
    const int n_in = sizes_[l], n_out = sizes_[l + 1];
    offset -= (n_in + 1) * n_out;
    if (l + 1 < layers) {
      delta = delta.array() * (1.0 - tape.activations[l + 1].array().square());
    }
    Eigen::Map<const Eigen::MatrixXd> W(params_.data() + offset, n_out, n_in);
    Eigen::Map<Eigen::MatrixXd> dW(dparams.data() + offset, n_out, n_in);
    Eigen::Map<Eigen::VectorXd> db(dparams.data() + offset + n_in * n_out, n_out);
    dW.noalias() += delta * tape.activations[l].transpose();
    db += delta;
    delta = W.transpose() * delta;
  }
  return delta;
}

}  // namespace falconn::surrogate
