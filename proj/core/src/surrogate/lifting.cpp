#include "falconn/surrogate/lifting.hpp"

#include "falconn/error.hpp"

namespace falconn::surrogate {

StateLifting build_lifting(const std::vector<int>& orders) {
  if (orders.empty()) throw ConfigError("lifting needs at least one output");
  int dim = 0;
  for (int o : orders) {
    if (o < 1) throw ConfigError("lifting orders must be >= 1");
    dim += o;
  }
  StateLifting l;
  l.orders = orders;
  const auto p = static_cast<Eigen::Index>(orders.size());
  l.A = Eigen::MatrixXd::Zero(dim, dim);
  l.B = Eigen::MatrixXd::Zero(dim, p);
  l.C = Eigen::MatrixXd::Zero(p, dim);
  int row = 0;
  for (Eigen::Index i = 0; i < p; ++i) {
    const int o = orders[static_cast<std::size_t>(i)];
    for (int j = 0; j + 1 < o; ++j) l.A(row + j, row + j + 1) = 1.0;
    l.C(i, row) = 1.0;
    l.B(row + o - 1, i) = 1.0;
    l.output_rows.push_back(row);
    l.driven_rows.push_back(row + o - 1);
    row += o;
  }
  return l;
}

}  // namespace falconn::surrogate
