#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace falconn::symreg {

/// Division by a denominator smaller than this in magnitude yields NaN.
inline constexpr double kDivisionGuard = 1e-12;

enum class Op : std::uint8_t { kConst, kZ, kU, kExp, kSin, kCos, kAdd, kSub, kMul, kDiv };

int arity(Op op);

struct Node {
  Op op = Op::kConst;
  int index = 0;       // variable index (0-based) for kZ / kU
  double value = 0.0;  // for kConst
  bool operator==(const Node&) const = default;
};

/// Expression tree in prefix order. Variables print as z1.., u1.. (1-based).
class Expr {
 public:
  Expr() = default;
  explicit Expr(std::vector<Node> nodes) : nodes_(std::move(nodes)) {}

  static Expr constant(double v);
  static Expr z(int index);
  static Expr u(int index);
  static Expr unary(Op op, const Expr& a);
  static Expr binary(Op op, const Expr& a, const Expr& b);

  const std::vector<Node>& nodes() const { return nodes_; }
  std::vector<Node>& nodes() { return nodes_; }
  /// Node count.
  int complexity() const { return static_cast<int>(nodes_.size()); }
  bool empty() const { return nodes_.empty(); }
  /// One past the last node of the subtree rooted at `i`.
  std::size_t subtree_end(std::size_t i) const;
  Expr subtree(std::size_t i) const;
  /// Replaces the subtree rooted at `i` with `e`.
  Expr replaced(std::size_t i, const Expr& e) const;

  /// NaN when a guarded division or a non-finite intermediate occurs.
  double eval(const double* z, const double* u) const;
  double eval(const Eigen::VectorXd& z, const Eigen::VectorXd& u) const {
    return eval(z.data(), u.data());
  }
  /// Row-wise evaluation over samples (rows of Z and U).
  Eigen::ArrayXd eval_batch(const Eigen::MatrixXd& Z, const Eigen::MatrixXd& U) const;

  bool uses_input() const;
  int max_z_index() const;
  int max_u_index() const;

  std::string to_string() const;
  bool operator==(const Expr&) const = default;

 private:
  std::vector<Node> nodes_;
};

/// Parses the infix form printed by Expr::to_string (and ordinary infix with
/// the usual precedence). Throws ParseError.
Expr parse_expr(const std::string& text);

double eval_expr(const Expr& e, const Eigen::VectorXd& z, const Eigen::VectorXd& u);

/// Constant folding plus the identities x+0, x-0, x*1, x*0, 0/x, x/1.
Expr fold_constants(const Expr& e);

/// Symbolic partial derivative in z_i (`input` false) or u_i (`input` true).
Expr differentiate(const Expr& e, bool input, int index);

struct ExprJacobian {
  std::vector<Expr> dz;
  std::vector<Expr> du;
};
ExprJacobian expr_jacobian(const Expr& e, int num_z, int num_u);

}  // namespace falconn::symreg
