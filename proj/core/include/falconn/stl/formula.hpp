#pragma once

#include <string>
#include <vector>

namespace falconn::stl {

/// Scalar arithmetic over channel names. Used as the body of predicates.
struct ArithExpr {
  enum class Op { kConst, kChannel, kAdd, kSub, kMul, kDiv, kNeg, kAbs };

  Op op = Op::kConst;
  double value = 0.0;
  std::string channel;
  std::vector<ArithExpr> args;

  static ArithExpr constant(double v);
  static ArithExpr signal(std::string name);
  static ArithExpr unary(Op op, ArithExpr a);
  static ArithExpr binary(Op op, ArithExpr a, ArithExpr b);

  /// Channel names referenced anywhere in the expression, in first-use order.
  std::vector<std::string> channels() const;
  std::string to_string() const;
};

enum class Relation { kGreater, kGreaterEqual, kLess, kLessEqual };

/// Atomic predicate in canonical form `expr > 0`. The original relation is
/// kept for printing; `<`/`<=` are already folded into `expr` as rhs - lhs.
struct Predicate {
  ArithExpr expr;
  Relation relation = Relation::kGreater;

  /// Builds the canonical predicate for `lhs rel rhs`.
  static Predicate compare(ArithExpr lhs, Relation rel, ArithExpr rhs);
  std::string to_string() const;
};

struct Interval {
  double lo = 0.0;
  double hi = 0.0;
};

enum class FormulaKind {
  kPredicate,
  kNegatedPredicate,
  kNot,  // only before NNF normalization
  kAnd,
  kOr,
  kGlobally,
  kFinally,
  kUntil,
  kRelease,  // NNF dual of Until; produced by to_nnf only
};

/// STL abstract syntax tree. Value type; children are owned.
struct Formula {
  FormulaKind kind = FormulaKind::kPredicate;
  Predicate predicate;  // set for kPredicate / kNegatedPredicate
  std::vector<Formula> children;
  Interval interval;  // set for temporal kinds

  static Formula atom(Predicate p);
  static Formula negated_atom(Predicate p);
  static Formula negation(Formula f);
  /// n-ary; nested conjunctions are flattened. A single operand is returned
  /// unchanged.
  static Formula conjunction(std::vector<Formula> fs);
  static Formula disjunction(std::vector<Formula> fs);
  static Formula globally(Interval i, Formula f);
  static Formula eventually(Interval i, Formula f);
  static Formula until(Interval i, Formula lhs, Formula rhs);
  static Formula release(Interval i, Formula lhs, Formula rhs);

  bool is_temporal() const;
  /// Re-parseable text in the specification grammar.
  std::string to_string() const;
};

/// Pushes negation down to predicates (De Morgan, G/F duality, U/R duality,
/// double-negation elimination).
Formula to_nnf(const Formula& f);

bool is_nnf(const Formula& f);

/// Maximum nested sum of interval upper bounds (seconds).
double formula_horizon(const Formula& f);

/// Number of nested min/max aggregations along the deepest path. Bounds the
/// accumulated LSE smoothing error.
int aggregation_depth(const Formula& f);

/// Number of nodes in the tree.
int formula_size(const Formula& f);

}  // namespace falconn::stl
