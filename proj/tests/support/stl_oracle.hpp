// Brute-force reference semantics for STL used only by tests. Written
// directly from the recursive definitions, without the production
// evaluator's compiled windows, tapes, or memoization.
#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "falconn/stl/formula.hpp"
#include "falconn/stl/signal.hpp"

namespace falconn::testing {

using stl::ArithExpr;
using stl::Formula;
using stl::FormulaKind;

inline double oracle_arith(const ArithExpr& e,
                           const std::map<std::string, double>& at) {
  switch (e.op) {
    case ArithExpr::Op::kConst: return e.value;
    case ArithExpr::Op::kChannel: return at.at(e.channel);
    case ArithExpr::Op::kAdd: return oracle_arith(e.args[0], at) + oracle_arith(e.args[1], at);
    case ArithExpr::Op::kSub: return oracle_arith(e.args[0], at) - oracle_arith(e.args[1], at);
    case ArithExpr::Op::kMul: return oracle_arith(e.args[0], at) * oracle_arith(e.args[1], at);
    case ArithExpr::Op::kDiv: return oracle_arith(e.args[0], at) / oracle_arith(e.args[1], at);
    case ArithExpr::Op::kNeg: return -oracle_arith(e.args[0], at);
    case ArithExpr::Op::kAbs: return std::abs(oracle_arith(e.args[0], at));
  }
  return 0.0;
}

class StlOracle {
 public:
  explicit StlOracle(const stl::SampledSignal& s) : s_(s) {}

  double robustness(const Formula& f, std::size_t t) const {
    const double now = s_.times()[t];
    switch (f.kind) {
      case FormulaKind::kPredicate: return predicate(f, t);
      case FormulaKind::kNegatedPredicate: return -predicate(f, t);
      case FormulaKind::kNot: return -robustness(f.children[0], t);
      case FormulaKind::kAnd: {
        double r = std::numeric_limits<double>::infinity();
        for (const Formula& c : f.children) r = std::min(r, robustness(c, t));
        return r;
      }
      case FormulaKind::kOr: {
        double r = -std::numeric_limits<double>::infinity();
        for (const Formula& c : f.children) r = std::max(r, robustness(c, t));
        return r;
      }
      case FormulaKind::kGlobally: {
        double r = std::numeric_limits<double>::infinity();
        for (std::size_t j : window(now + f.interval.lo, now + f.interval.hi))
          r = std::min(r, robustness(f.children[0], j));
        return r;
      }
      case FormulaKind::kFinally: {
        double r = -std::numeric_limits<double>::infinity();
        for (std::size_t j : window(now + f.interval.lo, now + f.interval.hi))
          r = std::max(r, robustness(f.children[0], j));
        return r;
      }
      case FormulaKind::kUntil: {
        double r = -std::numeric_limits<double>::infinity();
        for (std::size_t j : window(now + f.interval.lo, now + f.interval.hi)) {
          double inner = robustness(f.children[1], j);
          for (std::size_t l : window(now + f.interval.lo, s_.times()[j]))
            inner = std::min(inner, robustness(f.children[0], l));
          r = std::max(r, inner);
        }
        return r;
      }
      case FormulaKind::kRelease: {
        double r = std::numeric_limits<double>::infinity();
        for (std::size_t j : window(now + f.interval.lo, now + f.interval.hi)) {
          double inner = robustness(f.children[1], j);
          for (std::size_t l : window(now + f.interval.lo, s_.times()[j]))
            inner = std::max(inner, robustness(f.children[0], l));
          r = std::min(r, inner);
        }
        return r;
      }
    }
    return 0.0;
  }

  /// Boolean satisfaction; Until's left operand ranges over [t+a, t'] to
  /// match the quantitative definition.
  bool satisfied(const Formula& f, std::size_t t) const {
    const double now = s_.times()[t];
    switch (f.kind) {
      case FormulaKind::kPredicate: return predicate(f, t) > 0;
      case FormulaKind::kNegatedPredicate: return !(predicate(f, t) > 0);
      case FormulaKind::kNot: return !satisfied(f.children[0], t);
      case FormulaKind::kAnd:
        return std::all_of(f.children.begin(), f.children.end(),
                           [&](const Formula& c) { return satisfied(c, t); });
      case FormulaKind::kOr:
        return std::any_of(f.children.begin(), f.children.end(),
                           [&](const Formula& c) { return satisfied(c, t); });
      case FormulaKind::kGlobally:
        for (std::size_t j : window(now + f.interval.lo, now + f.interval.hi))
          if (!satisfied(f.children[0], j)) return false;
        return true;
      case FormulaKind::kFinally:
        for (std::size_t j : window(now + f.interval.lo, now + f.interval.hi))
          if (satisfied(f.children[0], j)) return true;
        return false;
      case FormulaKind::kUntil:
        for (std::size_t j : window(now + f.interval.lo, now + f.interval.hi)) {
          if (!satisfied(f.children[1], j)) continue;
          bool hold = true;
          for (std::size_t l : window(now + f.interval.lo, s_.times()[j]))
            hold = hold && satisfied(f.children[0], l);
          if (hold) return true;
        }
        return false;
      case FormulaKind::kRelease: {
        // dual of Until
        for (std::size_t j : window(now + f.interval.lo, now + f.interval.hi)) {
          bool any = satisfied(f.children[1], j);
          for (std::size_t l : window(now + f.interval.lo, s_.times()[j]))
            any = any || satisfied(f.children[0], l);
          if (!any) return false;
        }
        return true;
      }
    }
    return false;
  }

 private:
  double predicate(const Formula& f, std::size_t t) const {
    std::map<std::string, double> at;
    for (const auto& c : s_.channels()) at[c.name] = c.values[t];
    return oracle_arith(f.predicate.expr, at);
  }

  // Samples in [lo, hi]; intervals in tests are grid aligned, so a tiny
  // tolerance absorbs rounding only.
  std::vector<std::size_t> window(double lo, double hi) const {
    std::vector<std::size_t> out;
    for (std::size_t j = 0; j < s_.size(); ++j) {
      const double t = s_.times()[j];
      if (t >= lo - 1e-9 && t <= hi + 1e-9) out.push_back(j);
    }
    return out;
  }

  const stl::SampledSignal& s_;
};

/// Random formulas over channels x and y with intervals on a grid of
/// `step`, nesting depth at most `depth`, and no more than `max_steps` grid
/// steps of horizon per temporal node.
class FormulaGenerator {
 public:
  FormulaGenerator(std::uint64_t seed, double step)
      : rng_(seed), step_(step) {}

  Formula generate(int depth, bool allow_not = false) {
    std::uniform_int_distribution<int> pick(0, depth > 0 ? (allow_not ? 7 : 6) : 1);
    const int kind = pick(rng_);
    switch (kind) {
      case 0: return Formula::atom(predicate());
      case 1: return Formula::negated_atom(predicate());
      case 2:
      case 3: {
        std::vector<Formula> cs;
        std::uniform_int_distribution<int> n(2, 3);
        const int count = n(rng_);
        for (int i = 0; i < count; ++i) cs.push_back(generate(depth - 1, allow_not));
        Formula f;
        f.kind = kind == 2 ? FormulaKind::kAnd : FormulaKind::kOr;
        f.children = std::move(cs);
        return f;
      }
      case 4: return Formula::globally(interval(), generate(depth - 1, allow_not));
      case 5: return Formula::eventually(interval(), generate(depth - 1, allow_not));
      case 6: {
        Formula lhs = generate(depth - 1, allow_not);
        Formula rhs = generate(depth - 1, allow_not);
        return Formula::until(interval(), std::move(lhs), std::move(rhs));
      }
      default: return Formula::negation(generate(depth - 1, allow_not));
    }
  }

  stl::Predicate predicate() {
    std::uniform_real_distribution<double> coef(-2.0, 2.0);
    std::bernoulli_distribution use_y(0.5);
    ArithExpr e = ArithExpr::binary(ArithExpr::Op::kMul,
                                    ArithExpr::constant(coef(rng_)),
                                    ArithExpr::signal("x"));
    if (use_y(rng_)) {
      e = ArithExpr::binary(
          ArithExpr::Op::kAdd, std::move(e),
          ArithExpr::binary(ArithExpr::Op::kMul, ArithExpr::constant(coef(rng_)),
                            ArithExpr::signal("y")));
    }
    return stl::Predicate::compare(std::move(e), stl::Relation::kGreater,
                                   ArithExpr::constant(coef(rng_)));
  }

  stl::Interval interval() {
    std::uniform_int_distribution<int> lo(0, 3), len(0, 4);
    const int a = lo(rng_);
    const int b = a + len(rng_);
    return {a * step_, b * step_};
  }

  std::mt19937_64& rng() { return rng_; }

 private:
  std::mt19937_64 rng_;
  double step_;
};

/// Random two-channel signal on a uniform grid.
inline stl::SampledSignal random_signal(std::mt19937_64& rng, std::size_t n,
                                        double step, double scale = 2.0) {
  std::uniform_real_distribution<double> v(-scale, scale);
  std::vector<double> t(n), x(n), y(n);
  for (std::size_t i = 0; i < n; ++i) {
    t[i] = static_cast<double>(i) * step;
    x[i] = v(rng);
    y[i] = v(rng);
  }
  return stl::SampledSignal(t, {{"x", x}, {"y", y}});
}

}  // namespace falconn::testing
