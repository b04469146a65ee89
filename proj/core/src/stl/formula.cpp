#include "falconn/stl/formula.hpp"

#include <algorithm>

#include "common/numfmt.hpp"
#include "falconn/error.hpp"

namespace falconn::stl {
namespace {

void collect_channels(const ArithExpr& e, std::vector<std::string>& out) {
  if (e.op == ArithExpr::Op::kChannel) {
    if (std::find(out.begin(), out.end(), e.channel) == out.end()) {
      out.push_back(e.channel);
    }
    return;
  }
  for (const ArithExpr& a : e.args) collect_channels(a, out);
}

std::string interval_text(const Interval& i) {
  return "[" + detail::format_shortest(i.lo) + "," +
         detail::format_shortest(i.hi) + "]";
}

void check_interval(const Interval& i) {
  if (!(i.lo >= 0.0) || !(i.hi >= i.lo)) {
    throw Error("invalid interval " + interval_text(i) +
                ": bounds must satisfy 0 <= a <= b");
  }
}

Formula flatten(FormulaKind kind, std::vector<Formula> fs) {
  if (fs.empty()) throw Error("empty conjunction/disjunction");
  if (fs.size() == 1) return std::move(fs.front());
  Formula out;
  out.kind = kind;
  for (Formula& f : fs) {
    if (f.kind == kind) {
      for (Formula& c : f.children) out.children.push_back(std::move(c));
    } else {
      out.children.push_back(std::move(f));
    }
  }
  return out;
}

Formula temporal(FormulaKind kind, Interval i, std::vector<Formula> children) {
  check_interval(i);
  Formula out;
  out.kind = kind;
  out.interval = i;
  out.children = std::move(children);
  return out;
}

Formula nnf(const Formula& f, bool negate);

std::vector<Formula> nnf_children(const Formula& f, bool negate) {
  std::vector<Formula> out;
  out.reserve(f.children.size());
  for (const Formula& c : f.children) out.push_back(nnf(c, negate));
  return out;
}

Formula nnf(const Formula& f, bool negate) {
  switch (f.kind) {
    case FormulaKind::kPredicate:
      return negate ? Formula::negated_atom(f.predicate) : f;
    case FormulaKind::kNegatedPredicate:
      return negate ? Formula::atom(f.predicate) : f;
    case FormulaKind::kNot:
      return nnf(f.children.at(0), !negate);
    case FormulaKind::kAnd:
      return negate ? Formula::disjunction(nnf_children(f, true))
                    : Formula::conjunction(nnf_children(f, false));
    case FormulaKind::kOr:
      return negate ? Formula::conjunction(nnf_children(f, true))
                    : Formula::disjunction(nnf_children(f, false));
    case FormulaKind::kGlobally:
      return negate ? Formula::eventually(f.interval, nnf(f.children[0], true))
                    : Formula::globally(f.interval, nnf(f.children[0], false));
    case FormulaKind::kFinally:
      return negate ? Formula::globally(f.interval, nnf(f.children[0], true))
                    : Formula::eventually(f.interval, nnf(f.children[0], false));
    case FormulaKind::kUntil:
      return negate ? Formula::release(f.interval, nnf(f.children[0], true),
                                       nnf(f.children[1], true))
                    : Formula::until(f.interval, nnf(f.children[0], false),
                                     nnf(f.children[1], false));
    case FormulaKind::kRelease:
      return negate ? Formula::until(f.interval, nnf(f.children[0], true),
                                     nnf(f.children[1], true))
                    : Formula::release(f.interval, nnf(f.children[0], false),
                                       nnf(f.children[1], false));
  }
  return f;
}

std::string wrap(const Formula& f) {
  const bool atomic = f.kind == FormulaKind::kPredicate;
  return atomic ? f.to_string() : "(" + f.to_string() + ")";
}

}  // namespace

ArithExpr ArithExpr::constant(double v) {
  ArithExpr e;
  e.op = Op::kConst;
  e.value = v;
  return e;
}

ArithExpr ArithExpr::signal(std::string name) {
  ArithExpr e;
  e.op = Op::kChannel;
  e.channel = std::move(name);
  return e;
}

ArithExpr ArithExpr::unary(Op op, ArithExpr a) {
  ArithExpr e;
  e.op = op;
  e.args.push_back(std::move(a));
  return e;
}

ArithExpr ArithExpr::binary(Op op, ArithExpr a, ArithExpr b) {
  ArithExpr e;
  e.op = op;
  e.args.push_back(std::move(a));
  e.args.push_back(std::move(b));
  return e;
}

std::vector<std::string> ArithExpr::channels() const {
  std::vector<std::string> out;
  collect_channels(*this, out);
  return out;
}

std::string ArithExpr::to_string() const {
  switch (op) {
    case Op::kConst: {
      const std::string s = detail::format_shortest(value);
      return value < 0 ? "(" + s + ")" : s;
    }
    case Op::kChannel: return channel;
    case Op::kAdd: return "(" + args[0].to_string() + " + " + args[1].to_string() + ")";
    case Op::kSub: return "(" + args[0].to_string() + " - " + args[1].to_string() + ")";
    case Op::kMul: return "(" + args[0].to_string() + " * " + args[1].to_string() + ")";
    case Op::kDiv: return "(" + args[0].to_string() + " / " + args[1].to_string() + ")";
    case Op::kNeg: return "(-" + args[0].to_string() + ")";
    case Op::kAbs: return "abs(" + args[0].to_string() + ")";
  }
  return {};
}

Predicate Predicate::compare(ArithExpr lhs, Relation rel, ArithExpr rhs) {
  Predicate p;
  p.relation = rel;
  const bool greater =
      rel == Relation::kGreater || rel == Relation::kGreaterEqual;
  ArithExpr& pos = greater ? lhs : rhs;
  ArithExpr& neg = greater ? rhs : lhs;
  if (neg.op == ArithExpr::Op::kConst && neg.value == 0.0) {
    p.expr = std::move(pos);
  } else if (pos.op == ArithExpr::Op::kConst && pos.value == 0.0) {
    p.expr = ArithExpr::unary(ArithExpr::Op::kNeg, std::move(neg));
  } else {
    p.expr = ArithExpr::binary(ArithExpr::Op::kSub, std::move(pos),
                               std::move(neg));
  }
  return p;
}

std::string Predicate::to_string() const {
  // The canonical form is printed, which re-parses to the same predicate.
  const bool strict =
      relation == Relation::kGreater || relation == Relation::kLess;
  return expr.to_string() + (strict ? " > 0" : " >= 0");
}

Formula Formula::atom(Predicate p) {
  Formula f;
  f.kind = FormulaKind::kPredicate;
  f.predicate = std::move(p);
  return f;
}

Formula Formula::negated_atom(Predicate p) {
  Formula f;
  f.kind = FormulaKind::kNegatedPredicate;
  f.predicate = std::move(p);
  return f;
}

Formula Formula::negation(Formula g) {
  Formula f;
  f.kind = FormulaKind::kNot;
  f.children.push_back(std::move(g));
  return f;
}

Formula Formula::conjunction(std::vector<Formula> fs) {
  return flatten(FormulaKind::kAnd, std::move(fs));
}

Formula Formula::disjunction(std::vector<Formula> fs) {
  return flatten(FormulaKind::kOr, std::move(fs));
}

Formula Formula::globally(Interval i, Formula g) {
  std::vector<Formula> c;
  c.push_back(std::move(g));
  return temporal(FormulaKind::kGlobally, i, std::move(c));
}

Formula Formula::eventually(Interval i, Formula g) {
  std::vector<Formula> c;
  c.push_back(std::move(g));
  return temporal(FormulaKind::kFinally, i, std::move(c));
}

Formula Formula::until(Interval i, Formula lhs, Formula rhs) {
  std::vector<Formula> c;
  c.push_back(std::move(lhs));
  c.push_back(std::move(rhs));
  return temporal(FormulaKind::kUntil, i, std::move(c));
}

Formula Formula::release(Interval i, Formula lhs, Formula rhs) {
  std::vector<Formula> c;
  c.push_back(std::move(lhs));
  c.push_back(std::move(rhs));
  return temporal(FormulaKind::kRelease, i, std::move(c));
}

bool Formula::is_temporal() const {
  return kind == FormulaKind::kGlobally || kind == FormulaKind::kFinally ||
         kind == FormulaKind::kUntil || kind == FormulaKind::kRelease;
}

std::string Formula::to_string() const {
  switch (kind) {
    case FormulaKind::kPredicate: return predicate.to_string();
    case FormulaKind::kNegatedPredicate:
      return "!(" + predicate.to_string() + ")";
    case FormulaKind::kNot: return "!" + wrap(children[0]);
    case FormulaKind::kAnd:
    case FormulaKind::kOr: {
      const char* sep = kind == FormulaKind::kAnd ? " & " : " | ";
      std::string s;
      for (std::size_t i = 0; i < children.size(); ++i) {
        if (i) s += sep;
        s += wrap(children[i]);
      }
      return s;
    }
    case FormulaKind::kGlobally:
      return "G" + interval_text(interval) + " " + wrap(children[0]);
    case FormulaKind::kFinally:
      return "F" + interval_text(interval) + " " + wrap(children[0]);
    case FormulaKind::kUntil:
      return wrap(children[0]) + " U" + interval_text(interval) + " " +
             wrap(children[1]);
    case FormulaKind::kRelease:
      // No surface syntax for release; print its definition via negation.
      return "!((!" + wrap(children[0]) + ") U" + interval_text(interval) +
             " (!" + wrap(children[1]) + "))";
  }
  return {};
}

Formula to_nnf(const Formula& f) { return nnf(f, false); }

bool is_nnf(const Formula& f) {
  if (f.kind == FormulaKind::kNot) return false;
  return std::all_of(f.children.begin(), f.children.end(),
                     [](const Formula& c) { return is_nnf(c); });
}

double formula_horizon(const Formula& f) {
  double child = 0.0;
  for (const Formula& c : f.children) child = std::max(child, formula_horizon(c));
  return f.is_temporal() ? f.interval.hi + child : child;
}

int aggregation_depth(const Formula& f) {
  switch (f.kind) {
    case FormulaKind::kPredicate:
    case FormulaKind::kNegatedPredicate: return 0;
    case FormulaKind::kNot: return aggregation_depth(f.children[0]);
    case FormulaKind::kAnd:
    case FormulaKind::kOr:
    case FormulaKind::kGlobally:
    case FormulaKind::kFinally: {
      int d = 0;
      for (const Formula& c : f.children) d = std::max(d, aggregation_depth(c));
      return d + 1;
    }
    case FormulaKind::kUntil:
    case FormulaKind::kRelease:
      // outer max, pairwise min, and a prefix min over the left operand
      return 2 + std::max(aggregation_depth(f.children[1]),
                          aggregation_depth(f.children[0]) + 1);
  }
  return 0;
}

int formula_size(const Formula& f) {
  int n = 1;
  for (const Formula& c : f.children) n += formula_size(c);
  return n;
}

}  // namespace falconn::stl
