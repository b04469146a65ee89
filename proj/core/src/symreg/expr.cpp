#include "falconn/symreg/expr.hpp"

#include <cctype>
#include <cmath>
#include <limits>

#include "common/numfmt.hpp"
#include "falconn/error.hpp"

namespace falconn::symreg {
namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

double apply_unary(Op op, double a) {
  switch (op) {
    case Op::kExp: return std::exp(a);
    case Op::kSin: return std::sin(a);
    case Op::kCos: return std::cos(a);
    default: return kNaN;
  }
}

double apply_binary(Op op, double a, double b) {
  switch (op) {
    case Op::kAdd: return a + b;
    case Op::kSub: return a - b;
    case Op::kMul: return a * b;
    case Op::kDiv: return std::abs(b) < kDivisionGuard ? kNaN : a / b;
    default: return kNaN;
  }
}

const char* op_text(Op op) {
  switch (op) {
    case Op::kExp: return "exp";
    case Op::kSin: return "sin";
    case Op::kCos: return "cos";
    case Op::kAdd: return "+";
    case Op::kSub: return "-";
    case Op::kMul: return "*";
    case Op::kDiv: return "/";
    default: return "?";
  }
}

std::string print(const Expr& e, std::size_t i) {
  const Node& n = e.nodes()[i];
  switch (arity(n.op)) {
    case 0:
      if (n.op == Op::kZ) return "z" + std::to_string(n.index + 1);
      if (n.op == Op::kU) return "u" + std::to_string(n.index + 1);
      {
        const std::string s = detail::format_shortest(n.value);
        return n.value < 0 || std::signbit(n.value) ? "(" + s + ")" : s;
      }
    case 1: return std::string(op_text(n.op)) + "(" + print(e, i + 1) + ")";
    default: {
      const std::size_t rhs = e.subtree_end(i + 1);
      return "(" + print(e, i + 1) + " " + op_text(n.op) + " " + print(e, rhs) + ")";
    }
  }
}

class ExprParser {
 public:
  explicit ExprParser(const std::string& s) : s_(s) {}

  Expr parse() {
    Expr e = sum();
    skip();
    if (pos_ != s_.size()) fail("unexpected trailing input");
    return e;
  }

 private:
  [[noreturn]] void fail(const std::string& msg) const { throw ParseError(msg, pos_); }

  void skip() {
    while (pos_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[pos_]))) ++pos_;
  }

  bool eat(char c) {
    skip();
    if (pos_ < s_.size() && s_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }

  Expr sum() {
    Expr e = product();
    while (true) {
      if (eat('+')) e = Expr::binary(Op::kAdd, e, product());
      else if (eat('-')) e = Expr::binary(Op::kSub, e, product());
      else return e;
    }
  }

  Expr product() {
    Expr e = factor();
    while (true) {
      if (eat('*')) e = Expr::binary(Op::kMul, e, factor());
      else if (eat('/')) e = Expr::binary(Op::kDiv, e, factor());
      else return e;
    }
  }

  Expr factor() {
    skip();
    if (pos_ >= s_.size()) fail("unexpected end of expression");
    const char c = s_[pos_];
    if (c == '-') {
      ++pos_;
      Expr inner = factor();
      if (inner.complexity() == 1 && inner.nodes()[0].op == Op::kConst) {
        return Expr::constant(-inner.nodes()[0].value);
      }
      return Expr::binary(Op::kMul, Expr::constant(-1.0), inner);
    }
    if (c == '(') {
      ++pos_;
      Expr e = sum();
      if (!eat(')')) fail("expected ')'");
      return e;
    }
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
      const char* begin = s_.c_str() + pos_;
      char* end = nullptr;
      const double v = std::strtod(begin, &end);
      if (end == begin) fail("bad number");
      pos_ += static_cast<std::size_t>(end - begin);
      return Expr::constant(v);
    }
    if (std::isalpha(static_cast<unsigned char>(c))) {
      const std::size_t start = pos_;
      while (pos_ < s_.size() && std::isalnum(static_cast<unsigned char>(s_[pos_]))) ++pos_;
      const std::string name = s_.substr(start, pos_ - start);
      if (name == "exp" || name == "sin" || name == "cos") {
        if (!eat('(')) fail("expected '(' after " + name);
        Expr arg = sum();
        if (!eat(')')) fail("expected ')'");
        const Op op = name == "exp" ? Op::kExp : name == "sin" ? Op::kSin : Op::kCos;
        return Expr::unary(op, arg);
      }
      if ((name[0] == 'z' || name[0] == 'u') && name.size() > 1 &&
          name.find_first_not_of("0123456789", 1) == std::string::npos) {
        const int idx = std::stoi(name.substr(1));
        if (idx < 1) {
          pos_ = start;
          fail("variable indices start at 1");
        }
        return name[0] == 'z' ? Expr::z(idx - 1) : Expr::u(idx - 1);
      }
      pos_ = start;
      fail("unknown name '" + name + "'");
    }
    fail(std::string("unexpected character '") + c + "'");
  }

  const std::string& s_;
  std::size_t pos_ = 0;
};

bool is_const(const Expr& e, double v) {
  return e.complexity() == 1 && e.nodes()[0].op == Op::kConst && e.nodes()[0].value == v;
}

bool is_const(const Expr& e) {
  return e.complexity() == 1 && e.nodes()[0].op == Op::kConst;
}

Expr fold_at(const Expr& e, std::size_t i) {
  const Node& n = e.nodes()[i];
  const int k = arity(n.op);
  if (k == 0) return Expr({n});
  if (k == 1) {
    Expr a = fold_at(e, i + 1);
    if (is_const(a)) {
      const double v = apply_unary(n.op, a.nodes()[0].value);
      if (std::isfinite(v)) return Expr::constant(v);
    }
    return Expr::unary(n.op, a);
  }
  Expr a = fold_at(e, i + 1);
  Expr b = fold_at(e, e.subtree_end(i + 1));
  if (is_const(a) && is_const(b)) {
    const double v = apply_binary(n.op, a.nodes()[0].value, b.nodes()[0].value);
    if (std::isfinite(v)) return Expr::constant(v);
  }
  switch (n.op) {
    case Op::kAdd:
      if (is_const(a, 0.0)) return b;
      if (is_const(b, 0.0)) return a;
      break;
    case Op::kSub:
      if (is_const(b, 0.0)) return a;
      break;
    case Op::kMul:
      if (is_const(a, 0.0) || is_const(b, 0.0)) return Expr::constant(0.0);
      if (is_const(a, 1.0)) return b;
      if (is_const(b, 1.0)) return a;
      break;
    case Op::kDiv:
      if (is_const(b, 1.0)) return a;
      if (is_const(a, 0.0) && !is_const(b, 0.0)) return Expr::constant(0.0);
      break;
    default: break;
  }
  return Expr::binary(n.op, a, b);
}

Expr diff_at(const Expr& e, std::size_t i, bool input, int index) {
  const Node& n = e.nodes()[i];
  switch (n.op) {
    case Op::kConst: return Expr::constant(0.0);
    case Op::kZ: return Expr::constant(!input && n.index == index ? 1.0 : 0.0);
    case Op::kU: return Expr::constant(input && n.index == index ? 1.0 : 0.0);
    default: break;
  }
  const Expr a = e.subtree(i + 1);
  const Expr da = diff_at(e, i + 1, input, index);
  switch (n.op) {
    case Op::kExp: return Expr::binary(Op::kMul, Expr::unary(Op::kExp, a), da);
    case Op::kSin: return Expr::binary(Op::kMul, Expr::unary(Op::kCos, a), da);
    case Op::kCos:
      return Expr::binary(Op::kMul,
                          Expr::binary(Op::kMul, Expr::constant(-1.0), Expr::unary(Op::kSin, a)),
                          da);
    default: break;
  }
  const std::size_t j = e.subtree_end(i + 1);
  const Expr b = e.subtree(j);
  const Expr db = diff_at(e, j, input, index);
  switch (n.op) {
    case Op::kAdd: return Expr::binary(Op::kAdd, da, db);
    case Op::kSub: return Expr::binary(Op::kSub, da, db);
    case Op::kMul:
      return Expr::binary(Op::kAdd, Expr::binary(Op::kMul, da, b), Expr::binary(Op::kMul, a, db));
    case Op::kDiv:
      return Expr::binary(
          Op::kDiv,
          Expr::binary(Op::kSub, Expr::binary(Op::kMul, da, b), Expr::binary(Op::kMul, a, db)),
          Expr::binary(Op::kMul, b, b));
    default: return Expr::constant(0.0);
  }
}

}  // namespace

int arity(Op op) {
  switch (op) {
    case Op::kConst:
    case Op::kZ:
    case Op::kU: return 0;
    case Op::kExp:
    case Op::kSin:
    case Op::kCos: return 1;
    default: return 2;
  }
}

Expr Expr::constant(double v) { return Expr({Node{Op::kConst, 0, v}}); }
Expr Expr::z(int index) { return Expr({Node{Op::kZ, index, 0.0}}); }
Expr Expr::u(int index) { return Expr({Node{Op::kU, index, 0.0}}); }

Expr Expr::unary(Op op, const Expr& a) {
  std::vector<Node> n;
  n.reserve(a.nodes_.size() + 1);
  n.push_back(Node{op, 0, 0.0});
  n.insert(n.end(), a.nodes_.begin(), a.nodes_.end());
  return Expr(std::move(n));
}

Expr Expr::binary(Op op, const Expr& a, const Expr& b) {
  std::vector<Node> n;
  n.reserve(a.nodes_.size() + b.nodes_.size() + 1);
  n.push_back(Node{op, 0, 0.0});
  n.insert(n.end(), a.nodes_.begin(), a.nodes_.end());
  n.insert(n.end(), b.nodes_.begin(), b.nodes_.end());
  return Expr(std::move(n));
}

std::size_t Expr::subtree_end(std::size_t i) const {
  int need = 1;
  while (need > 0) {
    need += arity(nodes_.at(i).op) - 1;
    ++i;
  }
  return i;
}

Expr Expr::subtree(std::size_t i) const {
  return Expr(std::vector<Node>(nodes_.begin() + static_cast<std::ptrdiff_t>(i),
                                nodes_.begin() + static_cast<std::ptrdiff_t>(subtree_end(i))));
}

Expr Expr::replaced(std::size_t i, const Expr& e) const {
  std::vector<Node> n(nodes_.begin(), nodes_.begin() + static_cast<std::ptrdiff_t>(i));
  n.insert(n.end(), e.nodes_.begin(), e.nodes_.end());
  n.insert(n.end(), nodes_.begin() + static_cast<std::ptrdiff_t>(subtree_end(i)), nodes_.end());
  return Expr(std::move(n));
}

double Expr::eval(const double* z, const double* u) const {
  double stack[64];
  std::vector<double> heap;
  double* st = stack;
  if (nodes_.size() > 64) {
    heap.resize(nodes_.size());
    st = heap.data();
  }
  int top = 0;
  for (std::size_t k = nodes_.size(); k-- > 0;) {
    const Node& n = nodes_[k];
    switch (n.op) {
      case Op::kConst: st[top++] = n.value; break;
      case Op::kZ: st[top++] = z[n.index]; break;
      case Op::kU: st[top++] = u[n.index]; break;
      case Op::kExp:
      case Op::kSin:
      case Op::kCos: st[top - 1] = apply_unary(n.op, st[top - 1]); break;
      default: {
        const double a = st[--top];
        st[top - 1] = apply_binary(n.op, a, st[top - 1]);
      }
    }
  }
  const double v = top == 1 ? st[0] : kNaN;
  return std::isfinite(v) ? v : kNaN;
}

Eigen::ArrayXd Expr::eval_batch(const Eigen::MatrixXd& Z, const Eigen::MatrixXd& U) const {
  std::vector<Eigen::ArrayXd> st;
  st.reserve(nodes_.size());
  const Eigen::Index n = Z.rows();
  for (std::size_t k = nodes_.size(); k-- > 0;) {
    const Node& nd = nodes_[k];
    switch (nd.op) {
      case Op::kConst: st.push_back(Eigen::ArrayXd::Constant(n, nd.value)); break;
      case Op::kZ: st.push_back(Z.col(nd.index).array()); break;
      case Op::kU: st.push_back(U.col(nd.index).array()); break;
      case Op::kExp: st.back() = st.back().exp(); break;
      case Op::kSin: st.back() = st.back().sin(); break;
      case Op::kCos: st.back() = st.back().cos(); break;
      default: {
        Eigen::ArrayXd a = std::move(st.back());
        st.pop_back();
        Eigen::ArrayXd& b = st.back();
        switch (nd.op) {
          case Op::kAdd: b = a + b; break;
          case Op::kSub: b = a - b; break;
          case Op::kMul: b = a * b; break;
          default:
            b = (b.abs() < kDivisionGuard).select(Eigen::ArrayXd::Constant(n, kNaN), a / b);
        }
      }
    }
  }
  Eigen::ArrayXd out = std::move(st.back());
  return out.isFinite().select(out, kNaN);
}

bool Expr::uses_input() const {
  for (const Node& n : nodes_) {
    if (n.op == Op::kU) return true;
  }
  return false;
}

int Expr::max_z_index() const {
  int m = -1;
  for (const Node& n : nodes_) {
    if (n.op == Op::kZ) m = std::max(m, n.index);
  }
  return m;
}

int Expr::max_u_index() const {
  int m = -1;
  for (const Node& n : nodes_) {
    if (n.op == Op::kU) m = std::max(m, n.index);
  }
  return m;
}

std::string Expr::to_string() const { return nodes_.empty() ? "" : print(*this, 0); }

Expr parse_expr(const std::string& text) { return ExprParser(text).parse(); }

double eval_expr(const Expr& e, const Eigen::VectorXd& z, const Eigen::VectorXd& u) {
  if (e.max_z_index() >= z.size() || e.max_u_index() >= u.size()) {
    throw Error("expression references a variable beyond the given state/input");
  }
  return e.eval(z, u);
}

Expr fold_constants(const Expr& e) { return e.empty() ? e : fold_at(e, 0); }

Expr differentiate(const Expr& e, bool input, int index) {
  return fold_constants(diff_at(e, 0, input, index));
}

ExprJacobian expr_jacobian(const Expr& e, int num_z, int num_u) {
  ExprJacobian j;
  for (int i = 0; i < num_z; ++i) j.dz.push_back(differentiate(e, false, i));
  for (int i = 0; i < num_u; ++i) j.du.push_back(differentiate(e, true, i));
  return j;
}

}  // namespace falconn::symreg
