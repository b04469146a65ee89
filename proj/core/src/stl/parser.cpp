#include "falconn/stl/parser.hpp"

#include <cctype>
#include <cstdlib>
#include <string>
#include <vector>

#include "falconn/error.hpp"

namespace falconn::stl {
namespace {

enum class Tok {
  kNumber,
  kName,
  kGlobally,  // 'G' immediately followed by '['
  kFinally,
  kUntil,
  kAbs,
  kLParen,
  kRParen,
  kLBracket,
  kRBracket,
  kComma,
  kPlus,
  kMinus,
  kStar,
  kSlash,
  kNot,
  kAnd,
  kOr,
  kImplies,
  kGreater,
  kGreaterEqual,
  kLess,
  kLessEqual,
  kEnd,
};

struct Token {
  Tok kind;
  std::size_t pos;
  std::string text;
  double number = 0.0;
};

bool is_relop(Tok t) {
  return t == Tok::kGreater || t == Tok::kGreaterEqual || t == Tok::kLess ||
         t == Tok::kLessEqual;
}

std::vector<Token> tokenize(std::string_view s) {
  std::vector<Token> out;
  std::size_t i = 0;
  auto peek_nonspace = [&](std::size_t j) {
    while (j < s.size() && std::isspace(static_cast<unsigned char>(s[j]))) ++j;
    return j < s.size() ? s[j] : '\0';
  };
  while (i < s.size()) {
    const char c = s[i];
    if (std::isspace(static_cast<unsigned char>(c))) {
      ++i;
      continue;
    }
    const std::size_t start = i;
    if (std::isdigit(static_cast<unsigned char>(c)) ||
        (c == '.' && i + 1 < s.size() &&
         std::isdigit(static_cast<unsigned char>(s[i + 1])))) {
      const std::string rest(s.substr(i));
      char* end = nullptr;
      const double v = std::strtod(rest.c_str(), &end);
      const std::size_t len = static_cast<std::size_t>(end - rest.c_str());
      out.push_back({Tok::kNumber, start, rest.substr(0, len), v});
      i += len;
      continue;
    }
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      while (i < s.size() && (std::isalnum(static_cast<unsigned char>(s[i])) ||
                              s[i] == '_')) {
        ++i;
      }
      std::string name(s.substr(start, i - start));
      const bool bracket = peek_nonspace(i) == '[';
      Tok kind = Tok::kName;
      if (bracket && name == "G") kind = Tok::kGlobally;
      else if (bracket && name == "F") kind = Tok::kFinally;
      else if (bracket && name == "U") kind = Tok::kUntil;
      else if (bracket) throw ParseError("unknown operator '" + name + "'", start);
      else if (name == "abs") kind = Tok::kAbs;
      out.push_back({kind, start, std::move(name)});
      continue;
    }
    auto two = [&](char a, char b) {
      return c == a && i + 1 < s.size() && s[i + 1] == b;
    };
    if (two('-', '>')) {
      out.push_back({Tok::kImplies, start, "->"});
      i += 2;
    } else if (two('>', '=')) {
      out.push_back({Tok::kGreaterEqual, start, ">="});
      i += 2;
    } else if (two('<', '=')) {
      out.push_back({Tok::kLessEqual, start, "<="});
      i += 2;
    } else if (two('&', '&')) {
      out.push_back({Tok::kAnd, start, "&&"});
      i += 2;
    } else if (two('|', '|')) {
      out.push_back({Tok::kOr, start, "||"});
      i += 2;
    } else {
      Tok kind;
      switch (c) {
        case '(': kind = Tok::kLParen; break;
        case ')': kind = Tok::kRParen; break;
        case '[': kind = Tok::kLBracket; break;
        case ']': kind = Tok::kRBracket; break;
        case ',': kind = Tok::kComma; break;
        case '+': kind = Tok::kPlus; break;
        case '-': kind = Tok::kMinus; break;
        case '*': kind = Tok::kStar; break;
        case '/': kind = Tok::kSlash; break;
        case '!': kind = Tok::kNot; break;
        case '&': kind = Tok::kAnd; break;
        case '|': kind = Tok::kOr; break;
        case '>': kind = Tok::kGreater; break;
        case '<': kind = Tok::kLess; break;
        default:
          throw ParseError(std::string("unexpected character '") + c + "'",
                           start);
      }
      out.push_back({kind, start, std::string(1, c)});
      ++i;
    }
  }
  out.push_back({Tok::kEnd, s.size(), "<end>"});
  return out;
}

class Parser {
 public:
  explicit Parser(std::string_view text) : tokens_(tokenize(text)) {}

  Formula parse_formula_text() {
    Formula f = formula();
    expect(Tok::kEnd, "end of input");
    return to_nnf(f);
  }

  ArithExpr parse_arith_text() {
    ArithExpr e = arith();
    expect(Tok::kEnd, "end of input");
    return e;
  }

 private:
  const Token& peek() const { return tokens_[pos_]; }
  const Token& advance() { return tokens_[pos_++]; }
  bool accept(Tok k) {
    if (peek().kind != k) return false;
    ++pos_;
    return true;
  }
  const Token& expect(Tok k, const char* what) {
    if (peek().kind != k) {
      throw ParseError(std::string("expected ") + what + ", found '" +
                           peek().text + "'",
                       peek().pos);
    }
    return advance();
  }

  Formula formula() {
    Formula lhs = disjunction();
    if (accept(Tok::kImplies)) {
      Formula rhs = formula();
      std::vector<Formula> parts;
      parts.push_back(Formula::negation(std::move(lhs)));
      parts.push_back(std::move(rhs));
      return Formula::disjunction(std::move(parts));
    }
    return lhs;
  }

  Formula disjunction() {
    std::vector<Formula> parts;
    parts.push_back(conjunction());
    while (accept(Tok::kOr)) parts.push_back(conjunction());
    return Formula::disjunction(std::move(parts));
  }

  Formula conjunction() {
    std::vector<Formula> parts;
    parts.push_back(until());
    while (accept(Tok::kAnd)) parts.push_back(until());
    return Formula::conjunction(std::move(parts));
  }

  Formula until() {
    Formula lhs = unary();
    if (accept(Tok::kUntil)) {
      const Interval i = interval();
      Formula rhs = unary();
      return Formula::until(i, std::move(lhs), std::move(rhs));
    }
    return lhs;
  }

  Formula unary() {
    const Token& t = peek();
    switch (t.kind) {
      case Tok::kNot:
        advance();
        return Formula::negation(unary());
      case Tok::kGlobally: {
        advance();
        const Interval i = interval();
        return Formula::globally(i, unary());
      }
      case Tok::kFinally: {
        advance();
        const Interval i = interval();
        return Formula::eventually(i, unary());
      }
      case Tok::kLParen:
        if (group_is_formula()) {
          advance();
          Formula f = formula();
          expect(Tok::kRParen, "')'");
          return f;
        }
        return comparison();
      default:
        return comparison();
    }
  }

  // Decides whether the parenthesized group starting at the current '(' holds
  // a formula (logical/temporal/relational content at its top level) or an
  // arithmetic sub-expression that belongs to a comparison.
  bool group_is_formula() const {
    int depth = 0;
    for (std::size_t j = pos_; j < tokens_.size(); ++j) {
      const Tok k = tokens_[j].kind;
      if (k == Tok::kLParen) {
        ++depth;
      } else if (k == Tok::kRParen) {
        if (--depth == 0) return false;
      } else if (depth == 1 &&
                 (is_relop(k) || k == Tok::kAnd || k == Tok::kOr ||
                  k == Tok::kImplies || k == Tok::kNot ||
                  k == Tok::kGlobally || k == Tok::kFinally ||
                  k == Tok::kUntil)) {
        return true;
      } else if (k == Tok::kEnd) {
        return false;
      }
    }
    return false;
  }

  Interval interval() {
    const Token& open = expect(Tok::kLBracket, "'['");
    const double lo = signed_number();
    expect(Tok::kComma, "','");
    const double hi = signed_number();
    expect(Tok::kRBracket, "']'");
    if (lo < 0.0 || hi < 0.0) {
      throw ParseError("negative interval bound", open.pos);
    }
    if (hi < lo) throw ParseError("inverted interval bounds", open.pos);
    return {lo, hi};
  }

  double signed_number() {
    const bool neg = accept(Tok::kMinus);
    const double v = expect(Tok::kNumber, "number").number;
    return neg ? -v : v;
  }

  static Relation relation_of(Tok k) {
    switch (k) {
      case Tok::kGreater: return Relation::kGreater;
      case Tok::kGreaterEqual: return Relation::kGreaterEqual;
      case Tok::kLess: return Relation::kLess;
      default: return Relation::kLessEqual;
    }
  }

  Formula comparison() {
    ArithExpr lhs = arith();
    if (!is_relop(peek().kind)) {
      throw ParseError("expected comparison operator, found '" + peek().text +
                           "'",
                       peek().pos);
    }
    std::vector<Formula> parts;
    while (is_relop(peek().kind)) {
      const Relation rel = relation_of(advance().kind);
      ArithExpr rhs = arith();
      parts.push_back(Formula::atom(Predicate::compare(lhs, rel, rhs)));
      lhs = std::move(rhs);
    }
    return Formula::conjunction(std::move(parts));
  }

  ArithExpr arith() {
    ArithExpr lhs = term();
    while (peek().kind == Tok::kPlus || peek().kind == Tok::kMinus) {
      const auto op = advance().kind == Tok::kPlus ? ArithExpr::Op::kAdd
                                                   : ArithExpr::Op::kSub;
      lhs = ArithExpr::binary(op, std::move(lhs), term());
    }
    return lhs;
  }

  ArithExpr term() {
    ArithExpr lhs = factor();
    while (peek().kind == Tok::kStar || peek().kind == Tok::kSlash) {
      const auto op = advance().kind == Tok::kStar ? ArithExpr::Op::kMul
                                                   : ArithExpr::Op::kDiv;
      lhs = ArithExpr::binary(op, std::move(lhs), factor());
    }
    return lhs;
  }

  ArithExpr factor() {
    const Token& t = peek();
    switch (t.kind) {
      case Tok::kMinus: {
        advance();
        if (peek().kind == Tok::kNumber) {
          return ArithExpr::constant(-advance().number);
        }
        return ArithExpr::unary(ArithExpr::Op::kNeg, factor());
      }
      case Tok::kNumber: return ArithExpr::constant(advance().number);
      case Tok::kName: {
        const Token& name = advance();
        if (peek().kind == Tok::kLParen) {
          throw ParseError("unknown operator '" + name.text + "'", name.pos);
        }
        return ArithExpr::signal(name.text);
      }
      case Tok::kAbs: {
        advance();
        expect(Tok::kLParen, "'(' after abs");
        ArithExpr inner = arith();
        expect(Tok::kRParen, "')'");
        return ArithExpr::unary(ArithExpr::Op::kAbs, std::move(inner));
      }
      case Tok::kLParen: {
        advance();
        ArithExpr inner = arith();
        expect(Tok::kRParen, "')'");
        return inner;
      }
      default:
        throw ParseError("unexpected '" + t.text + "'", t.pos);
    }
  }

  std::vector<Token> tokens_;
  std::size_t pos_ = 0;
};

}  // namespace

Formula parse_formula(std::string_view text) {
  return Parser(text).parse_formula_text();
}

ArithExpr parse_arith(std::string_view text) {
  return Parser(text).parse_arith_text();
}

}  // namespace falconn::stl
