#pragma once

#include <string_view>

#include "falconn/stl/formula.hpp"

namespace falconn::stl {

/// Parses a specification string into an NNF formula.
///
/// Grammar (lowest to highest precedence):
///
///   formula     := disjunction [ '->' formula ]
///   disjunction := conjunction { '|' conjunction }
///   conjunction := until { '&' until }
///   until       := unary [ 'U' interval unary ]
///   unary       := '!' unary | 'G' interval unary | 'F' interval unary
///                | '(' formula ')' | comparison
///   comparison  := arith relop arith { relop arith }
///   arith       := term { ('+' | '-') term }
///   term        := factor { ('*' | '/') factor }
///   factor      := '-' factor | number | name | 'abs' '(' arith ')'
///                | '(' arith ')'
///   interval    := '[' number ',' number ']'
///   relop       := '>' | '>=' | '<' | '<='
///
/// `p -> q` desugars to `!p | q`. Chained comparisons `a < x < b` become a
/// conjunction of the pairwise comparisons. `&&` and `||` are accepted as
/// aliases. Throws ParseError on malformed input.
Formula parse_formula(std::string_view text);

/// Parses an arithmetic expression only (the `arith` rule).
ArithExpr parse_arith(std::string_view text);

}  // namespace falconn::stl
