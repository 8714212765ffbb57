#pragma once

#include <string>
#include <vector>

#include "covprob/errors.hpp"
#include "covprob/rational.hpp"
#include "covprob/source_span.hpp"

namespace covprob::dsl {

enum class Tok {
  Ident,
  IntLit,
  DecimalLit,
  LParen,
  RParen,
  LBrace,
  RBrace,
  Comma,
  Semi,
  Colon,
  Dot,
  Assign,   // =
  Tilde,    // ~
  Plus,
  Minus,
  Star,
  Slash,
  Percent,
  Bang,     // !
  AndAnd,   // && or &
  OrOr,     // || or |
  Arrow,    // ->
  EqEq,
  NotEq,
  Lt,
  Le,
  Gt,
  Ge,
  End,
};

struct Token {
  Tok kind = Tok::End;
  std::string text;
  Int value;  // IntLit
  SourceSpan span;
};

// Tokenize the whole input. Skips whitespace and // and /* */ comments.
// Throws ParseError (SyntaxError) on unknown characters.
std::vector<Token> lex(const std::string& text, const std::string& filename);

const char* tok_name(Tok kind);

}  // namespace covprob::dsl
