#include "covprob/errors.hpp"

#include <cctype>

#include "dsl_internal.hpp"

namespace covprob::dsl {

namespace {

bool ident_start(char c) { return std::isalpha(static_cast<unsigned char>(c)) || c == '_'; }
bool ident_char(char c) { return ident_start(c) || std::isdigit(static_cast<unsigned char>(c)); }

}  // namespace

std::vector<Token> lex(const std::string& text, const std::string& filename) {
  std::vector<Token> out;
  size_t i = 0;
  int line = 1;
  int col = 1;

  auto advance = [&](size_t n) {
    for (size_t k = 0; k < n; ++k) {
      if (text[i] == '\n') {
        ++line;
        col = 1;
      } else {
        ++col;
      }
      ++i;
    }
  };
  auto span_from = [&](int l, int c0) {
    return SourceSpan{filename, l, c0, col};
  };
  auto push = [&](Tok kind, int l, int c0, std::string t = "") {
    Token tok;
    tok.kind = kind;
    tok.text = std::move(t);
    tok.span = span_from(l, c0);
    out.push_back(std::move(tok));
  };

  while (i < text.size()) {
    char c = text[i];
    if (c == ' ' || c == '\t' || c == '\r' || c == '\n') {
      advance(1);
      continue;
    }
    if (c == '/' && i + 1 < text.size() && text[i + 1] == '/') {
      while (i < text.size() && text[i] != '\n') advance(1);
      continue;
    }
    if (c == '/' && i + 1 < text.size() && text[i + 1] == '*') {
      int l = line, c0 = col;
      advance(2);
      while (i + 1 < text.size() && !(text[i] == '*' && text[i + 1] == '/')) advance(1);
      if (i + 1 >= text.size())
        throw ParseError("SyntaxError", "unterminated comment", SourceSpan{filename, l, c0, c0});
      advance(2);
      continue;
    }

    int l = line, c0 = col;
    if (ident_start(c)) {
      size_t start = i;
      while (i < text.size() && ident_char(text[i])) advance(1);
      push(Tok::Ident, l, c0, text.substr(start, i - start));
      continue;
    }
    if (std::isdigit(static_cast<unsigned char>(c))) {
      size_t start = i;
      while (i < text.size() && std::isdigit(static_cast<unsigned char>(text[i]))) advance(1);
      bool decimal = false;
      if (i + 1 < text.size() && text[i] == '.' &&
          std::isdigit(static_cast<unsigned char>(text[i + 1]))) {
        decimal = true;
        advance(1);
        while (i < text.size() && std::isdigit(static_cast<unsigned char>(text[i]))) advance(1);
      }
      std::string digits = text.substr(start, i - start);
      if (decimal) {
        push(Tok::DecimalLit, l, c0, digits);
      } else {
        Token tok;
        tok.kind = Tok::IntLit;
        tok.text = digits;
        tok.value = Int(digits);
        tok.span = span_from(l, c0);
        out.push_back(std::move(tok));
      }
      continue;
    }

    auto two = [&](char next) { return i + 1 < text.size() && text[i + 1] == next; };
    switch (c) {
      case '(':
        advance(1);
        push(Tok::LParen, l, c0);
        break;
      case ')':
        advance(1);
        push(Tok::RParen, l, c0);
        break;
      case '{':
        advance(1);
        push(Tok::LBrace, l, c0);
        break;
      case '}':
        advance(1);
        push(Tok::RBrace, l, c0);
        break;
      case ',':
        advance(1);
        push(Tok::Comma, l, c0);
        break;
      case ';':
        advance(1);
        push(Tok::Semi, l, c0);
        break;
      case ':':
        advance(1);
        push(Tok::Colon, l, c0);
        break;
      case '.':
        advance(1);
        push(Tok::Dot, l, c0);
        break;
      case '~':
        advance(1);
        push(Tok::Tilde, l, c0);
        break;
      case '+':
        advance(1);
        push(Tok::Plus, l, c0);
        break;
      case '-':
        if (two('>')) {
          advance(2);
          push(Tok::Arrow, l, c0);
        } else {
          advance(1);
          push(Tok::Minus, l, c0);
        }
        break;
      case '*':
        advance(1);
        push(Tok::Star, l, c0);
        break;
      case '/':
        advance(1);
        push(Tok::Slash, l, c0);
        break;
      case '%':
        advance(1);
        push(Tok::Percent, l, c0);
        break;
      case '!':
        if (two('=')) {
          advance(2);
          push(Tok::NotEq, l, c0);
        } else {
          advance(1);
          push(Tok::Bang, l, c0);
        }
        break;
      case '&':
        advance(two('&') ? 2 : 1);
        push(Tok::AndAnd, l, c0);
        break;
      case '|':
        advance(two('|') ? 2 : 1);
        push(Tok::OrOr, l, c0);
        break;
      case '=':
        if (two('=')) {
          advance(2);
          push(Tok::EqEq, l, c0);
        } else {
          advance(1);
          push(Tok::Assign, l, c0);
        }
        break;
      case '<':
        if (two('=')) {
          advance(2);
          push(Tok::Le, l, c0);
        } else {
          advance(1);
          push(Tok::Lt, l, c0);
        }
        break;
      case '>':
        if (two('=')) {
          advance(2);
          push(Tok::Ge, l, c0);
        } else {
          advance(1);
          push(Tok::Gt, l, c0);
        }
        break;
      default:
        throw ParseError("SyntaxError", std::string("unexpected character '") + c + "'",
                         SourceSpan{filename, l, c0, c0 + 1});
    }
  }

  Token end;
  end.kind = Tok::End;
  end.span = SourceSpan{filename, line, col, col};
  out.push_back(std::move(end));
  return out;
}

const char* tok_name(Tok kind) {
  switch (kind) {
    case Tok::Ident:
      return "identifier";
    case Tok::IntLit:
      return "integer";
    case Tok::DecimalLit:
      return "decimal";
    case Tok::LParen:
      return "'('";
    case Tok::RParen:
      return "')'";
    case Tok::LBrace:
      return "'{'";
    case Tok::RBrace:
      return "'}'";
    case Tok::Comma:
      return "','";
    case Tok::Semi:
      return "';'";
    case Tok::Colon:
      return "':'";
    case Tok::Dot:
      return "'.'";
    case Tok::Assign:
      return "'='";
    case Tok::Tilde:
      return "'~'";
    case Tok::Plus:
      return "'+'";
    case Tok::Minus:
      return "'-'";
    case Tok::Star:
      return "'*'";
    case Tok::Slash:
      return "'/'";
    case Tok::Percent:
      return "'%'";
    case Tok::Bang:
      return "'!'";
    case Tok::AndAnd:
      return "'&'";
    case Tok::OrOr:
      return "'|'";
    case Tok::Arrow:
      return "'->'";
    case Tok::EqEq:
      return "'=='";
    case Tok::NotEq:
      return "'!='";
    case Tok::Lt:
      return "'<'";
    case Tok::Le:
      return "'<='";
    case Tok::Gt:
      return "'>'";
    case Tok::Ge:
      return "'>='";
    case Tok::End:
      return "end of input";
  }
  return "?";
}

}  // namespace covprob::dsl
