// Copyright 2026 The InferDB Authors
//
// Licensed under the Apache License v2.0.
// See https://www.apache.org/licenses/LICENSE-2.0 for license information.
// SPDX-License-Identifier: Apache-2.0

#include "inferdb/parser.hpp"

#include <cctype>
#include <charconv>
#include <cstdlib>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "inferdb/errors.hpp"

namespace inferdb {

namespace {

enum class TokKind { Ident, Int, Float, String, Punct, End };

struct Token {
  TokKind kind = TokKind::End;
  std::string text;      // ident name, punct spelling, or string payload
  int64_t int_value = 0;
  double float_value = 0.0;
  int line = 1;
  int col = 1;
  int index = 0;  // 1-based token position, used in syntax errors
};

std::string lower(std::string_view s) {
  std::string out(s);
  for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

[[noreturn]] void syntax_error(const Token& tok, const std::string& expected) {
  std::ostringstream os;
  os << "syntax error at token " << tok.index << " (line " << tok.line << " column " << tok.col
     << "): expected " << expected;
  if (tok.kind == TokKind::End) {
    os << ", found end of input";
  } else {
    os << ", found '" << tok.text << "'";
  }
  raise(ErrorKind::ParseError, os.str());
}

std::vector<Token> lex(const std::string& text) {
  std::vector<Token> toks;
  int line = 1;
  int col = 1;
  size_t i = 0;
  auto advance = [&](size_t k) {
    for (size_t j = 0; j < k; ++j) {
      if (i < text.size() && text[i] == '\n') {
        ++line;
        col = 1;
      } else {
        ++col;
      }
      ++i;
    }
  };
  while (i < text.size()) {
    char c = text[i];
    if (std::isspace(static_cast<unsigned char>(c))) {
      advance(1);
      continue;
    }
    Token tok;
    tok.line = line;
    tok.col = col;
    tok.index = static_cast<int>(toks.size()) + 1;
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      size_t j = i;
      while (j < text.size() &&
             (std::isalnum(static_cast<unsigned char>(text[j])) || text[j] == '_')) {
        ++j;
      }
      tok.kind = TokKind::Ident;
      tok.text = text.substr(i, j - i);
      advance(j - i);
    } else if (std::isdigit(static_cast<unsigned char>(c))) {
      size_t j = i;
      bool is_float = false;
      while (j < text.size() && std::isdigit(static_cast<unsigned char>(text[j]))) ++j;
      if (j < text.size() && text[j] == '.' && j + 1 < text.size() &&
          std::isdigit(static_cast<unsigned char>(text[j + 1]))) {
        is_float = true;
        ++j;
        while (j < text.size() && std::isdigit(static_cast<unsigned char>(text[j]))) ++j;
      }
      if (j < text.size() && (text[j] == 'e' || text[j] == 'E')) {
        size_t k = j + 1;
        if (k < text.size() && (text[k] == '+' || text[k] == '-')) ++k;
        if (k < text.size() && std::isdigit(static_cast<unsigned char>(text[k]))) {
          is_float = true;
          ++k;
          while (k < text.size() && std::isdigit(static_cast<unsigned char>(text[k]))) ++k;
          j = k;
        }
      }
      std::string num = text.substr(i, j - i);
      if (is_float) {
        tok.kind = TokKind::Float;
        tok.float_value = std::strtod(num.c_str(), nullptr);
      } else {
        tok.kind = TokKind::Int;
        auto [p, ec] = std::from_chars(num.data(), num.data() + num.size(), tok.int_value);
        if (ec != std::errc()) {
          raise(ErrorKind::ParseError, "line " + std::to_string(line) + " column " +
                                           std::to_string(col) + ": integer literal '" + num +
                                           "' is out of range");
        }
      }
      tok.text = std::move(num);
      advance(j - i);
    } else if (c == '\'') {
      std::string payload;
      size_t j = i + 1;
      bool closed = false;
      while (j < text.size()) {
        if (text[j] == '\'') {
          if (j + 1 < text.size() && text[j + 1] == '\'') {
            payload.push_back('\'');
            j += 2;
            continue;
          }
          closed = true;
          ++j;
          break;
        }
        payload.push_back(text[j]);
        ++j;
      }
      if (!closed) {
        raise(ErrorKind::ParseError, "line " + std::to_string(line) + " column " +
                                         std::to_string(col) + ": unterminated string literal");
      }
      tok.kind = TokKind::String;
      tok.text = std::move(payload);
      advance(j - i);
    } else {
      static const char* puncts[] = {"!=", "<=", ">=", "=", "<", ">", "(", ")", ",", ".", "*", "-"};
      const char* hit = nullptr;
      for (const char* p : puncts) {
        size_t len = std::char_traits<char>::length(p);
        if (text.compare(i, len, p) == 0) {
          hit = p;
          break;
        }
      }
      if (hit == nullptr) {
        raise(ErrorKind::ParseError, "line " + std::to_string(line) + " column " +
                                         std::to_string(col) + ": unexpected character '" +
                                         std::string(1, c) + "'");
      }
      tok.kind = TokKind::Punct;
      tok.text = hit;
      advance(tok.text.size());
    }
    toks.push_back(std::move(tok));
  }
  Token end;
  end.kind = TokKind::End;
  end.line = line;
  end.col = col;
  end.index = static_cast<int>(toks.size()) + 1;
  toks.push_back(std::move(end));
  return toks;
}

struct Parser {
  std::vector<Token> toks;
  size_t pos = 0;

  const Token& peek(size_t ahead = 0) const {
    size_t p = pos + ahead;
    return p < toks.size() ? toks[p] : toks.back();
  }
  const Token& advance() { return toks[pos++]; }

  bool at_keyword(std::string_view kw) const {
    const Token& t = peek();
    return t.kind == TokKind::Ident && lower(t.text) == kw;
  }
  void expect_keyword(std::string_view kw) {
    if (!at_keyword(kw)) syntax_error(peek(), "'" + std::string(kw) + "'");
    advance();
  }
  bool at_punct(std::string_view p) const {
    const Token& t = peek();
    return t.kind == TokKind::Punct && t.text == p;
  }
  void expect_punct(std::string_view p) {
    if (!at_punct(p)) syntax_error(peek(), "'" + std::string(p) + "'");
    advance();
  }
  std::string expect_ident(const std::string& what) {
    const Token& t = peek();
    if (t.kind != TokKind::Ident) syntax_error(t, what);
    advance();
    return t.text;
  }

  ColumnRef parse_column_ref() {
    ColumnRef ref;
    ref.column = expect_ident("a column name");
    if (at_punct(".")) {
      advance();
      ref.table = std::move(ref.column);
      ref.column = expect_ident("a column name after '.'");
    }
    return ref;
  }

  void parse_predict_call_args() {
    expect_punct("(");
    expect_punct("*");
    expect_punct(")");
  }

  std::vector<SelectItem> parse_select_list() {
    std::vector<SelectItem> items;
    const Token& t = peek();
    if (t.kind != TokKind::Ident) {
      syntax_error(t, "count(*), a predict call, or a column list");
    }
    if (lower(t.text) == "count") {
      advance();
      expect_punct("(");
      expect_punct("*");
      expect_punct(")");
      SelectItem item;
      item.kind = SelectItem::Kind::CountStar;
      items.push_back(std::move(item));
      return items;
    }
    if (peek(1).kind == TokKind::Punct && peek(1).text == "." &&
        peek(2).kind == TokKind::Ident && lower(peek(2).text) == "predict") {
      SelectItem item;
      item.kind = SelectItem::Kind::Predict;
      item.model = advance().text;
      advance();  // '.'
      advance();  // predict
      parse_predict_call_args();
      items.push_back(std::move(item));
      return items;
    }
    while (true) {
      SelectItem item;
      item.kind = SelectItem::Kind::Column;
      item.column = parse_column_ref();
      items.push_back(std::move(item));
      if (!at_punct(",")) break;
      // A comma also separates FROM tables; stop at the keyword boundary.
      if (peek(1).kind == TokKind::Ident && lower(peek(1).text) == "from") break;
      advance();
    }
    return items;
  }

  Operand parse_operand() {
    const Token& t = peek();
    switch (t.kind) {
      case TokKind::Int: {
        Operand op;
        op.kind = Operand::Kind::IntLit;
        op.int_value = t.int_value;
        advance();
        return op;
      }
      case TokKind::Float: {
        Operand op;
        op.kind = Operand::Kind::FloatLit;
        op.float_value = t.float_value;
        advance();
        return op;
      }
      case TokKind::String: {
        Operand op;
        op.kind = Operand::Kind::StringLit;
        op.string_value = t.text;
        advance();
        return op;
      }
      case TokKind::Punct:
        if (t.text == "-") {
          advance();
          const Token& num = peek();
          if (num.kind == TokKind::Int) {
            Operand op;
            op.kind = Operand::Kind::IntLit;
            op.int_value = -num.int_value;
            advance();
            return op;
          }
          if (num.kind == TokKind::Float) {
            Operand op;
            op.kind = Operand::Kind::FloatLit;
            op.float_value = -num.float_value;
            advance();
            return op;
          }
          syntax_error(num, "a number after '-'");
        }
        syntax_error(t, "a column, literal, or predict call");
      case TokKind::Ident: {
        std::string word = lower(t.text);
        if (word == "true" || word == "false") {
          Operand op;
          op.kind = Operand::Kind::BoolLit;
          op.bool_value = word == "true";
          advance();
          return op;
        }
        if (peek(1).kind == TokKind::Punct && peek(1).text == "." &&
            peek(2).kind == TokKind::Ident && lower(peek(2).text) == "predict") {
          Operand op;
          op.kind = Operand::Kind::Predict;
          op.model = advance().text;
          advance();  // '.'
          advance();  // predict
          parse_predict_call_args();
          return op;
        }
        Operand op;
        op.kind = Operand::Kind::Column;
        op.column = parse_column_ref();
        return op;
      }
      case TokKind::End:
        syntax_error(t, "a column, literal, or predict call");
    }
    syntax_error(t, "a column, literal, or predict call");
  }

  CompareOp parse_op() {
    const Token& t = peek();
    if (t.kind != TokKind::Punct) syntax_error(t, "a comparison operator");
    CompareOp op;
    if (t.text == "=") {
      op = CompareOp::Eq;
    } else if (t.text == "!=") {
      op = CompareOp::Ne;
    } else if (t.text == "<") {
      op = CompareOp::Lt;
    } else if (t.text == "<=") {
      op = CompareOp::Le;
    } else if (t.text == ">") {
      op = CompareOp::Gt;
    } else if (t.text == ">=") {
      op = CompareOp::Ge;
    } else {
      syntax_error(t, "a comparison operator");
    }
    advance();
    return op;
  }

  QueryAst parse() {
    if (at_keyword("begin") || at_keyword("commit")) {
      raise(ErrorKind::Unsupported, "transactions are unsupported; only SELECT is accepted");
    }
    QueryAst ast;
    expect_keyword("select");
    ast.select = parse_select_list();
    expect_keyword("from");
    ast.tables.push_back(expect_ident("a table name"));
    if (at_punct(",")) {
      advance();
      ast.tables.push_back(expect_ident("a table name"));
    }
    if (at_keyword("where")) {
      advance();
      while (true) {
        Comparison cmp;
        cmp.lhs = parse_operand();
        cmp.op = parse_op();
        cmp.rhs = parse_operand();
        ast.where.push_back(std::move(cmp));
        if (!at_keyword("and")) break;
        advance();
      }
    }
    if (at_keyword("group")) {
      advance();
      expect_keyword("by");
      ast.group_by = parse_column_ref();
    }
    if (peek().kind != TokKind::End) {
      syntax_error(peek(), "end of query");
    }
    return ast;
  }
};

std::string float_text(double v) {
  char buf[64];
  auto [p, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  std::string s(buf, p);
  if (s.find('.') == std::string::npos && s.find('e') == std::string::npos &&
      s.find("inf") == std::string::npos && s.find("nan") == std::string::npos) {
    s += ".0";
  }
  return s;
}

std::string quote_string(const std::string& s) {
  std::string out = "'";
  for (char c : s) {
    if (c == '\'') out += "''";
    else out.push_back(c);
  }
  out += "'";
  return out;
}

}  // namespace

QueryAst parse_query(const std::string& text) {
  Parser parser{lex(text)};
  return parser.parse();
}

std::string Operand::text() const {
  switch (kind) {
    case Kind::Column: return column.text();
    case Kind::Predict: return model + ".predict(*)";
    case Kind::IntLit: return std::to_string(int_value);
    case Kind::FloatLit: return float_text(float_value);
    case Kind::StringLit: return quote_string(string_value);
    case Kind::BoolLit: return bool_value ? "True" : "False";
  }
  return "";
}

std::string render_query(const QueryAst& ast) {
  std::ostringstream os;
  os << "SELECT ";
  for (size_t i = 0; i < ast.select.size(); ++i) {
    if (i > 0) os << ", ";
    const SelectItem& item = ast.select[i];
    switch (item.kind) {
      case SelectItem::Kind::CountStar: os << "count(*)"; break;
      case SelectItem::Kind::Predict: os << item.model << ".predict(*)"; break;
      case SelectItem::Kind::Column: os << item.column.text(); break;
    }
  }
  os << " FROM ";
  for (size_t i = 0; i < ast.tables.size(); ++i) {
    if (i > 0) os << ", ";
    os << ast.tables[i];
  }
  if (!ast.where.empty()) {
    os << " WHERE ";
    for (size_t i = 0; i < ast.where.size(); ++i) {
      if (i > 0) os << " AND ";
      const Comparison& cmp = ast.where[i];
      os << cmp.lhs.text() << " " << to_string(cmp.op) << " " << cmp.rhs.text();
    }
  }
  if (ast.group_by.has_value()) {
    os << " GROUP BY " << ast.group_by->text();
  }
  return os.str();
}

}  // namespace inferdb
