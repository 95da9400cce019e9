// Copyright (c) 2026 The pndsim Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cctype>
#include <charconv>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "pndsim/mir.hpp"

namespace pndsim::mir {

class ParseError : public std::runtime_error {
 public:
  ParseError(int line, int column, const std::string& msg)
      : std::runtime_error(std::to_string(line) + ":" + std::to_string(column) + ": " + msg),
        line_(line),
        column_(column) {}

  int line() const { return line_; }
  int column() const { return column_; }

 private:
  int line_;
  int column_;
};

/// Raised when the text parses but the program breaks an IR invariant.
class ValidationError : public std::runtime_error {
 public:
  explicit ValidationError(std::vector<Diagnostic> diags)
      : std::runtime_error(render(diags)), diags_(std::move(diags)) {}

  const std::vector<Diagnostic>& diagnostics() const { return diags_; }

 private:
  static std::string render(const std::vector<Diagnostic>& d) {
    std::string s;
    for (const auto& x : d) {
      if (!s.empty()) s += "\n";
      s += (x.function.empty() ? std::string() : "in " + x.function + ": ") + x.message;
    }
    return s;
  }
  std::vector<Diagnostic> diags_;
};

namespace detail {

enum class Tok { Ident, Int, Punct, End };

struct Token {
  Tok kind;
  std::string text;
  int line;
  int col;
};

inline std::vector<Token> lex(std::string_view src) {
  std::vector<Token> out;
  int line = 1, col = 1;
  std::size_t i = 0;
  auto advance = [&](std::size_t n) {
    for (std::size_t k = 0; k < n; ++k) {
      if (src[i] == '\n') {
        ++line;
        col = 1;
      } else {
        ++col;
      }
      ++i;
    }
  };
  while (i < src.size()) {
    char c = src[i];
    if (c == '#') {
      while (i < src.size() && src[i] != '\n') advance(1);
      continue;
    }
    if (std::isspace(static_cast<unsigned char>(c))) {
      advance(1);
      continue;
    }
    int tl = line, tc = col;
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      std::size_t j = i;
      while (j < src.size() && (std::isalnum(static_cast<unsigned char>(src[j])) || src[j] == '_')) ++j;
      out.push_back({Tok::Ident, std::string(src.substr(i, j - i)), tl, tc});
      advance(j - i);
      continue;
    }
    if (std::isdigit(static_cast<unsigned char>(c))) {
      std::size_t j = i;
      while (j < src.size() && std::isdigit(static_cast<unsigned char>(src[j]))) ++j;
      out.push_back({Tok::Int, std::string(src.substr(i, j - i)), tl, tc});
      advance(j - i);
      continue;
    }
    if (std::string_view("{}()[],=+-*&|^").find(c) != std::string_view::npos) {
      out.push_back({Tok::Punct, std::string(1, c), tl, tc});
      advance(1);
      continue;
    }
    throw ParseError(tl, tc, std::string("unexpected character '") + c + "'");
  }
  out.push_back({Tok::End, "", line, col});
  return out;
}

class Parser {
 public:
  explicit Parser(std::string_view text) : toks_(lex(text)) {}

  Program parse() {
    Program p;
    while (!at_end()) {
      if (peek_is("array")) {
        p.globals.push_back(parse_array());
      } else if (peek_is("fn")) {
        p.functions.push_back(parse_function(p));
      } else {
        fail("expected 'array' or 'fn'");
      }
    }
    return p;
  }

 private:
  std::vector<Token> toks_;
  std::size_t pos_ = 0;
  StaticId next_id_ = 0;
  const Function* fn_ = nullptr;
  const Program* prog_ = nullptr;

  const Token& peek() const { return toks_[pos_]; }
  bool at_end() const { return peek().kind == Tok::End; }
  bool peek_is(std::string_view s) const { return peek().kind != Tok::End && peek().text == s; }

  [[noreturn]] void fail(const std::string& msg) const {
    const Token& t = peek();
    throw ParseError(t.line, t.col,
                     msg + (t.kind == Tok::End ? " at end of input" : ", found '" + t.text + "'"));
  }

  void expect(std::string_view s) {
    if (!peek_is(s)) fail("expected '" + std::string(s) + "'");
    ++pos_;
  }

  bool accept(std::string_view s) {
    if (!peek_is(s)) return false;
    ++pos_;
    return true;
  }

  static bool is_keyword(std::string_view s) {
    static const char* kw[] = {"array", "esz",  "fn",    "arr",  "int",  "restrict",
                               "readonly", "for", "to", "step", "pnd", "load",
                               "store", "alu", "call", "reads", "writes"};
    for (const char* k : kw)
      if (s == k) return true;
    return false;
  }

  std::string name() {
    if (peek().kind != Tok::Ident || is_keyword(peek().text)) fail("expected a name");
    return toks_[pos_++].text;
  }

  std::int64_t integer() {
    if (peek().kind != Tok::Int) fail("expected an integer");
    const std::string& s = toks_[pos_].text;
    std::int64_t v = 0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size()) fail("integer out of range");
    ++pos_;
    return v;
  }

  ArrayDecl parse_array() {
    expect("array");
    ArrayDecl d;
    d.name = name();
    expect("[");
    d.length = integer();
    expect("]");
    expect("esz");
    d.elem_size = integer();
    return d;
  }

  Function parse_function(const Program& prog) {
    expect("fn");
    Function fn;
    fn.name = name();
    expect("(");
    if (!peek_is(")")) {
      do {
        Param prm;
        if (accept("arr"))
          prm.kind = ParamKind::Array;
        else if (accept("int"))
          prm.kind = ParamKind::Scalar;
        else
          fail("expected 'arr' or 'int'");
        prm.name = name();
        for (;;) {
          if (accept("restrict"))
            prm.restrict_ = true;
          else if (accept("readonly"))
            prm.readonly = true;
          else
            break;
        }
        fn.params.push_back(prm);
      } while (accept(","));
    }
    expect(")");
    prog_ = &prog;
    fn_ = &fn;
    fn.body = parse_block();
    fn_ = nullptr;
    return fn;
  }

  std::vector<Stmt> parse_block() {
    expect("{");
    std::vector<Stmt> body;
    while (!peek_is("}")) {
      if (at_end()) fail("expected '}'");
      body.push_back(parse_stmt());
    }
    expect("}");
    return body;
  }

  Affine affine_atom() {
    if (peek().kind == Tok::Int) {
      std::int64_t c = integer();
      if (accept("*")) return Affine::var(name(), c);
      return Affine::constant(c);
    }
    return Affine::var(name());
  }

  Affine affine() {
    Affine a = affine_atom();
    for (;;) {
      if (accept("+"))
        a += affine_atom();
      else if (accept("-"))
        a -= affine_atom();
      else
        return a;
    }
  }

  void check_array(const std::string& base, const Token& at) const {
    if (const Param* p = fn_->find_param(base)) {
      if (p->kind == ParamKind::Array) return;
    } else if (prog_->find_global(base)) {
      return;
    }
    throw ParseError(at.line, at.col, "reference to undeclared array '" + base + "'");
  }

  AddrExpr address() {
    const Token& at = peek();
    AddrExpr a;
    a.base = name();
    check_array(a.base, at);
    expect("[");
    a.index = affine();
    expect("]");
    return a;
  }

  std::optional<std::set<std::string>> names_or_star() {
    expect("(");
    if (accept("*")) {
      expect(")");
      return std::nullopt;
    }
    std::set<std::string> names;
    if (!peek_is(")")) {
      do {
        const Token& at = peek();
        std::string n = name();
        check_array(n, at);
        names.insert(n);
      } while (accept(","));
    }
    expect(")");
    return names;
  }

  std::string reg() { return name(); }

  Stmt parse_stmt() {
    if (accept("for")) {
      Loop l;
      l.ivar = name();
      expect("=");
      l.lower = affine();
      expect("to");
      l.upper = affine();
      expect("step");
      bool neg = accept("-");
      l.step = integer();
      if (neg) l.step = -l.step;
      l.body = parse_block();
      return Stmt{std::move(l)};
    }

    const Token& start = peek();
    bool pnd = accept("pnd");
    Instr in;
    in.pnd = pnd;
    if (accept("load")) {
      in.kind = InstrKind::Load;
      in.dst = reg();
      expect("=");
      in.addr = address();
    } else if (pnd) {
      throw ParseError(start.line, start.col, "pnd flag on non-load instruction");
    } else if (accept("store")) {
      in.kind = InstrKind::Store;
      in.addr = address();
      expect("=");
      in.srcs.push_back(reg());
    } else if (accept("alu")) {
      in.kind = InstrKind::Alu;
      in.dst = reg();
      expect("=");
      in.srcs.push_back(reg());
      in.op = opsym();
      in.srcs.push_back(reg());
    } else if (accept("call")) {
      in.kind = InstrKind::Call;
      in.callee = name();
      expect("reads");
      in.summary.may_read = names_or_star();
      expect("writes");
      in.summary.may_write = names_or_star();
    } else {
      fail("expected a statement");
    }
    in.id = next_id_++;
    return Stmt{std::move(in)};
  }

  AluOp opsym() {
    static const std::pair<const char*, AluOp> ops[] = {{"+", AluOp::Add}, {"-", AluOp::Sub},
                                                        {"*", AluOp::Mul}, {"&", AluOp::And},
                                                        {"|", AluOp::Or},  {"^", AluOp::Xor}};
    for (const auto& [s, op] : ops)
      if (accept(s)) return op;
    fail("expected an operator");
  }
};

}  // namespace detail

/// Parses without running the validator. Syntax errors and references to
/// undeclared arrays still throw ParseError.
inline Program parse_program_unchecked(std::string_view text) {
  return detail::Parser(text).parse();
}

/// Parses and validates. Throws ParseError or ValidationError.
inline Program parse_program(std::string_view text) {
  Program p = parse_program_unchecked(text);
  if (auto diags = validate(p); !diags.empty()) throw ValidationError(std::move(diags));
  return p;
}

inline Program parse_program_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_program(ss.str());
}

}  // namespace pndsim::mir
