#pragma once

// A small arithmetic language for user-defined rates.
//
//   expr  := sum (cmp sum)?          cmp in < <= > >= == !=  (yields 0 or 1)
//   sum   := prod (('+'|'-') prod)*
//   prod  := unary (('*'|'/') unary)*
//   unary := '-' unary | primary
//   primary := number | name | name '(' expr (',' expr)* ')' | '(' expr ')'
//
// Names: t (time), a (code of the particle's own state), d (degree).
// Functions: max, min (two or more arguments), ind(x) = 1 if x != 0,
// count(c) = number of neighbors in the state with integer code c.

#include <cctype>
#include <cmath>
#include <cstdlib>
#include <functional>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace locfield {

class ExpressionError : public std::runtime_error {
 public:
  ExpressionError(int line, int column, const std::string& what)
      : std::runtime_error(std::to_string(line) + ":" + std::to_string(column) + ": " + what),
        line_(line),
        column_(column) {}
  int line() const { return line_; }
  int column() const { return column_; }

 private:
  int line_;
  int column_;
};

struct ExpressionContext {
  double t = 0.0;
  double a = 0.0;
  double d = 0.0;
  std::span<const double> counts;  // indexed by state index
};

/// Which names an expression may reference, and how `count(code)` resolves.
struct ExpressionSymbols {
  bool allow_state = true;  // a, count(...)
  std::function<int(int)> state_index_of_code;  // returns -1 for unknown codes
};

class Expression {
 public:
  Expression() = default;

  static Expression parse(std::string_view text, const ExpressionSymbols& symbols) {
    Parser p{text, symbols};
    Expression e;
    e.root_ = p.parse_all();
    e.text_ = std::string(text);
    return e;
  }

  double evaluate(const ExpressionContext& ctx) const { return eval(*root_, ctx); }
  const std::string& text() const { return text_; }

 private:
  enum class Op { num, var_t, var_a, var_d, count, neg, add, sub, mul, div, lt, le, gt, ge, eq, ne,
                  max, min, ind };

  struct Node {
    Op op;
    double value = 0.0;
    int state = -1;
    std::vector<std::unique_ptr<Node>> args;
  };

  static double eval(const Node& n, const ExpressionContext& c) {
    auto arg = [&](std::size_t i) { return eval(*n.args[i], c); };
    switch (n.op) {
      case Op::num: return n.value;
      case Op::var_t: return c.t;
      case Op::var_a: return c.a;
      case Op::var_d: return c.d;
      case Op::count: return c.counts[n.state];
      case Op::neg: return -arg(0);
      case Op::add: return arg(0) + arg(1);
      case Op::sub: return arg(0) - arg(1);
      case Op::mul: return arg(0) * arg(1);
      case Op::div: return arg(0) / arg(1);
      case Op::lt: return arg(0) < arg(1) ? 1.0 : 0.0;
      case Op::le: return arg(0) <= arg(1) ? 1.0 : 0.0;
      case Op::gt: return arg(0) > arg(1) ? 1.0 : 0.0;
      case Op::ge: return arg(0) >= arg(1) ? 1.0 : 0.0;
      case Op::eq: return arg(0) == arg(1) ? 1.0 : 0.0;
      case Op::ne: return arg(0) != arg(1) ? 1.0 : 0.0;
      case Op::ind: return arg(0) != 0.0 ? 1.0 : 0.0;
      case Op::max:
      case Op::min: {
        double v = arg(0);
        for (std::size_t i = 1; i < n.args.size(); ++i) {
          v = n.op == Op::max ? std::max(v, arg(i)) : std::min(v, arg(i));
        }
        return v;
      }
    }
    return 0.0;
  }

  struct Parser {
    std::string_view src;
    const ExpressionSymbols& symbols;
    std::size_t pos = 0;

    [[noreturn]] void fail(std::size_t at, const std::string& what) const {
      int line = 1, col = 1;
      for (std::size_t i = 0; i < at && i < src.size(); ++i) {
        if (src[i] == '\n') {
          ++line;
          col = 1;
        } else {
          ++col;
        }
      }
      throw ExpressionError(line, col, what);
    }

    void skip_ws() {
      while (pos < src.size() && std::isspace(static_cast<unsigned char>(src[pos]))) ++pos;
    }

    bool accept(std::string_view tok) {
      skip_ws();
      if (src.substr(pos, tok.size()) == tok) {
        pos += tok.size();
        return true;
      }
      return false;
    }

    void expect(char c) {
      skip_ws();
      if (pos >= src.size() || src[pos] != c) fail(pos, std::string("expected '") + c + "'");
      ++pos;
    }

    static std::unique_ptr<Node> make(Op op, std::unique_ptr<Node> lhs = nullptr,
                                      std::unique_ptr<Node> rhs = nullptr) {
      auto n = std::make_unique<Node>();
      n->op = op;
      if (lhs) n->args.push_back(std::move(lhs));
      if (rhs) n->args.push_back(std::move(rhs));
      return n;
    }

    std::unique_ptr<Node> parse_all() {
      auto e = parse_expr();
      skip_ws();
      if (pos != src.size()) fail(pos, "unexpected '" + std::string(1, src[pos]) + "'");
      return e;
    }

    std::unique_ptr<Node> parse_expr() {
      auto lhs = parse_sum();
      static constexpr std::pair<std::string_view, Op> kCmp[] = {
          {"<=", Op::le}, {">=", Op::ge}, {"==", Op::eq}, {"!=", Op::ne}, {"<", Op::lt},
          {">", Op::gt}};
      for (auto [tok, op] : kCmp) {
        if (accept(tok)) return make(op, std::move(lhs), parse_sum());
      }
      return lhs;
    }

    std::unique_ptr<Node> parse_sum() {
      auto lhs = parse_prod();
      for (;;) {
        if (accept("+")) {
          lhs = make(Op::add, std::move(lhs), parse_prod());
        } else if (accept("-")) {
          lhs = make(Op::sub, std::move(lhs), parse_prod());
        } else {
          return lhs;
        }
      }
    }

    std::unique_ptr<Node> parse_prod() {
      auto lhs = parse_unary();
      for (;;) {
        if (accept("*")) {
          lhs = make(Op::mul, std::move(lhs), parse_unary());
        } else if (accept("/")) {
          lhs = make(Op::div, std::move(lhs), parse_unary());
        } else {
          return lhs;
        }
      }
    }

    std::unique_ptr<Node> parse_unary() {
      if (accept("-")) return make(Op::neg, parse_unary());
      return parse_primary();
    }

    std::unique_ptr<Node> parse_number() {
      char* end = nullptr;
      const std::string buf(src.substr(pos));
      double v = std::strtod(buf.c_str(), &end);
      const auto len = static_cast<std::size_t>(end - buf.c_str());
      if (len == 0) fail(pos, "expected a number");
      pos += len;
      auto n = make(Op::num);
      n->value = v;
      return n;
    }

    std::unique_ptr<Node> parse_count(std::size_t at) {
      expect('(');
      skip_ws();
      const std::size_t code_at = pos;
      bool negative = accept("-");
      skip_ws();
      std::size_t start = pos;
      while (pos < src.size() && std::isdigit(static_cast<unsigned char>(src[pos]))) ++pos;
      if (start == pos) fail(code_at, "count() takes an integer state code");
      int code = std::stoi(std::string(src.substr(start, pos - start)));
      if (negative) code = -code;
      expect(')');
      if (!symbols.allow_state) fail(at, "unknown symbol 'count'");
      const int idx = symbols.state_index_of_code ? symbols.state_index_of_code(code) : -1;
      if (idx < 0) fail(code_at, "count() of unknown state code " + std::to_string(code));
      auto n = make(Op::count);
      n->state = idx;
      return n;
    }

    std::unique_ptr<Node> parse_primary() {
      skip_ws();
      if (pos >= src.size()) fail(pos, "unexpected end of expression");
      const char c = src[pos];
      if (c == '(') {
        ++pos;
        auto e = parse_expr();
        expect(')');
        return e;
      }
      if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return parse_number();
      if (!(std::isalpha(static_cast<unsigned char>(c)) || c == '_')) {
        fail(pos, "unexpected '" + std::string(1, c) + "'");
      }
      const std::size_t at = pos;
      while (pos < src.size() &&
             (std::isalnum(static_cast<unsigned char>(src[pos])) || src[pos] == '_')) {
        ++pos;
      }
      const std::string name(src.substr(at, pos - at));
      if (name == "count") return parse_count(at);
      if (name == "max" || name == "min" || name == "ind") {
        expect('(');
        auto n = make(name == "max" ? Op::max : name == "min" ? Op::min : Op::ind);
        n->args.push_back(parse_expr());
        while (accept(",")) n->args.push_back(parse_expr());
        expect(')');
        if (n->op == Op::ind && n->args.size() != 1) fail(at, "ind() takes one argument");
        if (n->op != Op::ind && n->args.size() < 2) fail(at, name + "() takes at least two arguments");
        return n;
      }
      if (name == "t") return make(Op::var_t);
      if (name == "d") return make(Op::var_d);
      if (name == "a" && symbols.allow_state) return make(Op::var_a);
      fail(at, "unknown symbol '" + name + "'");
    }
  };

  std::shared_ptr<const Node> root_;
  std::string text_;
};

}  // namespace locfield
