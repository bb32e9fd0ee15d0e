#pragma once

// Tiny arithmetic expression language for initial data and source terms.
//
// Grammar: numbers, the variables x, y, arclength, t, the constant pi,
// binary + - * /, unary minus, parentheses, and the functions sin, cos, exp,
// abs, pow(a, b).  Parse errors carry the character position.  Evaluation is
// allocation-free; expressions compile to a flat node vector.
//
// Subdomain fields evaluate with x, y set to the 2D point; edge fields also
// see the embedded x, y of the arclength position, so traces of 2D formulas
// can be written verbatim.  t is only meaningful for sources (the config
// layer rejects it in initial data).

#include <cctype>
#include <cmath>
#include <cstdlib>
#include <stdexcept>
#include <string>
#include <vector>

namespace netdiff {

struct ExpressionError : std::runtime_error {
  std::size_t position;
  ExpressionError(const std::string& what, std::size_t pos)
      : std::runtime_error(what + " (at character " + std::to_string(pos) + ")"),
        position(pos) {}
};

struct ExprEnv {
  double x = 0.0;
  double y = 0.0;
  double arclength = 0.0;
  double t = 0.0;
};

class Expression {
 public:
  Expression() = default;

  static Expression parse(const std::string& text) {
    Parser p{text, 0};
    Expression e;
    e.text_ = text;
    e.root_ = p.parse_expr(e);
    p.skip_space();
    if (p.at < text.size())
      throw ExpressionError("unexpected trailing characters", p.at);
    return e;
  }

  double eval(const ExprEnv& env) const { return eval_node(root_, env); }

  bool uses_time() const { return uses_t_; }
  bool empty() const { return nodes_.empty(); }
  const std::string& text() const { return text_; }

 private:
  enum class Op {
    constant,
    var_x,
    var_y,
    var_arclength,
    var_t,
    add,
    sub,
    mul,
    div,
    neg,
    fn_sin,
    fn_cos,
    fn_exp,
    fn_abs,
    fn_pow
  };

  struct Node {
    Op op = Op::constant;
    double value = 0.0;
    int a = -1;
    int b = -1;
  };

  std::vector<Node> nodes_;
  std::string text_;
  int root_ = -1;
  bool uses_t_ = false;

  double eval_node(int idx, const ExprEnv& env) const {
    const Node& n = nodes_[static_cast<std::size_t>(idx)];
    switch (n.op) {
      case Op::constant: return n.value;
      case Op::var_x: return env.x;
      case Op::var_y: return env.y;
      case Op::var_arclength: return env.arclength;
      case Op::var_t: return env.t;
      case Op::add: return eval_node(n.a, env) + eval_node(n.b, env);
      case Op::sub: return eval_node(n.a, env) - eval_node(n.b, env);
      case Op::mul: return eval_node(n.a, env) * eval_node(n.b, env);
      case Op::div: return eval_node(n.a, env) / eval_node(n.b, env);
      case Op::neg: return -eval_node(n.a, env);
      case Op::fn_sin: return std::sin(eval_node(n.a, env));
      case Op::fn_cos: return std::cos(eval_node(n.a, env));
      case Op::fn_exp: return std::exp(eval_node(n.a, env));
      case Op::fn_abs: return std::abs(eval_node(n.a, env));
      case Op::fn_pow: return std::pow(eval_node(n.a, env), eval_node(n.b, env));
    }
    return 0.0;
  }

  int push(Node n) {
    nodes_.push_back(n);
    return static_cast<int>(nodes_.size()) - 1;
  }

  struct Parser {
    const std::string& s;
    std::size_t at;

    void skip_space() {
      while (at < s.size() && std::isspace(static_cast<unsigned char>(s[at]))) ++at;
    }
    bool accept(char c) {
      skip_space();
      if (at < s.size() && s[at] == c) {
        ++at;
        return true;
      }
      return false;
    }
    void expect(char c) {
      if (!accept(c))
        throw ExpressionError(std::string("expected '") + c + "'", at);
    }

    int parse_expr(Expression& e) {
      int lhs = parse_term(e);
      for (;;) {
        if (accept('+'))
          lhs = e.push({Op::add, 0.0, lhs, parse_term(e)});
        else if (accept('-'))
          lhs = e.push({Op::sub, 0.0, lhs, parse_term(e)});
        else
          return lhs;
      }
    }

    int parse_term(Expression& e) {
      int lhs = parse_unary(e);
      for (;;) {
        if (accept('*'))
          lhs = e.push({Op::mul, 0.0, lhs, parse_unary(e)});
        else if (accept('/'))
          lhs = e.push({Op::div, 0.0, lhs, parse_unary(e)});
        else
          return lhs;
      }
    }

    int parse_unary(Expression& e) {
      if (accept('-')) return e.push({Op::neg, 0.0, parse_unary(e), -1});
      return parse_primary(e);
    }

    int parse_primary(Expression& e) {
      skip_space();
      if (at >= s.size()) throw ExpressionError("unexpected end of expression", at);
      const char c = s[at];
      if (c == '(') {
        ++at;
        const int inner = parse_expr(e);
        expect(')');
        return inner;
      }
      if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
        const char* begin = s.c_str() + at;
        char* end = nullptr;
        const double value = std::strtod(begin, &end);
        if (end == begin) throw ExpressionError("malformed number", at);
        at += static_cast<std::size_t>(end - begin);
        return e.push({Op::constant, value, -1, -1});
      }
      if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
        const std::size_t start = at;
        while (at < s.size() &&
               (std::isalnum(static_cast<unsigned char>(s[at])) || s[at] == '_'))
          ++at;
        const std::string name = s.substr(start, at - start);
        if (name == "x") return e.push({Op::var_x, 0.0, -1, -1});
        if (name == "y") return e.push({Op::var_y, 0.0, -1, -1});
        if (name == "arclength") return e.push({Op::var_arclength, 0.0, -1, -1});
        if (name == "t") {
          e.uses_t_ = true;
          return e.push({Op::var_t, 0.0, -1, -1});
        }
        if (name == "pi") return e.push({Op::constant, M_PI, -1, -1});
        if (name == "sin" || name == "cos" || name == "exp" || name == "abs") {
          expect('(');
          const int arg = parse_expr(e);
          expect(')');
          const Op op = (name == "sin")   ? Op::fn_sin
                        : (name == "cos") ? Op::fn_cos
                        : (name == "exp") ? Op::fn_exp
                                          : Op::fn_abs;
          return e.push({op, 0.0, arg, -1});
        }
        if (name == "pow") {
          expect('(');
          const int a = parse_expr(e);
          expect(',');
          const int b = parse_expr(e);
          expect(')');
          return e.push({Op::fn_pow, 0.0, a, b});
        }
        throw ExpressionError("unknown identifier '" + name + "'", start);
      }
      throw ExpressionError(std::string("unexpected character '") + c + "'", at);
    }
  };
};

}  // namespace netdiff
