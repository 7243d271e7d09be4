/**
 * @file expression.hpp
 * @brief Small arithmetic expression language for initial data in config files.
 *
 * Grammar (usual precedence, `^` right-associative):
 *
 *   expr    := term (('+' | '-') term)*
 *   term    := unary (('*' | '/') unary)*
 *   unary   := ('+' | '-') unary | power
 *   power   := primary ('^' unary)?
 *   primary := number | name | name '(' expr (',' expr)* ')' | '(' expr ')'
 *
 * Names resolve to the variables `x` and `L` (the arc length) or to the
 * constants `pi` and `e`. Functions: sin cos tan exp log sqrt abs tanh sinh
 * cosh with one argument, pow min max with two.
 */
#pragma once

#include <cctype>
#include <cmath>
#include <cstdlib>
#include <functional>
#include <memory>
#include <numbers>
#include <string>
#include <vector>

#include "netchemo/error.hpp"

namespace netchemo {

class Expression {
 public:
  static Expression parse(const std::string& text) {
    Parser p{text, 0};
    Expression e;
    e.text_ = text;
    e.root_ = p.expr();
    p.skip();
    if (p.pos != text.size()) p.fail("unexpected '" + std::string(1, text[p.pos]) + "'");
    return e;
  }

  double operator()(double x, double length) const { return root_->eval(x, length); }
  const std::string& text() const { return text_; }

 private:
  struct Node {
    virtual ~Node() = default;
    virtual double eval(double x, double len) const = 0;
  };
  using Ptr = std::shared_ptr<const Node>;

  struct Number : Node {
    double value;
    explicit Number(double v) : value(v) {}
    double eval(double, double) const override { return value; }
  };
  struct VarX : Node {
    double eval(double x, double) const override { return x; }
  };
  struct VarL : Node {
    double eval(double, double len) const override { return len; }
  };
  struct Unary : Node {
    double (*fn)(double);
    Ptr arg;
    Unary(double (*f)(double), Ptr a) : fn(f), arg(std::move(a)) {}
    double eval(double x, double len) const override { return fn(arg->eval(x, len)); }
  };
  struct Binary : Node {
    double (*fn)(double, double);
    Ptr lhs, rhs;
    Binary(double (*f)(double, double), Ptr l, Ptr r) : fn(f), lhs(std::move(l)), rhs(std::move(r)) {}
    double eval(double x, double len) const override { return fn(lhs->eval(x, len), rhs->eval(x, len)); }
  };

  static double add(double a, double b) { return a + b; }
  static double sub(double a, double b) { return a - b; }
  static double mul(double a, double b) { return a * b; }
  static double div(double a, double b) { return a / b; }
  static double pow_(double a, double b) { return std::pow(a, b); }
  static double min_(double a, double b) { return std::fmin(a, b); }
  static double max_(double a, double b) { return std::fmax(a, b); }
  static double neg(double a) { return -a; }

  struct Parser {
    const std::string& s;
    std::size_t pos;

    [[noreturn]] void fail(const std::string& what) const {
      throw Error(ErrorCode::parse_error,
                  "expression '" + s + "' at column " + std::to_string(pos + 1) + ": " + what);
    }
    void skip() {
      while (pos < s.size() && std::isspace(static_cast<unsigned char>(s[pos]))) ++pos;
    }
    bool accept(char c) {
      skip();
      if (pos < s.size() && s[pos] == c) {
        ++pos;
        return true;
      }
      return false;
    }
    void expect(char c) {
      if (!accept(c)) fail(std::string("expected '") + c + "'");
    }

    Ptr expr() {
      Ptr lhs = term();
      for (;;) {
        if (accept('+')) lhs = std::make_shared<Binary>(add, lhs, term());
        else if (accept('-')) lhs = std::make_shared<Binary>(sub, lhs, term());
        else return lhs;
      }
    }
    Ptr term() {
      Ptr lhs = unary();
      for (;;) {
        if (accept('*')) lhs = std::make_shared<Binary>(mul, lhs, unary());
        else if (accept('/')) lhs = std::make_shared<Binary>(div, lhs, unary());
        else return lhs;
      }
    }
    Ptr unary() {
      if (accept('-')) return std::make_shared<Unary>(neg, unary());
      if (accept('+')) return unary();
      return power();
    }
    Ptr power() {
      Ptr base = primary();
      if (accept('^')) return std::make_shared<Binary>(pow_, base, unary());
      return base;
    }
    Ptr primary() {
      skip();
      if (pos >= s.size()) fail("unexpected end of input");
      const char c = s[pos];
      if (accept('(')) {
        Ptr e = expr();
        expect(')');
        return e;
      }
      if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
        const char* begin = s.c_str() + pos;
        char* end = nullptr;
        const double v = std::strtod(begin, &end);
        if (end == begin) fail("malformed number");
        pos += static_cast<std::size_t>(end - begin);
        return std::make_shared<Number>(v);
      }
      if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
        const std::size_t start = pos;
        while (pos < s.size() && (std::isalnum(static_cast<unsigned char>(s[pos])) || s[pos] == '_')) ++pos;
        const std::string name = s.substr(start, pos - start);
        if (accept('(')) return call(name);
        if (name == "x") return std::make_shared<VarX>();
        if (name == "L") return std::make_shared<VarL>();
        if (name == "pi") return std::make_shared<Number>(std::numbers::pi);
        if (name == "e") return std::make_shared<Number>(std::numbers::e);
        pos = start;
        fail("unknown name '" + name + "'");
      }
      fail("unexpected '" + std::string(1, c) + "'");
    }
    Ptr call(const std::string& name) {
      std::vector<Ptr> args;
      if (!accept(')')) {
        do args.push_back(expr());
        while (accept(','));
        expect(')');
      }
      using F1 = double (*)(double);
      using F2 = double (*)(double, double);
      static const std::vector<std::pair<std::string, F1>> unary_fns = {
          {"sin", [](double a) { return std::sin(a); }},   {"cos", [](double a) { return std::cos(a); }},
          {"tan", [](double a) { return std::tan(a); }},   {"exp", [](double a) { return std::exp(a); }},
          {"log", [](double a) { return std::log(a); }},   {"sqrt", [](double a) { return std::sqrt(a); }},
          {"abs", [](double a) { return std::abs(a); }},   {"tanh", [](double a) { return std::tanh(a); }},
          {"sinh", [](double a) { return std::sinh(a); }}, {"cosh", [](double a) { return std::cosh(a); }},
      };
      static const std::vector<std::pair<std::string, F2>> binary_fns = {
          {"pow", pow_}, {"min", min_}, {"max", max_}};
      for (const auto& [n, f] : unary_fns) {
        if (n == name) {
          if (args.size() != 1) fail(name + " takes one argument");
          return std::make_shared<Unary>(f, args[0]);
        }
      }
      for (const auto& [n, f] : binary_fns) {
        if (n == name) {
          if (args.size() != 2) fail(name + " takes two arguments");
          return std::make_shared<Binary>(f, args[0], args[1]);
        }
      }
      fail("unknown function '" + name + "'");
    }
  };

  std::string text_;
  Ptr root_;
};

}  // namespace netchemo
