#pragma once

// Small arithmetic expression compiler for coefficient strings such as
// "0.5*exp(-1/x1^2)" or "sqrt(1 + sin(x1)^2)".
//
// Grammar:
//   expr   := term (('+' | '-') term)*
//   term   := unary (('*' | '/') unary)*
//   unary  := ('-' | '+') unary | power
//   power  := atom ('^' unary)?
//   atom   := number | name | name '(' expr ')' | '(' expr ')'
// Variables: x1, x2 (x is an alias of x1). Constants: pi, e.

#include <cctype>
#include <cmath>
#include <functional>
#include <map>
#include <memory>
#include <numbers>
#include <string>

#include "dmfg/errors.hpp"

namespace dmfg {

using PlaneFn = std::function<double(double, double)>;

namespace detail {

class ExpressionParser {
 public:
  explicit ExpressionParser(std::string text) : text_(std::move(text)) {}

  PlaneFn parse() {
    PlaneFn f = expr();
    skip_ws();
    if (pos_ != text_.size()) fail("unexpected trailing input");
    return f;
  }

 private:
  [[noreturn]] void fail(const std::string& why) const {
    throw ConfigError("expression '" + text_ + "' at offset " + std::to_string(pos_) + ": " + why);
  }

  void skip_ws() {
    while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
  }

  bool eat(char c) {
    skip_ws();
    if (pos_ < text_.size() && text_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }

  PlaneFn expr() {
    PlaneFn lhs = term();
    for (;;) {
      if (eat('+')) {
        lhs = [a = lhs, b = term()](double x, double y) { return a(x, y) + b(x, y); };
      } else if (eat('-')) {
        lhs = [a = lhs, b = term()](double x, double y) { return a(x, y) - b(x, y); };
      } else {
        return lhs;
      }
    }
  }

  PlaneFn term() {
    PlaneFn lhs = unary();
    for (;;) {
      if (eat('*')) {
        lhs = [a = lhs, b = unary()](double x, double y) { return a(x, y) * b(x, y); };
      } else if (eat('/')) {
        lhs = [a = lhs, b = unary()](double x, double y) { return a(x, y) / b(x, y); };
      } else {
        return lhs;
      }
    }
  }

  PlaneFn unary() {
    if (eat('-')) return [a = unary()](double x, double y) { return -a(x, y); };
    if (eat('+')) return unary();
    return power();
  }

  PlaneFn power() {
    PlaneFn base = atom();
    if (eat('^')) {
      PlaneFn ex = unary();
      return [a = base, b = ex](double x, double y) { return std::pow(a(x, y), b(x, y)); };
    }
    return base;
  }

  PlaneFn atom() {
    skip_ws();
    if (pos_ >= text_.size()) fail("unexpected end of input");
    const char c = text_[pos_];
    if (eat('(')) {
      PlaneFn inner = expr();
      if (!eat(')')) fail("expected ')'");
      return inner;
    }
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
      std::size_t used = 0;
      double v = 0.0;
      try {
        v = std::stod(text_.substr(pos_), &used);
      } catch (const std::exception&) {
        fail("malformed number");
      }
      pos_ += used;
      return [v](double, double) { return v; };
    }
    if (std::isalpha(static_cast<unsigned char>(c))) {
      std::size_t start = pos_;
      while (pos_ < text_.size() &&
             (std::isalnum(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '_'))
        ++pos_;
      const std::string name = text_.substr(start, pos_ - start);
      if (eat('(')) {
        PlaneFn arg = expr();
        if (!eat(')')) fail("expected ')' after function argument");
        return apply(name, std::move(arg));
      }
      if (name == "x1" || name == "x") return [](double x, double) { return x; };
      if (name == "x2") return [](double, double y) { return y; };
      if (name == "pi") return [](double, double) { return std::numbers::pi; };
      if (name == "e") return [](double, double) { return std::numbers::e; };
      fail("unknown identifier '" + name + "'");
    }
    fail(std::string("unexpected character '") + c + "'");
  }

  PlaneFn apply(const std::string& name, PlaneFn arg) {
    static const std::map<std::string, double (*)(double)> table = {
        {"exp", [](double v) { return std::exp(v); }},   {"log", [](double v) { return std::log(v); }},
        {"sin", [](double v) { return std::sin(v); }},   {"cos", [](double v) { return std::cos(v); }},
        {"tan", [](double v) { return std::tan(v); }},   {"tanh", [](double v) { return std::tanh(v); }},
        {"sqrt", [](double v) { return std::sqrt(v); }}, {"abs", [](double v) { return std::abs(v); }},
    };
    const auto it = table.find(name);
    if (it == table.end()) fail("unknown function '" + name + "'");
    return [fn = it->second, a = std::move(arg)](double x, double y) { return fn(a(x, y)); };
  }

  std::string text_;
  std::size_t pos_ = 0;
};

}  // namespace detail

/// Compiles an expression in x1, x2 to a callable. Throws ConfigError on syntax errors.
inline PlaneFn compile_expression(const std::string& text) {
  return detail::ExpressionParser(text).parse();
}

}  // namespace dmfg
