#include "expr.hpp"

#include <cctype>
#include <charconv>
#include <cmath>
#include <numbers>
#include <vector>

#include "diffstruct/error.hpp"

namespace diffstruct::app {

struct Expression::Node {
  enum class Kind { number, variable, neg, add, sub, mul, div, pow, call } kind;
  double value = 0.0;
  double (*fn)(double) = nullptr;
  std::shared_ptr<const Node> a, b;

  double eval(double t) const {
    switch (kind) {
      case Kind::number: return value;
      case Kind::variable: return t;
      case Kind::neg: return -a->eval(t);
      case Kind::add: return a->eval(t) + b->eval(t);
      case Kind::sub: return a->eval(t) - b->eval(t);
      case Kind::mul: return a->eval(t) * b->eval(t);
      case Kind::div: return a->eval(t) / b->eval(t);
      case Kind::pow: return std::pow(a->eval(t), b->eval(t));
      case Kind::call: return fn(a->eval(t));
    }
    return 0.0;
  }
};

namespace {

using NodePtr = std::shared_ptr<const Expression::Node>;
using Kind = Expression::Node::Kind;

NodePtr make(Kind k, NodePtr a = nullptr, NodePtr b = nullptr) {
  auto n = std::make_shared<Expression::Node>();
  n->kind = k;
  n->a = std::move(a);
  n->b = std::move(b);
  return n;
}

NodePtr number(double v) {
  auto n = std::make_shared<Expression::Node>();
  n->kind = Kind::number;
  n->value = v;
  return n;
}

struct Function {
  const char* name;
  double (*fn)(double);
};

const Function kFunctions[] = {
    {"sin", [](double x) { return std::sin(x); }},   {"cos", [](double x) { return std::cos(x); }},
    {"tan", [](double x) { return std::tan(x); }},   {"exp", [](double x) { return std::exp(x); }},
    {"log", [](double x) { return std::log(x); }},   {"sqrt", [](double x) { return std::sqrt(x); }},
    {"tanh", [](double x) { return std::tanh(x); }}, {"abs", [](double x) { return std::abs(x); }},
};

class Parser {
 public:
  explicit Parser(std::string_view s) : s_(s) {}

  NodePtr parse() {
    auto n = expr();
    skip();
    if (pos_ != s_.size()) fail("unexpected '" + std::string(1, s_[pos_]) + "'");
    return n;
  }

 private:
  [[noreturn]] void fail(const std::string& what) const {
    throw Error(Errc::parse, "expression column " + std::to_string(pos_ + 1) + ": " + what);
  }

  void skip() {
    while (pos_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[pos_]))) ++pos_;
  }

  bool eat(char c) {
    skip();
    if (pos_ < s_.size() && s_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }

  NodePtr expr() {
    auto n = term();
    for (;;) {
      if (eat('+')) n = make(Kind::add, n, term());
      else if (eat('-')) n = make(Kind::sub, n, term());
      else return n;
    }
  }

  NodePtr term() {
    auto n = unary();
    for (;;) {
      if (eat('*')) n = make(Kind::mul, n, unary());
      else if (eat('/')) n = make(Kind::div, n, unary());
      else return n;
    }
  }

  NodePtr unary() {
    if (eat('-')) return make(Kind::neg, unary());
    if (eat('+')) return unary();
    return power();
  }

  NodePtr power() {
    auto n = atom();
    if (eat('^')) return make(Kind::pow, n, unary());
    return n;
  }

  NodePtr atom() {
    skip();
    if (pos_ >= s_.size()) fail("unexpected end of input");
    if (eat('(')) {
      auto n = expr();
      if (!eat(')')) fail("expected ')'");
      return n;
    }
    const char c = s_[pos_];
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
      double v = 0.0;
      const auto [end, ec] = std::from_chars(s_.data() + pos_, s_.data() + s_.size(), v);
      if (ec != std::errc()) fail("bad number");
      pos_ = static_cast<std::size_t>(end - s_.data());
      return number(v);
    }
    if (std::isalpha(static_cast<unsigned char>(c))) {
      const std::size_t start = pos_;
      while (pos_ < s_.size() && std::isalnum(static_cast<unsigned char>(s_[pos_]))) ++pos_;
      const std::string_view name = s_.substr(start, pos_ - start);
      if (name == "t") return make(Kind::variable);
      if (name == "pi") return number(std::numbers::pi);
      if (name == "e") return number(std::numbers::e);
      for (const auto& f : kFunctions) {
        if (name == f.name) {
          if (!eat('(')) fail("expected '(' after " + std::string(name));
          auto n = std::make_shared<Expression::Node>();
          n->kind = Kind::call;
          n->fn = f.fn;
          n->a = expr();
          if (!eat(')')) fail("expected ')'");
          return n;
        }
      }
      pos_ = start;
      fail("unknown name '" + std::string(name) + "'");
    }
    fail("unexpected '" + std::string(1, c) + "'");
  }

  std::string_view s_;
  std::size_t pos_ = 0;
};

}  // namespace

Expression Expression::parse(std::string_view text) {
  Expression e;
  e.root_ = Parser(text).parse();
  e.text_ = std::string(text);
  return e;
}

double Expression::operator()(double t) const { return root_->eval(t); }

}  // namespace diffstruct::app
