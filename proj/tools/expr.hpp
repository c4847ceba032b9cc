#pragma once

// Arithmetic expressions in one variable `t`, for custom datasets.
//
//   expr   := term (('+' | '-') term)*
//   term   := unary (('*' | '/') unary)*
//   unary  := '-' unary | power
//   power  := atom ('^' unary)?
//   atom   := number | 't' | 'pi' | 'e' | name '(' expr ')' | '(' expr ')'
//
// Functions: sin cos tan exp log sqrt tanh abs.

#include <memory>
#include <string>
#include <string_view>

namespace diffstruct::app {

class Expression {
 public:
  /// Parse error (Errc::parse) with the offending column on bad input.
  static Expression parse(std::string_view text);

  double operator()(double t) const;
  const std::string& text() const noexcept { return text_; }

  struct Node;

 private:
  std::shared_ptr<const Node> root_;
  std::string text_;
};

}  // namespace diffstruct::app
