#pragma once

#include <memory>
#include <string>

namespace drbsde {

/// Arithmetic over (t, state) read from text. Grammar:
///   expr    := term (('+' | '-') term)*
///   term    := unary ('*' unary)*
///   unary   := '-' unary | primary
///   primary := number | 't' | 'state' | '(' expr ')'
///            | 'abs' '(' expr ')' | ('min' | 'max') '(' expr ',' expr ')'
class Expression {
 public:
  /// Throws invalid_argument naming the offending position.
  static Expression parse(const std::string& text);
  static Expression constant(double value);

  double operator()(double t, double state) const;
  const std::string& text() const { return text_; }
  /// True when the value does not depend on t or state.
  bool is_constant() const;

  struct Node;

 private:
  Expression(std::string text, std::shared_ptr<const Node> root);

  std::string text_;
  std::shared_ptr<const Node> root_;
};

}  // namespace drbsde
