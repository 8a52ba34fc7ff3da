#pragma once

#include <map>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "riemoc/errors.hpp"

namespace riemoc::expr {

enum class UnaryOp { Neg, Ln, Exp, Sin, Cos, Sqrt };
enum class BinaryOp { Add, Sub, Mul, Div };

struct Node;
using NodePtr = std::shared_ptr<const Node>;

/// One expression-tree node. Exponentiation is a dedicated node kind with a
/// constant integer exponent, which keeps differentiation closed.
struct Node {
  enum class Kind { Constant, Variable, Unary, Binary, IntPow };
  Kind kind;
  double value = 0.0;  // Constant
  int var = -1;        // Variable: index into the declared variable list
  UnaryOp uop = UnaryOp::Neg;
  BinaryOp bop = BinaryOp::Add;
  int exponent = 0;  // IntPow
  NodePtr a, b;
};

/// Immutable scalar expression over a fixed, ordered variable list.
/// Values are evaluated positionally: bindings[i] is the value of
/// variables()[i]. All operations are pure; instances are safe to share
/// across threads.
class Expr {
 public:
  Expr() = default;
  Expr(NodePtr root, std::shared_ptr<const std::vector<std::string>> vars)
      : root_(std::move(root)), vars_(std::move(vars)) {}

  static Expr constant(double value, std::vector<std::string> vars = {});

  bool valid() const { return root_ != nullptr; }
  const std::vector<std::string>& variables() const { return *vars_; }

  /// Evaluate at positional bindings (one per declared variable).
  double eval(std::span<const double> bindings) const;
  /// Evaluate at named bindings; every declared variable must be bound.
  double eval(const std::map<std::string, double>& bindings) const;

  /// Symbolic partial derivative; the result shares the variable list.
  Expr differentiate(std::string_view var) const;
  Expr differentiate(int var_index) const;

  /// True when the tree folds to the constant 0.
  bool is_zero() const;

  /// Parseable text form; round-trips at value level.
  std::string to_string() const;

  const NodePtr& root() const { return root_; }

 private:
  NodePtr root_;
  std::shared_ptr<const std::vector<std::string>> vars_ =
      std::make_shared<const std::vector<std::string>>();
};

/// Parse `text` over the declared variable list. Grammar: +,-,*,/ with the
/// usual precedence, unary minus, parentheses, `^` with a constant integer
/// exponent, and calls ln(x), exp(x), sin(x), cos(x), sqrt(x).
/// Throws ParseError (with byte offset) on malformed input or unknown
/// identifiers.
Expr parse(std::string_view text, std::vector<std::string> vars);
Expr parse_shared(std::string_view text, std::shared_ptr<const std::vector<std::string>> vars);

}  // namespace riemoc::expr
