#include "riemoc/expr.hpp"

#include <cctype>
#include <charconv>
#include <cmath>
#include <sstream>

namespace riemoc::expr {

namespace {

NodePtr make_constant(double v) {
  auto n = std::make_shared<Node>();
  n->kind = Node::Kind::Constant;
  n->value = v;
  return n;
}

NodePtr make_variable(int idx) {
  auto n = std::make_shared<Node>();
  n->kind = Node::Kind::Variable;
  n->var = idx;
  return n;
}

bool is_const(const NodePtr& n, double v) {
  return n->kind == Node::Kind::Constant && n->value == v;
}

NodePtr make_unary(UnaryOp op, NodePtr a);

// Folding builders: collapse constant subtrees and the 0/1 identities so
// derivative trees stay small. Only value-preserving rewrites.
NodePtr make_binary(BinaryOp op, NodePtr a, NodePtr b) {
  if (a->kind == Node::Kind::Constant && b->kind == Node::Kind::Constant) {
    switch (op) {
      case BinaryOp::Add:
        return make_constant(a->value + b->value);
      case BinaryOp::Sub:
        return make_constant(a->value - b->value);
      case BinaryOp::Mul:
        return make_constant(a->value * b->value);
      case BinaryOp::Div:
        if (b->value != 0.0) return make_constant(a->value / b->value);
        break;
    }
  }
  switch (op) {
    case BinaryOp::Add:
      if (is_const(a, 0.0)) return b;
      if (is_const(b, 0.0)) return a;
      break;
    case BinaryOp::Sub:
      if (is_const(b, 0.0)) return a;
      if (is_const(a, 0.0)) return make_unary(UnaryOp::Neg, b);
      break;
    case BinaryOp::Mul:
      if (is_const(a, 0.0) || is_const(b, 0.0)) return make_constant(0.0);
      if (is_const(a, 1.0)) return b;
      if (is_const(b, 1.0)) return a;
      break;
    case BinaryOp::Div:
      if (is_const(a, 0.0)) return make_constant(0.0);
      if (is_const(b, 1.0)) return a;
      break;
  }
  auto n = std::make_shared<Node>();
  n->kind = Node::Kind::Binary;
  n->bop = op;
  n->a = std::move(a);
  n->b = std::move(b);
  return n;
}

NodePtr make_unary(UnaryOp op, NodePtr a) {
  if (op == UnaryOp::Neg) {
    if (a->kind == Node::Kind::Constant) return make_constant(-a->value);
    if (a->kind == Node::Kind::Unary && a->uop == UnaryOp::Neg) return a->a;
  }
  auto n = std::make_shared<Node>();
  n->kind = Node::Kind::Unary;
  n->uop = op;
  n->a = std::move(a);
  return n;
}

NodePtr make_intpow(NodePtr a, int e) {
  if (e == 0) return make_constant(1.0);
  if (e == 1) return a;
  if (a->kind == Node::Kind::Constant) return make_constant(std::pow(a->value, e));
  auto n = std::make_shared<Node>();
  n->kind = Node::Kind::IntPow;
  n->exponent = e;
  n->a = std::move(a);
  return n;
}

double eval_node(const Node& n, std::span<const double> b) {
  switch (n.kind) {
    case Node::Kind::Constant:
      return n.value;
    case Node::Kind::Variable:
      if (n.var < 0 || static_cast<std::size_t>(n.var) >= b.size())
        throw EvalError("unbound variable index " + std::to_string(n.var));
      return b[static_cast<std::size_t>(n.var)];
    case Node::Kind::Unary: {
      double x = eval_node(*n.a, b);
      switch (n.uop) {
        case UnaryOp::Neg:
          return -x;
        case UnaryOp::Ln:
          if (x <= 0.0) throw EvalError("ln of non-positive value");
          return std::log(x);
        case UnaryOp::Exp:
          return std::exp(x);
        case UnaryOp::Sin:
          return std::sin(x);
        case UnaryOp::Cos:
          return std::cos(x);
        case UnaryOp::Sqrt:
          if (x < 0.0) throw EvalError("sqrt of negative value");
          return std::sqrt(x);
      }
      break;
    }
    case Node::Kind::Binary: {
      double x = eval_node(*n.a, b);
      double y = eval_node(*n.b, b);
      switch (n.bop) {
        case BinaryOp::Add:
          return x + y;
        case BinaryOp::Sub:
          return x - y;
        case BinaryOp::Mul:
          return x * y;
        case BinaryOp::Div:
          if (y == 0.0) throw EvalError("division by zero");
          return x / y;
      }
      break;
    }
    case Node::Kind::IntPow: {
      double x = eval_node(*n.a, b);
      if (x == 0.0 && n.exponent < 0) throw EvalError("zero raised to negative power");
      return std::pow(x, n.exponent);
    }
  }
  throw EvalError("malformed expression node");
}

NodePtr diff_node(const NodePtr& n, int var) {
  switch (n->kind) {
    case Node::Kind::Constant:
      return make_constant(0.0);
    case Node::Kind::Variable:
      return make_constant(n->var == var ? 1.0 : 0.0);
    case Node::Kind::Unary: {
      NodePtr da = diff_node(n->a, var);
      switch (n->uop) {
        case UnaryOp::Neg:
          return make_unary(UnaryOp::Neg, da);
        case UnaryOp::Ln:
          return make_binary(BinaryOp::Div, da, n->a);
        case UnaryOp::Exp:
          return make_binary(BinaryOp::Mul, da, make_unary(UnaryOp::Exp, n->a));
        case UnaryOp::Sin:
          return make_binary(BinaryOp::Mul, da, make_unary(UnaryOp::Cos, n->a));
        case UnaryOp::Cos:
          return make_unary(
              UnaryOp::Neg, make_binary(BinaryOp::Mul, da, make_unary(UnaryOp::Sin, n->a)));
        case UnaryOp::Sqrt:
          return make_binary(
              BinaryOp::Div, da,
              make_binary(BinaryOp::Mul, make_constant(2.0), make_unary(UnaryOp::Sqrt, n->a)));
      }
      break;
    }
    case Node::Kind::Binary: {
      NodePtr da = diff_node(n->a, var);
      NodePtr db = diff_node(n->b, var);
      switch (n->bop) {
        case BinaryOp::Add:
          return make_binary(BinaryOp::Add, da, db);
        case BinaryOp::Sub:
          return make_binary(BinaryOp::Sub, da, db);
        case BinaryOp::Mul:
          return make_binary(BinaryOp::Add, make_binary(BinaryOp::Mul, da, n->b),
                             make_binary(BinaryOp::Mul, n->a, db));
        case BinaryOp::Div:
          // (a/b)' = a'/b - a b' / b^2
          return make_binary(
              BinaryOp::Sub, make_binary(BinaryOp::Div, da, n->b),
              make_binary(BinaryOp::Div, make_binary(BinaryOp::Mul, n->a, db),
                          make_intpow(n->b, 2)));
      }
      break;
    }
    case Node::Kind::IntPow: {
      NodePtr da = diff_node(n->a, var);
      // d(a^e) = e a^(e-1) a'
      return make_binary(
          BinaryOp::Mul, make_constant(static_cast<double>(n->exponent)),
          make_binary(BinaryOp::Mul, make_intpow(n->a, n->exponent - 1), da));
    }
  }
  throw EvalError("malformed expression node");
}

const char* unary_name(UnaryOp op) {
  switch (op) {
    case UnaryOp::Neg:
      return "-";
    case UnaryOp::Ln:
      return "ln";
    case UnaryOp::Exp:
      return "exp";
    case UnaryOp::Sin:
      return "sin";
    case UnaryOp::Cos:
      return "cos";
    case UnaryOp::Sqrt:
      return "sqrt";
  }
  return "?";
}

// Precedence levels for printing: 0 add/sub, 1 mul/div, 2 unary, 3 pow/atom.
void print_node(std::ostringstream& os, const Node& n, const std::vector<std::string>& vars,
                int parent_prec) {
  switch (n.kind) {
    case Node::Kind::Constant: {
      if (n.value < 0 && parent_prec > 0) {
        os << '(';
        os.precision(17);
        os << n.value << ')';
      } else {
        os.precision(17);
        os << n.value;
      }
      return;
    }
    case Node::Kind::Variable:
      os << vars[static_cast<std::size_t>(n.var)];
      return;
    case Node::Kind::Unary: {
      if (n.uop == UnaryOp::Neg) {
        bool paren = parent_prec > 2;
        if (paren) os << '(';
        os << '-';
        print_node(os, *n.a, vars, 2);
        if (paren) os << ')';
      } else {
        os << unary_name(n.uop) << '(';
        print_node(os, *n.a, vars, 0);
        os << ')';
      }
      return;
    }
    case Node::Kind::Binary: {
      int prec = (n.bop == BinaryOp::Add || n.bop == BinaryOp::Sub) ? 0 : 1;
      bool paren = prec < parent_prec;
      if (paren) os << '(';
      print_node(os, *n.a, vars, prec);
      switch (n.bop) {
        case BinaryOp::Add:
          os << " + ";
          break;
        case BinaryOp::Sub:
          os << " - ";
          break;
        case BinaryOp::Mul:
          os << "*";
          break;
        case BinaryOp::Div:
          os << "/";
          break;
      }
      // Right operand gets one level higher to respect left associativity.
      print_node(os, *n.b, vars, prec + 1);
      if (paren) os << ')';
      return;
    }
    case Node::Kind::IntPow: {
      bool paren = parent_prec > 3;
      if (paren) os << '(';
      print_node(os, *n.a, vars, 4);
      os << '^';
      if (n.exponent < 0)
        os << '(' << n.exponent << ')';
      else
        os << n.exponent;
      if (paren) os << ')';
      return;
    }
  }
}

class Parser {
 public:
  Parser(std::string_view text, const std::vector<std::string>& vars)
      : text_(text), vars_(vars) {}

  NodePtr run() {
    NodePtr e = parse_expr();
    skip_ws();
    if (pos_ != text_.size()) throw ParseError("unexpected trailing input", pos_);
    return e;
  }

 private:
  std::string_view text_;
  const std::vector<std::string>& vars_;
  std::size_t pos_ = 0;

  void skip_ws() {
    while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
  }

  bool peek(char c) {
    skip_ws();
    return pos_ < text_.size() && text_[pos_] == c;
  }

  bool accept(char c) {
    if (peek(c)) {
      ++pos_;
      return true;
    }
    return false;
  }

  NodePtr parse_expr() {
    NodePtr lhs = parse_term();
    for (;;) {
      if (accept('+'))
        lhs = make_binary(BinaryOp::Add, lhs, parse_term());
      else if (accept('-'))
        lhs = make_binary(BinaryOp::Sub, lhs, parse_term());
      else
        return lhs;
    }
  }

  NodePtr parse_term() {
    NodePtr lhs = parse_factor();
    for (;;) {
      if (accept('*'))
        lhs = make_binary(BinaryOp::Mul, lhs, parse_factor());
      else if (accept('/'))
        lhs = make_binary(BinaryOp::Div, lhs, parse_factor());
      else
        return lhs;
    }
  }

  NodePtr parse_factor() {
    if (accept('-')) return make_unary(UnaryOp::Neg, parse_factor());
    return parse_power();
  }

  NodePtr parse_power() {
    NodePtr base = parse_atom();
    if (accept('^')) return make_intpow(base, parse_int_exponent());
    return base;
  }

  int parse_int_exponent() {
    skip_ws();
    bool paren = accept('(');
    skip_ws();
    std::size_t start = pos_;
    if (pos_ < text_.size() && (text_[pos_] == '-' || text_[pos_] == '+')) ++pos_;
    std::size_t digits = pos_;
    while (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_]))) ++pos_;
    if (pos_ == digits) throw ParseError("expected integer exponent", start);
    int value = 0;
    auto res = std::from_chars(text_.data() + start, text_.data() + pos_, value);
    if (res.ec != std::errc{}) throw ParseError("invalid integer exponent", start);
    if (paren && !accept(')')) throw ParseError("expected ')'", pos_);
    return value;
  }

  NodePtr parse_atom() {
    skip_ws();
    if (pos_ >= text_.size()) throw ParseError("expected expression", pos_);
    char c = text_[pos_];
    if (c == '(') {
      ++pos_;
      NodePtr e = parse_expr();
      if (!accept(')')) throw ParseError("expected ')'", pos_);
      return e;
    }
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return parse_number();
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') return parse_identifier();
    throw ParseError("expected expression", pos_);
  }

  NodePtr parse_number() {
    std::size_t start = pos_;
    double value = 0;
    auto res = std::from_chars(text_.data() + pos_, text_.data() + text_.size(), value);
    if (res.ec != std::errc{}) throw ParseError("invalid number", start);
    pos_ = static_cast<std::size_t>(res.ptr - text_.data());
    return make_constant(value);
  }

  NodePtr parse_identifier() {
    std::size_t start = pos_;
    while (pos_ < text_.size() && (std::isalnum(static_cast<unsigned char>(text_[pos_])) ||
                                   text_[pos_] == '_'))
      ++pos_;
    std::string name(text_.substr(start, pos_ - start));
    if (accept('(')) {
      UnaryOp op;
      if (name == "ln")
        op = UnaryOp::Ln;
      else if (name == "exp")
        op = UnaryOp::Exp;
      else if (name == "sin")
        op = UnaryOp::Sin;
      else if (name == "cos")
        op = UnaryOp::Cos;
      else if (name == "sqrt")
        op = UnaryOp::Sqrt;
      else
        throw ParseError("unknown function '" + name + "'", start);
      NodePtr arg = parse_expr();
      if (!accept(')')) throw ParseError("expected ')'", pos_);
      return make_unary(op, arg);
    }
    for (std::size_t i = 0; i < vars_.size(); ++i)
      if (vars_[i] == name) return make_variable(static_cast<int>(i));
    throw ParseError("unknown identifier '" + name + "'", start);
  }
};

}  // namespace

Expr Expr::constant(double value, std::vector<std::string> vars) {
  return Expr(make_constant(value),
              std::make_shared<const std::vector<std::string>>(std::move(vars)));
}

double Expr::eval(std::span<const double> bindings) const {
  if (!root_) throw EvalError("empty expression");
  if (bindings.size() != vars_->size())
    throw EvalError("binding count does not match declared variables");
  double v = eval_node(*root_, bindings);
  if (!std::isfinite(v)) throw EvalError("non-finite result");
  return v;
}

double Expr::eval(const std::map<std::string, double>& bindings) const {
  std::vector<double> b(vars_->size());
  for (std::size_t i = 0; i < vars_->size(); ++i) {
    auto it = bindings.find((*vars_)[i]);
    if (it == bindings.end()) throw EvalError("unbound variable '" + (*vars_)[i] + "'");
    b[i] = it->second;
  }
  return eval(b);
}

Expr Expr::differentiate(std::string_view var) const {
  for (std::size_t i = 0; i < vars_->size(); ++i)
    if ((*vars_)[i] == var) return differentiate(static_cast<int>(i));
  throw EvalError("cannot differentiate by undeclared variable '" + std::string(var) + "'");
}

Expr Expr::differentiate(int var_index) const {
  if (!root_) throw EvalError("empty expression");
  return Expr(diff_node(root_, var_index), vars_);
}

bool Expr::is_zero() const {
  return root_ && root_->kind == Node::Kind::Constant && root_->value == 0.0;
}

std::string Expr::to_string() const {
  if (!root_) return "";
  std::ostringstream os;
  print_node(os, *root_, *vars_, 0);
  return os.str();
}

Expr parse(std::string_view text, std::vector<std::string> vars) {
  return parse_shared(text, std::make_shared<const std::vector<std::string>>(std::move(vars)));
}

Expr parse_shared(std::string_view text, std::shared_ptr<const std::vector<std::string>> vars) {
  if (text.empty()) throw ParseError("empty expression", 0);
  Parser p(text, *vars);
  return Expr(p.run(), std::move(vars));
}

}  // namespace riemoc::expr
