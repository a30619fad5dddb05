#pragma once

#include "nhim/jet.hpp"

#include <map>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace nhim::dsl {

enum class NodeKind { Number, Pi, Variable, Parameter, Neg, Add, Sub, Mul, Div, Pow, Call };

enum class Function { Sin, Cos, Tan, Exp, Log, Sqrt, Abs, Tanh };

struct Node;
using NodePtr = std::shared_ptr<const Node>;

/// Immutable AST node. `value` holds the literal (Number) or the bound value
/// (Parameter); `index` is the variable slot.
struct Node {
  NodeKind kind = NodeKind::Number;
  double value = 0.0;
  int index = -1;
  std::string name;
  Function function = Function::Sin;
  NodePtr lhs;
  NodePtr rhs;
};

/// Names visible to a formula: ordered variables (their position is the
/// evaluation slot) and parameters bound to values at parse time.
struct Declarations {
  std::vector<std::string> variables;
  std::map<std::string, double> parameters;
};

/**
 * Scalar expression over declared variables and parameters.
 *
 * Grammar:
 *   expr   := term (('+'|'-') term)*
 *   term   := factor (('*'|'/') factor)*
 *   factor := ('-')? power
 *   power  := atom ('^' atom)?
 *   atom   := number | ident | ident '(' expr ')' | '(' expr ')' | 'pi'
 *
 * Exponents must not depend on variables. Integer exponents are expanded by
 * repeated multiplication; other exponents require a positive base.
 */
class Expression {
 public:
  Expression() = default;
  explicit Expression(NodePtr root) : root_(std::move(root)) {}

  static Expression number(double v);
  static Expression add(const Expression& a, const Expression& b);
  static Expression mul(const Expression& a, const Expression& b);

  const NodePtr& root() const noexcept { return root_; }
  bool empty() const noexcept { return root_ == nullptr; }

  /// Throws DomainError on log/sqrt/pow/division domain violations.
  double evaluate(std::span<const double> vars) const;
  Jet evaluate(std::span<const Jet> vars) const;

  /// Canonical text with the minimum parentheses required by the grammar.
  std::string to_string() const;

  bool depends_on_variables() const;

 private:
  NodePtr root_;
};

/// Throws ParseError carrying the byte offset of the offending token.
Expression parse_expression(std::string_view text, const Declarations& decls);

bool structurally_equal(const Expression& a, const Expression& b);

const char* function_name(Function f);

}  // namespace nhim::dsl
