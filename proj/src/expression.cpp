#include "nhim/expression.hpp"

#include "nhim/errors.hpp"

#include <cctype>
#include <charconv>
#include <cmath>
#include <optional>

namespace nhim::dsl {

namespace {

enum class Tok { Number, Ident, Op, LParen, RParen, End };

struct Token {
  Tok kind = Tok::End;
  std::size_t offset = 0;
  std::string_view text;
  double number = 0.0;
  char op = 0;
};

class Lexer {
 public:
  explicit Lexer(std::string_view src) : src_(src) {}

  Token next() {
    while (pos_ < src_.size() && std::isspace(static_cast<unsigned char>(src_[pos_]))) ++pos_;
    Token t;
    t.offset = pos_;
    if (pos_ >= src_.size()) return t;
    const char c = src_[pos_];
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return lex_number();
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      const std::size_t start = pos_;
      while (pos_ < src_.size() && (std::isalnum(static_cast<unsigned char>(src_[pos_])) ||
                                    src_[pos_] == '_')) {
        ++pos_;
      }
      t.kind = Tok::Ident;
      t.text = src_.substr(start, pos_ - start);
      return t;
    }
    ++pos_;
    switch (c) {
      case '+': case '-': case '*': case '/': case '^':
        t.kind = Tok::Op;
        t.op = c;
        return t;
      case '(': t.kind = Tok::LParen; return t;
      case ')': t.kind = Tok::RParen; return t;
      default:
        throw ParseError(std::string("syntax error: unexpected character '") + c + "'", t.offset);
    }
  }

 private:
  Token lex_number() {
    Token t;
    t.offset = pos_;
    const std::size_t start = pos_;
    auto digits = [&] {
      std::size_t d = 0;
      while (pos_ < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_]))) {
        ++pos_;
        ++d;
      }
      return d;
    };
    std::size_t count = digits();
    if (pos_ < src_.size() && src_[pos_] == '.') {
      ++pos_;
      count += digits();
    }
    if (count == 0) throw ParseError("syntax error: malformed number", start);
    if (pos_ < src_.size() && (src_[pos_] == 'e' || src_[pos_] == 'E')) {
      const std::size_t save = pos_;
      ++pos_;
      if (pos_ < src_.size() && (src_[pos_] == '+' || src_[pos_] == '-')) ++pos_;
      if (digits() == 0) pos_ = save;
    }
    t.kind = Tok::Number;
    t.text = src_.substr(start, pos_ - start);
    const auto res = std::from_chars(t.text.data(), t.text.data() + t.text.size(), t.number);
    if (res.ec != std::errc() || res.ptr != t.text.data() + t.text.size()) {
      throw ParseError("syntax error: malformed number", start);
    }
    return t;
  }

  std::string_view src_;
  std::size_t pos_ = 0;
};

std::optional<Function> lookup_function(std::string_view name) {
  if (name == "sin") return Function::Sin;
  if (name == "cos") return Function::Cos;
  if (name == "tan") return Function::Tan;
  if (name == "exp") return Function::Exp;
  if (name == "log") return Function::Log;
  if (name == "sqrt") return Function::Sqrt;
  if (name == "abs") return Function::Abs;
  if (name == "tanh") return Function::Tanh;
  return std::nullopt;
}

NodePtr make_node(NodeKind kind, NodePtr lhs = nullptr, NodePtr rhs = nullptr) {
  auto n = std::make_shared<Node>();
  n->kind = kind;
  n->lhs = std::move(lhs);
  n->rhs = std::move(rhs);
  return n;
}

bool has_variables(const NodePtr& n) {
  if (!n) return false;
  if (n->kind == NodeKind::Variable) return true;
  return has_variables(n->lhs) || has_variables(n->rhs);
}

class Parser {
 public:
  Parser(std::string_view text, const Declarations& decls) : lex_(text), decls_(decls) {
    advance();
  }

  NodePtr parse() {
    if (cur_.kind == Tok::End) throw ParseError("syntax error: empty expression", cur_.offset);
    NodePtr root = expr();
    if (cur_.kind != Tok::End) unexpected();
    return root;
  }

 private:
  void advance() { cur_ = lex_.next(); }

  [[noreturn]] void unexpected() const {
    std::string what;
    switch (cur_.kind) {
      case Tok::End: what = "end of input"; break;
      case Tok::Op: what = std::string("'") + cur_.op + "'"; break;
      case Tok::LParen: what = "'('"; break;
      case Tok::RParen: what = "')'"; break;
      default: what = "'" + std::string(cur_.text) + "'"; break;
    }
    throw ParseError("syntax error: unexpected " + what, cur_.offset);
  }

  bool at_op(char c) const { return cur_.kind == Tok::Op && cur_.op == c; }

  NodePtr expr() {
    NodePtr lhs = term();
    while (at_op('+') || at_op('-')) {
      const NodeKind k = cur_.op == '+' ? NodeKind::Add : NodeKind::Sub;
      advance();
      lhs = make_node(k, std::move(lhs), term());
    }
    return lhs;
  }

  NodePtr term() {
    NodePtr lhs = factor();
    while (at_op('*') || at_op('/')) {
      const NodeKind k = cur_.op == '*' ? NodeKind::Mul : NodeKind::Div;
      advance();
      lhs = make_node(k, std::move(lhs), factor());
    }
    return lhs;
  }

  NodePtr factor() {
    if (at_op('-')) {
      advance();
      return make_node(NodeKind::Neg, power());
    }
    return power();
  }

  NodePtr power() {
    NodePtr base = atom();
    if (at_op('^')) {
      advance();
      const std::size_t at = cur_.offset;
      NodePtr exponent = atom();
      if (has_variables(exponent)) throw ParseError("exponent must be constant", at);
      return make_node(NodeKind::Pow, std::move(base), std::move(exponent));
    }
    return base;
  }

  NodePtr atom() {
    if (cur_.kind == Tok::Number) {
      auto n = std::make_shared<Node>();
      n->kind = NodeKind::Number;
      n->value = cur_.number;
      advance();
      return n;
    }
    if (cur_.kind == Tok::LParen) {
      advance();
      NodePtr inner = expr();
      if (cur_.kind != Tok::RParen) unexpected();
      advance();
      return inner;
    }
    if (cur_.kind != Tok::Ident) unexpected();
    const Token ident = cur_;
    advance();
    if (cur_.kind == Tok::LParen) {
      const auto fn = lookup_function(ident.text);
      if (!fn) throw ParseError("unknown function '" + std::string(ident.text) + "'", ident.offset);
      advance();
      auto n = std::make_shared<Node>();
      n->kind = NodeKind::Call;
      n->function = *fn;
      n->name = std::string(ident.text);
      n->lhs = expr();
      if (cur_.kind != Tok::RParen) unexpected();
      advance();
      return n;
    }
    if (ident.text == "pi") {
      auto n = std::make_shared<Node>();
      n->kind = NodeKind::Pi;
      n->value = kPi;
      n->name = "pi";
      return n;
    }
    for (std::size_t i = 0; i < decls_.variables.size(); ++i) {
      if (decls_.variables[i] == ident.text) {
        auto n = std::make_shared<Node>();
        n->kind = NodeKind::Variable;
        n->index = static_cast<int>(i);
        n->name = decls_.variables[i];
        return n;
      }
    }
    if (const auto it = decls_.parameters.find(std::string(ident.text));
        it != decls_.parameters.end()) {
      auto n = std::make_shared<Node>();
      n->kind = NodeKind::Parameter;
      n->value = it->second;
      n->name = it->first;
      return n;
    }
    throw ParseError("undeclared identifier '" + std::string(ident.text) + "'", ident.offset);
  }

  Lexer lex_;
  const Declarations& decls_;
  Token cur_;
};

// ---- evaluation ------------------------------------------------------------

template <class T>
struct Scalar;

template <>
struct Scalar<double> {
  int dim = 0;
  double constant(double v) const { return v; }
};

template <>
struct Scalar<Jet> {
  int dim = 0;
  Jet constant(double v) const { return Jet(v, dim); }
};

template <class T>
T integer_power(const T& base, long long e) {
  const long long k = e < 0 ? -e : e;
  T result = base;
  for (long long i = 1; i < k; ++i) result = result * base;
  return result;
}

template <class T>
T eval_node(const Node& node, std::span<const T> vars, const Scalar<T>& sc) {
  using std::abs, std::cos, std::exp, std::log, std::sin, std::sqrt, std::tan, std::tanh;
  switch (node.kind) {
    case NodeKind::Number:
    case NodeKind::Pi:
    case NodeKind::Parameter:
      return sc.constant(node.value);
    case NodeKind::Variable:
      return vars[static_cast<std::size_t>(node.index)];
    case NodeKind::Neg:
      return -eval_node(*node.lhs, vars, sc);
    case NodeKind::Add:
      return eval_node(*node.lhs, vars, sc) + eval_node(*node.rhs, vars, sc);
    case NodeKind::Sub:
      return eval_node(*node.lhs, vars, sc) - eval_node(*node.rhs, vars, sc);
    case NodeKind::Mul:
      return eval_node(*node.lhs, vars, sc) * eval_node(*node.rhs, vars, sc);
    case NodeKind::Div: {
      const T den = eval_node(*node.rhs, vars, sc);
      if (value_of(den) == 0.0) throw DomainError("division by zero");
      return eval_node(*node.lhs, vars, sc) / den;
    }
    case NodeKind::Pow: {
      const Scalar<double> plain;
      const double e = eval_node<double>(*node.rhs, {}, plain);
      const T b = eval_node(*node.lhs, vars, sc);
      if (e == std::round(e) && std::abs(e) <= 1024.0) {
        const auto k = static_cast<long long>(e);
        if (k == 0) return sc.constant(1.0);
        if (k < 0 && value_of(b) == 0.0) throw DomainError("negative power of zero");
        const T p = integer_power(b, k);
        return k < 0 ? sc.constant(1.0) / p : p;
      }
      if (!(value_of(b) > 0.0)) throw DomainError("non-integer power of non-positive base");
      return exp(sc.constant(e) * log(b));
    }
    case NodeKind::Call: {
      const T a = eval_node(*node.lhs, vars, sc);
      switch (node.function) {
        case Function::Sin: return sin(a);
        case Function::Cos: return cos(a);
        case Function::Tan: return tan(a);
        case Function::Exp: return exp(a);
        case Function::Log:
          if (!(value_of(a) > 0.0)) throw DomainError("log of non-positive argument");
          return log(a);
        case Function::Sqrt:
          if (value_of(a) < 0.0) throw DomainError("sqrt of negative argument");
          if constexpr (std::is_same_v<T, Jet>) {
            if (value_of(a) == 0.0) throw DomainError("sqrt is not differentiable at 0");
          }
          return sqrt(a);
        case Function::Abs: return abs(a);
        case Function::Tanh: return tanh(a);
      }
      break;
    }
  }
  throw DomainError("malformed expression node");
}

// ---- printing --------------------------------------------------------------

int precedence(const Node& n) {
  switch (n.kind) {
    case NodeKind::Number: return n.value < 0.0 || std::signbit(n.value) ? 3 : 5;
    case NodeKind::Pi:
    case NodeKind::Variable:
    case NodeKind::Parameter:
    case NodeKind::Call: return 5;
    case NodeKind::Pow: return 4;
    case NodeKind::Neg: return 3;
    case NodeKind::Mul:
    case NodeKind::Div: return 2;
    case NodeKind::Add:
    case NodeKind::Sub: return 1;
  }
  return 0;
}

void print_number(double v, std::string& out) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), std::abs(v));
  if (std::signbit(v)) out += '-';
  out.append(buf, res.ptr);
}

void print(const Node& n, std::string& out);

void print_operand(const Node& n, int min_prec, std::string& out) {
  if (precedence(n) < min_prec) {
    out += '(';
    print(n, out);
    out += ')';
  } else {
    print(n, out);
  }
}

void print(const Node& n, std::string& out) {
  switch (n.kind) {
    case NodeKind::Number: print_number(n.value, out); return;
    case NodeKind::Pi:
    case NodeKind::Variable:
    case NodeKind::Parameter: out += n.name; return;
    case NodeKind::Call:
      out += function_name(n.function);
      out += '(';
      print(*n.lhs, out);
      out += ')';
      return;
    case NodeKind::Neg:
      out += '-';
      print_operand(*n.lhs, 4, out);
      return;
    case NodeKind::Pow:
      print_operand(*n.lhs, 5, out);
      out += '^';
      print_operand(*n.rhs, 5, out);
      return;
    case NodeKind::Mul:
    case NodeKind::Div:
      print_operand(*n.lhs, 2, out);
      out += n.kind == NodeKind::Mul ? "*" : "/";
      print_operand(*n.rhs, 3, out);
      return;
    case NodeKind::Add:
    case NodeKind::Sub:
      print_operand(*n.lhs, 1, out);
      out += n.kind == NodeKind::Add ? " + " : " - ";
      print_operand(*n.rhs, 2, out);
      return;
  }
}

bool equal_nodes(const NodePtr& a, const NodePtr& b) {
  if (!a || !b) return a == b;
  if (a->kind != b->kind) return false;
  switch (a->kind) {
    case NodeKind::Number:
    case NodeKind::Pi:
      if (a->value != b->value) return false;
      break;
    case NodeKind::Parameter:
      if (a->name != b->name || a->value != b->value) return false;
      break;
    case NodeKind::Variable:
      if (a->index != b->index) return false;
      break;
    case NodeKind::Call:
      if (a->function != b->function) return false;
      break;
    default: break;
  }
  return equal_nodes(a->lhs, b->lhs) && equal_nodes(a->rhs, b->rhs);
}

}  // namespace

const char* function_name(Function f) {
  switch (f) {
    case Function::Sin: return "sin";
    case Function::Cos: return "cos";
    case Function::Tan: return "tan";
    case Function::Exp: return "exp";
    case Function::Log: return "log";
    case Function::Sqrt: return "sqrt";
    case Function::Abs: return "abs";
    case Function::Tanh: return "tanh";
  }
  return "?";
}

Expression Expression::number(double v) {
  auto n = std::make_shared<Node>();
  n->kind = NodeKind::Number;
  n->value = v;
  return Expression(n);
}

Expression Expression::add(const Expression& a, const Expression& b) {
  return Expression(make_node(NodeKind::Add, a.root(), b.root()));
}

Expression Expression::mul(const Expression& a, const Expression& b) {
  return Expression(make_node(NodeKind::Mul, a.root(), b.root()));
}

double Expression::evaluate(std::span<const double> vars) const {
  if (!root_) throw DomainError("empty expression");
  return eval_node<double>(*root_, vars, Scalar<double>{});
}

Jet Expression::evaluate(std::span<const Jet> vars) const {
  if (!root_) throw DomainError("empty expression");
  Scalar<Jet> sc;
  sc.dim = vars.empty() ? 0 : vars.front().dim;
  return eval_node<Jet>(*root_, vars, sc);
}

std::string Expression::to_string() const {
  std::string out;
  if (root_) print(*root_, out);
  return out;
}

bool Expression::depends_on_variables() const { return has_variables(root_); }

Expression parse_expression(std::string_view text, const Declarations& decls) {
  Parser p(text, decls);
  return Expression(p.parse());
}

bool structurally_equal(const Expression& a, const Expression& b) {
  return equal_nodes(a.root(), b.root());
}

}  // namespace nhim::dsl
