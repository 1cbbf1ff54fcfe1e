#include "drbsde/expression.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "drbsde/io.hpp"

namespace drbsde {

struct Expression::Node {
  enum class Op { number, t, state, add, sub, mul, neg, abs, min, max } op;
  double value = 0.0;
  std::vector<std::shared_ptr<const Node>> args;

  double eval(double t, double x) const {
    switch (op) {
      case Op::number: return value;
      case Op::t: return t;
      case Op::state: return x;
      case Op::add: return args[0]->eval(t, x) + args[1]->eval(t, x);
      case Op::sub: return args[0]->eval(t, x) - args[1]->eval(t, x);
      case Op::mul: return args[0]->eval(t, x) * args[1]->eval(t, x);
      case Op::neg: return -args[0]->eval(t, x);
      case Op::abs: return std::abs(args[0]->eval(t, x));
      case Op::min: return std::min(args[0]->eval(t, x), args[1]->eval(t, x));
      case Op::max: return std::max(args[0]->eval(t, x), args[1]->eval(t, x));
    }
    return 0.0;
  }

  bool constant() const {
    if (op == Op::t || op == Op::state) return false;
    return std::all_of(args.begin(), args.end(), [](const auto& a) { return a->constant(); });
  }
};

namespace {

using NodePtr = std::shared_ptr<const Expression::Node>;
using Op = Expression::Node::Op;

NodePtr make(Op op, std::vector<NodePtr> args = {}, double value = 0.0) {
  auto n = std::make_shared<Expression::Node>();
  n->op = op;
  n->value = value;
  n->args = std::move(args);
  return n;
}

class Parser {
 public:
  explicit Parser(const std::string& text) : s_(text) {}

  NodePtr parse() {
    NodePtr e = expr();
    skip();
    if (pos_ != s_.size()) fail("unexpected '" + std::string(1, s_[pos_]) + "'");
    return e;
  }

 private:
  [[noreturn]] void fail(const std::string& what) const {
    throw std::invalid_argument("expression '" + s_ + "', position " + std::to_string(pos_) +
                                ": " + what);
  }

  void skip() {
    while (pos_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[pos_]))) ++pos_;
  }

  bool accept(char c) {
    skip();
    if (pos_ < s_.size() && s_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }

  void expect(char c) {
    if (!accept(c)) fail(std::string("expected '") + c + "'");
  }

  NodePtr expr() {
    NodePtr left = term();
    for (;;) {
      if (accept('+')) {
        left = make(Op::add, {left, term()});
      } else if (accept('-')) {
        left = make(Op::sub, {left, term()});
      } else {
        return left;
      }
    }
  }

  NodePtr term() {
    NodePtr left = unary();
    while (accept('*')) left = make(Op::mul, {left, unary()});
    return left;
  }

  NodePtr unary() {
    if (accept('-')) return make(Op::neg, {unary()});
    return primary();
  }

  NodePtr primary() {
    skip();
    if (pos_ >= s_.size()) fail("unexpected end of input");
    if (accept('(')) {
      NodePtr e = expr();
      expect(')');
      return e;
    }
    const char c = s_[pos_];
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return number();
    if (std::isalpha(static_cast<unsigned char>(c))) {
      const std::size_t start = pos_;
      while (pos_ < s_.size() && std::isalpha(static_cast<unsigned char>(s_[pos_]))) ++pos_;
      const std::string word = s_.substr(start, pos_ - start);
      if (word == "t") return make(Op::t);
      if (word == "state") return make(Op::state);
      if (word == "abs") {
        expect('(');
        NodePtr a = expr();
        expect(')');
        return make(Op::abs, {a});
      }
      if (word == "min" || word == "max") {
        expect('(');
        NodePtr a = expr();
        expect(',');
        NodePtr b = expr();
        expect(')');
        return make(word == "min" ? Op::min : Op::max, {a, b});
      }
      pos_ = start;
      fail("unknown name '" + word + "'");
    }
    fail("unexpected '" + std::string(1, c) + "'");
  }

  NodePtr number() {
    double v = 0.0;
    const char* first = s_.data() + pos_;
    const char* last = s_.data() + s_.size();
    const auto [ptr, ec] = std::from_chars(first, last, v);
    if (ec != std::errc() || !std::isfinite(v)) fail("malformed number");
    pos_ += static_cast<std::size_t>(ptr - first);
    return make(Op::number, {}, v);
  }

  const std::string& s_;
  std::size_t pos_ = 0;
};

}  // namespace

Expression::Expression(std::string text, std::shared_ptr<const Node> root)
    : text_(std::move(text)), root_(std::move(root)) {}

Expression Expression::parse(const std::string& text) {
  Parser p(text);
  NodePtr root = p.parse();
  return Expression(text, std::move(root));
}

Expression Expression::constant(double value) {
  return Expression(format_real(value), make(Op::number, {}, value));
}

double Expression::operator()(double t, double state) const { return root_->eval(t, state); }

bool Expression::is_constant() const { return root_->constant(); }

}  // namespace drbsde
