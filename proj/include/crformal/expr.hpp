#pragma once

#include <cctype>
#include <memory>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "series.hpp"

namespace crformal {

namespace expr_detail {

enum class TokKind { kNumber, kIdent, kOp, kEnd };

struct Token {
  TokKind kind;
  std::string text;
  std::size_t pos;
};

inline std::vector<Token> lex(const std::string& src) {
  std::vector<Token> out;
  std::size_t k = 0;
  while (k < src.size()) {
    char c = src[k];
    if (std::isspace(static_cast<unsigned char>(c))) {
      ++k;
      continue;
    }
    if (std::isdigit(static_cast<unsigned char>(c))) {
      std::size_t start = k;
      while (k < src.size() &&
             std::isdigit(static_cast<unsigned char>(src[k])))
        ++k;
      out.push_back({TokKind::kNumber, src.substr(start, k - start), start});
      continue;
    }
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      std::size_t start = k;
      while (k < src.size() &&
             (std::isalnum(static_cast<unsigned char>(src[k])) ||
              src[k] == '_'))
        ++k;
      out.push_back({TokKind::kIdent, src.substr(start, k - start), start});
      continue;
    }
    if (std::string("+-*/^()").find(c) != std::string::npos) {
      out.push_back({TokKind::kOp, std::string(1, c), k});
      ++k;
      continue;
    }
    throw std::runtime_error("unexpected character '" + std::string(1, c) +
                             "' at position " + std::to_string(k));
  }
  out.push_back({TokKind::kEnd, "", src.size()});
  return out;
}

struct Node {
  enum Kind {
    kNumber,
    kImagUnit,
    kVar,
    kAdd,
    kSub,
    kMul,
    kDiv,
    kNeg,
    kPow,
    kRe,
    kIm,
    kConj
  };
  Kind kind;
  Rational number;
  int var_index = 0;  // 1-based coordinate index for kVar
  int exponent = 0;   // for kPow
  std::unique_ptr<Node> lhs, rhs;
};

using NodePtr = std::unique_ptr<Node>;

inline NodePtr make(Node::Kind kind, NodePtr lhs = nullptr,
                    NodePtr rhs = nullptr) {
  auto n = std::make_unique<Node>();
  n->kind = kind;
  n->lhs = std::move(lhs);
  n->rhs = std::move(rhs);
  return n;
}

class Parser {
 public:
  explicit Parser(std::vector<Token> toks) : toks_(std::move(toks)) {}

  NodePtr parse() {
    NodePtr e = sum();
    expect_end();
    return e;
  }

  int max_var_index() const { return max_var_; }

 private:
  const Token& peek() const { return toks_[pos_]; }
  Token take() { return toks_[pos_++]; }

  [[noreturn]] void fail(const std::string& what) {
    throw std::runtime_error(what + " at position " +
                             std::to_string(peek().pos));
  }

  void expect_end() {
    if (peek().kind != TokKind::kEnd) fail("trailing input");
  }

  bool take_op(const std::string& op) {
    if (peek().kind == TokKind::kOp && peek().text == op) {
      ++pos_;
      return true;
    }
    return false;
  }

  NodePtr sum() {
    NodePtr e = product();
    for (;;) {
      if (take_op("+"))
        e = make(Node::kAdd, std::move(e), product());
      else if (take_op("-"))
        e = make(Node::kSub, std::move(e), product());
      else
        return e;
    }
  }

  NodePtr product() {
    NodePtr e = factor();
    for (;;) {
      if (take_op("*"))
        e = make(Node::kMul, std::move(e), factor());
      else if (take_op("/"))
        e = make(Node::kDiv, std::move(e), factor());
      else
        return e;
    }
  }

  NodePtr factor() {
    NodePtr e = unary();
    if (take_op("^")) {
      if (peek().kind != TokKind::kNumber) fail("expected integer exponent");
      NodePtr p = make(Node::kPow, std::move(e));
      p->exponent = std::stoi(take().text);
      return p;
    }
    return e;
  }

  NodePtr unary() {
    if (take_op("-")) return make(Node::kNeg, unary());
    if (take_op("+")) return unary();
    return primary();
  }

  NodePtr primary() {
    if (take_op("(")) {
      NodePtr e = sum();
      if (!take_op(")")) fail("expected ')'");
      return e;
    }
    if (peek().kind == TokKind::kNumber) {
      auto node = make(Node::kNumber);
      node->number = Rational(take().text);
      return node;
    }
    if (peek().kind == TokKind::kIdent) {
      Token t = take();
      if (t.text == "i") return make(Node::kImagUnit);
      if (t.text == "Re" || t.text == "Im" || t.text == "conj") {
        if (!take_op("(")) fail("expected '(' after " + t.text);
        NodePtr inner = sum();
        if (!take_op(")")) fail("expected ')'");
        Node::Kind k = t.text == "Re"   ? Node::kRe
                       : t.text == "Im" ? Node::kIm
                                        : Node::kConj;
        return make(k, std::move(inner));
      }
      if (t.text.size() > 1 && t.text[0] == 'z') {
        std::string digits = t.text.substr(1);
        if (digits.find_first_not_of("0123456789") == std::string::npos) {
          auto node = make(Node::kVar);
          node->var_index = std::stoi(digits);
          if (node->var_index < 1)
            throw std::runtime_error("bad coordinate name " + t.text);
          max_var_ = std::max(max_var_, node->var_index);
          return node;
        }
      }
      throw std::runtime_error("unknown name '" + t.text + "' at position " +
                               std::to_string(t.pos));
    }
    fail("expected an expression");
  }

  std::vector<Token> toks_;
  std::size_t pos_ = 0;
  int max_var_ = 0;
};

}  // namespace expr_detail

/// A real-analytic defining function evaluated as a series in the
/// coordinates z1..zn and their formal conjugates zb1..zbn.
struct RealExpression {
  int n = 0;
  PowerSeries rho;
};

/// Coefficientwise conjugation combined with the swap z_k <-> zb_k.
inline PowerSeries expression_bar(const PowerSeries& s, int n) {
  std::vector<std::string> swapped;
  swapped.reserve(2 * n);
  for (int k = 1; k <= n; ++k) swapped.push_back("zb" + std::to_string(k));
  for (int k = 1; k <= n; ++k) swapped.push_back("z" + std::to_string(k));
  return s.conjugated().renamed_vars(swapped).with_vars(s.vars());
}

/// Parse and evaluate a defining expression such as
/// "Im(z2) - z1*conj(z1)".  The ambient dimension is the largest
/// coordinate index mentioned.  Division truncates at the given order;
/// everything else is evaluated exactly.
inline RealExpression evaluate_defining_expression(const std::string& text,
                                                   int order) {
  using namespace expr_detail;
  Parser parser(lex(text));
  NodePtr root = parser.parse();
  int n = parser.max_var_index();
  if (n < 1) throw std::runtime_error("no coordinates in expression");
  std::vector<std::string> vars;
  vars.reserve(2 * n);
  for (int k = 1; k <= n; ++k) vars.push_back("z" + std::to_string(k));
  for (int k = 1; k <= n; ++k) vars.push_back("zb" + std::to_string(k));

  std::function<PowerSeries(const Node&)> eval = [&](const Node& node)
      -> PowerSeries {
    switch (node.kind) {
      case Node::kNumber:
        return PowerSeries::constant(vars, Scalar(node.number));
      case Node::kImagUnit:
        return PowerSeries::constant(vars, Scalar::i());
      case Node::kVar:
        if (node.var_index > n) throw std::logic_error("bad var index");
        return PowerSeries::variable(vars,
                                     "z" + std::to_string(node.var_index));
      case Node::kAdd:
        return eval(*node.lhs) + eval(*node.rhs);
      case Node::kSub:
        return eval(*node.lhs) - eval(*node.rhs);
      case Node::kMul:
        return eval(*node.lhs) * eval(*node.rhs);
      case Node::kDiv: {
        PowerSeries den = eval(*node.rhs);
        if (den.is_exact() && den.terms().size() > 1)
          den = den.truncated(order);
        return eval(*node.lhs) * den.reciprocal();
      }
      case Node::kNeg:
        return -eval(*node.lhs);
      case Node::kPow:
        return pow(eval(*node.lhs), node.exponent);
      case Node::kRe: {
        PowerSeries v = eval(*node.lhs);
        return (v + expression_bar(v, n)) / Scalar(2);
      }
      case Node::kIm: {
        PowerSeries v = eval(*node.lhs);
        return (v - expression_bar(v, n)) / (Scalar(2) * Scalar::i());
      }
      case Node::kConj:
        return expression_bar(eval(*node.lhs), n);
    }
    throw std::logic_error("unreachable");
  };

  RealExpression result;
  result.n = n;
  result.rho = eval(*root);
  if (result.rho != expression_bar(result.rho, n))
    throw std::runtime_error("defining expression is not real-valued");
  return result;
}

}  // namespace crformal
