#pragma once

#include <algorithm>
#include <cassert>
#include <functional>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "multiindex.hpp"

namespace crformal {

/// Sentinel known order for series whose stored terms form an exact
/// polynomial: every coefficient, of any degree, is known.
inline constexpr int kExactOrder = 1 << 30;

/// Truncated multivariate formal power series over GaussianRational.
///
/// Invariants: every stored term has a nonzero coefficient and total
/// degree strictly below known_order(); arithmetic propagates the known
/// order as the minimum of the operands' orders, and differentiation
/// lowers a finite order by one.
class PowerSeries {
 public:
  using TermMap = std::map<Multiindex, Scalar, GrlexLess>;

  PowerSeries() : known_order_(kExactOrder) {}

  explicit PowerSeries(std::vector<std::string> vars, int order = kExactOrder)
      : vars_(std::move(vars)), known_order_(order) {
    check_order(order);
    check_distinct(vars_);
  }

  static PowerSeries constant(std::vector<std::string> vars, Scalar c,
                              int order = kExactOrder) {
    PowerSeries s(std::move(vars), order);
    if (!c.is_zero()) s.terms_.emplace(Multiindex(s.vars_.size(), 0), std::move(c));
    return s;
  }

  static PowerSeries variable(std::vector<std::string> vars,
                              const std::string& name,
                              int order = kExactOrder) {
    PowerSeries s(std::move(vars), order);
    Multiindex e(s.vars_.size(), 0);
    e[s.var_index(name)] = 1;
    if (s.known_order_ > 1) s.terms_.emplace(std::move(e), Scalar(1));
    return s;
  }

  const std::vector<std::string>& vars() const { return vars_; }
  int known_order() const { return known_order_; }
  bool is_exact() const { return known_order_ == kExactOrder; }
  const TermMap& terms() const { return terms_; }

  /// True when no term is stored, i.e. the series vanishes to known order.
  bool is_zero() const { return terms_.empty(); }

  std::size_t var_index(const std::string& name) const {
    for (std::size_t k = 0; k < vars_.size(); ++k)
      if (vars_[k] == name) return k;
    throw std::invalid_argument("unknown variable: " + name);
  }

  bool has_var(const std::string& name) const {
    return std::find(vars_.begin(), vars_.end(), name) != vars_.end();
  }

  /// Coefficient of the given exponent vector.  Querying at or above the
  /// known order is a caller bug: that coefficient is not determined.
  Scalar coefficient(const Multiindex& e) const {
    assert(static_cast<int>(e.size()) == static_cast<int>(vars_.size()));
    assert(degree(e) < known_order_);
    auto it = terms_.find(e);
    return it == terms_.end() ? Scalar(0) : it->second;
  }

  Scalar constant_term() const {
    return coefficient(Multiindex(vars_.size(), 0));
  }

  void set_coefficient(Multiindex e, Scalar c) {
    assert(e.size() == vars_.size());
    assert(degree(e) < known_order_);
    if (c.is_zero())
      terms_.erase(e);
    else
      terms_[std::move(e)] = std::move(c);
  }

  /// Least total degree carrying a nonzero term, or known_order() when the
  /// series vanishes to known order.
  int vanishing_order() const {
    return terms_.empty() ? known_order_ : degree(terms_.begin()->first);
  }

  /// Grlex-least stored term, if any.
  std::optional<std::pair<Multiindex, Scalar>> first_term() const {
    if (terms_.empty()) return std::nullopt;
    return *terms_.begin();
  }

  PowerSeries truncated(int order) const {
    check_order(order);
    PowerSeries r(vars_, std::min(known_order_, order));
    for (const auto& [e, c] : terms_)
      if (degree(e) < r.known_order_) r.terms_.emplace(e, c);
    return r;
  }

  PowerSeries& operator+=(const PowerSeries& o) {
    require_same_vars(o);
    known_order_ = std::min(known_order_, o.known_order_);
    for (const auto& [e, c] : o.terms_) {
      auto it = terms_.find(e);
      if (it == terms_.end()) {
        terms_.emplace(e, c);
      } else {
        it->second += c;
        if (it->second.is_zero()) terms_.erase(it);
      }
    }
    drop_unknown_terms();
    return *this;
  }

  PowerSeries& operator-=(const PowerSeries& o) { return *this += -o; }

  friend PowerSeries operator+(PowerSeries a, const PowerSeries& b) { return a += b; }
  friend PowerSeries operator-(PowerSeries a, const PowerSeries& b) { return a -= b; }

  friend PowerSeries operator-(const PowerSeries& a) {
    PowerSeries r(a.vars_, a.known_order_);
    for (const auto& [e, c] : a.terms_) r.terms_.emplace(e, -c);
    return r;
  }

  friend PowerSeries operator*(const PowerSeries& a, const PowerSeries& b) {
    a.require_same_vars(b);
    PowerSeries r(a.vars_, std::min(a.known_order_, b.known_order_));
    for (const auto& [ea, ca] : a.terms_) {
      int da = degree(ea);
      if (da >= r.known_order_) break;
      for (const auto& [eb, cb] : b.terms_) {
        if (da + degree(eb) >= r.known_order_) break;
        Multiindex e = add(ea, eb);
        Scalar prod = ca * cb;
        auto it = r.terms_.find(e);
        if (it == r.terms_.end()) {
          if (!prod.is_zero()) r.terms_.emplace(std::move(e), std::move(prod));
        } else {
          it->second += prod;
          if (it->second.is_zero()) r.terms_.erase(it);
        }
      }
    }
    return r;
  }

  friend PowerSeries operator*(const Scalar& c, const PowerSeries& a) {
    PowerSeries r(a.vars_, a.known_order_);
    if (c.is_zero()) return r;
    for (const auto& [e, t] : a.terms_) r.terms_.emplace(e, c * t);
    return r;
  }
  friend PowerSeries operator*(const PowerSeries& a, const Scalar& c) { return c * a; }
  friend PowerSeries operator/(const PowerSeries& a, const Scalar& c) {
    assert(!c.is_zero());
    return (Scalar(1) / c) * a;
  }

  friend bool operator==(const PowerSeries& a, const PowerSeries& b) {
    return a.vars_ == b.vars_ && a.known_order_ == b.known_order_ &&
           a.terms_ == b.terms_;
  }
  friend bool operator!=(const PowerSeries& a, const PowerSeries& b) {
    return !(a == b);
  }

  /// Partial derivative.  A finite known order drops by one.
  PowerSeries derive(const std::string& name) const {
    std::size_t k = var_index(name);
    int order = known_order_;
    if (order != kExactOrder) {
      if (order <= 1)
        throw std::runtime_error(
            "derivative would retain no known coefficients");
      --order;
    }
    PowerSeries r(vars_, order);
    for (const auto& [e, c] : terms_) {
      if (e[k] == 0) continue;
      Multiindex d = e;
      --d[k];
      r.terms_.emplace(std::move(d), c * Scalar(e[k]));
    }
    r.drop_unknown_terms();
    return r;
  }

  /// Antiderivative with zero constant slice; a finite known order rises
  /// by one.
  PowerSeries integrate(const std::string& name) const {
    std::size_t k = var_index(name);
    int order = known_order_;
    if (order != kExactOrder) ++order;
    PowerSeries r(vars_, order);
    for (const auto& [e, c] : terms_) {
      Multiindex d = e;
      ++d[k];
      r.terms_.emplace(std::move(d), c / Scalar(d[k]));
    }
    return r;
  }

  /// Coefficientwise complex conjugation; variables are untouched.
  PowerSeries conjugated() const {
    PowerSeries r(vars_, known_order_);
    for (const auto& [e, c] : terms_) r.terms_.emplace(e, c.conj());
    return r;
  }

  /// Substitute one series per variable.  Every argument must share a
  /// common variable list and vanish at the origin.
  PowerSeries compose(const std::vector<PowerSeries>& args) const {
    if (args.size() != vars_.size())
      throw std::invalid_argument("compose: need one series per variable");
    int order = known_order_;
    for (const auto& a : args) {
      if (a.vars() != args.front().vars())
        throw std::invalid_argument("compose: arguments must share variables");
      if (!a.constant_term().is_zero())
        throw std::invalid_argument(
            "compose: arguments must vanish at the origin");
      order = std::min(order, a.known_order());
    }
    const std::vector<std::string>& tvars =
        args.empty() ? vars_ : args.front().vars();
    PowerSeries result(tvars, order);
    if (order != kExactOrder) {
      // Cache truncated powers of each argument.
      std::vector<std::vector<PowerSeries>> powers(args.size());
      auto power = [&](std::size_t i, int e) -> const PowerSeries& {
        auto& cache = powers[i];
        if (cache.empty())
          cache.push_back(PowerSeries::constant(tvars, Scalar(1), order));
        while (static_cast<int>(cache.size()) <= e)
          cache.push_back(cache.back() * args[i]);
        return cache[e];
      };
      for (const auto& [e, c] : terms_) {
        if (degree(e) >= order) break;  // arguments vanish at the origin
        PowerSeries term = PowerSeries::constant(tvars, c, order);
        for (std::size_t i = 0; i < args.size(); ++i)
          if (e[i] > 0) term = term * power(i, e[i]);
        result += term;
      }
      return result;
    }
    // Exact polynomial composed with exact polynomial arguments.
    std::vector<std::vector<PowerSeries>> powers(args.size());
    auto power = [&](std::size_t i, int e) -> const PowerSeries& {
      auto& cache = powers[i];
      if (cache.empty())
        cache.push_back(PowerSeries::constant(tvars, Scalar(1)));
      while (static_cast<int>(cache.size()) <= e)
        cache.push_back(cache.back() * args[i]);
      return cache[e];
    };
    for (const auto& [e, c] : terms_) {
      PowerSeries term = PowerSeries::constant(tvars, c);
      for (std::size_t i = 0; i < args.size(); ++i)
        if (e[i] > 0) term = term * power(i, e[i]);
      result += term;
    }
    return result;
  }

  /// Replace one variable by a series over value.vars(); the remaining
  /// variables must all appear in value.vars().
  PowerSeries substitute(const std::string& name, const PowerSeries& value) const {
    var_index(name);  // validate
    std::vector<PowerSeries> args;
    args.reserve(vars_.size());
    for (const auto& v : vars_) {
      if (v == name)
        args.push_back(value);
      else
        args.push_back(PowerSeries::variable(value.vars(), v));
    }
    return compose(args);
  }

  /// Reinterpret over a variable list containing all current variables.
  PowerSeries with_vars(const std::vector<std::string>& new_vars) const {
    check_distinct(new_vars);
    std::vector<std::size_t> where(vars_.size());
    for (std::size_t k = 0; k < vars_.size(); ++k) {
      auto it = std::find(new_vars.begin(), new_vars.end(), vars_[k]);
      if (it == new_vars.end())
        throw std::invalid_argument("with_vars: missing variable " + vars_[k]);
      where[k] = static_cast<std::size_t>(it - new_vars.begin());
    }
    PowerSeries r(new_vars, known_order_);
    for (const auto& [e, c] : terms_) {
      Multiindex d(new_vars.size(), 0);
      for (std::size_t k = 0; k < vars_.size(); ++k) d[where[k]] = e[k];
      r.terms_.emplace(std::move(d), c);
    }
    return r;
  }

  /// Rename variables positionally, keeping every exponent vector.
  PowerSeries renamed_vars(std::vector<std::string> new_names) const {
    if (new_names.size() != vars_.size())
      throw std::invalid_argument("renamed_vars: name count mismatch");
    check_distinct(new_names);
    PowerSeries r(std::move(new_names), known_order_);
    r.terms_ = terms_;
    return r;
  }

  /// Drop variables that no stored term uses.
  PowerSeries restricted_to_vars(const std::vector<std::string>& keep) const {
    check_distinct(keep);
    std::vector<std::size_t> take;
    take.reserve(keep.size());
    for (const auto& v : keep) take.push_back(var_index(v));
    std::vector<bool> kept(vars_.size(), false);
    for (std::size_t k : take) kept[k] = true;
    PowerSeries r(keep, known_order_);
    for (const auto& [e, c] : terms_) {
      for (std::size_t k = 0; k < vars_.size(); ++k)
        if (!kept[k] && e[k] != 0)
          throw std::invalid_argument("restricted_to_vars: variable " +
                                      vars_[k] + " still occurs");
      Multiindex d(keep.size());
      for (std::size_t j = 0; j < take.size(); ++j) d[j] = e[take[j]];
      r.terms_.emplace(std::move(d), c);
    }
    return r;
  }

  /// Series of the coefficient of block^beta, over the remaining
  /// variables.  A finite known order drops by |beta|.
  PowerSeries coefficient_slice(const std::vector<std::string>& block,
                                const Multiindex& beta) const {
    if (block.size() != beta.size())
      throw std::invalid_argument("coefficient_slice: size mismatch");
    std::vector<std::size_t> idx;
    idx.reserve(block.size());
    for (const auto& v : block) idx.push_back(var_index(v));
    std::vector<bool> in_block(vars_.size(), false);
    for (std::size_t k : idx) in_block[k] = true;
    std::vector<std::string> rest;
    for (std::size_t k = 0; k < vars_.size(); ++k)
      if (!in_block[k]) rest.push_back(vars_[k]);
    int order = known_order_;
    if (order != kExactOrder) {
      order -= degree(beta);
      if (order < 1)
        throw std::runtime_error(
            "coefficient_slice would retain no known coefficients");
    }
    PowerSeries r(rest, order);
    for (const auto& [e, c] : terms_) {
      bool match = true;
      for (std::size_t j = 0; j < idx.size(); ++j)
        if (e[idx[j]] != beta[j]) {
          match = false;
          break;
        }
      if (!match) continue;
      Multiindex d;
      d.reserve(rest.size());
      for (std::size_t k = 0; k < vars_.size(); ++k)
        if (!in_block[k]) d.push_back(e[k]);
      r.terms_.emplace(std::move(d), c);
    }
    return r;
  }

  /// Multiplicative inverse of a series with nonzero constant term.  An
  /// exact nonconstant polynomial has no polynomial inverse, so a finite
  /// known order is required in that case.
  PowerSeries reciprocal() const {
    Scalar c0 = terms_.empty() ? Scalar(0) : constant_term();
    if (c0.is_zero())
      throw std::runtime_error("reciprocal: constant term vanishes");
    if (known_order_ == kExactOrder) {
      if (terms_.size() == 1)
        return PowerSeries::constant(vars_, Scalar(1) / c0);
      throw std::invalid_argument(
          "reciprocal: truncate the exact polynomial to a working order first");
    }
    PowerSeries inv =
        PowerSeries::constant(vars_, Scalar(1) / c0, known_order_);
    PowerSeries two = PowerSeries::constant(vars_, Scalar(2), known_order_);
    for (int correct = 1; correct < known_order_; correct *= 2)
      inv = inv * (two - (*this) * inv);
    return inv;
  }

  /// Exact evaluation of the stored polynomial at a rational point.
  Scalar eval(const std::vector<Scalar>& point) const {
    if (point.size() != vars_.size())
      throw std::invalid_argument("eval: point dimension mismatch");
    Scalar total(0);
    for (const auto& [e, c] : terms_) {
      Scalar term = c;
      for (std::size_t k = 0; k < vars_.size(); ++k)
        for (int p = 0; p < e[k]; ++p) term *= point[k];
      total += term;
    }
    return total;
  }

 private:
  static void check_order(int order) {
    if (order < 1)
      throw std::invalid_argument("known order must be at least 1");
  }

  static void check_distinct(const std::vector<std::string>& names) {
    for (std::size_t a = 0; a < names.size(); ++a)
      for (std::size_t b = a + 1; b < names.size(); ++b)
        if (names[a] == names[b])
          throw std::invalid_argument("duplicate variable: " + names[a]);
  }

  void require_same_vars(const PowerSeries& o) const {
    if (vars_ != o.vars_)
      throw std::invalid_argument("variable lists differ");
  }

  void drop_unknown_terms() {
    for (auto it = terms_.begin(); it != terms_.end();) {
      if (degree(it->first) >= known_order_)
        it = terms_.erase(it);
      else
        ++it;
    }
  }

  std::vector<std::string> vars_;
  TermMap terms_;
  int known_order_ = kExactOrder;
};

inline PowerSeries pow(const PowerSeries& base, int e) {
  assert(e >= 0);
  if (e == 0) return PowerSeries::constant(base.vars(), Scalar(1));
  PowerSeries r = base;
  for (int k = 1; k < e; ++k) r = r * base;
  return r;
}

/// Product of base_i^{e_i} over a vector of series sharing variables.
inline PowerSeries monomial_of(const std::vector<PowerSeries>& bases,
                               const Multiindex& e) {
  assert(bases.size() == e.size());
  assert(!bases.empty());
  PowerSeries r = PowerSeries::constant(bases.front().vars(), Scalar(1),
                                        bases.front().known_order());
  for (std::size_t k = 0; k < bases.size(); ++k)
    if (e[k] > 0) r = r * pow(bases[k], e[k]);
  return r;
}

/// Solve F(x, y) = 0 for y = y(x) with y(0) = 0, where F vanishes at the
/// origin and has a nonvanishing first-order coefficient in y.  The result
/// is delivered to the requested order (defaulting to F's known order,
/// which must then be finite).
inline PowerSeries implicit_solve(const PowerSeries& F, const std::string& yvar,
                                  int order = -1) {
  if (order < 0) {
    if (F.is_exact())
      throw std::invalid_argument(
          "implicit_solve: an exact equation needs an explicit order");
    order = F.known_order();
  }
  PowerSeries eq = F.truncated(order);
  if (!eq.constant_term().is_zero())
    throw std::runtime_error("implicit_solve: equation does not vanish at 0");
  std::size_t yk = eq.var_index(yvar);
  Multiindex ylin(eq.vars().size(), 0);
  ylin[yk] = 1;
  Scalar c = eq.coefficient(ylin);
  if (c.is_zero())
    throw std::runtime_error(
        "implicit_solve: degenerate equation, linear term in " + yvar +
        " vanishes");
  std::vector<std::string> xvars;
  for (const auto& v : eq.vars())
    if (v != yvar) xvars.push_back(v);
  if (xvars.empty())
    throw std::invalid_argument("implicit_solve: no free variables remain");
  PowerSeries y(xvars, order);
  for (int step = 0; step < order; ++step) {
    // One fixed-point step gains one degree of agreement.
    std::vector<PowerSeries> args;
    for (const auto& v : eq.vars()) {
      if (v == yvar)
        args.push_back(y);
      else
        args.push_back(
            PowerSeries::variable(xvars, v, order));
    }
    y -= eq.compose(args) / c;
  }
  return y;
}

/// n-th Taylor coefficient at 0 of the composite psi(phi(x)) for
/// single-variable series with phi(0) = 0, assembled from the partition
/// expansion of the n-th derivative of the composite.
inline Scalar faa_di_bruno(const PowerSeries& psi, const PowerSeries& phi,
                           int n) {
  if (psi.vars().size() != 1 || phi.vars().size() != 1)
    throw std::invalid_argument("faa_di_bruno: single-variable series only");
  if (n < 1) throw std::invalid_argument("faa_di_bruno: n must be positive");
  if (n >= phi.known_order() || n >= psi.known_order())
    throw std::runtime_error("faa_di_bruno: order too low for requested n");
  if (!phi.constant_term().is_zero())
    throw std::runtime_error("faa_di_bruno: inner series must vanish at 0");
  // phi_k = k-th derivative of phi at 0, psi_m likewise for psi.
  std::vector<Scalar> phi_d(n + 1, Scalar(0)), psi_d(n + 1, Scalar(0));
  for (int k = 1; k <= n; ++k) {
    phi_d[k] = phi.coefficient(Multiindex{k}) * factorial(k);
    psi_d[k] = psi.coefficient(Multiindex{k}) * factorial(k);
  }
  Scalar total(0);
  // Enumerate multiplicity vectors (a_1, ..., a_n) with sum k*a_k = n.
  Multiindex counts(n + 1, 0);
  std::function<void(int, int)> rec = [&](int remaining, int part) {
    if (remaining == 0) {
      int m = 0;
      Rational denom = 1;
      Scalar prod(1);
      for (int k = 1; k <= n; ++k) {
        if (counts[k] == 0) continue;
        m += counts[k];
        denom *= factorial(counts[k]);
        for (int rep = 0; rep < counts[k]; ++rep) {
          denom *= factorial(k);
          prod *= phi_d[k];
        }
      }
      if (m == 0) return;
      total += psi_d[m] * prod * Scalar(factorial(n) / denom);
      return;
    }
    if (part > remaining) return;
    for (int a = 0; a * part <= remaining; ++a) {
      counts[part] = a;
      rec(remaining - a * part, part + 1);
      counts[part] = 0;
    }
  };
  rec(n, 1);
  return total / Scalar(factorial(n));
}

}  // namespace crformal
