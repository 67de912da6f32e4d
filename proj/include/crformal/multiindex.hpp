#pragma once

#include <algorithm>
#include <cassert>
#include <numeric>
#include <vector>

#include "rational.hpp"

namespace crformal {

/// Exponent vector of a monomial; one entry per variable.
using Multiindex = std::vector<int>;

inline int degree(const Multiindex& a) {
  return std::accumulate(a.begin(), a.end(), 0);
}

/// Graded lexicographic order: lower total degree first, ties broken
/// lexicographically reading exponents left to right.
inline bool grlex_less(const Multiindex& a, const Multiindex& b) {
  assert(a.size() == b.size());
  int da = degree(a);
  int db = degree(b);
  if (da != db) return da < db;
  return std::lexicographical_compare(a.begin(), a.end(), b.begin(), b.end());
}

struct GrlexLess {
  bool operator()(const Multiindex& a, const Multiindex& b) const {
    return grlex_less(a, b);
  }
};

/// True when g <= b in every component.
inline bool divides(const Multiindex& g, const Multiindex& b) {
  assert(g.size() == b.size());
  for (std::size_t k = 0; k < g.size(); ++k)
    if (g[k] > b[k]) return false;
  return true;
}

inline Multiindex add(const Multiindex& a, const Multiindex& b) {
  assert(a.size() == b.size());
  Multiindex r(a.size());
  for (std::size_t k = 0; k < a.size(); ++k) r[k] = a[k] + b[k];
  return r;
}

inline Multiindex sub(const Multiindex& a, const Multiindex& b) {
  assert(divides(b, a));
  Multiindex r(a.size());
  for (std::size_t k = 0; k < a.size(); ++k) r[k] = a[k] - b[k];
  return r;
}

inline Rational factorial(int n) {
  assert(n >= 0);
  mpz_class f;
  mpz_fac_ui(f.get_mpz_t(), static_cast<unsigned long>(n));
  return Rational(f);
}

/// b! = product of the factorials of the entries.
inline Rational multi_factorial(const Multiindex& b) {
  Rational r = 1;
  for (int e : b) r *= factorial(e);
  return r;
}

inline Rational binomial(int n, int k) {
  assert(n >= 0);
  if (k < 0 || k > n) return Rational(0);
  mpz_class c;
  mpz_bin_uiui(c.get_mpz_t(), static_cast<unsigned long>(n),
               static_cast<unsigned long>(k));
  return Rational(c);
}

/// Componentwise product of binomials binom(b_k, g_k).
inline Rational multi_binomial(const Multiindex& b, const Multiindex& g) {
  assert(b.size() == g.size());
  Rational r = 1;
  for (std::size_t k = 0; k < b.size(); ++k) r *= binomial(b[k], g[k]);
  return r;
}

/// (b+g)! / (b! g!), the coefficient relating scaled derivatives of a
/// product expansion; equals multi_binomial(b+g, g).
inline Rational shift_binomial(const Multiindex& b, const Multiindex& g) {
  return multi_binomial(add(b, g), g);
}

namespace detail {
inline void enumerate_degree(int nvars, int d, Multiindex& prefix,
                             std::vector<Multiindex>& out) {
  if (static_cast<int>(prefix.size()) == nvars - 1) {
    prefix.push_back(d);
    out.push_back(prefix);
    prefix.pop_back();
    return;
  }
  for (int e = 0; e <= d; ++e) {
    prefix.push_back(e);
    enumerate_degree(nvars, d - e, prefix, out);
    prefix.pop_back();
  }
}
}  // namespace detail

/// All multiindices on nvars variables of total degree exactly d,
/// in ascending graded lexicographic order.
inline std::vector<Multiindex> multiindices_of_degree(int nvars, int d) {
  assert(nvars >= 1 && d >= 0);
  std::vector<Multiindex> out;
  Multiindex prefix;
  detail::enumerate_degree(nvars, d, prefix, out);
  std::sort(out.begin(), out.end(), GrlexLess{});
  return out;
}

/// All multiindices of total degree between dmin and dmax inclusive,
/// in ascending graded lexicographic order.
inline std::vector<Multiindex> multiindices_in_range(int nvars, int dmin,
                                                     int dmax) {
  std::vector<Multiindex> out;
  for (int d = dmin; d <= dmax; ++d) {
    auto layer = multiindices_of_degree(nvars, d);
    out.insert(out.end(), layer.begin(), layer.end());
  }
  return out;
}

}  // namespace crformal
