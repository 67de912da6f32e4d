#pragma once

#include <algorithm>
#include <functional>
#include <map>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "hypersurface.hpp"

namespace crformal {

/// Raw iterated derivative d^beta with respect to a named block of variables.
inline PowerSeries block_derivative(const PowerSeries& s,
                                    const std::vector<std::string>& block,
                                    const Multiindex& beta) {
  assert(block.size() == beta.size());
  PowerSeries out = s;
  for (std::size_t j = 0; j < block.size(); ++j) {
    for (int rep = 0; rep < beta[j]; ++rep) out = out.derive(block[j]);
  }
  return out;
}

/// Components of the order-k antiholomorphic jet map attached to a
/// hypersurface: the conjugate coordinates (zeta, xi) followed by the raw
/// zeta-derivatives d^beta_zeta rbar for |beta| <= k, ascending graded
/// lexicographic order.  All components are ambient, in (w, z, zeta, xi).
inline std::vector<PowerSeries> jet_morphism(const Hypersurface& h, int k) {
  if (k < 0) throw std::invalid_argument("jet order must be nonnegative");
  const int n = h.n();
  const std::vector<std::string> amb = ambient_vars(n);
  std::vector<std::string> zeta_block(amb.begin() + n, amb.begin() + (2 * n - 1));

  std::vector<PowerSeries> out;
  for (int j = n; j < 2 * n; ++j) out.push_back(PowerSeries::variable(amb, amb[j]));
  const PowerSeries rbar = h.rbar_ambient();
  for (const Multiindex& beta : multiindices_in_range(n - 1, 0, k))
    out.push_back(block_derivative(rbar, zeta_block, beta));
  return out;
}

/// Canonical curve/surface sitting inside a normal hypersurface, used to probe
/// degeneracy.  depth 1 gives w |-> (w, 0); depth 2 gives
/// (w, zeta) |-> (w, i*thetabar(w, zeta, 0)).
inline std::vector<PowerSeries> chain_map(const Hypersurface& h, int depth) {
  if (!h.is_normal()) throw std::invalid_argument("chain_map requires normal coordinates");
  const int n = h.n();
  const std::vector<std::string> gv = graph_vars(n);

  if (depth == 1) {
    const std::vector<std::string> wv(gv.begin(), gv.begin() + (n - 1));
    std::vector<PowerSeries> out;
    for (const std::string& w : wv) out.push_back(PowerSeries::variable(wv, w));
    out.push_back(PowerSeries::constant(wv, Scalar(0)));
    return out;
  }
  if (depth == 2) {
    const std::vector<std::string> wz(gv.begin(), gv.begin() + (2 * n - 2));
    std::vector<PowerSeries> out;
    for (int j = 0; j < n - 1; ++j) out.push_back(PowerSeries::variable(wz, wz[j]));
    PowerSeries tb = h.thetabar().with_vars(gv);
    tb = tb.substitute(gv.back(), PowerSeries::constant(gv, Scalar(0)));
    out.push_back((tb * Scalar::i()).restricted_to_vars(wz));
    return out;
  }
  throw std::invalid_argument("chain depth must be 1 or 2");
}

/// Exact determinant of a square matrix of series by Laplace expansion along
/// the first column.  Fine for the small matrices this library works with.
inline PowerSeries series_det(const std::vector<std::vector<PowerSeries>>& m) {
  const std::size_t s = m.size();
  assert(s > 0);
  for (const auto& row : m) assert(row.size() == s);
  if (s == 1) return m[0][0];
  PowerSeries acc = PowerSeries::constant(m[0][0].vars(), Scalar(0));
  for (std::size_t i = 0; i < s; ++i) {
    if (m[i][0].is_zero()) continue;
    std::vector<std::vector<PowerSeries>> minor;
    for (std::size_t r = 0; r < s; ++r) {
      if (r == i) continue;
      minor.emplace_back(m[r].begin() + 1, m[r].end());
    }
    PowerSeries term = m[i][0] * series_det(minor);
    if (i % 2 == 1) term = -term;
    acc += term;
  }
  return acc;
}

/// Result of a generic-rank computation on a tuple of series (a formal map).
struct RankReport {
  int rank = 0;
  std::vector<int> rows;  // certifying minor row indices, ascending
  std::vector<int> cols;  // certifying minor column indices, ascending
  bool degenerate_above = false;
  int order = kExactOrder;  // working truncation order of the Jacobian entries
  unsigned long long seed = 0;

  std::string to_record() const {
    std::ostringstream os;
    os << "rank=" << rank << " certified_by=[";
    for (std::size_t i = 0; i < rows.size(); ++i) os << (i ? "," : "") << rows[i];
    os << "]x[";
    for (std::size_t i = 0; i < cols.size(); ++i) os << (i ? "," : "") << cols[i];
    os << "] degenerate_above=" << (degenerate_above ? "true" : "false") << " order=";
    if (order >= kExactOrder) {
      os << "exact";
    } else {
      os << order;
    }
    os << " seed=" << seed;
    return os.str();
  }
};

namespace detail {

/// A stored nonzero term of a truncated determinant certifies the exact
/// determinant is nonzero: truncated arithmetic keeps low coefficients exact.
inline bool certified_nonzero(const PowerSeries& s) { return !s.is_zero(); }

inline PowerSeries submatrix_det(const std::vector<std::vector<PowerSeries>>& jac,
                                 const std::vector<int>& rows, const std::vector<int>& cols) {
  std::vector<std::vector<PowerSeries>> m;
  for (int r : rows) {
    std::vector<PowerSeries> row;
    for (int c : cols) row.push_back(jac[r][c]);
    m.push_back(std::move(row));
  }
  return series_det(m);
}

/// Enumerate ascending index subsets of {0..total-1} of a given size.
inline void index_subsets(int total, int size, std::vector<std::vector<int>>& out) {
  std::vector<int> cur(size);
  std::function<void(int, int)> rec = [&](int start, int pos) {
    if (pos == size) {
      out.push_back(cur);
      return;
    }
    for (int v = start; v <= total - (size - pos); ++v) {
      cur[pos] = v;
      rec(v + 1, pos + 1);
    }
  };
  if (size >= 0 && size <= total) rec(0, 0);
}

/// Numeric Gaussian elimination over exact scalars; returns pivot
/// (row, column) pairs in elimination order.
inline std::vector<std::pair<int, int>> numeric_pivots(std::vector<std::vector<Scalar>> a) {
  const int nr = static_cast<int>(a.size());
  const int nc = nr ? static_cast<int>(a[0].size()) : 0;
  std::vector<std::pair<int, int>> pivots;
  std::vector<bool> used(nr, false);
  for (int c = 0; c < nc; ++c) {
    int pr = -1;
    for (int r = 0; r < nr; ++r) {
      if (!used[r] && !a[r][c].is_zero()) {
        pr = r;
        break;
      }
    }
    if (pr < 0) continue;
    used[pr] = true;
    pivots.emplace_back(pr, c);
    for (int r = 0; r < nr; ++r) {
      if (r == pr || a[r][c].is_zero()) continue;
      const Scalar f = a[r][c] / a[pr][c];
      for (int k = c; k < nc; ++k) a[r][k] = a[r][k] - f * a[pr][k];
    }
  }
  return pivots;
}

}  // namespace detail

/// Largest k such that some k x k minor of the given series matrix is
/// certified nonzero at the working order.  A seeded random integer point
/// guides pivot selection; every claimed rank is confirmed by an exact
/// symbolic minor determinant, with an exhaustive sweep as fallback.
inline RankReport matrix_generic_rank(const std::vector<std::vector<PowerSeries>>& jac,
                                      unsigned long long seed) {
  if (jac.empty() || jac[0].empty())
    throw std::invalid_argument("matrix_generic_rank needs a nonempty matrix");
  const std::vector<std::string> vars = jac[0][0].vars();
  int entry_order = kExactOrder;
  for (const auto& row : jac) {
    if (row.size() != jac[0].size())
      throw std::invalid_argument("matrix_generic_rank rows must have equal length");
    for (const PowerSeries& e : row) {
      if (e.vars() != vars)
        throw std::invalid_argument("matrix_generic_rank entries must share variables");
      entry_order = std::min(entry_order, e.known_order());
    }
  }
  const int nr = static_cast<int>(jac.size());
  const int nc = static_cast<int>(jac[0].size());

  // Seeded integer screen: evaluate the matrix at a random Gaussian-integer
  // point and use its pivots as the first candidate minor.
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> pick(-9, 9);
  std::vector<Scalar> point;
  for (std::size_t i = 0; i < vars.size(); ++i) {
    const int re = pick(rng);
    const int im = pick(rng);
    point.emplace_back(Rational(re), Rational(im));
  }
  std::vector<std::vector<Scalar>> numeric(nr, std::vector<Scalar>(nc, Scalar(0)));
  for (int r = 0; r < nr; ++r)
    for (int c = 0; c < nc; ++c) numeric[r][c] = jac[r][c].eval(point);

  RankReport report;
  report.seed = seed;
  report.order = entry_order;

  std::vector<int> rows, cols;
  const auto pivots = detail::numeric_pivots(numeric);
  if (!pivots.empty()) {
    std::vector<int> cand_rows, cand_cols;
    for (const auto& [r, c] : pivots) {
      cand_rows.push_back(r);
      cand_cols.push_back(c);
    }
    std::sort(cand_rows.begin(), cand_rows.end());
    std::sort(cand_cols.begin(), cand_cols.end());
    if (detail::certified_nonzero(detail::submatrix_det(jac, cand_rows, cand_cols))) {
      rows = cand_rows;
      cols = cand_cols;
    }
  }

  // Grow the certified minor one row/column pair at a time; when stuck,
  // sweep all minors of the next size before giving up.
  const int max_rank = std::min(nr, nc);
  while (static_cast<int>(rows.size()) < max_rank) {
    const int s = static_cast<int>(rows.size());
    bool extended = false;
    for (int r = 0; r < nr && !extended; ++r) {
      if (std::find(rows.begin(), rows.end(), r) != rows.end()) continue;
      for (int c = 0; c < nc && !extended; ++c) {
        if (std::find(cols.begin(), cols.end(), c) != cols.end()) continue;
        std::vector<int> tr = rows, tc = cols;
        tr.insert(std::upper_bound(tr.begin(), tr.end(), r), r);
        tc.insert(std::upper_bound(tc.begin(), tc.end(), c), c);
        if (detail::certified_nonzero(detail::submatrix_det(jac, tr, tc))) {
          rows = tr;
          cols = tc;
          extended = true;
        }
      }
    }
    if (extended) continue;

    std::vector<std::vector<int>> row_subsets, col_subsets;
    detail::index_subsets(nr, s + 1, row_subsets);
    detail::index_subsets(nc, s + 1, col_subsets);
    for (const auto& tr : row_subsets) {
      for (const auto& tc : col_subsets) {
        if (detail::certified_nonzero(detail::submatrix_det(jac, tr, tc))) {
          rows = tr;
          cols = tc;
          extended = true;
          break;
        }
      }
      if (extended) break;
    }
    if (!extended) break;
  }

  report.rank = static_cast<int>(rows.size());
  report.rows = rows;
  report.cols = cols;
  report.degenerate_above = report.rank < max_rank;
  return report;
}

/// Largest k such that some k x k minor of the Jacobian of the given map is
/// certified nonzero at the working order.
inline RankReport generic_rank(const std::vector<PowerSeries>& components,
                               unsigned long long seed, int order) {
  if (components.empty()) throw std::invalid_argument("generic_rank needs at least one component");
  const std::vector<std::string> vars = components[0].vars();
  for (const PowerSeries& c : components) {
    if (c.vars() != vars) throw std::invalid_argument("generic_rank components must share variables");
    if (!c.is_exact() && c.known_order() < 2)
      throw std::invalid_argument("generic_rank needs components known at least to order 2");
  }
  if (order < 1) throw std::invalid_argument("generic_rank order must be positive");

  std::vector<std::vector<PowerSeries>> jac;
  for (const PowerSeries& c : components) {
    std::vector<PowerSeries> row;
    for (const std::string& v : vars) {
      PowerSeries d = c.derive(v);
      if (!d.is_exact()) d = d.truncated(order);
      row.push_back(std::move(d));
    }
    jac.push_back(std::move(row));
  }
  return matrix_generic_rank(jac, seed);
}

}  // namespace crformal
