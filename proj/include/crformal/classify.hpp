#pragma once

#include <climits>
#include <functional>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "io.hpp"
#include "segre.hpp"

namespace crformal {

struct SelectionError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Indexed family of matrix rows: for a multiindex beta, the corresponding row
/// of series (all rows share variables and length).
using RowProvider = std::function<std::vector<PowerSeries>(const Multiindex&)>;

/// A chain of multiindices whose rows form a matrix with certified nonzero
/// minor.  beta_list is descending: beta^1 > beta^2 > ... (the last entry is
/// the zero multiindex when the chain was seeded with it).
struct MultiindexWitness {
  std::vector<Multiindex> beta_list;
  PowerSeries minor_det;
  int vanishing_order = 0;
};

namespace detail {

inline std::string format_multiindex(const Multiindex& beta) {
  std::string out = "(";
  for (std::size_t i = 0; i < beta.size(); ++i) {
    if (i) out += ",";
    out += std::to_string(beta[i]);
  }
  return out + ")";
}

inline std::string format_beta_list(const std::vector<Multiindex>& betas) {
  std::string out = "[";
  for (std::size_t i = 0; i < betas.size(); ++i) {
    if (i) out += ",";
    out += format_multiindex(betas[i]);
  }
  return out + "]";
}

/// Exact determinant of a scalar matrix by Laplace expansion.
inline Scalar scalar_det(const std::vector<std::vector<Scalar>>& m) {
  const std::size_t s = m.size();
  if (s == 1) return m[0][0];
  Scalar acc(0);
  for (std::size_t i = 0; i < s; ++i) {
    if (m[i][0].is_zero()) continue;
    std::vector<std::vector<Scalar>> minor;
    for (std::size_t r = 0; r < s; ++r) {
      if (r == i) continue;
      minor.emplace_back(m[r].begin() + 1, m[r].end());
    }
    Scalar term = m[i][0] * scalar_det(minor);
    if (i % 2 == 1) term = Scalar(0) - term;
    acc = acc + term;
  }
  return acc;
}

/// Does some size x size column subset of the given rows have a certified
/// nonzero determinant?  Returns the column subset if so.
inline std::optional<std::vector<int>> certifying_columns(
    const std::vector<std::vector<PowerSeries>>& rows) {
  const int s = static_cast<int>(rows.size());
  const int nc = static_cast<int>(rows[0].size());
  std::vector<std::vector<int>> subsets;
  index_subsets(nc, s, subsets);
  for (const auto& cols : subsets) {
    std::vector<std::vector<PowerSeries>> m;
    for (const auto& row : rows) {
      std::vector<PowerSeries> r;
      for (int c : cols) r.push_back(row[c]);
      m.push_back(std::move(r));
    }
    if (certified_nonzero(series_det(m))) return cols;
  }
  return std::nullopt;
}

}  // namespace detail

/// Greedily build an ascending chain of multiindices, bounded by beta_bound,
/// whose rows reach the target certified rank.  The chain starts at the zero
/// multiindex when include_zero is set, otherwise at the smallest positive
/// multiindex with a usable row.  Returns nothing when no chain completes.
inline std::optional<MultiindexWitness> try_select_multiindices(const RowProvider& rows,
                                                                int beta_vars, int ncols,
                                                                int target, int beta_bound,
                                                                bool include_zero) {
  if (beta_vars < 1 || ncols < 1 || target < 1 || target > ncols)
    throw std::invalid_argument("bad selection dimensions");
  std::vector<Multiindex> chain;
  std::vector<std::vector<PowerSeries>> selected;
  std::vector<int> last_cols;
  for (const Multiindex& beta :
       multiindices_in_range(beta_vars, include_zero ? 0 : 1, beta_bound)) {
    if (!chain.empty() && !grlex_less(chain.back(), beta)) continue;
    std::vector<PowerSeries> row = rows(beta);
    if (static_cast<int>(row.size()) != ncols)
      throw std::invalid_argument("row provider returned wrong arity");
    std::vector<std::vector<PowerSeries>> trial = selected;
    trial.push_back(row);
    if (auto cols = detail::certifying_columns(trial)) {
      chain.push_back(beta);
      selected = std::move(trial);
      last_cols = *cols;
      if (static_cast<int>(chain.size()) == target) break;
    }
  }
  if (static_cast<int>(chain.size()) != target) return std::nullopt;

  // Recompute the certifying minor with rows in descending chain order.
  std::vector<std::vector<PowerSeries>> desc;
  for (auto it = selected.rbegin(); it != selected.rend(); ++it) {
    std::vector<PowerSeries> r;
    for (int c : last_cols) r.push_back((*it)[c]);
    desc.push_back(std::move(r));
  }
  MultiindexWitness w;
  w.beta_list.assign(chain.rbegin(), chain.rend());
  w.minor_det = series_det(desc);
  w.vanishing_order = w.minor_det.vanishing_order();
  return w;
}

inline MultiindexWitness select_multiindices(const RowProvider& rows, int beta_vars, int ncols,
                                             int target, int beta_bound, bool include_zero) {
  auto w = try_select_multiindices(rows, beta_vars, ncols, target, beta_bound, include_zero);
  if (!w) throw SelectionError("no multiindex witness within bound");
  return *w;
}

/// Least total degree, in the variables named zeta*, of a stored term.
/// Errors on a series with no stored terms: its order cannot be read off.
inline int kappa_order(const PowerSeries& s) {
  if (s.is_zero())
    throw std::invalid_argument("series vanishes to working order; zeta order undefined");
  std::vector<std::size_t> zeta_idx;
  const auto& vars = s.vars();
  for (std::size_t i = 0; i < vars.size(); ++i)
    if (vars[i].rfind("zeta", 0) == 0) zeta_idx.push_back(i);
  int best = INT_MAX;
  for (const auto& [exp, coeff] : s.terms()) {
    int d = 0;
    for (std::size_t i : zeta_idx) d += exp[i];
    best = std::min(best, d);
  }
  return best;
}

/// Minimality probe in normal coordinates: the graph of the depth-2 chain,
/// the gradient of its last component, and its generic rank must tell the
/// same story, and do by construction.
struct MinimalityReport {
  bool minimal = false;
  bool graph_criterion = false;     // thetabar(w, zeta, 0) has a nonzero term
  bool gradient_criterion = false;  // some zeta-gradient entry is nonzero
  bool rank_criterion = false;      // depth-2 chain has full generic rank
  RankReport rank;
  int order = 0;

  std::string to_record() const {
    std::ostringstream os;
    os << "minimal status=";
    if (minimal) {
      os << "holds order=" << order;
    } else {
      os << "inconclusive-to-order-" << order;
    }
    os << " criteria=graph:" << (graph_criterion ? 'h' : 'f')
       << ",gradient:" << (gradient_criterion ? 'h' : 'f')
       << ",rank:" << (rank_criterion ? 'h' : 'f');
    return os.str();
  }
};

inline MinimalityReport is_minimal(const Hypersurface& h, unsigned long long seed, int order) {
  if (!h.is_normal()) throw std::invalid_argument("minimality probe requires normal coordinates");
  const int n = h.n();
  const std::vector<std::string> gv = graph_vars(n);

  PowerSeries tb0 = h.thetabar().with_vars(gv);
  tb0 = tb0.substitute(gv.back(), PowerSeries::constant(gv, Scalar(0)));

  MinimalityReport rep;
  rep.order = order;
  rep.graph_criterion = !tb0.is_zero();
  for (int j = 0; j < n - 1 && !rep.gradient_criterion; ++j)
    rep.gradient_criterion = !tb0.derive(gv[n - 1 + j]).is_zero();
  rep.rank = generic_rank(chain_map(h, 2), seed, order);
  rep.rank_criterion = rep.rank.rank == n;

  // The three criteria are equivalent readings of the same truncated data.
  assert(rep.graph_criterion == rep.gradient_criterion);
  assert(rep.graph_criterion == rep.rank_criterion);
  rep.minimal = rep.graph_criterion;
  return rep;
}

struct ConditionReport {
  std::string name;
  bool holds = false;
  int k0 = -1;
  std::string witness;

  std::string to_record(int order) const {
    std::ostringstream os;
    os << "cond=" << name << " status=";
    if (holds) {
      os << "holds k0=" << k0 << " witness=" << witness;
    } else {
      os << "fails-to-order-" << order;
    }
    return os.str();
  }
};

struct ClassificationReport {
  int n = 0;
  int order = 0;
  int k_max = 0;
  int beta_bound = 0;
  unsigned long long seed = 0;
  std::vector<ConditionReport> conditions;  // I..V in order
  std::optional<MultiindexWitness> witness_iv, witness_v;
  RankReport rank_iv, rank_v;  // independent cross-checks of IV and V
  MinimalityReport minimality;

  std::vector<std::string> machine_lines() const {
    std::vector<std::string> out;
    for (const ConditionReport& c : conditions) out.push_back(c.to_record(order));
    out.push_back(minimality.to_record());
    return out;
  }
};

namespace detail {

/// Incremental exact row space over a fixed monomial basis, echelon form.
class LinearSpan {
 public:
  void insert(std::vector<Scalar> v) {
    reduce(v);
    const int lead = leading(v);
    if (lead < 0) return;
    const Scalar inv = Scalar(1) / v[lead];
    for (auto& c : v) c = c * inv;
    rows_.push_back(std::move(v));
    leads_.push_back(lead);
  }

  bool contains(std::vector<Scalar> v) const {
    reduce(v);
    return leading(v) < 0;
  }

 private:
  static int leading(const std::vector<Scalar>& v) {
    for (std::size_t i = 0; i < v.size(); ++i)
      if (!v[i].is_zero()) return static_cast<int>(i);
    return -1;
  }

  void reduce(std::vector<Scalar>& v) const {
    bool changed = true;
    while (changed) {
      changed = false;
      const int lead = leading(v);
      if (lead < 0) return;
      for (std::size_t r = 0; r < rows_.size(); ++r) {
        if (leads_[r] != lead) continue;
        const Scalar f = v[lead];
        for (std::size_t i = lead; i < v.size(); ++i) v[i] = v[i] - f * rows_[r][i];
        changed = true;
        break;
      }
    }
  }

  std::vector<std::vector<Scalar>> rows_;
  std::vector<int> leads_;
};

inline std::vector<Scalar> coefficient_vector(const PowerSeries& s,
                                              const std::vector<Multiindex>& basis) {
  std::vector<Scalar> v;
  v.reserve(basis.size());
  for (const Multiindex& m : basis) v.push_back(s.coefficient(m));
  return v;
}

}  // namespace detail

/// Jet-degeneracy classification of a normal hypersurface: five nested
/// nondegeneracy conditions, each with the least jet level at which it is
/// seen to hold and a machine-checkable witness.
inline ClassificationReport classify(const Hypersurface& h, int order, int k_max, int beta_bound,
                                     unsigned long long seed) {
  if (!h.is_normal()) throw std::invalid_argument("classification requires normal coordinates");
  if (order < 2 || k_max < 1 || beta_bound < 1)
    throw std::invalid_argument("classification needs order >= 2, k_max >= 1, beta_bound >= 1");
  const int n = h.n();
  const PowerSeries theta = h.theta();
  const int jet_cap = std::max(k_max, beta_bound);
  if (!theta.is_exact() && jet_cap > theta.known_order() - 2)
    throw std::invalid_argument("insufficient known order for requested jet range");

  const std::vector<std::string> cgv = conjugate_graph_vars(n);  // (zeta.., w.., z)
  const std::vector<std::string> wz(cgv.begin() + (n - 1), cgv.end());
  const std::vector<std::string> wv(wz.begin(), wz.end() - 1);

  // Slices of theta along the zeta block: over (w, z) and restricted to z = 0.
  std::map<Multiindex, PowerSeries, GrlexLess> slice_wz, slice_w0;
  for (const Multiindex& beta : multiindices_in_range(n - 1, 0, jet_cap)) {
    PowerSeries s = h.theta_slice(beta);
    slice_wz.emplace(beta, s);
    s = s.substitute(wz.back(), PowerSeries::constant(wz, Scalar(0)));
    slice_w0.emplace(beta, s.restricted_to_vars(wv));
  }

  ClassificationReport rep;
  rep.n = n;
  rep.order = order;
  rep.k_max = k_max;
  rep.beta_bound = beta_bound;
  rep.seed = seed;

  // Conditions I and II: immersivity at 0 of w |-> (theta_beta(w, 0)) over
  // |beta| = 1 resp. |beta| <= k.  Witness: a certified nonzero scalar minor.
  auto immersive_at = [&](int lo, int hi) -> std::optional<Scalar> {
    std::vector<std::vector<Scalar>> m;
    for (const Multiindex& beta : multiindices_in_range(n - 1, lo, hi)) {
      std::vector<Scalar> row;
      for (const std::string& w : wv) {
        Multiindex e(wv.size(), 0);
        e[&w - wv.data()] = 1;
        row.push_back(slice_w0.at(beta).coefficient(e));
      }
      m.push_back(std::move(row));
    }
    if (m.empty()) return std::nullopt;
    const auto pivots = detail::numeric_pivots(m);
    if (static_cast<int>(pivots.size()) < n - 1) return std::nullopt;
    std::vector<int> rows, cols;
    for (const auto& [r, c] : pivots) {
      rows.push_back(r);
      cols.push_back(c);
    }
    std::sort(rows.begin(), rows.end());
    std::sort(cols.begin(), cols.end());
    std::vector<std::vector<Scalar>> minor;
    for (int r : rows) {
      std::vector<Scalar> row;
      for (int c : cols) row.push_back(m[r][c]);
      minor.push_back(std::move(row));
    }
    return detail::scalar_det(minor);
  };

  ConditionReport cond_i{"I", false, -1, ""};
  if (auto det = immersive_at(1, 1)) {
    cond_i.holds = true;
    cond_i.k0 = 1;
    cond_i.witness = "minor:" + to_string(*det);
  }
  ConditionReport cond_ii{"II", false, -1, ""};
  for (int k = 1; k <= k_max && !cond_ii.holds; ++k) {
    if (auto det = immersive_at(1, k)) {
      cond_ii.holds = true;
      cond_ii.k0 = k;
      cond_ii.witness = "minor:" + to_string(*det);
    }
  }

  // Condition III: each w_j has a pure power in the span of the monomial
  // multiples of the sliced family, truncated at the working degree.
  ConditionReport cond_iii{"III", false, -1, ""};
  {
    int degree_cap = order;
    for (const auto& [beta, s] : slice_w0) {
      if (degree(beta) >= 1 && degree(beta) <= k_max && !s.is_exact())
        degree_cap = std::min(degree_cap, s.known_order());
    }
    const int top = degree_cap - 1;
    std::vector<Multiindex> basis;
    for (int d = 0; d <= top; ++d)
      for (const Multiindex& m : multiindices_of_degree(static_cast<int>(wv.size()), d))
        basis.push_back(m);
    std::vector<PowerSeries> wv_series;
    for (const std::string& w : wv) wv_series.push_back(PowerSeries::variable(wv, w));

    for (int k = 1; k <= k_max && !cond_iii.holds; ++k) {
      detail::LinearSpan span;
      for (const Multiindex& beta : multiindices_in_range(n - 1, 1, k)) {
        const PowerSeries f = slice_w0.at(beta).truncated(top + 1);
        if (f.is_zero()) continue;
        for (int d = 0; d + f.vanishing_order() <= top; ++d) {
          for (const Multiindex& m : multiindices_of_degree(static_cast<int>(wv.size()), d)) {
            span.insert(detail::coefficient_vector(f * monomial_of(wv_series, m), basis));
          }
        }
      }
      std::vector<int> powers;
      for (std::size_t j = 0; j < wv.size(); ++j) {
        int found = -1;
        for (int m = 1; m <= top && found < 0; ++m) {
          Multiindex e(wv.size(), 0);
          e[j] = m;
          const auto it = std::find(basis.begin(), basis.end(), e);
          assert(it != basis.end());
          std::vector<Scalar> v(basis.size(), Scalar(0));
          v[it - basis.begin()] = Scalar(1);
          if (span.contains(v)) found = m;
        }
        if (found < 0) break;
        powers.push_back(found);
      }
      if (static_cast<int>(powers.size()) == static_cast<int>(wv.size())) {
        cond_iii.holds = true;
        cond_iii.k0 = k;
        std::string tok = "powers:[";
        for (std::size_t i = 0; i < powers.size(); ++i)
          tok += (i ? "," : "") + std::to_string(powers[i]);
        cond_iii.witness = tok + "]";
      }
    }
  }

  // Condition IV: a certified nonzero (n-1) x (n-1) determinant of
  // w-gradients of the positive slices at z = 0.
  const RowProvider rows_iv = [&](const Multiindex& beta) {
    std::vector<PowerSeries> row;
    for (const std::string& w : wv) row.push_back(slice_w0.at(beta).derive(w));
    return row;
  };
  ConditionReport cond_iv{"IV", false, -1, ""};
  for (int k = 1; k <= k_max && !cond_iv.holds; ++k) {
    const int bound = std::min(k, beta_bound);
    if (auto w = try_select_multiindices(rows_iv, n - 1, n - 1, n - 1, bound, false)) {
      cond_iv.holds = true;
      cond_iv.k0 = k;
      cond_iv.witness = "betas:" + detail::format_beta_list(w->beta_list);
      rep.witness_iv = std::move(w);
    }
  }

  // Condition V: same with full (w, z)-gradients, the zero row being the
  // gradient of the graph coordinate itself.
  const RowProvider rows_v = [&](const Multiindex& beta) {
    std::vector<PowerSeries> row;
    if (degree(beta) == 0) {
      for (std::size_t j = 0; j < wz.size(); ++j)
        row.push_back(PowerSeries::constant(wz, Scalar(j + 1 == wz.size() ? 1 : 0)));
      return row;
    }
    for (const std::string& v : wz) row.push_back(slice_wz.at(beta).derive(v));
    return row;
  };
  ConditionReport cond_v{"V", false, -1, ""};
  for (int k = 1; k <= k_max && !cond_v.holds; ++k) {
    const int bound = std::min(k, beta_bound);
    if (auto w = try_select_multiindices(rows_v, n - 1, n, n, bound, true)) {
      cond_v.holds = true;
      cond_v.k0 = k;
      cond_v.witness = "betas:" + detail::format_beta_list(w->beta_list);
      rep.witness_v = std::move(w);
    }
  }

  // Independent rank route for IV: the scaled slice tuple over w.
  {
    std::vector<PowerSeries> tuple;
    for (const Multiindex& beta :
         multiindices_in_range(n - 1, 1, std::min(k_max, beta_bound))) {
      tuple.push_back(slice_w0.at(beta) * (Scalar::i() * Scalar(multi_factorial(beta))));
    }
    rep.rank_iv = generic_rank(tuple, seed, order);
    assert((rep.rank_iv.rank == n - 1) == cond_iv.holds);
  }
  // Independent rank route for V: the restricted jet map on the hypersurface.
  {
    std::vector<PowerSeries> tuple;
    for (const PowerSeries& c : jet_morphism(h, k_max)) tuple.push_back(h.restrict_xi(c));
    rep.rank_v = generic_rank(tuple, seed, order);
    assert((rep.rank_v.rank == 2 * n - 1) == cond_v.holds);
  }

  rep.conditions = {cond_i, cond_ii, cond_iii, cond_iv, cond_v};
  // The conditions are nested: each one implies the next.
  for (std::size_t i = 0; i + 1 < rep.conditions.size(); ++i)
    assert(!rep.conditions[i].holds || rep.conditions[i + 1].holds);

  rep.minimality = is_minimal(h, seed, order);
  return rep;
}

}  // namespace crformal
