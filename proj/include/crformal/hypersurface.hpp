#pragma once

#include <istream>
#include <ostream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "expr.hpp"
#include "formal_map.hpp"
#include "io.hpp"
#include "series.hpp"

namespace crformal {

/// Variables (w1..w_{n-1}, zeta1..zeta_{n-1}, xi) of the graph function.
inline std::vector<std::string> graph_vars(int n) {
  std::vector<std::string> v;
  for (int k = 1; k < n; ++k) v.push_back("w" + std::to_string(k));
  for (int k = 1; k < n; ++k) v.push_back("zeta" + std::to_string(k));
  v.push_back("xi");
  return v;
}

/// Ambient variables (w1..w_{n-1}, z, zeta1..zeta_{n-1}, xi) in which the
/// complexified defining functions live.
inline std::vector<std::string> ambient_vars(int n) {
  std::vector<std::string> v = source_vars(n);
  std::vector<std::string> c = conjugate_vars(n);
  v.insert(v.end(), c.begin(), c.end());
  return v;
}

/// Variables (zeta1..zeta_{n-1}, w1..w_{n-1}, z) carrying series restricted
/// to the complexification by eliminating xi.
inline std::vector<std::string> conjugate_graph_vars(int n) {
  std::vector<std::string> v;
  for (int k = 1; k < n; ++k) v.push_back("zeta" + std::to_string(k));
  for (int k = 1; k < n; ++k) v.push_back("w" + std::to_string(k));
  v.push_back("z");
  return v;
}

/// Formal real hypersurface through 0 in graph form: on the
/// complexification, z = xi + i*Theta_bar(w, zeta, xi).  The companion
/// graph function Theta with xi = z - i*Theta(zeta, w, z) is obtained by
/// conjugating coefficients and exchanging the two variable groups.
class Hypersurface {
 public:
  Hypersurface(int n, PowerSeries thetabar)
      : n_(n), thetabar_(std::move(thetabar)) {
    if (n_ < 2) throw std::invalid_argument("ambient dimension must be >= 2");
    if (thetabar_.vars() != graph_vars(n_))
      throw std::invalid_argument(
          "graph function must use variables (w, zeta, xi)");
    if (!thetabar_.constant_term().is_zero())
      throw std::invalid_argument("hypersurface must pass through 0");
  }

  /// Build from a real defining expression such as "Im(z2) - z1*conj(z1)".
  /// The graph coordinate (by default the highest-index one) is solved for;
  /// the remaining coordinates become w1..w_{n-1} in index order.
  static Hypersurface from_expression(const std::string& text, int order,
                                      int graph_index = 0) {
    RealExpression real = evaluate_defining_expression(text, order);
    int n = real.n;
    if (n < 2)
      throw std::runtime_error("expression must involve at least two coordinates");
    int g = graph_index == 0 ? n : graph_index;
    if (g < 1 || g > n)
      throw std::runtime_error("graph coordinate out of range");
    std::vector<std::string> names(2 * n);
    int j = 0;
    for (int k = 1; k <= n; ++k) {
      if (k == g) {
        names[k - 1] = "z";
        names[n + k - 1] = "xi";
      } else {
        ++j;
        names[k - 1] = "w" + std::to_string(j);
        names[n + k - 1] = "zeta" + std::to_string(j);
      }
    }
    PowerSeries rho =
        real.rho.renamed_vars(names).with_vars(ambient_vars(n));
    if (!rho.constant_term().is_zero())
      throw std::runtime_error("defining expression does not vanish at 0");

    PowerSeries zsol = solve_graph(rho, n, order);
    PowerSeries xi_var = PowerSeries::variable(graph_vars(n), "xi");
    PowerSeries tb = (zsol - xi_var) * (-Scalar::i());
    return Hypersurface(n, std::move(tb));
  }

  int n() const { return n_; }
  const PowerSeries& thetabar() const { return thetabar_; }

  /// Theta(zeta, w, z) over (zeta, w, z): conjugated coefficients with the
  /// variable groups exchanged.
  PowerSeries theta() const {
    return thetabar_.conjugated().renamed_vars(conjugate_graph_vars(n_));
  }

  /// Slice Theta_bar_beta(zeta, xi) of w^beta.
  PowerSeries thetabar_slice(const Multiindex& beta) const {
    const std::vector<std::string> all = graph_vars(n_);
    std::vector<std::string> block(all.begin(), all.begin() + (n_ - 1));
    return thetabar_.coefficient_slice(block, beta);
  }

  /// Slice Theta_beta(w, z) of zeta^beta.
  PowerSeries theta_slice(const Multiindex& beta) const {
    const std::vector<std::string> all = conjugate_graph_vars(n_);
    std::vector<std::string> block(all.begin(), all.begin() + (n_ - 1));
    return theta().coefficient_slice(block, beta);
  }

  /// Defining function r = z - xi - i*Theta_bar over the ambient variables.
  PowerSeries r_ambient() const {
    const std::vector<std::string> amb = ambient_vars(n_);
    return PowerSeries::variable(amb, "z") - PowerSeries::variable(amb, "xi") -
           Scalar::i() * thetabar_.with_vars(amb);
  }

  /// Conjugate defining function rbar = xi - z + i*Theta over the ambient
  /// variables.
  PowerSeries rbar_ambient() const {
    const std::vector<std::string> amb = ambient_vars(n_);
    return PowerSeries::variable(amb, "xi") - PowerSeries::variable(amb, "z") +
           Scalar::i() * theta().with_vars(amb);
  }

  /// Restrict an ambient series to the complexification by substituting
  /// z := xi + i*Theta_bar(w, zeta, xi); the result lives on (w, zeta, xi).
  PowerSeries restrict_z(const PowerSeries& s) const {
    require_ambient(s);
    PowerSeries value = PowerSeries::variable(graph_vars(n_), "xi") +
                        Scalar::i() * thetabar_;
    return s.substitute("z", value);
  }

  /// Restrict an ambient series to the complexification by substituting
  /// xi := z - i*Theta(zeta, w, z); the result lives on (zeta, w, z).
  PowerSeries restrict_xi(const PowerSeries& s) const {
    require_ambient(s);
    PowerSeries value = PowerSeries::variable(conjugate_graph_vars(n_), "z") -
                        Scalar::i() * theta();
    return s.substitute("xi", value);
  }

  /// Residual of the reality condition
  /// Theta_bar(w, zeta, z - i*Theta(zeta, w, z)) - Theta(zeta, w, z);
  /// it vanishes identically exactly when the graph comes from a real
  /// defining function.
  PowerSeries reality_residual() const {
    PowerSeries tb_amb = thetabar_.with_vars(ambient_vars(n_));
    return restrict_xi(tb_amb) - theta();
  }

  bool is_real() const { return reality_residual().is_zero(); }

  /// A hypersurface is in normal form when Theta_bar vanishes both for
  /// zeta = 0 and for w = 0.
  bool is_normal() const {
    const Multiindex zero(n_ - 1, 0);
    const std::vector<std::string> gv = graph_vars(n_);
    const std::vector<std::string> wblock(gv.begin(), gv.begin() + (n_ - 1));
    const std::vector<std::string> zetablock(gv.end() - n_, gv.end() - 1);
    return thetabar_.coefficient_slice(wblock, zero).is_zero() &&
           thetabar_.coefficient_slice(zetablock, zero).is_zero();
  }

  void save(std::ostream& os) const {
    os << "hypersurface n=" << n_ << " normal="
       << (is_normal() ? "true" : "false") << "\n";
    write_series_record(os, thetabar_, "thetabar");
  }

  static Hypersurface load(std::istream& is) {
    std::string line;
    if (!detail::next_line(is, line))
      throw std::runtime_error("expected a hypersurface record");
    auto kv = detail::parse_kv_line(line, "hypersurface");
    int n = detail::parse_int(detail::require_key(kv, "n", "hypersurface"), "n");
    const std::string& normal =
        detail::require_key(kv, "normal", "hypersurface");
    if (normal != "true" && normal != "false")
      throw std::runtime_error("normal flag must be true or false");
    SeriesRecord rec = read_series_record(is);
    if (rec.tag != "thetabar")
      throw std::runtime_error("expected the thetabar record");
    Hypersurface h(n, std::move(rec.series));
    if (h.is_normal() != (normal == "true"))
      throw std::runtime_error("stored normal flag contradicts the series");
    return h;
  }

 private:
  static PowerSeries solve_graph(const PowerSeries& rho, int n, int order) {
    // A defining function at most linear in z with constant z-coefficient
    // solves exactly; otherwise solve the implicit equation to the
    // requested order.
    Multiindex zlin(2 * n, 0);
    zlin[n - 1] = 1;
    if (rho.is_exact()) {
      int max_zdeg = 0;
      for (const auto& [e, c] : rho.terms())
        max_zdeg = std::max(max_zdeg, e[n - 1]);
      if (max_zdeg <= 1) {
        PowerSeries zcoef =
            rho.coefficient_slice({std::string("z")}, Multiindex{1});
        if (zcoef.terms().size() == 1 &&
            degree(zcoef.terms().begin()->first) == 0) {
          Scalar b = zcoef.terms().begin()->second;
          PowerSeries a =
              rho.coefficient_slice({std::string("z")}, Multiindex{0});
          return a.with_vars(graph_vars(n)) / (-b);
        }
      }
      return implicit_solve(rho, "z", order).with_vars(graph_vars(n));
    }
    if (rho.coefficient(zlin).is_zero())
      throw std::runtime_error("graph coordinate is degenerate at 0");
    return implicit_solve(rho, "z", order).with_vars(graph_vars(n));
  }

  void require_ambient(const PowerSeries& s) const {
    if (s.vars() != ambient_vars(n_))
      throw std::invalid_argument("series must live on the ambient variables");
  }

  int n_;
  PowerSeries thetabar_;
};

/// Result of rewriting a hypersurface in new coordinates.
struct TransformedHypersurface {
  Hypersurface surface;
  FormalMap change;  // new coordinates as functions of the old ones
};

/// Rewrite the hypersurface in the image coordinates of an invertible
/// holomorphic change (w, z) -> (g(w, z), f(w, z)) fixing 0.  The new
/// graph function is recovered by solving the transported defining
/// equation to the given order.
inline Hypersurface pushforward(const Hypersurface& h, const FormalMap& change,
                                int order) {
  int n = h.n();
  if (change.n() != n) throw std::invalid_argument("dimension mismatch");
  FormalMap inv = change.inverse(order);

  const std::vector<std::string> amb = ambient_vars(n);
  // Old coordinates as functions of the new ambient ones.
  std::vector<PowerSeries> old_t;
  for (const auto& c : inv.components()) old_t.push_back(c.with_vars(amb));
  std::vector<PowerSeries> old_tau;
  for (const auto& c : inv.conjugate_components())
    old_tau.push_back(c.with_vars(amb));

  // Transported relation: f_inv(t) - fbar_inv(tau)
  //   - i * Theta_bar(g_inv(t), gbar_inv(tau), fbar_inv(tau)) = 0.
  std::vector<PowerSeries> args;
  for (int k = 0; k + 1 < n; ++k) args.push_back(old_t[k]);
  for (int k = 0; k + 1 < n; ++k) args.push_back(old_tau[k]);
  args.push_back(old_tau[n - 1]);
  PowerSeries relation = old_t[n - 1] - old_tau[n - 1] -
                         Scalar::i() * h.thetabar().compose(args);
  PowerSeries zsol = implicit_solve(relation, "z", order);
  PowerSeries tb = (zsol.with_vars(graph_vars(n)) -
                    PowerSeries::variable(graph_vars(n), "xi")) *
                   (-Scalar::i());
  return Hypersurface(n, std::move(tb));
}

/// Degree-by-degree elimination of the zeta = 0 slice by substitutions
/// z -> z - i*phi(w, z).  Returns the normal form together with the
/// accumulated coordinate change, which witnesses the result: pushing the
/// original hypersurface through it reproduces the normal form.
inline TransformedHypersurface normalize(const Hypersurface& h, int order) {
  int n = h.n();
  if (!h.is_real())
    throw std::runtime_error("cannot normalize: the graph is not real");
  const std::vector<std::string> src = source_vars(n);
  Hypersurface cur = Hypersurface(n, h.thetabar().truncated(order));
  std::vector<PowerSeries> witness;
  for (const auto& v : src) witness.push_back(PowerSeries::variable(src, v));

  std::vector<std::string> wblock(src.begin(), src.end() - 1);
  std::vector<std::string> wz_names = src;
  for (int round = 0; round < order; ++round) {
    Multiindex zero(n - 1, 0);
    std::vector<std::string> zeta_block;
    for (int k = 1; k < n; ++k) zeta_block.push_back("zeta" + std::to_string(k));
    PowerSeries a = cur.thetabar().coefficient_slice(zeta_block, zero);
    if (a.is_zero() || a.vanishing_order() >= order) break;
    int d = a.vanishing_order();
    // Homogeneous part of degree d, renamed from (w, xi) to (w, z).
    PowerSeries part(a.vars(), a.known_order());
    for (const auto& [e, c] : a.terms())
      if (degree(e) == d) part.set_coefficient(e, c);
    // The pure-xi component is shared between the two slices; halve it.
    Multiindex wzero(n - 1, 0);
    PowerSeries pure = part.coefficient_slice(wblock, wzero);
    if (pure != pure.conjugated())
      throw std::runtime_error("cannot normalize: pure graph part not real");
    PowerSeries half_pure(part.vars(), part.known_order());
    for (const auto& [e, c] : pure.terms()) {
      Multiindex lifted(n, 0);
      lifted[n - 1] = e[0];
      half_pure.set_coefficient(lifted, c / Scalar(2));
    }
    PowerSeries phi = (part - half_pure).renamed_vars(wz_names);
    std::vector<PowerSeries> step;
    for (int k = 0; k + 1 < n; ++k)
      step.push_back(PowerSeries::variable(src, src[k]));
    step.push_back(PowerSeries::variable(src, "z") - Scalar::i() * phi);
    FormalMap step_map{step};
    cur = pushforward(cur, step_map, order);
    std::vector<PowerSeries> composed;
    for (const auto& c : step_map.components())
      composed.push_back(c.truncated(order).compose(witness));
    witness = std::move(composed);
  }
  Multiindex zero(n - 1, 0);
  std::vector<std::string> zeta_block;
  for (int k = 1; k < n; ++k) zeta_block.push_back("zeta" + std::to_string(k));
  if (!cur.thetabar().coefficient_slice(zeta_block, zero).is_zero())
    throw std::runtime_error("normalization did not terminate");
  return {std::move(cur), FormalMap(std::move(witness))};
}

}  // namespace crformal
