#pragma once

#include <algorithm>
#include <cassert>
#include <functional>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "classify.hpp"
#include "formal_map.hpp"
#include "hypersurface.hpp"
#include "multiindex.hpp"
#include "segre.hpp"
#include "series.hpp"

namespace crformal {

/// Variables (w1..w_{n-1}, z, lbar1..lbar_{n-1}, mbar) of the reflection
/// function: source coordinates together with the reflected target parameters.
inline std::vector<std::string> reflection_vars(int n) {
  std::vector<std::string> v = source_vars(n);
  for (int k = 1; k < n; ++k) v.push_back("lbar" + std::to_string(k));
  v.push_back("mbar");
  return v;
}

/// Free target coordinates t' = (wp1..wp_{n-1}, zp).
inline std::vector<std::string> target_vars(int n) {
  std::vector<std::string> v;
  for (int k = 1; k < n; ++k) v.push_back("wp" + std::to_string(k));
  v.push_back("zp");
  return v;
}

/// Source coordinates, the conjugate fiber block and the free target
/// coordinates: (w1.., z, zeta1.., wp1.., zp).  The xi coordinate has been
/// eliminated through the graph.
inline std::vector<std::string> extended_vars(int n) {
  std::vector<std::string> v = source_vars(n);
  for (int k = 1; k < n; ++k) v.push_back("zeta" + std::to_string(k));
  for (std::string& t : target_vars(n)) v.push_back(std::move(t));
  return v;
}

/// Extended coordinates restricted to the second chain: (w1.., zeta1.., wp1..,
/// zp).  The z coordinate has been evaluated along the chain.
inline std::vector<std::string> chain_vars(int n) {
  std::vector<std::string> v;
  for (int k = 1; k < n; ++k) v.push_back("w" + std::to_string(k));
  for (int k = 1; k < n; ++k) v.push_back("zeta" + std::to_string(k));
  for (std::string& t : target_vars(n)) v.push_back(std::move(t));
  return v;
}

/// Complexified CR vector field acting on the ambient ring in (w, z, zeta,
/// xi).  The holomorphic field in direction j is d/dw_j + i Tbar_{w_j} d/dz
/// and the antiholomorphic one is d/dzeta_j - i T_{zeta_j} d/dxi, where Tbar
/// graphs the hypersurface and T is its conjugate.  Fields of one kind
/// commute, and both kinds are tangent to the graph.
class CRDerivation {
 public:
  enum class Kind { holomorphic, antiholomorphic };

  static CRDerivation holomorphic(const Hypersurface& m, int j) {
    require_index(m, j);
    const std::string wj = "w" + std::to_string(j);
    PowerSeries coeff =
        m.thetabar().derive(wj).with_vars(ambient_vars(m.n())) * Scalar::i();
    return CRDerivation(Kind::holomorphic, j, wj, "z", std::move(coeff));
  }

  static CRDerivation antiholomorphic(const Hypersurface& m, int j) {
    require_index(m, j);
    const std::string zj = "zeta" + std::to_string(j);
    PowerSeries coeff =
        m.theta().derive(zj).with_vars(ambient_vars(m.n())) * (-Scalar::i());
    return CRDerivation(Kind::antiholomorphic, j, zj, "xi", std::move(coeff));
  }

  Kind kind() const { return kind_; }
  int direction() const { return j_; }
  const PowerSeries& coefficient() const { return coefficient_; }

  /// Applies the field to an ambient series.  One order of knowledge is
  /// consumed; applying to an inexact series that has fewer than two known
  /// orders left is refused.
  PowerSeries apply(const PowerSeries& s) const {
    if (s.vars() != coefficient_.vars())
      throw std::invalid_argument("CR derivation expects an ambient series");
    if (!s.is_exact() && s.known_order() < 2)
      throw std::runtime_error("CR application would exhaust the known order");
    return s.derive(direct_) + coefficient_ * s.derive(partner_);
  }

 private:
  CRDerivation(Kind kind, int j, std::string direct, std::string partner,
               PowerSeries coeff)
      : kind_(kind),
        j_(j),
        direct_(std::move(direct)),
        partner_(std::move(partner)),
        coefficient_(std::move(coeff)) {}

  static void require_index(const Hypersurface& m, int j) {
    if (j < 1 || j >= m.n())
      throw std::invalid_argument("CR direction out of range");
  }

  Kind kind_;
  int j_;
  std::string direct_;
  std::string partner_;
  PowerSeries coefficient_;
};

/// The antiholomorphic CR fields of m, one per direction 1..n-1.
inline std::vector<CRDerivation> antiholomorphic_fields(const Hypersurface& m) {
  std::vector<CRDerivation> out;
  out.reserve(m.n() - 1);
  for (int j = 1; j < m.n(); ++j)
    out.push_back(CRDerivation::antiholomorphic(m, j));
  return out;
}

namespace detail {

/// Iterated application: beta_j times in direction j.  The fields commute, so
/// the application order does not matter.
inline PowerSeries iterate_fields(const std::vector<CRDerivation>& fields,
                                  const Multiindex& beta, PowerSeries s) {
  if (beta.size() != fields.size())
    throw std::invalid_argument("multiindex arity must match the CR directions");
  for (std::size_t j = 0; j < beta.size(); ++j)
    for (int k = 0; k < beta[j]; ++k) s = fields[j].apply(s);
  return s;
}

/// Product of component powers: comps[0]^{gamma_0} * comps[1]^{gamma_1} * ...
inline PowerSeries component_power(const std::vector<PowerSeries>& comps,
                                   const Multiindex& gamma) {
  assert(!comps.empty() && gamma.size() <= comps.size());
  PowerSeries acc = PowerSeries::constant(comps[0].vars(), Scalar(1));
  for (std::size_t j = 0; j < gamma.size(); ++j)
    for (int k = 0; k < gamma[j]; ++k) acc = acc * comps[j];
  return acc;
}

/// Largest w-block degree appearing in the graphing series.  For exact data,
/// slices of higher index vanish identically.
inline int exact_slice_bound(const Hypersurface& m) {
  assert(m.thetabar().is_exact());
  int bound = 0;
  const int nb = m.n() - 1;
  for (const auto& [e, c] : m.thetabar().terms()) {
    int d = 0;
    for (int k = 0; k < nb; ++k) d += e[k];
    bound = std::max(bound, d);
  }
  return bound;
}

/// All multiindices g with g <= b componentwise, in odometer order.
inline std::vector<Multiindex> componentwise_below(const Multiindex& b) {
  std::vector<Multiindex> out;
  Multiindex g(b.size(), 0);
  while (true) {
    out.push_back(g);
    std::size_t k = 0;
    while (k < g.size()) {
      if (g[k] < b[k]) {
        ++g[k];
        for (std::size_t j = 0; j < k; ++j) g[j] = 0;
        break;
      }
      ++k;
    }
    if (k == g.size()) break;
  }
  return out;
}

}  // namespace detail

/// Iterated antiholomorphic CR derivative followed by restriction to the
/// hypersurface: the fields act on the ambient lift of the target series and
/// the result is written on the graph by substituting z.  Each application
/// consumes one order of knowledge.
inline PowerSeries cr_apply(const Hypersurface& m, const Multiindex& beta,
                            const PowerSeries& target) {
  if (!m.is_normal())
    throw std::invalid_argument("cr_apply expects normal coordinates");
  const std::vector<std::string> amb = ambient_vars(m.n());
  PowerSeries lifted = target.vars() == amb ? target : target.with_vars(amb);
  PowerSeries out =
      detail::iterate_fields(antiholomorphic_fields(m), beta, std::move(lifted));
  return m.restrict_z(out);
}

/// Invertibility data of a formal map: the full Jacobian determinant at the
/// origin, and the determinant of the w-block (dg_j/dw_k)(0) whose
/// nonvanishing keeps the Cramer denominators of the reflection identities
/// invertible.
struct InvertibilityReport {
  Scalar jacobian_determinant{0};
  Scalar w_block_determinant{0};
  bool invertible() const { return !jacobian_determinant.is_zero(); }
};

inline InvertibilityReport check_invertible(const FormalMap& h) {
  InvertibilityReport rep;
  rep.jacobian_determinant = h.jacobian_determinant_at_origin();
  const int n = h.n();
  const auto jac = h.jacobian_at_origin();
  std::vector<std::vector<Scalar>> wblock(n - 1,
                                          std::vector<Scalar>(n - 1, Scalar(0)));
  for (int j = 0; j + 1 < n; ++j)
    for (int k = 0; k + 1 < n; ++k) wblock[j][k] = jac[j][k];
  rep.w_block_determinant = detail::scalar_det(wblock);
  return rep;
}

/// First fundamental equation residual of the map between the two graphs:
/// f(w,z) - fbar(zeta,xi) - i Tbar'(g, gbar, fbar), written over (zeta, w, z)
/// by eliminating xi through the graph.  The conjugate equation is evaluated
/// as well; the two residuals vanish together, and the first is returned,
/// truncated to the requested order.
inline PowerSeries tangency_check(const FormalMap& h, const Hypersurface& m,
                                  const Hypersurface& mp, int order) {
  if (h.n() != m.n() || h.n() != mp.n())
    throw std::invalid_argument("tangency check needs matching dimensions");
  if (order < 1)
    throw std::invalid_argument("tangency check needs a positive order");
  const int n = h.n();
  const std::vector<std::string> amb = ambient_vars(n);

  std::vector<PowerSeries> t_args, tau_args;
  for (const PowerSeries& c : h.components()) t_args.push_back(c.with_vars(amb));
  for (const PowerSeries& c : h.conjugate_components())
    tau_args.push_back(c.with_vars(amb));

  std::vector<PowerSeries> first_args;  // (w', zeta', xi') <- (g, gbar, fbar)
  for (int j = 0; j + 1 < n; ++j) first_args.push_back(t_args[j]);
  for (int j = 0; j + 1 < n; ++j) first_args.push_back(tau_args[j]);
  first_args.push_back(tau_args[n - 1]);
  PowerSeries first = t_args[n - 1] - tau_args[n - 1] -
                      Scalar::i() * mp.thetabar().compose(first_args);

  std::vector<PowerSeries> second_args;  // (zeta', w', z') <- (gbar, g, f)
  for (int j = 0; j + 1 < n; ++j) second_args.push_back(tau_args[j]);
  for (int j = 0; j + 1 < n; ++j) second_args.push_back(t_args[j]);
  second_args.push_back(t_args[n - 1]);
  PowerSeries second = tau_args[n - 1] - t_args[n - 1] +
                       Scalar::i() * mp.theta().compose(second_args);

  PowerSeries first_res = m.restrict_xi(first).truncated(order);
  PowerSeries second_res = m.restrict_z(second).truncated(order);
  assert(first_res.is_zero() == second_res.is_zero());
  return first_res;
}

/// The reflection of a formal map in a target hypersurface: an affine series
/// in the reflected parameters (lbar, mbar) whose coefficients are series
/// along the map.
class ReflectionFunction {
 public:
  ReflectionFunction(PowerSeries series, FormalMap source, Hypersurface target)
      : series_(std::move(series)),
        source_(std::move(source)),
        target_(std::move(target)) {}

  const PowerSeries& series() const { return series_; }
  const FormalMap& source() const { return source_; }
  const Hypersurface& target() const { return target_; }

 private:
  PowerSeries series_;
  FormalMap source_;
  Hypersurface target_;
};

/// Assembles mbar - f(w,z) + i * sum over 0 < |beta| <= beta_bound of
/// lbar^beta Theta'_beta(g, f), each coefficient series carried to t-degree
/// below the working order.  The stored series is truncated to its honest
/// total-degree knowledge, which the discarded lbar tail limits to
/// beta_bound + 2 for a normal target (beta_bound + 1 otherwise).
inline ReflectionFunction reflection_function(const FormalMap& h,
                                              const Hypersurface& mp, int order,
                                              int beta_bound) {
  if (h.n() != mp.n())
    throw std::invalid_argument("reflection function needs matching dimensions");
  if (order < 2 || beta_bound < 1)
    throw std::invalid_argument(
        "reflection function needs order >= 2 and beta bound >= 1");
  const int n = h.n();
  const std::vector<std::string> rv = reflection_vars(n);

  PowerSeries r = PowerSeries::variable(rv, "mbar") - h.f().with_vars(rv);
  int effective_bound = beta_bound;
  const PowerSeries& tb = mp.thetabar();
  for (const Multiindex& beta : multiindices_in_range(n - 1, 1, beta_bound)) {
    if (!tb.is_exact() && tb.known_order() - degree(beta) < 1) {
      effective_bound = degree(beta) - 1;
      break;
    }
    PowerSeries composite = mp.theta_slice(beta).compose(h.components());
    if (!composite.is_exact()) composite = composite.truncated(order);
    PowerSeries lam = PowerSeries::constant(rv, Scalar(1));
    for (int j = 0; j + 1 < n; ++j)
      for (int k = 0; k < beta[j]; ++k)
        lam = lam * PowerSeries::variable(rv, rv[n + j]);
    r += Scalar::i() * lam * composite.with_vars(rv);
  }
  // The discarded lbar tail starts at degree effective_bound + 1; for an
  // exact target whose slices are exhausted below the bound there is no
  // discarded tail and the assembled series is exact.
  const int guard = mp.is_normal() ? 2 : 1;
  const bool complete =
      tb.is_exact() && beta_bound >= detail::exact_slice_bound(mp);
  if (!complete) r = r.truncated(std::min(order, effective_bound + guard));

  PowerSeries slope = r.derive("mbar");
  assert((slope - PowerSeries::constant(rv, Scalar(1), slope.known_order()))
             .is_zero());
  return ReflectionFunction(std::move(r), h, mp);
}

/// Produces the right members omega_beta of the reflection identities.  The
/// antiholomorphic fields are applied to the basic tangency identity; the
/// chain-rule system they satisfy is triangular once det(Lbar_j gbar_k) is
/// invertible at the origin, and is solved one derivative at a time.
class OmegaCalculator {
 public:
  OmegaCalculator(const FormalMap& h, const Hypersurface& m, int order)
      : m_(m), fields_(antiholomorphic_fields(m)) {
    const int n = m.n();
    if (h.n() != n)
      throw std::invalid_argument("omega: map and hypersurface dimensions differ");
    if (order < 2) throw std::invalid_argument("omega: order must be at least 2");
    const std::vector<std::string> amb = ambient_vars(n);
    const std::vector<PowerSeries> tau = h.conjugate_components();
    std::vector<PowerSeries> gbar;
    for (int j = 0; j + 1 < n; ++j) gbar.push_back(tau[j].with_vars(amb));

    std::vector<std::vector<PowerSeries>> a(n - 1);
    for (int j = 0; j + 1 < n; ++j)
      for (int k = 0; k + 1 < n; ++k) a[j].push_back(fields_[j].apply(gbar[k]));
    delta_ = series_det(a);
    if (delta_.constant_term().is_zero())
      throw std::invalid_argument("omega: det(Lbar gbar) vanishes at the origin");

    // Invert the coefficient matrix via the adjugate.  An exact nonconstant
    // determinant must be truncated before its reciprocal exists.
    PowerSeries det = delta_;
    if (det.is_exact() && det.terms().size() > 1) det = det.truncated(order);
    PowerSeries inv_det = det.reciprocal();
    inverse_.assign(n - 1, std::vector<PowerSeries>(n - 1, PowerSeries(amb)));
    for (int k = 0; k + 1 < n; ++k)
      for (int j = 0; j + 1 < n; ++j) {
        std::vector<int> rows, cols;
        for (int r = 0; r + 1 < n; ++r)
          if (r != j) rows.push_back(r);
        for (int c = 0; c + 1 < n; ++c)
          if (c != k) cols.push_back(c);
        PowerSeries cof = rows.empty() ? PowerSeries::constant(amb, Scalar(1))
                                       : detail::submatrix_det(a, rows, cols);
        if ((j + k) % 2 == 1) cof = -cof;
        inverse_[k][j] = cof * inv_det;
      }

    phi_.emplace(Multiindex(n - 1, 0),
                 (h.f().with_vars(amb) - tau[n - 1].with_vars(amb)) *
                     (-Scalar::i()));
  }

  /// Ambient generating series: phi_0 is -i (f - fbar) and each further index
  /// divides one tangential derivative by the running multiplicity, so that
  /// phi_beta carries the 1/beta! normalization.
  const PowerSeries& phi(const Multiindex& beta) {
    auto it = phi_.find(beta);
    if (it != phi_.end()) return it->second;
    std::size_t k = 0;
    while (k < beta.size() && beta[k] == 0) ++k;
    assert(k < beta.size());
    Multiindex prev = beta;
    prev[k] -= 1;
    PowerSeries value = tangential(k, phi(prev)) / Scalar(beta[k]);
    return phi_.emplace(beta, std::move(value)).first->second;
  }

  /// omega_beta written on the graph, over (w, zeta, xi).
  PowerSeries omega(const Multiindex& beta) { return m_.restrict_z(phi(beta)); }

  /// The Cramer denominator det(Lbar_j gbar_k) written on the graph.
  PowerSeries delta() const { return m_.restrict_z(delta_); }

 private:
  PowerSeries tangential(std::size_t k, const PowerSeries& s) const {
    PowerSeries acc = inverse_[k][0] * fields_[0].apply(s);
    for (std::size_t j = 1; j < fields_.size(); ++j)
      acc += inverse_[k][j] * fields_[j].apply(s);
    return acc;
  }

  Hypersurface m_;
  std::vector<CRDerivation> fields_;
  PowerSeries delta_;
  std::vector<std::vector<PowerSeries>> inverse_;
  std::map<Multiindex, PowerSeries> phi_;
};

/// Verification record for one classical reflection identity: the left member
/// assembled from target slices along the map, against the right member
/// produced by CR differentiation and Cramer elimination, both written on the
/// graph over (w, zeta, xi).
struct IdentityReport {
  Multiindex beta;
  PowerSeries lhs;
  PowerSeries omega;
  PowerSeries delta;
  int order_delivered = 0;
  bool ok = false;

  std::string record() const {
    std::ostringstream os;
    os << "identity=5.4 beta=" << detail::format_multiindex(beta)
       << " order_delivered=" << order_delivered
       << " status=" << (ok ? "ok" : "fail");
    return os.str();
  }
};

inline IdentityReport reflection_identity(const FormalMap& h,
                                          const Hypersurface& m,
                                          const Hypersurface& mp,
                                          const Multiindex& beta, int order) {
  if (h.n() != m.n() || h.n() != mp.n())
    throw std::invalid_argument("reflection identity needs matching dimensions");
  const int n = h.n();
  if (static_cast<int>(beta.size()) != n - 1)
    throw std::invalid_argument("reflection identity: multiindex arity mismatch");
  if (order <= degree(beta))
    throw std::invalid_argument("reflection identity: order too small for beta");
  if (!tangency_check(h, m, mp, order).is_zero())
    throw std::invalid_argument(
        "reflection identity requires a map tangent to the target");

  OmegaCalculator calc(h, m, order);

  const std::vector<std::string> amb = ambient_vars(n);
  const std::vector<PowerSeries> tau = h.conjugate_components();
  std::vector<PowerSeries> gbar;
  for (int j = 0; j + 1 < n; ++j) gbar.push_back(tau[j].with_vars(amb));

  int delivered = order - degree(beta);
  const PowerSeries& tb = mp.thetabar();
  int gamma_bound;
  if (tb.is_exact()) {
    gamma_bound = std::max(0, detail::exact_slice_bound(mp) - degree(beta));
  } else {
    const int avail = tb.known_order() - 1 - degree(beta);
    if (avail < 0)
      throw std::runtime_error("reflection identity: target slices exhausted");
    gamma_bound = std::min(order - 1, avail);
    if (gamma_bound < order - 1)
      delivered = std::min(delivered,
                           gamma_bound + 1 + (mp.is_normal() ? 1 : 0));
  }

  PowerSeries lhs_amb(amb);
  for (const Multiindex& gamma : multiindices_in_range(n - 1, 0, gamma_bound)) {
    PowerSeries slice = mp.theta_slice(add(beta, gamma));
    if (slice.is_zero()) continue;
    PowerSeries piece = slice.compose(h.components()).with_vars(amb);
    if (degree(gamma) > 0)
      piece = piece * detail::component_power(gbar, gamma) *
              Scalar(shift_binomial(beta, gamma));
    lhs_amb += piece;
  }

  IdentityReport rep;
  rep.beta = beta;
  rep.lhs = m.restrict_z(lhs_amb);
  rep.omega = calc.omega(beta);
  rep.delta = calc.delta();
  if (!rep.lhs.is_exact()) delivered = std::min(delivered, rep.lhs.known_order());
  if (!rep.omega.is_exact())
    delivered = std::min(delivered, rep.omega.known_order());
  if (delivered < 1)
    throw std::runtime_error("reflection identity: no deliverable order left");
  rep.order_delivered = delivered;
  PowerSeries residual = rep.lhs - rep.omega;
  rep.ok = residual.is_exact() ? residual.is_zero()
                               : residual.truncated(delivered).is_zero();
  return rep;
}

/// Residual of one conjugate reflection identity: Lbar^beta (fbar - f) plus
/// i times the sum over gamma of g^gamma Lbar^beta of the gamma-th target
/// slice along the conjugate map, written on the graph over (w, zeta, xi) and
/// truncated to the delivered order.  For a map tangent to the target the
/// residual vanishes; for beta = 0 it is the second fundamental equation.
inline PowerSeries conjugate_reflection_identity(const FormalMap& h,
                                                 const Hypersurface& m,
                                                 const Hypersurface& mp,
                                                 const Multiindex& beta,
                                                 int order) {
  if (h.n() != m.n() || h.n() != mp.n())
    throw std::invalid_argument(
        "conjugate reflection identity needs matching dimensions");
  const int n = h.n();
  if (static_cast<int>(beta.size()) != n - 1)
    throw std::invalid_argument(
        "conjugate reflection identity: multiindex arity mismatch");
  if (order <= degree(beta))
    throw std::invalid_argument(
        "conjugate reflection identity: order too small for beta");
  if (check_invertible(h).w_block_determinant.is_zero())
    throw std::invalid_argument(
        "conjugate reflection identity: det(Lbar gbar) vanishes at the origin");

  const std::vector<std::string> amb = ambient_vars(n);
  const std::vector<CRDerivation> fields = antiholomorphic_fields(m);
  const std::vector<PowerSeries> tau = h.conjugate_components();
  std::vector<PowerSeries> t_args, tau_args;
  for (const PowerSeries& c : h.components()) t_args.push_back(c.with_vars(amb));
  for (const PowerSeries& c : tau) tau_args.push_back(c.with_vars(amb));

  std::vector<PowerSeries> chi_args;  // (zeta', xi') <- (gbar, fbar)
  for (int j = 0; j + 1 < n; ++j) chi_args.push_back(tau_args[j]);
  chi_args.push_back(tau_args[n - 1]);

  int delivered = order - degree(beta);
  const PowerSeries& tb = mp.thetabar();
  int gamma_bound;
  if (tb.is_exact()) {
    gamma_bound = detail::exact_slice_bound(mp);
  } else {
    const int avail = tb.known_order() - 1;
    gamma_bound = std::min(order - 1, avail);
    if (gamma_bound < order - 1)
      delivered = std::min(delivered, gamma_bound + 1);
  }

  PowerSeries acc =
      detail::iterate_fields(fields, beta, tau_args[n - 1] - t_args[n - 1]);
  for (const Multiindex& gamma : multiindices_in_range(n - 1, 1, gamma_bound)) {
    PowerSeries slice = mp.thetabar_slice(gamma);
    if (slice.is_zero()) continue;
    PowerSeries piece =
        detail::iterate_fields(fields, beta, slice.compose(chi_args));
    acc += Scalar::i() * detail::component_power(t_args, gamma) * piece;
  }

  PowerSeries residual = m.restrict_z(acc);
  if (!residual.is_exact()) delivered = std::min(delivered, residual.known_order());
  if (delivered < 1)
    throw std::runtime_error(
        "conjugate reflection identity: no deliverable order left");
  return residual.truncated(delivered);
}

/// Unit factor relating the two defining functions of a hypersurface:
/// r(t,tau) = alpha(t,tau) * rbar(tau,t) with alpha(0,0) = -1.  The quotient
/// is formed by shifting xi off the graph with a slack variable, dividing by
/// the slack, and substituting rbar back in.
inline PowerSeries reflection_factor(const Hypersurface& m, int order) {
  if (order < 1)
    throw std::invalid_argument("reflection factor needs a positive order");
  const int n = m.n();
  std::vector<std::string> ev = ambient_vars(n);
  ev.push_back("u");
  const std::vector<std::string> amb = ambient_vars(n);

  PowerSeries xi_val = PowerSeries::variable(ev, "u") +
                       PowerSeries::variable(ev, "z") -
                       Scalar::i() * m.theta().with_vars(ev);
  PowerSeries shifted = m.r_ambient().with_vars(ev).substitute("xi", xi_val);
  if (!shifted.is_exact() && shifted.known_order() < 2)
    throw std::runtime_error("reflection factor: insufficient known order");

  PowerSeries slack_free = shifted.coefficient_slice({"u"}, Multiindex{0});
  if (!slack_free.is_zero())
    throw std::invalid_argument(
        "reflection factor: the defining function is not real");

  const std::size_t upos = ev.size() - 1;
  PowerSeries quotient(ev, shifted.is_exact() ? kExactOrder
                                              : shifted.known_order() - 1);
  for (const auto& [e, c] : shifted.terms()) {
    assert(e[upos] >= 1);
    Multiindex d = e;
    d[upos] -= 1;
    quotient.set_coefficient(std::move(d), c);
  }

  PowerSeries alpha =
      quotient.substitute("u", m.rbar_ambient().with_vars(ev))
          .restricted_to_vars(amb);
  if (!alpha.is_exact()) alpha = alpha.truncated(order);
  assert((alpha.constant_term() + Scalar(1)).is_zero());
  return alpha;
}

/// The two derivative families of the defining functions along a map, with
/// the product-rule cross check against the unit factor: Lbar^beta of
/// r'(h, hbar) expands through the factor into the family of rbar'(hbar, h),
/// so one family vanishes on the graph exactly when the other does.
struct FactorFamilyReport {
  std::vector<Multiindex> betas;
  std::vector<PowerSeries> direct_family;     // restrict_z of Lbar^beta r'(h, hbar)
  std::vector<PowerSeries> conjugate_family;  // restrict_z of Lbar^beta rbar'(hbar, h)
  bool direct_vanishes = false;
  bool conjugate_vanishes = false;
};

inline FactorFamilyReport factor_families(const FormalMap& h,
                                          const Hypersurface& m,
                                          const Hypersurface& mp, int beta_bound,
                                          int order) {
  if (h.n() != m.n() || h.n() != mp.n())
    throw std::invalid_argument("factor families need matching dimensions");
  if (beta_bound < 0 || order < 2)
    throw std::invalid_argument("factor families need beta_bound >= 0, order >= 2");
  const int n = h.n();
  const std::vector<std::string> amb = ambient_vars(n);

  std::vector<PowerSeries> comp_args;  // (w', z', zeta', xi') <- (g, f, gbar, fbar)
  for (const PowerSeries& c : h.components()) comp_args.push_back(c.with_vars(amb));
  for (const PowerSeries& c : h.conjugate_components())
    comp_args.push_back(c.with_vars(amb));

  PowerSeries rp = mp.r_ambient().compose(comp_args);
  PowerSeries rbp = mp.rbar_ambient().compose(comp_args);
  PowerSeries al = reflection_factor(mp, order).compose(comp_args);

  const std::vector<CRDerivation> fields = antiholomorphic_fields(m);
  std::map<Multiindex, PowerSeries> it_rp, it_rbp, it_al;
  const Multiindex zero(n - 1, 0);
  it_rp.emplace(zero, rp);
  it_rbp.emplace(zero, rbp);
  it_al.emplace(zero, al);
  auto iterate_to = [&](std::map<Multiindex, PowerSeries>& memo,
                        const Multiindex& beta) -> const PowerSeries& {
    auto it = memo.find(beta);
    if (it != memo.end()) return it->second;
    std::size_t k = 0;
    while (beta[k] == 0) ++k;
    Multiindex prev = beta;
    prev[k] -= 1;
    PowerSeries value = fields[k].apply(memo.at(prev));
    return memo.emplace(beta, std::move(value)).first->second;
  };

  FactorFamilyReport rep;
  rep.direct_vanishes = true;
  rep.conjugate_vanishes = true;
  for (const Multiindex& beta : multiindices_in_range(n - 1, 0, beta_bound)) {
    const PowerSeries& dbeta = iterate_to(it_rp, beta);
    const PowerSeries& cbeta = iterate_to(it_rbp, beta);

    // Product rule through the unit factor: the direct derivative is the
    // binomial combination of factor and conjugate derivatives.
    PowerSeries expansion(amb);
    for (const Multiindex& gamma : detail::componentwise_below(beta))
      expansion += Scalar(multi_binomial(beta, gamma)) *
                   iterate_to(it_al, sub(beta, gamma)) * iterate_to(it_rbp, gamma);
    assert((dbeta - expansion).is_zero());

    PowerSeries drestr = m.restrict_z(dbeta);
    PowerSeries crestr = m.restrict_z(cbeta);
    rep.direct_vanishes = rep.direct_vanishes && drestr.is_zero();
    rep.conjugate_vanishes = rep.conjugate_vanishes && crestr.is_zero();
    rep.betas.push_back(beta);
    rep.direct_family.push_back(std::move(drestr));
    rep.conjugate_family.push_back(std::move(crestr));
  }
  assert(rep.direct_vanishes == rep.conjugate_vanishes);
  return rep;
}

/// Jet of the beta-th target slice along the map, restricted to the first
/// chain: the series d_z^alpha phi'_beta(w, 0) over (w), where phi'_0 is f
/// and phi'_beta is Theta'_beta(g, f).  The value is computed both by direct
/// differentiation and by the trigonal recurrences through the omega series,
/// and the two answers are required to agree.
inline PowerSeries first_chain_jets(const FormalMap& h, const Hypersurface& m,
                                    const Hypersurface& mp, int alpha,
                                    const Multiindex& beta, int order) {
  if (h.n() != m.n() || h.n() != mp.n())
    throw std::invalid_argument("first chain jets need matching dimensions");
  const int n = h.n();
  if (static_cast<int>(beta.size()) != n - 1)
    throw std::invalid_argument("first chain jets: multiindex arity mismatch");
  if (alpha < 0 || order < 2)
    throw std::invalid_argument("first chain jets need alpha >= 0, order >= 2");
  if (!m.is_normal() || !mp.is_normal())
    throw std::invalid_argument(
        "first chain jets require normal coordinates on both sides");
  if (!tangency_check(h, m, mp, order).is_zero())
    throw std::invalid_argument("first chain jets require a tangent map");

  const std::vector<std::string> sv = source_vars(n);
  const std::vector<std::string> wv(sv.begin(), sv.end() - 1);

  // Direct route: differentiate the composite and restrict to the chain.
  PowerSeries phi = degree(beta) == 0
                        ? h.f()
                        : mp.theta_slice(beta).compose(h.components());
  for (int k = 0; k < alpha; ++k) {
    if (!phi.is_exact() && phi.known_order() < 2)
      throw std::runtime_error("first chain jets: working order exhausted");
    phi = phi.derive("z");
  }
  PowerSeries direct = phi.coefficient_slice({"z"}, Multiindex{0});

  // Recurrence route: scalars from the conjugate map on the chain, series
  // from the omega family, combined by the trigonal recursion.
  OmegaCalculator calc(h, m, order);
  const std::vector<PowerSeries> tau = h.conjugate_components();
  const std::vector<std::string> cvars = conjugate_vars(n);
  const std::vector<std::string> zeta_block(cvars.begin(), cvars.end() - 1);
  std::vector<PowerSeries> gbar0;  // gbar(0, xi) over (xi)
  for (int j = 0; j + 1 < n; ++j)
    gbar0.push_back(tau[j].coefficient_slice(zeta_block, Multiindex(n - 1, 0)));
  PowerSeries fbar0 = tau[n - 1].coefficient_slice(zeta_block, Multiindex(n - 1, 0));

  auto jet_scalar = [](PowerSeries s, int k) -> Scalar {
    for (int j = 0; j < k; ++j) s = s.derive(s.vars().front());
    return s.constant_term();
  };
  auto a_scalar = [&](int a) -> Scalar { return jet_scalar(fbar0, a); };
  auto e_scalar = [&](int kappa, const Multiindex& gamma) -> Scalar {
    return jet_scalar(detail::component_power(gbar0, gamma), kappa);
  };

  const std::vector<std::string> gv = graph_vars(n);
  const std::vector<std::string> zeta_gv(gv.begin() + (n - 1), gv.end() - 1);
  auto w_series = [&](int a, const Multiindex& b) -> PowerSeries {
    PowerSeries s = calc.omega(b).coefficient_slice(zeta_gv, Multiindex(n - 1, 0));
    for (int j = 0; j < a; ++j) {
      if (!s.is_exact() && s.known_order() < 2)
        throw std::runtime_error("first chain jets: working order exhausted");
      s = s.derive("xi");
    }
    return s.coefficient_slice({"xi"}, Multiindex{0}).with_vars(wv);
  };

  std::map<std::pair<int, Multiindex>, PowerSeries> memo;
  std::function<PowerSeries(int, const Multiindex&)> jet =
      [&](int a, const Multiindex& b) -> PowerSeries {
    const auto key = std::make_pair(a, b);
    auto it = memo.find(key);
    if (it != memo.end()) return it->second;
    PowerSeries value(wv);
    if (degree(b) == 0) {
      value = PowerSeries::constant(wv, a_scalar(a));
      for (const Multiindex& gamma : multiindices_in_range(n - 1, 1, a))
        for (int kappa = degree(gamma); kappa <= a; ++kappa) {
          const Scalar e = e_scalar(kappa, gamma);
          if (e.is_zero()) continue;
          value += Scalar::i() * Scalar(binomial(a, kappa)) * e *
                   jet(a - kappa, gamma);
        }
    } else {
      value = w_series(a, b);
      for (const Multiindex& gamma : multiindices_in_range(n - 1, 1, a)) {
        const Scalar c(shift_binomial(b, gamma));
        for (int kappa = degree(gamma); kappa <= a; ++kappa) {
          const Scalar e = e_scalar(kappa, gamma);
          if (e.is_zero()) continue;
          value -= c * Scalar(binomial(a, kappa)) * e * jet(a - kappa, add(b, gamma));
        }
      }
    }
    memo.emplace(key, value);
    return value;
  };

  PowerSeries recur = jet(alpha, beta);
  assert((direct.with_vars(wv) - recur).is_zero());
  return direct.with_vars(wv);
}

/// Witness data and verdicts for the second-chain system: the three series
/// families, their chain restrictions, the determinant-vanishing predicates
/// and their equivalence, the selected multiindex witness with the chain
/// determinant, and the rank/congruence reduction record.
struct SecondChainReport {
  int n = 0;
  int kappa0 = 0;
  int order = 0;
  std::vector<Multiindex> betas;
  std::vector<PowerSeries> r_family;      // over (w, z, zeta, wp, zp)
  std::vector<PowerSeries> s_family;      // over (w, z, zeta, wp, zp)
  std::vector<PowerSeries> t_family;      // over (w, z, zeta, wp, zp)
  std::vector<PowerSeries> chain_family;  // s_beta over (w, zeta, wp, zp)
  bool r_vanishing = false;
  bool s_vanishing = false;
  bool t_vanishing = false;
  std::optional<MultiindexWitness> witness;
  std::optional<PowerSeries> chain_determinant;    // over (w, zeta)
  std::optional<PowerSeries> reduced_determinant;  // over (w, zeta)
  int witness_kappa = 0;
  int reduction_rank_full = 0;
  int reduction_rank_tail = 0;
  bool congruence_holds = false;
  bool reduced_nonzero = false;

  bool equivalence_holds() const {
    return r_vanishing == s_vanishing && s_vanishing == t_vanishing;
  }

  std::vector<std::string> machine_lines() const {
    std::vector<std::string> lines;
    std::ostringstream head;
    head << "chains n=" << n << " kappa0=" << kappa0 << " order=" << order;
    lines.push_back(head.str());
    const auto flag = [](bool b) { return b ? "true" : "false"; };
    lines.push_back(std::string("family=R vanishing=") + flag(r_vanishing));
    lines.push_back(std::string("family=S vanishing=") + flag(s_vanishing));
    lines.push_back(std::string("family=T vanishing=") + flag(t_vanishing));
    lines.push_back(std::string("equivalence=") +
                    (equivalence_holds() ? "holds" : "broken"));
    if (witness) {
      std::ostringstream w;
      w << "witness betas=" << detail::format_beta_list(witness->beta_list)
        << " chain_det_order=" << chain_determinant->vanishing_order()
        << " kappa=" << witness_kappa;
      lines.push_back(w.str());
    } else {
      lines.push_back("witness=none");
    }
    std::ostringstream red;
    red << "reduction rank_full=" << reduction_rank_full
        << " rank_tail=" << reduction_rank_tail
        << " congruence=" << flag(congruence_holds)
        << " mod_nonzero=" << flag(reduced_nonzero);
    lines.push_back(red.str());
    return lines;
  }
};

namespace detail {

/// Shared state for assembling the second-chain families and verdicts.
class SecondChainBuilder {
 public:
  SecondChainBuilder(const FormalMap& h, const Hypersurface& m,
                     const Hypersurface& mp, int kappa0, int order)
      : h_(h),
        m_(m),
        mp_(mp),
        kappa0_(kappa0),
        order_(order),
        n_(h.n()),
        amb_(ambient_vars(n_)),
        scv_(extended_vars(n_)),
        cv_(chain_vars(n_)),
        fields_(antiholomorphic_fields(m)),
        calc_(h, m, order),
        exact_m_(m.thetabar().is_exact()),
        exact_p_(mp.thetabar().is_exact()) {
    for (const PowerSeries& c : h.components()) t_args_.push_back(c.with_vars(amb_));
    for (const PowerSeries& c : h.conjugate_components())
      tau_args_.push_back(c.with_vars(amb_));
    slice_bound_ = exact_p_ ? exact_slice_bound(mp)
                            : std::min(order - 1, mp.thetabar().known_order() - 1);

    const std::vector<std::string> cvars = conjugate_vars(n_);
    for (int j = 0; j + 1 < n_; ++j)
      gbar0_.push_back(h.conjugate_components()[j]
                           .coefficient_slice({"xi"}, Multiindex{0})
                           .with_vars(wz_vars()));
    fbar0_ = h.conjugate_components()[n_ - 1]
                 .coefficient_slice({"xi"}, Multiindex{0})
                 .with_vars(wz_vars());

    PowerSeries tb0 = m.thetabar().coefficient_slice({"xi"}, Multiindex{0});
    chain_z_ = Scalar::i() * tb0.with_vars(wz_vars());

    std::vector<PowerSeries> gamma2 = chain_map(m, 2);
    for (const PowerSeries& c : h.components())
      h_gamma2_.push_back(c.compose(gamma2));
  }

  std::vector<std::string> wz_vars() const {
    std::vector<std::string> v(cv_.begin(), cv_.begin() + 2 * (n_ - 1));
    return v;
  }

  std::vector<std::string> composed_vars() const {
    std::vector<std::string> v = source_vars(n_);
    for (int k = 1; k < n_; ++k) v.push_back("zeta" + std::to_string(k));
    return v;
  }

  PowerSeries cap(const PowerSeries& x) const {
    return x.is_exact() ? x : x.truncated(order_);
  }

  PowerSeries lift_rx(const PowerSeries& x) const {
    PowerSeries y = exact_m_ ? x : x.truncated(order_);
    return m_.restrict_xi(y).with_vars(scv_);
  }

  /// Chain restriction of an ambient series: onto the graph, then xi = 0.
  PowerSeries chain_ambient(const PowerSeries& x) const {
    PowerSeries y = exact_m_ ? x : x.truncated(order_);
    return m_.restrict_z(y)
        .coefficient_slice({"xi"}, Multiindex{0})
        .with_vars(cv_);
  }

  /// Chain restriction of an extended series: z evaluated along the chain.
  PowerSeries chain_extended(const PowerSeries& x) const {
    return x.substitute("z", chain_z_.with_vars(cv_));
  }

  const PowerSeries& theta_slice_ext(const Multiindex& idx) {
    auto it = thp_.find(idx);
    if (it != thp_.end()) return it->second;
    PowerSeries value(scv_);
    if (exact_p_ || mp_.thetabar().known_order() - degree(idx) >= 1) {
      if (!exact_p_ || degree(idx) <= exact_slice_bound(mp_))
        value = cap(mp_.theta_slice(idx))
                    .renamed_vars(target_vars(n_))
                    .with_vars(scv_);
    } else {
      throw std::runtime_error("second chain: target slices exhausted");
    }
    return thp_.emplace(idx, std::move(value)).first->second;
  }

  const PowerSeries& gbar_power(const Multiindex& gamma) {
    auto it = gbar_pow_.find(gamma);
    if (it != gbar_pow_.end()) return it->second;
    std::vector<PowerSeries> gbar(tau_args_.begin(), tau_args_.end() - 1);
    return gbar_pow_.emplace(gamma, component_power(gbar, gamma)).first->second;
  }

  const PowerSeries& chi_base(const Multiindex& gamma) {
    auto it = chi_.find(gamma);
    if (it != chi_.end()) return it->second;
    std::vector<PowerSeries> args(tau_args_.begin(), tau_args_.end());
    PowerSeries value = cap(mp_.thetabar_slice(gamma)).compose(args);
    return chi_.emplace(gamma, std::move(value)).first->second;
  }

  PowerSeries wp_power(const Multiindex& gamma, const std::vector<std::string>& vars) const {
    PowerSeries acc = PowerSeries::constant(vars, Scalar(1));
    for (int j = 0; j + 1 < n_; ++j)
      for (int k = 0; k < gamma[j]; ++k)
        acc = acc * PowerSeries::variable(vars, "wp" + std::to_string(j + 1));
    return acc;
  }

  PowerSeries iterate(const Multiindex& beta, const PowerSeries& base) const {
    return iterate_fields(fields_, beta, exact_m_ ? base : base.truncated(order_));
  }

  PowerSeries build_r(const Multiindex& beta) {
    const Multiindex zero(n_ - 1, 0);
    PowerSeries acc(scv_);
    if (degree(beta) == 0) {
      acc = lift_rx(tau_args_[n_ - 1]) - PowerSeries::variable(scv_, "zp");
      for (const Multiindex& gamma : multiindices_in_range(n_ - 1, 1, slice_bound_))
        acc += Scalar::i() * lift_rx(gbar_power(gamma)) * theta_slice_ext(gamma);
    } else {
      acc = lift_rx(iterate(beta, tau_args_[n_ - 1]));
      for (const Multiindex& gamma : multiindices_in_range(n_ - 1, 1, slice_bound_)) {
        const PowerSeries& slice = theta_slice_ext(gamma);
        if (slice.is_zero()) continue;
        acc += Scalar::i() * lift_rx(iterate(beta, gbar_power(gamma))) * slice;
      }
    }
    return honest(acc, beta);
  }

  PowerSeries build_s(const Multiindex& beta) {
    PowerSeries acc(scv_);
    if (degree(beta) == 0) {
      acc = PowerSeries::variable(scv_, "zp") - lift_rx(tau_args_[n_ - 1]);
      for (const Multiindex& gamma : multiindices_in_range(n_ - 1, 1, slice_bound_))
        acc -= Scalar::i() * wp_power(gamma, scv_) * lift_rx(chi_base(gamma));
    } else {
      acc = lift_rx(iterate(beta, tau_args_[n_ - 1]));
      for (const Multiindex& gamma : multiindices_in_range(n_ - 1, 1, slice_bound_)) {
        PowerSeries piece = lift_rx(lbar_chi(beta, gamma));
        if (piece.is_zero()) continue;
        acc += Scalar::i() * wp_power(gamma, scv_) * piece;
      }
    }
    return honest(acc, beta);
  }

  PowerSeries build_t(const Multiindex& beta) {
    if (degree(beta) == 0) return -build_r(beta);
    PowerSeries acc = -lift_rx(calc_.phi(beta)) + theta_slice_ext(beta);
    const int tail_bound =
        exact_p_ ? std::max(0, exact_slice_bound(mp_) - degree(beta))
                 : std::min(order_ - 1,
                            mp_.thetabar().known_order() - 1 - degree(beta));
    for (const Multiindex& gamma : multiindices_in_range(n_ - 1, 1, tail_bound)) {
      const PowerSeries& slice = theta_slice_ext(add(beta, gamma));
      if (slice.is_zero()) continue;
      acc += Scalar(shift_binomial(beta, gamma)) * lift_rx(gbar_power(gamma)) * slice;
    }
    return honest(acc, beta);
  }

  /// s_beta on the chain, over (w, zeta, wp, zp).
  PowerSeries build_chain_s(const Multiindex& beta) {
    PowerSeries acc(cv_);
    if (degree(beta) == 0) {
      acc = PowerSeries::variable(cv_, "zp") -
            fbar0_.with_vars(cv_);
      for (const Multiindex& gamma : multiindices_in_range(n_ - 1, 1, slice_bound_)) {
        PowerSeries pow = component_power(gbar0_, gamma).with_vars(cv_);
        if (pow.is_zero()) continue;
        acc -= Scalar::i() * pow *
               cap(mp_.theta_slice(gamma)).renamed_vars(target_vars(n_)).with_vars(cv_);
      }
    } else {
      acc = chain_ambient(iterate(beta, tau_args_[n_ - 1]));
      for (const Multiindex& gamma : multiindices_in_range(n_ - 1, 1, slice_bound_)) {
        PowerSeries chi = chain_ambient(lbar_chi(beta, gamma));
        if (chi.is_zero()) continue;
        acc += Scalar::i() * wp_power(gamma, cv_) * chi;
      }
    }
    return acc;
  }

  /// Gradient of an extended series in the target coordinates, evaluated
  /// along the map: n series over (w, z, zeta).
  std::vector<PowerSeries> gradient_at_map(const PowerSeries& f) const {
    const std::vector<std::string> ov = composed_vars();
    std::vector<PowerSeries> args;
    for (const std::string& v : scv_) {
      if (v == "zp")
        args.push_back(h_.f().with_vars(ov));
      else if (v.rfind("wp", 0) == 0)
        args.push_back(h_.g(std::stoi(v.substr(2)) - 1).with_vars(ov));
      else
        args.push_back(PowerSeries::variable(ov, v));
    }
    std::vector<PowerSeries> out;
    for (const std::string& t : target_vars(n_))
      out.push_back(f.derive(t).compose(args));
    return out;
  }

  /// Composite of an extended series along the map, over (w, z, zeta).
  PowerSeries value_at_map(const PowerSeries& f) const {
    const std::vector<std::string> ov = composed_vars();
    std::vector<PowerSeries> args;
    for (const std::string& v : scv_) {
      if (v == "zp")
        args.push_back(h_.f().with_vars(ov));
      else if (v.rfind("wp", 0) == 0)
        args.push_back(h_.g(std::stoi(v.substr(2)) - 1).with_vars(ov));
      else
        args.push_back(PowerSeries::variable(ov, v));
    }
    return f.compose(args);
  }

  /// Row of target-slice gradients along the second chain, over (w, zeta):
  /// the zero index contributes the constant last-coordinate row.
  const std::vector<PowerSeries>& chain_gradient_row(const Multiindex& beta) {
    auto it = rows_.find(beta);
    if (it != rows_.end()) return it->second;
    const std::vector<std::string> wz = wz_vars();
    std::vector<PowerSeries> row;
    if (degree(beta) == 0) {
      for (int j = 0; j + 1 < n_; ++j)
        row.push_back(PowerSeries::constant(wz, Scalar(0)));
      row.push_back(PowerSeries::constant(wz, Scalar(1)));
    } else {
      bool available = exact_p_ || mp_.thetabar().known_order() - degree(beta) >= 2;
      if (!available)
        throw std::runtime_error("second chain: target slices exhausted");
      PowerSeries slice = exact_p_ && degree(beta) > exact_slice_bound(mp_)
                              ? PowerSeries(source_vars(n_))
                              : cap(mp_.theta_slice(beta));
      for (const std::string& v : source_vars(n_))
        row.push_back(slice.derive(v).compose(h_gamma2_));
    }
    return rows_.emplace(beta, std::move(row)).first->second;
  }

  const std::vector<PowerSeries>& gbar0_pow(const Multiindex& gamma) {
    // Powers of gbar(zeta, 0) over (w, zeta), one entry vector per call site.
    auto it = gbar0_pow_.find(gamma);
    if (it != gbar0_pow_.end()) return it->second;
    std::vector<PowerSeries> one{component_power(gbar0_, gamma)};
    return gbar0_pow_.emplace(gamma, std::move(one)).first->second;
  }

  const FormalMap& h_;
  const Hypersurface& m_;
  const Hypersurface& mp_;
  int kappa0_;
  int order_;
  int n_;
  std::vector<std::string> amb_;
  std::vector<std::string> scv_;
  std::vector<std::string> cv_;
  std::vector<CRDerivation> fields_;
  OmegaCalculator calc_;
  bool exact_m_;
  bool exact_p_;
  int slice_bound_ = 0;
  std::vector<PowerSeries> t_args_, tau_args_;
  std::vector<PowerSeries> gbar0_;  // gbar(zeta, 0) over (w, zeta)
  PowerSeries fbar0_;
  PowerSeries chain_z_;
  std::vector<PowerSeries> h_gamma2_;  // h along the second chain, over (w, zeta)

 private:
  PowerSeries lbar_chi(const Multiindex& beta, const Multiindex& gamma) {
    const auto key = std::make_pair(beta, gamma);
    auto it = lbar_chi_.find(key);
    if (it != lbar_chi_.end()) return it->second;
    PowerSeries value = iterate(beta, chi_base(gamma));
    return lbar_chi_.emplace(key, std::move(value)).first->second;
  }

  PowerSeries honest(PowerSeries acc, const Multiindex& beta) const {
    if (!exact_p_)
      acc = acc.truncated(std::max(1, slice_bound_ - degree(beta) + 2));
    return acc;
  }

  std::map<Multiindex, PowerSeries> thp_, gbar_pow_, chi_;
  std::map<std::pair<Multiindex, Multiindex>, PowerSeries> lbar_chi_;
  std::map<Multiindex, std::vector<PowerSeries>> rows_, gbar0_pow_;
};

}  // namespace detail

/// Builds the three series families attached to the second chain, checks the
/// equivalence of their determinant-vanishing predicates, restricts to the
/// chain, selects a multiindex witness, and evaluates the chain determinant
/// together with the rank/congruence reduction record.
inline SecondChainReport second_chain_system(const FormalMap& h,
                                             const Hypersurface& m,
                                             const Hypersurface& mp, int kappa0,
                                             int order) {
  if (h.n() != m.n() || h.n() != mp.n())
    throw std::invalid_argument("second chain system needs matching dimensions");
  if (kappa0 < 0 || order < 2)
    throw std::invalid_argument("second chain system needs kappa0 >= 0, order >= 2");
  if (!m.is_normal() || !mp.is_normal())
    throw std::invalid_argument(
        "second chain system requires normal coordinates on both sides");
  // Each field application consumes one known order on inexact data, and the
  // gradient rows consume one more past the deepest family index.
  if ((!m.thetabar().is_exact() || !mp.thetabar().is_exact()) &&
      order < 2 * kappa0 + 2)
    throw std::invalid_argument(
        "second chain system: order too small for kappa0 on inexact data");
  if (!tangency_check(h, m, mp, order).is_zero())
    throw std::invalid_argument("second chain system requires a tangent map");

  const int n = h.n();
  detail::SecondChainBuilder b(h, m, mp, kappa0, order);

  SecondChainReport rep;
  rep.n = n;
  rep.kappa0 = kappa0;
  rep.order = order;
  rep.betas = multiindices_in_range(n - 1, 0, 2 * kappa0);

  // Families and their vanishing along the map.
  std::vector<std::vector<PowerSeries>> grad_r, grad_s, grad_t;
  for (const Multiindex& beta : rep.betas) {
    PowerSeries rb = b.build_r(beta);
    PowerSeries sb = b.build_s(beta);
    PowerSeries tb = b.build_t(beta);
    assert(b.value_at_map(rb).is_zero());
    assert(b.value_at_map(sb).is_zero());
    assert(b.value_at_map(tb).is_zero());
    grad_r.push_back(b.gradient_at_map(rb));
    grad_s.push_back(b.gradient_at_map(sb));
    grad_t.push_back(b.gradient_at_map(tb));
    rep.r_family.push_back(std::move(rb));
    rep.s_family.push_back(std::move(sb));
    rep.t_family.push_back(std::move(tb));
  }

  auto all_minors_vanish = [&](const std::vector<std::vector<PowerSeries>>& rows) {
    std::vector<std::vector<int>> subsets;
    detail::index_subsets(static_cast<int>(rows.size()), n, subsets);
    for (const auto& pick : subsets) {
      std::vector<std::vector<PowerSeries>> mat;
      for (int i : pick) mat.push_back(rows[i]);
      if (!series_det(mat).is_zero()) return false;
    }
    return true;
  };
  rep.r_vanishing = all_minors_vanish(grad_r);
  rep.s_vanishing = all_minors_vanish(grad_s);
  rep.t_vanishing = all_minors_vanish(grad_t);
  assert(rep.equivalence_holds());

  // Chain restrictions, cross-checked against the extended families.
  for (std::size_t i = 0; i < rep.betas.size(); ++i) {
    PowerSeries sc = b.build_chain_s(rep.betas[i]);
    if (degree(rep.betas[i]) == 0)
      assert((b.chain_extended(rep.t_family[i]) - sc).is_zero());
    else
      assert((b.chain_extended(rep.s_family[i]) - sc).is_zero());
    rep.chain_family.push_back(std::move(sc));
  }

  // Multiindex witness on the chain, with escalating selection bound.
  const RowProvider provider = [&](const Multiindex& beta) {
    return b.chain_gradient_row(beta);
  };
  const int cap = std::max(std::max(1, 2 * kappa0), order - 1);
  for (int bound = std::max(1, 2 * kappa0); bound <= cap && !rep.witness; ++bound)
    rep.witness = try_select_multiindices(provider, n - 1, n, n, bound, true);

  if (rep.witness) {
    rep.reduced_determinant = rep.witness->minor_det;
    rep.witness_kappa = kappa_order(*rep.reduced_determinant);
    if (rep.witness_kappa > kappa0)
      throw std::runtime_error(
          "kappa0 inconclusive: the reduced determinant vanishes to higher "
          "order in zeta");
    rep.reduced_nonzero = true;

    // Chain determinant for the selected multiindices.
    const std::vector<std::string> wz = b.wz_vars();
    std::vector<PowerSeries> chain_args;
    for (const std::string& v : wz) chain_args.push_back(PowerSeries::variable(wz, v));
    for (const PowerSeries& c : b.h_gamma2_) chain_args.push_back(c);
    std::vector<std::vector<PowerSeries>> mat;
    for (const Multiindex& beta : rep.witness->beta_list) {
      PowerSeries sc = b.build_chain_s(beta);
      std::vector<PowerSeries> row;
      for (const std::string& t : target_vars(n))
        row.push_back(sc.derive(t).compose(chain_args));
      mat.push_back(std::move(row));
    }
    rep.chain_determinant = series_det(mat);
  }

  // Reduction record: full columns against high-order tails, and the
  // congruence of the truncated tail matrix with the slice-gradient matrix.
  std::vector<std::vector<PowerSeries>> n_full, n_tail;
  const std::vector<std::string> wz = b.wz_vars();
  for (std::size_t i = 0; i < rep.betas.size(); ++i) {
    std::vector<PowerSeries> reduced;
    for (const PowerSeries& e : grad_t[i])
      reduced.push_back(e.substitute("z", b.chain_z_));
    n_full.push_back(std::move(reduced));
  }
  for (const Multiindex& beta : rep.betas) {
    const int d = degree(beta);
    std::vector<PowerSeries> row = b.chain_gradient_row(beta);
    const int tail_start = 2 * kappa0 + 1 - d;
    const int tail_cap =
        b.exact_p_ ? std::max(0, detail::exact_slice_bound(mp) - d)
                   : std::min(order - 1, mp.thetabar().known_order() - 1 - d);
    for (const Multiindex& gamma :
         multiindices_in_range(n - 1, std::max(1, tail_start), tail_cap)) {
      const std::vector<PowerSeries>& tail_row =
          b.chain_gradient_row(add(beta, gamma));
      PowerSeries factor = b.gbar0_pow(gamma)[0];
      if (factor.is_zero()) continue;
      const Scalar coeff = d == 0 ? -Scalar::i() : Scalar(shift_binomial(beta, gamma));
      for (int j = 0; j < n; ++j) row[j] += coeff * factor * tail_row[j];
    }
    n_tail.push_back(std::move(row));
  }
  rep.reduction_rank_full = matrix_generic_rank(n_full, 0x5eedULL).rank;
  rep.reduction_rank_tail = matrix_generic_rank(n_tail, 0x5eedULL).rank;

  rep.congruence_holds = true;
  for (std::size_t i = 0; i < rep.betas.size(); ++i) {
    if (degree(rep.betas[i]) > kappa0) continue;
    const std::vector<PowerSeries>& one = b.chain_gradient_row(rep.betas[i]);
    for (int j = 0; j < n; ++j) {
      PowerSeries diff = n_tail[i][j] - one[j];
      if (diff.is_zero()) continue;
      if (kappa_order(diff) < kappa0 + 1) rep.congruence_holds = false;
    }
  }
  return rep;
}

/// Pre-selection of the second-chain multiindex witness: the slice-gradient
/// rows along the second chain, searched up to the given bound.  Used to pick
/// the vanishing-order input of the second-chain system.
inline std::optional<MultiindexWitness> second_chain_witness(
    const FormalMap& h, const Hypersurface& m, const Hypersurface& mp,
    int beta_bound, int order) {
  if (h.n() != m.n() || h.n() != mp.n())
    throw std::invalid_argument("second chain witness needs matching dimensions");
  if (!m.is_normal() || !mp.is_normal())
    throw std::invalid_argument(
        "second chain witness requires normal coordinates on both sides");
  const int n = h.n();
  std::vector<PowerSeries> gamma2 = chain_map(m, 2);
  std::vector<PowerSeries> hg2;
  for (const PowerSeries& c : h.components()) hg2.push_back(c.compose(gamma2));
  const std::vector<std::string> wz = gamma2[0].vars();

  const bool exact_p = mp.thetabar().is_exact();
  const RowProvider provider = [&](const Multiindex& beta) {
    std::vector<PowerSeries> row;
    if (degree(beta) == 0) {
      for (int j = 0; j + 1 < n; ++j)
        row.push_back(PowerSeries::constant(wz, Scalar(0)));
      row.push_back(PowerSeries::constant(wz, Scalar(1)));
      return row;
    }
    PowerSeries slice(source_vars(n));
    if (exact_p) {
      if (degree(beta) <= detail::exact_slice_bound(mp)) slice = mp.theta_slice(beta);
    } else {
      if (mp.thetabar().known_order() - degree(beta) < 2)
        throw std::runtime_error("second chain witness: target slices exhausted");
      slice = mp.theta_slice(beta).truncated(order);
    }
    for (const std::string& v : source_vars(n))
      row.push_back(slice.derive(v).compose(hg2));
    return row;
  };
  return try_select_multiindices(provider, n - 1, n, n, beta_bound, true);
}

/// Convergence-criterion witness for a formal solution of a series system:
/// searches for as many equations as unknowns whose Jacobian determinant in
/// the unknowns, evaluated along the solution, is certified nonzero at the
/// working order.
struct ArtinReport {
  bool satisfied = false;
  int order = 0;
  std::vector<int> rows;
  PowerSeries minor;

  std::string verdict() const {
    std::ostringstream os;
    os << (satisfied ? "criterion satisfied at order " : "inconclusive at order ")
       << order;
    return os.str();
  }
};

inline ArtinReport artin_witness(const std::vector<PowerSeries>& system,
                                 const std::vector<PowerSeries>& solution,
                                 int order) {
  if (system.empty() || solution.empty())
    throw std::invalid_argument("artin witness needs a system and a solution");
  if (order < 1)
    throw std::invalid_argument("artin witness needs a positive order");
  const std::vector<std::string>& sys_vars = system[0].vars();
  const std::vector<std::string>& base_vars = solution[0].vars();
  for (const PowerSeries& r : system)
    if (r.vars() != sys_vars)
      throw std::invalid_argument("artin witness: system must share variables");
  for (const PowerSeries& s : solution)
    if (s.vars() != base_vars)
      throw std::invalid_argument("artin witness: solution must share variables");

  std::vector<std::string> unknowns;
  for (const std::string& v : sys_vars)
    if (std::find(base_vars.begin(), base_vars.end(), v) == base_vars.end())
      unknowns.push_back(v);
  if (unknowns.size() != solution.size())
    throw std::invalid_argument(
        "artin witness: unknown count must match the solution arity");

  for (const PowerSeries& r : system)
    if (!r.constant_term().is_zero())
      throw std::invalid_argument("artin witness: system must vanish at the origin");
  for (const PowerSeries& s : solution)
    if (!s.constant_term().is_zero())
      throw std::invalid_argument("artin witness: solution must vanish at the origin");

  // Arguments substituting the solution for the unknowns.
  std::vector<PowerSeries> args;
  for (const std::string& v : sys_vars) {
    auto it = std::find(unknowns.begin(), unknowns.end(), v);
    if (it == unknowns.end())
      args.push_back(PowerSeries::variable(base_vars, v));
    else
      args.push_back(solution[it - unknowns.begin()]);
  }
  for (const PowerSeries& r : system) {
    PowerSeries residual = r.compose(args);
    if (!residual.is_exact()) residual = residual.truncated(order);
    if (!residual.is_zero())
      throw std::invalid_argument(
          "artin witness: the solution does not annihilate the system");
  }

  std::vector<std::vector<PowerSeries>> jac;
  for (const PowerSeries& r : system) {
    std::vector<PowerSeries> row;
    for (const std::string& y : unknowns) {
      PowerSeries d = r.derive(y).compose(args);
      if (!d.is_exact()) d = d.truncated(order);
      row.push_back(std::move(d));
    }
    jac.push_back(std::move(row));
  }

  ArtinReport rep;
  rep.order = order;
  rep.minor = PowerSeries(base_vars);
  const int m = static_cast<int>(unknowns.size());
  std::vector<std::vector<int>> picks;
  detail::index_subsets(static_cast<int>(system.size()), m, picks);
  std::vector<int> all_cols;
  for (int c = 0; c < m; ++c) all_cols.push_back(c);
  for (const auto& pick : picks) {
    PowerSeries det = detail::submatrix_det(jac, pick, all_cols);
    if (!det.is_zero()) {
      rep.satisfied = true;
      rep.rows = pick;
      rep.minor = std::move(det);
      break;
    }
  }
  return rep;
}

}  // namespace crformal
