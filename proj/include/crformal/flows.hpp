#pragma once

// Holomorphic vector fields tangent to a hypersurface, their formal flows,
// and the self-maps obtained by feeding a divergent reparametrization into a
// flow.  Detection is exact linear algebra on polynomial coefficients at a
// fixed degree bound; absence is always a bound- and order-stamped verdict,
// never a proof.

#include <cassert>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "hypersurface.hpp"
#include "io.hpp"
#include "mapping.hpp"
#include "multiindex.hpp"
#include "series.hpp"

namespace crformal {

/// A holomorphic vector field with polynomial coefficients in the source
/// variables, tangent to a hypersurface: applying it to the defining
/// function and substituting the graph equation leaves nothing, to the
/// working order.  At least one coefficient is nonzero.
struct TangentField {
  std::vector<PowerSeries> coefficients;  // one per source variable
  int degree_bound = 0;

  int dimension() const { return static_cast<int>(coefficients.size()); }

  void save(std::ostream& os) const {
    os << "field n=" << dimension() << " degree_bound=" << degree_bound
       << "\n";
    for (std::size_t k = 0; k < coefficients.size(); ++k)
      write_series_record(os, coefficients[k], "a" + std::to_string(k + 1));
  }

  static TangentField load(std::istream& is) {
    std::string line;
    if (!detail::next_line(is, line))
      throw std::runtime_error("expected a field record");
    auto kv = detail::parse_kv_line(line, "field");
    int n = detail::parse_int(detail::require_key(kv, "n", "field"), "n");
    int bound = detail::parse_int(
        detail::require_key(kv, "degree_bound", "field"), "degree_bound");
    if (n < 2)
      throw std::runtime_error("field dimension must be at least 2");
    std::vector<PowerSeries> comps;
    comps.reserve(n);
    for (int k = 0; k < n; ++k) {
      SeriesRecord rec = read_series_record(is);
      std::string expect = "a" + std::to_string(k + 1);
      if (rec.tag != expect)
        throw std::runtime_error("expected component tagged " + expect +
                                 ", got '" + rec.tag + "'");
      comps.push_back(std::move(rec.series));
    }
    return TangentField{std::move(comps), bound};
  }
};

namespace detail {

/// Applies the field to the defining function and substitutes the graph
/// equation.  The result is zero to the working order exactly when the field
/// is tangent.  Exact input data keeps the full polynomial residual; a
/// truncated graph series caps it at the requested order.
inline PowerSeries field_tangency_residual(
    const Hypersurface& h, const std::vector<PowerSeries>& coefficients,
    int order) {
  const int n = h.n();
  assert(static_cast<int>(coefficients.size()) == n);
  const std::vector<std::string> amb = ambient_vars(n);
  const std::vector<std::string> src = source_vars(n);
  const PowerSeries r = h.r_ambient();
  PowerSeries applied(amb);
  for (int k = 0; k < n; ++k)
    applied += coefficients[k].with_vars(amb) * r.derive(src[k]);
  PowerSeries residual = h.restrict_z(applied);
  if (!residual.is_exact()) residual = residual.truncated(order);
  return residual;
}

}  // namespace detail

/// Searches for a tangent holomorphic field with polynomial coefficients of
/// degree at most `degree_bound`, by solving the exact linear system the
/// tangency residual imposes on the coefficients.  Returns the canonical
/// kernel element (first free unknown set to one) or nothing when the system
/// pins every coefficient to zero; absence is a verdict at this bound and
/// order only.  Any returned field is re-verified by direct substitution.
inline std::optional<TangentField> find_tangent_field(const Hypersurface& h,
                                                      int degree_bound,
                                                      int order) {
  const int n = h.n();
  if (!h.is_normal())
    throw std::invalid_argument(
        "tangent field search requires a normal hypersurface");
  if (degree_bound < 0)
    throw std::invalid_argument("degree bound must be nonnegative");
  if (order < 1)
    throw std::invalid_argument("tangent field search order must be positive");

  const std::vector<std::string> src = source_vars(n);
  const std::vector<std::string> amb = ambient_vars(n);
  const std::vector<Multiindex> monomials =
      multiindices_in_range(n, 0, degree_bound);
  const int per_component = static_cast<int>(monomials.size());
  const int cols = n * per_component;

  const PowerSeries r = h.r_ambient();
  std::vector<PowerSeries> partials;
  partials.reserve(n);
  for (int k = 0; k < n; ++k) partials.push_back(r.derive(src[k]));

  // One residual column per unknown coefficient, component index major.
  std::vector<PowerSeries> columns;
  columns.reserve(cols);
  std::map<Multiindex, int> row_of;
  for (int k = 0; k < n; ++k) {
    for (const Multiindex& e : monomials) {
      PowerSeries mono = PowerSeries::constant(amb, Scalar(1));
      for (int j = 0; j < n; ++j)
        for (int p = 0; p < e[j]; ++p)
          mono = mono * PowerSeries::variable(amb, src[j]);
      PowerSeries res = h.restrict_z(mono * partials[k]);
      if (!res.is_exact()) res = res.truncated(order);
      for (const auto& [exp, c] : res.terms())
        row_of.try_emplace(exp, static_cast<int>(row_of.size()));
      columns.push_back(std::move(res));
    }
  }

  const int rows = static_cast<int>(row_of.size());
  std::vector<std::vector<Scalar>> a(rows,
                                     std::vector<Scalar>(cols, Scalar(0)));
  for (int c = 0; c < cols; ++c)
    for (const auto& [exp, v] : columns[c].terms())
      a[row_of.at(exp)][c] = v;

  // Exact reduced row echelon form over the coefficient field.
  std::vector<int> pivot_row_of(cols, -1);
  int rank = 0;
  for (int c = 0; c < cols && rank < rows; ++c) {
    int p = -1;
    for (int rr = rank; rr < rows; ++rr)
      if (!a[rr][c].is_zero()) {
        p = rr;
        break;
      }
    if (p < 0) continue;
    std::swap(a[rank], a[p]);
    const Scalar inv = Scalar(1) / a[rank][c];
    for (int j = c; j < cols; ++j) a[rank][j] = a[rank][j] * inv;
    for (int rr = 0; rr < rows; ++rr) {
      if (rr == rank || a[rr][c].is_zero()) continue;
      const Scalar f = a[rr][c];
      for (int j = c; j < cols; ++j)
        a[rr][j] = a[rr][j] - f * a[rank][j];
    }
    pivot_row_of[c] = rank;
    ++rank;
  }

  int free_col = -1;
  for (int c = 0; c < cols; ++c)
    if (pivot_row_of[c] < 0) {
      free_col = c;
      break;
    }
  if (free_col < 0) return std::nullopt;

  std::vector<Scalar> x(cols, Scalar(0));
  x[free_col] = Scalar(1);
  for (int c = 0; c < cols; ++c)
    if (pivot_row_of[c] >= 0)
      x[c] = Scalar(0) - a[pivot_row_of[c]][free_col];

  std::vector<PowerSeries> coefficients(n, PowerSeries(src));
  bool nonzero = false;
  for (int k = 0; k < n; ++k)
    for (int j = 0; j < per_component; ++j) {
      const Scalar& c = x[k * per_component + j];
      if (c.is_zero()) continue;
      coefficients[k].set_coefficient(monomials[j], c);
      nonzero = true;
    }
  assert(nonzero);

  assert(detail::field_tangency_residual(h, coefficients, order).is_zero());
  return TangentField{std::move(coefficients), degree_bound};
}

/// Variables of a parametrized flow: the source variables followed by the
/// flow parameter.
inline std::vector<std::string> flow_vars(int n) {
  std::vector<std::string> v = source_vars(n);
  v.push_back("u");
  return v;
}

/// Formal flow of the field: component series phi(t, u) with phi(t, 0) = t
/// and d/du phi = a(phi) to the requested order, accumulated power by power
/// in the parameter.  The result stays exact when iterated application of
/// the field terminates on every component.
inline std::vector<PowerSeries> flow(const TangentField& field, int order) {
  const int n = field.dimension();
  if (n < 2)
    throw std::invalid_argument("flow needs a field in dimension at least 2");
  if (order < 1) throw std::invalid_argument("flow order must be positive");
  const std::vector<std::string> src = source_vars(n);
  for (const PowerSeries& a : field.coefficients)
    if (a.vars() != src)
      throw std::invalid_argument(
          "field coefficients must use the source variables");

  const std::vector<std::string> fv = flow_vars(n);
  const PowerSeries u = PowerSeries::variable(fv, "u");

  std::vector<PowerSeries> result;
  result.reserve(n);
  bool exact = true;
  for (int k = 0; k < n; ++k) {
    PowerSeries iterate = PowerSeries::variable(src, src[k]);
    PowerSeries acc = iterate.with_vars(fv);
    PowerSeries upow = PowerSeries::constant(fv, Scalar(1));
    bool terminated = false;
    for (int m = 1; m < order; ++m) {
      PowerSeries next(src);
      for (int j = 0; j < n; ++j) {
        if (!iterate.is_exact() && iterate.known_order() < 2)
          throw std::runtime_error("flow: working order exhausted");
        next += field.coefficients[j] * iterate.derive(src[j]);
      }
      iterate = std::move(next);
      if (iterate.is_exact() && iterate.is_zero()) {
        terminated = true;
        break;
      }
      upow = upow * u;
      acc += Scalar(Rational(1) / factorial(m)) * (iterate.with_vars(fv) * upow);
    }
    if (!terminated) exact = false;
    result.push_back(std::move(acc));
  }
  if (!exact)
    for (PowerSeries& s : result) s = s.truncated(order);
  return result;
}

/// Certificate accompanying a self-map built from a flow: the tangency
/// residual (zero to the stated order), the Jacobian determinant at the
/// origin, the first component the parameter actually moves, and the
/// reparametrization that was fed into the flow.
struct SelfMapReport {
  FormalMap map;
  PowerSeries residual;
  Scalar jacobian_determinant;
  int order = 0;
  int direction_index = -1;
  std::string parameter_model;

  std::string record() const {
    std::ostringstream os;
    os << "selfmap status=ok order=" << order << " direction=";
    if (direction_index >= 0)
      os << "a" << direction_index + 1;
    else
      os << "none";
    os << " model=" << parameter_model;
    return os.str();
  }
};

/// Substitutes a factorially divergent reparametrization of the flow
/// parameter into the flow of a tangent field, producing a formal self-map
/// of the hypersurface.  The map fixes the origin, is invertible, and passes
/// the tangency check to the requested order; all three facts are certified
/// on the way out.  The divergence of the reparametrization is a modeling
/// convention recorded in the certificate, not a property the arithmetic
/// can see.
inline SelfMapReport nonconvergent_selfmap(const Hypersurface& h,
                                           const TangentField& field,
                                           int order) {
  const int n = h.n();
  if (field.dimension() != n)
    throw std::invalid_argument(
        "field and hypersurface dimensions must agree");
  if (!h.is_normal())
    throw std::invalid_argument(
        "self-map construction requires a normal hypersurface");
  if (order < 2)
    throw std::invalid_argument("self-map order must be at least 2");

  if (!detail::field_tangency_residual(h, field.coefficients, order).is_zero())
    throw std::invalid_argument("the field is not tangent to the hypersurface");

  const std::vector<std::string> src = source_vars(n);
  const std::vector<std::string> fv = flow_vars(n);

  // The reparametrization: factorially growing pure powers of the
  // distinguished variable, cut just below the working order.
  PowerSeries parameter(src);
  for (int k = 1; k < order; ++k) {
    Multiindex e(n, 0);
    e[n - 1] = k;
    parameter.set_coefficient(e, Scalar(factorial(k)));
  }
  const PowerSeries parameter_fv = parameter.with_vars(fv);

  const std::vector<PowerSeries> phi = flow(field, order);

  std::vector<PowerSeries> components;
  components.reserve(n);
  for (const PowerSeries& c : phi) {
    PowerSeries s = c.substitute("u", parameter_fv).restricted_to_vars(src);
    if (!s.is_exact()) s = s.truncated(order);
    components.push_back(std::move(s));
  }

  // Which component the parameter moves, as a recorded observation only.
  int direction = -1;
  for (int k = 0; k < n && direction < 0; ++k) {
    PowerSeries moved =
        phi[k].derive("u").substitute("u", parameter_fv).restricted_to_vars(src);
    if (!moved.is_zero()) direction = k;
  }

  for (const PowerSeries& c : components) assert(c.constant_term().is_zero());
  FormalMap selfmap(std::move(components));
  const InvertibilityReport inv = check_invertible(selfmap);
  assert(inv.invertible());

  PowerSeries residual = tangency_check(selfmap, h, h, order);
  if (!residual.is_zero())
    throw std::runtime_error("self-map tangency residual is nonzero");

  std::ostringstream model;
  model << "u=sum_{k=1}^{" << order - 1 << "} k!*z^k";

  return SelfMapReport{std::move(selfmap),          std::move(residual),
                       inv.jacobian_determinant,    order,
                       direction,                   model.str()};
}

}  // namespace crformal
