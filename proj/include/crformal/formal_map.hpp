#pragma once

#include <istream>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include "io.hpp"
#include "series.hpp"

namespace crformal {

/// Variable names w1..w_{n-1}, z for source coordinates.
inline std::vector<std::string> source_vars(int n) {
  std::vector<std::string> v;
  for (int k = 1; k < n; ++k) v.push_back("w" + std::to_string(k));
  v.push_back("z");
  return v;
}

/// Variable names zeta1..zeta_{n-1}, xi for the conjugate coordinates.
inline std::vector<std::string> conjugate_vars(int n) {
  std::vector<std::string> v;
  for (int k = 1; k < n; ++k) v.push_back("zeta" + std::to_string(k));
  v.push_back("xi");
  return v;
}

/// Formal holomorphic map H = (g_1, ..., g_{n-1}, f) fixing the origin,
/// written in the source coordinates (w, z).
class FormalMap {
 public:
  explicit FormalMap(std::vector<PowerSeries> components)
      : components_(std::move(components)) {
    n_ = static_cast<int>(components_.size());
    if (n_ < 2) throw std::invalid_argument("map needs at least two components");
    const std::vector<std::string> vars = source_vars(n_);
    for (const auto& c : components_) {
      if (c.vars() != vars)
        throw std::invalid_argument("map components must use variables (w, z)");
      if (!c.constant_term().is_zero())
        throw std::invalid_argument("map components must vanish at 0");
    }
  }

  static FormalMap identity(int n) {
    std::vector<PowerSeries> comps;
    const std::vector<std::string> vars = source_vars(n);
    for (const auto& v : vars) comps.push_back(PowerSeries::variable(vars, v));
    return FormalMap(std::move(comps));
  }

  int n() const { return n_; }
  const std::vector<PowerSeries>& components() const { return components_; }

  /// g_j for j in [0, n-2].
  const PowerSeries& g(int j) const { return components_.at(j); }
  const PowerSeries& f() const { return components_.back(); }

  /// The conjugated map \bar H(zeta, xi): coefficients conjugated and the
  /// variables renamed positionally to (zeta, xi).
  std::vector<PowerSeries> conjugate_components() const {
    std::vector<PowerSeries> out;
    out.reserve(components_.size());
    for (const auto& c : components_)
      out.push_back(c.conjugated().renamed_vars(conjugate_vars(n_)));
    return out;
  }

  /// Jacobian matrix at the origin, rows = components, columns = variables.
  std::vector<std::vector<Scalar>> jacobian_at_origin() const {
    const std::vector<std::string> vars = source_vars(n_);
    std::vector<std::vector<Scalar>> J(n_, std::vector<Scalar>(n_, Scalar(0)));
    for (int r = 0; r < n_; ++r)
      for (int c = 0; c < n_; ++c) {
        Multiindex e(n_, 0);
        e[c] = 1;
        if (components_[r].known_order() > 1)
          J[r][c] = components_[r].coefficient(e);
      }
    return J;
  }

  static std::vector<std::vector<Scalar>> invert_matrix(
      std::vector<std::vector<Scalar>> A) {
    int m = static_cast<int>(A.size());
    std::vector<std::vector<Scalar>> inv(m, std::vector<Scalar>(m, Scalar(0)));
    for (int k = 0; k < m; ++k) inv[k][k] = Scalar(1);
    for (int col = 0; col < m; ++col) {
      int pivot = -1;
      for (int r = col; r < m; ++r)
        if (!A[r][col].is_zero()) {
          pivot = r;
          break;
        }
      if (pivot < 0)
        throw std::runtime_error("linear part is not invertible");
      std::swap(A[pivot], A[col]);
      std::swap(inv[pivot], inv[col]);
      Scalar lead = A[col][col];
      for (int c = 0; c < m; ++c) {
        A[col][c] /= lead;
        inv[col][c] /= lead;
      }
      for (int r = 0; r < m; ++r) {
        if (r == col || A[r][col].is_zero()) continue;
        Scalar factor = A[r][col];
        for (int c = 0; c < m; ++c) {
          A[r][c] -= factor * A[col][c];
          inv[r][c] -= factor * inv[col][c];
        }
      }
    }
    return inv;
  }

  Scalar jacobian_determinant_at_origin() const {
    std::vector<std::vector<Scalar>> J = jacobian_at_origin();
    // Gaussian elimination over the exact scalar field.
    int m = n_;
    Scalar det(1);
    for (int col = 0; col < m; ++col) {
      int pivot = -1;
      for (int r = col; r < m; ++r)
        if (!J[r][col].is_zero()) {
          pivot = r;
          break;
        }
      if (pivot < 0) return Scalar(0);
      if (pivot != col) {
        std::swap(J[pivot], J[col]);
        det = -det;
      }
      det *= J[col][col];
      for (int r = col + 1; r < m; ++r) {
        if (J[r][col].is_zero()) continue;
        Scalar factor = J[r][col] / J[col][col];
        for (int c = col; c < m; ++c) J[r][c] -= factor * J[col][c];
      }
    }
    return det;
  }

  /// Formal inverse to the given order; the linear part must be
  /// invertible.  Components are again written in the variables (w, z).
  FormalMap inverse(int order) const {
    const std::vector<std::string> vars = source_vars(n_);
    std::vector<std::vector<Scalar>> L = jacobian_at_origin();
    std::vector<std::vector<Scalar>> Linv = invert_matrix(L);
    // Nonlinear parts N_k = h_k - L_k x.
    std::vector<PowerSeries> nonlinear;
    for (int k = 0; k < n_; ++k) {
      PowerSeries nk = components_[k].truncated(order);
      for (int c = 0; c < n_; ++c)
        nk -= L[k][c] * PowerSeries::variable(vars, vars[c], order);
      nonlinear.push_back(std::move(nk));
    }
    // Fixed point iteration x = Linv (y - N(x)), one degree per step.
    std::vector<PowerSeries> x(n_, PowerSeries(vars, order));
    for (int step = 0; step < order; ++step) {
      std::vector<PowerSeries> nx;
      nx.reserve(n_);
      for (int k = 0; k < n_; ++k) nx.push_back(nonlinear[k].compose(x));
      std::vector<PowerSeries> next;
      next.reserve(n_);
      for (int j = 0; j < n_; ++j) {
        PowerSeries acc(vars, order);
        for (int k = 0; k < n_; ++k) {
          PowerSeries term = PowerSeries::variable(vars, vars[k], order) - nx[k];
          acc += Linv[j][k] * term;
        }
        next.push_back(std::move(acc));
      }
      x = std::move(next);
    }
    return FormalMap(std::move(x));
  }

  void save(std::ostream& os) const {
    os << "map n=" << n_ << "\n";
    for (int k = 0; k < n_; ++k) {
      std::string tag = k + 1 < n_ ? "g" + std::to_string(k + 1) : "f";
      write_series_record(os, components_[k], tag);
    }
  }

  static FormalMap load(std::istream& is) {
    std::string line;
    if (!detail::next_line(is, line))
      throw std::runtime_error("expected a map record");
    auto kv = detail::parse_kv_line(line, "map");
    int n = detail::parse_int(detail::require_key(kv, "n", "map"), "n");
    if (n < 2) throw std::runtime_error("map dimension must be at least 2");
    std::vector<PowerSeries> comps;
    for (int k = 0; k < n; ++k) {
      SeriesRecord rec = read_series_record(is);
      std::string expect = k + 1 < n ? "g" + std::to_string(k + 1) : "f";
      if (rec.tag != expect)
        throw std::runtime_error("expected component tagged " + expect +
                                 ", got '" + rec.tag + "'");
      comps.push_back(std::move(rec.series));
    }
    return FormalMap(std::move(comps));
  }

 private:
  int n_ = 0;
  std::vector<PowerSeries> components_;
};

}  // namespace crformal
