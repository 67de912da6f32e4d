#pragma once

#include <gmpxx.h>

#include <cassert>
#include <string>
#include <utility>

namespace crformal {

using Rational = mpq_class;

/// Exact complex scalar with rational real and imaginary parts.
/// Every operation is exact; nothing is ever rounded.
struct GaussianRational {
  Rational re;
  Rational im;

  GaussianRational() : re(0), im(0) {}
  GaussianRational(int value) : re(value), im(0) {}
  GaussianRational(long value) : re(value), im(0) {}
  GaussianRational(Rational real) : re(std::move(real)), im(0) {}
  GaussianRational(Rational real, Rational imag)
      : re(std::move(real)), im(std::move(imag)) {}

  static GaussianRational i() { return {Rational(0), Rational(1)}; }

  bool is_zero() const { return sgn(re) == 0 && sgn(im) == 0; }
  bool is_real() const { return sgn(im) == 0; }

  GaussianRational conj() const { return {re, -im}; }

  /// Squared modulus |a+bi|^2 = a^2 + b^2, an exact rational.
  Rational norm() const { return re * re + im * im; }

  GaussianRational& operator+=(const GaussianRational& o) {
    re += o.re;
    im += o.im;
    return *this;
  }
  GaussianRational& operator-=(const GaussianRational& o) {
    re -= o.re;
    im -= o.im;
    return *this;
  }
  GaussianRational& operator*=(const GaussianRational& o) {
    Rational r = re * o.re - im * o.im;
    Rational i2 = re * o.im + im * o.re;
    re = std::move(r);
    im = std::move(i2);
    return *this;
  }
  GaussianRational& operator/=(const GaussianRational& o) {
    assert(!o.is_zero());
    Rational n = o.norm();
    Rational r = (re * o.re + im * o.im) / n;
    Rational i2 = (im * o.re - re * o.im) / n;
    re = std::move(r);
    im = std::move(i2);
    return *this;
  }

  friend GaussianRational operator+(GaussianRational a, const GaussianRational& b) { return a += b; }
  friend GaussianRational operator-(GaussianRational a, const GaussianRational& b) { return a -= b; }
  friend GaussianRational operator*(GaussianRational a, const GaussianRational& b) { return a *= b; }
  friend GaussianRational operator/(GaussianRational a, const GaussianRational& b) { return a /= b; }
  friend GaussianRational operator-(const GaussianRational& a) { return {-a.re, -a.im}; }

  friend bool operator==(const GaussianRational& a, const GaussianRational& b) {
    return a.re == b.re && a.im == b.im;
  }
  friend bool operator!=(const GaussianRational& a, const GaussianRational& b) {
    return !(a == b);
  }
};

using Scalar = GaussianRational;

}  // namespace crformal
