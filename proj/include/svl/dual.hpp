#pragma once

#include <cmath>
#include <type_traits>

namespace svl {

/** First-order forward-mode dual scalar.
 *
 *  Carries a value and one directional derivative. Nesting Dual<Dual<double>>
 *  yields second directional derivatives, which is how commutators of vector
 *  fields are evaluated exactly (up to rounding) in the verifier.
 */
template <class T>
struct Dual {
  T v{};  // value
  T d{};  // directional derivative

  Dual() = default;
  Dual(T value) : v(value), d(T(0)) {}
  Dual(T value, T deriv) : v(value), d(deriv) {}

  Dual& operator+=(const Dual& o) { v += o.v; d += o.d; return *this; }
  Dual& operator-=(const Dual& o) { v -= o.v; d -= o.d; return *this; }
  Dual& operator*=(const Dual& o) { d = d * o.v + v * o.d; v *= o.v; return *this; }
  Dual& operator/=(const Dual& o) { d = (d * o.v - v * o.d) / (o.v * o.v); v /= o.v; return *this; }
};

template <class T> Dual<T> operator+(Dual<T> a, const Dual<T>& b) { return a += b; }
template <class T> Dual<T> operator-(Dual<T> a, const Dual<T>& b) { return a -= b; }
template <class T> Dual<T> operator*(Dual<T> a, const Dual<T>& b) { return a *= b; }
template <class T> Dual<T> operator/(Dual<T> a, const Dual<T>& b) { return a /= b; }
template <class T> Dual<T> operator-(const Dual<T>& a) { return {-a.v, -a.d}; }
template <class T> Dual<T> operator+(const Dual<T>& a) { return a; }

// mixed scalar forms (the scalar is a constant of the derivative direction)
template <class T> Dual<T> operator+(Dual<T> a, double b) { a.v += T(b); return a; }
template <class T> Dual<T> operator+(double b, Dual<T> a) { a.v += T(b); return a; }
template <class T> Dual<T> operator-(Dual<T> a, double b) { a.v -= T(b); return a; }
template <class T> Dual<T> operator-(double b, const Dual<T>& a) { return {T(b) - a.v, -a.d}; }
template <class T> Dual<T> operator*(Dual<T> a, double b) { a.v *= T(b); a.d *= T(b); return a; }
template <class T> Dual<T> operator*(double b, Dual<T> a) { return a * b; }
template <class T> Dual<T> operator/(Dual<T> a, double b) { a.v /= T(b); a.d /= T(b); return a; }
template <class T> Dual<T> operator/(double b, const Dual<T>& a) { return Dual<T>(T(b)) / a; }

template <class T> bool operator<(const Dual<T>& a, const Dual<T>& b) { return a.v < b.v; }
template <class T> bool operator>(const Dual<T>& a, const Dual<T>& b) { return a.v > b.v; }
template <class T> bool operator<(const Dual<T>& a, double b) { return a.v < T(b); }
template <class T> bool operator>(const Dual<T>& a, double b) { return a.v > T(b); }
template <class T> bool operator<=(const Dual<T>& a, double b) { return !(a > b); }
template <class T> bool operator>=(const Dual<T>& a, double b) { return !(a < b); }

using std::abs; using std::cos; using std::exp; using std::log;
using std::pow; using std::sin; using std::sqrt; using std::tan;

template <class T> Dual<T> sqrt(const Dual<T>& a) {
  using std::sqrt;
  T s = sqrt(a.v);
  return {s, a.d / (2.0 * s)};
}
template <class T> Dual<T> exp(const Dual<T>& a) {
  using std::exp;
  T e = exp(a.v);
  return {e, a.d * e};
}
template <class T> Dual<T> log(const Dual<T>& a) {
  using std::log;
  return {log(a.v), a.d / a.v};
}
template <class T> Dual<T> pow(const Dual<T>& a, double p) {
  using std::pow;
  return {pow(a.v, p), T(p) * pow(a.v, p - 1.0) * a.d};
}
template <class T> Dual<T> sin(const Dual<T>& a) {
  using std::cos; using std::sin;
  return {sin(a.v), cos(a.v) * a.d};
}
template <class T> Dual<T> cos(const Dual<T>& a) {
  using std::cos; using std::sin;
  return {cos(a.v), -sin(a.v) * a.d};
}
template <class T> Dual<T> abs(const Dual<T>& a) {
  return (a.v < T(0)) ? -a : a;
}

/// Innermost value of a possibly nested dual.
inline double value_of(double x) { return x; }
template <class T> double value_of(const Dual<T>& x) { return value_of(x.v); }

/// Outer derivative part, as plain double (innermost value of .d).
template <class T> double deriv_of(const Dual<T>& x) { return value_of(x.d); }

/// Seed helpers: promote a scalar to a dual with a given derivative.
template <class T> Dual<T> seeded(T v, T d) { return {v, d}; }
template <class T> Dual<T> constant(T v) { return {v, T(0)}; }

}  // namespace svl
