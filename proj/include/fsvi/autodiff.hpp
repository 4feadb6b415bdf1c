#pragma once

// First-order dual numbers for forward-mode differentiation of the reference
// objective. Instantiating reverse-mode network passes with Dual scalars
// yields forward-over-reverse second-order terms, which is exactly what the
// exact gradient of the linearized KL needs.

#include <cmath>

namespace fsvi {

struct Dual {
  double v = 0.0;
  double t = 0.0;

  Dual() = default;
  Dual(double value) : v(value) {}  // NOLINT: implicit lift of constants
  Dual(double value, double tangent) : v(value), t(tangent) {}
};

inline Dual operator+(Dual a, Dual b) { return {a.v + b.v, a.t + b.t}; }
inline Dual operator-(Dual a, Dual b) { return {a.v - b.v, a.t - b.t}; }
inline Dual operator-(Dual a) { return {-a.v, -a.t}; }
inline Dual operator*(Dual a, Dual b) {
  return {a.v * b.v, a.t * b.v + a.v * b.t};
}
inline Dual operator/(Dual a, Dual b) {
  const double inv = 1.0 / b.v;
  return {a.v * inv, (a.t - a.v * inv * b.t) * inv};
}

inline Dual& operator+=(Dual& a, Dual b) { return a = a + b; }
inline Dual& operator-=(Dual& a, Dual b) { return a = a - b; }
inline Dual& operator*=(Dual& a, Dual b) { return a = a * b; }

// Comparisons look at values only; branch selection must match the
// double-precision path.
inline bool operator>(Dual a, Dual b) { return a.v > b.v; }
inline bool operator<(Dual a, Dual b) { return a.v < b.v; }
inline bool operator>=(Dual a, Dual b) { return a.v >= b.v; }
inline bool operator<=(Dual a, Dual b) { return a.v <= b.v; }

inline Dual sqrt(Dual a) {
  const double r = std::sqrt(a.v);
  return {r, a.t / (2.0 * r)};
}
inline Dual exp(Dual a) {
  const double e = std::exp(a.v);
  return {e, a.t * e};
}
inline Dual log(Dual a) { return {std::log(a.v), a.t / a.v}; }
inline Dual log1p(Dual a) { return {std::log1p(a.v), a.t / (1.0 + a.v)}; }
inline Dual tanh(Dual a) {
  const double th = std::tanh(a.v);
  return {th, a.t * (1.0 - th * th)};
}

inline double value_of(double x) { return x; }
inline double value_of(Dual x) { return x.v; }

}  // namespace fsvi
