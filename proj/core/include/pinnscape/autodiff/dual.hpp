#pragma once

// Forward-mode jets in N spatial variables.
//
// Dual<T, N> carries a value and its gradient; Dual2<T, N> additionally
// carries the packed symmetric Hessian. T is either a plain double or a
// reverse-mode tape variable, which is how spatial derivatives are nested
// inside parameter derivatives.

#include <array>
#include <cmath>
#include <cstddef>

#include "pinnscape/autodiff/fwd.hpp"

namespace pinnscape::ad {

/// Index of (i, j) in packed upper-triangular storage of an N x N symmetric
/// matrix.
constexpr std::size_t packed_index(std::size_t n, std::size_t i, std::size_t j) {
  if (i > j) {
    const std::size_t tmp = i;
    i = j;
    j = tmp;
  }
  return i * n - i * (i - 1) / 2 + (j - i);
}

constexpr std::size_t packed_size(std::size_t n) { return n * (n + 1) / 2; }

template <class T, std::size_t N>
struct Dual {
  T v;
  std::array<T, N> d;
};

template <class T, std::size_t N>
struct Dual2 {
  static constexpr std::size_t kSecond = packed_size(N);

  T v;
  std::array<T, N> d;
  std::array<T, kSecond> dd;

  const T& hess(std::size_t i, std::size_t j) const { return dd[packed_index(N, i, j)]; }
};

/// The independent variable x_k of an N-variable jet at coordinate `x`.
template <std::size_t N>
Dual2<double, N> make_variable(double x, std::size_t k) {
  Dual2<double, N> r{x, {}, {}};
  r.d.fill(0.0);
  r.dd.fill(0.0);
  r.d[k] = 1.0;
  return r;
}

template <std::size_t N>
Dual2<double, N> make_constant(double x) {
  Dual2<double, N> r{x, {}, {}};
  r.d.fill(0.0);
  r.dd.fill(0.0);
  return r;
}

// ---------------------------------------------------------------------------
// Dual2 arithmetic

template <class T, std::size_t N>
Dual2<T, N> operator+(const Dual2<T, N>& a, const Dual2<T, N>& b) {
  Dual2<T, N> r = a;
  r.v = a.v + b.v;
  for (std::size_t k = 0; k < N; ++k) r.d[k] = a.d[k] + b.d[k];
  for (std::size_t k = 0; k < r.kSecond; ++k) r.dd[k] = a.dd[k] + b.dd[k];
  return r;
}

template <class T, std::size_t N>
Dual2<T, N> operator-(const Dual2<T, N>& a, const Dual2<T, N>& b) {
  Dual2<T, N> r = a;
  r.v = a.v - b.v;
  for (std::size_t k = 0; k < N; ++k) r.d[k] = a.d[k] - b.d[k];
  for (std::size_t k = 0; k < r.kSecond; ++k) r.dd[k] = a.dd[k] - b.dd[k];
  return r;
}

template <class T, std::size_t N>
Dual2<T, N> operator-(const Dual2<T, N>& a) {
  Dual2<T, N> r = a;
  r.v = -a.v;
  for (std::size_t k = 0; k < N; ++k) r.d[k] = -a.d[k];
  for (std::size_t k = 0; k < r.kSecond; ++k) r.dd[k] = -a.dd[k];
  return r;
}

template <class T, std::size_t N>
Dual2<T, N> operator+(const Dual2<T, N>& a, double b) {
  Dual2<T, N> r = a;
  r.v = a.v + b;
  return r;
}

template <class T, std::size_t N>
Dual2<T, N> operator+(double a, const Dual2<T, N>& b) { return b + a; }

template <class T, std::size_t N>
Dual2<T, N> operator-(const Dual2<T, N>& a, double b) { return a + (-b); }

template <class T, std::size_t N>
Dual2<T, N> operator-(double a, const Dual2<T, N>& b) { return (-b) + a; }

template <class T, std::size_t N>
Dual2<T, N> operator*(const Dual2<T, N>& a, double b) {
  Dual2<T, N> r = a;
  r.v = a.v * b;
  for (std::size_t k = 0; k < N; ++k) r.d[k] = a.d[k] * b;
  for (std::size_t k = 0; k < r.kSecond; ++k) r.dd[k] = a.dd[k] * b;
  return r;
}

template <class T, std::size_t N>
Dual2<T, N> operator*(double a, const Dual2<T, N>& b) { return b * a; }

template <class T, std::size_t N>
Dual2<T, N> operator*(const Dual2<T, N>& a, const Dual2<T, N>& b) {
  Dual2<T, N> r = a;
  r.v = a.v * b.v;
  for (std::size_t k = 0; k < N; ++k) r.d[k] = a.d[k] * b.v + a.v * b.d[k];
  for (std::size_t i = 0; i < N; ++i) {
    for (std::size_t j = i; j < N; ++j) {
      const std::size_t p = packed_index(N, i, j);
      r.dd[p] = a.dd[p] * b.v + a.d[i] * b.d[j] + a.d[j] * b.d[i] + a.v * b.dd[p];
    }
  }
  return r;
}

/// Second-order chain rule for g(x) given g(x.v), g'(x.v), g''(x.v).
template <class T, std::size_t N>
Dual2<T, N> chain(const Dual2<T, N>& x, const T& g0, const T& g1, const T& g2) {
  Dual2<T, N> r = x;
  r.v = g0;
  for (std::size_t k = 0; k < N; ++k) r.d[k] = g1 * x.d[k];
  for (std::size_t i = 0; i < N; ++i) {
    for (std::size_t j = i; j < N; ++j) {
      const std::size_t p = packed_index(N, i, j);
      r.dd[p] = g2 * (x.d[i] * x.d[j]) + g1 * x.dd[p];
    }
  }
  return r;
}

template <class T, std::size_t N>
Dual2<T, N> reciprocal(const Dual2<T, N>& x) {
  const T g0 = 1.0 / x.v;
  const T g1 = -(g0 * g0);
  const T g2 = -2.0 * (g1 * g0);
  return chain(x, g0, g1, g2);
}

template <class T, std::size_t N>
Dual2<T, N> operator/(const Dual2<T, N>& a, const Dual2<T, N>& b) {
  return a * reciprocal(b);
}

template <class T, std::size_t N>
Dual2<T, N> tanh(const Dual2<T, N>& x) {
  using std::tanh;
  const T t = tanh(x.v);
  const T g1 = 1.0 - t * t;
  const T g2 = -2.0 * (t * g1);
  return chain(x, t, g1, g2);
}

template <class T, std::size_t N>
Dual2<T, N> log(const Dual2<T, N>& x) {
  using std::log;
  const T g1 = 1.0 / x.v;
  return chain(x, T(log(x.v)), g1, T(-(g1 * g1)));
}

template <class T, std::size_t N>
Dual2<T, N> sin(const Dual2<T, N>& x) {
  using std::cos;
  using std::sin;
  const T s = sin(x.v);
  return chain(x, s, T(cos(x.v)), T(-s));
}

template <class T, std::size_t N>
Dual2<T, N> cos(const Dual2<T, N>& x) {
  using std::cos;
  using std::sin;
  const T c = cos(x.v);
  return chain(x, c, T(-sin(x.v)), T(-c));
}

// ---------------------------------------------------------------------------
// First-order Dual arithmetic

template <class T, std::size_t N>
Dual<T, N> operator+(const Dual<T, N>& a, const Dual<T, N>& b) {
  Dual<T, N> r = a;
  r.v = a.v + b.v;
  for (std::size_t k = 0; k < N; ++k) r.d[k] = a.d[k] + b.d[k];
  return r;
}

template <class T, std::size_t N>
Dual<T, N> operator-(const Dual<T, N>& a, const Dual<T, N>& b) {
  Dual<T, N> r = a;
  r.v = a.v - b.v;
  for (std::size_t k = 0; k < N; ++k) r.d[k] = a.d[k] - b.d[k];
  return r;
}

template <class T, std::size_t N>
Dual<T, N> operator-(const Dual<T, N>& a) {
  Dual<T, N> r = a;
  r.v = -a.v;
  for (std::size_t k = 0; k < N; ++k) r.d[k] = -a.d[k];
  return r;
}

template <class T, std::size_t N>
Dual<T, N> operator+(const Dual<T, N>& a, double b) {
  Dual<T, N> r = a;
  r.v = a.v + b;
  return r;
}

template <class T, std::size_t N>
Dual<T, N> operator-(const Dual<T, N>& a, double b) { return a + (-b); }

template <class T, std::size_t N>
Dual<T, N> operator*(const Dual<T, N>& a, double b) {
  Dual<T, N> r = a;
  r.v = a.v * b;
  for (std::size_t k = 0; k < N; ++k) r.d[k] = a.d[k] * b;
  return r;
}

template <class T, std::size_t N>
Dual<T, N> operator*(double a, const Dual<T, N>& b) { return b * a; }

template <class T, std::size_t N>
Dual<T, N> operator*(const Dual<T, N>& a, const Dual<T, N>& b) {
  Dual<T, N> r = a;
  r.v = a.v * b.v;
  for (std::size_t k = 0; k < N; ++k) r.d[k] = a.d[k] * b.v + a.v * b.d[k];
  return r;
}

template <class T, std::size_t N>
Dual<T, N> chain(const Dual<T, N>& x, const T& g0, const T& g1) {
  Dual<T, N> r = x;
  r.v = g0;
  for (std::size_t k = 0; k < N; ++k) r.d[k] = g1 * x.d[k];
  return r;
}

template <class T, std::size_t N>
Dual<T, N> reciprocal(const Dual<T, N>& x) {
  const T inv = reciprocal(x.v);
  return chain(x, inv, T(-(inv * inv)));
}

template <class T, std::size_t N>
Dual<T, N> operator/(const Dual<T, N>& a, const Dual<T, N>& b) {
  return a * reciprocal(b);
}

/// max(x, c) on the value; derivatives vanish where the clamp is active.
template <class T, std::size_t N>
Dual<T, N> clamp_min(const Dual<T, N>& x, double c) {
  const T mask = ge_mask(x.v, c);
  Dual<T, N> r = x;
  r.v = clamp_min(x.v, c);
  for (std::size_t k = 0; k < N; ++k) r.d[k] = x.d[k] * mask;
  return r;
}

template <class T, std::size_t N>
Dual<T, N> log(const Dual<T, N>& x) {
  using std::log;
  return chain(x, T(log(x.v)), T(1.0 / x.v));
}

}  // namespace pinnscape::ad
