#pragma once

#include <array>
#include <cmath>

namespace pinnscape::ad {

/// Forward-mode tangent scalar carrying `Lanes` independent directional
/// derivatives. Running the reverse-mode tape with this scalar yields
/// Hessian-vector products (forward-over-reverse).
template <int Lanes>
struct Fwd {
  double v = 0.0;
  std::array<double, Lanes> t{};

  Fwd() = default;
  Fwd(double value) : v(value) {}  // NOLINT(google-explicit-constructor)

  Fwd& operator+=(const Fwd& o) {
    v += o.v;
    for (int k = 0; k < Lanes; ++k) t[k] += o.t[k];
    return *this;
  }
  Fwd& operator-=(const Fwd& o) {
    v -= o.v;
    for (int k = 0; k < Lanes; ++k) t[k] -= o.t[k];
    return *this;
  }
  Fwd& operator*=(const Fwd& o) {
    for (int k = 0; k < Lanes; ++k) t[k] = t[k] * o.v + v * o.t[k];
    v *= o.v;
    return *this;
  }
};

template <int L>
Fwd<L> operator-(const Fwd<L>& a) {
  Fwd<L> r;
  r.v = -a.v;
  for (int k = 0; k < L; ++k) r.t[k] = -a.t[k];
  return r;
}

template <int L>
Fwd<L> operator+(Fwd<L> a, const Fwd<L>& b) { return a += b; }
template <int L>
Fwd<L> operator-(Fwd<L> a, const Fwd<L>& b) { return a -= b; }

template <int L>
Fwd<L> operator*(const Fwd<L>& a, const Fwd<L>& b) {
  Fwd<L> r;
  r.v = a.v * b.v;
  for (int k = 0; k < L; ++k) r.t[k] = a.t[k] * b.v + a.v * b.t[k];
  return r;
}

template <int L>
Fwd<L> operator/(const Fwd<L>& a, const Fwd<L>& b) {
  Fwd<L> r;
  r.v = a.v / b.v;
  const double inv = 1.0 / b.v;
  for (int k = 0; k < L; ++k) r.t[k] = (a.t[k] - r.v * b.t[k]) * inv;
  return r;
}

template <int L>
Fwd<L> operator+(Fwd<L> a, double b) { a.v += b; return a; }
template <int L>
Fwd<L> operator+(double a, Fwd<L> b) { b.v += a; return b; }
template <int L>
Fwd<L> operator-(Fwd<L> a, double b) { a.v -= b; return a; }
template <int L>
Fwd<L> operator-(double a, const Fwd<L>& b) { return Fwd<L>(a) - b; }

template <int L>
Fwd<L> operator*(Fwd<L> a, double b) {
  a.v *= b;
  for (auto& x : a.t) x *= b;
  return a;
}
template <int L>
Fwd<L> operator*(double a, Fwd<L> b) { return b * a; }
template <int L>
Fwd<L> operator/(Fwd<L> a, double b) { return a * (1.0 / b); }
template <int L>
Fwd<L> operator/(double a, const Fwd<L>& b) { return Fwd<L>(a) / b; }

template <int L>
Fwd<L> tanh(const Fwd<L>& a) {
  Fwd<L> r;
  r.v = std::tanh(a.v);
  const double d = 1.0 - r.v * r.v;
  for (int k = 0; k < L; ++k) r.t[k] = d * a.t[k];
  return r;
}

template <int L>
Fwd<L> log(const Fwd<L>& a) {
  Fwd<L> r;
  r.v = std::log(a.v);
  const double d = 1.0 / a.v;
  for (int k = 0; k < L; ++k) r.t[k] = d * a.t[k];
  return r;
}

inline double value_of(double x) { return x; }

// Scalar counterparts of the tape and jet operations, so generic code can be
// written once for plain doubles and recorded variables.
inline double clamp_min(double x, double c) { return x >= c ? x : c; }
inline double ge_mask(double x, double c) { return x >= c ? 1.0 : 0.0; }
inline double reciprocal(double x) { return 1.0 / x; }
inline double log(double x) { return std::log(x); }
template <int L>
double value_of(const Fwd<L>& x) { return x.v; }

}  // namespace pinnscape::ad
