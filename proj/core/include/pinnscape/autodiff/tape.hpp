#pragma once

// Array-valued reverse-mode tape.
//
// Every node holds a row-major (rows x cols) array of scalars S. Running the
// tape with S = double gives values and gradients; running it with S = Fwd<K>
// carries K tangent directions through both the recording and the reverse
// sweep, so the leaf adjoints come back as (gradient, K Hessian-vector
// products).

#include <cassert>
#include <cmath>
#include <functional>
#include <initializer_list>
#include <stdexcept>
#include <utility>
#include <type_traits>
#include <vector>

#include <Eigen/Dense>

#include "pinnscape/autodiff/fwd.hpp"

namespace pinnscape::ad {

template <class S>
class Tape;

template <class S>
struct Var {
  Tape<S>* tape = nullptr;
  int id = -1;

  int rows() const { return tape->node(id).rows; }
  int cols() const { return tape->node(id).cols; }
  std::size_t size() const { return tape->node(id).value.size(); }
  const std::vector<S>& value() const { return tape->node(id).value; }
};

template <class S>
class Tape {
 public:
  using Backward = std::function<void(Tape&, int)>;

  struct Node {
    int rows = 0;
    int cols = 0;
    std::vector<S> value;
    std::vector<S> adjoint;
    Backward backward;
    bool active = false;
  };

  Tape() { nodes_.reserve(256); }
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var<S> constant(int rows, int cols, std::vector<S> value) {
    return push(rows, cols, std::move(value), false, {});
  }

  /// A differentiable input. Its adjoint after backward() is d(out)/d(leaf).
  Var<S> leaf(int rows, int cols, std::vector<S> value) {
    return push(rows, cols, std::move(value), true, {});
  }

  /// Records an operation; `backward` is kept only if a parent is active.
  Var<S> record(int rows, int cols, std::vector<S> value, std::initializer_list<int> parents,
                Backward backward) {
    bool any = false;
    for (int p : parents) any = any || nodes_[static_cast<std::size_t>(p)].active;
    return push(rows, cols, std::move(value), any, any ? std::move(backward) : Backward{});
  }

  void backward(Var<S> out) {
    Node& root = node(out.id);
    if (root.value.size() != 1) throw std::invalid_argument("Tape::backward: output must be scalar");
    adjoint(out.id)[0] = S(1.0);
    for (int i = out.id; i >= 0; --i) {
      Node& n = nodes_[static_cast<std::size_t>(i)];
      if (n.backward && !n.adjoint.empty()) n.backward(*this, i);
    }
  }

  Node& node(int id) { return nodes_[static_cast<std::size_t>(id)]; }
  const Node& node(int id) const { return nodes_[static_cast<std::size_t>(id)]; }
  bool active(int id) const { return node(id).active; }

  /// Adjoint buffer of a node, zero-initialized on first access.
  std::vector<S>& adjoint(int id) {
    Node& n = node(id);
    if (n.adjoint.empty()) n.adjoint.assign(n.value.size(), S(0.0));
    return n.adjoint;
  }

  std::size_t size() const { return nodes_.size(); }

 private:
  Var<S> push(int rows, int cols, std::vector<S> value, bool active, Backward backward) {
    assert(value.size() == static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols));
    Node n;
    n.rows = rows;
    n.cols = cols;
    n.value = std::move(value);
    n.backward = std::move(backward);
    n.active = active;
    nodes_.push_back(std::move(n));
    return Var<S>{this, static_cast<int>(nodes_.size() - 1)};
  }

  std::vector<Node> nodes_;
};

namespace detail {

struct Broadcast {
  int rows;
  int cols;
  int a_rs, a_cs;  // strides into a (0 when broadcast)
  int b_rs, b_cs;

  Broadcast(int ar, int ac, int br, int bc) {
    rows = ar > br ? ar : br;
    cols = ac > bc ? ac : bc;
    if ((ar != rows && ar != 1) || (br != rows && br != 1) || (ac != cols && ac != 1) ||
        (bc != cols && bc != 1)) {
      throw std::invalid_argument("tape: incompatible shapes for broadcasting");
    }
    a_rs = ar == 1 ? 0 : ac;
    a_cs = ac == 1 ? 0 : 1;
    b_rs = br == 1 ? 0 : bc;
    b_cs = bc == 1 ? 0 : 1;
  }
};

}  // namespace detail

/// Elementwise binary op with broadcasting over singleton dimensions.
/// `da(x, y, z)` and `db(x, y, z)` return the local partials given the
/// operands x, y and result z.
template <class S, class F, class DA, class DB>
Var<S> binary(Var<S> a, Var<S> b, F f, DA da, DB db) {
  Tape<S>& tape = *a.tape;
  const auto& an = tape.node(a.id);
  const auto& bn = tape.node(b.id);
  const detail::Broadcast bc(an.rows, an.cols, bn.rows, bn.cols);
  std::vector<S> out(static_cast<std::size_t>(bc.rows) * bc.cols);
  for (int i = 0; i < bc.rows; ++i) {
    for (int j = 0; j < bc.cols; ++j) {
      out[static_cast<std::size_t>(i) * bc.cols + j] =
          f(an.value[static_cast<std::size_t>(i * bc.a_rs + j * bc.a_cs)],
            bn.value[static_cast<std::size_t>(i * bc.b_rs + j * bc.b_cs)]);
    }
  }
  const int ia = a.id;
  const int ib = b.id;
  return tape.record(bc.rows, bc.cols, std::move(out), {ia, ib}, [ia, ib, bc, da, db](Tape<S>& t, int self) {
    const auto& o = t.node(self);
    const auto& x = t.node(ia).value;
    const auto& y = t.node(ib).value;
    const bool need_a = t.active(ia);
    const bool need_b = t.active(ib);
    std::vector<S>* ga = need_a ? &t.adjoint(ia) : nullptr;
    std::vector<S>* gb = need_b ? &t.adjoint(ib) : nullptr;
    for (int i = 0; i < bc.rows; ++i) {
      for (int j = 0; j < bc.cols; ++j) {
        const std::size_t k = static_cast<std::size_t>(i) * bc.cols + j;
        const std::size_t ka = static_cast<std::size_t>(i * bc.a_rs + j * bc.a_cs);
        const std::size_t kb = static_cast<std::size_t>(i * bc.b_rs + j * bc.b_cs);
        if (ga) (*ga)[ka] += o.adjoint[k] * da(x[ka], y[kb], o.value[k]);
        if (gb) (*gb)[kb] += o.adjoint[k] * db(x[ka], y[kb], o.value[k]);
      }
    }
  });
}

/// Elementwise unary op; `df(x, y)` is the derivative given input x and
/// output y.
template <class S, class F, class DF>
Var<S> unary(Var<S> a, F f, DF df) {
  Tape<S>& tape = *a.tape;
  const auto& an = tape.node(a.id);
  std::vector<S> out(an.value.size());
  for (std::size_t k = 0; k < out.size(); ++k) out[k] = f(an.value[k]);
  const int ia = a.id;
  return tape.record(an.rows, an.cols, std::move(out), {ia}, [ia, df](Tape<S>& t, int self) {
    const auto& o = t.node(self);
    const auto& x = t.node(ia).value;
    auto& g = t.adjoint(ia);
    for (std::size_t k = 0; k < g.size(); ++k) g[k] += o.adjoint[k] * df(x[k], o.value[k]);
  });
}

template <class S>
Var<S> constant_like(Var<S> a, double c) {
  return a.tape->constant(a.rows(), a.cols(), std::vector<S>(a.size(), S(c)));
}

template <class S>
Var<S> operator+(Var<S> a, Var<S> b) {
  return binary(
      a, b, [](const S& x, const S& y) { return x + y; }, [](const S&, const S&, const S&) { return S(1.0); },
      [](const S&, const S&, const S&) { return S(1.0); });
}

template <class S>
Var<S> operator-(Var<S> a, Var<S> b) {
  return binary(
      a, b, [](const S& x, const S& y) { return x - y; }, [](const S&, const S&, const S&) { return S(1.0); },
      [](const S&, const S&, const S&) { return S(-1.0); });
}

template <class S>
Var<S> operator*(Var<S> a, Var<S> b) {
  return binary(
      a, b, [](const S& x, const S& y) { return x * y; }, [](const S&, const S& y, const S&) { return y; },
      [](const S& x, const S&, const S&) { return x; });
}

template <class S>
Var<S> operator/(Var<S> a, Var<S> b) {
  return binary(
      a, b, [](const S& x, const S& y) { return x / y; },
      [](const S&, const S& y, const S&) { return S(1.0) / y; },
      [](const S&, const S& y, const S& z) { return -(z / y); });
}

template <class S>
Var<S> operator-(Var<S> a) {
  return unary(a, [](const S& x) { return -x; }, [](const S&, const S&) { return S(-1.0); });
}

template <class S>
Var<S> operator+(Var<S> a, double c) {
  return unary(a, [c](const S& x) { return x + c; }, [](const S&, const S&) { return S(1.0); });
}
template <class S>
Var<S> operator+(double c, Var<S> a) { return a + c; }
template <class S>
Var<S> operator-(Var<S> a, double c) { return a + (-c); }
template <class S>
Var<S> operator-(double c, Var<S> a) {
  return unary(a, [c](const S& x) { return c - x; }, [](const S&, const S&) { return S(-1.0); });
}

template <class S>
Var<S> operator*(Var<S> a, double c) {
  return unary(a, [c](const S& x) { return x * c; }, [c](const S&, const S&) { return S(c); });
}
template <class S>
Var<S> operator*(double c, Var<S> a) { return a * c; }
template <class S>
Var<S> operator/(Var<S> a, double c) { return a * (1.0 / c); }
template <class S>
Var<S> operator/(double c, Var<S> a) {
  return unary(a, [c](const S& x) { return c / x; }, [](const S& x, const S& y) { return -(y / x); });
}

template <class S>
Var<S> tanh(Var<S> a) {
  return unary(
      a,
      [](const S& x) {
        using std::tanh;
        return tanh(x);
      },
      [](const S&, const S& y) { return 1.0 - y * y; });
}

template <class S>
Var<S> log(Var<S> a) {
  return unary(
      a,
      [](const S& x) {
        using std::log;
        return log(x);
      },
      [](const S& x, const S&) { return S(1.0) / x; });
}

/// max(a, c) elementwise; the derivative is zero where the clamp is active.
template <class S>
Var<S> clamp_min(Var<S> a, double c) {
  return unary(
      a, [c](const S& x) { return value_of(x) >= c ? x : S(c); },
      [c](const S& x, const S&) { return value_of(x) >= c ? S(1.0) : S(0.0); });
}

/// Constant 0/1 mask of entries with value >= c.
template <class S>
Var<S> ge_mask(Var<S> a, double c) {
  std::vector<S> m(a.size());
  const auto& v = a.value();
  for (std::size_t k = 0; k < m.size(); ++k) m[k] = S(value_of(v[k]) >= c ? 1.0 : 0.0);
  return a.tape->constant(a.rows(), a.cols(), std::move(m));
}

template <class S>
Var<S> reciprocal(Var<S> a) { return 1.0 / a; }

/// Sum of all entries as a 1x1 node.
template <class S>
Var<S> sum(Var<S> a) {
  Tape<S>& tape = *a.tape;
  S total(0.0);
  for (const S& x : a.value()) total += x;
  const int ia = a.id;
  return tape.record(1, 1, std::vector<S>{total}, {ia}, [ia](Tape<S>& t, int self) {
    const S g = t.node(self).adjoint[0];
    for (auto& x : t.adjoint(ia)) x += g;
  });
}

namespace detail {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

template <class S>
struct LaneCount {
  static constexpr int value = 0;
};
template <int L>
struct LaneCount<Fwd<L>> {
  static constexpr int value = L;
};

/// Splits an array of scalars into its value plane and tangent planes.
template <class S>
std::vector<RowMatrix> to_planes(const std::vector<S>& v, int rows, int cols) {
  constexpr int L = LaneCount<S>::value;
  std::vector<RowMatrix> p(L + 1, RowMatrix(rows, cols));
  for (std::size_t i = 0; i < v.size(); ++i) {
    p[0].data()[i] = value_of(v[i]);
    if constexpr (L > 0) {
      for (int k = 0; k < L; ++k) p[static_cast<std::size_t>(k + 1)].data()[i] = v[i].t[static_cast<std::size_t>(k)];
    }
  }
  return p;
}

template <class S>
void add_planes(std::vector<S>& dst, const std::vector<RowMatrix>& p) {
  constexpr int L = LaneCount<S>::value;
  for (std::size_t i = 0; i < dst.size(); ++i) {
    if constexpr (L > 0) {
      dst[i].v += p[0].data()[i];
      for (int k = 0; k < L; ++k) dst[i].t[static_cast<std::size_t>(k)] += p[static_cast<std::size_t>(k + 1)].data()[i];
    } else {
      dst[i] += p[0].data()[i];
    }
  }
}

template <bool TA, bool TB>
RowMatrix gemm(const RowMatrix& a, const RowMatrix& b) {
  if constexpr (TA && TB) return a.transpose() * b.transpose();
  else if constexpr (TA) return a.transpose() * b;
  else if constexpr (TB) return a * b.transpose();
  else return a * b;
}

/// op(A) op(B) with the product rule applied across tangent planes.
template <bool TA, bool TB>
std::vector<RowMatrix> plane_product(const std::vector<RowMatrix>& a, const std::vector<RowMatrix>& b) {
  std::vector<RowMatrix> c;
  c.reserve(a.size());
  c.push_back(gemm<TA, TB>(a[0], b[0]));
  for (std::size_t k = 1; k < a.size(); ++k) c.push_back(gemm<TA, TB>(a[k], b[0]) + gemm<TA, TB>(a[0], b[k]));
  return c;
}

}  // namespace detail

/// Matrix product (m x n) * (n x k).
template <class S>
Var<S> matmul(Var<S> a, Var<S> b) {
  using detail::RowMatrix;
  using Map = Eigen::Map<RowMatrix>;
  using ConstMap = Eigen::Map<const RowMatrix>;
  Tape<S>& tape = *a.tape;
  const auto& an = tape.node(a.id);
  const auto& bn = tape.node(b.id);
  if (an.cols != bn.rows) throw std::invalid_argument("matmul: inner dimensions differ");
  const int m = an.rows;
  const int n = an.cols;
  const int k = bn.cols;
  std::vector<S> out(static_cast<std::size_t>(m) * k);
  if constexpr (std::is_same_v<S, double>) {
    Map(out.data(), m, k).noalias() = ConstMap(an.value.data(), m, n) * ConstMap(bn.value.data(), n, k);
  } else {
    detail::add_planes(out, detail::plane_product<false, false>(detail::to_planes(an.value, m, n),
                                                                detail::to_planes(bn.value, n, k)));
  }
  const int ia = a.id;
  const int ib = b.id;
  return tape.record(m, k, std::move(out), {ia, ib}, [ia, ib, m, n, k](Tape<S>& t, int self) {
    const auto& g = t.node(self).adjoint;
    const auto& av = t.node(ia).value;
    const auto& bv = t.node(ib).value;
    if constexpr (std::is_same_v<S, double>) {
      const ConstMap gm(g.data(), m, k);
      if (t.active(ia)) Map(t.adjoint(ia).data(), m, n).noalias() += gm * ConstMap(bv.data(), n, k).transpose();
      if (t.active(ib)) Map(t.adjoint(ib).data(), n, k).noalias() += ConstMap(av.data(), m, n).transpose() * gm;
    } else {
      const auto gp = detail::to_planes(g, m, k);
      if (t.active(ia)) detail::add_planes(t.adjoint(ia), detail::plane_product<false, true>(gp, detail::to_planes(bv, n, k)));
      if (t.active(ib)) detail::add_planes(t.adjoint(ib), detail::plane_product<true, false>(detail::to_planes(av, m, n), gp));
    }
  });
}

/// Sub-block [r0, r0 + nr) x [c0, c0 + nc).
template <class S>
Var<S> slice(Var<S> a, int r0, int nr, int c0, int nc) {
  Tape<S>& tape = *a.tape;
  const auto& an = tape.node(a.id);
  if (r0 < 0 || c0 < 0 || r0 + nr > an.rows || c0 + nc > an.cols) {
    throw std::out_of_range("slice: block outside array");
  }
  const int cols = an.cols;
  std::vector<S> out(static_cast<std::size_t>(nr) * nc);
  for (int i = 0; i < nr; ++i) {
    for (int j = 0; j < nc; ++j) {
      out[static_cast<std::size_t>(i) * nc + j] = an.value[static_cast<std::size_t>(r0 + i) * cols + c0 + j];
    }
  }
  const int ia = a.id;
  return tape.record(nr, nc, std::move(out), {ia}, [ia, r0, nr, c0, nc, cols](Tape<S>& t, int self) {
    const auto& g = t.node(self).adjoint;
    auto& ga = t.adjoint(ia);
    for (int i = 0; i < nr; ++i) {
      for (int j = 0; j < nc; ++j) {
        ga[static_cast<std::size_t>(r0 + i) * cols + c0 + j] += g[static_cast<std::size_t>(i) * nc + j];
      }
    }
  });
}

}  // namespace pinnscape::ad
