#pragma once

// Batched network evaluation on the tape.
//
// A "jet batch" stores, for every neuron and every point, the value and the
// first and second spatial derivatives. Layout is (neurons x C*P), with the
// C components in contiguous blocks of P columns:
//   component 0            value
//   components 1..D        d/dx_k
//   components D+1..C-1    d2/dx_a dx_b for a <= b, packed row-wise
// Layer operations are fused tape nodes with hand-written reverse rules,
// written against the generic scalar S so they also carry tangents.

#include <array>
#include <cmath>
#include <numbers>
#include <span>
#include <type_traits>
#include <utility>
#include <vector>

#include "pinnscape/autodiff/dual.hpp"
#include "pinnscape/autodiff/tape.hpp"
#include "pinnscape/network.hpp"

namespace pinnscape::detail {

/// Components per point of a jet of the given order: value, first
/// derivatives (order >= 1), packed second derivatives (order 2).
constexpr int jet_components(int dim, int order = 2) {
  return 1 + (order >= 1 ? dim : 0) + (order >= 2 ? dim * (dim + 1) / 2 : 0);
}

struct JetPair {
  int a;
  int b;
  int comp;  // component index of d2/dx_a dx_b
};

inline std::vector<JetPair> jet_pairs(int dim) {
  std::vector<JetPair> pairs;
  for (int a = 0; a < dim; ++a) {
    for (int b = a; b < dim; ++b) {
      pairs.push_back({a, b, 1 + dim + static_cast<int>(ad::packed_index(static_cast<std::size_t>(dim),
                                                                         static_cast<std::size_t>(a),
                                                                         static_cast<std::size_t>(b)))});
    }
  }
  return pairs;
}

template <class S>
struct ActivationDerivs {
  S f0, f1, f2, f3;
};

template <class S>
ActivationDerivs<S> activation_derivs(Activation act, const S& z) {
  using std::tanh;
  const S t = tanh(z);
  const S s = 1.0 - t * t;
  ActivationDerivs<S> d;
  d.f2 = -2.0 * (t * s);
  d.f3 = s * (6.0 * (t * t) - 2.0);
  if (act == Activation::XPlusTanh) {
    d.f0 = z + t;
    d.f1 = 1.0 + s;
  } else {
    d.f0 = t;
    d.f1 = s;
  }
  return d;
}

/// Scalar activation applied to a jet, composed from primitives.
template <class T, std::size_t N>
ad::Dual2<T, N> activate(Activation act, const ad::Dual2<T, N>& x) {
  using ad::tanh;
  if (act == Activation::XPlusTanh) return x + tanh(x);
  return tanh(x);
}

/// Distance-function jet at one point, as C components.
inline std::vector<double> distance_jet(DistanceFunction dist, std::span<const double> x) {
  if (dist == DistanceFunction::SinPiX) {
    const auto xv = ad::make_variable<1>(x[0], 0);
    using ad::sin;
    const auto phi = sin(xv * std::numbers::pi);
    return {phi.v, phi.d[0], phi.dd[0]};
  }
  const auto x1 = ad::make_variable<2>(x[0], 0);
  const auto x2 = ad::make_variable<2>(x[1], 1);
  const auto phi = 1.0 - (x1 * x1 + x2 * x2);
  return {phi.v, phi.d[0], phi.d[1], phi.dd[0], phi.dd[1], phi.dd[2]};
}

template <class S>
struct BoundNetwork {
  std::vector<ad::Var<S>> weights;
  std::vector<ad::Var<S>> biases;
  ad::Var<S> outer;
};

/// Places the parameter blocks on the tape, as leaves when `differentiable`.
template <class S>
BoundNetwork<S> bind_network(ad::Tape<S>& tape, const ParamLayout& layout, const std::vector<S>& theta,
                             bool differentiable) {
  auto make = [&](const ParamBlock& blk) {
    std::vector<S> v(theta.begin() + static_cast<std::ptrdiff_t>(blk.offset),
                     theta.begin() + static_cast<std::ptrdiff_t>(blk.offset + blk.size()));
    return differentiable ? tape.leaf(blk.rows, blk.cols, std::move(v)) : tape.constant(blk.rows, blk.cols, std::move(v));
  };
  BoundNetwork<S> net;
  for (std::size_t l = 0; l < layout.weights.size(); ++l) {
    net.weights.push_back(make(layout.weights[l]));
    net.biases.push_back(make(layout.biases[l]));
  }
  net.outer = make(layout.outer);
  return net;
}

/// Copies leaf adjoints back into a flat vector in layout order.
template <class S>
std::vector<S> gather_adjoints(ad::Tape<S>& tape, const ParamLayout& layout, const BoundNetwork<S>& net) {
  std::vector<S> grad(layout.total, S(0.0));
  auto put = [&](const ParamBlock& blk, ad::Var<S> v) {
    const auto& g = tape.adjoint(v.id);
    for (std::size_t k = 0; k < blk.size(); ++k) grad[blk.offset + k] += g[k];
  };
  for (std::size_t l = 0; l < layout.weights.size(); ++l) {
    put(layout.weights[l], net.weights[l]);
    put(layout.biases[l], net.biases[l]);
  }
  put(layout.outer, net.outer);
  return grad;
}

/// Adds the bias column to the value block (first P columns) only.
template <class S>
ad::Var<S> add_bias_to_values(ad::Var<S> z, ad::Var<S> bias, int points) {
  ad::Tape<S>& tape = *z.tape;
  const int rows = z.rows();
  const int cols = z.cols();
  std::vector<S> out = z.value();
  const auto& b = bias.value();
  for (int r = 0; r < rows; ++r) {
    for (int p = 0; p < points; ++p) out[static_cast<std::size_t>(r) * cols + p] += b[static_cast<std::size_t>(r)];
  }
  const int iz = z.id;
  const int ib = bias.id;
  return tape.record(rows, cols, std::move(out), {iz, ib}, [iz, ib, rows, cols, points](ad::Tape<S>& t, int self) {
    const auto& g = t.node(self).adjoint;
    if (t.active(iz)) {
      auto& gz = t.adjoint(iz);
      for (std::size_t k = 0; k < g.size(); ++k) gz[k] += g[k];
    }
    if (t.active(ib)) {
      auto& gb = t.adjoint(ib);
      for (int r = 0; r < rows; ++r) {
        S acc(0.0);
        for (int p = 0; p < points; ++p) acc += g[static_cast<std::size_t>(r) * cols + p];
        gb[static_cast<std::size_t>(r)] += acc;
      }
    }
  });
}

/// Elementwise activation of a jet batch (second-order chain rule).
template <class S>
ad::Var<S> jet_activation(ad::Var<S> z, Activation act, int dim, int points, int order = 2) {
  ad::Tape<S>& tape = *z.tape;
  const int rows = z.rows();
  const int cols = z.cols();
  const auto pairs = order >= 2 ? jet_pairs(dim) : std::vector<JetPair>{};
  dim = order >= 1 ? dim : 0;
  const auto& zv = z.value();
  std::vector<S> out(zv.size());
  for (int r = 0; r < rows; ++r) {
    const std::size_t base = static_cast<std::size_t>(r) * cols;
    for (int p = 0; p < points; ++p) {
      auto at = [&](int c) { return base + static_cast<std::size_t>(c) * points + p; };
      const auto d = activation_derivs(act, zv[at(0)]);
      out[at(0)] = d.f0;
      for (int k = 0; k < dim; ++k) out[at(1 + k)] = d.f1 * zv[at(1 + k)];
      for (const auto& pr : pairs) {
        out[at(pr.comp)] = d.f2 * (zv[at(1 + pr.a)] * zv[at(1 + pr.b)]) + d.f1 * zv[at(pr.comp)];
      }
    }
  }
  const int iz = z.id;
  return tape.record(rows, cols, std::move(out), {iz}, [iz, act, dim, points, rows, cols, pairs](ad::Tape<S>& t, int self) {
    const auto& g = t.node(self).adjoint;
    const auto& zv = t.node(iz).value;
    auto& gz = t.adjoint(iz);
    for (int r = 0; r < rows; ++r) {
      const std::size_t base = static_cast<std::size_t>(r) * cols;
      for (int p = 0; p < points; ++p) {
        auto at = [&](int c) { return base + static_cast<std::size_t>(c) * points + p; };
        const auto d = activation_derivs(act, zv[at(0)]);
        S g0 = d.f1 * g[at(0)];
        for (int k = 0; k < dim; ++k) {
          g0 += d.f2 * (zv[at(1 + k)] * g[at(1 + k)]);
          gz[at(1 + k)] += d.f1 * g[at(1 + k)];
        }
        for (const auto& pr : pairs) {
          const S& gp = g[at(pr.comp)];
          const S& za = zv[at(1 + pr.a)];
          const S& zb = zv[at(1 + pr.b)];
          g0 += (d.f3 * (za * zb) + d.f2 * zv[at(pr.comp)]) * gp;
          gz[at(1 + pr.a)] += d.f2 * (zb * gp);
          gz[at(1 + pr.b)] += d.f2 * (za * gp);
          gz[at(pr.comp)] += d.f1 * gp;
        }
        gz[at(0)] += g0;
      }
    }
  });
}

/// Multiplies every row of a jet batch by a constant per-point jet phi
/// (C x P, component-major).
template <class S>
ad::Var<S> jet_scale(ad::Var<S> a, std::vector<double> phi, int dim, int points, int order = 2) {
  ad::Tape<S>& tape = *a.tape;
  const int rows = a.rows();
  const int cols = a.cols();
  const auto pairs = order >= 2 ? jet_pairs(dim) : std::vector<JetPair>{};
  dim = order >= 1 ? dim : 0;
  const auto& av = a.value();
  std::vector<S> out(av.size());
  auto ph = [&phi, points](int c, int p) { return phi[static_cast<std::size_t>(c) * points + p]; };
  for (int r = 0; r < rows; ++r) {
    const std::size_t base = static_cast<std::size_t>(r) * cols;
    for (int p = 0; p < points; ++p) {
      auto at = [&](int c) { return base + static_cast<std::size_t>(c) * points + p; };
      const S& a0 = av[at(0)];
      out[at(0)] = ph(0, p) * a0;
      for (int k = 0; k < dim; ++k) out[at(1 + k)] = ph(1 + k, p) * a0 + ph(0, p) * av[at(1 + k)];
      for (const auto& pr : pairs) {
        out[at(pr.comp)] = ph(pr.comp, p) * a0 + ph(1 + pr.a, p) * av[at(1 + pr.b)] +
                           ph(1 + pr.b, p) * av[at(1 + pr.a)] + ph(0, p) * av[at(pr.comp)];
      }
    }
  }
  const int ia = a.id;
  return tape.record(rows, cols, std::move(out), {ia},
                     [ia, dim, points, rows, cols, pairs, phi = std::move(phi)](ad::Tape<S>& t, int self) {
                       const auto& g = t.node(self).adjoint;
                       auto& ga = t.adjoint(ia);
                       auto ph = [&phi, points](int c, int p) { return phi[static_cast<std::size_t>(c) * points + p]; };
                       for (int r = 0; r < rows; ++r) {
                         const std::size_t base = static_cast<std::size_t>(r) * cols;
                         for (int p = 0; p < points; ++p) {
                           auto at = [&](int c) { return base + static_cast<std::size_t>(c) * points + p; };
                           S g0 = ph(0, p) * g[at(0)];
                           for (int k = 0; k < dim; ++k) {
                             g0 += ph(1 + k, p) * g[at(1 + k)];
                             ga[at(1 + k)] += ph(0, p) * g[at(1 + k)];
                           }
                           for (const auto& pr : pairs) {
                             const S& gp = g[at(pr.comp)];
                             g0 += ph(pr.comp, p) * gp;
                             ga[at(1 + pr.b)] += ph(1 + pr.a, p) * gp;
                             ga[at(1 + pr.a)] += ph(1 + pr.b, p) * gp;
                             ga[at(pr.comp)] += ph(0, p) * gp;
                           }
                           ga[at(0)] += g0;
                         }
                       }
                     });
}

/// Input jets x_k for point-major coordinates: (dim x C*P).
inline std::vector<double> input_jets(int dim, std::span<const double> coords, int points, int order = 2) {
  const int comps = jet_components(dim, order);
  std::vector<double> out(static_cast<std::size_t>(dim) * comps * points, 0.0);
  const std::size_t cols = static_cast<std::size_t>(comps) * points;
  for (int k = 0; k < dim; ++k) {
    for (int p = 0; p < points; ++p) {
      out[k * cols + p] = coords[static_cast<std::size_t>(p) * dim + k];
      if (order >= 1) out[k * cols + static_cast<std::size_t>(1 + k) * points + p] = 1.0;
    }
  }
  return out;
}

inline std::vector<double> distance_jets(DistanceFunction dist, int dim, std::span<const double> coords, int points,
                                         int order = 2) {
  const int comps = jet_components(dim, order);
  std::vector<double> phi(static_cast<std::size_t>(comps) * points);
  for (int p = 0; p < points; ++p) {
    const auto jet = distance_jet(dist, coords.subspan(static_cast<std::size_t>(p) * dim, static_cast<std::size_t>(dim)));
    for (int c = 0; c < comps; ++c) phi[static_cast<std::size_t>(c) * points + p] = jet[static_cast<std::size_t>(c)];
  }
  return phi;
}

template <class S>
std::vector<S> to_scalars(const std::vector<double>& v) {
  if constexpr (std::is_same_v<S, double>) {
    return v;
  } else {
    std::vector<S> out(v.size());
    for (std::size_t k = 0; k < v.size(); ++k) out[k] = S(v[k]);
    return out;
  }
}

/// Basis-function jets h_i = phi * a_i at the points: (basis_size x C*P).
template <class S>
ad::Var<S> basis_jets(ad::Tape<S>& tape, const NetworkSpec& spec, const BoundNetwork<S>& net,
                      std::span<const double> coords, int points, int order = 2) {
  const int dim = spec.input_dim;
  const int comps = jet_components(dim, order);
  ad::Var<S> a = tape.constant(dim, comps * points, to_scalars<S>(input_jets(dim, coords, points, order)));
  for (std::size_t l = 0; l < net.weights.size(); ++l) {
    auto z = add_bias_to_values(ad::matmul(net.weights[l], a), net.biases[l], points);
    a = jet_activation(z, spec.activation, dim, points, order);
  }
  return jet_scale(a, distance_jets(spec.distance, dim, coords, points, order), dim, points, order);
}

/// Output jets (output_dim x C*P).
template <class S>
ad::Var<S> output_jets(ad::Tape<S>& tape, const NetworkSpec& spec, const BoundNetwork<S>& net,
                       std::span<const double> coords, int points, int order = 2) {
  return ad::matmul(net.outer, basis_jets(tape, spec, net, coords, points, order));
}

}  // namespace pinnscape::detail
