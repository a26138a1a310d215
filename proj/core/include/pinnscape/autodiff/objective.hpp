#pragma once

#include <cstddef>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>

#include <Eigen/Dense>

#include "pinnscape/autodiff/fwd.hpp"
#include "pinnscape/autodiff/tape.hpp"
#include "pinnscape/rng.hpp"

namespace pinnscape {

/// Flat vector of all trainable parameters.
using ParamVector = Eigen::VectorXd;
/// Dense |theta| x |theta| Hessian.
using HessianMatrix = Eigen::MatrixXd;

/// Number of tangent lanes carried per forward-over-reverse sweep.
inline constexpr int kHvpLanes = 8;

/// Raised when a loss or its derivatives are not finite, e.g. after the
/// material inverts (J <= 0) at some quadrature point.
class NonFiniteObjective : public std::runtime_error {
 public:
  explicit NonFiniteObjective(const std::string& what, std::optional<std::size_t> point = std::nullopt)
      : std::runtime_error(what), point_(point) {}

  /// Index of the offending quadrature point, when one is identifiable.
  std::optional<std::size_t> point_index() const { return point_; }

 private:
  std::optional<std::size_t> point_;
};

/// A scalar loss of the parameter vector with exact first derivatives and
/// Hessian-vector products.
class Differentiable {
 public:
  virtual ~Differentiable() = default;

  virtual std::size_t dimension() const = 0;

  /// Loss at theta. May be non-finite; callers decide how to treat that.
  virtual double value(const ParamVector& theta) const = 0;

  /// Loss and gradient. Throws NonFiniteObjective on a non-finite loss.
  virtual double value_and_gradient(const ParamVector& theta, ParamVector& grad) const = 0;

  /// H * directions for at most kHvpLanes columns.
  virtual void hessian_block(const ParamVector& theta, const Eigen::MatrixXd& directions,
                             Eigen::MatrixXd& out) const = 0;

  /// True when value/gradient resample their quadrature on every call.
  virtual bool stochastic() const { return false; }

  /// Stochastic variants; deterministic objectives ignore the generator.
  virtual double sampled_value(const ParamVector& theta, Rng& /*rng*/) const { return value(theta); }
  virtual double sampled_value_and_gradient(const ParamVector& theta, ParamVector& grad, Rng& /*rng*/) const {
    return value_and_gradient(theta, grad);
  }
};

ParamVector loss_gradient(const Differentiable& f, const ParamVector& theta);
ParamVector hessian_vector(const Differentiable& f, const ParamVector& theta, const ParamVector& v);

/// Dense Hessian assembled column by column from Hessian-vector products.
HessianMatrix hessian(const Differentiable& f, const ParamVector& theta);

struct EigenDecomposition {
  Eigen::VectorXd values;   // ascending
  Eigen::MatrixXd vectors;  // column k pairs with values[k]
};

/// Full spectral decomposition of a symmetric matrix. Throws
/// std::invalid_argument when the input is not symmetric to 1e-8 relative.
EigenDecomposition eig_symmetric(const Eigen::MatrixXd& matrix);

/// Max |H - H^T| / max |H| (0 for the zero matrix).
double symmetry_defect(const Eigen::MatrixXd& matrix);

/// Adapts a generic recording callable into a Differentiable. The callable is
/// invoked as `record(tape, theta)` for several scalar types S, where theta is
/// an (n x 1) leaf, and must return a 1x1 node.
template <class Record>
class TapeObjective final : public Differentiable {
 public:
  TapeObjective(std::size_t n, Record record) : n_(n), record_(std::move(record)) {}

  std::size_t dimension() const override { return n_; }

  double value(const ParamVector& theta) const override {
    ad::Tape<double> tape;
    auto leaf = tape.leaf(static_cast<int>(n_), 1, std::vector<double>(theta.data(), theta.data() + n_));
    return record_(tape, leaf).value()[0];
  }

  double value_and_gradient(const ParamVector& theta, ParamVector& grad) const override {
    ad::Tape<double> tape;
    auto leaf = tape.leaf(static_cast<int>(n_), 1, std::vector<double>(theta.data(), theta.data() + n_));
    auto out = record_(tape, leaf);
    const double v = out.value()[0];
    if (!std::isfinite(v)) throw NonFiniteObjective("TapeObjective: non-finite value");
    tape.backward(out);
    const auto& g = tape.adjoint(leaf.id);
    grad = Eigen::Map<const Eigen::VectorXd>(g.data(), static_cast<Eigen::Index>(n_));
    return v;
  }

  void hessian_block(const ParamVector& theta, const Eigen::MatrixXd& directions,
                     Eigen::MatrixXd& out) const override {
    using S = ad::Fwd<kHvpLanes>;
    const auto lanes = directions.cols();
    std::vector<S> seed(n_);
    for (std::size_t i = 0; i < n_; ++i) {
      seed[i].v = theta[static_cast<Eigen::Index>(i)];
      for (Eigen::Index k = 0; k < lanes; ++k) seed[i].t[static_cast<std::size_t>(k)] = directions(i, k);
    }
    ad::Tape<S> tape;
    auto leaf = tape.leaf(static_cast<int>(n_), 1, std::move(seed));
    auto res = record_(tape, leaf);
    if (!std::isfinite(res.value()[0].v)) throw NonFiniteObjective("TapeObjective: non-finite value");
    tape.backward(res);
    const auto& g = tape.adjoint(leaf.id);
    out.resize(static_cast<Eigen::Index>(n_), lanes);
    for (std::size_t i = 0; i < n_; ++i) {
      for (Eigen::Index k = 0; k < lanes; ++k) out(i, k) = g[i].t[static_cast<std::size_t>(k)];
    }
  }

 private:
  std::size_t n_;
  Record record_;
};

template <class Record>
TapeObjective<Record> make_tape_objective(std::size_t n, Record record) {
  return TapeObjective<Record>(n, std::move(record));
}

/// 0.5 * theta^T A theta (+ b^T theta), recorded on the tape. Used as an
/// analytic fixture for optimizers and probes.
std::unique_ptr<Differentiable> make_quadratic(const Eigen::MatrixXd& a,
                                               const Eigen::VectorXd& b = Eigen::VectorXd());

}  // namespace pinnscape
