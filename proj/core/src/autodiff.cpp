#include <algorithm>
#include <cmath>

#include <Eigen/Eigenvalues>

#include "pinnscape/autodiff/objective.hpp"
#include "pinnscape/parallel.hpp"

namespace pinnscape {

ParamVector loss_gradient(const Differentiable& f, const ParamVector& theta) {
  ParamVector grad;
  f.value_and_gradient(theta, grad);
  return grad;
}

ParamVector hessian_vector(const Differentiable& f, const ParamVector& theta, const ParamVector& v) {
  Eigen::MatrixXd out;
  f.hessian_block(theta, v, out);
  return out.col(0);
}

HessianMatrix hessian(const Differentiable& f, const ParamVector& theta) {
  const auto n = static_cast<Eigen::Index>(f.dimension());
  HessianMatrix h(n, n);
  const auto blocks = static_cast<std::size_t>((n + kHvpLanes - 1) / kHvpLanes);
  parallel_for(blocks, [&](std::size_t b) {
    const auto c0 = static_cast<Eigen::Index>(b) * kHvpLanes;
    const Eigen::Index lanes = std::min<Eigen::Index>(kHvpLanes, n - c0);
    Eigen::MatrixXd directions = Eigen::MatrixXd::Zero(n, lanes);
    for (Eigen::Index k = 0; k < lanes; ++k) directions(c0 + k, k) = 1.0;
    Eigen::MatrixXd block;
    f.hessian_block(theta, directions, block);
    if (!block.allFinite()) throw NonFiniteObjective("hessian: non-finite Hessian-vector product");
    h.middleCols(c0, lanes) = block;
  });
  return h;
}

double symmetry_defect(const Eigen::MatrixXd& matrix) {
  const double scale = matrix.cwiseAbs().maxCoeff();
  if (scale == 0.0) return 0.0;
  return (matrix - matrix.transpose()).cwiseAbs().maxCoeff() / scale;
}

EigenDecomposition eig_symmetric(const Eigen::MatrixXd& matrix) {
  if (matrix.rows() != matrix.cols()) throw std::invalid_argument("eig_symmetric: matrix is not square");
  if (symmetry_defect(matrix) > 1e-8) throw std::invalid_argument("eig_symmetric: matrix is not symmetric");
  const Eigen::MatrixXd sym = 0.5 * (matrix + matrix.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(sym);
  if (solver.info() != Eigen::Success) throw std::runtime_error("eig_symmetric: solver did not converge");
  return {solver.eigenvalues(), solver.eigenvectors()};
}

namespace {

template <class S>
std::vector<S> to_scalars(const double* data, std::size_t n) {
  std::vector<S> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = S(data[i]);
  return out;
}

struct QuadraticRecord {
  Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> a;
  Eigen::VectorXd b;

  template <class S>
  ad::Var<S> operator()(ad::Tape<S>& tape, ad::Var<S> theta) const {
    const int n = static_cast<int>(a.rows());
    auto am = tape.constant(n, n, to_scalars<S>(a.data(), static_cast<std::size_t>(a.size())));
    auto quad = 0.5 * ad::sum(theta * ad::matmul(am, theta));
    if (b.size() == 0) return quad;
    auto bv = tape.constant(n, 1, to_scalars<S>(b.data(), static_cast<std::size_t>(b.size())));
    return quad + ad::sum(bv * theta);
  }
};

}  // namespace

std::unique_ptr<Differentiable> make_quadratic(const Eigen::MatrixXd& a, const Eigen::VectorXd& b) {
  if (a.rows() != a.cols()) throw std::invalid_argument("make_quadratic: matrix is not square");
  if (b.size() != 0 && b.size() != a.rows()) throw std::invalid_argument("make_quadratic: size mismatch");
  QuadraticRecord rec{a, b};
  return std::make_unique<TapeObjective<QuadraticRecord>>(static_cast<std::size_t>(a.rows()), rec);
}

}  // namespace pinnscape
