#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "pinnscape/autodiff/dual.hpp"
#include "pinnscape/autodiff/objective.hpp"
#include "pinnscape/autodiff/tape.hpp"
#include "support/oracles.hpp"

using namespace pinnscape;

namespace {

template <class T>
T sample_fn(const T& x, const T& y) {
  using std::cos;
  using std::log;
  using std::sin;
  using std::tanh;
  return tanh(x * y) + log(x + 2.0) * sin(y) / (x * x + 1.0) - cos(x) * y;
}

Eigen::MatrixXd random_symmetric(int n, unsigned seed) {
  std::mt19937_64 gen(seed);
  std::normal_distribution<double> nd;
  Eigen::MatrixXd a(n, n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) a(i, j) = nd(gen);
  }
  return 0.5 * (a + a.transpose());
}

struct Composite {
  Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> a;

  template <class S>
  ad::Var<S> operator()(ad::Tape<S>& tape, ad::Var<S> theta) const {
    const int n = static_cast<int>(a.rows());
    std::vector<S> av(a.data(), a.data() + a.size());
    auto am = tape.constant(n, n, av);
    auto z = ad::tanh(ad::matmul(am, theta));
    auto head = ad::slice(theta, 0, n / 2, 0, 1);
    auto tail = ad::slice(theta, n / 2, n - n / 2, 0, 1);
    return ad::sum(z * theta) + ad::sum(ad::log(head * head + 1.0)) + 0.5 * ad::sum(tail * tail * tail) / 3.0;
  }
};

}  // namespace

TEST(PackedIndex, EnumeratesUpperTriangleInOrder) {
  for (std::size_t n = 1; n <= 4; ++n) {
    std::size_t expect = 0;
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = i; j < n; ++j) EXPECT_EQ(ad::packed_index(n, i, j), expect++);
    }
    EXPECT_EQ(ad::packed_size(n), expect);
  }
}

TEST(Dual2, MatchesFiniteDifferences) {
  const double x0 = 0.37, y0 = -1.21;
  const auto x = ad::make_variable<2>(x0, 0);
  const auto y = ad::make_variable<2>(y0, 1);
  const auto r = sample_fn(x, y);
  auto f = [](double a, double b) { return sample_fn(a, b); };
  const double h = 1e-4;
  EXPECT_NEAR(r.v, f(x0, y0), 1e-14);
  EXPECT_NEAR(r.d[0], (f(x0 + h, y0) - f(x0 - h, y0)) / (2 * h), 1e-7);
  EXPECT_NEAR(r.d[1], (f(x0, y0 + h) - f(x0, y0 - h)) / (2 * h), 1e-7);
  EXPECT_NEAR(r.hess(0, 0), (f(x0 + h, y0) - 2 * f(x0, y0) + f(x0 - h, y0)) / (h * h), 1e-5);
  EXPECT_NEAR(r.hess(1, 1), (f(x0, y0 + h) - 2 * f(x0, y0) + f(x0, y0 - h)) / (h * h), 1e-5);
  const double mixed = (f(x0 + h, y0 + h) - f(x0 + h, y0 - h) - f(x0 - h, y0 + h) + f(x0 - h, y0 - h)) / (4 * h * h);
  EXPECT_NEAR(r.hess(0, 1), mixed, 1e-5);
}

TEST(Dual, ClampZeroesDerivativeWhenActive) {
  ad::Dual<double, 2> x{0.5, {1.0, 2.0}};
  auto c = ad::clamp_min(x, 1e-6);
  EXPECT_EQ(c.v, 0.5);
  EXPECT_EQ(c.d[1], 2.0);
  x.v = -0.5;
  c = ad::clamp_min(x, 1e-6);
  EXPECT_EQ(c.v, 1e-6);
  EXPECT_EQ(c.d[0], 0.0);
}

TEST(Tape, BroadcastingAndSliceShapes) {
  ad::Tape<double> t;
  auto a = t.leaf(2, 3, {1, 2, 3, 4, 5, 6});
  auto row = t.constant(1, 3, {10, 20, 30});
  auto col = t.constant(2, 1, {100, 200});
  auto s = a + row + col;
  EXPECT_EQ(s.rows(), 2);
  EXPECT_EQ(s.cols(), 3);
  EXPECT_DOUBLE_EQ(s.value()[5], 6 + 30 + 200);
  auto sl = ad::slice(s, 1, 1, 1, 2);
  EXPECT_DOUBLE_EQ(sl.value()[0], 5 + 20 + 200);
  auto out = ad::sum(sl * sl);
  t.backward(out);
  const auto& g = t.adjoint(a.id);
  EXPECT_DOUBLE_EQ(g[0], 0.0);
  EXPECT_DOUBLE_EQ(g[4], 2 * (5 + 20 + 200));
  EXPECT_DOUBLE_EQ(g[5], 2 * (6 + 30 + 200));
}

TEST(TapeObjective, GradientAndHessianMatchFiniteDifferences) {
  const int n = 12;
  Composite rec{random_symmetric(n, 3) * 0.4};
  auto obj = make_tape_objective(static_cast<std::size_t>(n), rec);
  std::mt19937_64 gen(9);
  std::normal_distribution<double> nd;
  Eigen::VectorXd theta(n);
  for (auto& v : theta) v = 0.5 * nd(gen);

  const Eigen::VectorXd g = loss_gradient(obj, theta);
  const Eigen::VectorXd g_fd = oracle::fd_gradient([&](const Eigen::VectorXd& x) { return obj.value(x); }, theta);
  EXPECT_LT(oracle::rel_err(g, g_fd), 1e-8);

  Eigen::VectorXd v(n);
  for (auto& x : v) x = nd(gen);
  const Eigen::VectorXd hv = hessian_vector(obj, theta, v);
  const Eigen::VectorXd hv_fd =
      oracle::fd_directional([&](const Eigen::VectorXd& x) { return loss_gradient(obj, x); }, theta, v);
  EXPECT_LT(oracle::rel_err(hv, hv_fd), 1e-7);

  const HessianMatrix h = hessian(obj, theta);
  EXPECT_LT(symmetry_defect(h), 1e-12);
  EXPECT_LT(oracle::rel_err(h * v, hv), 1e-12);
}

TEST(Quadratic, GradientAndHessianAreExact) {
  const Eigen::MatrixXd a = random_symmetric(9, 5);
  Eigen::VectorXd b = Eigen::VectorXd::LinSpaced(9, -1.0, 1.0);
  auto q = make_quadratic(a, b);
  const Eigen::VectorXd theta = Eigen::VectorXd::LinSpaced(9, 0.3, 2.0);
  Eigen::VectorXd g;
  const double v = q->value_and_gradient(theta, g);
  EXPECT_NEAR(v, 0.5 * theta.dot(a * theta) + b.dot(theta), 1e-12);
  EXPECT_LT((g - (a * theta + b)).norm(), 1e-12);
  EXPECT_LT((hessian(*q, theta) - a).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Quadratic, NonFiniteGradientThrows) {
  auto q = make_quadratic(Eigen::MatrixXd::Identity(2, 2));
  Eigen::VectorXd theta(2);
  theta << std::numeric_limits<double>::infinity(), 0.0;
  Eigen::VectorXd g;
  EXPECT_THROW(q->value_and_gradient(theta, g), NonFiniteObjective);
  EXPECT_FALSE(std::isfinite(q->value(theta)));
}

TEST(EigSymmetric, AgreesWithJacobiAndSturmOracles) {
  for (unsigned seed : {1u, 2u, 3u}) {
    const Eigen::MatrixXd a = random_symmetric(30, seed);
    const auto eig = eig_symmetric(a);
    Eigen::VectorXd jv;
    Eigen::MatrixXd jvec;
    oracle::jacobi_eigen(a, jv, jvec);
    const Eigen::VectorXd sv = oracle::sturm_eigenvalues(a);
    EXPECT_LT((eig.values - jv).cwiseAbs().maxCoeff(), 1e-10);
    EXPECT_LT((eig.values - sv).cwiseAbs().maxCoeff(), 1e-10);
    for (int k = 0; k < 30; ++k) {
      EXPECT_GT(std::abs(eig.vectors.col(k).dot(jvec.col(k))), 1.0 - 1e-8);
      EXPECT_LT((a * eig.vectors.col(k) - eig.values[k] * eig.vectors.col(k)).norm(), 1e-10);
    }
  }
}

TEST(EigSymmetric, RejectsNonSymmetricInput) {
  Eigen::MatrixXd a = Eigen::MatrixXd::Identity(3, 3);
  a(0, 2) = 1.0;
  EXPECT_THROW(eig_symmetric(a), std::invalid_argument);
  EXPECT_THROW(eig_symmetric(Eigen::MatrixXd::Zero(2, 3)), std::invalid_argument);
}
