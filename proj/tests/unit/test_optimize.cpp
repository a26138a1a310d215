#include <cmath>
#include <filesystem>

#include <gtest/gtest.h>

#include "pinnscape/network.hpp"
#include "pinnscape/optimize.hpp"
#include "pinnscape/problems.hpp"

namespace pinnscape {
namespace {

// f(theta) = sum(theta), undefined (non-finite) once any entry goes negative.
class Barrier final : public Differentiable {
 public:
  explicit Barrier(std::size_t n) : n_(n) {}
  std::size_t dimension() const override { return n_; }
  double value(const ParamVector& t) const override {
    return t.minCoeff() < 0.0 ? std::nan("") : t.sum();
  }
  double value_and_gradient(const ParamVector& t, ParamVector& g) const override {
    if (t.minCoeff() < 0.0) throw NonFiniteObjective("negative entry", 7);
    g = ParamVector::Ones(static_cast<Eigen::Index>(n_));
    return t.sum();
  }
  void hessian_block(const ParamVector&, const Eigen::MatrixXd& d, Eigen::MatrixXd& out) const override {
    out = Eigen::MatrixXd::Zero(d.rows(), d.cols());
  }

 private:
  std::size_t n_;
};

OptimizerConfig gd(double lr, int epochs) {
  OptimizerConfig c;
  c.kind = OptimizerKind::Gd;
  c.learning_rate = lr;
  c.epochs = epochs;
  return c;
}

TEST(Optimize, GdOnIsotropicQuadraticIsGeometric) {
  const auto f = make_quadratic(Eigen::MatrixXd::Identity(4, 4));
  const ParamVector x0 = (ParamVector(4) << 1.0, -2.0, 0.5, 3.0).finished();
  const auto r = train(*f, x0, gd(0.1, 30));
  ASSERT_FALSE(r.aborted);
  ASSERT_EQ(r.trajectory.size(), 31u);
  for (std::size_t t = 0; t <= 30; ++t) {
    const ParamVector expect = std::pow(0.9, static_cast<double>(t)) * x0;
    EXPECT_LT((r.trajectory.column(t) - expect).norm(), 1e-12) << t;
    EXPECT_NEAR(r.trajectory.losses()[t], 0.5 * expect.squaredNorm(), 1e-12);
  }
}

TEST(Optimize, GdIsMonotoneOnConvexQuadratic) {
  Rng rng(3);
  Eigen::MatrixXd m(6, 6);
  for (int i = 0; i < 36; ++i) m.data()[i] = rng.normal();
  const Eigen::MatrixXd a = m * m.transpose() + Eigen::MatrixXd::Identity(6, 6);
  const double lmax = eig_symmetric(a).values.maxCoeff();
  const auto f = make_quadratic(a);
  ParamVector x0(6);
  for (int i = 0; i < 6; ++i) x0[i] = rng.normal();
  const auto r = train(*f, x0, gd(1.0 / lmax, 200));
  const auto& l = r.trajectory.losses();
  for (std::size_t t = 1; t < l.size(); ++t) EXPECT_LE(l[t], l[t - 1] + 1e-14);
}

TEST(Optimize, AdamFirstStepIsSignedLearningRate) {
  const Eigen::VectorXd diag = (Eigen::VectorXd(3) << 2.0, 0.01, 50.0).finished();
  const auto f = make_quadratic(diag.asDiagonal().toDenseMatrix());
  const ParamVector x0 = (ParamVector(3) << 1.0, -1.0, 0.3).finished();
  OptimizerConfig c;
  c.learning_rate = 0.01;
  c.epochs = 1;
  const auto r = train(*f, x0, c);
  const ParamVector step = r.trajectory.column(1) - x0;
  const ParamVector g = diag.cwiseProduct(x0);
  for (int i = 0; i < 3; ++i) {
    const double expect = -0.01 * g[i] / (std::abs(g[i]) + 1e-8);
    EXPECT_NEAR(step[i], expect, 1e-9);
  }
}

TEST(Optimize, SphereKeepsRadius) {
  const Objective obj(ObjectiveConfig::reference(Problem::Elliptic1D, Formulation::Pinn));
  const ParamVector x0 = init_params(obj.network(), 5);
  OptimizerConfig c;
  c.epochs = 40;
  c.learning_rate = 1e-2;
  const auto r = train_on_sphere(obj, x0, c, 2.5);
  ASSERT_FALSE(r.aborted);
  for (double rad : r.trajectory.radii()) EXPECT_NEAR(rad, 2.5, 2.5e-12);
}

TEST(Optimize, SubspaceWithIdentityMatchesFullTraining) {
  const Objective obj(ObjectiveConfig::reference(Problem::Elliptic1D, Formulation::Drm));
  const ParamVector x0 = init_params(obj.network(), 2);
  const auto n = x0.size();
  const SubspaceMap map{x0, Eigen::MatrixXd::Identity(n, n)};
  OptimizerConfig c;
  c.epochs = 25;
  const auto full = train(obj, x0, c);
  const auto sub = train_subspace(obj, map, c);
  ASSERT_EQ(sub.embedded.size(), full.trajectory.size());
  for (std::size_t t = 0; t < full.trajectory.size(); ++t) {
    EXPECT_LT((sub.embedded.column(t) - full.trajectory.column(t)).norm(), 1e-10);
  }
}

TEST(Optimize, SubspaceIteratesStayInAffineSpan) {
  const Objective obj(ObjectiveConfig::reference(Problem::Elliptic1D, Formulation::Pinn));
  const ParamVector x0 = init_params(obj.network(), 4);
  Rng rng(11);
  const auto map = make_subspace_map(x0, 6, rng);
  for (int j = 0; j < 6; ++j) EXPECT_NEAR(map.projection.col(j).norm(), 1.0, 1e-14);
  OptimizerConfig c;
  c.epochs = 15;
  const auto r = train_subspace(obj, map, c);
  const Eigen::MatrixXd& p = map.projection;
  const Eigen::MatrixXd proj = p * (p.transpose() * p).ldlt().solve(p.transpose());
  for (std::size_t t = 0; t < r.embedded.size(); ++t) {
    const ParamVector d = r.embedded.column(t) - x0;
    EXPECT_LT((d - proj * d).norm(), 1e-10 * (1.0 + d.norm()));
  }
}

TEST(Optimize, OrthonormalSubspaceColumns) {
  Rng rng(1);
  const auto map = make_subspace_map(ParamVector::Zero(40), 7, rng, true);
  const Eigen::MatrixXd g = map.projection.transpose() * map.projection;
  EXPECT_LT((g - Eigen::MatrixXd::Identity(7, 7)).norm(), 1e-12);
}

TEST(Optimize, SpilledTrajectoryRoundTrips) {
  const auto f = make_quadratic(Eigen::MatrixXd::Identity(5, 5));
  const ParamVector x0 = ParamVector::LinSpaced(5, -1.0, 1.0);
  TrainOptions mem;
  TrainOptions disk;
  disk.spill_bytes = 100;
  const auto a = train(*f, x0, gd(0.05, 50), mem);
  const auto b = train(*f, x0, gd(0.05, 50), disk);
  EXPECT_FALSE(a.trajectory.spilled());
  EXPECT_TRUE(b.trajectory.spilled());
  EXPECT_EQ(a.trajectory.matrix(), b.trajectory.matrix());
  EXPECT_EQ(a.trajectory.column(17), b.trajectory.column(17));
}

TEST(Optimize, StoreParamsOffKeepsEnds) {
  const auto f = make_quadratic(Eigen::MatrixXd::Identity(3, 3));
  TrainOptions o;
  o.store_params = false;
  const auto r = train(*f, ParamVector::Ones(3), gd(0.1, 5), o);
  EXPECT_EQ(r.trajectory.size(), 6u);
  EXPECT_EQ(r.trajectory.first(), ParamVector::Ones(3));
  EXPECT_NEAR(r.trajectory.last()[0], std::pow(0.9, 5), 1e-14);
  EXPECT_THROW(r.trajectory.column(2), std::logic_error);
  EXPECT_THROW(r.trajectory.matrix(), std::logic_error);
}

TEST(Optimize, NonFiniteLossAbortsWithEpoch) {
  const Barrier f(2);
  const ParamVector x0 = (ParamVector(2) << 0.25, 1.0).finished();
  const auto r = train(f, x0, gd(0.1, 100));
  ASSERT_TRUE(r.aborted);
  EXPECT_EQ(r.abort_epoch, 3);
  EXPECT_EQ(r.abort_point, std::size_t{7});
  EXPECT_EQ(r.trajectory.size(), 3u);
  EXPECT_NEAR(r.final_params[0], 0.05, 1e-14);
  EXPECT_TRUE(std::isfinite(r.final_loss));
}

TEST(Optimize, RunsAreBitReproducible) {
  auto cfg = ObjectiveConfig::reference(Problem::Elliptic1D, Formulation::Drm);
  cfg.mode = IntegrationMode::MonteCarlo;
  const Objective obj(cfg);
  const ParamVector x0 = init_params(obj.network(), 9);
  OptimizerConfig c;
  c.epochs = 30;
  c.seed = 42;
  const auto a = train(obj, x0, c);
  const auto b = train(obj, x0, c);
  EXPECT_EQ(a.trajectory.matrix(), b.trajectory.matrix());
  EXPECT_EQ(a.trajectory.losses(), b.trajectory.losses());
  c.seed = 43;
  const auto d = train(obj, x0, c);
  EXPECT_NE(a.trajectory.losses(), d.trajectory.losses());
}

TEST(Optimize, RejectsBadConfig) {
  const auto f = make_quadratic(Eigen::MatrixXd::Identity(2, 2));
  EXPECT_THROW(train(*f, ParamVector::Ones(2), gd(-1.0, 5)), std::invalid_argument);
  EXPECT_THROW(train(*f, ParamVector::Ones(2), gd(0.1, 0)), std::invalid_argument);
  EXPECT_THROW(train(*f, ParamVector::Ones(3), gd(0.1, 5)), std::invalid_argument);
  EXPECT_THROW(train_on_sphere(*f, ParamVector::Zero(2), gd(0.1, 5), 1.0), std::invalid_argument);
  EXPECT_THROW(optimizer_from_string("sgd"), std::invalid_argument);
}

}  // namespace
}  // namespace pinnscape
