#include <cmath>
#include <limits>
#include <numbers>

#include <gtest/gtest.h>

#include "pinnscape/landscape.hpp"
#include "pinnscape/parallel.hpp"

namespace pinnscape {
namespace {

constexpr double kPi = std::numbers::pi;

// (|theta|^2 - 1)^2: a ring of minima.
class Ring final : public Differentiable {
 public:
  std::size_t dimension() const override { return 2; }
  double value(const ParamVector& t) const override {
    const double s = t.squaredNorm() - 1.0;
    return s * s;
  }
  double value_and_gradient(const ParamVector& t, ParamVector& g) const override {
    const double s = t.squaredNorm() - 1.0;
    g = 4.0 * s * t;
    return s * s;
  }
  void hessian_block(const ParamVector& t, const Eigen::MatrixXd& d, Eigen::MatrixXd& out) const override {
    const double s = t.squaredNorm() - 1.0;
    const Eigen::Matrix2d h = 4.0 * s * Eigen::Matrix2d::Identity() + 8.0 * t * t.transpose();
    out = h * d;
  }
};

Eigen::MatrixXd random_orthogonal(int n, Rng& rng) {
  Eigen::MatrixXd m(n, n);
  for (int i = 0; i < n * n; ++i) m.data()[i] = rng.normal();
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(m);
  return qr.householderQ();
}

TEST(Landscape, MliEndpointsAndConvexity) {
  const Eigen::MatrixXd a = Eigen::Vector3d(1.0, 4.0, 9.0).asDiagonal();
  const auto f = make_quadratic(a);
  const ParamVector xi = Eigen::Vector3d(1.0, -2.0, 0.5);
  const ParamVector xf = ParamVector::Zero(3);
  const auto r = mli_scan(value_evaluator(*f), xi, xf);
  ASSERT_EQ(r.profile.t.size(), 101u);
  EXPECT_EQ(r.profile.loss.front(), f->value(xi));
  EXPECT_EQ(r.profile.loss.back(), f->value(xf));
  EXPECT_TRUE(r.monotone);
  EXPECT_LE(r.max_relative_increase, 0.0);
}

TEST(Landscape, MliDetectsIncrease) {
  const auto f = make_quadratic(Eigen::MatrixXd::Identity(2, 2));
  const ParamVector xi = Eigen::Vector2d(1.0, 0.0);
  const ParamVector xf = Eigen::Vector2d(-2.0, 0.0);
  EXPECT_FALSE(mli_scan(value_evaluator(*f), xi, xf).monotone);
}

TEST(Landscape, MliNonFiniteBreaksVerdict) {
  const Evaluator loss = [](const ParamVector& t, std::size_t) {
    return t[0] < 0.5 && t[0] > 0.4 ? std::numeric_limits<double>::quiet_NaN() : 1.0 - t[0];
  };
  const auto r = mli_scan(loss, ParamVector::Zero(1), ParamVector::Ones(1));
  EXPECT_FALSE(r.monotone);
  EXPECT_LT(std::count(r.profile.finite.begin(), r.profile.finite.end(), 1), 101);
}

TEST(Landscape, HessianWalkFollowsNullSpace) {
  Rng rng(5);
  const int n = 6;
  const Eigen::MatrixXd q = random_orthogonal(n, rng);
  const Eigen::VectorXd lambda = (Eigen::VectorXd(n) << 0.0, 0.0, 1.0, 2.0, 3.0, 5.0).finished();
  const Eigen::MatrixXd a = q * lambda.asDiagonal() * q.transpose();
  const auto f = make_quadratic(0.5 * (a + a.transpose()));
  ParamVector start(n);
  for (int i = 0; i < n; ++i) start[i] = rng.normal();
  HessianWalkOptions opt;
  opt.steps = 20;
  const auto w = hessian_walk(*f, start, opt);
  ASSERT_TRUE(w.completed);
  EXPECT_LT(w.max_abs_loss_change(), 1e-12);
  EXPECT_NEAR(w.distance.back(), 20.0, 1e-9);
  const ParamVector disp = w.final_params - start;
  for (int k = 2; k < n; ++k) EXPECT_LT(std::abs(q.col(k).dot(disp)), 1e-8) << k;
}

TEST(Landscape, HessianWalkSingleNullAxisMovesStraight) {
  const auto f = make_quadratic(Eigen::Vector3d(0.0, 1.0, 2.0).asDiagonal());
  const ParamVector start = Eigen::Vector3d(0.3, 0.0, 0.0);
  HessianWalkOptions opt;
  opt.steps = 5;
  opt.step_size = 0.5;
  const auto w = hessian_walk(*f, start, opt);
  EXPECT_EQ(w.max_abs_loss_change(), 0.0);
  EXPECT_NEAR(w.final_params[0], 2.8, 1e-14);
  for (std::size_t t = 0; t < w.distance.size(); ++t) EXPECT_NEAR(w.distance[t], 0.5 * t, 1e-14);
}

TEST(Landscape, HessianWalkZeroStep) {
  const auto f = make_quadratic(Eigen::Vector2d(0.0, 1.0).asDiagonal());
  const ParamVector start = Eigen::Vector2d(1.0, 1.0);
  HessianWalkOptions opt;
  opt.steps = 3;
  opt.step_size = 0.0;
  const auto w = hessian_walk(*f, start, opt);
  EXPECT_EQ(w.final_params, start);
  EXPECT_EQ(w.max_abs_loss_change(), 0.0);
}

TEST(Landscape, BezierEndpointsAndMidpointControl) {
  Rng rng(2);
  ParamVector a(4), b(4), p(4);
  for (int i = 0; i < 4; ++i) {
    a[i] = rng.normal();
    b[i] = rng.normal();
    p[i] = rng.normal();
  }
  const BezierPath path{a, b, p};
  EXPECT_EQ(path.point(0.0), a);
  EXPECT_EQ(path.point(1.0), b);
  const auto line = BezierPath::straight(a, b);
  for (double t : {0.1, 0.37, 0.5, 0.9}) EXPECT_LT((line.point(t) - (a + t * (b - a))).norm(), 1e-14);
}

TEST(Landscape, BezierObjectiveGradientMatchesFiniteDifferences) {
  const Ring ring;
  const BezierObjective obj(ring, Eigen::Vector2d(1.0, 0.0), Eigen::Vector2d(0.0, 1.0), 9);
  const ParamVector p = Eigen::Vector2d(0.3, 0.8);
  ParamVector g;
  obj.value_and_gradient(p, g);
  for (int i = 0; i < 2; ++i) {
    ParamVector e = ParamVector::Zero(2);
    e[i] = 1e-6;
    const double fd = (obj.value(p + e) - obj.value(p - e)) / 2e-6;
    EXPECT_NEAR(g[i], fd, 1e-7);
  }
}

TEST(Landscape, ModeConnectFindsCurvedPathOnRing) {
  const Ring ring;
  ModeConnectOptions opt;
  opt.optimizer = OptimizerConfig::adam(1e-2, 2000);
  const auto r = mode_connect(ring, Eigen::Vector2d(1.0, 0.0), Eigen::Vector2d(0.0, 1.0), opt);
  EXPECT_NEAR(r.linear_barrier, 0.25, 1e-12);
  EXPECT_LT(r.objective, 1e-2 * r.initial_objective);
  EXPECT_LT(r.bezier_max_deviation, 0.1 * r.linear_barrier);
  EXPECT_EQ(r.path.point(0.0), Eigen::Vector2d(1.0, 0.0));
}

TEST(Landscape, ModeConnectIdenticalEndpointsHasNoBarrier) {
  const Ring ring;
  ModeConnectOptions opt;
  opt.optimizer = OptimizerConfig::adam(1e-2, 10);
  const ParamVector a = Eigen::Vector2d(0.6, 0.8);
  const auto r = mode_connect(ring, a, a, opt);
  EXPECT_NEAR(r.linear_barrier, 0.0, 1e-30);
  EXPECT_NEAR(r.initial_objective, 0.0, 1e-30);
}

TEST(Landscape, PlaneScanSinglePointIsCenter) {
  const auto f = make_quadratic(Eigen::MatrixXd::Identity(3, 3));
  const ParamVector c = Eigen::Vector3d(1.0, 2.0, 3.0);
  const auto g = plane_scan(value_evaluator(*f), c, Eigen::Vector3d(1, 0, 0), Eigen::Vector3d(0, 1, 0), -1, 1, 1);
  ASSERT_EQ(g.loss.size(), 1);
  EXPECT_EQ(g.loss(0, 0), f->value(c));
}

TEST(Landscape, PlaneScanOfQuadraticAlongEigendirections) {
  const auto f = make_quadratic(Eigen::Vector3d(2.0, 8.0, 1.0).asDiagonal());
  const auto g = plane_scan(value_evaluator(*f), ParamVector::Zero(3), Eigen::Vector3d(3, 0, 0),
                            Eigen::Vector3d(0, -0.5, 0), -1, 1, 21);
  EXPECT_NEAR(g.dir_k.norm(), 1.0, 1e-15);
  for (int m = 0; m < 21; ++m) {
    for (int n = 0; n < 21; ++n) {
      const double ek = g.eps_k[m];
      const double ej = g.eps_j[n];
      EXPECT_NEAR(g.loss(m, n), 0.5 * (2.0 * ek * ek + 8.0 * ej * ej), 1e-14);
    }
  }
  // Axis ratio sqrt(2 / 8): the contour through e_k = 1 meets the j axis at 1/2.
  EXPECT_NEAR(g.loss(20, 10), g.loss(10, 15), 1e-14);
  EXPECT_EQ(g.finite_count(), 441u);
}

TEST(Landscape, PlaneScanMasksNonFinite) {
  const Evaluator loss = [](const ParamVector& t, std::size_t) {
    return t[0] > 0.5 ? std::numeric_limits<double>::infinity() : t[0];
  };
  const auto g = plane_scan(loss, ParamVector::Zero(2), Eigen::Vector2d(1, 0), Eigen::Vector2d(0, 1), -1, 1, 5);
  EXPECT_EQ(g.finite_count(), 20u);
  for (int n = 0; n < 5; ++n) EXPECT_EQ(g.finite[4 * 5 + n], 0);
}

TEST(Landscape, PlaneScanIsThreadIndependent) {
  const Objective obj(ObjectiveConfig::reference(Problem::Elliptic1D, Formulation::Drm));
  const ParamVector c = init_params(obj.network(), 1);
  Rng rng(4);
  const auto vk = random_direction(c.size(), rng);
  const auto vj = random_direction(c.size(), rng);
  set_thread_count(1);
  const auto a = plane_scan(value_evaluator(obj), c, vk, vj, -1, 1, 5);
  set_thread_count(4);
  const auto b = plane_scan(value_evaluator(obj), c, vk, vj, -1, 1, 5);
  set_thread_count(1);
  EXPECT_EQ(a.loss, b.loss);
}

TEST(Landscape, SpectrumOfQuadraticIsConstant) {
  const Eigen::Vector4d lambda(-1.0, 1e-9, 2.0, 7.0);
  const auto f = make_quadratic(lambda.asDiagonal());
  TrajectoryRecord traj(4);
  Rng rng(8);
  for (int t = 0; t < 7; ++t) {
    ParamVector x(4);
    for (int i = 0; i < 4; ++i) x[i] = rng.normal();
    traj.append(x, f->value(x));
  }
  const auto h = spectrum_evolution(*f, traj, 3);
  EXPECT_EQ(h.epochs, (std::vector<int>{0, 3, 6}));
  for (const auto& v : h.eigenvalues) {
    ASSERT_EQ(v.size(), 4);
    EXPECT_LT((v - lambda).norm(), 1e-12);
  }
  EXPECT_EQ(h.lambda_min.front(), h.lambda_min.back());
  EXPECT_NEAR(near_zero_fraction(lambda, 1e-6), 0.25, 1e-15);
  const auto hist = spectrum_histogram(h, 20);
  for (Eigen::Index s = 0; s < hist.counts.cols(); ++s) EXPECT_EQ(hist.counts.col(s).sum(), 4.0);
  EXPECT_EQ(spectrum_endpoints(*f, traj).epochs, (std::vector<int>{0, 6}));
}

BasisSet sine_basis(const QuadratureGrid& grid, int n) {
  BasisSet b;
  b.values.resize(static_cast<Eigen::Index>(grid.size()), n);
  for (std::size_t p = 0; p < grid.size(); ++p) {
    for (int k = 0; k < n; ++k) {
      b.values(static_cast<Eigen::Index>(p), k) = std::sqrt(2.0) * std::sin((k + 1) * kPi * grid.point(p)[0]);
    }
  }
  return b;
}

TEST(Landscape, GramOfOrthonormalBasisIsIdentity) {
  const auto grid = midpoint_grid(100);
  const auto g = gram_rank(sine_basis(grid, 20), grid.weights, 1e-12);
  EXPECT_LT((g.gram - Eigen::MatrixXd::Identity(20, 20)).cwiseAbs().maxCoeff(), 1e-10);
  EXPECT_EQ(g.rank, 20);
  EXPECT_FALSE(null_direction(NetworkSpec::elliptic_1d(), sine_basis(grid, 20), grid.weights, 1e-12));
}

TEST(Landscape, DuplicatedColumnLosesOneRank) {
  const auto grid = midpoint_grid(100);
  BasisSet b = sine_basis(grid, 20);
  b.values.col(19) = b.values.col(4);
  const auto g = gram_rank(b, grid.weights, 1e-12);
  EXPECT_EQ(g.rank, 19);
  const auto v = null_direction(NetworkSpec::elliptic_1d(), b, grid.weights, 1e-12);
  ASSERT_TRUE(v);
  const auto layout = param_layout(NetworkSpec::elliptic_1d());
  const auto delta = v->segment(static_cast<Eigen::Index>(layout.outer.offset), 20);
  EXPECT_NEAR(std::abs(delta[4]), 1.0 / std::sqrt(2.0), 1e-12);
  EXPECT_NEAR(delta[4] + delta[19], 0.0, 1e-12);
  EXPECT_LT(delta.head(4).norm() + delta.segment(5, 14).norm(), 1e-12);
  EXPECT_EQ(v->head(static_cast<Eigen::Index>(layout.inner_size)).norm(), 0.0);
}

// Copies neuron `from` of the last hidden layer onto neuron `to`.
ParamVector duplicate_neuron(const NetworkSpec& spec, ParamVector theta, int from, int to) {
  const auto layout = param_layout(spec);
  const auto& w = layout.weights.back();
  const auto& b = layout.biases.back();
  for (int c = 0; c < w.cols; ++c) {
    theta[static_cast<Eigen::Index>(w.offset + static_cast<std::size_t>(to * w.cols + c))] =
        theta[static_cast<Eigen::Index>(w.offset + static_cast<std::size_t>(from * w.cols + c))];
  }
  theta[static_cast<Eigen::Index>(b.offset + static_cast<std::size_t>(to))] =
      theta[static_cast<Eigen::Index>(b.offset + static_cast<std::size_t>(from))];
  return theta;
}

TEST(Landscape, TrenchOfDuplicatedNeuronLeavesFieldAndLossUnchanged) {
  const Objective obj(ObjectiveConfig::reference(Problem::Elliptic1D, Formulation::Pinn));
  const auto& spec = obj.network();
  const ParamVector theta = duplicate_neuron(spec, init_params(spec, 3), 2, 11);
  const auto basis = extract_basis(spec, theta, obj.grid(), 2);
  ASSERT_EQ(basis.derivatives.size(), 2u);
  const auto v = null_direction(spec, basis, obj.grid().weights, 1e-12);
  ASSERT_TRUE(v);
  EXPECT_LT(field_change(spec, theta, 10.0 * *v, obj.grid()), 1e-12);
  const auto line = line_scan(value_evaluator(obj), theta, *v, -10.0, 10.0, 21);
  EXPECT_LT(relative_variation(line), 1e-12);

  ParamVector moved = theta;
  const auto& b = param_layout(spec).biases.back();
  moved[static_cast<Eigen::Index>(b.offset + 11)] += 0.1;
  EXPECT_GT(field_change(spec, moved, 10.0 * *v, obj.grid()), 1e-6);
}

TEST(Landscape, PcaOfLinearTrajectory) {
  const ParamVector x0 = Eigen::Vector3d(1.0, 2.0, 3.0);
  const ParamVector d = Eigen::Vector3d(0.0, -3.0, 4.0);
  Eigen::MatrixXd theta(3, 11);
  for (int t = 0; t <= 10; ++t) theta.col(t) = x0 + t * d;
  const auto p = pca_trajectory(theta, 2);
  EXPECT_NEAR(p.explained[0], 1.0, 1e-12);
  EXPECT_NEAR(std::abs(p.components.col(0).dot(d.normalized())), 1.0, 1e-12);
  EXPECT_LT((p.mean - (x0 + 5.0 * d)).norm(), 1e-12);
  EXPECT_NEAR(p.coordinates(0, 10) - p.coordinates(0, 0), 10.0 * d.norm() * (p.components.col(0).dot(d) > 0 ? 1 : -1),
              1e-10);
}

TEST(Landscape, PcaFractionsAreOrdered) {
  Rng rng(6);
  Eigen::MatrixXd theta(8, 30);
  for (int i = 0; i < theta.size(); ++i) theta.data()[i] = rng.normal() * (1 + i % 8);
  const auto p = pca_trajectory(theta, 5);
  double sum = 0.0;
  for (Eigen::Index k = 0; k < p.explained.size(); ++k) {
    EXPECT_GE(p.explained[k], 0.0);
    EXPECT_LE(p.explained[k], 1.0);
    if (k > 0) EXPECT_LE(p.explained[k], p.explained[k - 1]);
    sum += p.explained[k];
  }
  EXPECT_LE(sum, 1.0 + 1e-12);
  const Eigen::MatrixXd gram = p.components.transpose() * p.components;
  EXPECT_LT((gram - Eigen::MatrixXd::Identity(5, 5)).norm(), 1e-12);
}

TEST(Landscape, PcaOfConstantTrajectoryIsEmpty) {
  const Eigen::MatrixXd theta = Eigen::MatrixXd::Ones(4, 6);
  const auto p = pca_trajectory(theta, 2);
  EXPECT_EQ(p.components.cols(), 0);
  EXPECT_EQ(p.explained.size(), 0);
}

TrajectoryRecord polynomial_trajectory(const ParamVector& d, int steps, int power) {
  TrajectoryRecord traj(static_cast<std::size_t>(d.size()));
  for (int t = 0; t <= steps; ++t) traj.append(std::pow(static_cast<double>(t), power) * d, 0.0);
  return traj;
}

TEST(Landscape, AccelerationOfLinearAndQuadraticPaths) {
  const ParamVector d = Eigen::Vector2d(3.0, 4.0);
  const auto lin = acceleration_series(polynomial_trajectory(d, 10, 1), 1.0, false);
  ASSERT_EQ(lin.value.size(), 9u);
  for (double a : lin.value) EXPECT_EQ(a, 0.0);
  const auto quad = acceleration_series(polynomial_trajectory(d, 10, 2), 1.0, false);
  for (double a : quad.value) EXPECT_NEAR(a, 10.0, 1e-12);
  const auto norm = acceleration_series(polynomial_trajectory(d, 10, 2), 1.0, true);
  // velocity (t+1)^2 - t^2 = 2t + 1 times |d|
  for (std::size_t i = 0; i < norm.value.size(); ++i) {
    const double v = (2.0 * norm.epochs[i] + 1.0) * 5.0;
    EXPECT_NEAR(norm.value[i], 10.0 / (v * v), 1e-14);
  }
  const auto still = acceleration_series(polynomial_trajectory(d, 4, 0), 0.5, true);
  for (auto ok : still.valid) EXPECT_EQ(ok, 0);
}

TEST(Landscape, ConvergenceEpoch) {
  EXPECT_EQ(convergence_epoch({5.0, 3.0, 2.0, 1.0, 1.0, 1.0}, 1e-9), 3);
  EXPECT_EQ(convergence_epoch({1.0}, 1e-9), 0);
}

TEST(Landscape, StuckRuleUsesBestRunBand) {
  ProbeMinimaResult r;
  auto run = [](double last, std::vector<double> tail, bool aborted = false) {
    ProbeRun p;
    p.width = 5;
    p.losses = std::move(tail);
    p.losses.push_back(last);
    p.final_loss = last;
    p.aborted = aborted;
    return p;
  };
  r.runs.push_back(run(1.0, {1.02, 0.99}));
  r.runs.push_back(run(1.2, {1.2, 1.2}));
  r.runs.push_back(run(1.5, {1.5, 1.5}));
  r.runs.push_back(run(9.0, {9.0}, true));
  classify_stuck(r, {5}, 3, 10.0);
  EXPECT_NEAR(r.band[0], 0.03, 1e-12);
  EXPECT_FALSE(r.runs[0].stuck);
  EXPECT_FALSE(r.runs[1].stuck);
  EXPECT_TRUE(r.runs[2].stuck);
  EXPECT_FALSE(r.runs[3].stuck);
}

TEST(Landscape, ProbeWithOneTrialReproducesTrain) {
  ProbeMinimaConfig c;
  c.objective = ObjectiveConfig::reference(Problem::Elliptic1D, Formulation::Pinn);
  c.widths = {20};
  c.optimizers = {OptimizerKind::Gd};
  c.trials = 1;
  c.optimizer = OptimizerConfig::gd(1e-3, 30);
  c.seed = 77;
  const auto r = probe_minima(c);
  ASSERT_EQ(r.runs.size(), 1u);
  const Objective obj(c.objective);
  const auto direct = train(obj, init_params(obj.network(), 77), OptimizerConfig::gd(1e-3, 30));
  EXPECT_EQ(r.runs[0].losses, direct.trajectory.losses());
}

TEST(Landscape, IntrinsicDimensionSharesSubspacesAcrossObjectives) {
  IntrinsicDimConfig c;
  c.dims = {3};
  c.optimizer = OptimizerConfig::adam(1e-3, 3);
  c.full_epochs = 3;
  c.seed = 4;
  c.objective = ObjectiveConfig::reference(Problem::Elliptic1D, Formulation::Drm);
  const auto drm = intrinsic_dimension(c);
  ASSERT_EQ(drm.runs.size(), 1u);
  EXPECT_EQ(drm.full.dim, 480);
  EXPECT_EQ(drm.runs[0].losses.size(), 4u);
  // Both start from the same offset, so the initial losses agree.
  EXPECT_EQ(drm.runs[0].losses.front(), drm.full.losses.front());
}

TEST(Landscape, GoldilocksRunsStayOnSpheres) {
  GoldilocksConfig c;
  c.objective = ObjectiveConfig::reference(Problem::Elliptic1D, Formulation::Pinn);
  c.radii = {0.5, 10.0};
  c.trials = 2;
  c.optimizer = OptimizerConfig::adam(1e-3, 5);
  const auto g = goldilocks_sweep(c);
  ASSERT_EQ(g.final_loss.rows(), 2);
  ASSERT_EQ(g.final_loss.cols(), 2);
  EXPECT_TRUE(g.final_loss.allFinite());
}

TEST(Landscape, RadiusTrackScalesTheInitialVector) {
  RadiusTrackConfig c;
  c.objective = ObjectiveConfig::reference(Problem::Elliptic1D, Formulation::Drm);
  c.scales = {0.01, 1.0};
  c.optimizer = OptimizerConfig::adam(1e-3, 2);
  const auto r = radius_track(c);
  ASSERT_EQ(r.size(), 2u);
  EXPECT_NEAR(r[0].radii.front() * 100.0, r[1].radii.front(), 1e-12);
}

}  // namespace
}  // namespace pinnscape
