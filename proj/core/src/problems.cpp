#include "pinnscape/problems.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <span>
#include <stdexcept>

#include "pinnscape/detail/network_jet.hpp"

namespace pinnscape {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr int kChunk = 250;

template <class T>
using Hess2 = std::array<Mat2<T>, 2>;  // [i][j][k] = d2 u_i / dX_j dX_k

/// div P for the displacement gradient and its spatial derivatives.
template <class T>
std::array<T, 2> piola_divergence(const Mat2<T>& grad_u, const Hess2<T>& hess_u, const Material& m,
                                  std::optional<double> clamp) {
  Mat2<ad::Dual<T, 2>> f;
  for (int i = 0; i < 2; ++i) {
    for (int j = 0; j < 2; ++j) {
      f[i][j].v = i == j ? T(grad_u[i][j] + 1.0) : grad_u[i][j];
      for (int k = 0; k < 2; ++k) f[i][j].d[k] = hess_u[i][j][k];
    }
  }
  const auto p = first_piola(f, m, clamp);
  return {p[0][0].d[0] + p[0][1].d[1], p[1][0].d[0] + p[1][1].d[1]};
}

template <class T>
std::array<ad::Dual2<T, 2>, 2> torsion_field(const ad::Dual2<T, 2>& x1, const ad::Dual2<T, 2>& x2, double alpha) {
  const auto s = x1 * x1 + x2 * x2;
  const auto amp = alpha * (s * (1.0 - s));
  return {-(amp * x2), amp * x1};
}

template <class S>
std::vector<S> scalars(std::span<const double> v) {
  return detail::to_scalars<S>(std::vector<double>(v.begin(), v.end()));
}

/// Pointwise integrand (1 x P) from the output jets of a chunk.
template <class S>
ad::Var<S> integrand_node(ad::Tape<S>& tape, const ObjectiveConfig& cfg, ad::Var<S> jets,
                          std::span<const double> src, int points) {
  using ad::slice;
  if (cfg.problem == Problem::Elliptic1D) {
    auto u = slice(jets, 0, 1, 0, points);
    auto f = tape.constant(1, points, scalars<S>(src));
    if (cfg.formulation == Formulation::Drm) {
      auto du = slice(jets, 0, 1, points, points);
      return 0.5 * (du * du) - f * u;
    }
    auto r = slice(jets, 0, 1, 2 * points, points) + f;
    return 0.5 * (r * r);
  }

  std::vector<double> b0(static_cast<std::size_t>(points)), b1(static_cast<std::size_t>(points));
  for (int p = 0; p < points; ++p) {
    b0[static_cast<std::size_t>(p)] = src[2 * static_cast<std::size_t>(p)];
    b1[static_cast<std::size_t>(p)] = src[2 * static_cast<std::size_t>(p) + 1];
  }
  const std::array<ad::Var<S>, 2> body{tape.constant(1, points, scalars<S>(b0)),
                                       tape.constant(1, points, scalars<S>(b1))};
  auto comp = [&](int i, int c) { return slice(jets, i, 1, c * points, points); };
  Mat2<ad::Var<S>> grad_u;
  for (int i = 0; i < 2; ++i) {
    for (int j = 0; j < 2; ++j) grad_u[i][j] = comp(i, 1 + j);
  }
  if (cfg.formulation == Formulation::Drm) {
    Mat2<ad::Var<S>> f = grad_u;
    f[0][0] = f[0][0] + 1.0;
    f[1][1] = f[1][1] + 1.0;
    auto w = neohookean_energy(f, cfg.material, cfg.j_clamp);
    return w - (body[0] * comp(0, 0) + body[1] * comp(1, 0));
  }
  Hess2<ad::Var<S>> hess_u;
  for (int i = 0; i < 2; ++i) {
    for (const auto& pr : detail::jet_pairs(2)) {
      hess_u[i][pr.a][pr.b] = comp(i, pr.comp);
      hess_u[i][pr.b][pr.a] = hess_u[i][pr.a][pr.b];
    }
  }
  const auto div = piola_divergence(grad_u, hess_u, cfg.material, cfg.j_clamp);
  auto r0 = div[0] + body[0];
  auto r1 = div[1] + body[1];
  return 0.5 * (r0 * r0 + r1 * r1);
}

template <class S>
struct Pass {
  S loss = S(0.0);
  std::vector<S> grad;
  std::vector<double> integrand;
};

/// Records the loss in chunks of kChunk points, each on its own tape, and
/// sums the chunk contributions in order.
template <class S>
Pass<S> run_pass(const ObjectiveConfig& cfg, const QuadratureGrid& grid, std::span<const double> sources,
                 const std::vector<S>& theta, bool gradient, bool keep_integrand) {
  const ParamLayout layout = param_layout(cfg.network);
  const int dim = grid.dim;
  const int src_comps = cfg.problem == Problem::Elliptic1D ? 1 : 2;
  const int total = static_cast<int>(grid.size());
  const int order = cfg.formulation == Formulation::Drm ? 1 : 2;
  Pass<S> pass;
  if (gradient) pass.grad.assign(layout.total, S(0.0));
  if (keep_integrand) pass.integrand.reserve(grid.size());
  for (int p0 = 0; p0 < total; p0 += kChunk) {
    const int n = std::min(kChunk, total - p0);
    const auto off = static_cast<std::size_t>(p0);
    const auto cnt = static_cast<std::size_t>(n);
    ad::Tape<S> tape;
    const auto net = detail::bind_network(tape, layout, theta, gradient);
    auto jets = detail::output_jets(tape, cfg.network, net,
                                    std::span<const double>(grid.coords).subspan(off * dim, cnt * dim), n, order);
    auto g = integrand_node(tape, cfg, jets, sources.subspan(off * src_comps, cnt * src_comps), n);
    auto w = tape.constant(1, n, scalars<S>(std::span<const double>(grid.weights).subspan(off, cnt)));
    auto loss = ad::sum(w * g);
    pass.loss = pass.loss + loss.value()[0];
    if (keep_integrand) {
      for (const auto& v : g.value()) pass.integrand.push_back(ad::value_of(v));
    }
    if (gradient) {
      tape.backward(loss);
      const auto part = detail::gather_adjoints(tape, layout, net);
      for (std::size_t k = 0; k < part.size(); ++k) pass.grad[k] = pass.grad[k] + part[k];
    }
  }
  return pass;
}

std::optional<std::size_t> first_nonfinite(const std::vector<double>& v) {
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (!std::isfinite(v[i])) return i;
  }
  return std::nullopt;
}

std::vector<double> to_vector(const ParamVector& theta) { return {theta.data(), theta.data() + theta.size()}; }

}  // namespace

double manufactured_1d(double x) { return -2.0 * x * std::sin(2.0 * kPi * x); }

double source_1d(double x) {
  return 8.0 * kPi * std::cos(2.0 * kPi * x) - 8.0 * kPi * kPi * x * std::sin(2.0 * kPi * x);
}

std::array<double, 2> manufactured_2d(double x1, double x2, double alpha) {
  const double s = x1 * x1 + x2 * x2;
  const double amp = alpha * s * (1.0 - s);
  return {-amp * x2, amp * x1};
}

std::array<double, 2> body_force_2d(double x1, double x2, const Material& material, double alpha) {
  const auto u = torsion_field(ad::make_variable<2>(x1, 0), ad::make_variable<2>(x2, 1), alpha);
  Mat2<double> grad_u;
  Hess2<double> hess_u;
  for (int i = 0; i < 2; ++i) {
    for (int j = 0; j < 2; ++j) {
      grad_u[i][j] = u[i].d[j];
      for (int k = 0; k < 2; ++k) hess_u[i][j][k] = u[i].hess(j, k);
    }
  }
  const auto div = piola_divergence(grad_u, hess_u, material, std::nullopt);
  return {-div[0], -div[1]};
}

NeohookeanState neohookean_state(const Eigen::Matrix2d& grad_u, const Material& material) {
  NeohookeanState s;
  s.F = Eigen::Matrix2d::Identity() + grad_u;
  s.J = s.F.determinant();
  Mat2<double> f{{{s.F(0, 0), s.F(0, 1)}, {s.F(1, 0), s.F(1, 1)}}};
  const auto p = first_piola(f, material);
  s.P << p[0][0], p[0][1], p[1][0], p[1][1];
  return s;
}

ObjectiveConfig ObjectiveConfig::reference(Problem problem, Formulation formulation) {
  ObjectiveConfig c;
  c.problem = problem;
  c.formulation = formulation;
  c.network = problem == Problem::Elliptic1D ? NetworkSpec::elliptic_1d() : NetworkSpec::neohookean_2d();
  return c;
}

ObjectiveKind ObjectiveConfig::kind() const {
  if (problem == Problem::Elliptic1D) return formulation == Formulation::Drm ? ObjectiveKind::Drm1D : ObjectiveKind::Pinn1D;
  return formulation == Formulation::Drm ? ObjectiveKind::Drm2D : ObjectiveKind::Pinn2D;
}

void ObjectiveConfig::validate() const {
  network.validate();
  const int dim = problem == Problem::Elliptic1D ? 1 : 2;
  if (network.input_dim != dim || network.output_dim != dim) {
    throw std::invalid_argument("objective: network dimensions do not match the problem");
  }
  if (grid_points < 1 || radial < 1 || angular < 1) throw std::invalid_argument("objective: grid sizes must be positive");
  if (batch < 1) throw std::invalid_argument("objective: batch must be positive");
  if (j_clamp && !(*j_clamp > 0.0)) throw std::invalid_argument("objective: J clamp must be positive");
  if (!(material.mu > 0.0) || !(material.lambda >= 0.0)) throw std::invalid_argument("objective: invalid material");
  if (!std::isfinite(alpha) || !std::isfinite(source_scale)) throw std::invalid_argument("objective: non-finite constant");
}

std::string to_string(Problem p) { return p == Problem::Elliptic1D ? "elliptic_1d" : "neohookean_2d"; }
std::string to_string(Formulation f) { return f == Formulation::Drm ? "drm" : "pinn"; }
std::string to_string(IntegrationMode m) { return m == IntegrationMode::FixedGrid ? "fixed_grid" : "monte_carlo"; }

std::string to_string(ObjectiveKind k) {
  switch (k) {
    case ObjectiveKind::Drm1D: return "DRM1D";
    case ObjectiveKind::Pinn1D: return "PINN1D";
    case ObjectiveKind::Drm2D: return "DRM2D";
    case ObjectiveKind::Pinn2D: return "PINN2D";
  }
  return "";
}

Problem problem_from_string(const std::string& s) {
  if (s == "elliptic_1d") return Problem::Elliptic1D;
  if (s == "neohookean_2d") return Problem::Neohookean2D;
  throw std::invalid_argument("unknown problem: " + s);
}

Formulation formulation_from_string(const std::string& s) {
  if (s == "drm") return Formulation::Drm;
  if (s == "pinn") return Formulation::Pinn;
  throw std::invalid_argument("unknown formulation: " + s);
}

IntegrationMode integration_mode_from_string(const std::string& s) {
  if (s == "fixed_grid") return IntegrationMode::FixedGrid;
  if (s == "monte_carlo") return IntegrationMode::MonteCarlo;
  throw std::invalid_argument("unknown integration mode: " + s);
}

Objective::Objective(ObjectiveConfig config) : config_(std::move(config)) {
  config_.validate();
  dim_ = parameter_count(config_.network);
  grid_ = config_.problem == Problem::Elliptic1D ? midpoint_grid(config_.grid_points)
                                                  : polar_grid(config_.radial, config_.angular);
  fixed_ = prepare(grid_);
}

Objective::Sources Objective::prepare(QuadratureGrid grid) const {
  Sources s;
  const std::size_t n = grid.size();
  if (config_.problem == Problem::Elliptic1D) {
    s.values.resize(n);
    for (std::size_t i = 0; i < n; ++i) s.values[i] = config_.source_scale * source_1d(grid.point(i)[0]);
  } else {
    s.values.resize(2 * n);
    for (std::size_t i = 0; i < n; ++i) {
      const auto x = grid.point(i);
      const auto b = body_force_2d(x[0], x[1], config_.material, config_.alpha);
      s.values[2 * i] = config_.source_scale * b[0];
      s.values[2 * i + 1] = config_.source_scale * b[1];
    }
  }
  s.grid = std::move(grid);
  return s;
}

namespace {

void check_theta(const ParamVector& theta, std::size_t dim) {
  if (static_cast<std::size_t>(theta.size()) != dim) {
    throw std::invalid_argument("objective: parameter vector has the wrong dimension");
  }
}

}  // namespace

double Objective::value(const ParamVector& theta) const {
  check_theta(theta, dim_);
  return run_pass<double>(config_, fixed_.grid, fixed_.values, to_vector(theta), false, false).loss;
}

double Objective::value_on(const ParamVector& theta, const QuadratureGrid& grid) const {
  check_theta(theta, dim_);
  if (grid.dim != config_.network.input_dim) throw std::invalid_argument("objective: grid dimension mismatch");
  const Sources s = prepare(grid);
  return run_pass<double>(config_, s.grid, s.values, to_vector(theta), false, false).loss;
}

namespace {

double gradient_pass(const ObjectiveConfig& cfg, const QuadratureGrid& grid, const std::vector<double>& sources,
                     const ParamVector& theta, ParamVector& grad) {
  auto pass = run_pass<double>(cfg, grid, sources, to_vector(theta), true, true);
  if (!std::isfinite(pass.loss)) {
    const auto where = first_nonfinite(pass.integrand);
    throw NonFiniteObjective(where ? "objective: non-finite integrand at quadrature point " + std::to_string(*where)
                                   : "objective: non-finite loss",
                             where);
  }
  grad = Eigen::Map<const Eigen::VectorXd>(pass.grad.data(), static_cast<Eigen::Index>(pass.grad.size()));
  if (!grad.allFinite()) throw NonFiniteObjective("objective: non-finite gradient");
  return pass.loss;
}

}  // namespace

double Objective::value_and_gradient(const ParamVector& theta, ParamVector& grad) const {
  check_theta(theta, dim_);
  return gradient_pass(config_, fixed_.grid, fixed_.values, theta, grad);
}

void Objective::hessian_block(const ParamVector& theta, const Eigen::MatrixXd& directions,
                              Eigen::MatrixXd& out) const {
  using S = ad::Fwd<kHvpLanes>;
  check_theta(theta, dim_);
  const auto lanes = directions.cols();
  if (lanes > kHvpLanes || directions.rows() != theta.size()) {
    throw std::invalid_argument("hessian_block: bad direction block");
  }
  std::vector<S> seed(dim_);
  for (std::size_t i = 0; i < dim_; ++i) {
    const auto ii = static_cast<Eigen::Index>(i);
    seed[i].v = theta[ii];
    for (Eigen::Index k = 0; k < lanes; ++k) seed[i].t[static_cast<std::size_t>(k)] = directions(ii, k);
  }
  const auto pass = run_pass<S>(config_, fixed_.grid, fixed_.values, seed, true, false);
  if (!std::isfinite(pass.loss.v)) throw NonFiniteObjective("objective: non-finite loss in Hessian product");
  out.resize(static_cast<Eigen::Index>(dim_), lanes);
  for (std::size_t i = 0; i < dim_; ++i) {
    for (Eigen::Index k = 0; k < lanes; ++k) {
      out(static_cast<Eigen::Index>(i), k) = pass.grad[i].t[static_cast<std::size_t>(k)];
    }
  }
}

QuadratureGrid Objective::sample_batch(Rng& rng) const {
  return config_.problem == Problem::Elliptic1D ? sample_interval(config_.batch, rng)
                                                : sample_disk(config_.batch, rng);
}

double Objective::sampled_value(const ParamVector& theta, Rng& rng) const {
  if (!stochastic()) return value(theta);
  check_theta(theta, dim_);
  const Sources s = prepare(sample_batch(rng));
  return run_pass<double>(config_, s.grid, s.values, to_vector(theta), false, false).loss;
}

double Objective::sampled_value_and_gradient(const ParamVector& theta, ParamVector& grad, Rng& rng) const {
  if (!stochastic()) return value_and_gradient(theta, grad);
  check_theta(theta, dim_);
  const Sources s = prepare(sample_batch(rng));
  return gradient_pass(config_, s.grid, s.values, theta, grad);
}

std::vector<double> Objective::integrand(const ParamVector& theta) const {
  check_theta(theta, dim_);
  return run_pass<double>(config_, fixed_.grid, fixed_.values, to_vector(theta), false, true).integrand;
}

double Objective::min_jacobian(const ParamVector& theta) const {
  if (config_.problem != Problem::Neohookean2D) throw std::logic_error("min_jacobian: 2D objectives only");
  check_theta(theta, dim_);
  const ParamLayout layout = param_layout(config_.network);
  const int points = static_cast<int>(grid_.size());
  ad::Tape<double> tape;
  const auto net = detail::bind_network(tape, layout, to_vector(theta), false);
  const auto& jets = detail::output_jets(tape, config_.network, net, grid_.coords, points, 1).value();
  const auto row = static_cast<std::size_t>(detail::jet_components(2, 1) * points);
  auto at = [&](int i, int c, int p) { return jets[static_cast<std::size_t>(i) * row + static_cast<std::size_t>(c * points + p)]; };
  double lo = std::numeric_limits<double>::infinity();
  for (int p = 0; p < points; ++p) {
    const double j = (1.0 + at(0, 1, p)) * (1.0 + at(1, 2, p)) - at(0, 2, p) * at(1, 1, p);
    lo = std::min(lo, j);
  }
  return lo;
}

Objective Objective::with_clamp(std::optional<double> clamp) const {
  ObjectiveConfig c = config_;
  c.j_clamp = clamp;
  return Objective(std::move(c));
}

QuadratureGrid verification_points(Problem problem, std::uint64_t seed) {
  return problem == Problem::Elliptic1D ? uniform_test_grid(201) : disk_test_cloud(500, seed);
}

double max_pointwise_error(const Objective& objective, const ParamVector& theta, std::uint64_t seed) {
  const auto& cfg = objective.config();
  const QuadratureGrid pts = verification_points(cfg.problem, seed);
  const Eigen::MatrixXd u = field_on_grid(cfg.network, theta, pts);
  double worst = 0.0;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    const auto x = pts.point(i);
    const auto r = static_cast<Eigen::Index>(i);
    double err = 0.0;
    if (cfg.problem == Problem::Elliptic1D) {
      err = std::abs(u(r, 0) - manufactured_1d(x[0]));
    } else {
      const auto m = manufactured_2d(x[0], x[1], cfg.alpha);
      err = std::hypot(u(r, 0) - m[0], u(r, 1) - m[1]);
    }
    worst = std::max(worst, err);
  }
  return worst;
}

double manufactured_loss(const Objective& objective) {
  const auto& cfg = objective.config();
  const auto& grid = objective.grid();
  const double s = cfg.source_scale;
  double total = 0.0;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const auto x = grid.point(i);
    double g = 0.0;
    if (cfg.problem == Problem::Elliptic1D) {
      const double t = 2.0 * kPi * x[0];
      const double u = manufactured_1d(x[0]);
      const double du = -2.0 * std::sin(t) - 4.0 * kPi * x[0] * std::cos(t);
      const double f = s * source_1d(x[0]);
      g = cfg.formulation == Formulation::Drm ? 0.5 * du * du - f * u
                                              : 0.5 * (f - source_1d(x[0])) * (f - source_1d(x[0]));
    } else {
      const auto u = torsion_field(ad::make_variable<2>(x[0], 0), ad::make_variable<2>(x[1], 1), cfg.alpha);
      const auto b0 = body_force_2d(x[0], x[1], cfg.material, cfg.alpha);
      const std::array<double, 2> b{s * b0[0], s * b0[1]};
      Mat2<double> grad_u;
      Hess2<double> hess_u;
      for (int a = 0; a < 2; ++a) {
        for (int j = 0; j < 2; ++j) {
          grad_u[a][j] = u[a].d[j];
          for (int k = 0; k < 2; ++k) hess_u[a][j][k] = u[a].hess(j, k);
        }
      }
      if (cfg.formulation == Formulation::Drm) {
        const Mat2<double> f{{{1.0 + grad_u[0][0], grad_u[0][1]}, {grad_u[1][0], 1.0 + grad_u[1][1]}}};
        g = neohookean_energy(f, cfg.material, cfg.j_clamp) - b[0] * u[0].v - b[1] * u[1].v;
      } else {
        const auto div = piola_divergence(grad_u, hess_u, cfg.material, cfg.j_clamp);
        g = 0.5 * ((div[0] + b[0]) * (div[0] + b[0]) + (div[1] + b[1]) * (div[1] + b[1]));
      }
    }
    total += grid.weights[i] * g;
  }
  return total;
}

double integrand_variance(const Objective& objective, const ParamVector& theta) {
  const auto g = objective.integrand(theta);
  const auto& w = objective.grid().weights;
  const double total = objective.grid().total_weight();
  double mean = 0.0;
  double second = 0.0;
  for (std::size_t i = 0; i < g.size(); ++i) {
    mean += w[i] * g[i];
    second += w[i] * g[i] * g[i];
  }
  mean /= total;
  second /= total;
  return std::max(0.0, second - mean * mean);
}

}  // namespace pinnscape
