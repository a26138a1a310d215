#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "pinnscape/autodiff/dual.hpp"
#include "pinnscape/autodiff/objective.hpp"
#include "pinnscape/autodiff/tape.hpp"
#include "pinnscape/grid.hpp"
#include "pinnscape/network.hpp"
#include "pinnscape/rng.hpp"

namespace pinnscape {

enum class Problem { Elliptic1D, Neohookean2D };
enum class Formulation { Drm, Pinn };
enum class IntegrationMode { FixedGrid, MonteCarlo };

struct Material {
  double mu = 1.0;      // l1
  double lambda = 0.25; // l2
  bool operator==(const Material&) const = default;
};

/// u(x) = -2 x sin(2 pi x)
double manufactured_1d(double x);
/// f(x) = -u''(x) = 8 pi cos(2 pi x) - 8 pi^2 x sin(2 pi x)
double source_1d(double x);

/// Torsional field alpha r^2 (1 - r^2) [-X2, X1].
std::array<double, 2> manufactured_2d(double x1, double x2, double alpha = 1.0);
/// B_i = -dP_ij/dX_j for the manufactured field.
std::array<double, 2> body_force_2d(double x1, double x2, const Material& material = {}, double alpha = 1.0);

struct NeohookeanState {
  Eigen::Matrix2d F;
  double J = 1.0;
  Eigen::Matrix2d P;
};

/// F = I + grad_u, J = det F, P = mu (F - F^-T) + lambda log(J) F^-T.
NeohookeanState neohookean_state(const Eigen::Matrix2d& grad_u, const Material& material = {});

template <class T>
using Mat2 = std::array<std::array<T, 2>, 2>;

/// First Piola stress for any scalar type supporting the ad:: operations.
/// With a clamp c, J is replaced by max(J, c) inside the logarithm only.
template <class T>
Mat2<T> first_piola(const Mat2<T>& f, const Material& m, std::optional<double> clamp = std::nullopt) {
  const T det = f[0][0] * f[1][1] - f[0][1] * f[1][0];
  const T inv = ad::reciprocal(det);
  const Mat2<T> finv_t{{{f[1][1] * inv, -(f[1][0] * inv)}, {-(f[0][1] * inv), f[0][0] * inv}}};
  const T log_j = clamp ? ad::log(ad::clamp_min(det, *clamp)) : ad::log(det);
  Mat2<T> p;
  for (int i = 0; i < 2; ++i) {
    for (int j = 0; j < 2; ++j) p[i][j] = m.mu * (f[i][j] - finv_t[i][j]) + m.lambda * (log_j * finv_t[i][j]);
  }
  return p;
}

/// Stored energy mu/2 (F:F - 2 - 2 log J) + lambda/2 (log J)^2.
template <class T>
T neohookean_energy(const Mat2<T>& f, const Material& m, std::optional<double> clamp = std::nullopt) {
  const T det = f[0][0] * f[1][1] - f[0][1] * f[1][0];
  const T log_j = clamp ? ad::log(ad::clamp_min(det, *clamp)) : ad::log(det);
  const T ff = f[0][0] * f[0][0] + f[0][1] * f[0][1] + f[1][0] * f[1][0] + f[1][1] * f[1][1];
  return (0.5 * m.mu) * (ff - 2.0 - 2.0 * log_j) + (0.5 * m.lambda) * (log_j * log_j);
}

enum class ObjectiveKind { Drm1D, Pinn1D, Drm2D, Pinn2D };

struct ObjectiveConfig {
  Problem problem = Problem::Elliptic1D;
  Formulation formulation = Formulation::Drm;
  NetworkSpec network = NetworkSpec::elliptic_1d();
  int grid_points = 100;  // 1D
  int radial = 20;        // 2D
  int angular = 50;       // 2D
  Material material;
  double alpha = 1.0;
  /// Multiplies the source term; 0 switches it off.
  double source_scale = 1.0;
  IntegrationMode mode = IntegrationMode::FixedGrid;
  int batch = 100;
  std::optional<double> j_clamp;

  /// Reference setup for a problem: 20x2 tanh net in 1D, 25x2 in 2D.
  static ObjectiveConfig reference(Problem problem, Formulation formulation);

  ObjectiveKind kind() const;
  void validate() const;
};

std::string to_string(Problem p);
std::string to_string(Formulation f);
std::string to_string(IntegrationMode m);
std::string to_string(ObjectiveKind k);
Problem problem_from_string(const std::string& s);
Formulation formulation_from_string(const std::string& s);
IntegrationMode integration_mode_from_string(const std::string& s);

/// One of the four losses, integrated over a quadrature grid.
///
/// value() and the gradient use the fixed grid; in Monte Carlo mode the
/// sampled_* variants draw a fresh batch from the supplied generator. Hessian
/// products always use the fixed grid.
class Objective final : public Differentiable {
 public:
  explicit Objective(ObjectiveConfig config);

  const ObjectiveConfig& config() const { return config_; }
  const NetworkSpec& network() const { return config_.network; }
  const QuadratureGrid& grid() const { return grid_; }
  ObjectiveKind kind() const { return config_.kind(); }

  std::size_t dimension() const override { return dim_; }
  double value(const ParamVector& theta) const override;
  double value_and_gradient(const ParamVector& theta, ParamVector& grad) const override;
  void hessian_block(const ParamVector& theta, const Eigen::MatrixXd& directions,
                     Eigen::MatrixXd& out) const override;

  bool stochastic() const override { return config_.mode == IntegrationMode::MonteCarlo; }
  double sampled_value(const ParamVector& theta, Rng& rng) const override;
  double sampled_value_and_gradient(const ParamVector& theta, ParamVector& grad, Rng& rng) const override;

  /// Loss on an arbitrary grid of the right dimension.
  double value_on(const ParamVector& theta, const QuadratureGrid& grid) const;

  /// Pointwise integrand g(x_i) on the fixed grid (loss = sum w_i g_i).
  std::vector<double> integrand(const ParamVector& theta) const;

  /// Smallest det F over the fixed grid (2D only).
  double min_jacobian(const ParamVector& theta) const;

  /// Copy with a different J clamp.
  Objective with_clamp(std::optional<double> clamp) const;

  /// A fresh Monte Carlo batch (points, weights).
  QuadratureGrid sample_batch(Rng& rng) const;

 private:
  struct Sources {
    QuadratureGrid grid;
    std::vector<double> values;  // f per point (1D) or B point-major (P x 2)
  };
  Sources prepare(QuadratureGrid grid) const;

  ObjectiveConfig config_;
  std::size_t dim_ = 0;
  QuadratureGrid grid_;
  Sources fixed_;
};

/// Test points for error reporting: 201 evenly spaced points on [0, 1] in 1D,
/// a 500-point uniform cloud in the disk in 2D.
QuadratureGrid verification_points(Problem problem, std::uint64_t seed = 0);

/// max_i |u(x_i) - u*(x_i)| (Euclidean norm of the displacement difference in
/// 2D) against the manufactured solution.
double max_pointwise_error(const Objective& objective, const ParamVector& theta, std::uint64_t seed = 0);

/// The loss of the manufactured solution itself on the fixed grid: the
/// reference minimum for DRM energies (zero for PINN up to round-off).
double manufactured_loss(const Objective& objective);

/// Quadrature estimate of the integrand variance on the fixed grid, taken
/// with respect to the normalized measure w_i / sum(w).
double integrand_variance(const Objective& objective, const ParamVector& theta);

}  // namespace pinnscape
