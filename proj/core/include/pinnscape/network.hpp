#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "pinnscape/autodiff/objective.hpp"
#include "pinnscape/grid.hpp"
#include "pinnscape/rng.hpp"

namespace pinnscape {

enum class Activation { Tanh, XPlusTanh };

/// Function vanishing on the Dirichlet boundary, applied to every neuron of
/// the final hidden layer.
enum class DistanceFunction {
  SinPiX,   // sin(pi x) on [0, 1]
  UnitDisk  // 1 - X1^2 - X2^2 on the unit disk
};

/// Tanh MLP with a bias-free output layer.
struct NetworkSpec {
  int input_dim = 1;
  int output_dim = 1;
  std::vector<int> hidden_widths{20, 20};
  Activation activation = Activation::Tanh;
  DistanceFunction distance = DistanceFunction::SinPiX;

  static NetworkSpec elliptic_1d(int width = 20, int depth = 2);
  static NetworkSpec neohookean_2d(int width = 25, int depth = 2);

  /// Throws std::invalid_argument on an inconsistent spec.
  void validate() const;
  int basis_size() const { return hidden_widths.back(); }

  bool operator==(const NetworkSpec&) const = default;
};

/// Row-major block of the flat parameter vector.
struct ParamBlock {
  std::size_t offset = 0;
  int rows = 0;
  int cols = 0;
  std::size_t size() const { return static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols); }
};

/// Per-layer slices of the flat vector. Inner parameters (hidden weights and
/// biases) come first; the outer slice is the output layer's weight matrix
/// (output_dim x basis_size) and occupies [inner_size, total).
struct ParamLayout {
  std::vector<ParamBlock> weights;
  std::vector<ParamBlock> biases;
  ParamBlock outer;
  std::size_t inner_size = 0;
  std::size_t total = 0;
};

ParamLayout param_layout(const NetworkSpec& spec);
std::size_t parameter_count(const NetworkSpec& spec);

/// Weights and biases ~ U(-1/sqrt(fan_in), 1/sqrt(fan_in)), times `scale`.
ParamVector init_params(const NetworkSpec& spec, Rng& rng, double scale = 1.0);
ParamVector init_params(const NetworkSpec& spec, std::uint64_t seed, double scale = 1.0);

/// Network output u(point) (output_dim values).
std::vector<double> forward(const NetworkSpec& spec, const ParamVector& theta, std::span<const double> point);

/// Output values with first and second spatial derivatives.
struct SpatialEval {
  std::vector<double> value;            // [output]
  std::vector<Eigen::VectorXd> grad;    // [output] (input_dim)
  std::vector<Eigen::MatrixXd> hess;    // [output] (input_dim x input_dim)
};

/// Throws std::invalid_argument when the point or parameter dimensions do
/// not match the spec.
SpatialEval eval_with_spatial(const NetworkSpec& spec, const ParamVector& theta, std::span<const double> point);

/// Basis functions h_i = distance * (final hidden activation i) on a grid.
struct BasisSet {
  Eigen::MatrixXd values;  // rows = grid points, cols = basis_size
  /// Spatial derivatives in jet order: first derivatives, then the packed
  /// upper triangle of second derivatives (only up to the requested order).
  std::vector<Eigen::MatrixXd> derivatives;
};

BasisSet extract_basis(const NetworkSpec& spec, const ParamVector& theta, const QuadratureGrid& grid, int order = 0);

/// Outer coefficients as a (basis_size x output_dim) matrix so that the field
/// on a grid is basis.values * outer_coefficients.
Eigen::MatrixXd outer_coefficients(const NetworkSpec& spec, const ParamVector& theta);

/// Field values on a grid, (points x output_dim).
Eigen::MatrixXd field_on_grid(const NetworkSpec& spec, const ParamVector& theta, const QuadratureGrid& grid);

std::string to_string(Activation a);
std::string to_string(DistanceFunction d);
Activation activation_from_string(const std::string& s);
DistanceFunction distance_from_string(const std::string& s);

}  // namespace pinnscape
