#include "pinnscape/network.hpp"

#include <cmath>
#include <stdexcept>

#include "pinnscape/detail/network_jet.hpp"

namespace pinnscape {

NetworkSpec NetworkSpec::elliptic_1d(int width, int depth) {
  NetworkSpec s;
  s.input_dim = 1;
  s.output_dim = 1;
  s.hidden_widths.assign(static_cast<std::size_t>(depth), width);
  s.activation = Activation::Tanh;
  s.distance = DistanceFunction::SinPiX;
  return s;
}

NetworkSpec NetworkSpec::neohookean_2d(int width, int depth) {
  NetworkSpec s;
  s.input_dim = 2;
  s.output_dim = 2;
  s.hidden_widths.assign(static_cast<std::size_t>(depth), width);
  s.activation = Activation::Tanh;
  s.distance = DistanceFunction::UnitDisk;
  return s;
}

void NetworkSpec::validate() const {
  if (input_dim < 1 || input_dim > 2) throw std::invalid_argument("NetworkSpec: input_dim must be 1 or 2");
  if (output_dim < 1 || output_dim > 2) throw std::invalid_argument("NetworkSpec: output_dim must be 1 or 2");
  if (hidden_widths.empty()) throw std::invalid_argument("NetworkSpec: at least one hidden layer is required");
  for (int w : hidden_widths) {
    if (w < 1) throw std::invalid_argument("NetworkSpec: hidden widths must be positive");
  }
  const int needed = distance == DistanceFunction::SinPiX ? 1 : 2;
  if (input_dim != needed) throw std::invalid_argument("NetworkSpec: distance function does not match input_dim");
}

ParamLayout param_layout(const NetworkSpec& spec) {
  spec.validate();
  ParamLayout layout;
  std::size_t offset = 0;
  int fan_in = spec.input_dim;
  for (int width : spec.hidden_widths) {
    layout.weights.push_back({offset, width, fan_in});
    offset += layout.weights.back().size();
    layout.biases.push_back({offset, width, 1});
    offset += static_cast<std::size_t>(width);
    fan_in = width;
  }
  layout.inner_size = offset;
  layout.outer = {offset, spec.output_dim, fan_in};
  layout.total = offset + layout.outer.size();
  return layout;
}

std::size_t parameter_count(const NetworkSpec& spec) { return param_layout(spec).total; }

ParamVector init_params(const NetworkSpec& spec, Rng& rng, double scale) {
  const ParamLayout layout = param_layout(spec);
  ParamVector theta(static_cast<Eigen::Index>(layout.total));
  auto fill = [&](const ParamBlock& blk, int fan_in) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    for (std::size_t k = 0; k < blk.size(); ++k) {
      theta[static_cast<Eigen::Index>(blk.offset + k)] = scale * rng.uniform(-bound, bound);
    }
  };
  for (std::size_t l = 0; l < layout.weights.size(); ++l) {
    fill(layout.weights[l], layout.weights[l].cols);
    fill(layout.biases[l], layout.weights[l].cols);
  }
  fill(layout.outer, layout.outer.cols);
  return theta;
}

ParamVector init_params(const NetworkSpec& spec, std::uint64_t seed, double scale) {
  Rng rng = Rng::stream(seed, "init");
  return init_params(spec, rng, scale);
}

namespace {

void check_dims(const NetworkSpec& spec, const ParamVector& theta, std::size_t point_dim) {
  if (static_cast<std::size_t>(theta.size()) != parameter_count(spec)) {
    throw std::invalid_argument("network: parameter vector does not match the spec");
  }
  if (point_dim != static_cast<std::size_t>(spec.input_dim)) {
    throw std::invalid_argument("network: point dimension does not match the spec");
  }
}

/// Output jets of the given order at the given points, (output_dim x C*P).
std::vector<double> output_jet_values(const NetworkSpec& spec, const ParamVector& theta,
                                      std::span<const double> coords, int points, int order) {
  const ParamLayout layout = param_layout(spec);
  ad::Tape<double> tape;
  const std::vector<double> flat(theta.data(), theta.data() + theta.size());
  const auto net = detail::bind_network(tape, layout, flat, false);
  return detail::output_jets(tape, spec, net, coords, points, order).value();
}

}  // namespace

std::vector<double> forward(const NetworkSpec& spec, const ParamVector& theta, std::span<const double> point) {
  check_dims(spec, theta, point.size());
  return output_jet_values(spec, theta, point, 1, 0);
}

SpatialEval eval_with_spatial(const NetworkSpec& spec, const ParamVector& theta, std::span<const double> point) {
  check_dims(spec, theta, point.size());
  const int dim = spec.input_dim;
  const int comps = detail::jet_components(dim);
  const auto jets = output_jet_values(spec, theta, point, 1, 2);
  SpatialEval ev;
  for (int o = 0; o < spec.output_dim; ++o) {
    const double* row = jets.data() + static_cast<std::size_t>(o) * comps;
    ev.value.push_back(row[0]);
    Eigen::VectorXd g(dim);
    for (int k = 0; k < dim; ++k) g[k] = row[1 + k];
    Eigen::MatrixXd h(dim, dim);
    for (const auto& pr : detail::jet_pairs(dim)) {
      h(pr.a, pr.b) = row[pr.comp];
      h(pr.b, pr.a) = row[pr.comp];
    }
    ev.grad.push_back(g);
    ev.hess.push_back(h);
  }
  return ev;
}

BasisSet extract_basis(const NetworkSpec& spec, const ParamVector& theta, const QuadratureGrid& grid, int order) {
  if (grid.size() == 0) throw std::invalid_argument("extract_basis: empty grid");
  if (order < 0 || order > 2) throw std::invalid_argument("extract_basis: order must be 0, 1 or 2");
  check_dims(spec, theta, static_cast<std::size_t>(grid.dim));
  const ParamLayout layout = param_layout(spec);
  const int points = static_cast<int>(grid.size());
  ad::Tape<double> tape;
  const std::vector<double> flat(theta.data(), theta.data() + theta.size());
  const auto net = detail::bind_network(tape, layout, flat, false);
  const auto basis = detail::basis_jets(tape, spec, net, grid.coords, points, order);
  const auto& v = basis.value();
  const int n = spec.basis_size();
  const int comps = detail::jet_components(spec.input_dim, order);
  const std::size_t cols = static_cast<std::size_t>(basis.cols());
  auto component = [&](int c) {
    Eigen::MatrixXd m(points, n);
    for (int i = 0; i < n; ++i) {
      for (int p = 0; p < points; ++p) {
        m(p, i) = v[static_cast<std::size_t>(i) * cols + static_cast<std::size_t>(c) * points + p];
      }
    }
    return m;
  };
  BasisSet set;
  set.values = component(0);
  for (int c = 1; c < comps; ++c) set.derivatives.push_back(component(c));
  return set;
}

Eigen::MatrixXd outer_coefficients(const NetworkSpec& spec, const ParamVector& theta) {
  const ParamLayout layout = param_layout(spec);
  Eigen::MatrixXd c(layout.outer.cols, layout.outer.rows);
  for (int o = 0; o < layout.outer.rows; ++o) {
    for (int i = 0; i < layout.outer.cols; ++i) {
      c(i, o) = theta[static_cast<Eigen::Index>(layout.outer.offset + static_cast<std::size_t>(o) * layout.outer.cols + i)];
    }
  }
  return c;
}

Eigen::MatrixXd field_on_grid(const NetworkSpec& spec, const ParamVector& theta, const QuadratureGrid& grid) {
  check_dims(spec, theta, static_cast<std::size_t>(grid.dim));
  const int points = static_cast<int>(grid.size());
  const auto jets = output_jet_values(spec, theta, grid.coords, points, 0);
  const std::size_t cols = jets.size() / static_cast<std::size_t>(spec.output_dim);
  Eigen::MatrixXd u(points, spec.output_dim);
  for (int o = 0; o < spec.output_dim; ++o) {
    for (int p = 0; p < points; ++p) u(p, o) = jets[static_cast<std::size_t>(o) * cols + p];
  }
  return u;
}

std::string to_string(Activation a) { return a == Activation::Tanh ? "tanh" : "x_plus_tanh"; }
std::string to_string(DistanceFunction d) { return d == DistanceFunction::SinPiX ? "sin_pi_x" : "unit_disk"; }

Activation activation_from_string(const std::string& s) {
  if (s == "tanh") return Activation::Tanh;
  if (s == "x_plus_tanh") return Activation::XPlusTanh;
  throw std::invalid_argument("unknown activation: " + s);
}

DistanceFunction distance_from_string(const std::string& s) {
  if (s == "sin_pi_x") return DistanceFunction::SinPiX;
  if (s == "unit_disk") return DistanceFunction::UnitDisk;
  throw std::invalid_argument("unknown distance function: " + s);
}

}  // namespace pinnscape
