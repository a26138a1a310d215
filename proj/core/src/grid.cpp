#include "pinnscape/grid.hpp"

#include <cmath>
#include <numbers>
#include <numeric>
#include <stdexcept>

namespace pinnscape {

double QuadratureGrid::total_weight() const { return std::accumulate(weights.begin(), weights.end(), 0.0); }

QuadratureGrid midpoint_grid(int n) {
  if (n < 1) throw std::invalid_argument("midpoint_grid: n must be positive");
  QuadratureGrid g;
  g.dim = 1;
  g.coords.resize(static_cast<std::size_t>(n));
  g.weights.assign(static_cast<std::size_t>(n), 1.0 / n);
  for (int i = 0; i < n; ++i) g.coords[static_cast<std::size_t>(i)] = (i + 0.5) / n;
  return g;
}

QuadratureGrid polar_grid(int radial, int angular) {
  if (radial < 1 || angular < 1) throw std::invalid_argument("polar_grid: counts must be positive");
  QuadratureGrid g;
  g.dim = 2;
  const double dr = 1.0 / radial;
  const double dt = 2.0 * std::numbers::pi / angular;
  for (int i = 0; i < radial; ++i) {
    const double r = (i + 0.5) * dr;
    for (int j = 0; j < angular; ++j) {
      const double t = (j + 0.5) * dt;
      g.coords.push_back(r * std::cos(t));
      g.coords.push_back(r * std::sin(t));
      g.weights.push_back(r * dr * dt);
    }
  }
  return g;
}

QuadratureGrid sample_interval(int n, Rng& rng) {
  QuadratureGrid g;
  g.dim = 1;
  g.coords.resize(static_cast<std::size_t>(n));
  g.weights.assign(static_cast<std::size_t>(n), 1.0 / n);
  for (auto& x : g.coords) x = rng.uniform();
  return g;
}

QuadratureGrid sample_disk(int n, Rng& rng) {
  QuadratureGrid g;
  g.dim = 2;
  g.weights.assign(static_cast<std::size_t>(n), std::numbers::pi / n);
  for (int i = 0; i < n; ++i) {
    const double r = std::sqrt(rng.uniform());
    const double t = 2.0 * std::numbers::pi * rng.uniform();
    g.coords.push_back(r * std::cos(t));
    g.coords.push_back(r * std::sin(t));
  }
  return g;
}

QuadratureGrid uniform_test_grid(int n) {
  if (n < 2) throw std::invalid_argument("uniform_test_grid: need at least two points");
  QuadratureGrid g;
  g.dim = 1;
  g.weights.assign(static_cast<std::size_t>(n), 1.0);
  for (int i = 0; i < n; ++i) g.coords.push_back(static_cast<double>(i) / (n - 1));
  return g;
}

QuadratureGrid disk_test_cloud(int n, std::uint64_t seed) {
  Rng rng = Rng::stream(seed, "test-cloud");
  QuadratureGrid g = sample_disk(n, rng);
  g.weights.assign(static_cast<std::size_t>(n), 1.0);
  return g;
}

}  // namespace pinnscape
