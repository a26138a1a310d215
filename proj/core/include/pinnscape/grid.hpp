#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "pinnscape/rng.hpp"

namespace pinnscape {

/// Quadrature points (point-major coordinates) and their weights.
struct QuadratureGrid {
  int dim = 1;
  std::vector<double> coords;
  std::vector<double> weights;

  std::size_t size() const { return weights.size(); }
  std::span<const double> point(std::size_t i) const {
    return {coords.data() + i * static_cast<std::size_t>(dim), static_cast<std::size_t>(dim)};
  }
  double total_weight() const;
};

/// Midpoint rule on [0, 1]: x_i = (i - 1/2) / n, weight 1/n.
QuadratureGrid midpoint_grid(int n = 100);

/// Cell-centred polar rule on the unit disk: r_i = (i - 1/2) / nr,
/// t_j = 2 pi (j - 1/2) / nt, weight r_i * (1/nr) * (2 pi / nt).
QuadratureGrid polar_grid(int radial = 20, int angular = 50);

/// n i.i.d. uniform points on (0, 1), weights 1/n.
QuadratureGrid sample_interval(int n, Rng& rng);

/// n i.i.d. area-uniform points on the unit disk, weights pi/n.
QuadratureGrid sample_disk(int n, Rng& rng);

/// n evenly spaced points on [0, 1] including both ends (unit weights), for
/// error reporting rather than integration.
QuadratureGrid uniform_test_grid(int n);

/// Deterministic area-uniform cloud of n points in the closed unit disk
/// (unit weights), for error reporting.
QuadratureGrid disk_test_cloud(int n, std::uint64_t seed);

}  // namespace pinnscape
