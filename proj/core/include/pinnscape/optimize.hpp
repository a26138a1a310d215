#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "pinnscape/autodiff/objective.hpp"
#include "pinnscape/rng.hpp"

namespace pinnscape {

enum class OptimizerKind { Adam, Gd };

struct OptimizerConfig {
  OptimizerKind kind = OptimizerKind::Adam;
  double learning_rate = 1e-3;
  int epochs = 7500;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  /// Seeds the Monte Carlo stream of stochastic objectives.
  std::uint64_t seed = 0;

  static OptimizerConfig adam(double learning_rate, int epochs);
  static OptimizerConfig gd(double learning_rate, int epochs);

  void validate() const;
};

std::string to_string(OptimizerKind k);
OptimizerKind optimizer_from_string(const std::string& s);

/// Per-epoch parameters (column t = theta_t), losses and norms.
///
/// Columns are kept in memory until they exceed `spill_bytes`; after that the
/// whole matrix lives in a temporary file that is removed on destruction.
class TrajectoryRecord {
 public:
  static constexpr std::size_t kDefaultSpillBytes = std::size_t{256} << 20;

  explicit TrajectoryRecord(std::size_t dim = 0, bool store_params = true,
                            std::size_t spill_bytes = kDefaultSpillBytes,
                            std::filesystem::path spill_dir = {});
  ~TrajectoryRecord();
  TrajectoryRecord(TrajectoryRecord&&) noexcept;
  TrajectoryRecord& operator=(TrajectoryRecord&&) noexcept;
  TrajectoryRecord(const TrajectoryRecord&) = delete;
  TrajectoryRecord& operator=(const TrajectoryRecord&) = delete;

  void append(const ParamVector& theta, double loss);

  std::size_t dimension() const { return dim_; }
  /// Number of recorded epochs (T + 1 for a completed run of T steps).
  std::size_t size() const { return losses_.size(); }
  bool has_params() const { return store_params_; }
  bool spilled() const { return spill_ != nullptr; }

  ParamVector column(std::size_t t) const;
  /// dim x size() matrix; throws std::logic_error when parameters were not kept.
  Eigen::MatrixXd matrix() const;
  const std::vector<double>& losses() const { return losses_; }
  const std::vector<double>& radii() const { return radii_; }
  /// Copies of the first/last recorded parameter vectors (always kept).
  const ParamVector& first() const { return first_; }
  const ParamVector& last() const { return last_; }

 private:
  struct Spill;
  void spill_out();

  std::size_t dim_ = 0;
  bool store_params_ = true;
  std::size_t spill_bytes_ = kDefaultSpillBytes;
  std::filesystem::path spill_dir_;
  std::vector<double> columns_;
  std::unique_ptr<Spill> spill_;
  std::vector<double> losses_;
  std::vector<double> radii_;
  ParamVector first_;
  ParamVector last_;
};

struct TrainOptions {
  bool store_params = true;
  std::size_t spill_bytes = TrajectoryRecord::kDefaultSpillBytes;
  std::filesystem::path spill_dir;
  /// Called with (epoch, theta_t, loss_t) for every recorded epoch.
  std::function<void(int, const ParamVector&, double)> observer;
};

struct TrainResult {
  TrajectoryRecord trajectory;
  /// Last parameters with a finite loss.
  ParamVector final_params;
  double final_loss = 0.0;
  bool aborted = false;
  /// Epoch at which the loss became non-finite.
  std::optional<int> abort_epoch;
  std::optional<std::size_t> abort_point;
  std::string abort_reason;
};

/// Full-batch training from `init`. Stochastic objectives draw each epoch's
/// quadrature from the stream (config.seed, "monte-carlo"). A non-finite
/// loss stops the run and is reported in the result rather than thrown.
TrainResult train(const Differentiable& objective, const ParamVector& init, const OptimizerConfig& config,
                  const TrainOptions& options = {});

/// Training with every iterate rescaled onto the sphere of radius R (the
/// initial vector included).
TrainResult train_on_sphere(const Differentiable& objective, const ParamVector& init, const OptimizerConfig& config,
                            double radius, const TrainOptions& options = {});

/// Random affine subspace theta = offset + P z.
struct SubspaceMap {
  ParamVector offset;
  Eigen::MatrixXd projection;  // |theta| x d, unit columns

  ParamVector embed(const Eigen::VectorXd& z) const { return offset + projection * z; }
  int dimension() const { return static_cast<int>(projection.cols()); }
};

/// Columns i.i.d. standard normal, scaled to unit length; optionally
/// orthonormalized (thin QR) instead.
SubspaceMap make_subspace_map(const ParamVector& offset, int d, Rng& rng, bool orthonormalize = false);

/// f(offset + P z) as a function of z.
class SubspaceObjective final : public Differentiable {
 public:
  SubspaceObjective(const Differentiable& base, SubspaceMap map);

  std::size_t dimension() const override { return static_cast<std::size_t>(map_.projection.cols()); }
  double value(const ParamVector& z) const override;
  double value_and_gradient(const ParamVector& z, ParamVector& grad) const override;
  void hessian_block(const ParamVector& z, const Eigen::MatrixXd& directions, Eigen::MatrixXd& out) const override;
  bool stochastic() const override { return base_.stochastic(); }
  double sampled_value(const ParamVector& z, Rng& rng) const override;
  double sampled_value_and_gradient(const ParamVector& z, ParamVector& grad, Rng& rng) const override;

  const SubspaceMap& map() const { return map_; }

 private:
  const Differentiable& base_;
  SubspaceMap map_;
};

struct SubspaceResult {
  TrainResult z;              // trajectory in z coordinates
  TrajectoryRecord embedded;  // theta_t = offset + P z_t
};

/// Trains z from 0 with gradients P^T grad f.
SubspaceResult train_subspace(const Differentiable& objective, const SubspaceMap& map, const OptimizerConfig& config,
                              const TrainOptions& options = {});

}  // namespace pinnscape
