#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "pinnscape/autodiff/objective.hpp"
#include "pinnscape/network.hpp"
#include "pinnscape/optimize.hpp"
#include "pinnscape/problems.hpp"

namespace pinnscape {

/// Loss at a parameter vector. The index identifies the sample (scan cell,
/// path point) so stochastic evaluators can pick a reproducible batch.
using Evaluator = std::function<double(const ParamVector&, std::size_t)>;

/// f.value(theta); non-finite values pass through.
Evaluator value_evaluator(const Differentiable& f);
/// f.sampled_value with the stream (seed, "monte-carlo") split by sample index.
Evaluator sampled_evaluator(const Differentiable& f, std::uint64_t seed);

/// Unit vector with i.i.d. standard normal entries before normalization.
ParamVector random_direction(std::size_t dim, Rng& rng);

/// Losses at center + t * direction for `samples` uniform t in [lo, hi].
struct LineProfile {
  std::vector<double> t;
  std::vector<double> loss;
  std::vector<std::uint8_t> finite;
};

LineProfile line_scan(const Evaluator& loss, const ParamVector& center, const ParamVector& direction, double lo,
                      double hi, int samples);

/// Largest relative spread (max - min) / max|loss| over the finite samples.
double relative_variation(const LineProfile& profile);

struct MliResult {
  LineProfile profile;
  bool monotone = false;
  /// Largest relative increase between consecutive samples.
  double max_relative_increase = 0.0;
};

/// Loss along theta_i + t (theta_f - theta_i). Monotone when no step
/// increases the loss by more than rel_tol times the larger magnitude of
/// the two samples and every sample is finite.
MliResult mli_scan(const Evaluator& loss, const ParamVector& initial, const ParamVector& final, int samples = 101,
                   double rel_tol = 1e-6);

struct HessianWalkOptions {
  int steps = 500;
  double step_size = 1.0;
  std::function<void(int, const ParamVector&)> observer;
};

struct HessianWalkResult {
  /// Entry t refers to theta_t; entry 0 is the start.
  std::vector<double> distance;
  std::vector<double> loss_change;
  /// Eigenvalue followed at each step (length steps_completed).
  std::vector<double> eigenvalue;
  int steps_completed = 0;
  bool completed = false;
  std::string failure;
  ParamVector final_params;

  double max_abs_loss_change() const;
};

/// Repeatedly steps along the Hessian eigenvector of smallest |lambda|,
/// oriented to agree with the previous step. The first step's sign makes the
/// largest-magnitude entry positive.
HessianWalkResult hessian_walk(const Differentiable& f, const ParamVector& start, const HessianWalkOptions& options = {});

/// (1-t)^2 start + 2t(1-t) control + t^2 end.
struct BezierPath {
  ParamVector start;
  ParamVector end;
  ParamVector control;

  ParamVector point(double t) const;
  static BezierPath straight(const ParamVector& a, const ParamVector& b) { return {a, b, 0.5 * (a + b)}; }
};

/// 0.5 * sum_s w_s (f(path(t_s)) - f(start))^2 over uniform t_s in [0, 1]
/// with trapezoid weights, as a function of the control point.
class BezierObjective final : public Differentiable {
 public:
  BezierObjective(const Differentiable& f, ParamVector start, ParamVector end, int samples);

  std::size_t dimension() const override { return static_cast<std::size_t>(start_.size()); }
  double value(const ParamVector& control) const override;
  double value_and_gradient(const ParamVector& control, ParamVector& grad) const override;
  /// Not available; throws std::logic_error.
  void hessian_block(const ParamVector&, const Eigen::MatrixXd&, Eigen::MatrixXd&) const override;

  const std::vector<double>& samples() const { return t_; }

 private:
  const Differentiable& f_;
  ParamVector start_;
  ParamVector end_;
  double reference_ = 0.0;
  std::vector<double> t_;
  std::vector<double> w_;
};

struct ModeConnectOptions {
  int t_samples = 25;
  /// Resolution of the reported loss profiles.
  int profile_samples = 101;
  OptimizerConfig optimizer = OptimizerConfig::adam(1e-3, 5000);
  /// Objective for the straight-path profile (e.g. with a J clamp); f when null.
  const Differentiable* linear_objective = nullptr;
};

struct ModeConnectResult {
  /// Control point with the lowest path objective seen.
  BezierPath path;
  double objective = 0.0;
  double initial_objective = 0.0;
  std::vector<double> objective_history;
  bool aborted = false;
  LineProfile linear;
  LineProfile bezier;
  /// max_t f(linear(t)) - f(start).
  double linear_barrier = 0.0;
  /// max_t |f(bezier(t)) - f(start)|.
  double bezier_max_deviation = 0.0;
};

ModeConnectResult mode_connect(const Differentiable& f, const ParamVector& a, const ParamVector& b,
                               const ModeConnectOptions& options = {});

/// Losses on center + e_k V_k + e_j V_j; loss(m, n) uses e_k[m], e_j[n].
struct PlaneGrid {
  ParamVector center;
  ParamVector dir_k;
  ParamVector dir_j;
  std::vector<double> eps_k;
  std::vector<double> eps_j;
  Eigen::MatrixXd loss;
  /// Row-major like loss; 1 where finite.
  std::vector<std::uint8_t> finite;

  std::size_t finite_count() const;
};

/// Directions are normalized to unit length. A resolution of 1 evaluates
/// the midpoint of the range only.
PlaneGrid plane_scan(const Evaluator& loss, const ParamVector& center, const ParamVector& dir_k,
                     const ParamVector& dir_j, double lo = -1.0, double hi = 1.0, int resolution = 51);

struct SpectrumHistory {
  std::vector<int> epochs;
  std::vector<Eigen::VectorXd> eigenvalues;  // ascending, |theta| each
  std::vector<double> lambda_max;
  std::vector<double> lambda_min;
};

/// Full spectra at epochs 0, every, 2*every, ... and the last epoch.
SpectrumHistory spectrum_evolution(const Differentiable& f, const TrajectoryRecord& trajectory, int every = 50);
/// Initial and final spectra only.
SpectrumHistory spectrum_endpoints(const Differentiable& f, const TrajectoryRecord& trajectory);

/// Fraction of eigenvalues with |lambda| < rel * max|lambda|.
double near_zero_fraction(const Eigen::VectorXd& eigenvalues, double rel);

/// Counts of log10(|lambda| + shift) per sample: counts(bin, sample).
struct SpectrumHistogram {
  std::vector<double> edges;
  Eigen::MatrixXd counts;
};

SpectrumHistogram spectrum_histogram(const SpectrumHistory& history, int bins = 100, double shift = 1e-10);

struct GramAnalysis {
  Eigen::MatrixXd gram;
  Eigen::VectorXd eigenvalues;  // ascending
  Eigen::MatrixXd eigenvectors;
  double threshold = 0.0;       // absolute
  int rank = 0;
};

/// G_ij = sum_p w_p h_i(x_p) h_j(x_p); rank counts eigenvalues above
/// rel_threshold * lambda_max. With derivatives, the derivative blocks of
/// the basis are added (a Sobolev inner product).
GramAnalysis gram_rank(const BasisSet& basis, const std::vector<double>& weights, double rel_threshold,
                       bool with_derivatives = false);

/// [Delta, 0]: the direction of smallest singular value of the weighted
/// basis matrix (the eigenvector of the Gram matrix's smallest eigenvalue,
/// computed without squaring the condition number), placed in the outer row
/// `component` with zeros elsewhere. Derivative blocks present in the basis
/// are stacked under the values, so the field and its derivatives stay
/// unchanged along Delta. Empty when sigma_min^2 > rel_threshold * sigma_max^2.
std::optional<ParamVector> null_direction(const NetworkSpec& spec, const BasisSet& basis,
                                          const std::vector<double>& weights, double rel_threshold,
                                          int component = 0);

/// ||u(theta + v) - u(theta)|| / ||u(theta)|| over the grid points.
double field_change(const NetworkSpec& spec, const ParamVector& theta, const ParamVector& v,
                    const QuadratureGrid& grid);

struct PcaBasis {
  ParamVector mean;
  Eigen::MatrixXd components;  // |theta| x Q, unit columns
  Eigen::VectorXd explained;   // variance fractions, non-increasing
  Eigen::MatrixXd coordinates; // Q x (T+1), projections of theta_t - mean
};

/// PCA of the columns of theta (|theta| x (T+1)) about their mean. Each
/// component's sign makes its largest-magnitude entry positive. A constant
/// trajectory yields no components.
PcaBasis pca_trajectory(const Eigen::MatrixXd& theta, int q);

struct AccelerationSeries {
  std::vector<int> epochs;          // 1 .. T-1
  std::vector<double> value;
  std::vector<std::uint8_t> valid;  // 0 where the velocity vanishes
};

/// ||theta_{t+1} - 2 theta_t + theta_{t-1}|| / eta^2, optionally divided by
/// ||(theta_{t+1} - theta_t) / eta||^2.
AccelerationSeries acceleration_series(const TrajectoryRecord& trajectory, double eta, bool normalize);

/// Medians of the raw series over the first `fraction` of epochs and over the
/// same span ending at `converged_epoch`.
std::pair<double, double> acceleration_medians(const AccelerationSeries& series, int converged_epoch,
                                               double fraction = 0.1);

/// First epoch after which the loss stays within rel_tol of its final value.
int convergence_epoch(const std::vector<double>& losses, double rel_tol);

struct ProbeRun {
  int width = 0;
  OptimizerKind optimizer = OptimizerKind::Adam;
  int trial = 0;
  std::uint64_t seed = 0;
  std::vector<double> losses;
  double final_loss = 0.0;
  bool aborted = false;
  std::optional<int> abort_epoch;
  bool stuck = false;
};

struct ProbeMinimaConfig {
  ObjectiveConfig objective;
  std::vector<int> widths{20, 5};
  std::vector<OptimizerKind> optimizers{OptimizerKind::Adam, OptimizerKind::Gd};
  int trials = 10;
  OptimizerConfig optimizer = OptimizerConfig::adam(1e-3, 5000);
  std::uint64_t seed = 0;
  /// Epochs at the end of the best run whose loss range forms the band.
  int band_epochs = 100;
  double stuck_factor = 10.0;
};

struct ProbeMinimaResult {
  std::vector<ProbeRun> runs;
  /// Per width: best final loss and its band.
  std::vector<double> best_loss;
  std::vector<double> band;
};

/// Runs every (width, optimizer, trial) from init_params(spec, seed + trial),
/// then flags runs with final - best > stuck_factor * band, where best and
/// band come from the best finished run of the same width. Aborted runs are
/// failures, never stuck.
ProbeMinimaResult probe_minima(const ProbeMinimaConfig& config);

/// Re-applies the stuck rule to existing runs.
void classify_stuck(ProbeMinimaResult& result, const std::vector<int>& widths, int band_epochs, double factor);

struct GoldilocksConfig {
  ObjectiveConfig objective;
  std::vector<double> radii{0.5, 1, 2, 5, 10, 15, 20, 30, 50, 100};
  int trials = 5;
  OptimizerConfig optimizer = OptimizerConfig::adam(1e-3, 5000);
  std::uint64_t seed = 0;
};

struct GoldilocksResult {
  std::vector<double> radii;
  Eigen::MatrixXd final_loss;  // radii x trials, NaN for aborted runs
};

GoldilocksResult goldilocks_sweep(const GoldilocksConfig& config);

struct RadiusTrackConfig {
  ObjectiveConfig objective;
  std::vector<double> scales{0.01, 0.1, 0.5, 1.0};
  OptimizerConfig optimizer = OptimizerConfig::adam(1e-3, 7500);
  std::uint64_t seed = 0;
};

struct RadiusTrack {
  double scale = 1.0;
  std::vector<double> radii;
  std::vector<double> losses;
  bool aborted = false;
};

/// Unconstrained runs from the default initialization scaled by each factor.
std::vector<RadiusTrack> radius_track(const RadiusTrackConfig& config);

struct IntrinsicDimConfig {
  ObjectiveConfig objective;
  std::vector<int> dims{1, 2, 5, 10, 20};
  OptimizerConfig optimizer = OptimizerConfig::adam(1e-3, 20000);
  /// Epochs of the full-parameter reference run.
  int full_epochs = 20000;
  bool orthonormalize = false;
  std::uint64_t seed = 0;
};

struct IntrinsicDimRun {
  int dim = 0;
  std::vector<double> losses;
  double final_loss = 0.0;
  bool aborted = false;
};

struct IntrinsicDimResult {
  std::vector<IntrinsicDimRun> runs;
  IntrinsicDimRun full;
};

/// Offset and projection for subspace dimension index i come from the
/// streams (seed, "subspace-offset") and (seed, "subspace-projection") split
/// by i, so both objectives share them for the same seed. The full run
/// starts from the offset of the first dimension.
IntrinsicDimResult intrinsic_dimension(const IntrinsicDimConfig& config);

}  // namespace pinnscape
