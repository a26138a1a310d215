#include "pinnscape/landscape.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include "pinnscape/parallel.hpp"

namespace pinnscape {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

double safe_value(const Evaluator& loss, const ParamVector& theta, std::size_t index) {
  try {
    return loss(theta, index);
  } catch (const NonFiniteObjective&) {
    return kNaN;
  }
}

std::vector<double> uniform_samples(double lo, double hi, int n) {
  if (n < 1) throw std::invalid_argument("sample count must be positive");
  std::vector<double> t(static_cast<std::size_t>(n));
  if (n == 1) {
    t[0] = 0.5 * (lo + hi);
    return t;
  }
  for (int i = 0; i < n; ++i) t[static_cast<std::size_t>(i)] = lo + (hi - lo) * i / (n - 1);
  t.back() = hi;
  return t;
}

void fix_sign(Eigen::Ref<Eigen::VectorXd> v) {
  Eigen::Index k = 0;
  v.cwiseAbs().maxCoeff(&k);
  if (v[k] < 0.0) v = -v;
}

double median(std::vector<double> v) {
  if (v.empty()) return kNaN;
  const auto mid = v.begin() + static_cast<std::ptrdiff_t>(v.size() / 2);
  std::nth_element(v.begin(), mid, v.end());
  if (v.size() % 2 == 1) return *mid;
  const double hi = *mid;
  return 0.5 * (hi + *std::max_element(v.begin(), mid));
}

}  // namespace

Evaluator value_evaluator(const Differentiable& f) {
  return [&f](const ParamVector& theta, std::size_t) { return f.value(theta); };
}

Evaluator sampled_evaluator(const Differentiable& f, std::uint64_t seed) {
  const Rng base = Rng::stream(seed, "monte-carlo");
  return [&f, base](const ParamVector& theta, std::size_t index) {
    Rng rng = base.split(static_cast<std::uint64_t>(index));
    return f.sampled_value(theta, rng);
  };
}

ParamVector random_direction(std::size_t dim, Rng& rng) {
  ParamVector v(static_cast<Eigen::Index>(dim));
  for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = rng.normal();
  return v / v.norm();
}

LineProfile line_scan(const Evaluator& loss, const ParamVector& center, const ParamVector& direction, double lo,
                      double hi, int samples) {
  LineProfile p;
  p.t = uniform_samples(lo, hi, samples);
  p.loss.resize(p.t.size());
  p.finite.resize(p.t.size());
  parallel_for(p.t.size(), [&](std::size_t i) {
    p.loss[i] = safe_value(loss, center + p.t[i] * direction, i);
    p.finite[i] = std::isfinite(p.loss[i]) ? 1 : 0;
  });
  return p;
}

double relative_variation(const LineProfile& profile) {
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  double scale = 0.0;
  for (std::size_t i = 0; i < profile.loss.size(); ++i) {
    if (!profile.finite[i]) continue;
    lo = std::min(lo, profile.loss[i]);
    hi = std::max(hi, profile.loss[i]);
    scale = std::max(scale, std::abs(profile.loss[i]));
  }
  if (!(hi >= lo)) return kNaN;
  return scale > 0.0 ? (hi - lo) / scale : 0.0;
}

MliResult mli_scan(const Evaluator& loss, const ParamVector& initial, const ParamVector& final, int samples,
                   double rel_tol) {
  if (samples < 2) throw std::invalid_argument("mli_scan: need at least two samples");
  MliResult r;
  r.profile = line_scan(loss, initial, final - initial, 0.0, 1.0, samples);
  r.monotone = true;
  const auto& l = r.profile.loss;
  for (std::size_t i = 0; i < l.size(); ++i) {
    if (!r.profile.finite[i]) r.monotone = false;
  }
  for (std::size_t i = 1; i < l.size(); ++i) {
    if (!r.profile.finite[i] || !r.profile.finite[i - 1]) continue;
    const double scale = std::max(std::abs(l[i]), std::abs(l[i - 1]));
    const double inc = scale > 0.0 ? (l[i] - l[i - 1]) / scale : 0.0;
    r.max_relative_increase = std::max(r.max_relative_increase, inc);
    if (inc > rel_tol) r.monotone = false;
  }
  return r;
}

double HessianWalkResult::max_abs_loss_change() const {
  double m = 0.0;
  for (double d : loss_change) m = std::max(m, std::abs(d));
  return m;
}

HessianWalkResult hessian_walk(const Differentiable& f, const ParamVector& start, const HessianWalkOptions& options) {
  if (options.steps < 0) throw std::invalid_argument("hessian_walk: negative step count");
  HessianWalkResult r;
  const double f0 = f.value(start);
  if (!std::isfinite(f0)) throw std::invalid_argument("hessian_walk: start is not finite");
  ParamVector theta = start;
  ParamVector previous;
  r.distance.push_back(0.0);
  r.loss_change.push_back(0.0);
  if (options.observer) options.observer(0, theta);
  for (int t = 1; t <= options.steps; ++t) {
    try {
      const auto eig = eig_symmetric(hessian(f, theta));
      Eigen::Index k = 0;
      eig.values.cwiseAbs().minCoeff(&k);
      ParamVector v = eig.vectors.col(k);
      if (previous.size() == 0) {
        fix_sign(v);
      } else if (v.dot(previous) < 0.0) {
        v = -v;
      }
      r.eigenvalue.push_back(eig.values[k]);
      previous = v;
      theta += options.step_size * v;
      const double ft = f.value(theta);
      if (!std::isfinite(ft)) throw NonFiniteObjective("hessian_walk: non-finite loss");
      r.distance.push_back((theta - start).norm());
      r.loss_change.push_back(ft - f0);
      r.steps_completed = t;
      if (options.observer) options.observer(t, theta);
    } catch (const std::exception& e) {
      r.failure = e.what();
      break;
    }
  }
  r.completed = r.steps_completed == options.steps;
  r.final_params = theta;
  return r;
}

ParamVector BezierPath::point(double t) const {
  if (t == 0.0) return start;
  if (t == 1.0) return end;
  const double s = 1.0 - t;
  return (s * s) * start + (2.0 * t * s) * control + (t * t) * end;
}

BezierObjective::BezierObjective(const Differentiable& f, ParamVector start, ParamVector end, int samples)
    : f_(f), start_(std::move(start)), end_(std::move(end)) {
  if (samples < 2) throw std::invalid_argument("BezierObjective: need at least two samples");
  if (start_.size() != end_.size() || static_cast<std::size_t>(start_.size()) != f_.dimension()) {
    throw std::invalid_argument("BezierObjective: endpoint dimension mismatch");
  }
  reference_ = f_.value(start_);
  t_ = uniform_samples(0.0, 1.0, samples);
  w_.assign(t_.size(), 1.0 / (samples - 1));
  w_.front() *= 0.5;
  w_.back() *= 0.5;
}

double BezierObjective::value(const ParamVector& control) const {
  const BezierPath path{start_, end_, control};
  double total = 0.0;
  for (std::size_t s = 0; s < t_.size(); ++s) {
    const double d = f_.value(path.point(t_[s])) - reference_;
    total += 0.5 * w_[s] * d * d;
  }
  return total;
}

double BezierObjective::value_and_gradient(const ParamVector& control, ParamVector& grad) const {
  const BezierPath path{start_, end_, control};
  std::vector<double> vals(t_.size());
  std::vector<ParamVector> grads(t_.size());
  parallel_for(t_.size(), [&](std::size_t s) {
    const double t = t_[s];
    if (t == 0.0 || t == 1.0) {
      vals[s] = f_.value(path.point(t));
    } else {
      vals[s] = f_.value_and_gradient(path.point(t), grads[s]);
    }
  });
  grad = ParamVector::Zero(start_.size());
  double total = 0.0;
  for (std::size_t s = 0; s < t_.size(); ++s) {
    const double d = vals[s] - reference_;
    if (!std::isfinite(d)) throw NonFiniteObjective("BezierObjective: non-finite loss on the path");
    total += 0.5 * w_[s] * d * d;
    if (grads[s].size() > 0) grad += (w_[s] * d * 2.0 * t_[s] * (1.0 - t_[s])) * grads[s];
  }
  return total;
}

void BezierObjective::hessian_block(const ParamVector&, const Eigen::MatrixXd&, Eigen::MatrixXd&) const {
  throw std::logic_error("BezierObjective: Hessian products are not available");
}

ModeConnectResult mode_connect(const Differentiable& f, const ParamVector& a, const ParamVector& b,
                               const ModeConnectOptions& options) {
  const BezierObjective obj(f, a, b, options.t_samples);
  ModeConnectResult r;
  r.path = BezierPath::straight(a, b);
  r.initial_objective = obj.value(r.path.control);
  r.objective = r.initial_objective;
  TrainOptions topt;
  topt.store_params = false;
  topt.observer = [&](int, const ParamVector& p, double loss) {
    r.objective_history.push_back(loss);
    if (loss < r.objective) {
      r.objective = loss;
      r.path.control = p;
    }
  };
  const auto res = train(obj, r.path.control, options.optimizer, topt);
  r.aborted = res.aborted;

  const Differentiable& lin = options.linear_objective ? *options.linear_objective : f;
  r.linear = line_scan(value_evaluator(lin), a, b - a, 0.0, 1.0, options.profile_samples);
  r.bezier.t = uniform_samples(0.0, 1.0, options.profile_samples);
  r.bezier.loss.resize(r.bezier.t.size());
  r.bezier.finite.resize(r.bezier.t.size());
  parallel_for(r.bezier.t.size(), [&](std::size_t i) {
    r.bezier.loss[i] = safe_value(value_evaluator(f), r.path.point(r.bezier.t[i]), i);
    r.bezier.finite[i] = std::isfinite(r.bezier.loss[i]) ? 1 : 0;
  });
  const double la = lin.value(a);
  const double fa = f.value(a);
  r.linear_barrier = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < r.linear.loss.size(); ++i) {
    r.linear_barrier = std::max(r.linear_barrier, r.linear.finite[i] ? r.linear.loss[i] - la : kNaN);
  }
  for (std::size_t i = 0; i < r.bezier.loss.size(); ++i) {
    const double d = r.bezier.finite[i] ? std::abs(r.bezier.loss[i] - fa) : std::numeric_limits<double>::infinity();
    r.bezier_max_deviation = std::max(r.bezier_max_deviation, d);
  }
  return r;
}

std::size_t PlaneGrid::finite_count() const {
  return static_cast<std::size_t>(std::count(finite.begin(), finite.end(), std::uint8_t{1}));
}

PlaneGrid plane_scan(const Evaluator& loss, const ParamVector& center, const ParamVector& dir_k,
                     const ParamVector& dir_j, double lo, double hi, int resolution) {
  if (dir_k.size() != center.size() || dir_j.size() != center.size()) {
    throw std::invalid_argument("plane_scan: direction dimension mismatch");
  }
  if (dir_k.norm() == 0.0 || dir_j.norm() == 0.0) throw std::invalid_argument("plane_scan: zero direction");
  PlaneGrid g;
  g.center = center;
  g.dir_k = dir_k.normalized();
  g.dir_j = dir_j.normalized();
  g.eps_k = uniform_samples(lo, hi, resolution);
  g.eps_j = g.eps_k;
  const auto n = static_cast<std::size_t>(resolution);
  g.loss.resize(resolution, resolution);
  g.finite.assign(n * n, 0);
  parallel_for(n * n, [&](std::size_t cell) {
    const std::size_t m = cell / n;
    const std::size_t j = cell % n;
    const double v = safe_value(loss, center + g.eps_k[m] * g.dir_k + g.eps_j[j] * g.dir_j, cell);
    g.loss(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(j)) = v;
    g.finite[cell] = std::isfinite(v) ? 1 : 0;
  });
  return g;
}

namespace {

SpectrumHistory spectra_at(const Differentiable& f, const TrajectoryRecord& trajectory, std::vector<int> epochs) {
  SpectrumHistory h;
  h.epochs = std::move(epochs);
  h.eigenvalues.resize(h.epochs.size());
  h.lambda_max.resize(h.epochs.size());
  h.lambda_min.resize(h.epochs.size());
  for (std::size_t s = 0; s < h.epochs.size(); ++s) {
    const auto vals = eig_symmetric(hessian(f, trajectory.column(static_cast<std::size_t>(h.epochs[s])))).values;
    h.eigenvalues[s] = vals;
    h.lambda_min[s] = vals[0];
    h.lambda_max[s] = vals[vals.size() - 1];
  }
  return h;
}

}  // namespace

SpectrumHistory spectrum_evolution(const Differentiable& f, const TrajectoryRecord& trajectory, int every) {
  if (every < 1) throw std::invalid_argument("spectrum_evolution: sampling interval must be positive");
  if (trajectory.size() == 0) throw std::invalid_argument("spectrum_evolution: empty trajectory");
  const int last = static_cast<int>(trajectory.size()) - 1;
  std::vector<int> epochs;
  for (int t = 0; t <= last; t += every) epochs.push_back(t);
  if (epochs.back() != last) epochs.push_back(last);
  return spectra_at(f, trajectory, std::move(epochs));
}

SpectrumHistory spectrum_endpoints(const Differentiable& f, const TrajectoryRecord& trajectory) {
  if (trajectory.size() == 0) throw std::invalid_argument("spectrum_endpoints: empty trajectory");
  const int last = static_cast<int>(trajectory.size()) - 1;
  return spectra_at(f, trajectory, last == 0 ? std::vector<int>{0} : std::vector<int>{0, last});
}

double near_zero_fraction(const Eigen::VectorXd& eigenvalues, double rel) {
  if (eigenvalues.size() == 0) return 0.0;
  const double cut = rel * eigenvalues.cwiseAbs().maxCoeff();
  return static_cast<double>((eigenvalues.array().abs() < cut).count()) / static_cast<double>(eigenvalues.size());
}

SpectrumHistogram spectrum_histogram(const SpectrumHistory& history, int bins, double shift) {
  if (bins < 1) throw std::invalid_argument("spectrum_histogram: need at least one bin");
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  for (const auto& v : history.eigenvalues) {
    for (Eigen::Index i = 0; i < v.size(); ++i) {
      const double x = std::log10(std::abs(v[i]) + shift);
      lo = std::min(lo, x);
      hi = std::max(hi, x);
    }
  }
  SpectrumHistogram h;
  if (!(hi >= lo)) {
    lo = std::log10(shift);
    hi = lo;
  }
  lo = std::floor(lo);
  hi = std::max(std::ceil(hi), lo + 1.0);
  h.edges = uniform_samples(lo, hi, bins + 1);
  h.counts = Eigen::MatrixXd::Zero(bins, static_cast<Eigen::Index>(history.eigenvalues.size()));
  for (std::size_t s = 0; s < history.eigenvalues.size(); ++s) {
    const auto& v = history.eigenvalues[s];
    for (Eigen::Index i = 0; i < v.size(); ++i) {
      const double x = std::log10(std::abs(v[i]) + shift);
      auto b = static_cast<int>((x - lo) / (hi - lo) * bins);
      b = std::clamp(b, 0, bins - 1);
      h.counts(b, static_cast<Eigen::Index>(s)) += 1.0;
    }
  }
  return h;
}

GramAnalysis gram_rank(const BasisSet& basis, const std::vector<double>& weights, double rel_threshold,
                       bool with_derivatives) {
  const auto& h = basis.values;
  if (static_cast<std::size_t>(h.rows()) != weights.size()) {
    throw std::invalid_argument("gram_rank: basis rows do not match the weights");
  }
  const Eigen::Map<const Eigen::VectorXd> w(weights.data(), static_cast<Eigen::Index>(weights.size()));
  GramAnalysis g;
  g.gram = h.transpose() * w.asDiagonal() * h;
  if (with_derivatives) {
    for (const auto& d : basis.derivatives) g.gram += d.transpose() * w.asDiagonal() * d;
  }
  g.gram = 0.5 * (g.gram + g.gram.transpose()).eval();
  const auto eig = eig_symmetric(g.gram);
  g.eigenvalues = eig.values;
  g.eigenvectors = eig.vectors;
  const double lmax = g.eigenvalues.size() ? g.eigenvalues.maxCoeff() : 0.0;
  g.threshold = rel_threshold * lmax;
  g.rank = static_cast<int>((g.eigenvalues.array() > g.threshold).count());
  return g;
}

std::optional<ParamVector> null_direction(const NetworkSpec& spec, const BasisSet& basis,
                                          const std::vector<double>& weights, double rel_threshold, int component) {
  const auto layout = param_layout(spec);
  const int n = spec.basis_size();
  const auto points = basis.values.rows();
  if (basis.values.cols() != n) throw std::invalid_argument("null_direction: basis size does not match the spec");
  if (static_cast<std::size_t>(points) != weights.size()) {
    throw std::invalid_argument("null_direction: basis rows do not match the weights");
  }
  if (component < 0 || component >= spec.output_dim) throw std::invalid_argument("null_direction: bad component");
  const auto blocks = static_cast<Eigen::Index>(1 + basis.derivatives.size());
  Eigen::MatrixXd a(points * blocks, n);
  const Eigen::Map<const Eigen::VectorXd> w(weights.data(), points);
  const Eigen::VectorXd root = w.cwiseSqrt();
  a.topRows(points) = root.asDiagonal() * basis.values;
  for (Eigen::Index b = 1; b < blocks; ++b) {
    a.middleRows(b * points, points) = root.asDiagonal() * basis.derivatives[static_cast<std::size_t>(b - 1)];
  }
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(a, Eigen::ComputeFullV);
  const auto& sv = svd.singularValues();
  const double smax = sv.size() ? sv[0] : 0.0;
  const double smin = sv.size() < n ? 0.0 : sv[n - 1];
  if (!(smin * smin <= rel_threshold * smax * smax)) return std::nullopt;
  Eigen::VectorXd delta = svd.matrixV().col(n - 1);
  fix_sign(delta);
  ParamVector v = ParamVector::Zero(static_cast<Eigen::Index>(layout.total));
  v.segment(static_cast<Eigen::Index>(layout.outer.offset) + component * n, n) = delta;
  return v;
}

double field_change(const NetworkSpec& spec, const ParamVector& theta, const ParamVector& v,
                    const QuadratureGrid& grid) {
  const Eigen::MatrixXd u0 = field_on_grid(spec, theta, grid);
  const Eigen::MatrixXd u1 = field_on_grid(spec, theta + v, grid);
  const double base = u0.norm();
  return base > 0.0 ? (u1 - u0).norm() / base : (u1 - u0).norm();
}

PcaBasis pca_trajectory(const Eigen::MatrixXd& theta, int q) {
  if (q < 1) throw std::invalid_argument("pca_trajectory: need at least one component");
  if (theta.cols() < q) throw std::invalid_argument("pca_trajectory: fewer snapshots than components");
  PcaBasis p;
  p.mean = theta.rowwise().mean();
  const Eigen::MatrixXd centered = theta.colwise() - p.mean;
  const Eigen::MatrixXd cov = centered * centered.transpose();
  const double total = cov.trace();
  if (!(total > 0.0)) {
    p.components.resize(theta.rows(), 0);
    p.coordinates.resize(0, theta.cols());
    return p;
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(cov);
  const auto n = cov.rows();
  const auto keep = std::min<Eigen::Index>(q, n);
  p.components.resize(n, keep);
  p.explained.resize(keep);
  for (Eigen::Index k = 0; k < keep; ++k) {
    p.components.col(k) = solver.eigenvectors().col(n - 1 - k);
    fix_sign(p.components.col(k));
    p.explained[k] = std::max(0.0, solver.eigenvalues()[n - 1 - k]) / total;
  }
  p.coordinates = p.components.transpose() * centered;
  return p;
}

AccelerationSeries acceleration_series(const TrajectoryRecord& trajectory, double eta, bool normalize) {
  if (!(eta > 0.0)) throw std::invalid_argument("acceleration_series: step size must be positive");
  if (trajectory.size() < 3) throw std::invalid_argument("acceleration_series: need at least three epochs");
  AccelerationSeries a;
  ParamVector prev = trajectory.column(0);
  ParamVector cur = trajectory.column(1);
  for (std::size_t t = 1; t + 1 < trajectory.size(); ++t) {
    ParamVector next = trajectory.column(t + 1);
    const double acc = (next - 2.0 * cur + prev).norm() / (eta * eta);
    a.epochs.push_back(static_cast<int>(t));
    if (normalize) {
      const double vel = (next - cur).norm() / eta;
      const bool ok = vel > 0.0;
      a.value.push_back(ok ? acc / (vel * vel) : kNaN);
      a.valid.push_back(ok ? 1 : 0);
    } else {
      a.value.push_back(acc);
      a.valid.push_back(1);
    }
    prev = std::move(cur);
    cur = std::move(next);
  }
  return a;
}

std::pair<double, double> acceleration_medians(const AccelerationSeries& series, int converged_epoch,
                                               double fraction) {
  const auto span = std::max<std::size_t>(1, static_cast<std::size_t>(fraction * series.epochs.size()));
  std::vector<double> early;
  std::vector<double> late;
  for (std::size_t i = 0; i < series.epochs.size(); ++i) {
    if (!series.valid[i]) continue;
    const int e = series.epochs[i];
    if (i < span) early.push_back(series.value[i]);
    if (e < converged_epoch && e >= converged_epoch - static_cast<int>(span)) late.push_back(series.value[i]);
  }
  return {median(early), median(late)};
}

int convergence_epoch(const std::vector<double>& losses, double rel_tol) {
  if (losses.empty()) return 0;
  const double final = losses.back();
  const double tol = rel_tol * std::max(std::abs(final), std::numeric_limits<double>::min());
  int e = static_cast<int>(losses.size()) - 1;
  while (e > 0 && std::abs(losses[static_cast<std::size_t>(e - 1)] - final) <= tol) --e;
  return e;
}

void classify_stuck(ProbeMinimaResult& result, const std::vector<int>& widths, int band_epochs, double factor) {
  result.best_loss.assign(widths.size(), kNaN);
  result.band.assign(widths.size(), kNaN);
  for (std::size_t w = 0; w < widths.size(); ++w) {
    const ProbeRun* best = nullptr;
    for (const auto& r : result.runs) {
      if (r.width != widths[w] || r.aborted) continue;
      if (!best || r.final_loss < best->final_loss) best = &r;
    }
    if (!best) continue;
    const auto n = best->losses.size();
    const auto from = n > static_cast<std::size_t>(band_epochs) ? n - static_cast<std::size_t>(band_epochs) : 0;
    const auto [lo, hi] = std::minmax_element(best->losses.begin() + static_cast<std::ptrdiff_t>(from), best->losses.end());
    const double band = *hi - *lo;
    result.best_loss[w] = best->final_loss;
    result.band[w] = band;
    for (auto& r : result.runs) {
      if (r.width != widths[w]) continue;
      r.stuck = !r.aborted && r.final_loss - best->final_loss > factor * band;
    }
  }
}

ProbeMinimaResult probe_minima(const ProbeMinimaConfig& config) {
  ProbeMinimaResult result;
  for (int width : config.widths) {
    for (OptimizerKind kind : config.optimizers) {
      for (int trial = 0; trial < config.trials; ++trial) {
        ProbeRun r;
        r.width = width;
        r.optimizer = kind;
        r.trial = trial;
        r.seed = config.seed + static_cast<std::uint64_t>(trial);
        result.runs.push_back(r);
      }
    }
  }
  parallel_for(result.runs.size(), [&](std::size_t i) {
    auto& r = result.runs[i];
    ObjectiveConfig oc = config.objective;
    oc.network.hidden_widths.assign(oc.network.hidden_widths.size(), r.width);
    const Objective obj(oc);
    OptimizerConfig opt = config.optimizer;
    opt.kind = r.optimizer;
    opt.seed = r.seed;
    TrainOptions topt;
    topt.store_params = false;
    const auto res = train(obj, init_params(oc.network, r.seed), opt, topt);
    r.losses = res.trajectory.losses();
    r.final_loss = res.final_loss;
    r.aborted = res.aborted;
    r.abort_epoch = res.abort_epoch;
  });
  classify_stuck(result, config.widths, config.band_epochs, config.stuck_factor);
  return result;
}

GoldilocksResult goldilocks_sweep(const GoldilocksConfig& config) {
  const Objective obj(config.objective);
  GoldilocksResult g;
  g.radii = config.radii;
  const auto nr = static_cast<Eigen::Index>(config.radii.size());
  g.final_loss = Eigen::MatrixXd::Constant(nr, config.trials, kNaN);
  const Rng init = Rng::stream(config.seed, "init");
  parallel_for(config.radii.size() * static_cast<std::size_t>(config.trials), [&](std::size_t cell) {
    const auto i = cell / static_cast<std::size_t>(config.trials);
    const auto k = cell % static_cast<std::size_t>(config.trials);
    Rng rng = init.split(static_cast<std::uint64_t>(k));
    OptimizerConfig opt = config.optimizer;
    opt.seed = config.seed;
    TrainOptions topt;
    topt.store_params = false;
    const auto res = train_on_sphere(obj, init_params(obj.network(), rng), opt, config.radii[i], topt);
    if (!res.aborted) g.final_loss(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = res.final_loss;
  });
  return g;
}

std::vector<RadiusTrack> radius_track(const RadiusTrackConfig& config) {
  const Objective obj(config.objective);
  std::vector<RadiusTrack> out(config.scales.size());
  Rng rng = Rng::stream(config.seed, "init");
  const ParamVector base = init_params(obj.network(), rng);
  parallel_for(out.size(), [&](std::size_t i) {
    OptimizerConfig opt = config.optimizer;
    opt.seed = config.seed;
    TrainOptions topt;
    topt.store_params = false;
    auto res = train(obj, config.scales[i] * base, opt, topt);
    out[i].scale = config.scales[i];
    out[i].radii = res.trajectory.radii();
    out[i].losses = res.trajectory.losses();
    out[i].aborted = res.aborted;
  });
  return out;
}

IntrinsicDimResult intrinsic_dimension(const IntrinsicDimConfig& config) {
  if (config.dims.empty()) throw std::invalid_argument("intrinsic_dimension: no subspace dimensions");
  const Objective obj(config.objective);
  const Rng offsets = Rng::stream(config.seed, "subspace-offset");
  const Rng projections = Rng::stream(config.seed, "subspace-projection");
  auto offset_for = [&](std::size_t i) {
    Rng r = offsets.split(static_cast<std::uint64_t>(i));
    return init_params(obj.network(), r);
  };
  IntrinsicDimResult result;
  result.runs.resize(config.dims.size() + 1);
  parallel_for(config.dims.size() + 1, [&](std::size_t i) {
    OptimizerConfig opt = config.optimizer;
    opt.seed = config.seed;
    TrainOptions topt;
    topt.store_params = false;
    IntrinsicDimRun& run = result.runs[i];
    if (i == config.dims.size()) {
      opt.epochs = config.full_epochs;
      const auto res = train(obj, offset_for(0), opt, topt);
      run.dim = static_cast<int>(obj.dimension());
      run.losses = res.trajectory.losses();
      run.final_loss = res.final_loss;
      run.aborted = res.aborted;
      return;
    }
    Rng pr = projections.split(static_cast<std::uint64_t>(i));
    const auto map = make_subspace_map(offset_for(i), config.dims[i], pr, config.orthonormalize);
    const auto res = train_subspace(obj, map, opt, topt);
    run.dim = config.dims[i];
    run.losses = res.z.trajectory.losses();
    run.final_loss = res.z.final_loss;
    run.aborted = res.z.aborted;
  });
  result.full = std::move(result.runs.back());
  result.runs.pop_back();
  return result;
}

}  // namespace pinnscape
