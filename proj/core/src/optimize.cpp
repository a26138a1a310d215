#include "pinnscape/optimize.hpp"

#include <atomic>
#include <cmath>
#include <fstream>
#include <random>
#include <sstream>
#include <stdexcept>

namespace pinnscape {

OptimizerConfig OptimizerConfig::adam(double learning_rate, int epochs) {
  OptimizerConfig c;
  c.learning_rate = learning_rate;
  c.epochs = epochs;
  return c;
}

OptimizerConfig OptimizerConfig::gd(double learning_rate, int epochs) {
  OptimizerConfig c = adam(learning_rate, epochs);
  c.kind = OptimizerKind::Gd;
  return c;
}

void OptimizerConfig::validate() const {
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) {
    throw std::invalid_argument("optimizer: learning_rate must be positive");
  }
  if (epochs < 1) throw std::invalid_argument("optimizer: epochs must be at least 1");
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) {
    throw std::invalid_argument("optimizer: ADAM betas must lie in [0, 1)");
  }
  if (!(epsilon > 0.0)) throw std::invalid_argument("optimizer: epsilon must be positive");
}

std::string to_string(OptimizerKind k) { return k == OptimizerKind::Adam ? "adam" : "gd"; }

OptimizerKind optimizer_from_string(const std::string& s) {
  if (s == "adam") return OptimizerKind::Adam;
  if (s == "gd") return OptimizerKind::Gd;
  throw std::invalid_argument("unknown optimizer: " + s);
}

struct TrajectoryRecord::Spill {
  std::filesystem::path path;
  std::fstream file;

  ~Spill() {
    file.close();
    std::error_code ec;
    std::filesystem::remove(path, ec);
  }
};

TrajectoryRecord::TrajectoryRecord(std::size_t dim, bool store_params, std::size_t spill_bytes,
                                   std::filesystem::path spill_dir)
    : dim_(dim), store_params_(store_params), spill_bytes_(spill_bytes), spill_dir_(std::move(spill_dir)) {}

TrajectoryRecord::~TrajectoryRecord() = default;
TrajectoryRecord::TrajectoryRecord(TrajectoryRecord&&) noexcept = default;
TrajectoryRecord& TrajectoryRecord::operator=(TrajectoryRecord&&) noexcept = default;

void TrajectoryRecord::spill_out() {
  static std::atomic<unsigned> counter{0};
  std::random_device rd;
  std::ostringstream name;
  name << "pinnscape-trajectory-" << std::hex << rd() << '-' << counter++ << ".bin";
  const auto dir = spill_dir_.empty() ? std::filesystem::temp_directory_path() : spill_dir_;
  auto spill = std::make_unique<Spill>();
  spill->path = dir / name.str();
  spill->file.open(spill->path, std::ios::binary | std::ios::in | std::ios::out | std::ios::trunc);
  if (!spill->file) throw std::runtime_error("trajectory: cannot open spill file " + spill->path.string());
  spill->file.write(reinterpret_cast<const char*>(columns_.data()),
                    static_cast<std::streamsize>(columns_.size() * sizeof(double)));
  columns_.clear();
  columns_.shrink_to_fit();
  spill_ = std::move(spill);
}

void TrajectoryRecord::append(const ParamVector& theta, double loss) {
  if (static_cast<std::size_t>(theta.size()) != dim_) throw std::invalid_argument("trajectory: dimension mismatch");
  if (losses_.empty()) first_ = theta;
  last_ = theta;
  losses_.push_back(loss);
  radii_.push_back(theta.norm());
  if (!store_params_) return;
  if (spill_) {
    spill_->file.seekp(0, std::ios::end);
    spill_->file.write(reinterpret_cast<const char*>(theta.data()), static_cast<std::streamsize>(dim_ * sizeof(double)));
    return;
  }
  columns_.insert(columns_.end(), theta.data(), theta.data() + theta.size());
  if (columns_.size() * sizeof(double) > spill_bytes_) spill_out();
}

ParamVector TrajectoryRecord::column(std::size_t t) const {
  if (t >= size()) throw std::out_of_range("trajectory: epoch out of range");
  if (t == 0) return first_;
  if (t + 1 == size()) return last_;
  if (!store_params_) throw std::logic_error("trajectory: parameters were not stored");
  ParamVector v(static_cast<Eigen::Index>(dim_));
  if (spill_) {
    spill_->file.seekg(static_cast<std::streamoff>(t * dim_ * sizeof(double)));
    spill_->file.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(dim_ * sizeof(double)));
  } else {
    std::copy_n(columns_.data() + t * dim_, dim_, v.data());
  }
  return v;
}

Eigen::MatrixXd TrajectoryRecord::matrix() const {
  if (!store_params_) throw std::logic_error("trajectory: parameters were not stored");
  Eigen::MatrixXd m(static_cast<Eigen::Index>(dim_), static_cast<Eigen::Index>(size()));
  if (spill_) {
    spill_->file.seekg(0);
    spill_->file.read(reinterpret_cast<char*>(m.data()), static_cast<std::streamsize>(m.size() * sizeof(double)));
  } else {
    std::copy(columns_.begin(), columns_.end(), m.data());
  }
  return m;
}

namespace {

TrainResult run(const Differentiable& f, ParamVector theta, const OptimizerConfig& cfg, const TrainOptions& opt,
                std::optional<double> radius) {
  cfg.validate();
  if (static_cast<std::size_t>(theta.size()) != f.dimension()) {
    throw std::invalid_argument("train: initial vector has the wrong dimension");
  }
  auto project = [&](ParamVector& v) {
    if (radius) v *= *radius / v.norm();
  };
  project(theta);

  TrainResult res;
  res.trajectory = TrajectoryRecord(f.dimension(), opt.store_params, opt.spill_bytes, opt.spill_dir);
  res.final_params = theta;
  Rng mc = Rng::stream(cfg.seed, "monte-carlo");
  const Eigen::Index n = theta.size();
  Eigen::VectorXd m = Eigen::VectorXd::Zero(n);
  Eigen::VectorXd v = Eigen::VectorXd::Zero(n);
  ParamVector grad;
  double b1t = 1.0;
  double b2t = 1.0;
  for (int t = 0;; ++t) {
    double loss = 0.0;
    try {
      loss = t < cfg.epochs ? f.sampled_value_and_gradient(theta, grad, mc) : f.sampled_value(theta, mc);
      if (!std::isfinite(loss)) throw NonFiniteObjective("train: non-finite loss");
    } catch (const NonFiniteObjective& e) {
      res.aborted = true;
      res.abort_epoch = t;
      res.abort_point = e.point_index();
      res.abort_reason = e.what();
      break;
    }
    res.trajectory.append(theta, loss);
    if (opt.observer) opt.observer(t, theta, loss);
    res.final_params = theta;
    res.final_loss = loss;
    if (t == cfg.epochs) break;

    if (cfg.kind == OptimizerKind::Gd) {
      theta -= cfg.learning_rate * grad;
    } else {
      b1t *= cfg.beta1;
      b2t *= cfg.beta2;
      m = cfg.beta1 * m + (1.0 - cfg.beta1) * grad;
      v = cfg.beta2 * v + (1.0 - cfg.beta2) * grad.cwiseProduct(grad);
      const double c1 = 1.0 / (1.0 - b1t);
      const double c2 = 1.0 / (1.0 - b2t);
      theta.array() -= cfg.learning_rate * (m.array() * c1) / ((v.array() * c2).sqrt() + cfg.epsilon);
    }
    project(theta);
  }
  return res;
}

}  // namespace

TrainResult train(const Differentiable& objective, const ParamVector& init, const OptimizerConfig& config,
                  const TrainOptions& options) {
  return run(objective, init, config, options, std::nullopt);
}

TrainResult train_on_sphere(const Differentiable& objective, const ParamVector& init, const OptimizerConfig& config,
                            double radius, const TrainOptions& options) {
  if (!(radius > 0.0)) throw std::invalid_argument("train_on_sphere: radius must be positive");
  if (init.norm() == 0.0) throw std::invalid_argument("train_on_sphere: initial vector is zero");
  return run(objective, init, config, options, radius);
}

SubspaceMap make_subspace_map(const ParamVector& offset, int d, Rng& rng, bool orthonormalize) {
  const auto n = offset.size();
  if (d < 1 || d > n) throw std::invalid_argument("make_subspace_map: need 1 <= d <= |theta|");
  Eigen::MatrixXd p(n, d);
  for (Eigen::Index j = 0; j < d; ++j) {
    for (Eigen::Index i = 0; i < n; ++i) p(i, j) = rng.normal();
  }
  if (orthonormalize) {
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(p);
    p = qr.householderQ() * Eigen::MatrixXd::Identity(n, d);
  } else {
    for (Eigen::Index j = 0; j < d; ++j) p.col(j).normalize();
  }
  return {offset, std::move(p)};
}

SubspaceObjective::SubspaceObjective(const Differentiable& base, SubspaceMap map) : base_(base), map_(std::move(map)) {
  if (static_cast<std::size_t>(map_.offset.size()) != base_.dimension() ||
      map_.projection.rows() != map_.offset.size()) {
    throw std::invalid_argument("SubspaceObjective: map does not match the objective");
  }
}

double SubspaceObjective::value(const ParamVector& z) const { return base_.value(map_.embed(z)); }

double SubspaceObjective::value_and_gradient(const ParamVector& z, ParamVector& grad) const {
  ParamVector g;
  const double v = base_.value_and_gradient(map_.embed(z), g);
  grad = map_.projection.transpose() * g;
  return v;
}

void SubspaceObjective::hessian_block(const ParamVector& z, const Eigen::MatrixXd& directions,
                                      Eigen::MatrixXd& out) const {
  Eigen::MatrixXd full;
  base_.hessian_block(map_.embed(z), map_.projection * directions, full);
  out = map_.projection.transpose() * full;
}

double SubspaceObjective::sampled_value(const ParamVector& z, Rng& rng) const {
  return base_.sampled_value(map_.embed(z), rng);
}

double SubspaceObjective::sampled_value_and_gradient(const ParamVector& z, ParamVector& grad, Rng& rng) const {
  ParamVector g;
  const double v = base_.sampled_value_and_gradient(map_.embed(z), g, rng);
  grad = map_.projection.transpose() * g;
  return v;
}

SubspaceResult train_subspace(const Differentiable& objective, const SubspaceMap& map, const OptimizerConfig& config,
                              const TrainOptions& options) {
  const SubspaceObjective sub(objective, map);
  TrajectoryRecord embedded(objective.dimension(), options.store_params, options.spill_bytes, options.spill_dir);
  TrainOptions inner = options;
  inner.observer = [&](int epoch, const ParamVector& z, double loss) {
    embedded.append(map.embed(z), loss);
    if (options.observer) options.observer(epoch, z, loss);
  };
  TrainResult z = train(sub, Eigen::VectorXd::Zero(map.projection.cols()), config, inner);
  return {std::move(z), std::move(embedded)};
}

}  // namespace pinnscape
