#include "commands.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <stdexcept>

#include "pinnscape/landscape.hpp"
#include "pinnscape/network.hpp"
#include "pinnscape/optimize.hpp"
#include "pinnscape/parallel.hpp"
#include "pinnscape/problems.hpp"

namespace pinnscape::cli {

std::string to_string(Status s) {
  switch (s) {
    case Status::Ok: return "ok";
    case Status::NonFinite: return "non_finite_abort";
    case Status::ProbeFailure: return "probe_failure";
  }
  return "";
}

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

using Runner = std::function<CommandOutcome(const RunConfig&, io::RunDirectory&)>;

std::vector<double> iota_d(std::size_t n, double start = 0.0) {
  std::vector<double> v(n);
  for (std::size_t i = 0; i < n; ++i) v[i] = start + static_cast<double>(i);
  return v;
}

std::vector<double> as_double(const std::vector<std::uint8_t>& m) { return {m.begin(), m.end()}; }

std::vector<double> as_double(const std::vector<int>& m) { return {m.begin(), m.end()}; }

/// Pads a ragged set of series with NaN into a (series x longest) row-major block.
std::vector<double> pad_rows(const std::vector<std::vector<double>>& rows, std::size_t& width) {
  width = 0;
  for (const auto& r : rows) width = std::max(width, r.size());
  std::vector<double> out(rows.size() * width, kNaN);
  for (std::size_t i = 0; i < rows.size(); ++i) std::copy(rows[i].begin(), rows[i].end(), out.begin() + i * width);
  return out;
}

ParamVector single_init(const RunConfig& rc, const Objective& obj) {
  return init_params(obj.network(), rc.seed, rc.init_scale);
}

ParamVector trial_init(const RunConfig& rc, const Objective& obj, std::uint64_t k, double scale) {
  Rng rng = Rng::stream(rc.seed, "init").split(k);
  return init_params(obj.network(), rng, scale);
}

TrainResult fit(const RunConfig& rc, const Objective& obj, const ParamVector& init, bool store_params) {
  TrainOptions topt;
  topt.store_params = store_params;
  return train(obj, init, rc.optimizer, topt);
}

void write_losses(io::RunDirectory& out, const TrajectoryRecord& traj) {
  out.write_csv("loss", {"epoch", "loss", "radius"}, {iota_d(traj.size()), traj.losses(), traj.radii()});
}

json abort_info(const TrainResult& r) {
  json j = {{"aborted", r.aborted}};
  if (r.abort_epoch) j["abort_epoch"] = *r.abort_epoch;
  if (r.abort_point) j["abort_point"] = *r.abort_point;
  if (!r.abort_reason.empty()) j["abort_reason"] = r.abort_reason;
  return j;
}

CommandOutcome aborted_outcome(const TrainResult& r, io::RunDirectory& out, const std::string& what) {
  write_losses(out, r.trajectory);
  CommandOutcome o;
  o.status = Status::NonFinite;
  o.message = what + " training produced a non-finite loss";
  o.results["training"] = abort_info(r);
  return o;
}

void write_plane(io::RunDirectory& out, const std::string& name, const std::vector<PlaneGrid>& planes) {
  const auto res = static_cast<std::int64_t>(planes.front().eps_k.size());
  const auto n = static_cast<std::int64_t>(planes.size());
  std::vector<double> loss;
  std::vector<std::uint8_t> mask;
  loss.reserve(static_cast<std::size_t>(n * res * res));
  for (const auto& p : planes) {
    for (Eigen::Index m = 0; m < p.loss.rows(); ++m) {
      for (Eigen::Index k = 0; k < p.loss.cols(); ++k) loss.push_back(p.loss(m, k));
    }
    mask.insert(mask.end(), p.finite.begin(), p.finite.end());
  }
  const json meta = {{"axes", {"plane", "eps_k", "eps_j"}}};
  out.write_tensor(name + "_loss", loss, {n, res, res}, meta);
  out.write_mask(name + "_finite", mask, n, res * res, {{"axes", {"plane", "eps_k * eps_j"}}});
  out.write_vector(name + "_eps", planes.front().eps_k);
}

json plane_summary(const PlaneGrid& p) {
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (Eigen::Index m = 0; m < p.loss.rows(); ++m) {
    for (Eigen::Index k = 0; k < p.loss.cols(); ++k) {
      if (!std::isfinite(p.loss(m, k))) continue;
      lo = std::min(lo, p.loss(m, k));
      hi = std::max(hi, p.loss(m, k));
    }
  }
  return {{"finite_cells", p.finite_count()}, {"min", lo}, {"max", hi}};
}

// ----------------------------------------------------------------------------

CommandOutcome cmd_train(const RunConfig& rc, io::RunDirectory& out) {
  const Objective obj(rc.objective);
  const ParamVector init = single_init(rc, obj);
  const bool keep = rc.probe.at("trajectory").get<bool>();
  const auto r = fit(rc, obj, init, keep);
  CommandOutcome o;
  write_losses(out, r.trajectory);
  out.write_vector("initial_params", init);
  out.write_vector("final_params", r.final_params);
  if (keep) {
    const auto stride = rc.probe.at("trajectory_stride").get<std::size_t>();
    std::vector<double> rows;
    std::int64_t count = 0;
    for (std::size_t t = 0; t < r.trajectory.size(); t += stride, ++count) {
      const ParamVector c = r.trajectory.column(t);
      rows.insert(rows.end(), c.data(), c.data() + c.size());
    }
    out.write_tensor("trajectory", rows, {count, static_cast<std::int64_t>(obj.dimension())},
                     {{"axes", {"epoch", "parameter"}}, {"stride", stride}});
  }
  o.results = {{"parameters", obj.dimension()},
               {"epochs_recorded", r.trajectory.size()},
               {"initial_loss", obj.value(init)},
               {"final_loss", r.final_loss},
               {"manufactured_loss", manufactured_loss(obj)},
               {"max_pointwise_error", max_pointwise_error(obj, r.final_params)},
               {"training", abort_info(r)}};
  if (r.aborted) {
    o.status = Status::NonFinite;
    o.message = "training produced a non-finite loss";
  }
  return o;
}

CommandOutcome cmd_verify(const RunConfig& rc, io::RunDirectory& out) {
  const Objective obj(rc.objective);
  const auto r = fit(rc, obj, single_init(rc, obj), false);
  if (r.aborted) return aborted_outcome(r, out, "verification");
  write_losses(out, r.trajectory);
  out.write_vector("final_params", r.final_params);

  const auto cloud_seed = rc.probe.at("test_cloud_seed").get<std::uint64_t>();
  const QuadratureGrid pts = verification_points(rc.objective.problem, cloud_seed);
  const Eigen::MatrixXd u = field_on_grid(obj.network(), r.final_params, pts);
  std::vector<double> err(pts.size());
  for (std::size_t i = 0; i < pts.size(); ++i) {
    const auto p = pts.point(i);
    const auto row = static_cast<Eigen::Index>(i);
    if (pts.dim == 1) {
      err[i] = std::abs(u(row, 0) - manufactured_1d(p[0]));
    } else {
      const auto m = manufactured_2d(p[0], p[1], rc.objective.alpha);
      err[i] = std::hypot(u(row, 0) - m[0], u(row, 1) - m[1]);
    }
  }
  Eigen::MatrixXd coords(static_cast<Eigen::Index>(pts.size()), pts.dim);
  for (std::size_t i = 0; i < pts.size(); ++i) {
    for (int d = 0; d < pts.dim; ++d) coords(static_cast<Eigen::Index>(i), d) = pts.point(i)[static_cast<std::size_t>(d)];
  }
  out.write_array("test_points", coords);
  out.write_vector("pointwise_error", err);

  const double max_err = max_pointwise_error(obj, r.final_params, cloud_seed);
  const double tol = rc.probe.at("tolerance").get<double>();
  CommandOutcome o;
  o.results = {{"max_pointwise_error", max_err}, {"tolerance", tol}, {"passed", max_err < tol},
               {"final_loss", r.final_loss}, {"test_points", pts.size()}};
  if (!(max_err < tol)) {
    o.status = Status::ProbeFailure;
    o.message = "maximum pointwise error is not below the tolerance";
  }
  return o;
}

CommandOutcome cmd_mli(const RunConfig& rc, io::RunDirectory& out) {
  const Objective obj(rc.objective);
  const auto trials = rc.probe.at("trials").get<int>();
  const auto scales = rc.probe.at("scales").get<std::vector<double>>();
  const auto samples = rc.probe.at("samples").get<int>();
  const auto rel_tol = rc.probe.at("rel_tol").get<double>();
  const std::size_t runs = scales.size() * static_cast<std::size_t>(trials);

  std::vector<MliResult> scans(runs);
  std::vector<double> initial(runs), final(runs), aborted(runs);
  parallel_for(runs, [&](std::size_t i) {
    const double scale = scales[i / static_cast<std::size_t>(trials)];
    const auto trial = static_cast<std::uint64_t>(i % static_cast<std::size_t>(trials));
    const ParamVector init = trial_init(rc, obj, trial, scale);
    const auto r = fit(rc, obj, init, false);
    initial[i] = obj.value(init);
    final[i] = r.aborted ? kNaN : r.final_loss;
    aborted[i] = r.aborted ? 1.0 : 0.0;
    if (r.aborted) {
      scans[i].profile.t = iota_d(static_cast<std::size_t>(samples));
      for (double& t : scans[i].profile.t) t /= samples - 1;
      scans[i].profile.loss.assign(static_cast<std::size_t>(samples), kNaN);
      scans[i].profile.finite.assign(static_cast<std::size_t>(samples), 0);
      scans[i].max_relative_increase = kNaN;
      return;
    }
    scans[i] = mli_scan(value_evaluator(obj), init, r.final_params, samples, rel_tol);
  });

  std::vector<double> scale_col, trial_col, mono, incr, profiles;
  std::vector<std::uint8_t> mask;
  int monotone = 0, failed = 0;
  for (std::size_t i = 0; i < runs; ++i) {
    scale_col.push_back(scales[i / static_cast<std::size_t>(trials)]);
    trial_col.push_back(static_cast<double>(i % static_cast<std::size_t>(trials)));
    mono.push_back(scans[i].monotone ? 1.0 : 0.0);
    incr.push_back(scans[i].max_relative_increase);
    profiles.insert(profiles.end(), scans[i].profile.loss.begin(), scans[i].profile.loss.end());
    mask.insert(mask.end(), scans[i].profile.finite.begin(), scans[i].profile.finite.end());
    monotone += scans[i].monotone ? 1 : 0;
    failed += aborted[i] > 0 ? 1 : 0;
  }
  out.write_csv("runs", {"scale", "trial", "initial_loss", "final_loss", "aborted", "monotone", "max_relative_increase"},
                {scale_col, trial_col, initial, final, aborted, mono, incr});
  out.write_vector("t", scans.front().profile.t);
  out.write_tensor("profiles", profiles, {static_cast<std::int64_t>(runs), samples}, {{"axes", {"run", "t"}}});
  out.write_mask("profiles_finite", mask, static_cast<std::int64_t>(runs), samples);

  CommandOutcome o;
  o.results = {{"runs", runs}, {"monotone_runs", monotone}, {"aborted_runs", failed}, {"rel_tol", rel_tol}};
  if (failed > 0) {
    o.status = Status::NonFinite;
    o.message = "some training runs produced a non-finite loss";
  }
  return o;
}

CommandOutcome cmd_hessian_walk(const RunConfig& rc, io::RunDirectory& out) {
  const Objective obj(rc.objective);
  const auto r = fit(rc, obj, single_init(rc, obj), false);
  if (r.aborted) return aborted_outcome(r, out, "start point");
  HessianWalkOptions ho;
  ho.steps = rc.probe.at("steps").get<int>();
  ho.step_size = rc.probe.at("step_size").get<double>();
  const auto w = hessian_walk(obj, r.final_params, ho);

  std::vector<double> eig(w.distance.size(), kNaN);
  for (std::size_t i = 0; i < w.eigenvalue.size() && i + 1 < eig.size(); ++i) eig[i + 1] = w.eigenvalue[i];
  out.write_csv("walk", {"step", "distance", "loss_change", "eigenvalue"},
                {iota_d(w.distance.size()), w.distance, w.loss_change, eig});
  out.write_vector("start_params", r.final_params);
  out.write_vector("final_params", w.final_params);

  const double norm = r.final_params.norm();
  CommandOutcome o;
  o.results = {{"start_loss", r.final_loss},
               {"theta_norm", norm},
               {"steps_completed", w.steps_completed},
               {"max_abs_loss_change", w.max_abs_loss_change()},
               {"final_distance", w.distance.back()},
               {"distance_ratio", w.distance.back() / norm}};
  if (!w.completed) {
    o.status = Status::ProbeFailure;
    o.message = "Hessian walk stopped early: " + w.failure;
    o.results["failure"] = w.failure;
  }
  return o;
}

CommandOutcome cmd_mode_connect(const RunConfig& rc, io::RunDirectory& out) {
  const Objective obj(rc.objective);
  const ParamVector init1 = trial_init(rc, obj, 0, rc.init_scale);
  ParamVector init2;
  if (rc.probe.at("second_init").get<std::string>() == "perturbed") {
    Rng noise = Rng::stream(rc.seed, "init-perturbation");
    const double sd = rc.probe.at("perturbation_std").get<double>();
    init2 = init1;
    for (Eigen::Index i = 0; i < init2.size(); ++i) init2[i] += sd * noise.normal();
  } else {
    init2 = trial_init(rc, obj, 1, rc.init_scale);
  }
  const auto r1 = fit(rc, obj, init1, false);
  if (r1.aborted) return aborted_outcome(r1, out, "first endpoint");
  const auto r2 = fit(rc, obj, init2, false);
  if (r2.aborted) return aborted_outcome(r2, out, "second endpoint");

  ModeConnectOptions mo;
  mo.t_samples = rc.probe.at("t_samples").get<int>();
  mo.profile_samples = rc.probe.at("profile_samples").get<int>();
  mo.optimizer = optimizer_from_json(rc.probe.at("optimizer"));
  mo.optimizer.seed = rc.seed;
  std::optional<Objective> clamped;
  if (!rc.probe.at("j_clamp").is_null()) {
    clamped.emplace(obj.with_clamp(rc.probe.at("j_clamp").get<double>()));
    mo.linear_objective = &*clamped;
  }
  const auto m = mode_connect(obj, r1.final_params, r2.final_params, mo);

  out.write_csv("paths", {"t", "linear_loss", "linear_finite", "bezier_loss", "bezier_finite"},
                {m.linear.t, m.linear.loss, as_double(m.linear.finite), m.bezier.loss, as_double(m.bezier.finite)});
  out.write_csv("control_objective", {"epoch", "objective"},
                {iota_d(m.objective_history.size()), m.objective_history});
  out.write_vector("theta1", r1.final_params);
  out.write_vector("theta2", r2.final_params);
  out.write_vector("control", m.path.control);

  const double reference = manufactured_loss(obj);
  const double scale = std::max(std::abs(r1.final_loss - reference), std::abs(r2.final_loss - reference));
  CommandOutcome o;
  o.results = {{"endpoint_losses", {r1.final_loss, r2.final_loss}},
               {"manufactured_loss", reference},
               {"endpoint_loss_scale", scale},
               {"linear_barrier", m.linear_barrier},
               {"barrier_over_scale", m.linear_barrier / scale},
               {"bezier_max_deviation", m.bezier_max_deviation},
               {"deviation_over_barrier", m.bezier_max_deviation / m.linear_barrier},
               {"initial_objective", m.initial_objective},
               {"final_objective", m.objective},
               {"optimizer_aborted", m.aborted}};
  if (m.aborted) {
    o.status = Status::ProbeFailure;
    o.message = "control point optimization diverged; best control point reported";
  }
  return o;
}

CommandOutcome plane_command(const RunConfig& rc, io::RunDirectory& out, bool stochastic) {
  const Objective obj(rc.objective);
  const auto r = fit(rc, obj, single_init(rc, obj), false);
  if (r.aborted) return aborted_outcome(r, out, "center");
  const auto pairs = rc.probe.at("pairs").get<std::size_t>();
  const auto res = rc.probe.at("resolution").get<int>();
  const auto range = rc.probe.at("range").get<double>();

  std::optional<Objective> sampler;
  if (stochastic) {
    ObjectiveConfig mc = rc.objective;
    mc.mode = IntegrationMode::MonteCarlo;
    sampler.emplace(mc);
  }
  const Evaluator eval = stochastic ? sampled_evaluator(*sampler, rc.seed) : value_evaluator(obj);
  const Rng dirs = Rng::stream(rc.seed, "directions");
  std::vector<PlaneGrid> planes, fixed;
  std::vector<double> directions;
  json summary = json::array();
  for (std::size_t i = 0; i < pairs; ++i) {
    Rng rng = dirs.split(static_cast<std::uint64_t>(i));
    const ParamVector vk = random_direction(obj.dimension(), rng);
    const ParamVector vj = random_direction(obj.dimension(), rng);
    directions.insert(directions.end(), vk.data(), vk.data() + vk.size());
    directions.insert(directions.end(), vj.data(), vj.data() + vj.size());
    planes.push_back(plane_scan(eval, r.final_params, vk, vj, -range, range, res));
    if (stochastic) fixed.push_back(plane_scan(value_evaluator(obj), r.final_params, vk, vj, -range, range, res));
    summary.push_back(plane_summary(planes.back()));
  }
  write_losses(out, r.trajectory);
  out.write_vector("center", r.final_params);
  out.write_tensor("directions", directions,
                   {static_cast<std::int64_t>(pairs), 2, static_cast<std::int64_t>(obj.dimension())},
                   {{"axes", {"plane", "k/j", "parameter"}}});
  write_plane(out, "plane", planes);

  CommandOutcome o;
  o.results = {{"center_loss", r.final_loss}, {"planes", summary}};
  if (stochastic) {
    write_plane(out, "plane_fixed", fixed);
    const auto g = obj.integrand(r.final_params);
    const auto& grid = obj.grid();
    std::vector<std::string> header;
    std::vector<std::vector<double>> cols(static_cast<std::size_t>(grid.dim) + 2);
    for (int d = 0; d < grid.dim; ++d) header.push_back("x" + std::to_string(d + 1));
    header.push_back("weight");
    header.push_back("integrand");
    for (std::size_t i = 0; i < grid.size(); ++i) {
      for (int d = 0; d < grid.dim; ++d) cols[static_cast<std::size_t>(d)].push_back(grid.point(i)[static_cast<std::size_t>(d)]);
      cols[static_cast<std::size_t>(grid.dim)].push_back(grid.weights[i]);
      cols[static_cast<std::size_t>(grid.dim) + 1].push_back(g[i]);
    }
    out.write_csv("integrand", header, cols);
    o.results["integrand_variance"] = integrand_variance(obj, r.final_params);
    o.results["batch"] = rc.objective.batch;
  }
  return o;
}

CommandOutcome cmd_spectrum(const RunConfig& rc, io::RunDirectory& out) {
  const Objective obj(rc.objective);
  const auto r = fit(rc, obj, single_init(rc, obj), true);
  if (r.aborted) return aborted_outcome(r, out, "spectrum");
  const bool endpoints = rc.probe.at("endpoints_only").get<bool>();
  const auto h = endpoints ? spectrum_endpoints(obj, r.trajectory)
                           : spectrum_evolution(obj, r.trajectory, rc.probe.at("every").get<int>());
  const double rel = rc.probe.at("near_zero_rel").get<double>();
  const auto hist = spectrum_histogram(h, rc.probe.at("bins").get<int>(), rc.probe.at("shift").get<double>());

  std::vector<double> eig, frac;
  for (const auto& e : h.eigenvalues) {
    eig.insert(eig.end(), e.data(), e.data() + e.size());
    frac.push_back(near_zero_fraction(e, rel));
  }
  write_losses(out, r.trajectory);
  out.write_csv("spectrum", {"epoch", "lambda_min", "lambda_max", "near_zero_fraction"},
                {as_double(h.epochs), h.lambda_min, h.lambda_max, frac});
  out.write_tensor("eigenvalues", eig,
                   {static_cast<std::int64_t>(h.epochs.size()), static_cast<std::int64_t>(obj.dimension())},
                   {{"axes", {"sample", "eigenvalue"}}, {"order", "ascending"}});
  out.write_array("histogram_counts", hist.counts, {{"axes", {"bin", "sample"}}});
  out.write_vector("histogram_edges", hist.edges, {{"quantity", "log10(|lambda| + shift)"}});

  CommandOutcome o;
  o.results = {{"samples", h.epochs.size()},
               {"parameters", obj.dimension()},
               {"final_loss", r.final_loss},
               {"initial_lambda_min", h.lambda_min.front()},
               {"final_lambda_min", h.lambda_min.back()},
               {"final_lambda_max", h.lambda_max.back()},
               {"lambda_min_shrink", std::abs(h.lambda_min.front()) / std::abs(h.lambda_min.back())},
               {"final_near_zero_fraction", frac.back()},
               {"near_zero_rel", rel}};
  return o;
}

CommandOutcome cmd_gram(const RunConfig& rc, io::RunDirectory& out) {
  const Objective obj(rc.objective);
  const auto r = fit(rc, obj, single_init(rc, obj), false);
  if (r.aborted) return aborted_outcome(r, out, "gram");
  const auto& spec = obj.network();
  const double rel = rc.probe.at("rel_threshold").get<double>();
  const BasisSet basis = extract_basis(spec, r.final_params, obj.grid(), 2);
  const auto g = gram_rank(basis, obj.grid().weights, rel);
  const auto v = null_direction(spec, basis, obj.grid().weights, rel);

  write_losses(out, r.trajectory);
  out.write_vector("final_params", r.final_params);
  out.write_array("gram", g.gram);
  std::vector<double> eig(g.eigenvalues.data(), g.eigenvalues.data() + g.eigenvalues.size());
  std::vector<double> above;
  for (double e : eig) above.push_back(e > g.threshold ? 1.0 : 0.0);
  out.write_csv("gram_eigenvalues", {"index", "eigenvalue", "above_threshold"}, {iota_d(eig.size()), eig, above});
  out.write_array("basis", basis.values, {{"axes", {"grid_point", "basis_function"}}});

  CommandOutcome o;
  o.results = {{"basis_size", spec.basis_size()}, {"rank", g.rank}, {"threshold", g.threshold},
               {"rel_threshold", rel}, {"final_loss", r.final_loss}};
  if (!v) {
    o.status = Status::ProbeFailure;
    o.message = "basis is full rank at the working threshold; no null direction";
    return o;
  }
  const double range = rc.probe.at("trench_range").get<double>();
  const auto line = line_scan(value_evaluator(obj), r.final_params, *v, -range, range,
                              rc.probe.at("trench_samples").get<int>());
  Rng rng = Rng::stream(rc.seed, "directions");
  const ParamVector other = random_direction(obj.dimension(), rng);
  const auto plane = plane_scan(value_evaluator(obj), r.final_params, *v, other, -range, range,
                                rc.probe.at("resolution").get<int>());
  out.write_vector("null_direction", *v);
  out.write_csv("trench", {"t", "loss", "finite"}, {line.t, line.loss, as_double(line.finite)});
  write_plane(out, "trench_plane", {plane});
  o.results["trench_relative_variation"] = relative_variation(line);
  o.results["field_change"] = field_change(spec, r.final_params, *v, obj.grid());
  return o;
}

CommandOutcome cmd_goldilocks(const RunConfig& rc, io::RunDirectory& out) {
  GoldilocksConfig gc;
  gc.objective = rc.objective;
  gc.radii = rc.probe.at("radii").get<std::vector<double>>();
  gc.trials = rc.probe.at("trials").get<int>();
  gc.optimizer = rc.optimizer;
  gc.seed = rc.seed;
  const auto g = goldilocks_sweep(gc);

  const Objective obj(rc.objective);
  const auto free = fit(rc, obj, trial_init(rc, obj, 0, rc.init_scale), false);

  std::vector<double> radius, trial, loss;
  json medians = json::array();
  for (Eigen::Index i = 0; i < g.final_loss.rows(); ++i) {
    std::vector<double> finite;
    for (Eigen::Index k = 0; k < g.final_loss.cols(); ++k) {
      radius.push_back(g.radii[static_cast<std::size_t>(i)]);
      trial.push_back(static_cast<double>(k));
      loss.push_back(g.final_loss(i, k));
      if (std::isfinite(g.final_loss(i, k))) finite.push_back(g.final_loss(i, k));
    }
    std::sort(finite.begin(), finite.end());
    medians.push_back(finite.empty() ? json(nullptr) : json(finite[finite.size() / 2]));
  }
  out.write_csv("final_loss", {"radius", "trial", "final_loss"}, {radius, trial, loss});
  out.write_array("final_loss_grid", g.final_loss, {{"axes", {"radius", "trial"}}});

  CommandOutcome o;
  o.results = {{"radii", g.radii},
               {"median_final_loss", medians},
               {"unconstrained_final_loss", free.final_loss},
               {"unconstrained_aborted", free.aborted},
               {"manufactured_loss", manufactured_loss(obj)}};
  return o;
}

CommandOutcome cmd_radius_track(const RunConfig& rc, io::RunDirectory& out) {
  RadiusTrackConfig tc;
  tc.objective = rc.objective;
  tc.scales = rc.probe.at("scales").get<std::vector<double>>();
  tc.optimizer = rc.optimizer;
  tc.seed = rc.seed;
  const auto tracks = radius_track(tc);

  std::vector<std::vector<double>> radii, losses;
  json growth = json::array();
  bool any_abort = false;
  for (const auto& t : tracks) {
    radii.push_back(t.radii);
    losses.push_back(t.losses);
    any_abort = any_abort || t.aborted;
    if (t.radii.empty()) {
      growth.push_back({{"scale", t.scale}, {"aborted", true}});
      continue;
    }
    growth.push_back({{"scale", t.scale},
                      {"initial_radius", t.radii.front()},
                      {"max_radius", *std::max_element(t.radii.begin(), t.radii.end())},
                      {"final_radius", t.radii.back()},
                      {"final_loss", t.losses.back()},
                      {"aborted", t.aborted}});
  }
  std::size_t width = 0;
  const auto r = pad_rows(radii, width);
  const auto l = pad_rows(losses, width);
  const auto n = static_cast<std::int64_t>(tracks.size());
  out.write_vector("scales", tc.scales);
  out.write_tensor("radius", r, {n, static_cast<std::int64_t>(width)}, {{"axes", {"scale", "epoch"}}});
  out.write_tensor("loss", l, {n, static_cast<std::int64_t>(width)}, {{"axes", {"scale", "epoch"}}});

  CommandOutcome o;
  o.results = {{"tracks", growth}};
  if (any_abort) {
    o.status = Status::NonFinite;
    o.message = "some training runs produced a non-finite loss";
  }
  return o;
}

CommandOutcome cmd_intrinsic_dim(const RunConfig& rc, io::RunDirectory& out) {
  IntrinsicDimConfig ic;
  ic.objective = rc.objective;
  ic.dims = rc.probe.at("dims").get<std::vector<int>>();
  ic.optimizer = rc.optimizer;
  ic.full_epochs = rc.probe.at("full_epochs").get<int>();
  ic.orthonormalize = rc.probe.at("orthonormalize").get<bool>();
  ic.seed = rc.seed;
  const auto res = intrinsic_dimension(ic);

  std::vector<std::vector<double>> curves;
  std::vector<double> dims, finals, aborted;
  for (const auto& run : res.runs) {
    curves.push_back(run.losses);
    dims.push_back(run.dim);
    finals.push_back(run.final_loss);
    aborted.push_back(run.aborted ? 1.0 : 0.0);
  }
  curves.push_back(res.full.losses);
  dims.push_back(res.full.dim);
  finals.push_back(res.full.final_loss);
  aborted.push_back(res.full.aborted ? 1.0 : 0.0);
  std::size_t width = 0;
  const auto block = pad_rows(curves, width);
  out.write_csv("final_loss", {"dim", "final_loss", "aborted"}, {dims, finals, aborted});
  out.write_tensor("losses", block, {static_cast<std::int64_t>(curves.size()), static_cast<std::int64_t>(width)},
                   {{"axes", {"run", "epoch"}}, {"last_row", "full network"}});

  const Objective obj(rc.objective);
  CommandOutcome o;
  o.results = {{"dims", ic.dims}, {"full_final_loss", res.full.final_loss},
               {"subspace_final_loss", std::vector<double>(finals.begin(), finals.end() - 1)},
               {"manufactured_loss", manufactured_loss(obj)}};
  if (std::any_of(aborted.begin(), aborted.end(), [](double a) { return a > 0; })) {
    o.status = Status::NonFinite;
    o.message = "some training runs produced a non-finite loss";
  }
  return o;
}

CommandOutcome cmd_pca(const RunConfig& rc, io::RunDirectory& out) {
  const Objective obj(rc.objective);
  const auto r = fit(rc, obj, single_init(rc, obj), true);
  if (r.aborted) return aborted_outcome(r, out, "trajectory");
  const int q = rc.probe.at("components").get<int>();
  const auto pca = pca_trajectory(r.trajectory.matrix(), q);
  const auto found = static_cast<int>(pca.components.cols());

  write_losses(out, r.trajectory);
  out.write_vector("mean", pca.mean);
  out.write_array("components", pca.components, {{"axes", {"parameter", "component"}}});
  out.write_array("coordinates", pca.coordinates, {{"axes", {"component", "epoch"}}});
  std::vector<double> expl(pca.explained.data(), pca.explained.data() + pca.explained.size());
  out.write_csv("explained", {"component", "fraction"}, {iota_d(expl.size(), 1.0), expl});

  std::vector<PlaneGrid> planes;
  json plane_info = json::array();
  const double margin = rc.probe.at("margin").get<double>();
  for (int a = 0; a < found; ++a) {
    for (int b = a + 1; b < found; ++b) {
      const double extent = std::max(pca.coordinates.row(a).cwiseAbs().maxCoeff(),
                                     pca.coordinates.row(b).cwiseAbs().maxCoeff()) * (1.0 + margin);
      planes.push_back(plane_scan(value_evaluator(obj), pca.mean, pca.components.col(a), pca.components.col(b),
                                  -extent, extent, rc.probe.at("resolution").get<int>()));
      plane_info.push_back({{"components", {a + 1, b + 1}}, {"extent", extent}});
    }
  }
  if (!planes.empty()) write_plane(out, "pc_plane", planes);

  double top2 = 0.0;
  for (int i = 0; i < std::min(2, found); ++i) top2 += pca.explained[i];
  CommandOutcome o;
  o.results = {{"explained", expl}, {"first_two_combined", top2}, {"planes", plane_info},
               {"final_loss", r.final_loss}, {"epochs", r.trajectory.size() - 1}};
  return o;
}

CommandOutcome cmd_acceleration(const RunConfig& rc, io::RunDirectory& out) {
  const Objective obj(rc.objective);
  const auto r = fit(rc, obj, single_init(rc, obj), true);
  if (r.aborted) return aborted_outcome(r, out, "trajectory");
  const double eta = rc.optimizer.learning_rate;
  const auto raw = acceleration_series(r.trajectory, eta, false);
  const auto norm = acceleration_series(r.trajectory, eta, true);
  const int conv = convergence_epoch(r.trajectory.losses(), rc.probe.at("convergence_rel_tol").get<double>());
  const auto [early, late] = acceleration_medians(raw, conv, rc.probe.at("fraction").get<double>());

  write_losses(out, r.trajectory);
  out.write_csv("acceleration", {"epoch", "raw", "normalized", "valid"},
                {as_double(raw.epochs), raw.value, norm.value, as_double(norm.valid)});
  CommandOutcome o;
  o.results = {{"eta", eta}, {"convergence_epoch", conv}, {"early_median", early}, {"late_median", late},
               {"decreased", early > late}, {"final_loss", r.final_loss}};
  return o;
}

CommandOutcome cmd_probe_minima(const RunConfig& rc, io::RunDirectory& out) {
  ProbeMinimaConfig pc;
  pc.objective = rc.objective;
  pc.widths = rc.probe.at("widths").get<std::vector<int>>();
  pc.optimizers.clear();
  for (const auto& s : rc.probe.at("optimizers")) pc.optimizers.push_back(optimizer_from_string(s.get<std::string>()));
  pc.trials = rc.probe.at("trials").get<int>();
  pc.optimizer = rc.optimizer;
  pc.seed = rc.seed;
  pc.band_epochs = rc.probe.at("band_epochs").get<int>();
  pc.stuck_factor = rc.probe.at("stuck_factor").get<double>();
  const auto res = probe_minima(pc);

  std::vector<double> width, opt, trial, seed, final, aborted, abort_epoch, stuck;
  std::vector<std::vector<double>> curves;
  std::map<std::string, json> groups;
  for (const auto& run : res.runs) {
    width.push_back(run.width);
    opt.push_back(run.optimizer == OptimizerKind::Adam ? 0.0 : 1.0);
    trial.push_back(run.trial);
    seed.push_back(static_cast<double>(run.seed));
    final.push_back(run.aborted ? kNaN : run.final_loss);
    aborted.push_back(run.aborted ? 1.0 : 0.0);
    abort_epoch.push_back(run.abort_epoch ? *run.abort_epoch : kNaN);
    stuck.push_back(run.stuck ? 1.0 : 0.0);
    curves.push_back(run.losses);
    const std::string key = "width_" + std::to_string(run.width) + "_" + pinnscape::to_string(run.optimizer);
    json& g = groups[key];
    if (g.is_null()) g = {{"runs", 0}, {"stuck", 0}, {"aborted", 0}};
    g["runs"] = g["runs"].get<int>() + 1;
    g["stuck"] = g["stuck"].get<int>() + (run.stuck ? 1 : 0);
    g["aborted"] = g["aborted"].get<int>() + (run.aborted ? 1 : 0);
  }
  std::size_t len = 0;
  const auto block = pad_rows(curves, len);
  out.write_csv("runs", {"width", "optimizer", "trial", "seed", "final_loss", "aborted", "abort_epoch", "stuck"},
                {width, opt, trial, seed, final, aborted, abort_epoch, stuck});
  out.write_tensor("losses", block, {static_cast<std::int64_t>(curves.size()), static_cast<std::int64_t>(len)},
                   {{"axes", {"run", "epoch"}}, {"optimizer_codes", {{"0", "adam"}, {"1", "gd"}}}});

  json best = json::object(), band = json::object();
  for (std::size_t i = 0; i < pc.widths.size(); ++i) {
    best[std::to_string(pc.widths[i])] = res.best_loss[i];
    band[std::to_string(pc.widths[i])] = res.band[i];
  }
  CommandOutcome o;
  o.results = {{"groups", json(groups)}, {"best_final_loss", best}, {"best_band", band},
               {"optimizer_codes", {{"0", "adam"}, {"1", "gd"}}}};
  return o;
}

const std::map<std::string, Runner>& runners() {
  static const std::map<std::string, Runner> table{
      {"train", cmd_train},
      {"verify", cmd_verify},
      {"mli", cmd_mli},
      {"hessian-walk", cmd_hessian_walk},
      {"mode-connect", cmd_mode_connect},
      {"plane-scan", [](const RunConfig& rc, io::RunDirectory& o) { return plane_command(rc, o, false); }},
      {"stochastic-scan", [](const RunConfig& rc, io::RunDirectory& o) { return plane_command(rc, o, true); }},
      {"spectrum", cmd_spectrum},
      {"gram", cmd_gram},
      {"goldilocks", cmd_goldilocks},
      {"radius-track", cmd_radius_track},
      {"intrinsic-dim", cmd_intrinsic_dim},
      {"pca-traj", cmd_pca},
      {"acceleration", cmd_acceleration},
      {"probe-minima", cmd_probe_minima},
  };
  return table;
}

}  // namespace

CommandOutcome run_command(const RunConfig& config, io::RunDirectory& out) {
  const auto it = runners().find(config.subcommand);
  if (it == runners().end()) throw std::logic_error("no runner for " + config.subcommand);
  return it->second(config, out);
}

}  // namespace pinnscape::cli
