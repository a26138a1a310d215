// Acceptance checks at their stated tolerances. Each criterion prints one
// line, PASS or FAIL, followed by the measured quantities. Every run uses
// seed 0; nothing is retried or cherry-picked.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "pinnscape/autodiff/objective.hpp"
#include "pinnscape/landscape.hpp"
#include "pinnscape/network.hpp"
#include "pinnscape/optimize.hpp"
#include "pinnscape/problems.hpp"
#include "support/oracles.hpp"

namespace {

using namespace pinnscape;
namespace fs = std::filesystem;

constexpr std::uint64_t kSeed = 0;

struct Verdict {
  bool pass = false;
  std::string detail;
};

std::string fmt(double v) {
  std::ostringstream s;
  s.precision(4);
  s << v;
  return s.str();
}

Objective make(Problem p, Formulation f) { return Objective(ObjectiveConfig::reference(p, f)); }

TrainResult fit(const Objective& obj, const ParamVector& init, const OptimizerConfig& opt, bool keep = false) {
  TrainOptions t;
  t.store_params = keep;
  return train(obj, init, opt, t);
}

/// The standard 1D solution: seed-0 init, ADAM 1e-3, 7500 epochs.
TrainResult solve_1d(const Objective& obj, bool keep = false) {
  return fit(obj, init_params(obj.network(), kSeed), OptimizerConfig::adam(1e-3, 7500), keep);
}

const std::vector<Formulation> kBoth{Formulation::Drm, Formulation::Pinn};

std::string name(const Objective& o) { return to_string(o.kind()); }

double median(std::vector<double> v) {
  v.erase(std::remove_if(v.begin(), v.end(), [](double x) { return !std::isfinite(x); }), v.end());
  if (v.empty()) return std::nan("");
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

// ---------------------------------------------------------------------------

Verdict gradients() {
  bool ok = true;
  std::string detail;
  const Rng draws = Rng::stream(kSeed, "gradient-check");
  for (auto p : {Problem::Elliptic1D, Problem::Neohookean2D}) {
    for (auto f : kBoth) {
      const Objective obj = make(p, f);
      double g_err = 0, h_err = 0, sym = 0;
      for (std::uint64_t k = 0; k < 20; ++k) {
        Rng rng = draws.split(k);
        const ParamVector theta = init_params(obj.network(), rng);
        ParamVector grad;
        obj.value_and_gradient(theta, grad);
        const auto fd = oracle::fd_gradient([&](const Eigen::VectorXd& x) { return obj.value(x); }, theta);
        g_err = std::max(g_err, oracle::rel_err(grad, fd));

        const ParamVector v = random_direction(obj.dimension(), rng);
        const auto hv = hessian_vector(obj, theta, v);
        const auto fd_hv = oracle::fd_directional(
            [&](const Eigen::VectorXd& x) {
              ParamVector g;
              obj.value_and_gradient(x, g);
              return Eigen::VectorXd(g);
            },
            theta, v);
        h_err = std::max(h_err, oracle::rel_err(hv, fd_hv));
        sym = std::max(sym, symmetry_defect(hessian(obj, theta)));
      }
      const bool good = g_err < 1e-6 && h_err < 1e-5 && sym < 1e-10;
      ok = ok && good;
      detail += name(obj) + " grad " + fmt(g_err) + " hvp " + fmt(h_err) + " sym " + fmt(sym) + "; ";
    }
  }
  return {ok, detail + "limits 1e-6 / 1e-5 / 1e-10 over 20 draws"};
}

Verdict verification() {
  bool ok = true;
  std::string detail;
  for (auto p : {Problem::Elliptic1D, Problem::Neohookean2D}) {
    for (auto f : kBoth) {
      const Objective obj = make(p, f);
      const auto t0 = std::chrono::steady_clock::now();
      const int epochs = p == Problem::Elliptic1D ? 7500 : 2500;
      const auto r = fit(obj, init_params(obj.network(), kSeed), OptimizerConfig::adam(1e-3, epochs));
      const double err = r.aborted ? std::nan("") : max_pointwise_error(obj, r.final_params);
      const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      const bool good = err < 1e-2 && secs <= 600.0;
      ok = ok && good;
      detail += name(obj) + " err " + fmt(err) + " in " + fmt(secs) + " s; ";
    }
  }
  return {ok, detail + "limit 1e-2, 600 s"};
}

Verdict parameter_counts() {
  const auto a = parameter_count(NetworkSpec::elliptic_1d());
  const auto b = parameter_count(NetworkSpec::neohookean_2d());
  return {a == 480 && b == 775, "1D " + std::to_string(a) + " (480), 2D " + std::to_string(b) + " (775)"};
}

Verdict mli() {
  int monotone = 0, total = 0;
  double worst = 0.0;
  const Rng init = Rng::stream(kSeed, "init");
  for (auto f : kBoth) {
    const Objective obj = make(Problem::Elliptic1D, f);
    for (double scale : {1.0, 2.0, 5.0}) {
      for (std::uint64_t k = 0; k < 10; ++k) {
        Rng rng = init.split(k);
        const ParamVector theta0 = init_params(obj.network(), rng, scale);
        const auto r = fit(obj, theta0, OptimizerConfig::adam(1e-3, 7500));
        ++total;
        if (r.aborted) continue;
        const auto m = mli_scan(value_evaluator(obj), theta0, r.final_params, 101, 1e-6);
        monotone += m.monotone ? 1 : 0;
        worst = std::max(worst, m.max_relative_increase);
      }
    }
  }
  return {monotone == total && total == 60,
          std::to_string(monotone) + "/" + std::to_string(total) + " monotone, worst relative increase " + fmt(worst)};
}

Verdict walk() {
  bool ok = true;
  std::string detail;
  for (auto f : kBoth) {
    const Objective obj = make(Problem::Elliptic1D, f);
    const auto r = solve_1d(obj);
    const auto w = hessian_walk(obj, r.final_params);
    const double ratio = w.distance.back() / r.final_params.norm();
    const bool good = w.completed && w.max_abs_loss_change() < 1e-9 && ratio >= 2.0;
    ok = ok && good;
    detail += name(obj) + " max|dloss| " + fmt(w.max_abs_loss_change()) + " distance/|theta_f| " + fmt(ratio) + " steps " +
              std::to_string(w.steps_completed) + "; ";
  }
  return {ok, detail + "limits 1e-9, 2x"};
}

Verdict mode_connectivity() {
  bool ok = true;
  std::string detail;
  const Rng init = Rng::stream(kSeed, "init");
  for (auto f : kBoth) {
    const Objective obj = make(Problem::Elliptic1D, f);
    Rng r0 = init.split(0), r1 = init.split(1);
    const auto a = fit(obj, init_params(obj.network(), r0), OptimizerConfig::adam(1e-3, 7500));
    const auto b = fit(obj, init_params(obj.network(), r1), OptimizerConfig::adam(1e-3, 7500));
    const auto m = mode_connect(obj, a.final_params, b.final_params);
    const double ref = manufactured_loss(obj);
    const double scale = std::max(std::abs(a.final_loss - ref), std::abs(b.final_loss - ref));
    const bool good = !m.aborted && m.linear_barrier >= 10.0 * scale && m.bezier_max_deviation <= 0.01 * m.linear_barrier;
    ok = ok && good;
    detail += name(obj) + " barrier " + fmt(m.linear_barrier) + " (" + fmt(m.linear_barrier / scale) +
              "x endpoint scale) bezier deviation " + fmt(100.0 * m.bezier_max_deviation / m.linear_barrier) + "%; ";
  }
  return {ok, detail + "limits 10x, 1%"};
}

Verdict gram() {
  bool ok = true;
  std::string detail;
  for (auto f : kBoth) {
    const Objective obj = make(Problem::Elliptic1D, f);
    const auto r = solve_1d(obj);
    const auto& spec = obj.network();
    const BasisSet basis = extract_basis(spec, r.final_params, obj.grid(), 2);
    const auto g = gram_rank(basis, obj.grid().weights, 1e-12);
    const auto v = null_direction(spec, basis, obj.grid().weights, 1e-12);
    double variation = std::nan("");
    if (v) variation = relative_variation(line_scan(value_evaluator(obj), r.final_params, *v, -10.0, 10.0, 201));
    const bool good = g.rank <= 17 && v && variation < 1e-6;
    ok = ok && good;
    detail += name(obj) + " rank " + std::to_string(g.rank) + " trench variation " + fmt(variation) + "; ";
  }
  return {ok, detail + "limits rank <= 17, 1e-6"};
}

Verdict spectrum() {
  bool ok = true;
  std::string detail;
  for (auto f : kBoth) {
    const Objective obj = make(Problem::Elliptic1D, f);
    const auto r = solve_1d(obj, true);
    const auto h = spectrum_endpoints(obj, r.trajectory);
    const double frac = near_zero_fraction(h.eigenvalues.back(), 1e-6);
    const double shrink = std::abs(h.lambda_min.front()) / std::abs(h.lambda_min.back());
    const bool good = frac >= 0.8 && shrink >= 100.0;
    ok = ok && good;
    detail += name(obj) + " near-zero " + fmt(100.0 * frac) + "% |lambda_min| shrink " + fmt(shrink) + "x; ";
  }
  return {ok, detail + "limits 80%, 100x"};
}

Verdict variance() {
  double var[2];
  for (int i = 0; i < 2; ++i) {
    const Objective obj = make(Problem::Elliptic1D, kBoth[static_cast<std::size_t>(i)]);
    var[i] = integrand_variance(obj, solve_1d(obj).final_params);
  }
  const double ratio = var[0] / var[1];
  return {ratio >= 1e4, "Var_DRM " + fmt(var[0]) + " Var_PINN " + fmt(var[1]) + " ratio " + fmt(ratio) + "; limit 1e4"};
}

Verdict goldilocks() {
  bool ok = true;
  std::string detail;
  for (auto f : kBoth) {
    GoldilocksConfig gc;
    gc.objective = ObjectiveConfig::reference(Problem::Elliptic1D, f);
    gc.radii = {0.5, 10.0};
    gc.seed = kSeed;
    const auto g = goldilocks_sweep(gc);
    std::vector<double> small, large;
    for (Eigen::Index k = 0; k < g.final_loss.cols(); ++k) {
      small.push_back(g.final_loss(0, k));
      large.push_back(g.final_loss(1, k));
    }
    const double m_small = median(small), m_large = median(large);
    const Objective obj(gc.objective);
    bool good;
    if (f == Formulation::Pinn) {
      good = m_small >= 100.0 * m_large;
      detail += "PINN1D median loss R=0.5 " + fmt(m_small) + " vs R=10 " + fmt(m_large) + " (" + fmt(m_small / m_large) + "x); ";
    } else {
      // unconstrained energy from the same inits and budget
      std::vector<double> free;
      const Rng init = Rng::stream(kSeed, "init");
      for (int k = 0; k < gc.trials; ++k) {
        Rng rng = init.split(static_cast<std::uint64_t>(k));
        free.push_back(fit(obj, init_params(obj.network(), rng), gc.optimizer).final_loss);
      }
      const double e_free = median(free);
      // fraction of the unconstrained energy drop (from the zero field) recovered on the sphere
      const double recovered = m_small / e_free;
      good = recovered < 0.9;
      detail += "DRM1D median energy R=0.5 " + fmt(m_small) + " vs unconstrained " + fmt(e_free) + " (" +
                fmt(100.0 * recovered) + "% of the drop); ";
    }
    RadiusTrackConfig rt;
    rt.objective = gc.objective;
    rt.scales = {0.01};
    rt.seed = kSeed;
    const auto track = radius_track(rt).front();
    const double growth = *std::max_element(track.radii.begin(), track.radii.end()) / track.radii.front();
    good = good && !track.aborted && growth >= 5.0;
    detail += name(obj) + " radius growth from 0.01x init " + fmt(growth) + "x; ";
    ok = ok && good;
  }
  return {ok, detail + "limits 100x, < 90% recovered, 5x"};
}

Verdict intrinsic_dim() {
  bool ok = true;
  std::string detail;
  for (auto p : {Problem::Elliptic1D, Problem::Neohookean2D}) {
    for (auto f : kBoth) {
      IntrinsicDimConfig ic;
      ic.objective = ObjectiveConfig::reference(p, f);
      ic.dims = {p == Problem::Elliptic1D ? 10 : 50};
      ic.seed = kSeed;
      const auto r = intrinsic_dimension(ic);
      const double sub = r.runs.front().final_loss, full = r.full.final_loss;
      bool good = !r.runs.front().aborted && !r.full.aborted;
      if (f == Formulation::Pinn) {
        good = good && sub <= 1.5 * full;
        detail += to_string(ObjectiveConfig::reference(p, f).kind()) + " d=" + std::to_string(ic.dims[0]) + " " +
                  fmt(sub) + " vs full " + fmt(full) + " (" + fmt(sub / full) + "x); ";
      } else {
        const double gap = std::abs(sub - full) / std::abs(full);
        good = good && gap <= 0.1;
        detail += to_string(ObjectiveConfig::reference(p, f).kind()) + " d=" + std::to_string(ic.dims[0]) + " " +
                  fmt(sub) + " vs full " + fmt(full) + " (" + fmt(100.0 * gap) + "% of the gap); ";
      }
      ok = ok && good;
    }
  }
  return {ok, detail + "limits 1.5x, 10%"};
}

Verdict pca() {
  bool ok = true;
  std::string detail;
  for (auto p : {Problem::Elliptic1D, Problem::Neohookean2D}) {
    for (auto f : kBoth) {
      const Objective obj = make(p, f);
      const int epochs = p == Problem::Elliptic1D ? 7500 : 2500;
      const auto r = fit(obj, init_params(obj.network(), kSeed), OptimizerConfig::adam(1e-3, epochs), true);
      const auto basis = pca_trajectory(r.trajectory.matrix(), 2);
      const double top2 = basis.explained.size() >= 2 ? basis.explained[0] + basis.explained[1] : 0.0;
      const double limit = p == Problem::Elliptic1D ? 0.85 : 0.90;
      ok = ok && !r.aborted && top2 > limit;
      detail += name(obj) + " " + fmt(100.0 * top2) + "% (>" + fmt(100.0 * limit) + "%); ";
    }
  }
  return {ok, detail};
}

Verdict no_bad_minima() {
  bool ok = true;
  std::string detail;
  for (auto f : kBoth) {
    ProbeMinimaConfig pc;
    pc.objective = ObjectiveConfig::reference(Problem::Elliptic1D, f);
    pc.seed = kSeed;
    const auto res = probe_minima(pc);
    double best = std::numeric_limits<double>::infinity();
    for (const auto& run : res.runs) {
      if (!run.aborted) best = std::min(best, run.final_loss);
    }
    int within = 0;
    double worst = 0.0;
    for (const auto& run : res.runs) {
      // PINN losses are positive; DRM energies are negative, so "within 10x" compares magnitudes
      const double ratio = f == Formulation::Pinn ? run.final_loss / best : best / run.final_loss;
      if (!run.aborted && ratio <= 10.0 && ratio > 0.0) ++within;
      worst = std::max(worst, run.aborted ? std::numeric_limits<double>::infinity() : ratio);
    }
    ok = ok && within == 40 && res.runs.size() == 40;
    detail += to_string(ObjectiveConfig::reference(Problem::Elliptic1D, f).kind()) + " " + std::to_string(within) +
              "/40 within 10x (worst " + fmt(worst) + "x); ";
  }

  ProbeMinimaConfig pc;
  pc.objective = ObjectiveConfig::reference(Problem::Neohookean2D, Formulation::Drm);
  pc.widths = {25, 8};
  pc.trials = 5;
  pc.optimizer = OptimizerConfig::adam(5e-4, 5000);
  pc.seed = kSeed;
  const auto res = probe_minima(pc);
  int gd_stuck = 0, adam_stuck = 0, aborted = 0;
  for (const auto& run : res.runs) {
    aborted += run.aborted ? 1 : 0;
    if (!run.stuck) continue;
    (run.optimizer == OptimizerKind::Gd ? gd_stuck : adam_stuck)++;
  }
  ok = ok && gd_stuck >= 1 && adam_stuck == 0;
  detail += "DRM2D stuck GD " + std::to_string(gd_stuck) + "/10, ADAM " + std::to_string(adam_stuck) + "/10, aborted " +
            std::to_string(aborted);
  return {ok, detail};
}

// Runs the CLI twice per experiment (different thread counts, different
// output roots) and compares every file except timing.json byte for byte.
Verdict determinism() {
#ifndef PINNSCAPE_CLI
  return {false, "command-line tool not built"};
#else
  const fs::path root = fs::temp_directory_path() / "pinnscape_acceptance_determinism";
  fs::remove_all(root);
  fs::create_directories(root);
  const std::vector<std::pair<std::string, std::string>> runs{
      {"train", R"({"optimizer": {"epochs": 300}})"},
      {"stochastic-scan", R"({"quadrature": {"mode": "monte_carlo"}, "optimizer": {"epochs": 200},
                              "probe": {"pairs": 2, "resolution": 11}})"},
      {"gram", R"({"objective": "pinn", "optimizer": {"epochs": 500}, "probe": {"resolution": 11}})"},
      {"probe-minima", R"({"problem": "neohookean_2d", "optimizer": {"epochs": 100}, "probe": {"trials": 1}})"},
      {"intrinsic-dim", R"({"optimizer": {"epochs": 300}, "probe": {"dims": [2, 5], "full_epochs": 300}})"},
  };
  int identical = 0, compared = 0;
  std::string failures;
  for (const auto& [sub, cfg] : runs) {
    const fs::path cfg_path = root / (sub + ".json");
    std::ofstream(cfg_path) << cfg;
    for (int rep = 0; rep < 2; ++rep) {
      const std::string cmd = std::string(PINNSCAPE_CLI) + " " + sub + " --config " + cfg_path.string() + " --out " +
                              (root / ("rep" + std::to_string(rep))).string() + " --threads " +
                              std::to_string(rep + 1) + " > /dev/null";
      if (std::system(cmd.c_str()) != 0) failures += sub + " exited non-zero; ";
    }
  }
  for (const auto& entry : fs::recursive_directory_iterator(root / "rep0")) {
    if (!entry.is_regular_file() || entry.path().filename() == "timing.json") continue;
    ++compared;
    const fs::path other = root / "rep1" / fs::relative(entry.path(), root / "rep0");
    auto slurp = [](const fs::path& p) {
      std::ifstream in(p, std::ios::binary);
      return std::string(std::istreambuf_iterator<char>(in), {});
    };
    if (fs::exists(other) && slurp(entry.path()) == slurp(other)) {
      ++identical;
    } else {
      failures += fs::relative(entry.path(), root).string() + " differs; ";
    }
  }
  fs::remove_all(root);
  return {failures.empty() && compared > 0,
          std::to_string(identical) + "/" + std::to_string(compared) + " files byte-identical across reruns " + failures};
#endif
}

const std::vector<std::pair<std::string, std::function<Verdict()>>>& criteria() {
  static const std::vector<std::pair<std::string, std::function<Verdict()>>> all{
      {"gradients", gradients},
      {"verification", verification},
      {"parameter-counts", parameter_counts},
      {"mli", mli},
      {"hessian-walk", walk},
      {"mode-connectivity", mode_connectivity},
      {"gram-rank", gram},
      {"spectrum", spectrum},
      {"integrand-variance", variance},
      {"goldilocks", goldilocks},
      {"intrinsic-dim", intrinsic_dim},
      {"pca", pca},
      {"no-bad-minima", no_bad_minima},
      {"determinism", determinism},
  };
  return all;
}

}  // namespace

int main(int argc, char** argv) {
  std::vector<std::string> wanted(argv + 1, argv + argc);
  if (!wanted.empty() && wanted.front() == "--list") {
    for (const auto& [n, fn] : criteria()) std::cout << n << '\n';
    return 0;
  }
  for (const auto& w : wanted) {
    if (std::none_of(criteria().begin(), criteria().end(), [&](const auto& c) { return c.first == w; })) {
      std::cerr << "unknown criterion: " << w << '\n';
      return 2;
    }
  }
  int failed = 0;
  for (const auto& [n, fn] : criteria()) {
    if (!wanted.empty() && std::find(wanted.begin(), wanted.end(), n) == wanted.end()) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Verdict v;
    try {
      v = fn();
    } catch (const std::exception& e) {
      v = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::cout << (v.pass ? "PASS " : "FAIL ") << n << ": " << v.detail << " [" << fmt(secs) << " s]" << std::endl;
    failed += v.pass ? 0 : 1;
  }
  return failed == 0 ? 0 : 1;
}
