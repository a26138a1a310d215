#include "config.hpp"

#include <algorithm>
#include <cmath>

#include "pinnscape/io.hpp"
#include "pinnscape/network.hpp"

namespace pinnscape::cli {

const std::vector<std::string>& subcommands() {
  static const std::vector<std::string> names{
      "train",         "verify",   "mli",  "hessian-walk", "mode-connect",  "plane-scan",
      "stochastic-scan", "spectrum", "gram", "goldilocks",   "radius-track",  "intrinsic-dim",
      "pca-traj",      "acceleration", "probe-minima"};
  return names;
}

namespace {

json optimizer_json(double lr, int epochs) {
  return {{"kind", "adam"}, {"learning_rate", lr}, {"epochs", epochs},
          {"beta1", 0.9},   {"beta2", 0.999},     {"epsilon", 1e-8}};
}

json probe_defaults(const std::string& sub, bool one_d) {
  if (sub == "train") return {{"trajectory", true}, {"trajectory_stride", 1}};
  if (sub == "verify") return {{"tolerance", 1e-2}, {"test_cloud_seed", 0}};
  if (sub == "mli") return {{"trials", 10}, {"scales", {1.0, 2.0, 5.0}}, {"samples", 101}, {"rel_tol", 1e-6}};
  if (sub == "hessian-walk") return {{"steps", 500}, {"step_size", 1.0}};
  if (sub == "mode-connect") {
    return {{"t_samples", 25},
            {"profile_samples", 101},
            {"optimizer", optimizer_json(1e-3, 5000)},
            {"second_init", one_d ? "independent" : "perturbed"},
            {"perturbation_std", 0.1},
            {"j_clamp", one_d ? json(nullptr) : json(1e-6)}};
  }
  if (sub == "plane-scan") return {{"pairs", 9}, {"resolution", 51}, {"range", 1.0}};
  if (sub == "stochastic-scan") return {{"pairs", 1}, {"resolution", 51}, {"range", 1.0}};
  if (sub == "spectrum") {
    return {{"every", 50}, {"endpoints_only", false}, {"bins", 100}, {"shift", 1e-10}, {"near_zero_rel", 1e-6}};
  }
  if (sub == "gram") {
    return {{"rel_threshold", one_d ? 1e-12 : 1e-6},
            {"trench_range", 10.0},
            {"trench_samples", 201},
            {"resolution", 51}};
  }
  if (sub == "goldilocks") return {{"radii", {0.5, 1.0, 2.0, 5.0, 10.0, 15.0, 20.0, 30.0, 50.0, 100.0}}, {"trials", 5}};
  if (sub == "radius-track") return {{"scales", {0.01, 0.1, 0.5, 1.0}}};
  if (sub == "intrinsic-dim") {
    return {{"dims", one_d ? json{1, 2, 5, 10, 20} : json{10, 20, 50, 100, 200}},
            {"full_epochs", 20000},
            {"orthonormalize", false}};
  }
  if (sub == "pca-traj") return {{"components", 2}, {"resolution", 51}, {"margin", 0.25}};
  if (sub == "acceleration") return {{"convergence_rel_tol", 1e-3}, {"fraction", 0.1}};
  if (sub == "probe-minima") {
    return {{"widths", one_d ? json{20, 5} : json{25, 8}},
            {"optimizers", {"adam", "gd"}},
            {"trials", one_d ? 10 : 5},
            {"band_epochs", 100},
            {"stuck_factor", 10.0}};
  }
  throw ConfigError("unknown subcommand: " + sub);
}

json optimizer_defaults(const std::string& sub, bool one_d) {
  if (sub == "goldilocks") return optimizer_json(1e-3, 5000);
  if (sub == "intrinsic-dim") return optimizer_json(1e-3, 20000);
  if (sub == "acceleration") return optimizer_json(1e-4, 20000);
  if (sub == "probe-minima") return optimizer_json(one_d ? 1e-3 : 5e-4, 5000);
  return optimizer_json(1e-3, one_d ? 7500 : 2500);
}

bool same_kind(const json& def, const json& val) {
  if (def.is_null()) return val.is_null() || val.is_number();
  if (def.is_number_float()) return val.is_number();
  if (def.is_number_unsigned()) return val.is_number_unsigned() || (val.is_number_integer() && val.get<std::int64_t>() >= 0);
  if (def.is_number_integer()) return val.is_number_integer();
  return def.type() == val.type();
}

void merge(json& def, const json& user, const std::string& path) {
  if (!user.is_object()) throw ConfigError(path.empty() ? "config must be a JSON object" : path + " must be an object");
  for (const auto& [key, val] : user.items()) {
    const std::string where = path.empty() ? key : path + "." + key;
    if (!def.contains(key)) throw ConfigError("unknown config key: " + where);
    json& slot = def[key];
    if (slot.is_object()) {
      merge(slot, val, where);
    } else if (slot.is_array()) {
      if (!val.is_array()) throw ConfigError(where + " must be an array");
      if (!slot.empty()) {
        const json proto = slot.front();
        for (const auto& e : val) {
          if (!same_kind(proto, e)) throw ConfigError(where + " has an element of the wrong type");
        }
        json out = json::array();
        for (const auto& e : val) out.push_back(proto.is_number_float() ? json(e.get<double>()) : e);
        slot = std::move(out);
      } else {
        slot = val;
      }
    } else {
      if (!same_kind(slot, val)) throw ConfigError(where + " has the wrong type");
      slot = slot.is_number_float() ? json(val.get<double>()) : val;
    }
  }
}

void require(bool ok, const std::string& what) {
  if (!ok) throw ConfigError(what);
}

bool positive(double v) { return std::isfinite(v) && v > 0.0; }

void check_probe(const std::string& sub, const json& p) {
  auto pos_int = [&](const char* k) { require(p.at(k).get<std::int64_t>() > 0, std::string("probe.") + k + " must be positive"); };
  auto pos_num = [&](const char* k) { require(positive(p.at(k).get<double>()), std::string("probe.") + k + " must be positive"); };
  auto pos_list = [&](const char* k) {
    require(!p.at(k).empty(), std::string("probe.") + k + " must not be empty");
    for (const auto& e : p.at(k)) require(positive(e.get<double>()), std::string("probe.") + k + " entries must be positive");
  };
  if (sub == "train") pos_int("trajectory_stride");
  if (sub == "verify") pos_num("tolerance");
  if (sub == "mli") {
    pos_int("trials");
    pos_list("scales");
    require(p.at("samples").get<int>() >= 2, "probe.samples must be at least 2");
    require(p.at("rel_tol").get<double>() >= 0.0, "probe.rel_tol must be non-negative");
  }
  if (sub == "hessian-walk") {
    require(p.at("steps").get<int>() >= 0, "probe.steps must be non-negative");
    require(std::isfinite(p.at("step_size").get<double>()), "probe.step_size must be finite");
  }
  if (sub == "mode-connect") {
    require(p.at("t_samples").get<int>() >= 2, "probe.t_samples must be at least 2");
    require(p.at("profile_samples").get<int>() >= 2, "probe.profile_samples must be at least 2");
    const auto s = p.at("second_init").get<std::string>();
    require(s == "independent" || s == "perturbed", "probe.second_init must be independent or perturbed");
    pos_num("perturbation_std");
    require(p.at("j_clamp").is_null() || positive(p.at("j_clamp").get<double>()), "probe.j_clamp must be positive or null");
    try {
      optimizer_from_json(p.at("optimizer")).validate();
    } catch (const std::invalid_argument& e) {
      throw ConfigError(std::string("probe.optimizer: ") + e.what());
    }
  }
  if (sub == "plane-scan" || sub == "stochastic-scan") {
    pos_int("pairs");
    pos_int("resolution");
    pos_num("range");
  }
  if (sub == "spectrum") {
    pos_int("every");
    pos_int("bins");
    pos_num("shift");
    pos_num("near_zero_rel");
  }
  if (sub == "gram") {
    pos_num("rel_threshold");
    pos_num("trench_range");
    require(p.at("trench_samples").get<int>() >= 2, "probe.trench_samples must be at least 2");
    pos_int("resolution");
  }
  if (sub == "goldilocks") {
    pos_list("radii");
    pos_int("trials");
  }
  if (sub == "radius-track") pos_list("scales");
  if (sub == "intrinsic-dim") {
    pos_list("dims");
    pos_int("full_epochs");
  }
  if (sub == "pca-traj") {
    pos_int("components");
    pos_int("resolution");
    require(p.at("margin").get<double>() >= 0.0, "probe.margin must be non-negative");
  }
  if (sub == "acceleration") {
    pos_num("convergence_rel_tol");
    const double f = p.at("fraction").get<double>();
    require(f > 0.0 && f <= 0.5, "probe.fraction must be in (0, 0.5]");
  }
  if (sub == "probe-minima") {
    pos_list("widths");
    require(!p.at("optimizers").empty(), "probe.optimizers must not be empty");
    for (const auto& o : p.at("optimizers")) {
      try {
        optimizer_from_string(o.get<std::string>());
      } catch (const std::invalid_argument& e) {
        throw ConfigError(std::string("probe.optimizers: ") + e.what());
      }
    }
    pos_int("trials");
    pos_int("band_epochs");
    pos_num("stuck_factor");
  }
}

}  // namespace

json default_config(const std::string& subcommand, Problem problem, Formulation formulation) {
  const bool one_d = problem == Problem::Elliptic1D;
  const ObjectiveConfig ref = ObjectiveConfig::reference(problem, formulation);
  int width = ref.network.hidden_widths.front();
  // the 2D PINN Hessian is assembled on a narrower net
  if (subcommand == "spectrum" && !one_d && formulation == Formulation::Pinn) width = 15;
  json d = {
      {"seed", std::uint64_t{0}},
      {"problem", to_string(problem)},
      {"objective", to_string(formulation)},
      {"network",
       {{"width", width},
        {"depth", static_cast<int>(ref.network.hidden_widths.size())},
        {"activation", to_string(ref.network.activation)}}},
      {"init_scale", 1.0},
      {"optimizer", optimizer_defaults(subcommand, one_d)},
      {"probe", probe_defaults(subcommand, one_d)},
  };
  if (one_d) {
    d["quadrature"] = {{"mode", to_string(ref.mode)}, {"points", ref.grid_points}, {"batch", ref.batch}};
  } else {
    d["quadrature"] = {
        {"mode", to_string(ref.mode)}, {"radial", ref.radial}, {"angular", ref.angular}, {"batch", ref.batch}};
    d["material"] = {{"mu", ref.material.mu}, {"lambda", ref.material.lambda}};
    d["alpha"] = ref.alpha;
  }
  return d;
}

OptimizerConfig optimizer_from_json(const json& j) {
  OptimizerConfig o;
  o.kind = optimizer_from_string(j.at("kind").get<std::string>());
  o.learning_rate = j.at("learning_rate").get<double>();
  o.epochs = j.at("epochs").get<int>();
  o.beta1 = j.at("beta1").get<double>();
  o.beta2 = j.at("beta2").get<double>();
  o.epsilon = j.at("epsilon").get<double>();
  return o;
}

std::string RunConfig::experiment_id() const {
  return subcommand + "-" + effective.at("problem").get<std::string>() + "-" +
         effective.at("objective").get<std::string>() + "-" + hash.substr(0, 8);
}

RunConfig load_config(const std::string& subcommand, const json& user, std::optional<std::uint64_t> seed_override) {
  const auto& subs = subcommands();
  if (std::find(subs.begin(), subs.end(), subcommand) == subs.end()) throw ConfigError("unknown subcommand: " + subcommand);
  if (!user.is_object()) throw ConfigError("config must be a JSON object");

  Problem problem = Problem::Elliptic1D;
  Formulation formulation = Formulation::Drm;
  try {
    if (user.contains("problem")) problem = problem_from_string(user.at("problem").get<std::string>());
    if (user.contains("objective")) formulation = formulation_from_string(user.at("objective").get<std::string>());
  } catch (const std::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }

  RunConfig rc;
  rc.subcommand = subcommand;
  rc.effective = default_config(subcommand, problem, formulation);
  merge(rc.effective, user, "");
  if (seed_override) rc.effective["seed"] = *seed_override;
  const json& e = rc.effective;

  try {
    rc.seed = e.at("seed").get<std::uint64_t>();
    ObjectiveConfig oc = ObjectiveConfig::reference(problem, formulation);
    const int width = e.at("network").at("width").get<int>();
    const int depth = e.at("network").at("depth").get<int>();
    require(width > 0 && depth > 0, "network.width and network.depth must be positive");
    oc.network.hidden_widths.assign(static_cast<std::size_t>(depth), width);
    oc.network.activation = activation_from_string(e.at("network").at("activation").get<std::string>());
    const json& q = e.at("quadrature");
    oc.mode = integration_mode_from_string(q.at("mode").get<std::string>());
    oc.batch = q.at("batch").get<int>();
    if (problem == Problem::Elliptic1D) {
      oc.grid_points = q.at("points").get<int>();
    } else {
      oc.radial = q.at("radial").get<int>();
      oc.angular = q.at("angular").get<int>();
      oc.material.mu = e.at("material").at("mu").get<double>();
      oc.material.lambda = e.at("material").at("lambda").get<double>();
      oc.alpha = e.at("alpha").get<double>();
    }
    oc.validate();
    rc.objective = oc;

    rc.optimizer = optimizer_from_json(e.at("optimizer"));
    rc.optimizer.seed = rc.seed;
    rc.optimizer.validate();

    rc.init_scale = e.at("init_scale").get<double>();
    require(positive(rc.init_scale), "init_scale must be positive");
    rc.probe = e.at("probe");
    check_probe(subcommand, rc.probe);
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& ex) {
    throw ConfigError(std::string("config: ") + ex.what());
  }
  rc.hash = io::config_hash(rc.effective);
  return rc;
}

}  // namespace pinnscape::cli
