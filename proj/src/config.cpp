#include "sdemap/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

namespace sdemap {

using nlohmann::json;

namespace {

// Reads keys from one JSON object and rejects any key it was not asked about.
class ObjectReader {
 public:
  ObjectReader(const json& j, std::string where) : j_(j), where_(std::move(where)) {
    if (!j_.is_object()) throw ConfigError(where_ + ": expected an object");
  }

  template <class T>
  void get(const char* key, T& out) {
    seen_.insert(key);
    auto it = j_.find(key);
    if (it == j_.end()) return;
    try {
      out = it->template get<T>();
    } catch (const json::exception& e) {
      throw ConfigError(where_ + "." + key + ": " + e.what());
    }
  }

  void kinds(const char* key, std::vector<MeritKind>& out) {
    std::vector<std::string> names;
    bool present = j_.contains(key);
    get(key, names);
    if (!present) return;
    out.clear();
    for (const auto& n : names) {
      try {
        out.push_back(parse_merit_kind(n));
      } catch (const std::exception& e) {
        throw ConfigError(where_ + "." + key + ": " + e.what());
      }
    }
  }

  void init(const char* key, InitStrategy& out) {
    std::string name = to_string(out);
    get(key, name);
    try {
      out = parse_init_strategy(name);
    } catch (const std::exception& e) {
      throw ConfigError(where_ + "." + key + ": " + e.what());
    }
  }

  const json* child(const char* key) {
    seen_.insert(key);
    auto it = j_.find(key);
    return it == j_.end() ? nullptr : &*it;
  }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it)
      if (!seen_.count(it.key())) throw ConfigError(where_ + ": unknown key '" + it.key() + "'");
  }

 private:
  const json& j_;
  std::string where_;
  std::set<std::string> seen_;
};

void read_optimizer(const json& j, OptimizerOptions& o) {
  ObjectReader r(j, "optimizer");
  r.get("grad_tol", o.grad_tol);
  r.get("max_iter", o.max_iter);
  r.get("memory", o.memory);
  r.get("armijo", o.armijo);
  r.get("backtrack", o.backtrack);
  r.get("max_backtracks", o.max_backtracks);
  r.get("precondition", o.precondition);
  r.get("preconditioner_mass", o.preconditioner_mass);
  r.finish();
}

void read_benes(const json& j, BenesConvergenceConfig& c) {
  ObjectReader r(j, "benes_convergence");
  r.get("levels", c.levels);
  r.kinds("kinds", c.kinds);
  r.get("horizon", c.horizon);
  r.get("measurement_time", c.measurement_time);
  r.get("measurement_value", c.measurement_value);
  r.get("measurement_variance", c.measurement_variance);
  r.get("initial_variance", c.initial_variance);
  r.init("init", c.init);
  r.get("cold_start", c.cold_start);
  r.finish();
}

void read_vdp(const json& j, VdpRobustConfig& c) {
  ObjectReader r(j, "vdp_robust");
  r.get("replicates", c.replicates);
  r.get("horizon", c.horizon);
  r.get("sim_step", c.sim_step);
  r.get("estimation_step", c.estimation_step);
  r.get("measurement_step", c.measurement_step);
  r.get("sigma_y", c.sigma_y);
  r.get("sigma_outlier", c.sigma_outlier);
  r.get("p_outlier", c.p_outlier);
  r.get("observed_component", c.observed_component);
  r.get("damping", c.damping);
  r.get("noise", c.noise);
  r.get("initial_variance", c.initial_variance);
  r.kinds("kinds", c.kinds);
  r.init("init", c.init);
  r.finish();
}

void read_params(const json& j, BuiltinParams& p) {
  ObjectReader r(j, "simulate.params");
  r.get("benes_initial_variance", p.benes_initial_variance);
  r.get("vdp_initial_variance", p.vdp_initial_variance);
  r.get("vdp_damping", p.vdp_damping);
  r.get("vdp_noise", p.vdp_noise);
  r.get("ou_rate", p.ou_rate);
  r.get("ou_initial_variance", p.ou_initial_variance);
  r.finish();
}

void read_simulate(const json& j, SimulateConfig& c) {
  ObjectReader r(j, "simulate");
  r.get("model", c.model);
  r.get("scheme", c.scheme);
  r.get("step", c.step);
  r.get("horizon", c.horizon);
  r.get("measurement_step", c.measurement_step);
  r.get("sigma_y", c.sigma_y);
  r.get("sigma_outlier", c.sigma_outlier);
  r.get("p_outlier", c.p_outlier);
  r.get("observed_component", c.observed_component);
  if (const json* p = r.child("params")) read_params(*p, c.params);
  r.finish();
}

void read_validate(const json& j, ValidateConfig& c) {
  ObjectReader r(j, "validate");
  r.get("model_samples", c.model_samples);
  r.get("gradient_cases", c.gradient_cases);
  r.get("ks_samples", c.ks_samples);
  r.get("ks_step", c.ks_step);
  r.finish();
}

std::vector<std::string> kind_names(const std::vector<MeritKind>& kinds) {
  std::vector<std::string> out;
  for (auto k : kinds) out.push_back(to_string(k));
  return out;
}

void require(bool ok, const std::string& message) {
  if (!ok) throw ConfigError(message);
}

}  // namespace

std::string to_string(InitStrategy strategy) {
  return strategy == InitStrategy::prior_mean ? "prior_mean" : "meas_interp";
}

InitStrategy parse_init_strategy(std::string_view name) {
  if (name == "prior_mean") return InitStrategy::prior_mean;
  if (name == "meas_interp") return InitStrategy::meas_interp;
  throw std::invalid_argument("unknown initialization strategy '" + std::string(name) + "'");
}

void ExperimentConfig::check() const {
  require(schema_version == kConfigSchemaVersion,
          "schema_version: expected " + std::to_string(kConfigSchemaVersion));
  try {
    optimizer.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }

  require(!benes.levels.empty(), "benes_convergence.levels: must not be empty");
  for (std::size_t i = 0; i < benes.levels.size(); ++i) {
    require(benes.levels[i] > 0, "benes_convergence.levels: must be positive");
    if (i > 0)
      require(benes.levels[i] > benes.levels[i - 1] && benes.levels[i] % benes.levels[i - 1] == 0,
              "benes_convergence.levels: must increase and each divide the next");
  }
  require(!benes.kinds.empty(), "benes_convergence.kinds: must not be empty");
  require(benes.horizon > 0.0, "benes_convergence.horizon: must be positive");
  require(benes.measurement_time >= 0.0 && benes.measurement_time <= benes.horizon,
          "benes_convergence.measurement_time: must lie in [0, horizon]");
  require(benes.measurement_variance > 0.0, "benes_convergence.measurement_variance: must be positive");
  require(benes.initial_variance > 0.0, "benes_convergence.initial_variance: must be positive");

  require(vdp.replicates >= 1, "vdp_robust.replicates: must be positive");
  require(vdp.horizon > 0.0, "vdp_robust.horizon: must be positive");
  require(vdp.sim_step > 0.0, "vdp_robust.sim_step: must be positive");
  require(vdp.estimation_step > 0.0, "vdp_robust.estimation_step: must be positive");
  require(vdp.measurement_step > 0.0, "vdp_robust.measurement_step: must be positive");
  require(vdp.sigma_y > 0.0 && vdp.sigma_outlier > 0.0, "vdp_robust: standard deviations must be positive");
  require(vdp.p_outlier >= 0.0 && vdp.p_outlier <= 1.0, "vdp_robust.p_outlier: must lie in [0, 1]");
  require(vdp.observed_component >= 0 && vdp.observed_component < 2,
          "vdp_robust.observed_component: must be 0 or 1");
  require(vdp.noise > 0.0 && vdp.initial_variance > 0.0, "vdp_robust: noise and initial_variance must be positive");
  require(!vdp.kinds.empty(), "vdp_robust.kinds: must not be empty");

  require(simulate.model == "benes" || simulate.model == "vdp" || simulate.model == "ou",
          "simulate.model: expected benes, vdp or ou");
  require(simulate.scheme == "order15" || simulate.scheme == "euler", "simulate.scheme: expected order15 or euler");
  require(simulate.step > 0.0 && simulate.horizon > 0.0 && simulate.measurement_step > 0.0,
          "simulate: steps and horizon must be positive");
  require(simulate.sigma_y > 0.0 && simulate.sigma_outlier > 0.0, "simulate: standard deviations must be positive");
  require(simulate.p_outlier >= 0.0 && simulate.p_outlier <= 1.0, "simulate.p_outlier: must lie in [0, 1]");
  require(simulate.observed_component >= 0, "simulate.observed_component: must be non-negative");

  require(validate.model_samples >= 1 && validate.gradient_cases >= 1 && validate.ks_samples >= 1,
          "validate: sample counts must be positive");
  require(validate.ks_step > 0.0 && validate.ks_step <= 1.0, "validate.ks_step: must lie in (0, 1]");
}

ExperimentConfig parse_config(const std::string& json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  ExperimentConfig c;
  ObjectReader r(j, "config");
  const bool has_version = j.is_object() && j.contains("schema_version");
  r.get("schema_version", c.schema_version);
  if (!has_version) throw ConfigError("config: missing schema_version");
  r.get("seed", c.seed);
  if (const json* p = r.child("optimizer")) read_optimizer(*p, c.optimizer);
  if (const json* p = r.child("benes_convergence")) read_benes(*p, c.benes);
  if (const json* p = r.child("vdp_robust")) read_vdp(*p, c.vdp);
  if (const json* p = r.child("simulate")) read_simulate(*p, c.simulate);
  if (const json* p = r.child("validate")) read_validate(*p, c.validate);
  r.finish();
  c.check();
  return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

std::string config_to_json(const ExperimentConfig& c) {
  const auto& o = c.optimizer;
  const auto& b = c.benes;
  const auto& v = c.vdp;
  const auto& s = c.simulate;
  json j = {
      {"schema_version", c.schema_version},
      {"seed", c.seed},
      {"optimizer",
       {{"grad_tol", o.grad_tol},
        {"max_iter", o.max_iter},
        {"memory", o.memory},
        {"armijo", o.armijo},
        {"backtrack", o.backtrack},
        {"max_backtracks", o.max_backtracks},
        {"precondition", o.precondition},
        {"preconditioner_mass", o.preconditioner_mass}}},
      {"benes_convergence",
       {{"levels", b.levels},
        {"kinds", kind_names(b.kinds)},
        {"horizon", b.horizon},
        {"measurement_time", b.measurement_time},
        {"measurement_value", b.measurement_value},
        {"measurement_variance", b.measurement_variance},
        {"initial_variance", b.initial_variance},
        {"init", to_string(b.init)},
        {"cold_start", b.cold_start}}},
      {"vdp_robust",
       {{"replicates", v.replicates},
        {"horizon", v.horizon},
        {"sim_step", v.sim_step},
        {"estimation_step", v.estimation_step},
        {"measurement_step", v.measurement_step},
        {"sigma_y", v.sigma_y},
        {"sigma_outlier", v.sigma_outlier},
        {"p_outlier", v.p_outlier},
        {"observed_component", v.observed_component},
        {"damping", v.damping},
        {"noise", v.noise},
        {"initial_variance", v.initial_variance},
        {"kinds", kind_names(v.kinds)},
        {"init", to_string(v.init)}}},
      {"simulate",
       {{"model", s.model},
        {"scheme", s.scheme},
        {"step", s.step},
        {"horizon", s.horizon},
        {"measurement_step", s.measurement_step},
        {"sigma_y", s.sigma_y},
        {"sigma_outlier", s.sigma_outlier},
        {"p_outlier", s.p_outlier},
        {"observed_component", s.observed_component},
        {"params",
         {{"benes_initial_variance", s.params.benes_initial_variance},
          {"vdp_initial_variance", s.params.vdp_initial_variance},
          {"vdp_damping", s.params.vdp_damping},
          {"vdp_noise", s.params.vdp_noise},
          {"ou_rate", s.params.ou_rate},
          {"ou_initial_variance", s.params.ou_initial_variance}}}}},
      {"validate",
       {{"model_samples", c.validate.model_samples},
        {"gradient_cases", c.validate.gradient_cases},
        {"ks_samples", c.validate.ks_samples},
        {"ks_step", c.validate.ks_step}}},
  };
  return j.dump(2) + "\n";
}

}  // namespace sdemap
