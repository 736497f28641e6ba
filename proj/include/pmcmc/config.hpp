#pragma once

// Experiment configuration, stored as JSON. Every object rejects unknown
// keys; omitted keys take model-dependent defaults. `to_json` emits the fully
// resolved configuration, which `parse_config` accepts unchanged.

#include <algorithm>
#include <array>
#include <cstdint>
#include <fstream>
#include <initializer_list>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "pmcmc/epidemic_model.hpp"
#include "pmcmc/parameters.hpp"
#include "pmcmc/priors.hpp"
#include "pmcmc/samplers.hpp"

namespace pmcmc {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct SamplerConfig {
  SamplerKind kind = SamplerKind::mh;
  std::size_t iterations = 50;
  std::size_t burn_in = 0;
  std::map<Param, double> mh_step_sizes{{Param::beta, 0.005}, {Param::gamma, 0.001}};
  NutsConfig nuts{.step_size = 0.0017};
};

struct ExperimentConfig {
  ModelKind model = ModelKind::sir;
  ParameterVector truth{0.254, 0.111, 0.4, 1.246};
  ObservationModelParams observation;
  int days = 125;
  InitialStateSpec initial =
      InitialStateSpec::fixed({4990.0 / 5000.0, 0.0, 10.0 / 5000.0, 0.0});
  std::size_t particles = 100;
  std::optional<double> resample_threshold;  // default particles / 2
  std::vector<Param> infer{Param::beta, Param::gamma};
  std::map<Param, double> init{{Param::beta, 0.15}, {Param::gamma, 0.21}};
  PriorSpec priors = PriorSpec::defaults();
  SamplerConfig sampler;
  std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
  std::uint64_t simulation_seed = 2024;
  std::string output_dir = "out";
  std::string observations;  // empty: <output_dir>/observations.csv
  bool record_time = true;
  unsigned threads = 1;

  std::string observations_path() const {
    return observations.empty() ? output_dir + "/observations.csv" : observations;
  }

  double threshold() const {
    return resample_threshold.value_or(static_cast<double>(particles) / 2.0);
  }

  /// Truth with the inferred mask applied.
  ParameterVector base_parameters() const {
    std::array<bool, kParamCount> mask{};
    for (Param p : infer) mask[index_of(p)] = true;
    return ParameterVector(truth.beta(), truth.gamma(), truth.delta(), truth.v(), mask);
  }

  Eigen::VectorXd initial_point() const {
    const ParameterVector base = base_parameters();
    Eigen::VectorXd out(static_cast<Eigen::Index>(base.inferred_count()));
    Eigen::Index k = 0;
    for (Param p : base.inferred_params()) {
      const auto it = init.find(p);
      out[k++] = it != init.end() ? it->second : priors.get(p).median();
    }
    return out;
  }

  std::vector<std::string> inferred_names() const {
    std::vector<std::string> out;
    for (Param p : base_parameters().inferred_params()) out.emplace_back(param_name(p));
    return out;
  }

  Eigen::VectorXd step_sizes() const {
    const ParameterVector base = base_parameters();
    Eigen::VectorXd out(static_cast<Eigen::Index>(base.inferred_count()));
    Eigen::Index k = 0;
    for (Param p : base.inferred_params()) {
      const auto it = sampler.mh_step_sizes.find(p);
      if (it == sampler.mh_step_sizes.end()) {
        throw ConfigError("no MH step size for " + std::string(param_name(p)));
      }
      out[k++] = it->second;
    }
    return out;
  }

  void validate() const {
    observation.validate();
    if (days < 1) throw ConfigError("days must be >= 1");
    if (particles < 1) throw ConfigError("particles must be >= 1");
    const double th = threshold();
    if (!(th > 0.0) || th > static_cast<double>(particles)) {
      throw ConfigError("resample_threshold must lie in (0, particles]");
    }
    if (infer.empty()) throw ConfigError("infer must name at least one parameter");
    for (Param p : infer) {
      if (model == ModelKind::sir && p == Param::delta) throw ConfigError("SIR has no delta");
      if (model == ModelKind::seir && p == Param::v) throw ConfigError("SEIR has no v");
      if (!priors.has(p)) throw ConfigError("no prior for " + std::string(param_name(p)));
      if (std::count(infer.begin(), infer.end(), p) > 1) {
        throw ConfigError("parameter listed twice in infer");
      }
    }
    for (const auto& [p, value] : init) {
      if (!(value > 0.0)) throw ConfigError("initial values must be > 0");
    }
    if (sampler.iterations < 1) throw ConfigError("sampler.iterations must be >= 1");
    if (sampler.burn_in >= sampler.iterations) throw ConfigError("sampler.burn_in must be < iterations");
    if (sampler.kind == SamplerKind::mh) (void)step_sizes();
    for (const auto& [p, step] : sampler.mh_step_sizes) {
      if (!(step > 0.0)) throw ConfigError("MH step sizes must be > 0");
    }
    try {
      sampler.nuts.validate();
    } catch (const std::invalid_argument& e) {
      throw ConfigError(e.what());
    }
    if (seeds.empty()) throw ConfigError("seeds must not be empty");
    if (output_dir.empty()) throw ConfigError("output_dir must not be empty");
    if (threads < 1) throw ConfigError("threads must be >= 1");
    if (!initial.is_uniform() && model == ModelKind::sir && initial.fixed_state().e != 0.0) {
      throw ConfigError("SIR initial state must have e = 0");
    }
  }
};

/// Seeds derived from a user-facing chain seed.
inline std::uint64_t filter_seed_for(std::uint64_t seed) { return mix_seed(seed, 1); }
inline std::uint64_t sampler_seed_for(std::uint64_t seed) { return mix_seed(seed, 2); }

namespace detail {

using nlohmann::json;

inline void require_object(const json& j, std::string_view where) {
  if (!j.is_object()) throw ConfigError(std::string(where) + " must be an object");
}

inline void check_keys(const json& j, std::initializer_list<std::string_view> allowed,
                       std::string_view where) {
  require_object(j, where);
  for (const auto& [key, value] : j.items()) {
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) {
      throw ConfigError("unknown key '" + key + "' in " + std::string(where));
    }
  }
}

template <class T>
T get_as(const json& j, std::string_view where) {
  try {
    return j.get<T>();
  } catch (const json::exception&) {
    throw ConfigError(std::string(where) + " has the wrong type");
  }
}

inline double get_number(const json& j, std::string_view where) {
  if (!j.is_number()) throw ConfigError(std::string(where) + " must be a number");
  return j.get<double>();
}

inline std::uint64_t get_unsigned(const json& j, std::string_view where) {
  if (j.is_number_unsigned()) return j.get<std::uint64_t>();
  if (j.is_number_integer() && j.get<std::int64_t>() >= 0) {
    return static_cast<std::uint64_t>(j.get<std::int64_t>());
  }
  throw ConfigError(std::string(where) + " must be a non-negative integer");
}

inline Param get_param(const std::string& name, std::string_view where) {
  const auto p = param_from_name(name);
  if (!p) throw ConfigError("unknown parameter '" + name + "' in " + std::string(where));
  return *p;
}

inline std::map<Param, double> get_param_map(const json& j, std::string_view where) {
  check_keys(j, {"beta", "gamma", "delta", "v"}, where);
  std::map<Param, double> out;
  for (const auto& [key, value] : j.items()) {
    out[get_param(key, where)] = get_number(value, std::string(where) + "." + key);
  }
  return out;
}

inline Prior parse_prior(const json& j, std::string_view where) {
  require_object(j, where);
  if (!j.contains("kind")) throw ConfigError(std::string(where) + ".kind is required");
  const std::string kind = get_as<std::string>(j.at("kind"), where);
  const std::string w(where);
  try {
    if (kind == "halfnormal") {
      check_keys(j, {"kind", "scale"}, where);
      return Prior::half_normal(get_number(j.at("scale"), w + ".scale"));
    }
    if (kind == "normal") {
      check_keys(j, {"kind", "mean", "sd"}, where);
      return Prior::truncated_normal(get_number(j.at("mean"), w + ".mean"),
                                     get_number(j.at("sd"), w + ".sd"));
    }
    if (kind == "uniform") {
      check_keys(j, {"kind", "lo", "hi"}, where);
      return Prior::uniform(get_number(j.at("lo"), w + ".lo"), get_number(j.at("hi"), w + ".hi"));
    }
  } catch (const json::out_of_range&) {
    throw ConfigError(w + " is missing a field for kind '" + kind + "'");
  } catch (const std::invalid_argument& e) {
    throw ConfigError(w + ": " + e.what());
  }
  throw ConfigError("unknown prior kind '" + kind + "' in " + w);
}

inline json prior_to_json(const Prior& prior) {
  switch (prior.kind()) {
    case Prior::Kind::half_normal: return {{"kind", "halfnormal"}, {"scale", prior.a()}};
    case Prior::Kind::truncated_normal:
      return {{"kind", "normal"}, {"mean", prior.a()}, {"sd", prior.b()}};
    case Prior::Kind::uniform: return {{"kind", "uniform"}, {"lo", prior.a()}, {"hi", prior.b()}};
  }
  return {};
}

inline json param_map_to_json(const std::map<Param, double>& m) {
  json out = json::object();
  for (const auto& [p, value] : m) out[std::string(param_name(p))] = value;
  return out;
}

}  // namespace detail

inline ExperimentConfig parse_config(const nlohmann::json& j) {
  using detail::check_keys;
  using detail::get_number;
  using detail::get_unsigned;
  check_keys(j,
             {"model", "truth", "observation", "days", "initial", "particles",
              "resample_threshold", "infer", "init", "priors", "sampler", "seeds",
              "simulation_seed", "output_dir", "observations", "record_time", "threads"},
             "config");

  ExperimentConfig cfg;
  if (j.contains("model")) {
    const auto kind = model_from_name(detail::get_as<std::string>(j.at("model"), "model"));
    if (!kind) throw ConfigError("model must be 'sir' or 'seir'");
    cfg.model = *kind;
  }
  if (cfg.model == ModelKind::seir) {
    cfg.initial = InitialStateSpec::uniform(0.00016, 0.00024);
    cfg.infer = {Param::beta, Param::gamma, Param::delta};
    cfg.init = {{Param::beta, 0.254}, {Param::gamma, 0.111}, {Param::delta, 0.4}};
    cfg.sampler.kind = SamplerKind::nuts;
    cfg.sampler.iterations = 2000;
    cfg.sampler.burn_in = 1000;
    cfg.sampler.nuts.step_size = 0.0055;
  }

  if (j.contains("truth")) {
    const auto m = detail::get_param_map(j.at("truth"), "truth");
    ParameterVector t = cfg.truth;
    try {
      for (const auto& [p, value] : m) t = t.with(p, value);
    } catch (const std::invalid_argument& e) {
      throw ConfigError(std::string("truth: ") + e.what());
    }
    cfg.truth = t;
  }

  if (j.contains("observation")) {
    const auto& o = j.at("observation");
    check_keys(o, {"b", "phi", "sigma", "population"}, "observation");
    if (o.contains("b")) cfg.observation.b = get_number(o.at("b"), "observation.b");
    if (o.contains("phi")) cfg.observation.phi = get_number(o.at("phi"), "observation.phi");
    if (o.contains("sigma")) cfg.observation.sigma = get_number(o.at("sigma"), "observation.sigma");
    if (o.contains("population")) {
      cfg.observation.population = static_cast<int>(get_unsigned(o.at("population"), "observation.population"));
    }
    try {
      cfg.observation.validate();
    } catch (const std::invalid_argument& e) {
      throw ConfigError(e.what());
    }
  }

  if (j.contains("days")) cfg.days = static_cast<int>(get_unsigned(j.at("days"), "days"));

  if (j.contains("initial")) {
    const auto& in = j.at("initial");
    detail::require_object(in, "initial");
    const std::string kind = in.contains("kind") ? detail::get_as<std::string>(in.at("kind"), "initial.kind") : "fixed";
    try {
      if (kind == "fixed") {
        check_keys(in, {"kind", "s", "e", "i", "r"}, "initial");
        CompartmentState x{0.0, 0.0, 0.0, 0.0};
        x.s = in.contains("s") ? get_number(in.at("s"), "initial.s") : 0.0;
        x.e = in.contains("e") ? get_number(in.at("e"), "initial.e") : 0.0;
        x.i = in.contains("i") ? get_number(in.at("i"), "initial.i") : 0.0;
        x.r = in.contains("r") ? get_number(in.at("r"), "initial.r") : 0.0;
        cfg.initial = InitialStateSpec::fixed(x);
      } else if (kind == "uniform") {
        check_keys(in, {"kind", "lo", "hi"}, "initial");
        cfg.initial = InitialStateSpec::uniform(get_number(in.at("lo"), "initial.lo"),
                                                get_number(in.at("hi"), "initial.hi"));
      } else {
        throw ConfigError("initial.kind must be 'fixed' or 'uniform'");
      }
    } catch (const std::invalid_argument& e) {
      throw ConfigError(std::string("initial: ") + e.what());
    } catch (const nlohmann::json::out_of_range&) {
      throw ConfigError("initial: missing lo or hi");
    }
  }

  if (j.contains("particles")) cfg.particles = get_unsigned(j.at("particles"), "particles");
  if (j.contains("resample_threshold") && !j.at("resample_threshold").is_null()) {
    cfg.resample_threshold = get_number(j.at("resample_threshold"), "resample_threshold");
  }

  if (j.contains("infer")) {
    const auto& list = j.at("infer");
    if (!list.is_array()) throw ConfigError("infer must be a list of parameter names");
    cfg.infer.clear();
    for (const auto& item : list) {
      cfg.infer.push_back(detail::get_param(detail::get_as<std::string>(item, "infer"), "infer"));
    }
    std::sort(cfg.infer.begin(), cfg.infer.end());
  }
  if (j.contains("init")) cfg.init = detail::get_param_map(j.at("init"), "init");

  if (j.contains("priors")) {
    const auto& pr = j.at("priors");
    check_keys(pr, {"beta", "gamma", "delta", "v"}, "priors");
    for (const auto& [key, value] : pr.items()) {
      cfg.priors.set(detail::get_param(key, "priors"), detail::parse_prior(value, "priors." + key));
    }
  }

  if (j.contains("sampler")) {
    const auto& s = j.at("sampler");
    check_keys(s, {"kind", "iterations", "burn_in", "mh_step_sizes", "nuts_step_size", "max_tree_depth"},
               "sampler");
    if (s.contains("kind")) {
      const auto kind = sampler_from_name(detail::get_as<std::string>(s.at("kind"), "sampler.kind"));
      if (!kind) throw ConfigError("sampler.kind must be 'mh' or 'nuts'");
      cfg.sampler.kind = *kind;
    }
    if (s.contains("iterations")) cfg.sampler.iterations = get_unsigned(s.at("iterations"), "sampler.iterations");
    if (s.contains("burn_in")) cfg.sampler.burn_in = get_unsigned(s.at("burn_in"), "sampler.burn_in");
    if (s.contains("mh_step_sizes")) {
      cfg.sampler.mh_step_sizes = detail::get_param_map(s.at("mh_step_sizes"), "sampler.mh_step_sizes");
    }
    if (s.contains("nuts_step_size")) {
      cfg.sampler.nuts.step_size = get_number(s.at("nuts_step_size"), "sampler.nuts_step_size");
    }
    if (s.contains("max_tree_depth")) {
      cfg.sampler.nuts.max_tree_depth = static_cast<int>(get_unsigned(s.at("max_tree_depth"), "sampler.max_tree_depth"));
    }
  }

  if (j.contains("seeds")) {
    const auto& list = j.at("seeds");
    if (!list.is_array()) throw ConfigError("seeds must be a list of non-negative integers");
    cfg.seeds.clear();
    for (const auto& item : list) cfg.seeds.push_back(get_unsigned(item, "seeds"));
  }
  if (j.contains("simulation_seed")) cfg.simulation_seed = get_unsigned(j.at("simulation_seed"), "simulation_seed");
  if (j.contains("output_dir")) cfg.output_dir = detail::get_as<std::string>(j.at("output_dir"), "output_dir");
  if (j.contains("observations")) cfg.observations = detail::get_as<std::string>(j.at("observations"), "observations");
  if (j.contains("record_time")) {
    if (!j.at("record_time").is_boolean()) throw ConfigError("record_time must be true or false");
    cfg.record_time = j.at("record_time").get<bool>();
  }
  if (j.contains("threads")) cfg.threads = static_cast<unsigned>(get_unsigned(j.at("threads"), "threads"));

  cfg.validate();
  return cfg;
}

inline ExperimentConfig parse_config_text(std::string_view text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  return parse_config(j);
}

inline ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_config_text(buf.str());
}

inline nlohmann::json to_json(const ExperimentConfig& cfg) {
  using nlohmann::json;
  json j;
  j["model"] = std::string(model_name(cfg.model));
  j["truth"] = {{"beta", cfg.truth.beta()}, {"gamma", cfg.truth.gamma()},
                {"delta", cfg.truth.delta()}, {"v", cfg.truth.v()}};
  j["observation"] = {{"b", cfg.observation.b}, {"phi", cfg.observation.phi},
                      {"sigma", cfg.observation.sigma}, {"population", cfg.observation.population}};
  j["days"] = cfg.days;
  if (cfg.initial.is_uniform()) {
    j["initial"] = {{"kind", "uniform"}, {"lo", cfg.initial.lo()}, {"hi", cfg.initial.hi()}};
  } else {
    const CompartmentState& x = cfg.initial.fixed_state();
    j["initial"] = {{"kind", "fixed"}, {"s", x.s}, {"e", x.e}, {"i", x.i}, {"r", x.r}};
  }
  j["particles"] = cfg.particles;
  j["resample_threshold"] = cfg.threshold();
  json infer = json::array();
  for (Param p : cfg.infer) infer.push_back(std::string(param_name(p)));
  j["infer"] = infer;
  std::map<Param, double> init;
  const Eigen::VectorXd start = cfg.initial_point();
  const auto names = cfg.base_parameters().inferred_params();
  for (std::size_t k = 0; k < names.size(); ++k) init[names[k]] = start[static_cast<Eigen::Index>(k)];
  j["init"] = detail::param_map_to_json(init);
  json priors = json::object();
  for (Param p : kAllParams) {
    if (cfg.priors.has(p)) priors[std::string(param_name(p))] = detail::prior_to_json(cfg.priors.get(p));
  }
  j["priors"] = priors;
  j["sampler"] = {{"kind", std::string(sampler_name(cfg.sampler.kind))},
                  {"iterations", cfg.sampler.iterations},
                  {"burn_in", cfg.sampler.burn_in},
                  {"mh_step_sizes", detail::param_map_to_json(cfg.sampler.mh_step_sizes)},
                  {"nuts_step_size", cfg.sampler.nuts.step_size},
                  {"max_tree_depth", cfg.sampler.nuts.max_tree_depth}};
  j["seeds"] = cfg.seeds;
  j["simulation_seed"] = cfg.simulation_seed;
  j["output_dir"] = cfg.output_dir;
  j["observations"] = cfg.observations;
  j["record_time"] = cfg.record_time;
  j["threads"] = cfg.threads;
  return j;
}

}  // namespace pmcmc
