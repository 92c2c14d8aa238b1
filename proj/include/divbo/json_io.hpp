#pragma once

#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "divbo/config_space.hpp"
#include "divbo/error.hpp"
#include "divbo/optimizer.hpp"

namespace divbo {

using json = nlohmann::ordered_json;

inline json config_to_json(const Configuration& config) {
  json j = json::object();
  for (const auto& [name, value] : config.assignments) {
    if (const auto* d = std::get_if<double>(&value)) {
      j[name] = *d;
    } else if (const auto* i = std::get_if<std::int64_t>(&value)) {
      j[name] = *i;
    } else {
      j[name] = std::get<std::string>(value);
    }
  }
  return j;
}

inline Configuration config_from_json(const json& j, const ConfigSpace& space) {
  Configuration config;
  for (const auto& [name, value] : j.items()) {
    const HyperparameterDef* def = nullptr;
    if (name == space.algorithm_param().name) {
      def = &space.algorithm_param();
    } else {
      for (const auto& p : space.params()) {
        if (p.name == name) def = &p;
      }
    }
    if (def == nullptr) {
      throw ValidationError("unknown hyperparameter '" + name + "' in config");
    }
    switch (def->kind) {
      case ParamKind::Continuous:
        config.assignments[name] = value.get<double>();
        break;
      case ParamKind::Integer:
        config.assignments[name] = value.get<std::int64_t>();
        break;
      case ParamKind::Categorical:
        config.assignments[name] = value.get<std::string>();
        break;
    }
  }
  space.validate(config);
  return config;
}

// Space definition document: {"name": ..., "algorithm_param": {...},
// "params": [{name, kind, bounds/choices, log, condition}, ...]}.
inline json param_def_to_json(const HyperparameterDef& def) {
  json j;
  j["name"] = def.name;
  switch (def.kind) {
    case ParamKind::Continuous:
      j["kind"] = "continuous";
      j["bounds"] = {def.lo, def.hi};
      j["log"] = def.log_scale;
      break;
    case ParamKind::Integer:
      j["kind"] = "integer";
      j["bounds"] = {def.ilo, def.ihi};
      break;
    case ParamKind::Categorical:
      j["kind"] = "categorical";
      j["choices"] = def.choices;
      break;
  }
  if (def.condition) {
    j["condition"] = {{"parent", def.condition->parent},
                      {"value", def.condition->value}};
  }
  return j;
}

inline HyperparameterDef param_def_from_json(const json& j) {
  const std::string name = j.at("name").get<std::string>();
  const std::string kind = j.at("kind").get<std::string>();
  HyperparameterDef def;
  if (kind == "continuous") {
    def = HyperparameterDef::real(name, j.at("bounds").at(0).get<double>(),
                                  j.at("bounds").at(1).get<double>(),
                                  j.value("log", false));
  } else if (kind == "integer") {
    def = HyperparameterDef::integer(name,
                                     j.at("bounds").at(0).get<std::int64_t>(),
                                     j.at("bounds").at(1).get<std::int64_t>());
  } else if (kind == "categorical") {
    def = HyperparameterDef::categorical(
        name, j.at("choices").get<std::vector<std::string>>());
  } else {
    throw ValidationError("unknown hyperparameter kind '" + kind + "'");
  }
  if (j.contains("condition")) {
    def.condition = Condition{j["condition"].at("parent").get<std::string>(),
                              j["condition"].at("value").get<std::string>()};
  }
  return def;
}

inline json space_to_json(const ConfigSpace& space, const std::string& name) {
  json j;
  j["name"] = name;
  j["algorithm_param"] = param_def_to_json(space.algorithm_param());
  json params = json::array();
  for (const auto& def : space.params()) params.push_back(param_def_to_json(def));
  j["params"] = params;
  return j;
}

inline ConfigSpace space_from_json(const json& j) {
  HyperparameterDef root = param_def_from_json(j.at("algorithm_param"));
  std::vector<HyperparameterDef> params;
  for (const auto& p : j.at("params")) params.push_back(param_def_from_json(p));
  return ConfigSpace(std::move(root), std::move(params));
}

inline ConfigSpace load_space_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open space file '" + path + "'");
  json j;
  in >> j;
  return space_from_json(j);
}

inline json divbo_config_to_json(const DivBOConfig& cfg) {
  json j;
  j["budget"] = cfg.budget;
  j["init_random"] = cfg.init_random;
  j["n_global_candidates"] = cfg.n_global_candidates;
  j["n_local_candidates"] = cfg.n_local_candidates;
  j["beta"] = cfg.beta;
  j["tau"] = cfg.tau;
  j["ensemble_size"] = cfg.ensemble_size;
  j["n_div_samples"] = cfg.n_div_samples;
  j["seed"] = cfg.seed;
  j["perf_surrogate"] = {{"n_trees", cfg.perf_params.n_trees},
                         {"bootstrap", cfg.perf_params.bootstrap},
                         {"feature_fraction", cfg.perf_params.feature_fraction},
                         {"min_samples_leaf", cfg.perf_params.min_samples_leaf},
                         {"max_depth", cfg.perf_params.max_depth}};
  j["div_surrogate"] = {
      {"n_members", cfg.div_params.n_members},
      {"n_rounds", cfg.div_params.member.n_rounds},
      {"learning_rate", cfg.div_params.member.learning_rate},
      {"max_depth", cfg.div_params.member.max_depth},
      {"row_subsample", cfg.div_params.member.row_subsample},
      {"feature_subsample", cfg.div_params.member.feature_subsample},
      {"min_samples_leaf", cfg.div_params.member.min_samples_leaf}};
  j["diversity_sample_cap"] = cfg.diversity_sample_cap;
  return j;
}

}  // namespace divbo
