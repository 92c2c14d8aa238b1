#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <variant>
#include <vector>

#include "divbo/error.hpp"
#include "divbo/rng.hpp"

namespace divbo {

enum class ParamKind { Continuous, Integer, Categorical };

// Activation condition: the hyperparameter is active only while the parent
// categorical hyperparameter holds the given value. Parents must themselves
// be unconditioned (single-level conditioning only).
struct Condition {
  std::string parent;
  std::string value;
};

struct HyperparameterDef {
  std::string name;
  ParamKind kind = ParamKind::Continuous;
  double lo = 0.0;  // continuous bounds
  double hi = 0.0;
  bool log_scale = false;
  std::int64_t ilo = 0;  // integer bounds
  std::int64_t ihi = 0;
  std::vector<std::string> choices;  // categorical
  std::optional<Condition> condition;

  static HyperparameterDef real(std::string name, double lo, double hi,
                                bool log_scale = false) {
    HyperparameterDef d;
    d.name = std::move(name);
    d.kind = ParamKind::Continuous;
    d.lo = lo;
    d.hi = hi;
    d.log_scale = log_scale;
    return d;
  }

  static HyperparameterDef integer(std::string name, std::int64_t lo,
                                   std::int64_t hi) {
    HyperparameterDef d;
    d.name = std::move(name);
    d.kind = ParamKind::Integer;
    d.ilo = lo;
    d.ihi = hi;
    return d;
  }

  static HyperparameterDef categorical(std::string name,
                                       std::vector<std::string> choices) {
    HyperparameterDef d;
    d.name = std::move(name);
    d.kind = ParamKind::Categorical;
    d.choices = std::move(choices);
    return d;
  }

  HyperparameterDef conditioned_on(std::string parent, std::string value) const {
    HyperparameterDef d = *this;
    d.condition = Condition{std::move(parent), std::move(value)};
    return d;
  }

  // Number of encoding slots this hyperparameter owns.
  std::size_t encoding_width() const {
    return kind == ParamKind::Categorical ? choices.size() : 1;
  }
};

using ParamValue = std::variant<double, std::int64_t, std::string>;

// A complete assignment of the active hyperparameters for one algorithm
// choice. Ordered map so iteration (and serialization) is deterministic.
struct Configuration {
  std::map<std::string, ParamValue> assignments;

  const ParamValue& at(const std::string& name) const {
    auto it = assignments.find(name);
    if (it == assignments.end()) {
      throw ValidationError("configuration has no value for '" + name + "'");
    }
    return it->second;
  }

  bool has(const std::string& name) const {
    return assignments.count(name) > 0;
  }

  double real_at(const std::string& name) const {
    return std::get<double>(at(name));
  }
  std::int64_t int_at(const std::string& name) const {
    return std::get<std::int64_t>(at(name));
  }
  const std::string& str_at(const std::string& name) const {
    return std::get<std::string>(at(name));
  }

  bool operator==(const Configuration& other) const {
    return assignments == other.assignments;
  }
};

// Joint algorithm/hyperparameter search space. Immutable after construction;
// all sampling takes an explicit seed.
class ConfigSpace {
 public:
  ConfigSpace(HyperparameterDef algorithm_param,
              std::vector<HyperparameterDef> params)
      : root_(std::move(algorithm_param)), params_(std::move(params)) {
    validate_definition();
    layout_encoding();
  }

  const HyperparameterDef& algorithm_param() const { return root_; }
  const std::vector<HyperparameterDef>& params() const { return params_; }
  std::size_t encoding_dim() const { return encoding_dim_; }

  const std::string& algorithm_of(const Configuration& config) const {
    return config.str_at(root_.name);
  }

  // A hyperparameter is active when it has no condition or its parent holds
  // the required value in this configuration.
  bool is_active(const HyperparameterDef& def, const Configuration& config) const {
    if (!def.condition) return true;
    auto it = config.assignments.find(def.condition->parent);
    if (it == config.assignments.end()) return false;
    const auto* s = std::get_if<std::string>(&it->second);
    return s != nullptr && *s == def.condition->value;
  }

  void validate(const Configuration& config) const {
    auto it = config.assignments.find(root_.name);
    if (it == config.assignments.end()) {
      throw ValidationError("configuration missing algorithm selector '" +
                            root_.name + "'");
    }
    check_value(root_, it->second);
    std::size_t expected = 1;
    for (const auto& def : params_) {
      if (is_active(def, config)) {
        ++expected;
        auto pit = config.assignments.find(def.name);
        if (pit == config.assignments.end()) {
          throw ValidationError("active hyperparameter '" + def.name +
                                "' is unassigned");
        }
        check_value(def, pit->second);
      } else if (config.has(def.name)) {
        throw ValidationError("inactive hyperparameter '" + def.name +
                              "' is assigned");
      }
    }
    if (config.assignments.size() != expected) {
      throw ValidationError("configuration contains unknown hyperparameters");
    }
  }

  // Fixed-width numeric encoding: categorical one-hot, continuous/integer
  // min-max normalized to [0,1] (log scale where flagged), inactive
  // hyperparameters -1 in every slot they own.
  std::vector<double> encode(const Configuration& config) const {
    validate(config);
    std::vector<double> out(encoding_dim_, -1.0);
    encode_one(root_, config, out.data());
    std::size_t offset = root_.choices.size();
    for (const auto& def : params_) {
      if (is_active(def, config)) {
        encode_one(def, config, out.data() + offset);
      }
      offset += def.encoding_width();
    }
    return out;
  }

  Configuration sample_one(Rng& rng) const {
    Configuration config;
    const auto& algo = root_.choices[rng.index(root_.choices.size())];
    config.assignments[root_.name] = algo;
    for (const auto& def : params_) {
      if (is_active(def, config)) {
        config.assignments[def.name] = sample_value(def, rng);
      }
    }
    return config;
  }

  // One mutation step used by local search: copy the anchor and perturb a
  // single uniformly chosen active hyperparameter. Mutating the algorithm
  // selector resamples the newly active hyperparameters uniformly.
  Configuration mutate(const Configuration& anchor, Rng& rng) const {
    std::vector<const HyperparameterDef*> active;
    active.push_back(&root_);
    for (const auto& def : params_) {
      if (is_active(def, anchor)) active.push_back(&def);
    }
    const HyperparameterDef& target = *active[rng.index(active.size())];
    Configuration config = anchor;
    if (&target == &root_) {
      const auto& algo = root_.choices[rng.index(root_.choices.size())];
      config.assignments[root_.name] = algo;
      Configuration rebuilt;
      rebuilt.assignments[root_.name] = algo;
      for (const auto& def : params_) {
        if (!is_active(def, rebuilt)) continue;
        if (anchor.has(def.name) && is_active(def, anchor)) {
          rebuilt.assignments[def.name] = anchor.at(def.name);
        } else {
          rebuilt.assignments[def.name] = sample_value(def, rng);
        }
      }
      return rebuilt;
    }
    config.assignments[target.name] = perturb_value(target, anchor.at(target.name), rng);
    return config;
  }

 private:
  static constexpr double kLocalSigma = 0.2;  // in normalized [0,1] space

  void validate_definition() const {
    check_categorical_def(root_);
    if (root_.condition) {
      throw ValidationError("algorithm selector must be unconditioned");
    }
    std::set<std::string> names{root_.name};
    for (const auto& def : params_) {
      if (!names.insert(def.name).second) {
        throw ValidationError("duplicate hyperparameter name '" + def.name + "'");
      }
      switch (def.kind) {
        case ParamKind::Continuous:
          if (!(def.lo < def.hi)) {
            throw ValidationError("hyperparameter '" + def.name +
                                  "' requires lo < hi");
          }
          if (def.log_scale && !(def.lo > 0.0)) {
            throw ValidationError("log-scale hyperparameter '" + def.name +
                                  "' requires lo > 0");
          }
          break;
        case ParamKind::Integer:
          if (!(def.ilo < def.ihi)) {
            throw ValidationError("hyperparameter '" + def.name +
                                  "' requires lo < hi");
          }
          break;
        case ParamKind::Categorical:
          check_categorical_def(def);
          break;
      }
    }
    // Conditions may only reference unconditioned categorical parameters, so
    // the condition graph is a depth-one forest and trivially acyclic.
    for (const auto& def : params_) {
      if (!def.condition) continue;
      const HyperparameterDef* parent = nullptr;
      if (def.condition->parent == root_.name) {
        parent = &root_;
      } else {
        for (const auto& other : params_) {
          if (other.name == def.condition->parent) parent = &other;
        }
      }
      if (parent == nullptr) {
        throw ValidationError("condition on '" + def.name +
                              "' references unknown parent '" +
                              def.condition->parent + "'");
      }
      if (parent->kind != ParamKind::Categorical) {
        throw ValidationError("condition parent '" + parent->name +
                              "' must be categorical");
      }
      if (parent->condition) {
        throw ValidationError("nested condition via '" + parent->name +
                              "' is not supported");
      }
      if (std::find(parent->choices.begin(), parent->choices.end(),
                    def.condition->value) == parent->choices.end()) {
        throw ValidationError("condition value '" + def.condition->value +
                              "' is not a choice of '" + parent->name + "'");
      }
    }
  }

  static void check_categorical_def(const HyperparameterDef& def) {
    if (def.kind != ParamKind::Categorical) {
      throw ValidationError("'" + def.name + "' must be categorical");
    }
    if (def.choices.empty()) {
      throw ValidationError("categorical '" + def.name + "' has no choices");
    }
    std::set<std::string> unique(def.choices.begin(), def.choices.end());
    if (unique.size() != def.choices.size()) {
      throw ValidationError("categorical '" + def.name +
                            "' has duplicate choices");
    }
  }

  void layout_encoding() {
    encoding_dim_ = root_.choices.size();
    for (const auto& def : params_) encoding_dim_ += def.encoding_width();
  }

  void check_value(const HyperparameterDef& def, const ParamValue& value) const {
    switch (def.kind) {
      case ParamKind::Continuous: {
        const auto* v = std::get_if<double>(&value);
        if (v == nullptr || !std::isfinite(*v) || *v < def.lo || *v > def.hi) {
          throw ValidationError("value for '" + def.name + "' out of bounds");
        }
        break;
      }
      case ParamKind::Integer: {
        const auto* v = std::get_if<std::int64_t>(&value);
        if (v == nullptr || *v < def.ilo || *v > def.ihi) {
          throw ValidationError("value for '" + def.name + "' out of bounds");
        }
        break;
      }
      case ParamKind::Categorical: {
        const auto* v = std::get_if<std::string>(&value);
        if (v == nullptr || std::find(def.choices.begin(), def.choices.end(),
                                      *v) == def.choices.end()) {
          throw ValidationError("value for '" + def.name +
                                "' is not a valid choice");
        }
        break;
      }
    }
  }

  void encode_one(const HyperparameterDef& def, const Configuration& config,
                  double* slots) const {
    switch (def.kind) {
      case ParamKind::Categorical: {
        const auto& v = config.str_at(def.name);
        for (std::size_t i = 0; i < def.choices.size(); ++i) {
          slots[i] = def.choices[i] == v ? 1.0 : 0.0;
        }
        break;
      }
      case ParamKind::Continuous:
        slots[0] = normalize(def, config.real_at(def.name));
        break;
      case ParamKind::Integer:
        slots[0] = normalize(def, static_cast<double>(config.int_at(def.name)));
        break;
    }
  }

  ParamValue sample_value(const HyperparameterDef& def, Rng& rng) const {
    switch (def.kind) {
      case ParamKind::Categorical:
        return def.choices[rng.index(def.choices.size())];
      case ParamKind::Integer:
        return rng.uniform_int(def.ilo, def.ihi);
      case ParamKind::Continuous:
      default:
        if (def.log_scale) {
          return std::exp(rng.uniform(std::log(def.lo), std::log(def.hi)));
        }
        return rng.uniform(def.lo, def.hi);
    }
  }

  ParamValue perturb_value(const HyperparameterDef& def, const ParamValue& value,
                           Rng& rng) const {
    if (def.kind == ParamKind::Categorical) {
      return def.choices[rng.index(def.choices.size())];
    }
    const double current = def.kind == ParamKind::Integer
                               ? static_cast<double>(std::get<std::int64_t>(value))
                               : std::get<double>(value);
    double u = normalize(def, current) + kLocalSigma * rng.normal();
    u = std::clamp(u, 0.0, 1.0);
    return denormalize(def, u);
  }

 public:
  double normalize(const HyperparameterDef& def, double value) const {
    if (def.kind == ParamKind::Integer) {
      return (value - static_cast<double>(def.ilo)) /
             static_cast<double>(def.ihi - def.ilo);
    }
    if (def.log_scale) {
      return (std::log(value) - std::log(def.lo)) /
             (std::log(def.hi) - std::log(def.lo));
    }
    return (value - def.lo) / (def.hi - def.lo);
  }

  ParamValue denormalize(const HyperparameterDef& def, double u) const {
    if (def.kind == ParamKind::Integer) {
      const double raw = static_cast<double>(def.ilo) +
                         u * static_cast<double>(def.ihi - def.ilo);
      const auto v = static_cast<std::int64_t>(std::llround(raw));
      return std::clamp(v, def.ilo, def.ihi);
    }
    double v;
    if (def.log_scale) {
      v = std::exp(std::log(def.lo) + u * (std::log(def.hi) - std::log(def.lo)));
    } else {
      v = def.lo + u * (def.hi - def.lo);
    }
    return std::clamp(v, def.lo, def.hi);
  }

 private:
  HyperparameterDef root_;
  std::vector<HyperparameterDef> params_;
  std::size_t encoding_dim_ = 0;
};

// n configurations drawn independently: algorithm uniform over choices, then
// each active hyperparameter uniform on its (log-)scale.
inline std::vector<Configuration> sample_uniform(const ConfigSpace& space,
                                                 std::size_t n,
                                                 std::uint64_t seed) {
  if (n < 1) throw ValidationError("sample_uniform requires n >= 1");
  Rng rng(seed);
  std::vector<Configuration> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) out.push_back(space.sample_one(rng));
  return out;
}

// Neighbors of the best observed configurations: round-robin over the top-10
// anchors by performance (lower is better), one mutated hyperparameter each.
inline std::vector<Configuration> sample_local(
    const ConfigSpace& space,
    const std::vector<std::pair<Configuration, double>>& anchors, std::size_t n,
    std::uint64_t seed) {
  if (anchors.empty()) throw ValidationError("sample_local requires anchors");
  std::vector<std::size_t> order(anchors.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return anchors[a].second < anchors[b].second;
  });
  const std::size_t n_top = std::min<std::size_t>(10, order.size());
  Rng rng(seed);
  std::vector<Configuration> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& anchor = anchors[order[i % n_top]].first;
    out.push_back(space.mutate(anchor, rng));
  }
  return out;
}

}  // namespace divbo
