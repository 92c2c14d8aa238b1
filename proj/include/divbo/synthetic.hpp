#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "divbo/config_space.hpp"
#include "divbo/ensemble.hpp"
#include "divbo/learners.hpp"
#include "divbo/problem.hpp"
#include "divbo/rng.hpp"

namespace divbo {

// Deterministic black-box CASH stand-in over the built-in space.
//
// Each configuration maps to a class-probability response over a fixed
// pseudo-validation set built from two ingredients:
//   - a "skill" coordinate q(config): a rugged multi-frequency function of
//     the normalized hyperparameters that controls how strongly the response
//     aligns with the label pattern (and therefore the validation error);
//   - a per-algorithm "competence mask" over samples: each algorithm gets the
//     label pattern right only on its own region of the sample space, so good
//     learners from different algorithms err on complementary samples;
//   - a "style" pattern R(config, sample): smooth in the hyperparameters and
//     strongly algorithm-dependent, deciding the response where competence is
//     low.
// Skill ruggedness makes the error hard to regress from a few hundred single
// observations, while pairwise diversity keeps broad algorithm/skill/mask
// structure, mirroring the sample-count asymmetry between the two surrogate
// learning problems. Evaluation is pure arithmetic and bit-reproducible.
class SyntheticProblem : public Problem {
 public:
  explicit SyntheticProblem(std::uint64_t seed, std::size_t n_val = 200)
      : seed_(seed), space_(builtin_space()) {
    Rng rng(derive_seed(seed, 0xd1f));
    z_.resize(n_val);
    for (auto& z : z_) z = rng.uniform();
    labels_.resize(n_val);
    for (std::size_t s = 0; s < n_val; ++s) {
      const bool base = label_pattern(z_[s]) > 0.0;
      const bool flip = rng.uniform() < 0.10;
      labels_[s] = static_cast<std::size_t>(base != flip);
    }

    const auto& algos = space_.algorithm_param().choices;
    banks_.resize(algos.size());
    for (std::size_t a = 0; a < algos.size(); ++a) {
      Rng bank_rng(derive_seed(seed, 0xa160, a));
      AlgoBank& bank = banks_[a];
      bank.skill_offset = bank_rng.uniform(-0.12, 0.12);
      bank.bias = bank_rng.uniform(-0.2, 0.2);
      bank.mask_freq = bank_rng.uniform(0.8, 2.2);
      bank.mask_phase = bank_rng.uniform();
      for (int k = 0; k < 3; ++k) {
        StyleTerm style;
        style.z_freq = bank_rng.uniform(0.6, 3.2);
        style.phase = bank_rng.uniform();
        style.weight = bank_rng.uniform(0.4, 1.0);
        bank.style.push_back(style);
      }
      std::size_t n_params = 0;
      for (const auto& def : space_.params()) {
        if (def.condition && def.condition->value == algos[a]) ++n_params;
      }
      // Fewer hyperparameters get higher frequencies so every algorithm's
      // skill landscape stays unresolvable from a few dozen observations.
      const double freq_scale = std::sqrt(3.0 / static_cast<double>(n_params));
      for (const auto& def : space_.params()) {
        if (!def.condition || def.condition->value != algos[a]) continue;
        ParamTerm term;
        term.name = def.name;
        term.skill_freq = freq_scale * bank_rng.uniform(3.5, 7.0);
        term.pair_freq = freq_scale * bank_rng.uniform(3.5, 7.0);
        term.skill_phase = bank_rng.uniform();
        term.skill_weight = bank_rng.uniform(0.5, 1.0);
        term.style_gain = bank_rng.uniform(0.4, 1.2);
        term.style_index = bank.terms.size() % bank.style.size();
        bank.terms.push_back(std::move(term));
      }
      double total = 0.0;
      for (const auto& t : bank.terms) total += t.skill_weight;
      for (auto& t : bank.terms) t.skill_weight /= total;
    }
  }

  const ConfigSpace& space() const override { return space_; }
  std::size_t n_classes() const override { return 2; }
  const std::vector<std::size_t>& val_labels() const override { return labels_; }
  std::string name() const override {
    return "synthetic-" + std::to_string(seed_);
  }

  EvalOutcome evaluate(const Configuration& config,
                       std::uint64_t /*seed*/) const override {
    EvalOutcome out;
    out.val_predictions = predict(config);
    out.val_error = classification_error(out.val_predictions, labels_);
    out.status = EvalStatus::Ok;
    return out;
  }

  // Bound on matrix-diversity change per unit change of one normalized
  // hyperparameter (sigmoid slope 1/4 times the worst logit derivative).
  double lipschitz_bound() const {
    double worst = 0.0;
    for (const auto& bank : banks_) {
      double style_norm = 0.0;
      for (const auto& s : bank.style) style_norm += s.weight;
      for (std::size_t j = 0; j < bank.terms.size(); ++j) {
        // d logit/du = A * (dq/du * (L - R) + (1 - q) * dR/du); |L - R| <= 2.
        const auto& t = bank.terms[j];
        const auto& prev =
            bank.terms[(j + bank.terms.size() - 1) % bank.terms.size()];
        const double dq =
            kSkillSpan * 2.0 * kPi *
            (t.skill_weight * t.skill_freq + prev.skill_weight * prev.pair_freq);
        const double dr =
            bank.style[t.style_index].weight / style_norm * 2.0 * kPi *
            t.style_gain;
        worst = std::max(worst, kAmplitude * (2.0 * dq + dr));
      }
    }
    return 0.25 * worst;
  }

  PredictionMatrix predict(const Configuration& config) const {
    space_.validate(config);
    const auto& algos = space_.algorithm_param().choices;
    const std::string& algo = space_.algorithm_of(config);
    std::size_t a = 0;
    while (algos[a] != algo) ++a;
    const AlgoBank& bank = banks_[a];

    std::vector<double> u(bank.terms.size(), 0.0);
    for (std::size_t j = 0; j < bank.terms.size(); ++j) {
      for (const auto& def : space_.params()) {
        if (def.name != bank.terms[j].name) continue;
        if (def.kind == ParamKind::Categorical) {
          const auto& v = config.str_at(def.name);
          std::size_t idx = 0;
          while (def.choices[idx] != v) ++idx;
          u[j] = def.choices.size() > 1
                     ? static_cast<double>(idx) /
                           static_cast<double>(def.choices.size() - 1)
                     : 0.0;
        } else if (def.kind == ParamKind::Integer) {
          u[j] = space_.normalize(def,
                                  static_cast<double>(config.int_at(def.name)));
        } else {
          u[j] = space_.normalize(def, config.real_at(def.name));
        }
      }
    }

    // Rugged skill in [0.5 - span, 0.5 + span] plus the algorithm offset.
    // Terms couple neighbouring hyperparameters so the landscape is not
    // additive in any single coordinate.
    double mix = bank.skill_offset;
    for (std::size_t j = 0; j < bank.terms.size(); ++j) {
      const auto& t = bank.terms[j];
      const double partner = u[(j + 1) % u.size()];
      mix += t.skill_weight *
             std::sin(2.0 * kPi * (t.skill_freq * u[j] +
                                   t.pair_freq * partner + t.skill_phase));
    }
    const double q =
        0.5 + kSkillSpan * std::clamp(mix, -1.0, 1.0);

    double style_norm = 0.0;
    for (const auto& s : bank.style) style_norm += s.weight;

    PredictionMatrix m(z_.size(), 2);
    for (std::size_t s = 0; s < z_.size(); ++s) {
      double style = 0.0;
      for (std::size_t k = 0; k < bank.style.size(); ++k) {
        double phase_shift = 0.0;
        for (std::size_t j = 0; j < bank.terms.size(); ++j) {
          if (bank.terms[j].style_index == k) {
            phase_shift += bank.terms[j].style_gain * u[j];
          }
        }
        const auto& st = bank.style[k];
        style += st.weight *
                 std::sin(2.0 * kPi * (st.z_freq * z_[s] + phase_shift +
                                       st.phase));
      }
      style /= style_norm;
      const double mask =
          kMaskFloor +
          (1.0 - kMaskFloor) * 0.5 *
              (1.0 + std::sin(2.0 * kPi *
                              (bank.mask_freq * z_[s] + bank.mask_phase)));
      const double aligned = q * mask;
      const double logit =
          kAmplitude * (aligned * label_pattern(z_[s]) +
                        (1.0 - aligned) * style + 0.1 * bank.bias);
      const double p1 = 1.0 / (1.0 + std::exp(-logit));
      m.at(s, 0) = static_cast<float>(1.0 - p1);
      m.at(s, 1) = static_cast<float>(p1);
    }
    return m;
  }

 private:
  struct StyleTerm {
    double z_freq = 1.0;
    double phase = 0.0;
    double weight = 1.0;
  };
  struct ParamTerm {
    std::string name;
    double skill_freq = 3.0;
    double pair_freq = 3.0;
    double skill_phase = 0.0;
    double skill_weight = 1.0;
    double style_gain = 1.0;
    std::size_t style_index = 0;
  };
  struct AlgoBank {
    double skill_offset = 0.0;
    double bias = 0.0;
    double mask_freq = 1.0;
    double mask_phase = 0.0;
    std::vector<StyleTerm> style;
    std::vector<ParamTerm> terms;
  };

  static double label_pattern(double z) {
    return std::sin(2.0 * kPi * (1.5 * z + 0.12));
  }

  static constexpr double kPi = 3.14159265358979323846;
  static constexpr double kAmplitude = 3.0;
  static constexpr double kSkillSpan = 0.48;
  static constexpr double kMaskFloor = 0.08;

  std::uint64_t seed_;
  ConfigSpace space_;
  std::vector<double> z_;
  std::vector<std::size_t> labels_;
  std::vector<AlgoBank> banks_;
};

inline std::pair<PredictionMatrix, double> synthetic_eval(
    const SyntheticProblem& problem, const Configuration& config) {
  EvalOutcome out = problem.evaluate(config, 0);
  return {std::move(out.val_predictions), out.val_error};
}

}  // namespace divbo
