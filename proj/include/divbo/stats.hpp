#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "divbo/error.hpp"

namespace divbo {

inline double normal_pdf(double z) {
  return std::exp(-0.5 * z * z) / std::sqrt(2.0 * 3.14159265358979323846);
}

inline double normal_cdf(double z) {
  return 0.5 * std::erfc(-z / std::sqrt(2.0));
}

// Kendall tau-b (tie-corrected). Returns nullopt when either input is fully
// tied (the coefficient is undefined there).
inline std::optional<double> kendall_tau(const std::vector<double>& a,
                                         const std::vector<double>& b) {
  if (a.size() != b.size()) throw ValidationError("kendall_tau length mismatch");
  const std::size_t n = a.size();
  if (n < 2) throw ValidationError("kendall_tau needs at least 2 values");
  for (std::size_t i = 0; i < n; ++i) {
    if (!std::isfinite(a[i]) || !std::isfinite(b[i])) {
      throw ValidationError("kendall_tau requires finite values");
    }
  }
  std::int64_t concordant = 0;
  std::int64_t discordant = 0;
  std::int64_t ties_a = 0;
  std::int64_t ties_b = 0;
  for (std::size_t i = 0; i + 1 < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const double da = a[i] - a[j];
      const double db = b[i] - b[j];
      if (da == 0.0 && db == 0.0) {
        ++ties_a;
        ++ties_b;
      } else if (da == 0.0) {
        ++ties_a;
      } else if (db == 0.0) {
        ++ties_b;
      } else if ((da > 0.0) == (db > 0.0)) {
        ++concordant;
      } else {
        ++discordant;
      }
    }
  }
  const auto n0 = static_cast<std::int64_t>(n) * (static_cast<std::int64_t>(n) - 1) / 2;
  const double denom = std::sqrt(static_cast<double>(n0 - ties_a) *
                                 static_cast<double>(n0 - ties_b));
  if (denom == 0.0) return std::nullopt;
  return std::clamp(static_cast<double>(concordant - discordant) / denom, -1.0,
                    1.0);
}

enum class Verdict { Better, Same, Worse, InsufficientData };

inline std::string to_string(Verdict v) {
  switch (v) {
    case Verdict::Better: return "better";
    case Verdict::Same: return "same";
    case Verdict::Worse: return "worse";
    case Verdict::InsufficientData: return "insufficient_data";
  }
  return "unknown";
}

struct WilcoxonResult {
  double statistic = 0.0;  // W+ over the differences a - b
  double p_value = 1.0;
  Verdict verdict = Verdict::InsufficientData;
  std::size_t n_nonzero = 0;
};

namespace detail {

// Exact two-sided p-value for W+ under the sign-flip null, conditioned on the
// observed (midrank) rank multiset. Ranks are doubled so midranks stay
// integral; the distribution is built by dynamic programming.
inline double wilcoxon_exact_p(const std::vector<double>& ranks, double w_plus) {
  std::int64_t max_sum = 0;
  std::vector<std::int64_t> scaled;
  scaled.reserve(ranks.size());
  for (const double r : ranks) {
    scaled.push_back(static_cast<std::int64_t>(std::llround(2.0 * r)));
    max_sum += scaled.back();
  }
  std::vector<double> count(max_sum + 1, 0.0);
  count[0] = 1.0;
  for (const std::int64_t r : scaled) {
    for (std::int64_t s = max_sum; s >= r; --s) count[s] += count[s - r];
  }
  const double total = std::pow(2.0, static_cast<double>(ranks.size()));
  const auto w2 = static_cast<std::int64_t>(std::llround(2.0 * w_plus));
  double le = 0.0;
  double ge = 0.0;
  for (std::int64_t s = 0; s <= max_sum; ++s) {
    if (s <= w2) le += count[s];
    if (s >= w2) ge += count[s];
  }
  return std::min(1.0, 2.0 * std::min(le, ge) / total);
}

}  // namespace detail

// Two-sided Wilcoxon signed-rank test on paired samples. Small samples
// (n <= 25 nonzero differences) use the exact sign-flip distribution;
// larger samples use the normal approximation with midranks, tie and
// continuity corrections. Values are scores where lower is better (errors):
// verdict "better" means a is significantly lower than b. Fewer than 6
// nonzero differences yields InsufficientData.
inline WilcoxonResult wilcoxon_signed_rank(const std::vector<double>& a,
                                           const std::vector<double>& b,
                                           double alpha = 0.05) {
  if (a.size() != b.size()) throw ValidationError("wilcoxon length mismatch");
  std::vector<double> diffs;
  diffs.reserve(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    if (!std::isfinite(d)) throw ValidationError("wilcoxon requires finite values");
    if (d != 0.0) diffs.push_back(d);
  }
  WilcoxonResult result;
  result.n_nonzero = diffs.size();
  if (diffs.size() < 6) return result;

  const std::size_t n = diffs.size();
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) {
    return std::abs(diffs[x]) < std::abs(diffs[y]);
  });

  // Midranks over |d| with tie correction term.
  std::vector<double> rank(n, 0.0);
  double tie_term = 0.0;
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n &&
           std::abs(diffs[order[j + 1]]) == std::abs(diffs[order[i]])) {
      ++j;
    }
    const double mid = 0.5 * static_cast<double>(i + j + 2);  // 1-based
    for (std::size_t k = i; k <= j; ++k) rank[order[k]] = mid;
    const double t = static_cast<double>(j - i + 1);
    tie_term += t * t * t - t;
    i = j + 1;
  }

  double w_plus = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    if (diffs[k] > 0.0) w_plus += rank[k];
  }
  result.statistic = w_plus;

  if (n <= 25) {
    result.p_value = detail::wilcoxon_exact_p(rank, w_plus);
  } else {
    const double nd = static_cast<double>(n);
    const double mean = nd * (nd + 1.0) / 4.0;
    const double var =
        nd * (nd + 1.0) * (2.0 * nd + 1.0) / 24.0 - tie_term / 48.0;
    if (var <= 0.0) return result;
    const double numer = std::max(0.0, std::abs(w_plus - mean) - 0.5);
    const double z = numer / std::sqrt(var);
    result.p_value = std::min(1.0, 2.0 * (1.0 - normal_cdf(z)));
  }

  double mean_diff = 0.0;
  for (const double d : diffs) mean_diff += d;
  mean_diff /= static_cast<double>(n);
  if (result.p_value <= alpha && mean_diff < 0.0) {
    result.verdict = Verdict::Better;
  } else if (result.p_value <= alpha && mean_diff > 0.0) {
    result.verdict = Verdict::Worse;
  } else {
    result.verdict = Verdict::Same;
  }
  return result;
}

}  // namespace divbo
