#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <map>
#include <numeric>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "oodselect/error.hpp"
#include "oodselect/parallel.hpp"
#include "oodselect/probit.hpp"
#include "oodselect/rng.hpp"

namespace oodselect {

enum class CorrelationKind { pearson, spearman };
enum class Regime { AoTL, weak, AoTIL };

inline constexpr double kRegimeThreshold = 0.3;

constexpr std::string_view to_string(CorrelationKind k) { return k == CorrelationKind::pearson ? "pearson" : "spearman"; }

inline CorrelationKind parse_correlation_kind(std::string_view s) {
  if (s == "pearson") return CorrelationKind::pearson;
  if (s == "spearman") return CorrelationKind::spearman;
  fail(ErrorKind::InvalidConfig, "unknown metric '" + std::string(s) + "'");
}

constexpr std::string_view to_string(Regime r) {
  switch (r) {
    case Regime::AoTL: return "AoTL";
    case Regime::weak: return "weak";
    case Regime::AoTIL: return "AoTIL";
  }
  return "weak";
}

constexpr Regime classify_regime(double r) {
  if (r > kRegimeThreshold) return Regime::AoTL;
  if (r < -kRegimeThreshold) return Regime::AoTIL;
  return Regime::weak;
}

struct CorrelationReport {
  double r = 0.0;
  std::size_t n = 0;
  double ci_low = 0.0;
  double ci_high = 0.0;
  CorrelationKind kind = CorrelationKind::pearson;
  Regime regime = Regime::weak;
};

struct LineFit {
  double a = 0.0;  ///< slope
  double b = 0.0;  ///< intercept
  double eps_max = 0.0;
};

namespace detail {

inline double mean(std::span<const double> x) {
  return std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
}

inline void check_pair(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) fail(ErrorKind::DimensionMismatch, "correlation inputs differ in length");
  if (x.size() < 3) fail(ErrorKind::TooFewModels, "correlation needs at least 3 points");
}

}  // namespace detail

/// Sample Pearson correlation; both inputs are mean-centered first.
inline double pearson(std::span<const double> x, std::span<const double> y) {
  detail::check_pair(x, y);
  const double mx = detail::mean(x);
  const double my = detail::mean(y);
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = x[i] - mx;
    const double dy = y[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (!(sxx > 0.0) || !(syy > 0.0)) fail(ErrorKind::DegenerateVariance, "zero variance in correlation input");
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

/// 1-based ranks; tied values share their mean rank.
inline std::vector<double> average_ranks(std::span<const double> x) {
  std::vector<std::size_t> order(x.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return x[a] < x[b]; });
  std::vector<double> ranks(x.size());
  for (std::size_t k = 0; k < order.size();) {
    std::size_t end = k + 1;
    while (end < order.size() && x[order[end]] == x[order[k]]) ++end;
    const double rank = 0.5 * static_cast<double>(k + 1 + end);
    for (std::size_t t = k; t < end; ++t) ranks[order[t]] = rank;
    k = end;
  }
  return ranks;
}

inline double spearman(std::span<const double> x, std::span<const double> y) {
  detail::check_pair(x, y);
  const auto rx = average_ranks(x);
  const auto ry = average_ranks(y);
  return pearson(rx, ry);
}

inline double correlation(CorrelationKind kind, std::span<const double> x, std::span<const double> y) {
  return kind == CorrelationKind::pearson ? pearson(x, y) : spearman(x, y);
}

struct Interval {
  double low = 0.0;
  double high = 0.0;
};

/// Fisher z-interval: tanh(atanh(r) -/+ z_crit / sqrt(n - 3)).
inline Interval fisher_interval(double r, std::size_t n, double confidence = 0.95) {
  if (n < 4) fail(ErrorKind::TooFewModels, "Fisher interval needs n >= 4");
  if (!(std::abs(r) < 1.0)) fail(ErrorKind::DegenerateCorrelation, "Fisher interval undefined at |r| = 1");
  if (!(confidence > 0.0 && confidence < 1.0)) fail(ErrorKind::InvalidArgument, "confidence must lie in (0,1)");
  const double z = std::atanh(r);
  const double half = inverse_normal_cdf(0.5 + 0.5 * confidence) / std::sqrt(static_cast<double>(n) - 3.0);
  return {std::tanh(z - half), std::tanh(z + half)};
}

/// Correlation with Fisher interval and regime label. At |r| = 1 the
/// interval collapses onto r.
inline CorrelationReport correlation_report(std::span<const double> x, std::span<const double> y,
                                            CorrelationKind kind = CorrelationKind::pearson,
                                            double confidence = 0.95) {
  CorrelationReport rep;
  rep.kind = kind;
  rep.r = correlation(kind, x, y);
  rep.n = x.size();
  rep.regime = classify_regime(rep.r);
  if (rep.n >= 4 && std::abs(rep.r) < 1.0) {
    const auto ci = fisher_interval(rep.r, rep.n, confidence);
    rep.ci_low = ci.low;
    rep.ci_high = ci.high;
  } else {
    rep.ci_low = rep.ci_high = rep.r;
  }
  return rep;
}

/// Least-squares fit x ~ a*y + b with the largest absolute residual.
inline LineFit fit_correlation_line(std::span<const double> x_probit, std::span<const double> y_probit) {
  detail::check_pair(x_probit, y_probit);
  const double mx = detail::mean(x_probit);
  const double my = detail::mean(y_probit);
  double sxy = 0.0, syy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < x_probit.size(); ++i) {
    sxy += (x_probit[i] - mx) * (y_probit[i] - my);
    syy += (y_probit[i] - my) * (y_probit[i] - my);
    sxx += (x_probit[i] - mx) * (x_probit[i] - mx);
  }
  if (!(syy > 0.0) || !(sxx > 0.0)) fail(ErrorKind::DegenerateVariance, "zero variance in line-fit input");
  LineFit fit;
  fit.a = sxy / syy;
  fit.b = mx - fit.a * my;
  for (std::size_t i = 0; i < x_probit.size(); ++i)
    fit.eps_max = std::max(fit.eps_max, std::abs(x_probit[i] - (fit.a * y_probit[i] + fit.b)));
  return fit;
}

/// |a ∩ b| / |a ∪ b| over sorted, duplicate-free ranges.
template <typename T>
double jaccard(std::span<const T> a, std::span<const T> b) {
  if (a.empty() && b.empty()) fail(ErrorKind::EmptySets, "Jaccard index of two empty sets");
  std::size_t inter = 0;
  auto ia = a.begin();
  auto ib = b.begin();
  while (ia != a.end() && ib != b.end()) {
    if (*ia < *ib) {
      ++ia;
    } else if (*ib < *ia) {
      ++ib;
    } else {
      ++inter;
      ++ia;
      ++ib;
    }
  }
  const std::size_t uni = a.size() + b.size() - inter;
  return static_cast<double>(inter) / static_cast<double>(uni);
}

template <typename T>
double jaccard(const std::vector<T>& a, const std::vector<T>& b) {
  return jaccard(std::span<const T>(a), std::span<const T>(b));
}

struct NormalizedJaccard {
  double value = 0.0;  ///< (J - J_min) / (J_max - J_min), clamped to [0,1]
  double mean = 0.0;   ///< mean consecutive Jaccard of the input sequence
  double j_min = 0.0;  ///< random-selection reference
  double j_max = 0.0;  ///< nested-selection reference
};

namespace detail {

inline double mean_consecutive_jaccard(const std::vector<std::vector<std::size_t>>& seq) {
  double sum = 0.0;
  for (std::size_t k = 0; k + 1 < seq.size(); ++k) sum += jaccard(seq[k], seq[k + 1]);
  return sum / static_cast<double>(seq.size() - 1);
}

inline std::vector<std::size_t> random_subset_indices(std::size_t universe, std::size_t size, Rng& rng) {
  // Floyd's algorithm: uniform size-`size` subset of [0, universe).
  std::vector<std::size_t> out;
  out.reserve(size);
  std::vector<bool> taken(universe, false);
  for (std::size_t j = universe - size; j < universe; ++j) {
    std::uniform_int_distribution<std::size_t> pick(0, j);
    std::size_t t = pick(rng);
    if (taken[t]) t = j;
    taken[t] = true;
    out.push_back(t);
  }
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace detail

/// Consistency of a sequence of subsets of [0, universe) with strictly
/// increasing sizes, rescaled between random and nested references.
inline NormalizedJaccard normalized_jaccard_sequence(std::vector<std::vector<std::size_t>> subsets,
                                                     std::size_t universe, std::size_t random_trials = 200,
                                                     std::uint64_t seed = 0, std::size_t jobs = 1) {
  if (subsets.size() < 2) fail(ErrorKind::InvalidArgument, "need at least two subsets");
  for (auto& s : subsets) {
    std::sort(s.begin(), s.end());
    if (std::adjacent_find(s.begin(), s.end()) != s.end()) fail(ErrorKind::InvalidArgument, "duplicate ids in subset");
    if (!s.empty() && s.back() >= universe) fail(ErrorKind::InvalidArgument, "subset id outside universe");
  }
  for (std::size_t k = 0; k + 1 < subsets.size(); ++k)
    if (subsets[k].size() >= subsets[k + 1].size())
      fail(ErrorKind::InvalidArgument, "subset sizes must be strictly increasing");
  if (random_trials == 0) fail(ErrorKind::InvalidArgument, "random_trials must be positive");

  NormalizedJaccard out;
  out.mean = detail::mean_consecutive_jaccard(subsets);

  // Nested reference: consecutive overlap is exactly S_k / S_{k+1}.
  double max_sum = 0.0;
  for (std::size_t k = 0; k + 1 < subsets.size(); ++k)
    max_sum += static_cast<double>(subsets[k].size()) / static_cast<double>(subsets[k + 1].size());
  out.j_max = max_sum / static_cast<double>(subsets.size() - 1);

  const auto trials = parallel_map(random_trials, jobs, [&](std::size_t t) {
    auto rng = substream(seed, "jaccard/" + std::to_string(t));
    std::vector<std::vector<std::size_t>> seq;
    seq.reserve(subsets.size());
    for (const auto& s : subsets) seq.push_back(detail::random_subset_indices(universe, s.size(), rng));
    return detail::mean_consecutive_jaccard(seq);
  });
  out.j_min = std::accumulate(trials.begin(), trials.end(), 0.0) / static_cast<double>(random_trials);

  if (!(out.j_max > out.j_min)) fail(ErrorKind::NormalizationDegenerate, "nested reference does not exceed random");
  out.value = std::clamp((out.mean - out.j_min) / (out.j_max - out.j_min), 0.0, 1.0);
  return out;
}

struct PrevalenceShift {
  std::string category;
  double subset_prevalence = 0.0;
  double full_prevalence = 0.0;
  double delta = 0.0;
  Interval ci;
  double p = 1.0;
};

namespace detail {

/// Linear-interpolation quantile of sorted data.
inline double quantile_sorted(std::span<const double> sorted, double q) {
  const double pos = q * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (pos - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

}  // namespace detail

/// Bootstrap test of prevalence differences between a subset and the full
/// pool, per category. The subset is resampled with replacement at its own size.
inline std::vector<PrevalenceShift> bootstrap_prevalence_shift(const std::vector<std::string>& subset_values,
                                                               const std::vector<std::string>& full_values,
                                                               std::size_t n_resamples = 1000,
                                                               std::uint64_t seed = 0, double confidence = 0.95,
                                                               std::size_t jobs = 1) {
  if (subset_values.empty()) fail(ErrorKind::DegenerateSelection, "empty subset");
  if (full_values.empty()) fail(ErrorKind::InvalidArgument, "empty reference pool");
  if (n_resamples < 100) fail(ErrorKind::InvalidArgument, "n_resamples must be at least 100");

  std::map<std::string, std::size_t> index;
  for (const auto& v : full_values) index.emplace(v, 0);
  for (const auto& v : subset_values) index.emplace(v, 0);
  std::size_t c = 0;
  for (auto& [_, k] : index) k = c++;
  const std::size_t n_cat = index.size();

  std::vector<std::size_t> subset_codes;
  subset_codes.reserve(subset_values.size());
  for (const auto& v : subset_values) subset_codes.push_back(index.at(v));
  std::vector<double> full_prev(n_cat, 0.0), subset_prev(n_cat, 0.0);
  for (const auto& v : full_values) full_prev[index.at(v)] += 1.0;
  for (auto code : subset_codes) subset_prev[code] += 1.0;
  for (auto& p : full_prev) p /= static_cast<double>(full_values.size());
  for (auto& p : subset_prev) p /= static_cast<double>(subset_values.size());

  const std::size_t m = subset_codes.size();
  const auto resampled = parallel_map(n_resamples, jobs, [&](std::size_t b) {
    auto rng = substream(seed, "boot/" + std::to_string(b));
    std::uniform_int_distribution<std::size_t> pick(0, m - 1);
    std::vector<double> counts(n_cat, 0.0);
    for (std::size_t t = 0; t < m; ++t) counts[subset_codes[pick(rng)]] += 1.0;
    for (std::size_t k = 0; k < n_cat; ++k) counts[k] = counts[k] / static_cast<double>(m) - full_prev[k];
    return counts;
  });

  std::vector<PrevalenceShift> out;
  const double alpha = 1.0 - confidence;
  std::vector<double> deltas(n_resamples);
  for (const auto& [name, k] : index) {
    for (std::size_t b = 0; b < n_resamples; ++b) deltas[b] = resampled[b][k];
    std::sort(deltas.begin(), deltas.end());
    PrevalenceShift s;
    s.category = name;
    s.subset_prevalence = subset_prev[k];
    s.full_prevalence = full_prev[k];
    s.delta = subset_prev[k] - full_prev[k];
    s.ci = {detail::quantile_sorted(deltas, alpha / 2), detail::quantile_sorted(deltas, 1.0 - alpha / 2)};
    const double le = static_cast<double>(std::upper_bound(deltas.begin(), deltas.end(), 0.0) - deltas.begin());
    const double ge = static_cast<double>(deltas.end() - std::lower_bound(deltas.begin(), deltas.end(), 0.0));
    const double nb = static_cast<double>(n_resamples);
    s.p = std::min(2.0 * std::min(le / nb, ge / nb), 1.0);
    out.push_back(std::move(s));
  }
  return out;
}

struct StabilityResult {
  std::size_t n = 0;              ///< median over orderings of the stable model count
  bool converged = true;          ///< false when the median ordering never met the criterion
  std::size_t non_converged = 0;  ///< orderings that never met the criterion
  std::vector<std::size_t> per_ordering;
};

/// Smallest model count after which adding models changes the probit
/// correlation by less than `rel_threshold` (relative, floored at 0.05) for
/// `window` consecutive additions; median over random model orderings.
inline StabilityResult model_count_stability(std::span<const double> id_acc, std::span<const double> ood_acc,
                                             double rel_threshold = 0.01, std::size_t n_orderings = 32,
                                             std::size_t window = 25, std::uint64_t seed = 0,
                                             double clip_eps = kDefaultClipEps, std::size_t jobs = 1) {
  if (id_acc.size() != ood_acc.size()) fail(ErrorKind::DimensionMismatch, "accuracy vectors differ in length");
  const std::size_t total = id_acc.size();
  if (total < window + 4) fail(ErrorKind::TooFewModels, "need at least window + 4 models");
  if (n_orderings == 0) fail(ErrorKind::InvalidArgument, "n_orderings must be positive");
  constexpr double kFloor = 0.05;
  constexpr std::size_t kMinModels = 3;

  const auto x = probit_all(id_acc, clip_eps);
  const auto y = probit_all(ood_acc, clip_eps);

  StabilityResult res;
  res.per_ordering = parallel_map(n_orderings, jobs, [&](std::size_t k) {
    auto rng = substream(seed, "stability/" + std::to_string(k));
    std::vector<std::size_t> order(total);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::shuffle(order.begin(), order.end(), rng);

    // Running sums give every prefix correlation in O(total).
    std::vector<double> rho(total + 1, std::nan(""));
    double sx = 0, sy = 0, sxx = 0, syy = 0, sxy = 0;
    for (std::size_t m = 1; m <= total; ++m) {
      const double a = x[order[m - 1]], b = y[order[m - 1]];
      sx += a, sy += b, sxx += a * a, syy += b * b, sxy += a * b;
      if (m < kMinModels) continue;
      const double md = static_cast<double>(m);
      const double vx = sxx - sx * sx / md, vy = syy - sy * sy / md;
      if (vx > 1e-12 && vy > 1e-12) rho[m] = std::clamp((sxy - sx * sy / md) / std::sqrt(vx * vy), -1.0, 1.0);
    }
    auto stable_step = [&](std::size_t m) {
      if (std::isnan(rho[m]) || std::isnan(rho[m + 1])) return false;
      return std::abs(rho[m + 1] - rho[m]) / std::max(std::abs(rho[m]), kFloor) < rel_threshold;
    };
    // Scan from the top: run[m] = length of the stable streak starting at m.
    std::size_t best = total;
    std::size_t streak = 0;
    for (std::size_t m = total - 1; m >= kMinModels; --m) {
      streak = stable_step(m) ? streak + 1 : 0;
      if (streak >= window + 1) best = m;
    }
    return best;
  });

  auto sorted = res.per_ordering;
  std::sort(sorted.begin(), sorted.end());
  res.n = sorted[(sorted.size() - 1) / 2];
  res.converged = res.n < total;
  res.non_converged = static_cast<std::size_t>(std::count(sorted.begin(), sorted.end(), total));
  return res;
}

}  // namespace oodselect
