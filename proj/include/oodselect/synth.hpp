#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "oodselect/core_data.hpp"
#include "oodselect/error.hpp"
#include "oodselect/parallel.hpp"
#include "oodselect/probit.hpp"
#include "oodselect/rng.hpp"
#include "oodselect/selector.hpp"
#include "oodselect/stats.hpp"

namespace oodselect {

// ---------------------------------------------------------------------------
// Planted instances
// ---------------------------------------------------------------------------

/// Three example pools: aligned examples get easier as model skill rises,
/// inverted ones get harder, noise examples ignore skill entirely.
struct PlantedSpec {
  std::size_t n_models = 300;
  std::size_t n_aligned = 1400;
  std::size_t n_inverted = 500;
  std::size_t n_noise = 100;
  double skill_low = 0.55;
  double skill_high = 0.95;
  double slope = 10.0;
  double id_noise = 0.01;
  /// 0 leaves every family label empty; otherwise model i belongs to family
  /// i mod n_families and each family draws its skill from its own band.
  std::size_t n_families = 0;
  std::uint64_t seed = 0;

  [[nodiscard]] std::size_t n_examples() const noexcept { return n_aligned + n_inverted + n_noise; }

  void validate() const {
    if (n_examples() < 1) fail(ErrorKind::InvalidConfig, "planted instance needs at least one example");
    if (n_models < 1) fail(ErrorKind::InvalidConfig, "planted instance needs at least one model");
    if (!(skill_low > 0.0 && skill_low < skill_high && skill_high < 1.0))
      fail(ErrorKind::InvalidConfig, "skill range must satisfy 0 < low < high < 1");
    if (!(slope > 0.0)) fail(ErrorKind::InvalidConfig, "slope must be positive");
    if (!(id_noise >= 0.0)) fail(ErrorKind::InvalidConfig, "id_noise must be non-negative");
  }
};

struct PlantedTruth {
  IndexSet aligned;
  IndexSet inverted;
  IndexSet noise;
  std::vector<double> model_skills;
};

struct PlantedInstance {
  CorrectnessMatrix z;
  ModelTable models;
  PlantedTruth truth;
  std::vector<ExampleMeta> examples;  ///< attribute "pool" names each example's pool
};

namespace detail {

inline std::string padded_id(char prefix, std::size_t k, std::size_t total) {
  const auto width = std::to_string(total > 0 ? total - 1 : 0).size();
  auto digits = std::to_string(k);
  if (digits.size() < width) digits.insert(0, width - digits.size(), '0');
  return prefix + digits;
}

}  // namespace detail

inline PlantedInstance generate_planted(const PlantedSpec& spec) {
  spec.validate();
  const std::size_t n = spec.n_models;
  const std::size_t d = spec.n_examples();
  auto rng = substream(spec.seed, "synth/planted");
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> gauss(0.0, 1.0);

  PlantedInstance out;
  auto& truth = out.truth;
  truth.model_skills.resize(n);
  const double band = (spec.skill_high - spec.skill_low) / static_cast<double>(std::max<std::size_t>(spec.n_families, 1));
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t fam = spec.n_families ? i % spec.n_families : 0;
    const double lo = spec.skill_low + band * static_cast<double>(fam);
    truth.model_skills[i] = lo + band * unit(rng);
  }

  out.models.records.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    auto& rec = out.models.records[i];
    rec.model_id = detail::padded_id('m', i, n);
    rec.id_accuracy = std::clamp(truth.model_skills[i] + spec.id_noise * gauss(rng), kDefaultClipEps,
                                 1.0 - kDefaultClipEps);
    if (spec.n_families) rec.family = "fam" + std::to_string(i % spec.n_families);
  }

  // Pool labels are shuffled over columns so column order carries no signal.
  std::vector<int> pool(d);
  std::fill(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(spec.n_aligned), 0);
  std::fill(pool.begin() + static_cast<std::ptrdiff_t>(spec.n_aligned),
            pool.begin() + static_cast<std::ptrdiff_t>(spec.n_aligned + spec.n_inverted), 1);
  std::fill(pool.begin() + static_cast<std::ptrdiff_t>(spec.n_aligned + spec.n_inverted), pool.end(), 2);
  std::shuffle(pool.begin(), pool.end(), rng);

  std::vector<double> param(d);
  for (std::size_t j = 0; j < d; ++j) {
    if (pool[j] == 2) {
      param[j] = 0.05 + 0.45 * unit(rng);
    } else {
      param[j] = spec.skill_low + (spec.skill_high - spec.skill_low) * unit(rng);
    }
  }

  BitMatrix bits(n, d);
  for (std::size_t i = 0; i < n; ++i) {
    const double a = truth.model_skills[i];
    for (std::size_t j = 0; j < d; ++j) {
      double p;
      switch (pool[j]) {
        case 0: p = logistic(spec.slope * (a - param[j])); break;
        case 1: p = logistic(-spec.slope * (a - param[j])); break;
        default: p = param[j]; break;
      }
      bits.set(i, j, unit(rng) < p);
    }
  }

  std::vector<std::string> model_ids, example_ids;
  for (const auto& r : out.models.records) model_ids.push_back(r.model_id);
  static constexpr const char* kPoolName[] = {"aligned", "inverted", "noise"};
  for (std::size_t j = 0; j < d; ++j) {
    example_ids.push_back(detail::padded_id('e', j, d));
    (pool[j] == 0 ? truth.aligned : pool[j] == 1 ? truth.inverted : truth.noise).push_back(j);
    ExampleMeta meta;
    meta.example_id = example_ids.back();
    meta.attributes["pool"] = kPoolName[pool[j]];
    out.examples.push_back(std::move(meta));
  }
  out.z = CorrectnessMatrix(std::move(bits), std::move(model_ids), std::move(example_ids));
  return out;
}

// ---------------------------------------------------------------------------
// Exhaustive oracle
// ---------------------------------------------------------------------------

struct BruteForceResult {
  IndexSet subset;
  double objective = std::numeric_limits<double>::infinity();
  std::size_t evaluated = 0;
  std::size_t degenerate = 0;
};

inline double binomial(std::size_t n, std::size_t k) {
  if (k > n) return 0.0;
  k = std::min(k, n - k);
  double c = 1.0;
  for (std::size_t t = 1; t <= k; ++t) c = c * static_cast<double>(n - k + t) / static_cast<double>(t);
  return c;
}

/// Minimum probit-Pearson correlation over every size-S subset (binary weights, no
/// penalty). `rows` restricts the models; empty means all. Subsets whose accuracies
/// have zero variance are skipped.
inline BruteForceResult brute_force_best_subset(const CorrectnessMatrix& z, std::span<const double> id_acc,
                                                std::size_t target_size, std::span<const std::size_t> rows = {},
                                                double clip_eps = kDefaultClipEps, double guard = 1e6) {
  const std::size_t d = z.n_examples();
  if (target_size < 1 || target_size > d) fail(ErrorKind::InvalidArgument, "S must lie in [1, d]");
  if (binomial(d, target_size) > guard)
    fail(ErrorKind::CombinatorialGuardExceeded, "C(d, S) exceeds the enumeration guard");
  std::vector<std::size_t> all_rows;
  if (rows.empty()) {
    all_rows.resize(z.n_models());
    std::iota(all_rows.begin(), all_rows.end(), std::size_t{0});
    rows = all_rows;
  }
  if (id_acc.size() != rows.size()) fail(ErrorKind::DimensionMismatch, "one ID accuracy per model row required");
  const auto x = probit_all(id_acc, clip_eps);

  BruteForceResult best;
  IndexSet cur(target_size);
  std::iota(cur.begin(), cur.end(), std::size_t{0});
  std::vector<double> y(rows.size());
  while (true) {
    const auto acc = subset_accuracy(z, cur, rows);
    for (std::size_t i = 0; i < rows.size(); ++i) y[i] = probit(acc[i], clip_eps);
    ++best.evaluated;
    try {
      const double r = pearson(x, y);
      if (r < best.objective) {
        best.objective = r;
        best.subset = cur;
      }
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::DegenerateVariance) throw;
      ++best.degenerate;
    }
    // Next combination in lexicographic order.
    std::size_t k = target_size;
    while (k > 0 && cur[k - 1] == d - target_size + k - 1) --k;
    if (k == 0) break;
    ++cur[k - 1];
    for (std::size_t t = k; t < target_size; ++t) cur[t] = cur[t - 1] + 1;
  }
  if (best.subset.empty()) fail(ErrorKind::DegenerateVariance, "every subset is degenerate");
  return best;
}

// ---------------------------------------------------------------------------
// Diminishing-returns violations
// ---------------------------------------------------------------------------

struct DiminishingReturnsViolation {
  IndexSet smaller;  ///< s_i
  IndexSet larger;   ///< s_j, a superset of s_i
  std::size_t added = 0;
  double gain_smaller = 0.0;  ///< f(s_i + k) - f(s_i)
  double gain_larger = 0.0;   ///< f(s_j + k) - f(s_j)
};

/// Marginal gains of adding `k` to nested sets under a set function.
template <typename SetFn>
DiminishingReturnsViolation marginal_gains(SetFn&& f, IndexSet smaller, IndexSet larger, std::size_t k) {
  auto with = [k](IndexSet s) {
    s.insert(std::lower_bound(s.begin(), s.end(), k), k);
    return s;
  };
  DiminishingReturnsViolation v;
  v.gain_smaller = f(with(smaller)) - f(smaller);
  v.gain_larger = f(with(larger)) - f(larger);
  v.smaller = std::move(smaller);
  v.larger = std::move(larger);
  v.added = k;
  return v;
}

/// Samples nested pairs s_i ⊆ s_j ⊂ [0, d) with k ∉ s_j and returns the first
/// triple whose marginal at s_i is strictly below the marginal at s_j.
/// Triples where f throws DegenerateVariance are skipped but still counted.
template <typename SetFn>
std::optional<DiminishingReturnsViolation> find_diminishing_returns_violation(SetFn&& f, std::size_t d,
                                                                              std::size_t trials, Rng& rng,
                                                                              std::size_t* used = nullptr,
                                                                              double tol = 1e-12) {
  if (d < 3) fail(ErrorKind::InvalidArgument, "need d >= 3");
  std::vector<std::size_t> perm(d);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  for (std::size_t t = 0; t < trials; ++t) {
    if (used) *used = t + 1;
    std::shuffle(perm.begin(), perm.end(), rng);
    // perm[0] = k; perm[1 .. 1+large) = s_j; its first `small` entries = s_i.
    const std::size_t large = std::uniform_int_distribution<std::size_t>(2, d - 1)(rng);
    const std::size_t small = std::uniform_int_distribution<std::size_t>(1, large - 1)(rng);
    IndexSet sj(perm.begin() + 1, perm.begin() + 1 + static_cast<std::ptrdiff_t>(large));
    IndexSet si(perm.begin() + 1, perm.begin() + 1 + static_cast<std::ptrdiff_t>(small));
    std::sort(si.begin(), si.end());
    std::sort(sj.begin(), sj.end());
    try {
      auto v = marginal_gains(f, std::move(si), std::move(sj), perm[0]);
      if (v.gain_smaller < v.gain_larger - tol) return v;
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::DegenerateVariance) throw;
    }
  }
  return std::nullopt;
}

/// Probit-Pearson correlation of a binary selection as a set function.
struct SubsetCorrelation {
  const CorrectnessMatrix* z;
  std::vector<double> x_probit;
  double clip_eps = kDefaultClipEps;

  double operator()(const IndexSet& s) const {
    std::vector<std::size_t> rows(z->n_models());
    std::iota(rows.begin(), rows.end(), std::size_t{0});
    return pearson(x_probit, probit_all(subset_accuracy(*z, s, rows), clip_eps));
  }
};

struct NonSubmodularityWitness {
  DiminishingReturnsViolation violation;
  CorrectnessMatrix z;
  std::vector<double> id_accuracy;
  std::size_t triples_sampled = 0;
};

/// Searches random binary instances (n_models x d, ID accuracy in (0.3, 0.9))
/// for a strict violation of diminishing returns. `trials` bounds the total
/// number of sampled triples; each instance receives up to 64 of them.
inline std::optional<NonSubmodularityWitness> nonsubmodularity_witness(std::size_t n_models, std::size_t d,
                                                                       std::size_t trials, std::uint64_t seed) {
  if (d < 3) fail(ErrorKind::InvalidArgument, "need d >= 3");
  if (n_models < 3) fail(ErrorKind::InvalidArgument, "need at least 3 models");
  constexpr std::size_t kPerInstance = 64;
  std::size_t sampled = 0;
  for (std::size_t inst = 0; sampled < trials; ++inst) {
    auto rng = substream(seed, "witness/" + std::to_string(inst));
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::vector<double> id_acc(n_models);
    for (auto& a : id_acc) a = 0.3 + 0.6 * unit(rng);
    BitMatrix bits(n_models, d);
    for (std::size_t i = 0; i < n_models; ++i)
      for (std::size_t j = 0; j < d; ++j) bits.set(i, j, unit(rng) < 0.5);
    std::vector<std::string> mids, eids;
    for (std::size_t i = 0; i < n_models; ++i) mids.push_back(detail::padded_id('m', i, n_models));
    for (std::size_t j = 0; j < d; ++j) eids.push_back(detail::padded_id('e', j, d));
    CorrectnessMatrix z(std::move(bits), std::move(mids), std::move(eids));

    SubsetCorrelation f{&z, probit_all(id_acc, kDefaultClipEps)};
    std::size_t used = 0;
    const std::size_t budget = std::min(kPerInstance, trials - sampled);
    auto v = find_diminishing_returns_violation(f, d, budget, rng, &used);
    sampled += used;
    if (v) return NonSubmodularityWitness{std::move(*v), std::move(z), std::move(id_acc), sampled};
  }
  return std::nullopt;
}

// ---------------------------------------------------------------------------
// Decay probes for single-model / single-example perturbations
// ---------------------------------------------------------------------------

enum class DecayKind { new_model, new_example };

constexpr std::string_view to_string(DecayKind k) { return k == DecayKind::new_model ? "new_model" : "new_example"; }

struct DecayPoint {
  std::size_t size = 0;
  double max_abs_delta = 0.0;
  double median_abs_delta = 0.0;
};

struct DecayProbe {
  DecayKind kind = DecayKind::new_model;
  std::vector<DecayPoint> points;
  double slope = 0.0;  ///< least-squares slope of log(max delta) against log(size)
};

namespace detail {

inline double loglog_slope(const std::vector<DecayPoint>& pts) {
  std::vector<double> lx, ly;
  for (const auto& p : pts) {
    lx.push_back(std::log(static_cast<double>(p.size)));
    ly.push_back(std::log(p.max_abs_delta));
  }
  const double mx = mean(lx), my = mean(ly);
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t k = 0; k < lx.size(); ++k) {
    sxy += (lx[k] - mx) * (ly[k] - my);
    sxx += (lx[k] - mx) * (lx[k] - mx);
  }
  return sxy / sxx;
}

/// |rho_{N+1} - rho_N| after appending (z, beta z) to N random pairs in [alpha, 1-alpha]^2.
inline double new_model_delta(std::size_t n, double alpha, Rng& rng) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::vector<double> x, y;
  x.reserve(n + 1);
  y.reserve(n + 1);
  for (std::size_t i = 0; i < n; ++i) {
    const double zi = alpha + (1.0 - 2.0 * alpha) * unit(rng);
    const double wi = std::clamp(0.5 * zi + 0.25 + 0.15 * gauss(rng), alpha, 1.0 - alpha);
    x.push_back(inverse_normal_cdf(zi));
    y.push_back(inverse_normal_cdf(wi));
  }
  const double before = pearson(x, y);
  const double beta = 0.5 + 1.5 * unit(rng);
  const double lo = std::max(alpha, alpha / beta);
  const double hi = std::min(1.0 - alpha, (1.0 - alpha) / beta);
  const double zn = lo + (hi - lo) * unit(rng);
  x.push_back(inverse_normal_cdf(zn));
  y.push_back(inverse_normal_cdf(beta * zn));
  return std::abs(pearson(x, y) - before);
}

/// |rho_{S+1} - rho_S| after adding one example. Examples are difficulty
/// thresholds shared by all models (model i solves example j iff u_j < p_i), so
/// the spread of accuracies stays bounded away from zero as S grows.
inline double new_example_delta(std::size_t s, std::size_t n_models, double alpha, Rng& rng) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::vector<double> skill(n_models), w(n_models);
  for (std::size_t i = 0; i < n_models; ++i) {
    skill[i] = 0.25 + 0.5 * unit(rng);
    w[i] = inverse_normal_cdf(std::clamp(skill[i] + 0.15 * gauss(rng), alpha, 1.0 - alpha));
  }
  std::vector<double> u(s + 1);
  for (auto& v : u) v = unit(rng);
  std::vector<double> before(n_models), after(n_models);
  for (std::size_t i = 0; i < n_models; ++i) {
    std::size_t hits = 0;
    for (std::size_t j = 0; j < s; ++j) hits += u[j] < skill[i];
    const double m0 = static_cast<double>(hits) / static_cast<double>(s);
    const double m1 = static_cast<double>(hits + (u[s] < skill[i])) / static_cast<double>(s + 1);
    before[i] = inverse_normal_cdf(std::clamp(m0, alpha, 1.0 - alpha));
    after[i] = inverse_normal_cdf(std::clamp(m1, alpha, 1.0 - alpha));
  }
  return std::abs(pearson(after, w) - pearson(before, w));
}

}  // namespace detail

/// Empirical decay of the largest single-step correlation change with size.
inline DecayProbe lemma_decay_probe(DecayKind kind, const std::vector<std::size_t>& sizes, std::size_t trials,
                                    std::uint64_t seed, std::size_t jobs = 1, double alpha = 0.05,
                                    std::size_t n_models_for_examples = 64) {
  if (sizes.size() < 2) fail(ErrorKind::InvalidArgument, "need at least two sizes");
  for (std::size_t k = 0; k < sizes.size(); ++k) {
    if (sizes[k] < 8) fail(ErrorKind::InvalidArgument, "sizes must be >= 8");
    if (k > 0 && sizes[k] <= sizes[k - 1]) fail(ErrorKind::InvalidArgument, "sizes must be increasing");
  }
  if (trials == 0) fail(ErrorKind::InvalidArgument, "trials must be positive");

  DecayProbe probe;
  probe.kind = kind;
  const auto deltas = parallel_map(sizes.size() * trials, jobs, [&](std::size_t job) {
    const std::size_t size = sizes[job / trials];
    auto rng = substream(seed, std::string("decay/") + std::string(to_string(kind)) + "/" + std::to_string(size) +
                                   "/" + std::to_string(job % trials));
    // Degenerate draws are redrawn from the same stream.
    for (;;) {
      try {
        return kind == DecayKind::new_model ? detail::new_model_delta(size, alpha, rng)
                                            : detail::new_example_delta(size, n_models_for_examples, alpha, rng);
      } catch (const Error& e) {
        if (e.kind() != ErrorKind::DegenerateVariance) throw;
      }
    }
  });
  for (std::size_t k = 0; k < sizes.size(); ++k) {
    std::vector<double> d(deltas.begin() + static_cast<std::ptrdiff_t>(k * trials),
                          deltas.begin() + static_cast<std::ptrdiff_t>((k + 1) * trials));
    std::sort(d.begin(), d.end());
    probe.points.push_back({sizes[k], d.back(), detail::quantile_sorted(d, 0.5)});
  }
  probe.slope = detail::loglog_slope(probe.points);
  return probe;
}

// ---------------------------------------------------------------------------
// Lipschitz check of the correlation in the selection weights
// ---------------------------------------------------------------------------

struct LipschitzProbe {
  std::size_t pairs_checked = 0;
  std::size_t pairs_skipped = 0;  ///< clipped accuracies or a vacuous bound
  std::size_t violations = 0;
  double max_ratio = 0.0;  ///< max |corr(s) - corr(s')| / ||s - s'||
  double max_bound = 0.0;  ///< largest per-pair constant used
};

/// Samples pairs of fractional selections with mass S (the second a short
/// convex step from the first towards a fresh draw) and checks
/// |corr(s) - corr(s')| <= L ||s - s'||_2 with the constructive constant
/// L = L_f ||Z||_F / (S * eps_seg): L_f bounds the probit slope over the
/// accuracies reached on the segment (they are linear in s, so the endpoints
/// bound them) and eps_seg lower-bounds the norm of the centered probit
/// accuracies along the segment.
inline LipschitzProbe lipschitz_probe(const CorrectnessMatrix& z, std::span<const std::size_t> rows,
                                      std::span<const double> id_acc, std::size_t target_size, std::size_t pairs,
                                      std::uint64_t seed, double clip_eps = kDefaultClipEps) {
  const std::size_t d = z.n_examples();
  if (target_size < 1 || 2 * target_size > d) fail(ErrorKind::InvalidArgument, "need 1 <= S <= d / 2");
  const auto x = probit_all(id_acc, clip_eps);
  const double S = static_cast<double>(target_size);

  double frob = 0.0;
  for (auto i : rows) frob += static_cast<double>(z.bits().row_popcount(i));
  frob = std::sqrt(frob);

  auto rng = substream(seed, "lipschitz");
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  auto draw = [&] {
    for (;;) {
      std::vector<double> s(d);
      double sum = 0.0;
      for (auto& v : s) sum += (v = unit(rng));
      bool ok = true;
      for (auto& v : s) ok &= (v *= S / sum) <= 1.0;
      if (ok) return s;
    }
  };
  auto centered_norm = [](std::vector<double> v) {
    const double m = detail::mean(v);
    double ss = 0.0;
    for (double e : v) ss += (e - m) * (e - m);
    return std::sqrt(ss);
  };

  LipschitzProbe out;
  for (std::size_t p = 0; p < pairs; ++p) {
    const auto s0 = draw();
    auto s1 = draw();
    const double step = 0.001 + 0.049 * unit(rng);
    for (std::size_t j = 0; j < d; ++j) s1[j] = (1.0 - step) * s0[j] + step * s1[j];
    const auto m0 = selected_ood_accuracy(z, s0, rows);
    const auto m1 = selected_ood_accuracy(z, s1, rows);
    double lf = 0.0;
    bool clipped = false;
    for (std::size_t i = 0; i < rows.size(); ++i) {
      for (double m : {m0[i], m1[i]}) {
        if (m <= clip_eps || m >= 1.0 - clip_eps) clipped = true;
        else lf = std::max(lf, probit_derivative(m, clip_eps));
      }
    }
    double dist = 0.0;
    for (std::size_t j = 0; j < d; ++j) dist += (s0[j] - s1[j]) * (s0[j] - s1[j]);
    dist = std::sqrt(dist);
    if (clipped || dist == 0.0) {
      ++out.pairs_skipped;
      continue;
    }
    const auto y0 = probit_all(m0, clip_eps);
    const auto y1 = probit_all(m1, clip_eps);
    const double drift = lf * frob / S * dist;
    const double eps_seg = std::min(centered_norm(y0), centered_norm(y1)) - 0.5 * drift;
    if (!(eps_seg > 0.0)) {
      ++out.pairs_skipped;
      continue;
    }
    const double bound = lf * frob / (S * eps_seg);
    const double ratio = std::abs(pearson(x, y0) - pearson(x, y1)) / dist;
    ++out.pairs_checked;
    out.max_ratio = std::max(out.max_ratio, ratio);
    out.max_bound = std::max(out.max_bound, bound);
    if (ratio > bound) ++out.violations;
  }
  return out;
}

}  // namespace oodselect
