#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numbers>
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
#include "oodselect/stats.hpp"

namespace oodselect {

struct OptimizerConfig {
  std::size_t target_size = 0;  ///< S, the number of examples to select
  std::size_t steps = 2000;
  double lr0 = 0.05;
  double lambda0 = 0.0;
  double lambda_max = 1.0;
  std::size_t restarts = 8;
  std::uint64_t seed = 0;
  double clip_eps = kDefaultClipEps;
  double init_scale = 0.01;
  /// Top-S candidates are also scored every this many steps; 0 scores only the end.
  std::size_t checkpoint_every = 50;
  double weight_floor = kDefaultWeightFloor;
  // Adam moments; full-batch updates.
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;

  void validate(std::size_t d) const {
    auto bad = [](const std::string& what) { fail(ErrorKind::InvalidConfig, what); };
    if (target_size < 1 || target_size > d) bad("target size must satisfy 1 <= S <= d");
    if (steps < 1) bad("steps must be >= 1");
    if (!(lr0 > 0.0)) bad("lr0 must be positive");
    if (!(lambda0 >= 0.0)) bad("lambda0 must be non-negative");
    if (!(lambda_max >= lambda0)) bad("lambda_max must be >= lambda0");
    if (restarts < 1) bad("restarts must be >= 1");
    if (!(init_scale >= 0.0)) bad("init_scale must be non-negative");
    if (!(weight_floor > 0.0)) bad("weight_floor must be positive");
    if (!(beta1 >= 0.0 && beta1 < 1.0 && beta2 >= 0.0 && beta2 < 1.0)) bad("Adam betas must lie in [0,1)");
    check_clip_eps(clip_eps);
  }
};

inline double logistic(double t) noexcept {
  if (t >= 0.0) return 1.0 / (1.0 + std::exp(-t));
  const double e = std::exp(t);
  return e / (1.0 + e);
}

/// Pre-squash parameters; the selection weights are logistic(theta).
struct SelectionWeights {
  std::vector<double> theta;

  [[nodiscard]] std::vector<double> weights() const {
    std::vector<double> s(theta.size());
    std::transform(theta.begin(), theta.end(), s.begin(), logistic);
    return s;
  }
};

/// Learning rate annealed from lr0 to 0 on a half cosine.
inline double cosine_lr(double lr0, std::size_t t, std::size_t steps) {
  return lr0 * 0.5 * (1.0 + std::cos(std::numbers::pi * static_cast<double>(t) / static_cast<double>(steps)));
}

/// Penalty weight ramped from lambda0 up to lambda_max on a reversed half cosine.
inline double cosine_lambda(double lambda0, double lambda_max, std::size_t t, std::size_t steps) {
  return lambda0 + (lambda_max - lambda0) * 0.5 *
                       (1.0 - std::cos(std::numbers::pi * static_cast<double>(t) / static_cast<double>(steps)));
}

/// Dense view of one model split: correctness rows plus mean-centered probit
/// ID accuracies. Everything the relaxed objective needs.
class SelectionProblem {
 public:
  SelectionProblem(const CorrectnessMatrix& z, std::span<const std::size_t> rows, std::span<const double> id_acc,
                   double clip_eps = kDefaultClipEps, double weight_floor = kDefaultWeightFloor)
      : bits_(&z.bits()), n_(rows.size()), d_(z.n_examples()), clip_eps_(clip_eps), weight_floor_(weight_floor),
        rows_(rows.begin(), rows.end()), lex_rank_(z.lex_ranks().begin(), z.lex_ranks().end()) {
    if (id_acc.size() != n_) fail(ErrorKind::DimensionMismatch, "one ID accuracy per model row required");
    if (n_ < 3) fail(ErrorKind::TooFewModels, "selection problem needs at least 3 models");
    dense_ = z.bits().unpack_rows(rows);
    x_ = probit_all(id_acc, clip_eps);
    const double mean = detail::mean(x_);
    double ss = 0.0;
    for (auto& v : x_) {
      v -= mean;
      ss += v * v;
    }
    if (!(ss > 0.0)) fail(ErrorKind::DegenerateVariance, "ID accuracies have zero variance");
    x_norm_ = std::sqrt(ss);
  }

  [[nodiscard]] std::size_t n_models() const noexcept { return n_; }
  [[nodiscard]] std::size_t n_examples() const noexcept { return d_; }
  [[nodiscard]] double clip_eps() const noexcept { return clip_eps_; }
  [[nodiscard]] std::span<const double> centered_id() const noexcept { return x_; }
  [[nodiscard]] std::span<const std::size_t> lex_ranks() const noexcept { return lex_rank_; }

  /// corr(x, probit(Z s / ||s||_1)) + lambda (S - ||s||_1)^2 at s = logistic(theta).
  /// Writes d objective / d theta into `grad` when non-empty.
  double evaluate(std::span<const double> theta, double target_size, double lambda, std::span<double> grad = {}) const {
    if (theta.size() != d_) fail(ErrorKind::DimensionMismatch, "theta length differs from d");
    std::vector<double> s(d_);
    double mass = 0.0;
    for (std::size_t j = 0; j < d_; ++j) {
      s[j] = logistic(theta[j]);
      mass += s[j];
    }
    if (mass < weight_floor_) fail(ErrorKind::DegenerateSelection, "||s||_1 below weight floor");

    std::vector<double> m(n_), y(n_);
    for (std::size_t i = 0; i < n_; ++i) {
      const double* row = dense_.data() + i * d_;
      double acc = 0.0;
      for (std::size_t j = 0; j < d_; ++j) acc += row[j] * s[j];
      m[i] = std::clamp(acc / mass, 0.0, 1.0);
      y[i] = inverse_normal_cdf(std::clamp(m[i], clip_eps_, 1.0 - clip_eps_));
    }
    const double y_mean = detail::mean(y);
    double yy = 0.0, xy = 0.0;
    for (std::size_t i = 0; i < n_; ++i) {
      y[i] -= y_mean;
      yy += y[i] * y[i];
      xy += x_[i] * y[i];
    }
    if (!(yy > 0.0)) fail(ErrorKind::DegenerateVariance, "selected accuracies have zero variance");
    const double y_norm = std::sqrt(yy);
    const double corr = xy / (x_norm_ * y_norm);
    const double gap = target_size - mass;
    const double value = corr + lambda * gap * gap;

    if (!grad.empty()) {
      if (grad.size() != d_) fail(ErrorKind::DimensionMismatch, "gradient buffer length differs from d");
      // w_i = d corr / d m_i; zero where the probit is clipped.
      std::vector<double> w(n_);
      double wm = 0.0;
      for (std::size_t i = 0; i < n_; ++i) {
        const double dcorr_dy = x_[i] / (x_norm_ * y_norm) - corr * y[i] / yy;
        w[i] = dcorr_dy * probit_derivative(m[i], clip_eps_);
        wm += w[i] * m[i];
      }
      std::fill(grad.begin(), grad.end(), 0.0);
      for (std::size_t i = 0; i < n_; ++i) {
        if (w[i] == 0.0) continue;
        const double* row = dense_.data() + i * d_;
        const double wi = w[i];
        for (std::size_t j = 0; j < d_; ++j) grad[j] += wi * row[j];
      }
      const double penalty = -2.0 * lambda * gap;
      for (std::size_t j = 0; j < d_; ++j) {
        const double ds = (grad[j] - wm) / mass + penalty;
        grad[j] = ds * s[j] * (1.0 - s[j]);
      }
    }
    return value;
  }

  /// Unpenalized correlation of a binary selection (column indices).
  [[nodiscard]] double subset_objective(std::span<const std::size_t> cols) const {
    const auto acc = subset_accuracy_rows(cols);
    return pearson(x_, probit_all(acc, clip_eps_));
  }

  [[nodiscard]] std::vector<double> subset_accuracy_rows(std::span<const std::size_t> cols) const {
    if (cols.empty()) fail(ErrorKind::DegenerateSelection, "empty subset");
    const auto mask = make_column_mask(d_, cols);
    std::vector<double> acc(n_);
    for (std::size_t i = 0; i < n_; ++i)
      acc[i] = static_cast<double>(bits_->masked_popcount(rows_[i], mask)) / static_cast<double>(cols.size());
    return acc;
  }

 private:
  const BitMatrix* bits_;  // borrowed; the matrix must outlive the problem
  std::size_t n_;
  std::size_t d_;
  double clip_eps_;
  double weight_floor_;
  std::vector<std::size_t> rows_;
  std::vector<std::size_t> lex_rank_;
  std::vector<double> dense_;
  std::vector<double> x_;
  double x_norm_ = 0.0;
};

inline double objective(const SelectionProblem& problem, const SelectionWeights& weights, std::size_t target_size,
                        double lambda) {
  return problem.evaluate(weights.theta, static_cast<double>(target_size), lambda);
}

inline std::vector<double> gradient(const SelectionProblem& problem, const SelectionWeights& weights,
                                    std::size_t target_size, double lambda) {
  std::vector<double> g(weights.theta.size());
  problem.evaluate(weights.theta, static_cast<double>(target_size), lambda, g);
  return g;
}

/// The S largest weights; equal weights are ordered by ascending example id
/// (given as each column's lexicographic rank). Returned sorted by column.
inline IndexSet discretize(std::span<const double> s, std::size_t target_size, std::span<const std::size_t> lex_rank) {
  if (s.size() != lex_rank.size()) fail(ErrorKind::DimensionMismatch, "weights and ids differ in length");
  if (target_size > s.size()) fail(ErrorKind::InvalidArgument, "S exceeds d");
  IndexSet order(s.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  auto before = [&](std::size_t a, std::size_t b) { return s[a] != s[b] ? s[a] > s[b] : lex_rank[a] < lex_rank[b]; };
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(target_size), order.end(), before);
  order.resize(target_size);
  std::sort(order.begin(), order.end());
  return order;
}

inline IndexSet discretize(const SelectionWeights& weights, std::size_t target_size, const CorrectnessMatrix& z) {
  return discretize(weights.weights(), target_size, z.lex_ranks());
}

/// One Adam trajectory from a seeded random start.
struct RestartOutcome {
  std::size_t restart_index = 0;
  SelectionWeights weights;
  IndexSet subset;
  double objective = 0.0;          ///< discretized, unpenalized train correlation
  double relaxed_objective = 0.0;  ///< final penalized value at lambda_max
  double final_mass = 0.0;         ///< ||s||_1 at the end of optimization
};

inline RestartOutcome run_restart(const SelectionProblem& problem, const OptimizerConfig& cfg, std::size_t k) {
  const std::size_t d = problem.n_examples();
  auto rng = substream(cfg.seed, "fit/restart/" + std::to_string(k));
  std::normal_distribution<double> init(0.0, 1.0);
  RestartOutcome out;
  out.restart_index = k;
  auto& theta = out.weights.theta;
  theta.resize(d);
  const double centre = std::log(static_cast<double>(cfg.target_size)) -
                        std::log(static_cast<double>(d) - static_cast<double>(cfg.target_size) + 0.5);
  for (auto& t : theta) t = centre + cfg.init_scale * init(rng);

  std::vector<double> g(d), m1(d, 0.0), m2(d, 0.0);
  const double target = static_cast<double>(cfg.target_size);
  double b1t = 1.0, b2t = 1.0;
  auto consider = [&](const std::vector<double>& s) {
    auto cand = discretize(s, cfg.target_size, problem.lex_ranks());
    double value;
    try {
      value = problem.subset_objective(cand);
    } catch (const Error&) {
      return;
    }
    if (out.subset.empty() || value < out.objective) {
      out.objective = value;
      out.subset = std::move(cand);
    }
  };
  for (std::size_t t = 0; t < cfg.steps; ++t) {
    const double lr = cosine_lr(cfg.lr0, t, cfg.steps);
    const double lambda = cosine_lambda(cfg.lambda0, cfg.lambda_max, t, cfg.steps);
    problem.evaluate(theta, target, lambda, g);
    b1t *= cfg.beta1;
    b2t *= cfg.beta2;
    for (std::size_t j = 0; j < d; ++j) {
      m1[j] = cfg.beta1 * m1[j] + (1.0 - cfg.beta1) * g[j];
      m2[j] = cfg.beta2 * m2[j] + (1.0 - cfg.beta2) * g[j] * g[j];
      const double mh = m1[j] / (1.0 - b1t);
      const double vh = m2[j] / (1.0 - b2t);
      theta[j] -= lr * mh / (std::sqrt(vh) + cfg.adam_eps);
    }
    if (cfg.checkpoint_every > 0 && (t + 1) % cfg.checkpoint_every == 0 && t + 1 < cfg.steps)
      consider(out.weights.weights());
  }
  const auto s = out.weights.weights();
  for (double v : s) out.final_mass += v;
  out.relaxed_objective = problem.evaluate(theta, target, cfg.lambda_max);
  const bool had_candidate = !out.subset.empty();
  consider(s);
  // The final point must be scorable unless an earlier checkpoint was.
  if (!had_candidate && out.subset.empty())
    (void)problem.subset_objective(discretize(s, cfg.target_size, problem.lex_ranks()));
  return out;
}

/// Probit correlation between ID accuracy and subset accuracy over one model split.
inline CorrelationReport evaluate_subset(std::span<const std::size_t> subset, const CorrectnessMatrix& z,
                                         const ModelTable& models, Split split,
                                         CorrelationKind kind = CorrelationKind::pearson,
                                         double clip_eps = kDefaultClipEps, double confidence = 0.95) {
  if (models.size() != z.n_models()) fail(ErrorKind::DimensionMismatch, "model table not aligned with matrix");
  const auto rows = models.rows_in(split);
  if (rows.empty()) fail(ErrorKind::TooFewModels, "split '" + std::string(to_string(split)) + "' has no models");
  const auto ood = subset_accuracy(z, subset, rows);
  const auto x = probit_all(models.id_accuracies(rows), clip_eps);
  const auto y = probit_all(ood, clip_eps);
  return correlation_report(x, y, kind, confidence);
}

inline constexpr std::array<Split, 3> kEvalSplits{Split::train, Split::val, Split::test};

using SplitReports = std::array<std::optional<CorrelationReport>, 3>;

/// Reports on every split that has enough models; failures leave the slot empty.
inline SplitReports evaluate_all_splits(std::span<const std::size_t> subset, const CorrectnessMatrix& z,
                                        const ModelTable& models, CorrelationKind kind, double clip_eps) {
  SplitReports out;
  for (std::size_t k = 0; k < kEvalSplits.size(); ++k) {
    try {
      out[k] = evaluate_subset(subset, z, models, kEvalSplits[k], kind, clip_eps);
    } catch (const Error&) {
      out[k].reset();
    }
  }
  return out;
}

struct SelectionResult {
  std::size_t target_size = 0;
  IndexSet subset;
  std::vector<std::string> subset_ids;  ///< sorted
  std::size_t universe_size = 0;
  double objective_train = 0.0;
  double relaxed_objective = 0.0;
  double final_mass = 0.0;
  std::size_t restart_index = 0;
  std::vector<double> restart_objectives;  ///< NaN for degenerate restarts
  SplitReports reports;
  CorrelationKind kind = CorrelationKind::pearson;
  OptimizerConfig config;
};

struct FitOptions {
  std::size_t jobs = 1;
  CorrelationKind report_kind = CorrelationKind::pearson;
};

/// Restart with the lowest discretized objective; ties go to the lower index.
inline std::optional<std::size_t> pick_best_restart(const std::vector<std::optional<RestartOutcome>>& outcomes) {
  std::optional<std::size_t> best;
  for (std::size_t k = 0; k < outcomes.size(); ++k) {
    if (!outcomes[k]) continue;
    if (!best || outcomes[k]->objective < outcomes[*best]->objective) best = k;
  }
  return best;
}

inline SelectionResult assemble_result(const RestartOutcome& best, const std::vector<std::optional<RestartOutcome>>& all,
                                       const CorrectnessMatrix& z, const ModelTable& models,
                                       const OptimizerConfig& cfg, CorrelationKind kind) {
  SelectionResult res;
  res.target_size = cfg.target_size;
  res.universe_size = z.n_examples();
  res.subset = best.subset;
  res.subset_ids = z.ids_of(res.subset);
  res.objective_train = best.objective;
  res.relaxed_objective = best.relaxed_objective;
  res.final_mass = best.final_mass;
  res.restart_index = best.restart_index;
  for (const auto& o : all) res.restart_objectives.push_back(o ? o->objective : std::nan(""));
  res.reports = evaluate_all_splits(res.subset, z, models, kind, cfg.clip_eps);
  res.kind = kind;
  res.config = cfg;
  return res;
}

/// Train-split selection problem for a split-assigned model table.
inline SelectionProblem make_train_problem(const CorrectnessMatrix& z, const ModelTable& models,
                                           const OptimizerConfig& cfg) {
  if (models.size() != z.n_models()) fail(ErrorKind::DimensionMismatch, "model table not aligned with matrix");
  const auto rows = models.rows_in(Split::train);
  if (rows.size() < 4) fail(ErrorKind::TooFewModels, "train split needs at least 4 models");
  return SelectionProblem(z, rows, models.id_accuracies(rows), cfg.clip_eps, cfg.weight_floor);
}

inline std::optional<RestartOutcome> try_restart(const SelectionProblem& problem, const OptimizerConfig& cfg,
                                                 std::size_t k) {
  try {
    return run_restart(problem, cfg, k);
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::DegenerateVariance || e.kind() == ErrorKind::DegenerateSelection) return std::nullopt;
    throw;
  }
}

/// Runs `restarts` independent Adam trajectories on the train split and keeps
/// the best discretized subset. Reports are computed per split.
inline SelectionResult fit(const CorrectnessMatrix& z, const ModelTable& models, const OptimizerConfig& cfg,
                           const FitOptions& opts = {}) {
  cfg.validate(z.n_examples());
  const auto problem = make_train_problem(z, models, cfg);
  auto outcomes = parallel_map(cfg.restarts, opts.jobs, [&](std::size_t k) { return try_restart(problem, cfg, k); });
  const auto best = pick_best_restart(outcomes);
  if (!best) fail(ErrorKind::OptimizationFailed, "all restarts were degenerate");
  return assemble_result(*outcomes[*best], outcomes, z, models, cfg, opts.report_kind);
}

}  // namespace oodselect
