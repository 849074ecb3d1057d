#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "oodselect/baselines.hpp"
#include "oodselect/core_data.hpp"
#include "oodselect/parallel.hpp"
#include "oodselect/rng.hpp"
#include "oodselect/selector.hpp"

namespace oodselect {

/// A baseline subset with its per-split reports, or the reason it failed.
struct BaselineResult {
  IndexSet subset;
  SplitReports reports;
  std::string error;
};

struct SweepEntry {
  std::size_t target_size = 0;
  std::optional<SelectionResult> oodselect;
  std::string oodselect_error;
  BaselineResult random;
  BaselineResult most_misclassified;
  std::optional<BaselineResult> distance;
};

struct SweepReport {
  std::vector<SweepEntry> entries;  ///< increasing S
  CorrelationKind kind = CorrelationKind::pearson;
};

struct DistanceInputs {
  const EmbeddingTable* ood = nullptr;
  const EmbeddingTable* id = nullptr;
  DistanceMetric metric = DistanceMetric::centroid_euclidean;
};

struct SweepOptions {
  std::size_t jobs = 1;
  CorrelationKind kind = CorrelationKind::pearson;
  std::optional<DistanceInputs> distance;
};

namespace detail {

template <typename Select>
BaselineResult run_baseline(Select&& select, const CorrectnessMatrix& z, const ModelTable& models,
                            CorrelationKind kind, double clip_eps) {
  BaselineResult out;
  try {
    out.subset = select();
    out.reports = evaluate_all_splits(out.subset, z, models, kind, clip_eps);
  } catch (const Error& e) {
    out.error = e.what();
  }
  return out;
}

}  // namespace detail

/// OODSelect plus every baseline at each size. All (size, restart) pairs run as
/// independent jobs; reductions happen in job-key order, so the report does not
/// depend on `jobs`.
inline SweepReport sweep(const CorrectnessMatrix& z, const ModelTable& models, const std::vector<std::size_t>& sizes,
                         const OptimizerConfig& base, const SweepOptions& opts = {}) {
  if (sizes.empty()) fail(ErrorKind::InvalidConfig, "sizes list is empty");
  for (std::size_t k = 0; k < sizes.size(); ++k) {
    if (sizes[k] < 1 || sizes[k] > z.n_examples()) fail(ErrorKind::InvalidConfig, "every size must lie in [1, d]");
    if (k > 0 && sizes[k] <= sizes[k - 1]) fail(ErrorKind::InvalidConfig, "sizes must be strictly increasing");
  }
  {
    auto probe = base;  // target_size is replaced per entry
    probe.target_size = sizes.front();
    probe.validate(z.n_examples());
  }

  const auto problem = make_train_problem(z, models, base);
  const std::size_t restarts = base.restarts;
  auto config_for = [&](std::size_t s) {
    auto cfg = base;
    cfg.target_size = s;
    return cfg;
  };

  using JobResult = std::variant<std::optional<RestartOutcome>, std::string>;
  const auto jobs = parallel_map(sizes.size() * restarts, opts.jobs, [&](std::size_t job) -> JobResult {
    const auto cfg = config_for(sizes[job / restarts]);
    try {
      return try_restart(problem, cfg, job % restarts);
    } catch (const Error& e) {
      return std::string(e.what());
    }
  });

  SweepReport report;
  report.kind = opts.kind;
  for (std::size_t k = 0; k < sizes.size(); ++k) {
    SweepEntry entry;
    entry.target_size = sizes[k];
    const auto cfg = config_for(sizes[k]);

    std::vector<std::optional<RestartOutcome>> outcomes;
    for (std::size_t r = 0; r < restarts; ++r) {
      const auto& job = jobs[k * restarts + r];
      if (const auto* err = std::get_if<std::string>(&job)) {
        if (entry.oodselect_error.empty()) entry.oodselect_error = *err;
        outcomes.emplace_back();
      } else {
        outcomes.push_back(std::get<0>(job));
      }
    }
    if (const auto best = pick_best_restart(outcomes)) {
      entry.oodselect = assemble_result(*outcomes[*best], outcomes, z, models, cfg, opts.kind);
      entry.oodselect_error.clear();
    } else if (entry.oodselect_error.empty()) {
      entry.oodselect_error = "OptimizationFailed: all restarts were degenerate";
    }

    const auto random_seed = substream_seed(base.seed, "sweep/random/" + std::to_string(sizes[k]));
    entry.random = detail::run_baseline([&] { return random_subset(z.n_examples(), sizes[k], random_seed); }, z,
                                        models, opts.kind, base.clip_eps);
    entry.most_misclassified = detail::run_baseline(
        [&] { return most_misclassified(z, models, sizes[k], Split::train); }, z, models, opts.kind, base.clip_eps);
    if (opts.distance) {
      const auto& dist = *opts.distance;
      entry.distance = detail::run_baseline(
          [&] {
            const auto rows = farthest_from_id(*dist.ood, *dist.id, sizes[k], dist.metric);
            return embedding_rows_to_columns(*dist.ood, rows, z);
          },
          z, models, opts.kind, base.clip_eps);
    }
    report.entries.push_back(std::move(entry));
  }
  return report;
}

/// Largest S whose validation-split correlation is at or below `threshold`.
inline std::optional<std::size_t> recommend_size(const SweepReport& report, double threshold = -kRegimeThreshold) {
  std::optional<std::size_t> best;
  for (const auto& e : report.entries) {
    if (!e.oodselect) continue;
    const auto& val = e.oodselect->reports[1];
    if (val && val->r <= threshold && (!best || e.target_size > *best)) best = e.target_size;
  }
  return best;
}

}  // namespace oodselect
