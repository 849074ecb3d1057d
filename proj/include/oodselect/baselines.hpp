#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numeric>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "oodselect/core_data.hpp"
#include "oodselect/error.hpp"
#include "oodselect/rng.hpp"
#include "oodselect/stats.hpp"

namespace oodselect {

enum class BaselineKind { random, most_misclassified, farthest_embedding };
enum class DistanceMetric { centroid_euclidean, max_min_greedy };

constexpr std::string_view to_string(BaselineKind k) {
  switch (k) {
    case BaselineKind::random: return "random";
    case BaselineKind::most_misclassified: return "most_misclassified";
    case BaselineKind::farthest_embedding: return "distance";
  }
  return "random";
}

constexpr std::string_view to_string(DistanceMetric m) {
  return m == DistanceMetric::centroid_euclidean ? "centroid_euclidean" : "max_min_greedy";
}

inline DistanceMetric parse_distance_metric(std::string_view s) {
  if (s == "centroid_euclidean" || s == "centroid") return DistanceMetric::centroid_euclidean;
  if (s == "max_min_greedy" || s == "maxmin") return DistanceMetric::max_min_greedy;
  fail(ErrorKind::InvalidConfig, "unknown distance metric '" + std::string(s) + "'");
}

/// Uniform size-S subset of [0, d) without replacement, sorted.
inline IndexSet random_subset(std::size_t d, std::size_t target_size, std::uint64_t seed) {
  if (target_size > d) fail(ErrorKind::InvalidArgument, "S exceeds d");
  auto rng = substream(seed, "baseline/random");
  return detail::random_subset_indices(d, target_size, rng);
}

/// Top-S examples by number of `split` models that get them wrong. Ties go
/// to the lexicographically smaller example id.
inline IndexSet most_misclassified(const CorrectnessMatrix& z, const ModelTable& models, std::size_t target_size,
                                   Split split = Split::train) {
  if (target_size > z.n_examples()) fail(ErrorKind::InvalidArgument, "S exceeds d");
  if (models.size() != z.n_models()) fail(ErrorKind::DimensionMismatch, "model table not aligned with matrix");
  const auto rows = models.rows_in(split);
  if (rows.empty()) fail(ErrorKind::TooFewModels, "split '" + std::string(to_string(split)) + "' has no models");

  std::vector<std::size_t> correct(z.n_examples(), 0);
  for (auto i : rows) {
    const auto words = z.bits().row(i);
    for (std::size_t k = 0; k < words.size(); ++k)
      for (std::uint64_t bits = words[k]; bits != 0; bits &= bits - 1)
        ++correct[k * 64 + static_cast<std::size_t>(std::countr_zero(bits))];
  }
  const auto ranks = z.lex_ranks();
  IndexSet order(z.n_examples());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(target_size), order.end(),
                    [&](std::size_t a, std::size_t b) {
                      return correct[a] != correct[b] ? correct[a] < correct[b] : ranks[a] < ranks[b];
                    });
  order.resize(target_size);
  std::sort(order.begin(), order.end());
  return order;
}

namespace detail {

inline double squared_distance(std::span<const double> a, std::span<const double> b) {
  double acc = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) acc += (a[k] - b[k]) * (a[k] - b[k]);
  return acc;
}

inline std::vector<std::size_t> lex_ranks_of(const std::vector<std::string>& ids) {
  std::vector<std::size_t> order(ids.size()), rank(ids.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return ids[a] < ids[b]; });
  for (std::size_t r = 0; r < order.size(); ++r) rank[order[r]] = r;
  return rank;
}

inline void check_embeddings(const EmbeddingTable& ood, const EmbeddingTable& id, std::size_t target_size) {
  ood.validate();
  id.validate();
  if (ood.dim != id.dim) fail(ErrorKind::DimensionMismatch, "OOD and ID embeddings differ in dimension");
  if (id.vectors.empty()) fail(ErrorKind::InvalidArgument, "ID embedding table is empty");
  if (target_size > ood.vectors.size()) fail(ErrorKind::InvalidArgument, "S exceeds number of OOD embeddings");
}

}  // namespace detail

/// Greedy max-min selection: each step adds the remaining OOD row whose
/// nearest ID vector is farthest away. Returns rows of `ood` in selection
/// order; ties go to the smaller id.
inline std::vector<std::size_t> max_min_greedy_order(const EmbeddingTable& ood, const EmbeddingTable& id,
                                                     std::size_t target_size) {
  detail::check_embeddings(ood, id, target_size);
  const auto ranks = detail::lex_ranks_of(ood.ids);
  const std::size_t n = ood.vectors.size();
  std::vector<double> nearest(n, std::numeric_limits<double>::infinity());
  for (std::size_t j = 0; j < n; ++j)
    for (const auto& v : id.vectors) nearest[j] = std::min(nearest[j], detail::squared_distance(ood.vectors[j], v));

  std::vector<bool> taken(n, false);
  std::vector<std::size_t> order;
  order.reserve(target_size);
  while (order.size() < target_size) {
    std::size_t best = n;
    for (std::size_t j = 0; j < n; ++j) {
      if (taken[j]) continue;
      if (best == n || nearest[j] > nearest[best] || (nearest[j] == nearest[best] && ranks[j] < ranks[best])) best = j;
    }
    taken[best] = true;
    order.push_back(best);
  }
  return order;
}

/// Rows of `ood` (sorted) for the S OOD embeddings farthest from the ID set.
inline IndexSet farthest_from_id(const EmbeddingTable& ood, const EmbeddingTable& id, std::size_t target_size,
                                 DistanceMetric metric = DistanceMetric::centroid_euclidean) {
  if (metric == DistanceMetric::max_min_greedy) {
    auto order = max_min_greedy_order(ood, id, target_size);
    std::sort(order.begin(), order.end());
    return order;
  }
  detail::check_embeddings(ood, id, target_size);
  const auto ranks = detail::lex_ranks_of(ood.ids);
  const std::size_t n = ood.vectors.size();
  std::vector<double> centroid(id.dim, 0.0);
  for (const auto& v : id.vectors)
    for (std::size_t k = 0; k < id.dim; ++k) centroid[k] += v[k];
  for (auto& c : centroid) c /= static_cast<double>(id.vectors.size());
  std::vector<double> score(n);
  for (std::size_t j = 0; j < n; ++j) score[j] = detail::squared_distance(ood.vectors[j], centroid);

  IndexSet order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(target_size), order.end(),
                    [&](std::size_t a, std::size_t b) { return score[a] != score[b] ? score[a] > score[b] : ranks[a] < ranks[b]; });
  order.resize(target_size);
  std::sort(order.begin(), order.end());
  return order;
}

/// Maps embedding-table rows to correctness-matrix columns by id.
inline IndexSet embedding_rows_to_columns(const EmbeddingTable& ood, std::span<const std::size_t> rows,
                                          const CorrectnessMatrix& z) {
  std::vector<std::string> ids;
  ids.reserve(rows.size());
  for (auto r : rows) ids.push_back(ood.ids[r]);
  return z.columns_of(ids);
}

}  // namespace oodselect
