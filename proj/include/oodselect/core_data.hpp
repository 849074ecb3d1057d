#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <map>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "oodselect/bit_matrix.hpp"
#include "oodselect/error.hpp"
#include "oodselect/probit.hpp"
#include "oodselect/rng.hpp"

namespace oodselect {

inline constexpr double kDefaultWeightFloor = 1e-6;

/// Column indices into a CorrectnessMatrix, kept sorted ascending.
using IndexSet = std::vector<std::size_t>;

namespace detail {

inline std::unordered_map<std::string, std::size_t> index_ids(const std::vector<std::string>& ids, ErrorKind dup_kind,
                                                              std::string_view what) {
  std::unordered_map<std::string, std::size_t> index;
  index.reserve(ids.size());
  for (std::size_t k = 0; k < ids.size(); ++k) {
    if (!index.emplace(ids[k], k).second) fail(dup_kind, std::string(what) + " '" + ids[k] + "' appears twice");
  }
  return index;
}

}  // namespace detail

/// N x d binary matrix: entry (i, j) is 1 iff model i classifies OOD example j correctly.
class CorrectnessMatrix {
 public:
  CorrectnessMatrix() = default;

  CorrectnessMatrix(BitMatrix z, std::vector<std::string> model_ids, std::vector<std::string> example_ids)
      : z_(std::move(z)), model_ids_(std::move(model_ids)), example_ids_(std::move(example_ids)) {
    if (z_.rows() == 0 || z_.cols() == 0) fail(ErrorKind::EmptyMatrix, "correctness matrix has no rows or columns");
    if (model_ids_.size() != z_.rows() || example_ids_.size() != z_.cols())
      fail(ErrorKind::DimensionMismatch, "id lists do not match matrix dimensions");
    model_index_ = detail::index_ids(model_ids_, ErrorKind::DuplicateModelId, "model id");
    example_index_ = detail::index_ids(example_ids_, ErrorKind::DuplicateExampleId, "example id");
    lex_order_.resize(example_ids_.size());
    std::iota(lex_order_.begin(), lex_order_.end(), std::size_t{0});
    std::sort(lex_order_.begin(), lex_order_.end(),
              [&](std::size_t a, std::size_t b) { return example_ids_[a] < example_ids_[b]; });
    lex_rank_.resize(lex_order_.size());
    for (std::size_t r = 0; r < lex_order_.size(); ++r) lex_rank_[lex_order_[r]] = r;
  }

  /// Builds from a row-major 0/1 table; any other cell value is rejected.
  static CorrectnessMatrix from_rows(const std::vector<std::vector<int>>& rows, std::vector<std::string> model_ids,
                                     std::vector<std::string> example_ids) {
    if (rows.empty()) fail(ErrorKind::EmptyMatrix, "no rows");
    BitMatrix z(rows.size(), rows.front().size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
      if (rows[i].size() != z.cols()) fail(ErrorKind::RaggedRow, "row " + std::to_string(i) + " has wrong length");
      for (std::size_t j = 0; j < z.cols(); ++j) {
        const int v = rows[i][j];
        if (v != 0 && v != 1)
          fail(ErrorKind::NonBinaryCell, "row=" + (i < model_ids.size() ? model_ids[i] : std::to_string(i)) +
                                             " col=" + (j < example_ids.size() ? example_ids[j] : std::to_string(j)));
        z.set(i, j, v == 1);
      }
    }
    return {std::move(z), std::move(model_ids), std::move(example_ids)};
  }

  [[nodiscard]] std::size_t n_models() const noexcept { return z_.rows(); }
  [[nodiscard]] std::size_t n_examples() const noexcept { return z_.cols(); }
  [[nodiscard]] const BitMatrix& bits() const noexcept { return z_; }
  [[nodiscard]] bool operator()(std::size_t i, std::size_t j) const noexcept { return z_.get(i, j); }
  [[nodiscard]] const std::vector<std::string>& model_ids() const noexcept { return model_ids_; }
  [[nodiscard]] const std::vector<std::string>& example_ids() const noexcept { return example_ids_; }

  [[nodiscard]] std::optional<std::size_t> find_model(const std::string& id) const {
    auto it = model_index_.find(id);
    return it == model_index_.end() ? std::nullopt : std::optional(it->second);
  }
  [[nodiscard]] std::optional<std::size_t> find_example(const std::string& id) const {
    auto it = example_index_.find(id);
    return it == example_index_.end() ? std::nullopt : std::optional(it->second);
  }

  /// Position of column j in ascending lexicographic order of example ids.
  [[nodiscard]] std::size_t lex_rank(std::size_t j) const noexcept { return lex_rank_[j]; }
  [[nodiscard]] std::span<const std::size_t> lex_ranks() const noexcept { return lex_rank_; }

  /// Columns for a list of example ids; unknown ids raise UnknownId.
  [[nodiscard]] IndexSet columns_of(const std::vector<std::string>& ids) const {
    IndexSet cols;
    cols.reserve(ids.size());
    for (const auto& id : ids) {
      auto j = find_example(id);
      if (!j) fail(ErrorKind::UnknownId, "example id '" + id + "' not in correctness matrix");
      cols.push_back(*j);
    }
    std::sort(cols.begin(), cols.end());
    cols.erase(std::unique(cols.begin(), cols.end()), cols.end());
    return cols;
  }

  /// Example ids of a column set, sorted lexicographically.
  [[nodiscard]] std::vector<std::string> ids_of(std::span<const std::size_t> cols) const {
    std::vector<std::string> ids;
    ids.reserve(cols.size());
    for (auto j : cols) ids.push_back(example_ids_[j]);
    std::sort(ids.begin(), ids.end());
    return ids;
  }

 private:
  BitMatrix z_;
  std::vector<std::string> model_ids_;
  std::vector<std::string> example_ids_;
  std::unordered_map<std::string, std::size_t> model_index_;
  std::unordered_map<std::string, std::size_t> example_index_;
  std::vector<std::size_t> lex_order_;
  std::vector<std::size_t> lex_rank_;
};

enum class Split { train, val, test, unassigned };

constexpr std::string_view to_string(Split s) {
  switch (s) {
    case Split::train: return "train";
    case Split::val: return "val";
    case Split::test: return "test";
    case Split::unassigned: return "unassigned";
  }
  return "unassigned";
}

inline Split parse_split(std::string_view s) {
  if (s == "train") return Split::train;
  if (s == "val") return Split::val;
  if (s == "test") return Split::test;
  if (s.empty() || s == "unassigned") return Split::unassigned;
  fail(ErrorKind::Parse, "unknown split '" + std::string(s) + "'");
}

struct ModelRecord {
  std::string model_id;
  double id_accuracy = 0.5;
  std::string family;
  Split split = Split::unassigned;
};

/// Model records aligned row-for-row with a CorrectnessMatrix once `align` has run.
struct ModelTable {
  std::vector<ModelRecord> records;

  [[nodiscard]] std::size_t size() const noexcept { return records.size(); }

  [[nodiscard]] std::vector<std::size_t> rows_in(Split split) const {
    std::vector<std::size_t> rows;
    for (std::size_t i = 0; i < records.size(); ++i)
      if (records[i].split == split) rows.push_back(i);
    return rows;
  }

  [[nodiscard]] std::vector<double> id_accuracies(std::span<const std::size_t> rows) const {
    std::vector<double> acc;
    acc.reserve(rows.size());
    for (auto r : rows) acc.push_back(records[r].id_accuracy);
    return acc;
  }

  [[nodiscard]] std::vector<double> id_accuracies() const {
    std::vector<double> acc;
    acc.reserve(records.size());
    for (const auto& m : records) acc.push_back(m.id_accuracy);
    return acc;
  }

  /// Reorders records to match the matrix row order. Every matrix model must be present.
  [[nodiscard]] ModelTable align(const CorrectnessMatrix& z) const {
    std::unordered_map<std::string, const ModelRecord*> by_id;
    for (const auto& m : records)
      if (!by_id.emplace(m.model_id, &m).second) fail(ErrorKind::DuplicateModelId, m.model_id);
    ModelTable out;
    out.records.reserve(z.n_models());
    for (const auto& id : z.model_ids()) {
      auto it = by_id.find(id);
      if (it == by_id.end()) fail(ErrorKind::UnknownId, "model '" + id + "' has no metadata record");
      out.records.push_back(*it->second);
    }
    return out;
  }
};

struct ExampleMeta {
  std::string example_id;
  std::optional<std::string> label;
  std::map<std::string, std::string> attributes;
};

struct EmbeddingTable {
  std::vector<std::string> ids;
  std::size_t dim = 0;
  std::vector<std::vector<double>> vectors;

  void validate() const {
    if (ids.size() != vectors.size()) fail(ErrorKind::DimensionMismatch, "embedding ids and vectors differ in count");
    for (const auto& v : vectors) {
      if (v.size() != dim) fail(ErrorKind::DimensionMismatch, "embedding vector of wrong length");
      for (double x : v)
        if (!std::isfinite(x)) fail(ErrorKind::Parse, "non-finite embedding value");
    }
  }
};

/// Weighted accuracy per model: out[i] = sum_j z[i][j] s[j] / ||s||_1.
/// Restricted to `rows` when given, otherwise all models in matrix order.
inline std::vector<double> selected_ood_accuracy(const CorrectnessMatrix& z, std::span<const double> s,
                                                 std::span<const std::size_t> rows = {},
                                                 double weight_floor = kDefaultWeightFloor) {
  if (s.size() != z.n_examples()) fail(ErrorKind::DimensionMismatch, "weight vector length differs from d");
  double mass = 0.0;
  for (double w : s) {
    if (!(w >= 0.0 && w <= 1.0)) fail(ErrorKind::InvalidArgument, "weights must lie in [0,1]");
    mass += w;
  }
  if (mass < weight_floor) fail(ErrorKind::DegenerateSelection, "||s||_1 below weight floor");

  const std::size_t n = rows.empty() ? z.n_models() : rows.size();
  std::vector<double> out(n);
  for (std::size_t k = 0; k < n; ++k) {
    const std::size_t i = rows.empty() ? k : rows[k];
    out[k] = std::clamp(z.bits().row_dot(i, s) / mass, 0.0, 1.0);
  }
  return out;
}

/// Unweighted accuracy of each listed model over a nonempty column subset.
inline std::vector<double> subset_accuracy(const CorrectnessMatrix& z, std::span<const std::size_t> cols,
                                           std::span<const std::size_t> rows) {
  if (cols.empty()) fail(ErrorKind::DegenerateSelection, "empty subset");
  const auto mask = make_column_mask(z.n_examples(), cols);
  std::vector<double> out(rows.size());
  const double size = static_cast<double>(cols.size());
  for (std::size_t k = 0; k < rows.size(); ++k)
    out[k] = static_cast<double>(z.bits().masked_popcount(rows[k], mask)) / size;
  return out;
}

inline std::vector<double> probit_all(std::span<const double> p, double eps) {
  std::vector<double> out;
  out.reserve(p.size());
  for (double v : p) out.push_back(probit(v, eps));
  return out;
}

enum class SplitMode { random, family_disjoint };

inline SplitMode parse_split_mode(std::string_view s) {
  if (s == "random") return SplitMode::random;
  if (s == "family_disjoint" || s == "family-disjoint") return SplitMode::family_disjoint;
  fail(ErrorKind::InvalidConfig, "unknown split mode '" + std::string(s) + "'");
}

constexpr std::string_view to_string(SplitMode m) {
  return m == SplitMode::random ? "random" : "family_disjoint";
}

struct SplitRatios {
  double train = 0.6;
  double val = 0.2;
  double test = 0.2;
};

namespace detail {

/// Largest-remainder apportionment of n items over the three ratios.
inline std::array<std::size_t, 3> quotas(std::size_t n, const SplitRatios& r) {
  const std::array<double, 3> share{r.train * n, r.val * n, r.test * n};
  std::array<std::size_t, 3> q{};
  std::size_t used = 0;
  for (int k = 0; k < 3; ++k) {
    q[k] = static_cast<std::size_t>(std::floor(share[k]));
    used += q[k];
  }
  std::array<int, 3> order{0, 1, 2};
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    return share[a] - std::floor(share[a]) > share[b] - std::floor(share[b]);
  });
  for (int k = 0; used < n; ++k, ++used) ++q[order[k % 3]];
  return q;
}

}  // namespace detail

/// Assigns train/val/test. Random mode shuffles and fills quotas; family-disjoint
/// mode places whole families, largest first, into the split furthest below its target.
inline ModelTable split_models(ModelTable models, SplitMode mode, SplitRatios ratios, std::uint64_t seed) {
  if (!(ratios.train > 0 && ratios.val > 0 && ratios.test > 0) ||
      std::abs(ratios.train + ratios.val + ratios.test - 1.0) > 1e-9)
    fail(ErrorKind::InvalidConfig, "split ratios must be positive and sum to 1");
  constexpr std::array<Split, 3> kSplits{Split::train, Split::val, Split::test};
  const std::size_t n = models.size();

  if (mode == SplitMode::random) {
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    auto rng = substream(seed, "split/random");
    std::shuffle(order.begin(), order.end(), rng);
    const auto q = detail::quotas(n, ratios);
    std::size_t pos = 0;
    for (int k = 0; k < 3; ++k)
      for (std::size_t c = 0; c < q[k]; ++c) models.records[order[pos++]].split = kSplits[k];
    return models;
  }

  std::map<std::string, std::vector<std::size_t>> families;
  for (std::size_t i = 0; i < n; ++i) families[models.records[i].family].push_back(i);
  if (families.size() < 3)
    fail(ErrorKind::InsufficientFamilies, "family-disjoint split needs at least 3 families, got " +
                                              std::to_string(families.size()));

  std::vector<const std::pair<const std::string, std::vector<std::size_t>>*> order;
  for (const auto& f : families) order.push_back(&f);
  auto rng = substream(seed, "split/family");
  std::shuffle(order.begin(), order.end(), rng);
  std::stable_sort(order.begin(), order.end(),
                   [](auto* a, auto* b) { return a->second.size() > b->second.size(); });

  const std::array<double, 3> target{ratios.train * n, ratios.val * n, ratios.test * n};
  std::array<double, 3> assigned{};
  std::array<std::size_t, 3> n_families{};
  std::size_t remaining = order.size();
  for (auto* family : order) {
    std::size_t empty = 0;
    for (auto c : n_families) empty += (c == 0);
    const bool must_fill = remaining <= empty;
    int best = -1;
    for (int k = 0; k < 3; ++k) {
      if (must_fill && n_families[k] != 0) continue;
      if (best < 0 || target[k] - assigned[k] > target[best] - assigned[best]) best = k;
    }
    for (auto i : family->second) models.records[i].split = kSplits[best];
    assigned[best] += static_cast<double>(family->second.size());
    ++n_families[best];
    --remaining;
  }
  return models;
}

}  // namespace oodselect
