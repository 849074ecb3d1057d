#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "oodselect/io.hpp"
#include "oodselect/selector.hpp"
#include "oodselect/stats.hpp"
#include "oodselect/sweep.hpp"
#include "oodselect/synth.hpp"

namespace oodselect {

using nlohmann::json;

inline json to_json(const CorrelationReport& r) {
  return {{"kind", to_string(r.kind)},
          {"r", r.r},
          {"n", r.n},
          {"ci", {r.ci_low, r.ci_high}},
          {"regime", to_string(r.regime)}};
}

inline json to_json(const SplitReports& reports) {
  json out = json::object();
  for (std::size_t k = 0; k < kEvalSplits.size(); ++k)
    out[std::string(to_string(kEvalSplits[k]))] = reports[k] ? to_json(*reports[k]) : json(nullptr);
  return out;
}

inline json to_json(const OptimizerConfig& c) {
  return {{"target_size", c.target_size}, {"steps", c.steps},       {"lr0", c.lr0},
          {"lambda0", c.lambda0},         {"lambda_max", c.lambda_max}, {"restarts", c.restarts},
          {"seed", c.seed},               {"clip_eps", c.clip_eps}, {"init_scale", c.init_scale}, {"checkpoint_every", c.checkpoint_every},
          {"weight_floor", c.weight_floor}, {"beta1", c.beta1},     {"beta2", c.beta2},
          {"adam_eps", c.adam_eps}};
}

inline json to_json(const SelectionResult& r) {
  json restarts = json::array();
  for (double v : r.restart_objectives) restarts.push_back(std::isnan(v) ? json(nullptr) : json(v));
  return {{"S", r.target_size},
          {"universe_size", r.universe_size},
          {"subset", r.subset_ids},
          {"objective_train", r.objective_train},
          {"relaxed_objective", r.relaxed_objective},
          {"final_mass", r.final_mass},
          {"restart_index", r.restart_index},
          {"restart_objectives", restarts},
          {"restart_rule", "lowest discretized train objective"},
          {"reports", to_json(r.reports)},
          {"optimizer", to_json(r.config)}};
}

inline json to_json(const BaselineResult& b, const CorrectnessMatrix& z) {
  if (!b.error.empty()) return {{"error", b.error}};
  return {{"subset", z.ids_of(b.subset)}, {"reports", to_json(b.reports)}};
}

inline json to_json(const SweepReport& report, const CorrectnessMatrix& z, double threshold) {
  json entries = json::array();
  for (const auto& e : report.entries) {
    json entry = {{"S", e.target_size}};
    entry["oodselect"] = e.oodselect ? to_json(*e.oodselect) : json{{"error", e.oodselect_error}};
    entry["random"] = to_json(e.random, z);
    entry["most_misclassified"] = to_json(e.most_misclassified, z);
    if (e.distance) entry["distance"] = to_json(*e.distance, z);
    entries.push_back(std::move(entry));
  }
  const auto rec = recommend_size(report, threshold);
  return {{"entries", entries},
          {"recommendation", {{"threshold", threshold},
                              {"rule", "largest S with validation r <= threshold"},
                              {"S", rec ? json(*rec) : json(nullptr)}}}};
}

/// Flat plotting table: one row per (S, method, split) with a report.
inline std::string sweep_csv(const SweepReport& report) {
  std::string out = "S,method,split,r,ci_low,ci_high,regime\n";
  auto emit = [&](std::size_t s, std::string_view method, const SplitReports& reports) {
    for (std::size_t k = 0; k < kEvalSplits.size(); ++k) {
      if (!reports[k]) continue;
      const auto& r = *reports[k];
      out += std::to_string(s) + ',' + std::string(method) + ',' + std::string(to_string(kEvalSplits[k])) + ',' +
             csv::format_double(r.r) + ',' + csv::format_double(r.ci_low) + ',' + csv::format_double(r.ci_high) +
             ',' + std::string(to_string(r.regime)) + '\n';
    }
  };
  for (const auto& e : report.entries) {
    if (e.oodselect) emit(e.target_size, "oodselect", e.oodselect->reports);
    if (e.random.error.empty()) emit(e.target_size, "random", e.random.reports);
    if (e.most_misclassified.error.empty()) emit(e.target_size, "most_misclassified", e.most_misclassified.reports);
    if (e.distance && e.distance->error.empty()) emit(e.target_size, "distance", e.distance->reports);
  }
  return out;
}

inline json to_json(const LineFit& f) { return {{"a", f.a}, {"b", f.b}, {"eps_max", f.eps_max}}; }

inline json to_json(const PrevalenceShift& s) {
  return {{"category", s.category},
          {"subset_prevalence", s.subset_prevalence},
          {"full_prevalence", s.full_prevalence},
          {"delta", s.delta},
          {"ci", {s.ci.low, s.ci.high}},
          {"p", s.p}};
}

inline json to_json(const DecayProbe& p) {
  json pts = json::array();
  for (const auto& pt : p.points)
    pts.push_back({{"size", pt.size}, {"max_abs_delta_r", pt.max_abs_delta}, {"median_abs_delta_r", pt.median_abs_delta}});
  return {{"kind", to_string(p.kind)}, {"points", pts}, {"slope", p.slope}};
}

inline json to_json(const NonSubmodularityWitness& w) {
  const auto& v = w.violation;
  return {{"triples_sampled", w.triples_sampled},
          {"smaller", w.z.ids_of(v.smaller)},
          {"larger", w.z.ids_of(v.larger)},
          {"added", w.z.example_ids()[v.added]},
          {"gain_smaller", v.gain_smaller},
          {"gain_larger", v.gain_larger}};
}

inline json to_json(const LipschitzProbe& p) {
  return {{"pairs_checked", p.pairs_checked}, {"pairs_skipped", p.pairs_skipped}, {"violations", p.violations},
          {"max_ratio", p.max_ratio},         {"max_bound", p.max_bound}};
}

inline json to_json(const StabilityResult& r) {
  return {{"n", r.n}, {"converged", r.converged}, {"non_converged", r.non_converged}, {"per_ordering", r.per_ordering}};
}

inline json to_json(const NormalizedJaccard& j) {
  return {{"normalized", j.value}, {"mean_jaccard", j.mean}, {"j_min", j.j_min}, {"j_max", j.j_max}};
}

/// Subset ids from a selection JSON written by `to_json(SelectionResult)`.
struct SelectionFile {
  std::size_t target_size = 0;
  std::size_t universe_size = 0;
  std::vector<std::string> subset;
};

inline SelectionFile parse_selection(const json& j) {
  try {
    SelectionFile f;
    const auto& body = j.contains("result") ? j.at("result") : j;
    f.subset = body.at("subset").get<std::vector<std::string>>();
    f.target_size = body.value("S", f.subset.size());
    f.universe_size = body.value("universe_size", std::size_t{0});
    return f;
  } catch (const json::exception& e) {
    fail(ErrorKind::Parse, std::string("selection file: ") + e.what());
  }
}

}  // namespace oodselect
