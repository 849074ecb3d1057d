// Acceptance checks: one PASS/FAIL line per criterion, nonzero exit on any FAIL.

#include <chrono>
#include <cstdio>
#include <fstream>
#include <functional>
#include <iostream>
#include <set>
#include <sstream>

#include "cli_app.hpp"
#include "test_support.hpp"

using namespace oodselect;
using namespace oodselect::testing;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::vector<std::size_t> iota_n(std::size_t n) {
  std::vector<std::size_t> v(n);
  std::iota(v.begin(), v.end(), std::size_t{0});
  return v;
}

struct Outcome {
  bool pass;
  std::string detail;
};

std::string fmt(double v, int digits = 4) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(digits) << v;
  return os.str();
}

Outcome planted_recovery() {
  PlantedSpec spec;
  spec.seed = 7;
  const auto inst = generate_planted(spec);
  const auto models = split_models(inst.models, SplitMode::random, {}, 7);
  const auto all = iota_n(models.size());
  const double full_r = pearson(probit_all(models.id_accuracies(), kDefaultClipEps),
                                probit_all(subset_accuracy(inst.z, iota_n(inst.z.n_examples()), all), kDefaultClipEps));
  OptimizerConfig cfg;
  cfg.target_size = 500;
  cfg.restarts = 8;
  cfg.steps = 2000;
  cfg.seed = 7;
  const auto t0 = Clock::now();
  const auto res = fit(inst.z, models, cfg);
  const double secs = seconds_since(t0);
  const double test_r = res.reports[2]->r;
  const double jac = jaccard(res.subset, inst.truth.inverted);
  return {full_r >= 0.7 && test_r <= -0.5 && jac >= 0.7 && secs <= 300.0,
          "full_r=" + fmt(full_r) + " test_r=" + fmt(test_r) + " jaccard=" + fmt(jac) + " runtime_s=" + fmt(secs, 1)};
}

Outcome oracle_optimality() {
  int ok = 0;
  double worst = 0.0;
  for (std::uint64_t k = 0; k < 20; ++k) {
    PlantedSpec spec;
    spec.n_models = 30;
    spec.n_aligned = 8;
    spec.n_inverted = 4;
    spec.n_noise = 3;
    spec.seed = 1000 + k;
    const auto inst = generate_planted(spec);
    const auto models = split_models(inst.models, SplitMode::random, {}, spec.seed);
    OptimizerConfig cfg;
    cfg.target_size = 5;
    cfg.restarts = 10;
    cfg.seed = spec.seed;
    const auto res = fit(inst.z, models, cfg);
    const auto rows = models.rows_in(Split::train);
    const auto bf = brute_force_best_subset(inst.z, models.id_accuracies(rows), 5, rows);
    const double gap = res.objective_train - bf.objective;
    ok += gap <= 0.05;
    worst = std::max(worst, gap);
  }
  return {ok >= 18, "within_0.05=" + std::to_string(ok) + "/20 worst_gap=" + fmt(worst)};
}

Outcome gradient_correctness() {
  std::mt19937_64 rng(2024);
  std::normal_distribution<double> g(0.0, 1.5);
  std::uniform_real_distribution<double> lam(0.0, 5.0), unit(0.3, 0.9);
  int checked = 0, skipped = 0;
  double worst = 0.0;
  for (std::uint64_t inst = 0; checked < 100; ++inst) {
    const auto z = random_matrix(20, 50, 500 + inst);
    std::vector<double> acc(20);
    for (auto& a : acc) a = unit(rng);
    const auto rows = iota_n(20);
    const SelectionProblem p(z, rows, acc);
    for (int t = 0; t < 10 && checked < 100; ++t) {
      std::vector<double> theta(50);
      for (auto& v : theta) v = g(rng);
      const auto c = check_gradient(p, theta, 10.0 + 30.0 * (t / 10.0), lam(rng), z, rows);
      if (c.near_clip) {
        ++skipped;
        continue;
      }
      ++checked;
      worst = std::max(worst, c.max_rel_error);
    }
  }
  return {worst < 1e-5, "points=" + std::to_string(checked) + " skipped_near_clip=" + std::to_string(skipped) +
                            " max_rel_error=" + [&] {
                              std::ostringstream os;
                              os << std::scientific << std::setprecision(2) << worst;
                              return os.str();
                            }()};
}

Outcome baseline_behavior() {
  PlantedSpec spec;
  spec.seed = 7;
  const auto inst = generate_planted(spec);
  const auto models = split_models(inst.models, SplitMode::random, {}, 7);
  const auto full = evaluate_subset(iota_n(inst.z.n_examples()), inst.z, models, Split::test);
  bool random_ok = true;
  std::string detail = "full_test_ci=[" + fmt(full.ci_low) + "," + fmt(full.ci_high) + "]";
  for (std::size_t s : {100u, 500u, 1000u}) {
    int inside = 0;
    for (std::uint64_t t = 0; t < 100; ++t) {
      const auto r = evaluate_subset(random_subset(inst.z.n_examples(), s, substream_seed(7, "acc4/" + std::to_string(s) + "/" + std::to_string(t))),
                                     inst.z, models, Split::test).r;
      inside += r >= full.ci_low && r <= full.ci_high;
    }
    random_ok &= inside >= 90;
    detail += " random_S" + std::to_string(s) + "_inside=" + std::to_string(inside) + "/100";
  }

  PlantedSpec noisy;
  noisy.n_aligned = 100;
  noisy.n_inverted = 100;
  noisy.n_noise = 1800;
  noisy.seed = 1;
  const auto ninst = generate_planted(noisy);
  const auto nmodels = split_models(ninst.models, SplitMode::random, {}, 1);
  bool mm_ok = true;
  for (std::size_t s : {100u, 500u, 1000u}) {
    const double r = evaluate_subset(most_misclassified(ninst.z, nmodels, s), ninst.z, nmodels, Split::test).r;
    mm_ok &= std::abs(r) < 0.3;
    detail += " most_misclassified_S" + std::to_string(s) + "_test_r=" + fmt(r);
  }
  return {random_ok && mm_ok, detail};
}

Outcome fisher() {
  const double zq = 1.959963984540054;
  const double oracle = std::tanh(zq / std::sqrt(100.0));
  const auto iv = fisher_interval(0.0, 103, 0.95);
  bool ok = std::abs(iv.low + oracle) <= 1e-3 && std::abs(iv.high - oracle) <= 1e-3 &&
            std::abs(iv.high - 0.1935) <= 1e-3 && std::abs(iv.low + 0.1935) <= 1e-3;
  double prev = 3.0;
  std::string widths;
  for (std::size_t n : {28u, 53u, 103u, 403u}) {
    const auto w = fisher_interval(0.3, n);
    const double width = w.high - w.low;
    ok &= width < prev;
    prev = width;
    widths += (widths.empty() ? "" : ",") + fmt(width);
  }
  return {ok, "interval=(" + fmt(iv.low) + "," + fmt(iv.high) + ") oracle=" + fmt(oracle) + " widths=" + widths};
}

Outcome jaccard_normalization() {
  const std::size_t universe = 2000;
  std::vector<std::vector<std::size_t>> nested;
  for (std::size_t s : {50u, 100u, 200u, 400u}) nested.push_back(iota_n(s));
  const auto nj = normalized_jaccard_sequence(nested, universe, 200, 11);
  bool ok = nj.value == 1.0;
  double worst = 0.0;
  for (std::uint64_t k = 0; k < 5; ++k) {
    auto rng = substream(11, "acc6/" + std::to_string(k));
    std::vector<std::vector<std::size_t>> seq;
    for (std::size_t s : {50u, 100u, 200u, 400u}) seq.push_back(detail::random_subset_indices(universe, s, rng));
    worst = std::max(worst, std::abs(normalized_jaccard_sequence(seq, universe, 200, 11).value));
  }
  ok &= worst < 0.1;
  return {ok, "nested=" + fmt(nj.value, 6) + " max_abs_random=" + fmt(worst)};
}

Outcome lemma_decay() {
  const auto t0 = Clock::now();
  const std::vector<std::size_t> sizes{16, 32, 64, 128, 256, 512};
  bool ok = true;
  std::string detail;
  for (auto kind : {DecayKind::new_model, DecayKind::new_example}) {
    const auto p = lemma_decay_probe(kind, sizes, 200, 7);
    ok &= p.slope >= -1.3 && p.slope <= -0.7;
    detail += std::string(to_string(kind)) + "_slope=" + fmt(p.slope) + " ";
  }
  const double secs = seconds_since(t0);
  ok &= secs <= 120.0;
  return {ok, detail + "runtime_s=" + fmt(secs, 1)};
}

Outcome nonsubmodularity() {
  const auto w = nonsubmodularity_witness(12, 8, 100000, 7);
  if (!w) return {false, "no witness within 100000 triples"};
  const auto& v = w->violation;
  return {v.gain_smaller < v.gain_larger, "triples=" + std::to_string(w->triples_sampled) + " gain_smaller=" +
                                              fmt(v.gain_smaller) + " gain_larger=" + fmt(v.gain_larger)};
}

Outcome determinism() {
  TempDir dir("acceptance");
  std::ostringstream out, err;
  const auto d = dir.path().string();
  if (cli::run({"synth", "--seed", "7", "--out", d}, out, err) != 0) return {false, "synth failed: " + err.str()};
  auto sweep_csv_with = [&](const std::string& jobs) {
    const auto o = (dir / ("jobs" + jobs)).string();
    const int code = cli::run({"sweep", "--correctness", d + "/correctness.csv", "--models", d + "/models.csv", "--sizes",
                               "100,500,1000", "--seed", "7", "--jobs", jobs, "--out", o},
                              out, err);
    std::ifstream in(o + "/sweep.csv");
    std::stringstream ss;
    ss << in.rdbuf();
    return std::make_pair(code, ss.str());
  };
  const auto t0 = Clock::now();
  const auto [c1, a] = sweep_csv_with("1");
  const auto [c8, b] = sweep_csv_with("8");
  const bool ok = c1 == 0 && c8 == 0 && !a.empty() && a == b;
  return {ok, "exit=" + std::to_string(c1) + "," + std::to_string(c8) + " csv_bytes=" + std::to_string(a.size()) +
                  (a == b ? " identical" : " differ") + " runtime_s=" + fmt(seconds_since(t0), 1)};
}

Outcome split_hygiene() {
  PlantedSpec spec;
  spec.n_families = 6;
  spec.seed = 3;
  const auto inst = generate_planted(spec);
  const auto models = split_models(inst.models, SplitMode::family_disjoint, {}, 3);
  std::map<std::string, std::set<Split>> where;
  for (const auto& m : models.records) where[m.family].insert(m.split);
  std::size_t spanning = 0;
  for (const auto& [f, splits] : where) spanning += splits.size() > 1;

  OptimizerConfig cfg;
  cfg.target_size = 500;
  cfg.seed = 3;
  const auto res = fit(inst.z, models, cfg);
  bool reports = true;
  std::string detail = "families=" + std::to_string(where.size()) + " spanning=" + std::to_string(spanning);
  for (std::size_t k = 0; k < 3; ++k) {
    reports &= res.reports[k].has_value();
    if (res.reports[k])
      detail += " " + std::string(to_string(kEvalSplits[k])) + "_r=" + fmt(res.reports[k]->r) + "(n=" +
                std::to_string(res.reports[k]->n) + ")";
  }
  return {spanning == 0 && where.size() == 6 && reports, detail};
}

}  // namespace

int main() {
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria{
      {"planted_recovery", planted_recovery},   {"oracle_optimality", oracle_optimality},
      {"gradient_correctness", gradient_correctness}, {"baseline_behavior", baseline_behavior},
      {"fisher_interval", fisher},              {"jaccard_normalization", jaccard_normalization},
      {"lemma_decay", lemma_decay},             {"nonsubmodularity", nonsubmodularity},
      {"determinism", determinism},             {"split_hygiene", split_hygiene}};
  int failed = 0;
  for (std::size_t k = 0; k < criteria.size(); ++k) {
    Outcome o;
    try {
      o = criteria[k].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failed += !o.pass;
    std::cout << "criterion " << k + 1 << " " << criteria[k].first << ": " << (o.pass ? "PASS" : "FAIL") << " "
              << o.detail << std::endl;
  }
  return failed == 0 ? 0 : 1;
}
