#pragma once

#include <algorithm>
#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <memory>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "oodselect/oodselect.hpp"

namespace oodselect::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitValidation = 2;
inline constexpr int kExitOptimization = 3;

namespace fs = std::filesystem;

/// Values shared by every command. The defaults here are the documented ones.
struct Settings {
  // shared
  std::string config;
  std::uint64_t seed = 0;
  std::string out = ".";
  std::string metric = "pearson";
  double threshold = -kRegimeThreshold;
  std::string sizes;
  std::string split_mode = "random";
  std::size_t jobs = 1;
  // data
  std::string correctness;
  std::string models;
  std::string examples;
  std::string embeddings;
  std::string id_embeddings;
  std::string distance_metric = "centroid_euclidean";
  std::string ratios = "0.6,0.2,0.2";
  double clip_eps = kDefaultClipEps;
  // optimizer
  std::size_t size = 0;
  OptimizerConfig optimizer;
  // consistency / stability / prevalence
  std::vector<std::string> selections;
  std::string selection;
  std::size_t trials = 200;
  double tolerance = 0.01;
  std::size_t orderings = 32;
  std::size_t window = 25;
  std::string split = "all";
  std::string attribute;
  std::size_t resamples = 1000;
  double confidence = 0.95;
  // synth
  PlantedSpec planted;
  // theory
  std::string decay_sizes = "16,32,64,128,256,512";
  std::size_t witness_trials = 100000;
  std::size_t witness_models = 12;
  std::size_t witness_d = 8;
  std::size_t lipschitz_pairs = 200;
};

namespace detail {

inline std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t");
  return std::string(s.substr(b, e - b + 1));
}

inline std::vector<std::size_t> parse_sizes(const std::string& text, const char* what) {
  std::vector<std::size_t> out;
  for (const auto& field : csv::split_line(text)) {
    const auto t = trim(field);
    std::size_t v = 0;
    const auto [p, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
    if (t.empty() || ec != std::errc{} || p != t.data() + t.size())
      fail(ErrorKind::InvalidConfig, std::string(what) + ": bad entry '" + t + "'");
    out.push_back(v);
  }
  if (out.empty()) fail(ErrorKind::InvalidConfig, std::string(what) + " is empty");
  return out;
}

inline SplitRatios parse_ratios(const std::string& text) {
  const auto fields = csv::split_line(text);
  if (fields.size() != 3) fail(ErrorKind::InvalidConfig, "ratios must have three entries");
  return {csv::parse_double(trim(fields[0]), "train ratio"), csv::parse_double(trim(fields[1]), "val ratio"),
          csv::parse_double(trim(fields[2]), "test ratio")};
}

inline std::string timestamp() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

inline std::string fixed(double v, int digits = 4) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(digits) << v;
  return os.str();
}

inline void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorKind::Io, "cannot write '" + path.string() + "'");
  out << text;
}

inline void write_json(const fs::path& path, const json& j) { write_text(path, j.dump(2) + "\n"); }

inline void require_file(const std::string& path, const char* what) {
  if (path.empty()) fail(ErrorKind::InvalidConfig, std::string("missing --") + what);
  if (!fs::is_regular_file(path)) fail(ErrorKind::Io, std::string(what) + " file not found: " + path);
}

/// Every option of `cmd` with its resolved value, in declaration order.
inline json echo_config(const CLI::App& cmd) {
  json cfg = json::object();
  for (const auto* opt : cmd.get_options()) {
    if (opt->get_lnames().empty()) continue;
    const auto& name = opt->get_lnames().front();
    if (name == "help" || name == "config") continue;
    if (opt->get_expected_max() == 0) {
      cfg[name] = opt->count() > 0;
      continue;
    }
    if (opt->count() == 0) {
      cfg[name] = opt->get_default_str();
      continue;
    }
    std::string joined;
    for (const auto& r : opt->results()) joined += (joined.empty() ? "" : ",") + r;
    cfg[name] = joined;
  }
  return cfg;
}

inline json envelope(const std::string& command, const Settings& s, const CLI::App& cmd) {
  return {{"command", command},
          {"timestamp", timestamp()},
          {"seed", s.seed},
          {"config_file", s.config},
          {"config", echo_config(cmd)}};
}

/// Appends `--key value` for each `key = value` line of the config file whose
/// flag was not given on the command line. Keys that belong only to other
/// commands are skipped so one file can serve a whole pipeline.
inline void merge_config_file(const CLI::App& app, const CLI::App& cmd, std::vector<std::string>& args,
                              const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::Io, "config file not found: " + path);
  std::set<std::string> given;
  for (const auto& a : args)
    if (a.rfind("--", 0) == 0) given.insert(a.substr(2, a.find('=') - 2));
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      fail(ErrorKind::InvalidConfig, path + ":" + std::to_string(lineno) + ": expected key = value");
    auto key = trim(std::string_view(line).substr(0, eq));
    const auto value = trim(std::string_view(line).substr(eq + 1));
    std::replace(key.begin(), key.end(), '_', '-');
    if (key == "config") fail(ErrorKind::InvalidConfig, path + ": nested config files are not supported");
    const auto* opt = cmd.get_option_no_throw("--" + key);
    if (opt == nullptr) {
      bool elsewhere = false;
      for (const auto* other : app.get_subcommands([](const CLI::App*) { return true; }))
        elsewhere |= other->get_option_no_throw("--" + key) != nullptr;
      if (!elsewhere)
        fail(ErrorKind::InvalidConfig, path + ":" + std::to_string(lineno) + ": unknown key '" + key + "'");
      continue;
    }
    if (given.count(key)) continue;
    if (opt->get_expected_max() == 0) {
      if (value == "true" || value == "1") args.push_back("--" + key);
      else if (value != "false" && value != "0")
        fail(ErrorKind::InvalidConfig, path + ": '" + key + "' expects true or false");
      continue;
    }
    args.push_back("--" + key);
    args.push_back(value);
  }
}

struct Dataset {
  CorrectnessMatrix z;
  ModelTable models;
  std::string split_source;
};

/// Loads the matrix and model table. Splits come from the models file when every
/// model carries one; otherwise they are assigned with `split_mode`.
inline Dataset load_dataset(const Settings& s, std::ostream& err) {
  require_file(s.correctness, "correctness");
  require_file(s.models, "models");
  std::vector<std::string> warnings;
  auto z = load_correctness(s.correctness);
  auto models = load_models(s.models, s.clip_eps, &warnings).align(z);
  for (const auto& w : warnings) err << "warning: " << w << '\n';
  const bool preassigned = std::all_of(models.records.begin(), models.records.end(),
                                       [](const ModelRecord& m) { return m.split != Split::unassigned; });
  std::string source = "file";
  if (!preassigned) {
    models = split_models(std::move(models), parse_split_mode(s.split_mode), parse_ratios(s.ratios), s.seed);
    source = s.split_mode;
  }
  return {std::move(z), std::move(models), source};
}

inline OptimizerConfig optimizer_config(const Settings& s) {
  auto cfg = s.optimizer;
  cfg.seed = s.seed;
  cfg.clip_eps = s.clip_eps;
  cfg.target_size = s.size;
  return cfg;
}

inline std::string summary_r(const SplitReports& reports, std::size_t k) {
  return reports[k] ? fixed(reports[k]->r) : std::string("NA");
}

inline std::string fit_summary(const SelectionResult& r) {
  const auto& test = r.reports[2];
  return "S=" + std::to_string(r.target_size) + " train_r=" + summary_r(r.reports, 0) +
         " val_r=" + summary_r(r.reports, 1) + " test_r=" + summary_r(r.reports, 2) +
         " regime=" + (test ? std::string(to_string(test->regime)) : std::string("NA"));
}

/// Example columns named by a selection file.
inline SelectionFile read_selection(const std::string& path) {
  require_file(path, "selection");
  std::ifstream in(path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    fail(ErrorKind::Parse, path + ": " + e.what());
  }
  return parse_selection(j);
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Commands
// ---------------------------------------------------------------------------

inline int cmd_fit(const Settings& s, const CLI::App& cmd, std::ostream& out, std::ostream& err) {
  const auto data = detail::load_dataset(s, err);
  const auto cfg = detail::optimizer_config(s);
  const auto result = fit(data.z, data.models, cfg, {s.jobs, parse_correlation_kind(s.metric)});
  auto doc = detail::envelope("fit", s, cmd);
  doc["split_source"] = data.split_source;
  doc["result"] = to_json(result);
  detail::write_json(fs::path(s.out) / ("selection_S" + std::to_string(cfg.target_size) + ".json"), doc);
  out << detail::fit_summary(result) << '\n';
  return kExitOk;
}

inline int cmd_sweep(const Settings& s, const CLI::App& cmd, std::ostream& out, std::ostream& err) {
  const auto data = detail::load_dataset(s, err);
  const auto sizes = detail::parse_sizes(s.sizes, "sizes");
  auto base = detail::optimizer_config(s);
  base.target_size = sizes.front();

  SweepOptions opts{s.jobs, parse_correlation_kind(s.metric), std::nullopt};
  EmbeddingTable ood, id;
  if (!s.embeddings.empty() || !s.id_embeddings.empty()) {
    detail::require_file(s.embeddings, "embeddings");
    detail::require_file(s.id_embeddings, "id-embeddings");
    ood = load_embeddings(s.embeddings);
    id = load_embeddings(s.id_embeddings);
    opts.distance = DistanceInputs{&ood, &id, parse_distance_metric(s.distance_metric)};
  }
  const auto report = sweep(data.z, data.models, sizes, base, opts);

  auto doc = detail::envelope("sweep", s, cmd);
  doc["split_source"] = data.split_source;
  doc["result"] = to_json(report, data.z, s.threshold);
  detail::write_json(fs::path(s.out) / "sweep.json", doc);
  detail::write_text(fs::path(s.out) / "sweep.csv", sweep_csv(report));

  std::size_t ok = 0;
  for (const auto& e : report.entries) {
    if (e.oodselect) {
      ++ok;
      out << detail::fit_summary(*e.oodselect) << '\n';
    } else {
      out << "S=" << e.target_size << " failed: " << e.oodselect_error << '\n';
    }
  }
  const auto rec = recommend_size(report, s.threshold);
  out << "recommended_S=" << (rec ? std::to_string(*rec) : std::string("none")) << '\n';
  return ok > 0 ? kExitOk : kExitOptimization;
}

inline int cmd_consistency(const Settings& s, const CLI::App& cmd, std::ostream& out, std::ostream&) {
  if (s.selections.size() < 2) fail(ErrorKind::InvalidConfig, "need at least two --selections");
  std::vector<SelectionFile> files;
  for (const auto& p : s.selections) files.push_back(detail::read_selection(p));

  std::size_t universe = 0;
  if (!s.correctness.empty()) {
    detail::require_file(s.correctness, "correctness");
    universe = load_correctness(s.correctness).n_examples();
  } else {
    for (const auto& f : files) {
      if (f.universe_size == 0) fail(ErrorKind::InvalidConfig, "selection lacks universe_size; pass --correctness");
      if (universe != 0 && f.universe_size != universe)
        fail(ErrorKind::InvalidConfig, "selections disagree on universe_size");
      universe = f.universe_size;
    }
  }

  std::map<std::string, std::size_t> index;
  for (const auto& f : files)
    for (const auto& id : f.subset) index.emplace(id, index.size());
  if (index.size() > universe) fail(ErrorKind::InvalidConfig, "selections name more ids than the universe holds");
  std::vector<std::vector<std::size_t>> subsets;
  for (const auto& f : files) {
    std::vector<std::size_t> cols;
    for (const auto& id : f.subset) cols.push_back(index.at(id));
    subsets.push_back(std::move(cols));
  }
  const auto nj = normalized_jaccard_sequence(subsets, universe, s.trials, s.seed, s.jobs);

  auto doc = detail::envelope("consistency", s, cmd);
  json sizes = json::array();
  for (const auto& f : files) sizes.push_back(f.subset.size());
  doc["result"] = to_json(nj);
  doc["result"]["sizes"] = sizes;
  doc["result"]["universe_size"] = universe;
  detail::write_json(fs::path(s.out) / "consistency.json", doc);
  out << "normalized_jaccard=" << detail::fixed(nj.value) << " mean_jaccard=" << detail::fixed(nj.mean)
      << " random_lower_bound=" << detail::fixed(nj.j_min) << " nested_upper_bound=" << detail::fixed(nj.j_max)
      << '\n';
  return kExitOk;
}

inline int cmd_stability(const Settings& s, const CLI::App& cmd, std::ostream& out, std::ostream& err) {
  const auto data = detail::load_dataset(s, err);
  IndexSet cols;
  if (!s.selection.empty()) {
    cols = data.z.columns_of(detail::read_selection(s.selection).subset);
  } else {
    cols.resize(data.z.n_examples());
    std::iota(cols.begin(), cols.end(), std::size_t{0});
  }
  std::vector<std::size_t> rows;
  if (s.split == "all") {
    rows.resize(data.z.n_models());
    std::iota(rows.begin(), rows.end(), std::size_t{0});
  } else {
    rows = data.models.rows_in(parse_split(s.split));
  }
  const auto ood = subset_accuracy(data.z, cols, rows);
  const auto id = data.models.id_accuracies(rows);
  const auto res = model_count_stability(id, ood, s.tolerance, s.orderings, s.window, s.seed, s.clip_eps, s.jobs);

  auto doc = detail::envelope("stability", s, cmd);
  doc["result"] = to_json(res);
  doc["result"]["n_models"] = rows.size();
  doc["result"]["subset_size"] = cols.size();
  detail::write_json(fs::path(s.out) / "stability.json", doc);
  out << "stable_model_count=" << res.n << " of " << rows.size() << " converged=" << (res.converged ? "true" : "false")
      << " non_converged_orderings=" << res.non_converged << '\n';
  return kExitOk;
}

inline int cmd_prevalence(const Settings& s, const CLI::App& cmd, std::ostream& out, std::ostream&) {
  detail::require_file(s.examples, "examples");
  const auto meta = load_example_meta(s.examples);
  const auto selected = detail::read_selection(s.selection).subset;

  std::map<std::string, const ExampleMeta*> by_id;
  std::set<std::string> attributes;
  bool any_label = false;
  for (const auto& m : meta) {
    if (!by_id.emplace(m.example_id, &m).second) fail(ErrorKind::DuplicateExampleId, m.example_id);
    for (const auto& [k, _] : m.attributes) attributes.insert(k);
    any_label |= m.label.has_value();
  }
  if (any_label) attributes.insert("label");
  if (!s.attribute.empty()) {
    if (!attributes.count(s.attribute)) fail(ErrorKind::InvalidConfig, "unknown attribute '" + s.attribute + "'");
    attributes = {s.attribute};
  }
  auto value_of = [](const ExampleMeta& m, const std::string& attr) -> std::optional<std::string> {
    if (attr == "label") return m.label;
    auto it = m.attributes.find(attr);
    return it == m.attributes.end() ? std::nullopt : std::optional<std::string>(it->second);
  };
  for (const auto& id : selected)
    if (!by_id.count(id)) fail(ErrorKind::UnknownId, "selected example '" + id + "' missing from examples file");

  auto doc = detail::envelope("prevalence", s, cmd);
  json result = json::object();
  for (const auto& attr : attributes) {
    std::vector<std::string> full, sub;
    for (const auto& m : meta)
      if (auto v = value_of(m, attr)) full.push_back(*v);
    for (const auto& id : selected)
      if (auto v = value_of(*by_id.at(id), attr)) sub.push_back(*v);
    if (sub.empty()) {
      result[attr] = {{"error", "no selected example carries this attribute"}};
      continue;
    }
    const auto shifts = bootstrap_prevalence_shift(sub, full, s.resamples, substream_seed(s.seed, "prevalence/" + attr),
                                                   s.confidence, s.jobs);
    json rows = json::array();
    for (const auto& sh : shifts) {
      rows.push_back(to_json(sh));
      out << attr << '=' << sh.category << " delta=" << detail::fixed(sh.delta) << " ci=["
          << detail::fixed(sh.ci.low) << ',' << detail::fixed(sh.ci.high) << "] p=" << detail::fixed(sh.p) << '\n';
    }
    result[attr] = rows;
  }
  doc["result"] = result;
  detail::write_json(fs::path(s.out) / "prevalence.json", doc);
  return kExitOk;
}

inline int cmd_synth(const Settings& s, const CLI::App& cmd, std::ostream& out, std::ostream&) {
  auto spec = s.planted;
  spec.seed = s.seed;
  const auto inst = generate_planted(spec);
  const fs::path dir(s.out);
  fs::create_directories(dir);
  write_correctness(dir / "correctness.csv", inst.z);
  write_models(dir / "models.csv", inst.models);
  write_example_meta(dir / "examples.csv", inst.examples, {"pool"});

  auto doc = detail::envelope("synth", s, cmd);
  doc["result"] = {{"aligned", inst.z.ids_of(inst.truth.aligned)},
                   {"inverted", inst.z.ids_of(inst.truth.inverted)},
                   {"noise", inst.z.ids_of(inst.truth.noise)}};
  detail::write_json(dir / "truth.json", doc);
  out << "wrote " << inst.z.n_models() << " models x " << inst.z.n_examples() << " examples to " << dir.string()
      << '\n';
  return kExitOk;
}

inline int cmd_theory(const Settings& s, const CLI::App& cmd, std::ostream& out, std::ostream&) {
  constexpr double kSlopeLow = -1.3, kSlopeHigh = -0.7;
  const auto sizes = detail::parse_sizes(s.decay_sizes, "decay-sizes");
  auto doc = detail::envelope("theory", s, cmd);
  json result;
  for (auto kind : {DecayKind::new_model, DecayKind::new_example}) {
    const auto probe = lemma_decay_probe(kind, sizes, s.trials, s.seed, s.jobs);
    const bool ok = probe.slope >= kSlopeLow && probe.slope <= kSlopeHigh;
    result[std::string(to_string(kind))] = to_json(probe);
    result[std::string(to_string(kind))]["within_band"] = ok;
    out << to_string(kind) << "_slope=" << detail::fixed(probe.slope) << " within_band=" << (ok ? "true" : "false")
        << '\n';
  }
  result["slope_band"] = {kSlopeLow, kSlopeHigh};

  const auto witness = nonsubmodularity_witness(s.witness_models, s.witness_d, s.witness_trials, s.seed);
  result["witness"] = witness ? to_json(*witness) : json(nullptr);
  out << "nonsubmodularity_witness=" << (witness ? "found after " + std::to_string(witness->triples_sampled) + " triples"
                                                 : std::string("none"))
      << '\n';

  if (s.lipschitz_pairs > 0) {
    PlantedSpec small;
    small.n_models = 40;
    small.n_aligned = 40;
    small.n_inverted = 15;
    small.n_noise = 5;
    small.seed = s.seed;
    const auto inst = generate_planted(small);
    std::vector<std::size_t> rows(inst.z.n_models());
    std::iota(rows.begin(), rows.end(), std::size_t{0});
    const auto lp = lipschitz_probe(inst.z, rows, inst.models.id_accuracies(), 20, s.lipschitz_pairs, s.seed, s.clip_eps);
    result["lipschitz"] = to_json(lp);
    out << "lipschitz_violations=" << lp.violations << " of " << lp.pairs_checked << '\n';
  }
  doc["result"] = result;
  detail::write_json(fs::path(s.out) / "theory.json", doc);
  return kExitOk;
}

// ---------------------------------------------------------------------------
// Argument wiring
// ---------------------------------------------------------------------------

namespace detail {

inline void add_shared(CLI::App* c, Settings& s) {
  c->add_option("--config", s.config, "flat key = value file; flags override it");
  c->add_option("--seed", s.seed, "root seed");
  c->add_option("--out", s.out, "output directory");
  c->add_option("--metric", s.metric, "pearson or spearman")->check(CLI::IsMember({"pearson", "spearman"}));
  c->add_option("--threshold", s.threshold, "validation r at or below which a size is recommended");
  c->add_option("--sizes", s.sizes, "comma-separated subset sizes");
  c->add_option("--split-mode", s.split_mode, "random or family_disjoint")
      ->check(CLI::IsMember({"random", "family_disjoint"}));
  c->add_option("--jobs", s.jobs, "worker threads")->check(CLI::PositiveNumber);
}

inline void add_data(CLI::App* c, Settings& s) {
  c->add_option("--correctness", s.correctness, "correctness CSV");
  c->add_option("--models", s.models, "model CSV");
  c->add_option("--ratios", s.ratios, "train,val,test fractions");
  c->add_option("--clip-eps", s.clip_eps, "probit clip margin");
}

inline void add_optimizer(CLI::App* c, Settings& s) {
  auto& o = s.optimizer;
  c->add_option("--steps", o.steps, "Adam steps per restart");
  c->add_option("--restarts", o.restarts, "random restarts");
  c->add_option("--lr", o.lr0, "initial learning rate");
  c->add_option("--lambda0", o.lambda0, "initial penalty weight");
  c->add_option("--lambda-max", o.lambda_max, "final penalty weight");
  c->add_option("--init-scale", o.init_scale, "std of the initial logits");
  c->add_option("--checkpoint-every", o.checkpoint_every, "score top-S subsets every this many steps (0 = end only)");
  c->add_option("--weight-floor", o.weight_floor, "minimum total weight");
}

}  // namespace detail

/// Runs one command. `args` excludes the program name.
inline int run(std::vector<std::string> args, std::ostream& out, std::ostream& err) {
  Settings s;
  CLI::App app{"Select OOD example subsets whose accuracy does not track ID accuracy."};
  app.name("oodselect");
  app.option_defaults()->always_capture_default();
  app.require_subcommand(1, 1);

  auto* fit_cmd = app.add_subcommand("fit", "optimize one subset of size --size");
  auto* sweep_cmd = app.add_subcommand("sweep", "fit every size in --sizes and compare baselines");
  auto* cons_cmd = app.add_subcommand("consistency", "normalized Jaccard across selections of increasing size");
  auto* stab_cmd = app.add_subcommand("stability", "model count after which the correlation settles");
  auto* prev_cmd = app.add_subcommand("prevalence", "attribute prevalence shift of a selection");
  auto* synth_cmd = app.add_subcommand("synth", "write a planted fixture");
  auto* theory_cmd = app.add_subcommand("theory", "decay, non-submodularity and Lipschitz probes");
  for (auto* c : {fit_cmd, sweep_cmd, cons_cmd, stab_cmd, prev_cmd, synth_cmd, theory_cmd}) detail::add_shared(c, s);

  for (auto* c : {fit_cmd, sweep_cmd, stab_cmd}) detail::add_data(c, s);
  fit_cmd->add_option("--size", s.size, "subset size S");
  detail::add_optimizer(fit_cmd, s);
  detail::add_optimizer(sweep_cmd, s);
  sweep_cmd->add_option("--embeddings", s.embeddings, "OOD embedding CSV");
  sweep_cmd->add_option("--id-embeddings", s.id_embeddings, "ID embedding CSV");
  sweep_cmd->add_option("--distance-metric", s.distance_metric, "centroid_euclidean or max_min_greedy");

  cons_cmd->add_option("--selections", s.selections, "selection JSON files, increasing S")->delimiter(',');
  cons_cmd->add_option("--correctness", s.correctness, "correctness CSV defining the universe");
  cons_cmd->add_option("--trials", s.trials, "random sequences for the lower reference");

  stab_cmd->add_option("--selection", s.selection, "selection JSON; default is every example");
  stab_cmd->add_option("--split", s.split, "all, train, val or test")
      ->check(CLI::IsMember({"all", "train", "val", "test"}));
  stab_cmd->add_option("--tolerance", s.tolerance, "relative change counted as stable");
  stab_cmd->add_option("--orderings", s.orderings, "random model orderings");
  stab_cmd->add_option("--window", s.window, "consecutive stable additions required");

  prev_cmd->add_option("--examples", s.examples, "example metadata CSV");
  prev_cmd->add_option("--selection", s.selection, "selection JSON");
  prev_cmd->add_option("--attribute", s.attribute, "only this attribute");
  prev_cmd->add_option("--resamples", s.resamples, "bootstrap resamples");
  prev_cmd->add_option("--confidence", s.confidence, "interval level");

  auto& p = s.planted;
  synth_cmd->add_option("--n-models", p.n_models, "models");
  synth_cmd->add_option("--aligned", p.n_aligned, "aligned examples");
  synth_cmd->add_option("--inverted", p.n_inverted, "inverted examples");
  synth_cmd->add_option("--noise", p.n_noise, "noise examples");
  synth_cmd->add_option("--skill-low", p.skill_low, "lowest model skill");
  synth_cmd->add_option("--skill-high", p.skill_high, "highest model skill");
  synth_cmd->add_option("--slope", p.slope, "logistic slope c");
  synth_cmd->add_option("--id-noise", p.id_noise, "std of ID accuracy noise");
  synth_cmd->add_option("--families", p.n_families, "architecture families (0 = none)");

  theory_cmd->add_option("--trials", s.trials, "trials per decay size");
  theory_cmd->add_option("--decay-sizes", s.decay_sizes, "comma-separated sizes");
  theory_cmd->add_option("--witness-trials", s.witness_trials, "triple budget");
  theory_cmd->add_option("--witness-models", s.witness_models, "models per witness instance");
  theory_cmd->add_option("--witness-d", s.witness_d, "examples per witness instance");
  theory_cmd->add_option("--lipschitz-pairs", s.lipschitz_pairs, "weight pairs for the Lipschitz check (0 = skip)");
  theory_cmd->add_option("--clip-eps", s.clip_eps, "probit clip margin");

  try {
    if (!args.empty()) {
      if (auto* cmd = app.get_subcommand_no_throw(args.front())) {
        std::string cfg_path;
        for (std::size_t k = 1; k < args.size(); ++k) {
          if (args[k] == "--config" && k + 1 < args.size()) cfg_path = args[k + 1];
          else if (args[k].rfind("--config=", 0) == 0) cfg_path = args[k].substr(9);
        }
        if (!cfg_path.empty()) detail::merge_config_file(app, *cmd, args, cfg_path);
      }
    }
    std::reverse(args.begin(), args.end());
    app.parse(args);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitValidation;
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return kExitValidation;
  }

  try {
    const auto* cmd = app.get_subcommands().front();
    const auto name = cmd->get_name();
    if (name == "fit") return cmd_fit(s, *cmd, out, err);
    if (name == "sweep") return cmd_sweep(s, *cmd, out, err);
    if (name == "consistency") return cmd_consistency(s, *cmd, out, err);
    if (name == "stability") return cmd_stability(s, *cmd, out, err);
    if (name == "prevalence") return cmd_prevalence(s, *cmd, out, err);
    if (name == "synth") return cmd_synth(s, *cmd, out, err);
    return cmd_theory(s, *cmd, out, err);
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return e.kind() == ErrorKind::OptimizationFailed ? kExitOptimization : kExitValidation;
  } catch (const std::filesystem::filesystem_error& e) {
    err << "error: " << e.what() << '\n';
    return kExitValidation;
  }
}

inline int run(int argc, char** argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  return run(std::vector<std::string>(argv + 1, argv + argc), out, err);
}

}  // namespace oodselect::cli
