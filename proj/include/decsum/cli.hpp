#pragma once

// Command implementations behind the `decsum` binary. Each command writes its
// data files plus a `*.run.json` sidecar holding the run configuration and
// its fingerprint. Logs go to stderr.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "decsum/baselines.hpp"
#include "decsum/corpus.hpp"
#include "decsum/errors.hpp"
#include "decsum/eval.hpp"
#include "decsum/external_client.hpp"
#include "decsum/parallel.hpp"
#include "decsum/rng.hpp"
#include "decsum/scoring.hpp"
#include "decsum/selector.hpp"

namespace decsum::cli {

namespace fs = std::filesystem;

inline void log(const std::string& msg) { std::cerr << "[decsum] " << msg << '\n'; }

enum ExitCode : int { kOk = 0, kUsage = 2, kTransport = 3 };

/// Worker count from the flag, else DECSUM_WORKERS, else 1.
inline std::size_t resolve_workers(std::optional<std::size_t> flag) {
  if (flag) return std::max<std::size_t>(*flag, 1);
  if (const char* env = std::getenv("DECSUM_WORKERS")) {
    try {
      return std::max<std::size_t>(std::stoul(env), 1);
    } catch (const std::exception&) {
      throw ConfigError(std::string("DECSUM_WORKERS is not a number: ") + env);
    }
  }
  return 1;
}

inline std::string fingerprint(const nlohmann::json& config) {
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << fnv1a64(config.dump());
  return os.str();
}

/// Writes {"command","config","fingerprint"} next to an output.
inline void write_run_sidecar(const fs::path& path, const std::string& command, const nlohmann::json& config) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write " + path.string());
  nlohmann::json j = {{"command", command}, {"config", config}, {"fingerprint", fingerprint(config)}};
  out << j.dump(2) << '\n';
}

inline fs::path sidecar_for(const fs::path& file) { return fs::path(file.string() + ".run.json"); }

inline std::ofstream open_output(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write " + path.string());
  return out;
}

// ---------------------------------------------------------------------------
// Model specs

struct ScorerOptions {
  std::chrono::milliseconds timeout{30000};
};

/// "lexicon", "lexicon:PATH", "exec:CMD", "tcp:HOST:PORT", or a model JSON path.
inline std::unique_ptr<DecisionModel> load_model_spec(const std::string& spec, const ScorerOptions& opts = {}) {
  if (spec.empty()) throw ConfigError("--model is required");
  if (spec == "lexicon") return std::make_unique<LexiconModel>(LexiconModel::fixture());
  if (spec.starts_with("lexicon:")) return std::make_unique<LexiconModel>(LexiconModel::load(spec.substr(8)));
  if (spec.starts_with("exec:") || spec.starts_with("tcp:")) return std::make_unique<ExternalScorer>(spec, opts.timeout);
  return std::make_unique<LinearModel>(load_model(spec));
}

// ---------------------------------------------------------------------------
// Instance directories

inline const char* kInstancesFile = "instances.jsonl";
inline const char* kSplitsFile = "splits.csv";

/// Instances of a directory, restricted to a split ("all" keeps everything),
/// sorted by doc_id.
inline std::vector<TaskInstance> load_split(const fs::path& dir, const std::string& split) {
  auto instances = read_instances(dir / kInstancesFile);
  if (split != "all") {
    const Split want = parse_split(split);
    std::map<std::string, Split> assign;
    for (const auto& a : read_splits(dir / kSplitsFile)) assign[a.doc_id] = a.split;
    std::vector<TaskInstance> kept;
    for (auto& inst : instances) {
      auto it = assign.find(inst.doc_id);
      if (it != assign.end() && it->second == want) kept.push_back(std::move(inst));
    }
    instances = std::move(kept);
  }
  std::sort(instances.begin(), instances.end(), [](const auto& a, const auto& b) { return a.doc_id < b.doc_id; });
  return instances;
}

inline void write_instance_dir(const fs::path& dir, const std::vector<TaskInstance>& instances, std::uint64_t seed) {
  fs::create_directories(dir);
  auto inst_out = open_output(dir / kInstancesFile);
  write_instances(inst_out, instances);
  auto split_out = open_output(dir / kSplitsFile);
  write_splits(split_out, split_dataset(instances, {0.64, 0.16, 0.20}, seed));
}

// ---------------------------------------------------------------------------
// ingest

struct IngestOptions {
  fs::path reviews;
  std::optional<fs::path> business;
  int k = 10;
  int t = 50;
  std::uint64_t seed = 0;
  fs::path out;
};

inline int cmd_ingest(const IngestOptions& o) {
  const auto parsed = parse_reviews(o.reviews);
  std::map<std::string, std::string> cities;
  if (o.business) cities = parse_business_cities(*o.business);
  const auto instances = build_task_instances(parsed.by_business, o.k, o.t, cities);
  write_instance_dir(o.out, instances, o.seed);

  auto skip_out = open_output(o.out / "skipped.jsonl");
  for (const auto& s : parsed.skipped) skip_out << nlohmann::json{{"line", s.line_number}, {"reason", s.reason}}.dump() << '\n';

  nlohmann::json cfg = {{"reviews", o.reviews.string()}, {"business", o.business ? o.business->string() : ""},
                        {"k", o.k},  {"t", o.t},  {"seed", o.seed}};
  write_run_sidecar(o.out / "run.json", "ingest", cfg);
  log("ingest: " + std::to_string(instances.size()) + " instances from " + std::to_string(parsed.by_business.size()) +
      " businesses, " + std::to_string(parsed.skip_count()) + " lines skipped");
  return kOk;
}

// ---------------------------------------------------------------------------
// synth

struct SynthOptions {
  std::size_t n_docs = 200;
  std::uint64_t seed = 0;
  SyntheticConfig config;
  fs::path out;
};

inline int cmd_synth(const SynthOptions& o) {
  const auto instances = generate_synthetic(o.n_docs, o.seed, o.config);
  write_instance_dir(o.out, instances, o.seed);
  nlohmann::json cfg = {{"n_docs", o.n_docs}, {"seed", o.seed}, {"k", o.config.k}, {"t", o.config.t},
                        {"cities", o.config.n_cities}, {"star_noise", o.config.star_noise}};
  write_run_sidecar(o.out / "run.json", "synth", cfg);
  log("synth: wrote " + std::to_string(instances.size()) + " instances to " + o.out.string());
  return kOk;
}

// ---------------------------------------------------------------------------
// train

struct TrainOptions {
  fs::path instances;
  std::string split = "train";
  double lambda = 1.0;
  FeaturizerSettings featurizer;
  fs::path out;
};

inline int cmd_train(const TrainOptions& o) {
  if (!(o.lambda >= 0.0)) throw ConfigError("--lambda must be nonnegative");
  const auto train = load_split(o.instances, o.split);
  auto model = train_linear(train, o.lambda, o.featurizer);
  save_model(model, o.out);

  double mean = 0.0;
  for (const auto& inst : train) mean += inst.y_future;
  mean /= static_cast<double>(train.size());
  double mse = 0.0, var = 0.0;
  for (const auto& inst : train) {
    const double e = model.score(inst.full_text) - inst.y_future;
    mse += e * e;
    var += (inst.y_future - mean) * (inst.y_future - mean);
  }
  mse /= static_cast<double>(train.size());
  var /= static_cast<double>(train.size());

  nlohmann::json cfg = {{"instances", o.instances.string()}, {"split", o.split},
                        {"lambda", o.lambda},                {"dimension", o.featurizer.dimension},
                        {"hash_seed", o.featurizer.hash_seed}, {"ngram_max", o.featurizer.ngram_max}};
  write_run_sidecar(sidecar_for(o.out), "train", cfg);
  std::ostringstream msg;
  msg << "train: " << train.size() << " instances, train MSE " << mse << " vs target variance " << var;
  log(msg.str());
  return kOk;
}

// ---------------------------------------------------------------------------
// summarize

struct SummarizeOptions {
  fs::path instances;
  std::string split = "test";
  std::string method = "decsum";
  SelectionConfig selection;  // K defaults to 15
  std::string model;
  EmbedderSettings embedder;
  std::optional<std::size_t> workers;
  ScorerOptions scorer;
  fs::path out;
};

inline std::vector<SummaryResult> summarize_all(const std::vector<TaskInstance>& instances, Method method,
                                                const DecisionModel& model, const Embedder& embedder,
                                                const SelectionConfig& sel, std::size_t workers) {
  std::vector<SummaryResult> results(instances.size());
  parallel_for(instances.size(), workers, [&](std::size_t i) {
    const auto& inst = instances[i];
    switch (method) {
      case Method::decsum: results[i] = decsum_select(inst, model, &embedder, sel); break;
      case Method::random: results[i] = random_select(inst, model, &embedder, sel.seed, sel.max_sentences, sel.weights); break;
      case Method::lead: results[i] = lead_select(inst, model, &embedder, sel.max_sentences, sel.weights); break;
      case Method::occlusion: results[i] = occlusion_select(inst, model, &embedder, sel.max_sentences, sel.weights); break;
    }
  });
  return results;
}

inline int cmd_summarize(const SummarizeOptions& o) {
  const Method method = parse_method(o.method);
  if (!o.selection.weights.valid()) throw ConfigError("--alpha/--beta/--gamma must be finite and nonnegative");
  if (method == Method::decsum) o.selection.validate();
  if (o.selection.max_sentences < 1) throw ConfigError("--k-sentences must be at least 1");
  const auto instances = load_split(o.instances, o.split);
  const auto model = load_model_spec(o.model, o.scorer);
  const HashedEmbedder embedder(o.embedder);
  const auto workers = resolve_workers(o.workers);
  const auto results = summarize_all(instances, method, *model, embedder, o.selection, workers);

  auto out = open_output(o.out);
  write_summaries(out, results);
  const auto& s = o.selection;
  nlohmann::json cfg = {{"instances", o.instances.string()},
                        {"split", o.split},
                        {"method", o.method},
                        {"alpha", s.weights.alpha},
                        {"beta", s.weights.beta},
                        {"gamma", s.weights.gamma},
                        {"beam_size", s.beam_size},
                        {"k_sentences", s.max_sentences},
                        {"order", std::string(to_string(s.order_mode))},
                        {"eps", s.eps},
                        {"seed", s.seed},
                        {"model", o.model},
                        {"embed_dim", o.embedder.dimension}};
  write_run_sidecar(sidecar_for(o.out), "summarize", cfg);
  log("summarize: " + std::to_string(results.size()) + " summaries (" + o.method + ") -> " + o.out.string());
  return kOk;
}

// ---------------------------------------------------------------------------
// evaluate

struct EvaluateOptions {
  std::vector<fs::path> summaries;
  fs::path instances;
  std::string split = "test";
  std::string model;
  std::size_t budget = kDefaultTokenBudget;
  std::vector<std::size_t> sweep;
  bool svg = false;
  std::size_t grid_size = 512;
  std::optional<std::size_t> workers;
  ScorerOptions scorer;
  fs::path out;
};

/// Summaries grouped by label, in first-seen order across files.
inline std::vector<std::pair<std::string, std::vector<SummaryResult>>> group_by_label(const std::vector<fs::path>& files) {
  std::vector<std::pair<std::string, std::vector<SummaryResult>>> out;
  for (const auto& f : files) {
    for (auto& r : read_summaries(f)) {
      auto it = std::find_if(out.begin(), out.end(), [&](const auto& p) { return p.first == r.label; });
      if (it == out.end()) {
        out.emplace_back(r.label, std::vector<SummaryResult>{});
        it = std::prev(out.end());
      }
      it->second.push_back(std::move(r));
    }
  }
  return out;
}

inline int cmd_evaluate(const EvaluateOptions& o) {
  if (o.summaries.empty()) throw ConfigError("--summaries needs at least one file");
  if (o.budget < 1) throw ConfigError("--budget must be at least 1");
  for (auto b : o.sweep) {
    if (b < 1) throw ConfigError("--sweep budgets must be at least 1");
  }
  const auto instances = load_split(o.instances, o.split);
  std::map<std::string, const TaskInstance*> by_id;
  for (const auto& inst : instances) by_id[inst.doc_id] = &inst;
  const auto model = load_model_spec(o.model, o.scorer);
  const auto workers = resolve_workers(o.workers);
  const auto preds = predict_instances(instances, *model, workers);
  const auto methods = group_by_label(o.summaries);

  const std::vector<std::size_t> budgets = o.sweep.empty() ? std::vector<std::size_t>{o.budget} : o.sweep;
  const auto rows = length_sweep(methods, budgets, by_id, preds, *model);

  fs::create_directories(o.out);
  {
    auto out = open_output(o.out / "metrics.csv");
    write_metrics_csv(out, rows);
  }

  // Density curves per rating group; points are the first method's summary
  // sentences at the main budget.
  std::map<std::string, std::vector<double>> points;
  if (!methods.empty()) {
    const auto row = evaluate_summaries(methods.front().first, methods.front().second, by_id, preds, *model, o.budget);
    for (const auto& e : row.details) {
      auto& v = points[e.doc_id];
      for (auto i : e.kept) v.push_back(preds.at(e.doc_id).sentence_scores[i]);
    }
  }
  const auto groups = group_distributions(instances, *model, points, o.grid_size);
  for (const auto& w : groups.warnings) log("evaluate: " + w);
  {
    auto out = open_output(o.out / "densities.csv");
    write_density_csv(out, groups.curves);
    auto pts = open_output(o.out / "selected_points.csv");
    write_selected_points_csv(pts, groups.curves);
  }
  if (o.svg) {
    for (const auto& c : groups.curves) {
      auto out = open_output(o.out / (c.group_label + ".svg"));
      write_density_svg(out, c);
    }
  }

  nlohmann::json files = nlohmann::json::array();
  for (const auto& f : o.summaries) files.push_back(f.string());
  nlohmann::json cfg = {{"summaries", files},  {"instances", o.instances.string()}, {"split", o.split},
                        {"model", o.model},    {"budget", o.budget},               {"sweep", o.sweep},
                        {"grid_size", o.grid_size}, {"svg", o.svg}};
  write_run_sidecar(o.out / "run.json", "evaluate", cfg);
  log("evaluate: " + std::to_string(rows.size()) + " metric rows -> " + (o.out / "metrics.csv").string());
  return kOk;
}

// ---------------------------------------------------------------------------
// pairs / pairscore

struct PairsOptions {
  fs::path instances;
  std::string split = "test";
  std::size_t max_per_city = 25;
  std::size_t sample = 200;
  std::uint64_t seed = 0;
  fs::path out;
};

inline int cmd_pairs(const PairsOptions& o) {
  const auto instances = load_split(o.instances, o.split);
  const auto batch = build_pairs(instances, o.max_per_city, o.sample, o.seed);
  if (batch.short_of_sample) {
    log("pairs: only " + std::to_string(batch.pairs.size()) + " pairs available (asked for " + std::to_string(o.sample) +
        ", " + std::to_string(batch.eligible) + " eligible before de-duplication)");
  }
  auto out = open_output(o.out);
  for (const auto& p : batch.pairs) out << to_json(p).dump() << '\n';
  nlohmann::json cfg = {{"instances", o.instances.string()}, {"split", o.split}, {"max_per_city", o.max_per_city},
                        {"sample", o.sample},                {"seed", o.seed}};
  write_run_sidecar(sidecar_for(o.out), "pairs", cfg);
  log("pairs: wrote " + std::to_string(batch.pairs.size()) + " pairs -> " + o.out.string());
  return kOk;
}

struct PairscoreOptions {
  fs::path pairs;
  std::vector<fs::path> summaries;
  std::string model;
  std::optional<fs::path> instances;
  std::string split = "test";
  std::size_t budget = kDefaultTokenBudget;
  ScorerOptions scorer;
  fs::path out;
  std::optional<fs::path> report;
};

/// Budget-truncated summary text built from the summary record alone.
inline std::string truncated_summary_text(const SummaryResult& r, std::size_t budget) {
  std::map<std::size_t, const SelectedSentence*> by_index;
  for (const auto& s : r.selected) by_index[s.sent_index] = &s;
  std::vector<std::size_t> counts;
  for (auto i : r.selection_order) {
    auto it = by_index.find(i);
    if (it == by_index.end()) throw ConfigError("summary for " + r.doc_id + " lacks text for sentence " + std::to_string(i));
    counts.push_back(text::whitespace_token_count(it->second->text));
  }
  std::vector<std::size_t> kept(r.selection_order.begin(),
                                r.selection_order.begin() + static_cast<std::ptrdiff_t>(truncate_to_budget(counts, budget)));
  if (r.order_mode == OrderMode::original) std::sort(kept.begin(), kept.end());
  std::vector<std::string_view> parts;
  for (auto i : kept) parts.push_back(by_index.at(i)->text);
  return text::join(parts, " ");
}

inline int cmd_pairscore(const PairscoreOptions& o) {
  const auto pairs = read_pairs(o.pairs);
  if (pairs.empty()) throw ConfigError("no pairs in " + o.pairs.string());
  const auto model = load_model_spec(o.model, o.scorer);

  std::vector<std::pair<std::string, std::map<std::string, double>>> methods;
  if (o.instances) {
    std::map<std::string, double> full;
    for (const auto& inst : load_split(*o.instances, o.split)) full[inst.doc_id] = model->score(inst.full_text);
    methods.emplace_back("full", std::move(full));
  }
  for (const auto& [label, summaries] : group_by_label(o.summaries)) {
    std::vector<std::string> texts;
    for (const auto& r : summaries) texts.push_back(truncated_summary_text(r, o.budget));
    const auto scores = model->score_batch(texts);
    std::map<std::string, double> preds;
    for (std::size_t i = 0; i < summaries.size(); ++i) preds[summaries[i].doc_id] = scores[i];
    methods.emplace_back(label, std::move(preds));
  }

  auto out = open_output(o.out);
  const fs::path report_path = o.report ? *o.report : fs::path(o.out.string() + ".accuracy.csv");
  auto report = open_output(report_path);
  report << "method,n_pairs,accuracy\n" << std::setprecision(10);
  for (const auto& [label, preds] : methods) {
    const auto rep = pairwise_accuracy(pairs, preds);
    for (const auto& oc : rep.outcomes) {
      out << nlohmann::json{{"pair_id", oc.pair_id},
                            {"method", label},
                            {"pred_a", oc.pred_a},
                            {"pred_b", oc.pred_b},
                            {"winner", std::string(1, oc.winner)},
                            {"correct", oc.credit}}
                 .dump()
          << '\n';
    }
    report << label << ',' << pairs.size() << ',' << rep.accuracy << '\n';
    std::ostringstream msg;
    msg << "pairscore: " << label << " accuracy " << rep.accuracy << " over " << pairs.size() << " pairs";
    log(msg.str());
  }
  nlohmann::json files = nlohmann::json::array();
  for (const auto& f : o.summaries) files.push_back(f.string());
  nlohmann::json cfg = {{"pairs", o.pairs.string()}, {"summaries", files}, {"model", o.model},
                        {"instances", o.instances ? o.instances->string() : ""}, {"split", o.split}, {"budget", o.budget}};
  write_run_sidecar(sidecar_for(o.out), "pairscore", cfg);
  return kOk;
}

}  // namespace decsum::cli
