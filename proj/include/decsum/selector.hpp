#pragma once

// Greedy sentence selection with beam search over the combined loss.

#include <algorithm>
#include <cstddef>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "decsum/corpus.hpp"
#include "decsum/errors.hpp"
#include "decsum/losses.hpp"
#include "decsum/scoring.hpp"

namespace decsum {

/// How selected sentences are concatenated into the emitted summary text.
/// Losses are always computed on the original-order text.
enum class OrderMode { original, selected };

inline std::string_view to_string(OrderMode m) { return m == OrderMode::original ? "original" : "selected"; }

inline OrderMode parse_order_mode(std::string_view s) {
  if (s == "original") return OrderMode::original;
  if (s == "selected") return OrderMode::selected;
  throw ConfigError("unknown order mode '" + std::string(s) + "' (expected original or selected)");
}

struct SelectionConfig {
  LossWeights weights;
  std::size_t max_sentences = 15;
  std::size_t beam_size = 4;
  OrderMode order_mode = OrderMode::original;
  double eps = kDefaultEps;
  std::uint64_t seed = 0;

  void validate() const {
    if (!weights.valid()) throw ConfigError("loss weights must be finite and nonnegative");
    if (!weights.any_positive()) throw ConfigError("at least one of alpha, beta, gamma must be positive");
    if (max_sentences < 1) throw ConfigError("K (max sentences) must be at least 1");
    if (beam_size < 1) throw ConfigError("beam size must be at least 1");
    if (!(eps > 0)) throw ConfigError("eps must be positive");
  }
};

struct Beam {
  std::vector<std::size_t> selected;  // selection order
  LossBreakdown loss;
  double rank_key = 0.0;  // L_R at a first step with beta > 0, total otherwise
  std::string canonical_text;
};

struct SelectedSentence {
  std::size_t review_index = 0;
  std::size_t sent_index = 0;
  std::string text;
};

struct SummaryResult {
  std::string doc_id;
  std::string method;
  std::string label;
  OrderMode order_mode = OrderMode::original;
  std::vector<std::size_t> selection_order;
  std::vector<SelectedSentence> selected;  // canonical order
  double f_summary = 0.0;
  double f_full = 0.0;
  LossBreakdown loss;
  LossWeights weights;
  std::size_t max_sentences = 0;
  std::size_t beam_size = 0;
};

/// Per-step beams, for inspection in tests and diagnostics.
using BeamTrace = std::vector<std::vector<Beam>>;

/// Sentence indices in the order used for the summary text.
inline std::vector<std::size_t> canonical_order(std::span<const std::size_t> selection, std::size_t n_sentences,
                                                OrderMode mode) {
  std::vector<bool> seen(n_sentences, false);
  for (auto i : selection) {
    if (i >= n_sentences) throw ContractViolation("sentence index " + std::to_string(i) + " out of range");
    if (seen[i]) throw ContractViolation("duplicate sentence index " + std::to_string(i));
    seen[i] = true;
  }
  std::vector<std::size_t> out(selection.begin(), selection.end());
  if (mode == OrderMode::original) std::sort(out.begin(), out.end());
  return out;
}

/// Selected sentences joined by single spaces: ascending document order in
/// original mode, selection order in selected mode.
inline std::string canonicalize(std::span<const std::size_t> selection, const TaskInstance& inst, OrderMode mode) {
  std::vector<std::string_view> parts;
  for (auto i : canonical_order(selection, inst.sentences.size(), mode)) parts.push_back(inst.sentences[i].text);
  return text::join(parts, " ");
}

namespace detail {

/// Tie-break after the loss: lower index of the newest sentence, then the
/// lexicographically smaller selection sequence.
inline bool tie_break_less(const std::vector<std::size_t>& a, const std::vector<std::size_t>& b) {
  if (a.back() != b.back()) return a.back() < b.back();
  return a < b;
}

inline bool beam_less(const Beam& a, const Beam& b) {
  if (a.rank_key != b.rank_key) return a.rank_key < b.rank_key;
  return tie_break_less(a.selected, b.selected);
}

inline bool beam_total_less(const Beam& a, const Beam& b) {
  if (a.loss.total != b.loss.total) return a.loss.total < b.loss.total;
  return tie_break_less(a.selected, b.selected);
}

inline std::string decsum_label(const SelectionConfig& cfg) {
  auto num = [](double v) {
    std::ostringstream os;
    os << v;
    return os.str();
  };
  std::string label = "decsum(" + num(cfg.weights.alpha) + "," + num(cfg.weights.beta) + "," + num(cfg.weights.gamma) + ")";
  if (cfg.order_mode == OrderMode::selected) label += "/selected";
  return label;
}

}  // namespace detail

/// Fills text fields and predictions of a result from its selection order.
inline void finish_result(SummaryResult& r, const TaskInstance& inst, const DecisionModel& model,
                          std::optional<double> f_summary_known = std::nullopt,
                          std::optional<double> f_full_known = std::nullopt) {
  r.doc_id = inst.doc_id;
  r.selected.clear();
  const auto order = canonical_order(r.selection_order, inst.sentences.size(), r.order_mode);
  for (auto i : order) {
    const auto& s = inst.sentences[i];
    r.selected.push_back({s.review_index, s.sent_index, s.text});
  }
  r.f_summary = f_summary_known ? *f_summary_known : model.score(canonicalize(r.selection_order, inst, r.order_mode));
  r.f_full = f_full_known ? *f_full_known : model.score(inst.full_text);
}

/// Beam search over the combined loss. At each step every beam is extended by
/// every remaining sentence and the beam_size lowest-loss candidates are kept;
/// at the first step with beta > 0 candidates are ranked by L_R alone. In
/// original mode candidates covering the same sentence set are merged. The
/// result is the lowest-loss beam after min(K, S) steps.
inline SummaryResult decsum_select(const TaskInstance& inst, const DecisionModel& model, const Embedder* embedder,
                                   const SelectionConfig& cfg, BeamTrace* trace = nullptr) {
  cfg.validate();
  const LossContext ctx(inst, model, embedder, cfg.weights, cfg.eps);
  const std::size_t S = inst.sentences.size();
  const std::size_t steps = std::min(cfg.max_sentences, S);
  const bool first_step_rule = cfg.weights.beta > 0;

  std::vector<Beam> beams(1);
  std::map<std::vector<std::size_t>, double> f_cache;  // sorted set -> prediction on its original-order text

  for (std::size_t step = 1; step <= steps; ++step) {
    std::vector<Beam> cands;
    for (const auto& b : beams) {
      std::vector<bool> used(S, false);
      for (auto i : b.selected) used[i] = true;
      for (std::size_t j = 0; j < S; ++j) {
        if (used[j]) continue;
        Beam c;
        c.selected = b.selected;
        c.selected.push_back(j);
        cands.push_back(std::move(c));
      }
    }

    if (cfg.order_mode == OrderMode::original) {
      std::map<std::vector<std::size_t>, std::size_t> best_for_set;
      for (std::size_t ci = 0; ci < cands.size(); ++ci) {
        auto key = cands[ci].selected;
        std::sort(key.begin(), key.end());
        auto [it, inserted] = best_for_set.try_emplace(std::move(key), ci);
        if (!inserted && detail::tie_break_less(cands[ci].selected, cands[it->second].selected)) it->second = ci;
      }
      std::vector<Beam> unique;
      unique.reserve(best_for_set.size());
      for (const auto& [_, ci] : best_for_set) unique.push_back(std::move(cands[ci]));
      cands = std::move(unique);
    }

    std::vector<std::vector<std::size_t>> keys(cands.size());
    for (std::size_t ci = 0; ci < cands.size(); ++ci) {
      keys[ci] = cands[ci].selected;
      std::sort(keys[ci].begin(), keys[ci].end());
      cands[ci].canonical_text = ctx.canonical_text(cands[ci].selected);
    }
    if (ctx.needs_summary_prediction()) {
      std::vector<std::string> texts;
      std::vector<const std::vector<std::size_t>*> pending;
      std::set<std::vector<std::size_t>> queued;
      for (std::size_t ci = 0; ci < cands.size(); ++ci) {
        if (f_cache.count(keys[ci]) || queued.count(keys[ci])) continue;
        queued.insert(keys[ci]);
        texts.push_back(cands[ci].canonical_text);
        pending.push_back(&keys[ci]);
      }
      const auto scores = model.score_batch(texts);
      for (std::size_t i = 0; i < pending.size(); ++i) f_cache[*pending[i]] = scores[i];
    }

    for (std::size_t ci = 0; ci < cands.size(); ++ci) {
      auto& c = cands[ci];
      const double f = ctx.needs_summary_prediction() ? f_cache.at(keys[ci]) : 0.0;
      c.loss = ctx.evaluate(c.selected, f);
      c.rank_key = (step == 1 && first_step_rule) ? *c.loss.l_r : c.loss.total;
    }
    std::sort(cands.begin(), cands.end(), detail::beam_less);
    if (cands.size() > cfg.beam_size) cands.resize(cfg.beam_size);
    beams = std::move(cands);
    if (trace) trace->push_back(beams);
  }

  const Beam& best = *std::min_element(beams.begin(), beams.end(), detail::beam_total_less);
  SummaryResult r;
  r.method = "decsum";
  r.label = detail::decsum_label(cfg);
  r.order_mode = cfg.order_mode;
  r.selection_order = best.selected;
  r.loss = best.loss;
  r.weights = cfg.weights;
  r.max_sentences = cfg.max_sentences;
  r.beam_size = cfg.beam_size;
  std::optional<double> f_summary;
  if (cfg.order_mode == OrderMode::original && ctx.needs_summary_prediction()) {
    auto key = best.selected;
    std::sort(key.begin(), key.end());
    f_summary = f_cache.at(key);
  }
  finish_result(r, inst, model, f_summary, ctx.f_full());
  return r;
}

inline constexpr std::size_t kRankAllK = 15;

/// Ranked selection of up to K sentences (default 15) whose prefixes feed
/// budget truncation at evaluation time.
inline SummaryResult rank_all(const TaskInstance& inst, const DecisionModel& model, const Embedder* embedder,
                              SelectionConfig cfg, std::size_t K = kRankAllK) {
  cfg.max_sentences = K;
  return decsum_select(inst, model, embedder, cfg);
}

// ---------------------------------------------------------------------------
// Summary JSONL

inline nlohmann::json optional_json(const std::optional<double>& v) {
  return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
}

inline nlohmann::json to_json(const SummaryResult& r) {
  nlohmann::json sel = nlohmann::json::array();
  for (const auto& s : r.selected) {
    sel.push_back({{"review_index", s.review_index}, {"sent_index", s.sent_index}, {"text", s.text}});
  }
  nlohmann::json j;
  j["doc_id"] = r.doc_id;
  j["method"] = r.method;
  j["label"] = r.label;
  j["order"] = std::string(to_string(r.order_mode));
  j["selected"] = sel;
  j["selection_order"] = r.selection_order;
  j["f_summary"] = r.f_summary;
  j["f_full"] = r.f_full;
  j["l_f"] = optional_json(r.loss.l_f);
  j["l_r"] = optional_json(r.loss.l_r);
  j["l_d"] = optional_json(r.loss.l_d);
  j["total"] = r.loss.total;
  j["f_clamped"] = r.loss.f_clamped;
  j["r_clamped"] = r.loss.r_clamped;
  j["weights"] = {r.weights.alpha, r.weights.beta, r.weights.gamma};
  j["k"] = r.max_sentences;
  j["beam_size"] = r.beam_size;
  return j;
}

inline SummaryResult summary_from_json(const nlohmann::json& j) {
  SummaryResult r;
  r.doc_id = j.at("doc_id").get<std::string>();
  r.method = j.at("method").get<std::string>();
  r.label = j.value("label", r.method);
  r.order_mode = parse_order_mode(j.value("order", std::string("original")));
  for (const auto& s : j.at("selected")) {
    r.selected.push_back({s.at("review_index").get<std::size_t>(), s.at("sent_index").get<std::size_t>(),
                          s.at("text").get<std::string>()});
  }
  if (j.contains("selection_order")) {
    r.selection_order = j["selection_order"].get<std::vector<std::size_t>>();
  } else {
    for (const auto& s : r.selected) r.selection_order.push_back(s.sent_index);
  }
  r.f_summary = j.at("f_summary").get<double>();
  r.f_full = j.at("f_full").get<double>();
  auto opt = [&](const char* k) -> std::optional<double> {
    if (!j.contains(k) || j[k].is_null()) return std::nullopt;
    return j[k].get<double>();
  };
  r.loss.l_f = opt("l_f");
  r.loss.l_r = opt("l_r");
  r.loss.l_d = opt("l_d");
  r.loss.total = j.value("total", 0.0);
  r.loss.f_clamped = j.value("f_clamped", false);
  r.loss.r_clamped = j.value("r_clamped", false);
  if (j.contains("weights")) {
    const auto w = j["weights"].get<std::vector<double>>();
    if (w.size() == 3) r.weights = {w[0], w[1], w[2]};
  }
  r.max_sentences = j.value("k", std::size_t{0});
  r.beam_size = j.value("beam_size", std::size_t{0});
  return r;
}

inline void write_summaries(std::ostream& os, const std::vector<SummaryResult>& results) {
  for (const auto& r : results) os << to_json(r).dump() << '\n';
}

inline std::vector<SummaryResult> read_summaries(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open summaries file " + path.string());
  std::vector<SummaryResult> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (text::whitespace_token_count(line) == 0) continue;
    try {
      out.push_back(summary_from_json(nlohmann::json::parse(line)));
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

}  // namespace decsum
