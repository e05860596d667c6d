#pragma once

// Reference summarizers: seeded random sentences, leading sentences, and
// leave-one-out occlusion attribution.

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <string_view>
#include <vector>

#include "decsum/corpus.hpp"
#include "decsum/errors.hpp"
#include "decsum/losses.hpp"
#include "decsum/rng.hpp"
#include "decsum/scoring.hpp"
#include "decsum/selector.hpp"

namespace decsum {

enum class Method { decsum, random, lead, occlusion };

inline Method parse_method(std::string_view s) {
  if (s == "decsum") return Method::decsum;
  if (s == "random") return Method::random;
  if (s == "lead") return Method::lead;
  if (s == "occlusion") return Method::occlusion;
  throw ConfigError("unknown method '" + std::string(s) + "' (expected decsum, random, lead or occlusion)");
}

/// Losses of a fixed selection under `weights`, for reporting. Skipped (all
/// empty, total 0) when every weight is zero.
inline LossBreakdown report_losses(std::span<const std::size_t> selection, const TaskInstance& inst,
                                   const DecisionModel& model, const Embedder* embedder, LossWeights weights,
                                   double eps = kDefaultEps) {
  if (!weights.any_positive()) return {};
  return combined_loss(selection, inst, model, embedder, weights, eps);
}

namespace detail {

inline SummaryResult baseline_result(std::string method, std::vector<std::size_t> order, const TaskInstance& inst,
                                     const DecisionModel& model, const Embedder* embedder, LossWeights weights,
                                     std::size_t K) {
  SummaryResult r;
  r.method = method;
  r.label = std::move(method);
  r.order_mode = OrderMode::original;
  r.selection_order = std::move(order);
  r.weights = weights;
  r.max_sentences = K;
  r.loss = report_losses(r.selection_order, inst, model, embedder, weights);
  finish_result(r, inst, model);
  return r;
}

inline void require_sentences(const TaskInstance& inst, std::size_t K) {
  if (inst.sentences.empty()) throw DomainError("instance " + inst.doc_id + " has no sentences");
  if (K < 1) throw ConfigError("K must be at least 1");
}

}  // namespace detail

/// Uniform sample of min(K, S) sentences without replacement. The RNG is keyed
/// by (seed, doc_id) so output does not depend on processing order.
inline std::vector<std::size_t> random_order(const TaskInstance& inst, std::uint64_t seed, std::size_t K) {
  detail::require_sentences(inst, K);
  std::vector<std::size_t> idx(inst.sentences.size());
  std::iota(idx.begin(), idx.end(), 0);
  Rng rng(seed, inst.doc_id);
  const std::size_t take = std::min(K, idx.size());
  for (std::size_t i = 0; i < take; ++i) std::swap(idx[i], idx[i + rng.below(idx.size() - i)]);
  idx.resize(take);
  return idx;
}

inline SummaryResult random_select(const TaskInstance& inst, const DecisionModel& model, const Embedder* embedder,
                                   std::uint64_t seed, std::size_t K, LossWeights weights = {}) {
  return detail::baseline_result("random", random_order(inst, seed, K), inst, model, embedder, weights, K);
}

inline std::vector<std::size_t> lead_order(const TaskInstance& inst, std::size_t K) {
  detail::require_sentences(inst, K);
  std::vector<std::size_t> idx(std::min(K, inst.sentences.size()));
  std::iota(idx.begin(), idx.end(), 0);
  return idx;
}

inline SummaryResult lead_select(const TaskInstance& inst, const DecisionModel& model, const Embedder* embedder,
                                 std::size_t K, LossWeights weights = {}) {
  return detail::baseline_result("lead", lead_order(inst, K), inst, model, embedder, weights, K);
}

/// |f(X) - f(X without sentence i)| for every sentence, where the reduced
/// input is the original-order concatenation of the other sentences (the
/// empty string when S == 1).
inline std::vector<double> occlusion_importance(const TaskInstance& inst, const DecisionModel& model) {
  if (inst.sentences.empty()) throw DomainError("instance " + inst.doc_id + " has no sentences");
  const std::size_t S = inst.sentences.size();
  std::vector<std::string> texts;
  texts.reserve(S);
  for (std::size_t drop = 0; drop < S; ++drop) {
    std::vector<std::string_view> parts;
    for (std::size_t i = 0; i < S; ++i) {
      if (i != drop) parts.push_back(inst.sentences[i].text);
    }
    texts.push_back(text::join(parts, " "));
  }
  const double full = model.score(inst.full_text);
  const auto reduced = model.score_batch(texts);
  std::vector<double> out(S);
  for (std::size_t i = 0; i < S; ++i) out[i] = std::abs(full - reduced[i]);
  return out;
}

/// Sentences ranked by descending occlusion importance, ties to the lower index.
inline std::vector<std::size_t> occlusion_order(const TaskInstance& inst, const DecisionModel& model, std::size_t K) {
  detail::require_sentences(inst, K);
  const auto imp = occlusion_importance(inst, model);
  std::vector<std::size_t> idx(imp.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return imp[a] > imp[b]; });
  idx.resize(std::min(K, idx.size()));
  return idx;
}

inline SummaryResult occlusion_select(const TaskInstance& inst, const DecisionModel& model, const Embedder* embedder,
                                      std::size_t K, LossWeights weights = {}) {
  return detail::baseline_result("occlusion", occlusion_order(inst, model, K), inst, model, embedder, weights, K);
}

}  // namespace decsum
