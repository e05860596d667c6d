#pragma once

// The three summary losses (decision faithfulness, decision
// representativeness, textual non-redundancy) and their weighted sum.

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "decsum/corpus.hpp"
#include "decsum/errors.hpp"
#include "decsum/scoring.hpp"
#include "decsum/text.hpp"

namespace decsum {

inline constexpr double kDefaultEps = 1e-6;

struct LossWeights {
  double alpha = 1.0;
  double beta = 1.0;
  double gamma = 1.0;

  bool valid() const {
    return std::isfinite(alpha) && std::isfinite(beta) && std::isfinite(gamma) && alpha >= 0 && beta >= 0 && gamma >= 0;
  }
  bool any_positive() const { return alpha > 0 || beta > 0 || gamma > 0; }
};

/// Components are empty when their weight is zero and they were not computed.
struct LossBreakdown {
  std::optional<double> l_f;
  std::optional<double> l_r;
  std::optional<double> l_d;
  double total = 0.0;
  bool f_clamped = false;
  bool r_clamped = false;
};

/// Exact W1 between the uniform empirical distributions of `a` and `b`:
/// the integral of |F_a - F_b| over the merged sorted support.
inline double wasserstein_1d(std::span<const double> a, std::span<const double> b) {
  if (a.empty() || b.empty()) throw DomainError("wasserstein_1d: both samples must be non-empty");
  std::vector<double> x(a.begin(), a.end()), y(b.begin(), b.end());
  for (double v : x) {
    if (!std::isfinite(v)) throw DomainError("wasserstein_1d: non-finite value");
  }
  for (double v : y) {
    if (!std::isfinite(v)) throw DomainError("wasserstein_1d: non-finite value");
  }
  std::sort(x.begin(), x.end());
  std::sort(y.begin(), y.end());
  const auto m = static_cast<long double>(x.size());
  const auto n = static_cast<long double>(y.size());
  std::size_t i = 0, j = 0;
  long double acc = 0.0L;
  // CDF values are i/m and j/n; |i/m - j/n| = |i*n - j*m| / (m*n).
  double prev = std::min(x.front(), y.front());
  while (i < x.size() || j < y.size()) {
    const double next = j >= y.size() || (i < x.size() && x[i] <= y[j]) ? x[i] : y[j];
    const long double gap = static_cast<long double>(i) * n - static_cast<long double>(j) * m;
    acc += (gap < 0 ? -gap : gap) * (static_cast<long double>(next) - prev);
    prev = next;
    while (i < x.size() && x[i] == next) ++i;
    while (j < y.size() && y[j] == next) ++j;
  }
  return static_cast<double>(acc / (m * n));
}

inline std::pair<double, bool> clamped_log(double x, double eps) {
  return x > eps ? std::pair{std::log(x), false} : std::pair{std::log(eps), true};
}

/// ln(max(|pred_summary - pred_full|, eps)) and whether the clamp bound.
inline std::pair<double, bool> loss_faithfulness(double pred_summary, double pred_full, double eps = kDefaultEps) {
  return clamped_log(std::abs(pred_summary - pred_full), eps);
}

/// ln(max(W1(summary, full), eps)) and whether the clamp bound.
inline std::pair<double, bool> loss_representativeness(const ScoreDistribution& summary, const ScoreDistribution& full,
                                                       double eps = kDefaultEps) {
  return clamped_log(wasserstein_1d(summary.values, full.values), eps);
}

/// Cosine similarity; 0 when either vector is zero.
inline double cosine(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw ContractViolation("cosine: dimension mismatch");
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  if (na == 0.0 || nb == 0.0) return 0.0;
  return dot / (std::sqrt(na) * std::sqrt(nb));
}

/// Sum over items of the maximum cosine to any other item; 0 for fewer than two.
inline double loss_redundancy(const std::vector<std::vector<double>>& embeddings) {
  if (embeddings.size() < 2) return 0.0;
  double total = 0.0;
  for (std::size_t i = 0; i < embeddings.size(); ++i) {
    double best = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < embeddings.size(); ++j) {
      if (j != i) best = std::max(best, cosine(embeddings[i], embeddings[j]));
    }
    total += best;
  }
  return total;
}

/// Per-instance caches for evaluating many candidate summaries: the full-text
/// prediction, per-sentence predictions (only if beta > 0) and the pairwise
/// sentence cosine matrix (only if gamma > 0).
class LossContext {
 public:
  LossContext(const TaskInstance& inst, const DecisionModel& model, const Embedder* embedder, LossWeights weights,
              double eps = kDefaultEps)
      : inst_(&inst), model_(&model), weights_(weights), eps_(eps) {
    if (!weights.valid()) throw ConfigError("loss weights must be finite and nonnegative");
    if (!(eps > 0)) throw ConfigError("eps must be positive");
    if (inst.sentences.empty()) throw DomainError("instance " + inst.doc_id + " has no sentences");
    if (weights.alpha > 0) f_full_ = model.score(inst.full_text);
    if (weights.beta > 0) full_dist_ = sentence_distribution(model, inst);
    if (weights.gamma > 0) {
      if (embedder == nullptr) throw ConfigError("gamma > 0 requires an embedder");
      const std::size_t S = inst.sentences.size();
      std::vector<std::vector<double>> emb;
      emb.reserve(S);
      for (const auto& s : inst.sentences) emb.push_back(embedder->embed(s.text));
      similarity_.assign(S * S, 0.0);
      for (std::size_t i = 0; i < S; ++i) {
        for (std::size_t j = i + 1; j < S; ++j) {
          similarity_[i * S + j] = similarity_[j * S + i] = cosine(emb[i], emb[j]);
        }
      }
    }
  }

  const TaskInstance& instance() const { return *inst_; }
  const DecisionModel& model() const { return *model_; }
  const LossWeights& weights() const { return weights_; }
  double eps() const { return eps_; }
  /// Full-text prediction; only computed when alpha > 0.
  std::optional<double> f_full() const { return f_full_; }
  bool needs_summary_prediction() const { return weights_.alpha > 0; }

  /// Per-sentence predictions; empty when beta == 0.
  const std::vector<double>& sentence_scores() const { return full_dist_.values; }

  /// Original-order text of a selection.
  std::string canonical_text(std::span<const std::size_t> selection) const {
    std::vector<std::size_t> idx(selection.begin(), selection.end());
    std::sort(idx.begin(), idx.end());
    std::vector<std::string_view> parts;
    for (auto i : idx) parts.push_back(inst_->sentences[i].text);
    return text::join(parts, " ");
  }

  /// L_R of a selection; requires beta > 0.
  std::pair<double, bool> representativeness(std::span<const std::size_t> selection) const {
    ScoreDistribution summary{{}, DistributionSource::summary};
    for (auto i : selection) summary.values.push_back(full_dist_.values.at(i));
    return loss_representativeness(summary, full_dist_, eps_);
  }

  /// L_D from the cached cosine matrix; requires gamma > 0.
  double redundancy(std::span<const std::size_t> selection) const {
    if (selection.size() < 2) return 0.0;
    std::vector<std::size_t> idx(selection.begin(), selection.end());
    std::sort(idx.begin(), idx.end());
    const std::size_t S = inst_->sentences.size();
    double total = 0.0;
    for (auto i : idx) {
      double best = -std::numeric_limits<double>::infinity();
      for (auto j : idx) {
        if (j != i) best = std::max(best, similarity_[i * S + j]);
      }
      total += best;
    }
    return total;
  }

  /// Combined loss of a selection given the model's prediction on its
  /// original-order text (ignored when alpha == 0). Depends only on the set.
  LossBreakdown evaluate(std::span<const std::size_t> selection, double f_summary) const {
    validate(selection);
    LossBreakdown out;
    if (weights_.alpha > 0) {
      auto [v, c] = loss_faithfulness(f_summary, *f_full_, eps_);
      out.l_f = v;
      out.f_clamped = c;
      out.total += weights_.alpha * v;
    }
    if (weights_.beta > 0) {
      auto [v, c] = representativeness(selection);
      out.l_r = v;
      out.r_clamped = c;
      out.total += weights_.beta * v;
    }
    if (weights_.gamma > 0) {
      out.l_d = redundancy(selection);
      out.total += weights_.gamma * *out.l_d;
    }
    return out;
  }

  void validate(std::span<const std::size_t> selection) const {
    if (selection.empty()) throw ContractViolation("summary must select at least one sentence");
    std::vector<bool> seen(inst_->sentences.size(), false);
    for (auto i : selection) {
      if (i >= seen.size()) throw ContractViolation("sentence index " + std::to_string(i) + " out of range");
      if (seen[i]) throw ContractViolation("duplicate sentence index " + std::to_string(i));
      seen[i] = true;
    }
  }

 private:
  const TaskInstance* inst_;
  const DecisionModel* model_;
  LossWeights weights_;
  double eps_;
  std::optional<double> f_full_;
  ScoreDistribution full_dist_;
  std::vector<double> similarity_;
};

/// alpha*L_F + beta*L_R + gamma*L_D for one selection. Zero-weight components
/// make no model or embedder calls.
inline LossBreakdown combined_loss(std::span<const std::size_t> selection, const TaskInstance& inst,
                                   const DecisionModel& model, const Embedder* embedder, LossWeights weights,
                                   double eps = kDefaultEps) {
  const LossContext ctx(inst, model, embedder, weights, eps);
  ctx.validate(selection);
  const double f_summary = ctx.needs_summary_prediction() ? model.score(ctx.canonical_text(selection)) : 0.0;
  return ctx.evaluate(selection, f_summary);
}

}  // namespace decsum
