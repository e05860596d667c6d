#pragma once

// Automatic summary metrics: faithfulness and truth MSEs, representativeness
// (W1), sentiment buckets, pairwise accuracy, length control, and the kernel
// density curves behind the per-group score plots.

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <map>
#include <numbers>
#include <optional>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include "decsum/corpus.hpp"
#include "decsum/errors.hpp"
#include "decsum/losses.hpp"
#include "decsum/parallel.hpp"
#include "decsum/scoring.hpp"
#include "decsum/selector.hpp"

namespace decsum {

inline constexpr std::size_t kDefaultTokenBudget = 50;

/// Number of leading sentences kept: sentences are taken while the running
/// token total stays within budget, plus the first sentence that crosses it.
inline std::size_t truncate_to_budget(std::span<const std::size_t> token_counts, std::size_t budget) {
  if (budget < 1) throw ConfigError("token budget must be at least 1");
  std::size_t total = 0;
  for (std::size_t i = 0; i < token_counts.size(); ++i) {
    total += token_counts[i];
    if (total > budget) return i + 1;
  }
  return token_counts.size();
}

struct PredictionPair {
  double summary = 0.0;
  double reference = 0.0;
};

/// Mean squared difference; used for both MSE with full and MSE with truth.
inline double mean_squared_error(std::span<const PredictionPair> pairs) {
  if (pairs.empty()) throw DomainError("mean squared error of an empty set");
  double acc = 0.0;
  for (const auto& p : pairs) acc += (p.summary - p.reference) * (p.summary - p.reference);
  return acc / static_cast<double>(pairs.size());
}

/// Mean of (f_summary - f_full)^2 over results.
inline double mse_with_full(std::span<const SummaryResult> results) {
  std::vector<PredictionPair> p;
  for (const auto& r : results) p.push_back({r.f_summary, r.f_full});
  return mean_squared_error(p);
}

/// Mean of (f_summary - y_future)^2, matching results to instances by doc_id.
inline double mse_with_truth(std::span<const SummaryResult> results, const std::vector<TaskInstance>& instances) {
  std::unordered_map<std::string, double> truth;
  for (const auto& inst : instances) truth[inst.doc_id] = inst.y_future;
  std::vector<PredictionPair> p;
  for (const auto& r : results) {
    auto it = truth.find(r.doc_id);
    if (it == truth.end()) throw DomainError("no instance for summary doc " + r.doc_id);
    p.push_back({r.f_summary, it->second});
  }
  return mean_squared_error(p);
}

struct MeanSe {
  double mean = 0.0;
  double se = 0.0;  // sample sd / sqrt(n); 0 for n == 1
};

inline MeanSe mean_and_se(std::span<const double> v) {
  if (v.empty()) throw DomainError("mean of an empty set");
  const double n = static_cast<double>(v.size());
  double mean = 0.0;
  for (double x : v) mean += x;
  mean /= n;
  if (v.size() < 2) return {mean, 0.0};
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  return {mean, std::sqrt(ss / (n - 1.0)) / std::sqrt(n)};
}

/// Per-instance W1 between summary-sentence and all-sentence predictions,
/// with mean and standard error.
inline MeanSe representativeness(std::span<const SummaryResult> results, const DecisionModel& model,
                                 const std::vector<TaskInstance>& instances) {
  std::unordered_map<std::string, const TaskInstance*> by_id;
  for (const auto& inst : instances) by_id[inst.doc_id] = &inst;
  std::vector<double> w;
  for (const auto& r : results) {
    auto it = by_id.find(r.doc_id);
    if (it == by_id.end()) throw DomainError("no instance for summary doc " + r.doc_id);
    if (r.selection_order.empty()) throw DomainError("summary for " + r.doc_id + " is empty");
    const auto full = sentence_distribution(model, *it->second);
    std::vector<double> summary;
    for (auto i : r.selection_order) summary.push_back(full.values.at(i));
    w.push_back(wasserstein_1d(summary, full.values));
  }
  return mean_and_se(w);
}

// ---------------------------------------------------------------------------
// Sentiment

enum class Sentiment { negative, neutral, positive };

/// score < 2.5 negative, [2.5, 3.5) neutral, >= 3.5 positive.
inline Sentiment sentiment_bucket(double score) {
  if (score < 2.5) return Sentiment::negative;
  if (score < 3.5) return Sentiment::neutral;
  return Sentiment::positive;
}

struct SentimentHistogram {
  std::size_t negative = 0, neutral = 0, positive = 0;

  std::size_t total() const { return negative + neutral + positive; }
  void add(double score) {
    switch (sentiment_bucket(score)) {
      case Sentiment::negative: ++negative; break;
      case Sentiment::neutral: ++neutral; break;
      case Sentiment::positive: ++positive; break;
    }
  }
};

inline SentimentHistogram sentiment_buckets(std::span<const double> scores) {
  SentimentHistogram h;
  for (double s : scores) h.add(s);
  return h;
}

// ---------------------------------------------------------------------------
// Pairwise task

struct PairOutcome {
  std::size_t pair_id = 0;
  double pred_a = 0.0;
  double pred_b = 0.0;
  char winner = 'a';
  double credit = 0.0;  // 1 correct, 0.5 exact tie, 0 wrong
};

struct PairwiseReport {
  std::vector<PairOutcome> outcomes;
  double accuracy = 0.0;
};

/// A pair is correct when the doc with the larger prediction is the winner;
/// exact ties earn half credit.
inline PairwiseReport pairwise_accuracy(const std::vector<PairInstance>& pairs,
                                        const std::map<std::string, double>& predictions) {
  if (pairs.empty()) throw DomainError("pairwise accuracy over no pairs");
  PairwiseReport rep;
  double credit = 0.0;
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    const auto& p = pairs[i];
    auto a = predictions.find(p.doc_id_a);
    auto b = predictions.find(p.doc_id_b);
    if (a == predictions.end()) throw DomainError("no prediction for " + p.doc_id_a);
    if (b == predictions.end()) throw DomainError("no prediction for " + p.doc_id_b);
    PairOutcome o{i, a->second, b->second, p.winner, 0.0};
    if (o.pred_a == o.pred_b) o.credit = 0.5;
    else o.credit = ((o.pred_a > o.pred_b) == (p.winner == 'a')) ? 1.0 : 0.0;
    credit += o.credit;
    rep.outcomes.push_back(o);
  }
  rep.accuracy = credit / static_cast<double>(pairs.size());
  return rep;
}

// ---------------------------------------------------------------------------
// Kernel density curves

struct DensityCurve {
  std::vector<double> grid;
  std::vector<double> density;
  double bandwidth = 0.0;
  std::string group_label;
  std::vector<double> selected_points;
};

inline constexpr double kMinBandwidth = 1e-3;

/// Linear-interpolation quantile of sorted data (the common "type 7" rule).
inline double quantile_sorted(std::span<const double> sorted, double q) {
  const double pos = q * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (pos - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

/// Silverman's rule: 0.9 * min(sd, IQR/1.34) * n^(-1/5). When one spread
/// measure is zero the other is used; the result is floored at 1e-3.
inline double silverman_bandwidth(std::span<const double> scores) {
  if (scores.empty()) throw DomainError("bandwidth of an empty sample");
  std::vector<double> s(scores.begin(), scores.end());
  std::sort(s.begin(), s.end());
  const double n = static_cast<double>(s.size());
  double sd = 0.0;
  if (s.size() > 1) {
    double mean = 0.0;
    for (double x : s) mean += x;
    mean /= n;
    for (double x : s) sd += (x - mean) * (x - mean);
    sd = std::sqrt(sd / (n - 1.0));
  }
  const double iqr = (quantile_sorted(s, 0.75) - quantile_sorted(s, 0.25)) / 1.34;
  double spread = std::min(sd, iqr);
  if (spread <= 0.0) spread = std::max(sd, iqr);
  return std::max(0.9 * spread * std::pow(n, -0.2), kMinBandwidth);
}

inline double trapezoid(std::span<const double> x, std::span<const double> y) {
  double acc = 0.0;
  for (std::size_t i = 1; i < x.size(); ++i) acc += 0.5 * (y[i] + y[i - 1]) * (x[i] - x[i - 1]);
  return acc;
}

/// Gaussian KDE on an even grid over [min - 4h, max + 4h]. The grid has at
/// least `grid_size` points and spacing no wider than h/2, so the trapezoid
/// integral of the curve stays within 1e-3 of one.
inline DensityCurve kde_curve(std::span<const double> scores, std::size_t grid_size = 512,
                              std::span<const double> selected = {}, std::string label = {}) {
  if (scores.empty()) throw DomainError("kde_curve: no scores");
  DensityCurve c;
  c.group_label = std::move(label);
  c.selected_points.assign(selected.begin(), selected.end());
  c.bandwidth = silverman_bandwidth(scores);
  const double h = c.bandwidth;
  const auto [mn, mx] = std::minmax_element(scores.begin(), scores.end());
  const double lo = *mn - 4.0 * h, hi = *mx + 4.0 * h;
  constexpr std::size_t kMaxGrid = 1u << 20;
  const auto needed = static_cast<std::size_t>(std::ceil((hi - lo) / (0.5 * h))) + 1;
  const std::size_t m = std::min(std::max({grid_size, needed, std::size_t{2}}), kMaxGrid);
  c.grid.resize(m);
  c.density.assign(m, 0.0);
  const double norm = 1.0 / (static_cast<double>(scores.size()) * h * std::sqrt(2.0 * std::numbers::pi));
  for (std::size_t g = 0; g < m; ++g) {
    const double x = lo + (hi - lo) * static_cast<double>(g) / static_cast<double>(m - 1);
    c.grid[g] = x;
    double acc = 0.0;
    for (double s : scores) {
      const double z = (x - s) / h;
      if (std::abs(z) < 40.0) acc += std::exp(-0.5 * z * z);
    }
    c.density[g] = acc * norm;
  }
  return c;
}

/// Rating group of an early mean: [1.5,2.5) -> 2, [2.5,3.5) -> 3,
/// [3.5,4.5) -> 4, [4.5,5] -> 5; below 1.5 has no group.
inline std::optional<int> rating_group(double y_early) {
  if (y_early < 1.5 || y_early > 5.0) return std::nullopt;
  if (y_early < 2.5) return 2;
  if (y_early < 3.5) return 3;
  if (y_early < 4.5) return 4;
  return 5;
}

struct GroupDistributions {
  std::vector<DensityCurve> curves;
  std::vector<std::string> warnings;
};

inline constexpr std::size_t kMinGroupSentences = 5;

/// One density curve per rating group over pooled sentence-level predictions.
/// `selected` optionally maps doc_id to the predictions of its summary
/// sentences, shown as points on the curve.
inline GroupDistributions group_distributions(const std::vector<TaskInstance>& instances, const DecisionModel& model,
                                              const std::map<std::string, std::vector<double>>& selected = {},
                                              std::size_t grid_size = 512) {
  std::map<int, std::vector<double>> pooled, points;
  for (const auto& inst : instances) {
    const auto g = rating_group(inst.y_early);
    if (!g) continue;
    const auto d = sentence_distribution(model, inst);
    pooled[*g].insert(pooled[*g].end(), d.values.begin(), d.values.end());
    if (auto it = selected.find(inst.doc_id); it != selected.end()) {
      points[*g].insert(points[*g].end(), it->second.begin(), it->second.end());
    }
  }
  GroupDistributions out;
  for (int g = 2; g <= 5; ++g) {
    const auto& v = pooled[g];
    const std::string label = "group" + std::to_string(g);
    if (v.size() < kMinGroupSentences) {
      out.warnings.push_back(label + ": only " + std::to_string(v.size()) + " sentences, curve omitted");
      continue;
    }
    out.curves.push_back(kde_curve(v, grid_size, points[g], label));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Summary evaluation at a token budget

/// Predictions shared by every method evaluated on one instance.
struct InstancePredictions {
  double f_full = 0.0;
  std::vector<double> sentence_scores;
};

inline std::map<std::string, InstancePredictions> predict_instances(const std::vector<TaskInstance>& instances,
                                                                    const DecisionModel& model, std::size_t workers = 1) {
  std::vector<InstancePredictions> slots(instances.size());
  parallel_for(instances.size(), workers, [&](std::size_t i) {
    slots[i].f_full = model.score(instances[i].full_text);
    slots[i].sentence_scores = sentence_distribution(model, instances[i]).values;
  });
  std::map<std::string, InstancePredictions> out;
  for (std::size_t i = 0; i < instances.size(); ++i) out.emplace(instances[i].doc_id, std::move(slots[i]));
  return out;
}

struct EvaluatedSummary {
  std::string doc_id;
  std::vector<std::size_t> kept;  // truncated selection order
  double f_summary = 0.0;
  double f_full = 0.0;
  double y_future = 0.0;
  double w1 = 0.0;
};

/// Truncates one summary's ranking to the budget and scores the result.
inline std::vector<std::size_t> truncated_selection(const SummaryResult& r, const TaskInstance& inst, std::size_t budget) {
  std::vector<std::size_t> counts;
  for (auto i : r.selection_order) {
    if (i >= inst.sentences.size()) throw ConfigError("summary for " + r.doc_id + " references sentence " + std::to_string(i));
    counts.push_back(inst.sentences[i].token_count);
  }
  const auto keep = truncate_to_budget(counts, budget);
  return {r.selection_order.begin(), r.selection_order.begin() + static_cast<std::ptrdiff_t>(keep)};
}

struct MetricsRow {
  std::string method;
  std::size_t budget = 0;
  std::size_t n = 0;
  double mse_full = 0.0;
  double mse_truth = 0.0;
  double mean_w1 = 0.0;
  double se_w1 = 0.0;
  SentimentHistogram sentiment;
  std::vector<EvaluatedSummary> details;  // sorted by doc_id
};

/// Metrics for one method's summaries at one token budget.
inline MetricsRow evaluate_summaries(const std::string& method, const std::vector<SummaryResult>& summaries,
                                     const std::map<std::string, const TaskInstance*>& instances,
                                     const std::map<std::string, InstancePredictions>& preds,
                                     const DecisionModel& model, std::size_t budget) {
  if (summaries.empty()) throw DomainError("no summaries for method " + method);
  MetricsRow row;
  row.method = method;
  row.budget = budget;
  std::vector<std::string> texts;
  for (const auto& r : summaries) {
    auto it = instances.find(r.doc_id);
    if (it == instances.end()) throw ConfigError("summary references unknown doc " + r.doc_id);
    if (r.selection_order.empty()) throw DomainError("empty summary for " + r.doc_id);
    const auto& inst = *it->second;
    const auto& p = preds.at(r.doc_id);
    EvaluatedSummary e;
    e.doc_id = r.doc_id;
    e.kept = truncated_selection(r, inst, budget);
    e.f_full = p.f_full;
    e.y_future = inst.y_future;
    std::vector<double> summary_scores;
    for (auto i : e.kept) {
      summary_scores.push_back(p.sentence_scores[i]);
      row.sentiment.add(p.sentence_scores[i]);
    }
    e.w1 = wasserstein_1d(summary_scores, p.sentence_scores);
    texts.push_back(canonicalize(e.kept, inst, r.order_mode));
    row.details.push_back(std::move(e));
  }
  const auto scores = model.score_batch(texts);
  std::vector<PredictionPair> full, truth;
  std::vector<double> w1;
  for (std::size_t i = 0; i < row.details.size(); ++i) {
    auto& e = row.details[i];
    e.f_summary = scores[i];
    full.push_back({e.f_summary, e.f_full});
    truth.push_back({e.f_summary, e.y_future});
    w1.push_back(e.w1);
  }
  row.n = row.details.size();
  row.mse_full = mean_squared_error(full);
  row.mse_truth = mean_squared_error(truth);
  const auto ws = mean_and_se(w1);
  row.mean_w1 = ws.mean;
  row.se_w1 = ws.se;
  std::sort(row.details.begin(), row.details.end(), [](const auto& a, const auto& b) { return a.doc_id < b.doc_id; });
  return row;
}

/// One row per (method, budget): every method's ranking re-truncated at
/// every budget. Methods keep their given order; budgets vary fastest.
inline std::vector<MetricsRow> length_sweep(const std::vector<std::pair<std::string, std::vector<SummaryResult>>>& methods,
                                            const std::vector<std::size_t>& budgets,
                                            const std::map<std::string, const TaskInstance*>& instances,
                                            const std::map<std::string, InstancePredictions>& preds,
                                            const DecisionModel& model) {
  std::vector<MetricsRow> rows;
  for (const auto& [name, summaries] : methods) {
    for (auto b : budgets) rows.push_back(evaluate_summaries(name, summaries, instances, preds, model, b));
  }
  return rows;
}

/// Fraction of instances where `a` has strictly lower W1 than `b` (paired by doc).
inline double paired_w1_wins(const MetricsRow& a, const MetricsRow& b) {
  std::map<std::string, double> wb;
  for (const auto& e : b.details) wb[e.doc_id] = e.w1;
  std::size_t n = 0, wins = 0;
  for (const auto& e : a.details) {
    auto it = wb.find(e.doc_id);
    if (it == wb.end()) continue;
    ++n;
    if (e.w1 < it->second) ++wins;
  }
  return n == 0 ? 0.0 : static_cast<double>(wins) / static_cast<double>(n);
}

// ---------------------------------------------------------------------------
// Report writers

inline void write_metrics_csv(std::ostream& os, const std::vector<MetricsRow>& rows) {
  os << "method,budget,n,mse_full,mse_truth,mean_w1,se_w1,neg,neu,pos\n";
  os << std::setprecision(10);
  for (const auto& r : rows) {
    os << r.method << ',' << r.budget << ',' << r.n << ',' << r.mse_full << ',' << r.mse_truth << ',' << r.mean_w1 << ','
       << r.se_w1 << ',' << r.sentiment.negative << ',' << r.sentiment.neutral << ',' << r.sentiment.positive << '\n';
  }
}

inline void write_density_csv(std::ostream& os, const std::vector<DensityCurve>& curves) {
  os << "group_label,grid,density\n" << std::setprecision(10);
  for (const auto& c : curves) {
    for (std::size_t i = 0; i < c.grid.size(); ++i) os << c.group_label << ',' << c.grid[i] << ',' << c.density[i] << '\n';
  }
}

inline void write_selected_points_csv(std::ostream& os, const std::vector<DensityCurve>& curves) {
  os << "group_label,score\n" << std::setprecision(10);
  for (const auto& c : curves) {
    for (double s : c.selected_points) os << c.group_label << ',' << s << '\n';
  }
}

/// Minimal line plot of one curve, 800x400 viewBox, selected points as dots.
inline void write_density_svg(std::ostream& os, const DensityCurve& c) {
  constexpr double W = 800, H = 400, pad = 40;
  const double x0 = c.grid.front(), x1 = c.grid.back();
  const double ymax = std::max(*std::max_element(c.density.begin(), c.density.end()), 1e-12);
  auto px = [&](double x) { return pad + (W - 2 * pad) * (x - x0) / (x1 - x0); };
  auto py = [&](double y) { return H - pad - (H - 2 * pad) * y / ymax; };
  os << std::fixed << std::setprecision(2);
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"0 0 800 400\" width=\"800\" height=\"400\">\n";
  os << "<rect width=\"800\" height=\"400\" fill=\"white\"/>\n";
  os << "<line x1=\"" << pad << "\" y1=\"" << H - pad << "\" x2=\"" << W - pad << "\" y2=\"" << H - pad
     << "\" stroke=\"black\"/>\n";
  os << "<polyline fill=\"none\" stroke=\"steelblue\" stroke-width=\"2\" points=\"";
  const std::size_t stride = std::max<std::size_t>(1, c.grid.size() / 2000);
  for (std::size_t i = 0; i < c.grid.size(); i += stride) os << px(c.grid[i]) << ',' << py(c.density[i]) << ' ';
  os << "\"/>\n";
  for (double s : c.selected_points) {
    if (s < x0 || s > x1) continue;
    os << "<circle cx=\"" << px(s) << "\" cy=\"" << H - pad << "\" r=\"4\" fill=\"crimson\"/>\n";
  }
  os << "<text x=\"" << pad << "\" y=\"24\" font-family=\"sans-serif\" font-size=\"16\">" << c.group_label
     << " (h=" << c.bandwidth << ")</text>\n";
  os << "<text x=\"" << pad << "\" y=\"" << H - 12 << "\" font-family=\"sans-serif\" font-size=\"12\">" << x0 << "</text>\n";
  os << "<text x=\"" << W - pad - 40 << "\" y=\"" << H - 12 << "\" font-family=\"sans-serif\" font-size=\"12\">" << x1
     << "</text>\n";
  os << "</svg>\n";
}

}  // namespace decsum
