#include <gtest/gtest.h>

#include <cmath>
#include <numeric>
#include <sstream>

#include "decsum/baselines.hpp"
#include "decsum/eval.hpp"
#include "oracles.hpp"

using namespace decsum;

namespace {

SummaryResult fake_result(std::string doc, double f_summary, double f_full) {
  SummaryResult r;
  r.doc_id = std::move(doc);
  r.f_summary = f_summary;
  r.f_full = f_full;
  return r;
}

double trapezoid_integral(const DensityCurve& c) {
  double acc = 0;
  for (std::size_t i = 1; i < c.grid.size(); ++i) acc += (c.grid[i] - c.grid[i - 1]) * (c.density[i] + c.density[i - 1]) / 2;
  return acc;
}

std::map<std::string, const TaskInstance*> index(const std::vector<TaskInstance>& v) {
  std::map<std::string, const TaskInstance*> m;
  for (const auto& i : v) m[i.doc_id] = &i;
  return m;
}

}  // namespace

// --- truncation ------------------------------------------------------------------------------

TEST(Truncate, Examples) {
  using V = std::vector<std::size_t>;
  EXPECT_EQ(truncate_to_budget(V{10, 30, 20}, 50), 3u);
  EXPECT_EQ(truncate_to_budget(V{10, 30, 20, 5}, 50), 3u);
  EXPECT_EQ(truncate_to_budget(V{80}, 50), 1u);
  EXPECT_EQ(truncate_to_budget(V{10, 40, 5}, 50), 3u);  // exactly at budget keeps going
  EXPECT_EQ(truncate_to_budget(V{}, 50), 0u);
  EXPECT_THROW(truncate_to_budget(V{1}, 0), ConfigError);
}

TEST(Truncate, SumWithoutLastWithinBudget) {
  Rng rng(3);
  for (int t = 0; t < 500; ++t) {
    std::vector<std::size_t> c(1 + rng.below(15));
    for (auto& x : c) x = 1 + rng.below(30);
    const std::size_t budget = 1 + rng.below(100);
    const auto k = truncate_to_budget(c, budget);
    ASSERT_GE(k, 1u);
    const auto before_last = std::accumulate(c.begin(), c.begin() + static_cast<std::ptrdiff_t>(k - 1), std::size_t{0});
    EXPECT_LE(before_last, budget);
    if (k < c.size()) EXPECT_GT(before_last + c[k - 1], budget);
  }
}

// --- MSEs and W1 ---------------------------------------------------------------------------

TEST(Mse, WithFull) {
  const std::vector<SummaryResult> r = {fake_result("a", 3.0, 3.5), fake_result("b", 4.0, 4.0)};
  EXPECT_DOUBLE_EQ(mse_with_full(r), 0.125);
  const std::vector<SummaryResult> same = {fake_result("a", 3.0, 3.0)};
  EXPECT_EQ(mse_with_full(same), 0.0);
  EXPECT_THROW(mse_with_full(std::vector<SummaryResult>{}), DomainError);
}

TEST(Mse, WithTruth) {
  auto a = fixtures::make_instance({"x"}, "a", 3.0, 4.5);
  auto b = fixtures::make_instance({"x"}, "b", 3.0, 3.0);
  const std::vector<SummaryResult> r = {fake_result("a", 4.0, 0), fake_result("b", 3.0, 0)};
  EXPECT_DOUBLE_EQ(mse_with_truth(r, {a, b}), 0.125);
  const std::vector<SummaryResult> exact = {fake_result("a", 4.5, 0)};
  EXPECT_EQ(mse_with_truth(exact, {a, b}), 0.0);
  EXPECT_THROW(mse_with_truth(std::vector<SummaryResult>{fake_result("zz", 1, 1)}, {a}), DomainError);
}

TEST(Representativeness, LexiconSingleton) {
  const auto inst = fixtures::lexicon_fixture();
  auto r = fake_result("lex", 0, 0);
  r.selection_order = {2};
  const auto w = representativeness(std::vector<SummaryResult>{r}, LexiconModel::fixture(), {inst});
  EXPECT_NEAR(w.mean, 4.0 / 3.0, 1e-12);
  EXPECT_EQ(w.se, 0.0);
  r.selection_order = {0, 1, 2};
  EXPECT_EQ(representativeness(std::vector<SummaryResult>{r}, LexiconModel::fixture(), {inst}).mean, 0.0);
}

TEST(MeanSe, SampleStandardError) {
  const std::vector<double> v = {1, 2, 3, 4};
  const auto m = mean_and_se(v);
  EXPECT_DOUBLE_EQ(m.mean, 2.5);
  EXPECT_NEAR(m.se, std::sqrt(5.0 / 3.0) / 2.0, 1e-15);
}

// --- sentiment and pairwise ---------------------------------------------------------------------

TEST(Sentiment, Thresholds) {
  EXPECT_EQ(sentiment_bucket(2.4), Sentiment::negative);
  EXPECT_EQ(sentiment_bucket(2.5), Sentiment::neutral);
  EXPECT_EQ(sentiment_bucket(3.0), Sentiment::neutral);
  EXPECT_EQ(sentiment_bucket(3.5), Sentiment::positive);
  EXPECT_EQ(sentiment_bucket(4.9), Sentiment::positive);
  const std::vector<double> s = {1, 2.6, 3.4, 4, 5};
  const auto h = sentiment_buckets(s);
  EXPECT_EQ(h.negative, 1u);
  EXPECT_EQ(h.neutral, 2u);
  EXPECT_EQ(h.positive, 2u);
}

TEST(Pairwise, CorrectAndTies) {
  const std::vector<PairInstance> pairs = {{"a", "b", "X", 4, 4.6, 3.4, 'a'}, {"c", "d", "X", 4, 3.0, 4.2, 'b'}};
  const auto rep = pairwise_accuracy(pairs, {{"a", 4.2}, {"b", 3.8}, {"c", 4.0}, {"d", 4.0}});
  EXPECT_EQ(rep.outcomes[0].credit, 1.0);
  EXPECT_EQ(rep.outcomes[1].credit, 0.5);
  EXPECT_DOUBLE_EQ(rep.accuracy, 0.75);
  EXPECT_THROW(pairwise_accuracy(pairs, {{"a", 1.0}}), DomainError);
  EXPECT_THROW(pairwise_accuracy({}, {}), DomainError);
}

TEST(Pairwise, SelfConsistentWithGroundTruthPredictions) {
  SyntheticConfig cfg;
  cfg.star_noise = 1.5;
  const auto insts = generate_synthetic(400, 3, cfg);
  const auto batch = build_pairs(insts, 100, 1000, 1);
  ASSERT_FALSE(batch.pairs.empty());
  std::map<std::string, double> truth;
  for (const auto& i : insts) truth[i.doc_id] = i.y_future;
  EXPECT_EQ(pairwise_accuracy(batch.pairs, truth).accuracy, 1.0);
}

// --- KDE ------------------------------------------------------------------------------------------

TEST(Kde, SingleScoreIntegratesToOne) {
  const std::vector<double> s = {3.2};
  const auto c = kde_curve(s);
  EXPECT_NEAR(trapezoid_integral(c), 1.0, 1e-3);
  const auto peak = std::max_element(c.density.begin(), c.density.end()) - c.density.begin();
  EXPECT_NEAR(c.grid[static_cast<std::size_t>(peak)], 3.2, c.bandwidth);
  EXPECT_EQ(c.bandwidth, kMinBandwidth);
}

TEST(Kde, ZeroVarianceUsesFloor) {
  const std::vector<double> s(50, 0.0);
  const auto c = kde_curve(s);
  EXPECT_EQ(c.bandwidth, kMinBandwidth);
  EXPECT_NEAR(trapezoid_integral(c), 1.0, 1e-3);
}

TEST(Kde, SilvermanBandwidth) {
  // Standardize a normal sample to sd exactly 1, then compare with the rule
  // evaluated from an independently computed IQR.
  Rng rng(1);
  std::vector<double> s(100);
  for (auto& x : s) x = rng.normal();
  const double mean = std::accumulate(s.begin(), s.end(), 0.0) / 100.0;
  double ss = 0;
  for (double x : s) ss += (x - mean) * (x - mean);
  const double sd = std::sqrt(ss / 99.0);
  for (auto& x : s) x = (x - mean) / sd;
  auto sorted = s;
  std::sort(sorted.begin(), sorted.end());
  auto q = [&](double p) {
    const double pos = p * 99.0;
    const auto lo = static_cast<std::size_t>(pos);
    return sorted[lo] + (pos - static_cast<double>(lo)) * (sorted[lo + 1] - sorted[lo]);
  };
  const double iqr = q(0.75) - q(0.25);
  const double expect = 0.9 * std::min(1.0, iqr / 1.34) * std::pow(100.0, -0.2);
  EXPECT_NEAR(silverman_bandwidth(s), expect, 1e-12);
  if (iqr / 1.34 >= 1.0) EXPECT_NEAR(silverman_bandwidth(s), 0.3582964534981475, 1e-12);
}

TEST(Kde, SkewedSampleUsesNonZeroSpread) {
  // IQR is zero but the sample still varies.
  std::vector<double> s(20, 3.0);
  s.push_back(5.0);
  const double h = silverman_bandwidth(s);
  EXPECT_GT(h, kMinBandwidth);
  EXPECT_NEAR(trapezoid_integral(kde_curve(s)), 1.0, 1e-3);
}

TEST(Kde, RandomSamplesIntegrateToOne) {
  Rng rng(8);
  for (int t = 0; t < 100; ++t) {
    std::vector<double> s(1 + rng.below(300));
    const double spread = std::pow(10.0, rng.uniform(-4, 1));
    for (auto& x : s) x = rng.uniform() < 0.3 ? 3.0 : rng.normal(3.0, spread);
    const auto c = kde_curve(s, 64 + rng.below(512));
    ASSERT_NEAR(trapezoid_integral(c), 1.0, 1e-3) << "n=" << s.size() << " spread=" << spread;
  }
}

TEST(Kde, EmptyIsDomainError) { EXPECT_THROW(kde_curve(std::vector<double>{}), DomainError); }

TEST(Groups, BinMembership) {
  EXPECT_EQ(rating_group(4.0), 4);
  EXPECT_EQ(rating_group(1.2), std::nullopt);
  EXPECT_EQ(rating_group(1.5), 2);
  EXPECT_EQ(rating_group(4.5), 5);
  EXPECT_EQ(rating_group(5.0), 5);
}

TEST(Groups, FourCurvesForFullCoverage) {
  const auto insts = generate_synthetic(200, 4);
  std::set<int> seen;
  for (const auto& i : insts) {
    if (auto g = rating_group(i.y_early)) seen.insert(*g);
  }
  ASSERT_EQ(seen.size(), 4u);
  const auto out = group_distributions(insts, LexiconModel::fixture(), {{insts[0].doc_id, {3.0, 4.0}}}, 256);
  ASSERT_EQ(out.curves.size(), 4u);
  for (const auto& c : out.curves) EXPECT_NEAR(trapezoid_integral(c), 1.0, 1e-3) << c.group_label;
  std::size_t points = 0;
  for (const auto& c : out.curves) points += c.selected_points.size();
  EXPECT_EQ(points, 2u);
}

TEST(Groups, SparseGroupOmittedWithWarning) {
  auto a = fixtures::make_instance({"good", "ok", "bad", "good ok", "ok ok", "bad bad"}, "a", 4.0);
  auto b = fixtures::make_instance({"good"}, "b", 2.0);
  auto c = fixtures::make_instance({"good", "bad"}, "c", 1.0);
  const auto out = group_distributions({a, b, c}, LexiconModel::fixture());
  ASSERT_EQ(out.curves.size(), 1u);
  EXPECT_EQ(out.curves[0].group_label, "group4");
  EXPECT_EQ(out.warnings.size(), 3u);
}

// --- summary evaluation --------------------------------------------------------------------------

TEST(Evaluate, FullSelectionMatchesFullText) {
  const auto insts = generate_synthetic(5, 2);
  const auto model = LexiconModel::fixture();
  std::vector<SummaryResult> all;
  for (const auto& i : insts) {
    auto r = lead_select(i, model, nullptr, 1000, {0, 0, 0});
    all.push_back(r);
  }
  const auto preds = predict_instances(insts, model);
  const auto row = evaluate_summaries("lead", all, index(insts), preds, model, 100000);
  EXPECT_EQ(row.mse_full, 0.0);
  EXPECT_EQ(row.mean_w1, 0.0);
  EXPECT_EQ(row.n, 5u);
}

TEST(Evaluate, TruncatesInSelectionOrder) {
  // Tokens: 2, 1, 1, 2. Selection order 3, 0, 1 with budget 3 keeps 3 and 0.
  const auto inst = fixtures::make_instance({"good good", "bad", "ok", "ok good"}, "d");
  SummaryResult r = fake_result("d", 0, 0);
  r.selection_order = {3, 0, 1};
  const std::vector<TaskInstance> insts = {inst};
  const auto model = LexiconModel::fixture();
  const auto row = evaluate_summaries("m", {r}, index(insts), predict_instances(insts, model), model, 3);
  ASSERT_EQ(row.details.size(), 1u);
  EXPECT_EQ(row.details[0].kept, (std::vector<std::size_t>{3, 0}));
  EXPECT_DOUBLE_EQ(row.details[0].f_summary, model.score("good good ok good"));
  EXPECT_NEAR(row.details[0].w1, wasserstein_1d(std::vector<double>{4, 5}, std::vector<double>{5, 1, 3, 4}), 1e-15);
  EXPECT_EQ(row.sentiment.positive, 2u);
}

TEST(Evaluate, UnknownDocIsConfigError) {
  const std::vector<TaskInstance> insts = {fixtures::lexicon_fixture()};
  auto r = fake_result("other", 0, 0);
  r.selection_order = {0};
  const auto model = LexiconModel::fixture();
  EXPECT_THROW(evaluate_summaries("m", {r}, index(insts), predict_instances(insts, model), model, 50), ConfigError);
}

TEST(Evaluate, SweepRowCountAndSingleBudget) {
  const auto insts = generate_synthetic(8, 5);
  const auto model = LexiconModel::fixture();
  const HashedEmbedder emb;
  std::vector<SummaryResult> lead, rnd;
  for (const auto& i : insts) {
    lead.push_back(lead_select(i, model, &emb, 15));
    rnd.push_back(random_select(i, model, &emb, 1, 15));
  }
  const auto preds = predict_instances(insts, model, 3);
  const std::vector<std::pair<std::string, std::vector<SummaryResult>>> methods = {{"lead", lead}, {"random", rnd}};
  const auto rows = length_sweep(methods, {20, 50, 80}, index(insts), preds, model);
  ASSERT_EQ(rows.size(), 6u);
  EXPECT_EQ(rows[0].method, "lead");
  EXPECT_EQ(rows[2].budget, 80u);
  EXPECT_EQ(rows[3].method, "random");
  const auto single = length_sweep(methods, {50}, index(insts), preds, model);
  const auto direct = evaluate_summaries("lead", lead, index(insts), preds, model, 50);
  EXPECT_EQ(single[0].mse_full, direct.mse_full);
  EXPECT_EQ(single[0].mean_w1, direct.mean_w1);
}

TEST(Evaluate, PairedWins) {
  MetricsRow a, b;
  a.details = {{"x", {}, 0, 0, 0, 0.1}, {"y", {}, 0, 0, 0, 0.5}, {"z", {}, 0, 0, 0, 0.2}};
  b.details = {{"x", {}, 0, 0, 0, 0.3}, {"y", {}, 0, 0, 0, 0.4}, {"z", {}, 0, 0, 0, 0.2}};
  EXPECT_DOUBLE_EQ(paired_w1_wins(a, b), 1.0 / 3.0);
}

// --- writers ------------------------------------------------------------------------------------

TEST(Writers, MetricsCsvHeaderAndRows) {
  MetricsRow r;
  r.method = "lead";
  r.budget = 50;
  r.n = 2;
  r.mse_full = 0.125;
  std::ostringstream os;
  write_metrics_csv(os, {r});
  EXPECT_EQ(os.str(), "method,budget,n,mse_full,mse_truth,mean_w1,se_w1,neg,neu,pos\nlead,50,2,0.125,0,0,0,0,0,0\n");
}

TEST(Writers, DensityCsvAndSvg) {
  const std::vector<double> s = {1.0, 2.0, 2.5};
  const std::vector<double> sel = {2.0};
  const auto c = kde_curve(s, 16, sel, "group3");
  std::ostringstream csv, pts, svg;
  write_density_csv(csv, {c});
  write_selected_points_csv(pts, {c});
  write_density_svg(svg, c);
  const std::string text = csv.str();
  EXPECT_EQ(text.rfind("group_label,grid,density\n", 0), 0u);
  EXPECT_EQ(static_cast<std::size_t>(std::count(text.begin(), text.end(), '\n')), c.grid.size() + 1);
  EXPECT_EQ(pts.str(), "group_label,score\ngroup3,2\n");
  EXPECT_NE(svg.str().find("<svg"), std::string::npos);
  EXPECT_NE(svg.str().find("<circle"), std::string::npos);
  EXPECT_NE(svg.str().find("group3"), std::string::npos);
}
