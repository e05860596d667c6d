#include <gtest/gtest.h>

#include <cmath>

#include "decsum/baselines.hpp"
#include "oracles.hpp"

using namespace decsum;

namespace {

// The lexicon fixture shifted by a constant.
class BiasedLexicon final : public DecisionModel {
 public:
  explicit BiasedLexicon(double shift) : shift_(shift) {}
  double score(std::string_view t) const override { return LexiconModel::fixture().score(t) + shift_; }
  std::string model_id() const override { return "biased"; }

 private:
  double shift_;
};

}  // namespace

TEST(Random, SameSeedSameSelection) {
  const auto inst = generate_synthetic(1, 3).front();
  EXPECT_EQ(random_order(inst, 5, 4), random_order(inst, 5, 4));
  bool differs = false;
  for (std::uint64_t s = 6; s < 20; ++s) differs |= random_order(inst, 5, 4) != random_order(inst, s, 4);
  EXPECT_TRUE(differs);
}

TEST(Random, ExhaustsWhenKAtLeastS) {
  const auto inst = fixtures::lexicon_fixture();
  auto o = random_order(inst, 1, 10);
  std::sort(o.begin(), o.end());
  EXPECT_EQ(o, (std::vector<std::size_t>{0, 1, 2}));
}

TEST(Random, UniformMarginals) {
  const auto inst = fixtures::make_instance({"a", "b", "c", "d", "e"});
  std::array<int, 5> counts{};
  const int draws = 10000;
  for (int s = 0; s < draws; ++s) counts[random_order(inst, static_cast<std::uint64_t>(s), 1)[0]] += 1;
  double chi2 = 0;
  for (int c : counts) {
    EXPECT_NEAR(c / static_cast<double>(draws), 0.2, 0.012);
    chi2 += std::pow(c - draws / 5.0, 2) / (draws / 5.0);
  }
  EXPECT_LT(chi2, 18.47);  // chi-square, 4 dof, p = 0.001
}

TEST(Random, UniformPairsForKTwo) {
  const auto inst = fixtures::make_instance({"a", "b", "c", "d"});
  std::map<std::pair<std::size_t, std::size_t>, int> counts;
  const int draws = 12000;
  for (int s = 0; s < draws; ++s) {
    auto o = random_order(inst, static_cast<std::uint64_t>(s), 2);
    std::sort(o.begin(), o.end());
    counts[{o[0], o[1]}] += 1;
  }
  ASSERT_EQ(counts.size(), 6u);
  for (const auto& [_, c] : counts) EXPECT_NEAR(c / static_cast<double>(draws), 1.0 / 6.0, 0.015);
}

TEST(Random, ResultCanonicalAndLossesReported) {
  const auto inst = generate_synthetic(1, 4).front();
  const HashedEmbedder emb;
  const auto r = random_select(inst, LexiconModel::fixture(), &emb, 3, 5, {1, 1, 1});
  EXPECT_EQ(r.method, "random");
  ASSERT_EQ(r.selected.size(), 5u);
  for (std::size_t i = 1; i < r.selected.size(); ++i) EXPECT_LT(r.selected[i - 1].sent_index, r.selected[i].sent_index);
  EXPECT_TRUE(r.loss.l_f && r.loss.l_r && r.loss.l_d);
  EXPECT_EQ(r.loss.total, combined_loss(r.selection_order, inst, LexiconModel::fixture(), &emb, {1, 1, 1}).total);
}

TEST(Lead, FirstSentences) {
  const auto inst = fixtures::make_instance({"a", "b", "c"});
  EXPECT_EQ(lead_order(inst, 2), (std::vector<std::size_t>{0, 1}));
  EXPECT_EQ(lead_order(inst, 9), (std::vector<std::size_t>{0, 1, 2}));
  const auto a = lead_select(inst, LexiconModel::fixture(), nullptr, 2, {0, 0, 0});
  const auto b = lead_select(inst, BiasedLexicon(7.0), nullptr, 2, {0, 0, 0});
  EXPECT_EQ(a.selection_order, b.selection_order);
  EXPECT_FALSE(a.loss.l_f.has_value());
}

TEST(Occlusion, HandComputedRanking) {
  const auto inst = fixtures::lexicon_fixture();
  const auto imp = occlusion_importance(inst, LexiconModel::fixture());
  ASSERT_EQ(imp.size(), 3u);
  EXPECT_NEAR(imp[0], 1.5, 1e-12);
  EXPECT_NEAR(imp[1], 13.0 / 3.0 - 3.5, 1e-12);
  EXPECT_NEAR(imp[2], 11.0 / 3.0 - 3.5, 1e-12);
  EXPECT_EQ(occlusion_order(inst, LexiconModel::fixture(), 3), (std::vector<std::size_t>{0, 1, 2}));
}

TEST(Occlusion, SingleSentenceUsesEmptyText) {
  const auto inst = fixtures::make_instance({"good"});
  const auto imp = occlusion_importance(inst, LexiconModel::fixture());
  EXPECT_EQ(imp, (std::vector<double>{2.0}));  // |5 - 3|, empty text scores the default
  EXPECT_EQ(occlusion_order(inst, LexiconModel::fixture(), 15), (std::vector<std::size_t>{0}));
}

TEST(Occlusion, InvariantToBiasShift) {
  const auto inst = generate_synthetic(1, 2).front();
  const auto a = occlusion_importance(inst, BiasedLexicon(0.0));
  const auto b = occlusion_importance(inst, BiasedLexicon(11.0));
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_NEAR(a[i], b[i], 1e-9);
}

TEST(Occlusion, PermutationCovariant) {
  const auto base = fixtures::make_instance({"good good", "bad", "ok", "good bad ok ok"});
  const auto imp = occlusion_importance(base, LexiconModel::fixture());
  // Reversing the sentence order keeps every leave-one-out bag of words, so
  // the importances are permuted identically.
  const auto rev = fixtures::make_instance({"good bad ok ok", "ok", "bad", "good good"});
  const auto imp_rev = occlusion_importance(rev, LexiconModel::fixture());
  for (std::size_t i = 0; i < imp.size(); ++i) EXPECT_NEAR(imp[i], imp_rev[imp.size() - 1 - i], 1e-12);
}

TEST(Occlusion, TiesGoToLowerIndex) {
  const auto inst = fixtures::make_instance({"ok", "ok", "good", "ok"});
  EXPECT_EQ(occlusion_order(inst, LexiconModel::fixture(), 4), (std::vector<std::size_t>{2, 0, 1, 3}));
}

TEST(Baselines, EmptyInstanceOrZeroK) {
  const auto empty = fixtures::make_instance({});
  EXPECT_THROW(random_order(empty, 0, 1), DomainError);
  EXPECT_THROW(lead_order(empty, 1), DomainError);
  EXPECT_THROW(occlusion_order(empty, LexiconModel::fixture(), 1), DomainError);
  EXPECT_THROW(lead_order(fixtures::lexicon_fixture(), 0), ConfigError);
  EXPECT_EQ(parse_method("occlusion"), Method::occlusion);
  EXPECT_THROW(parse_method("bart"), ConfigError);
}

TEST(Baselines, SameSchemaAsDecSum) {
  const auto inst = generate_synthetic(1, 6).front();
  const HashedEmbedder emb;
  const auto model = LexiconModel::fixture();
  SelectionConfig cfg;
  cfg.max_sentences = 3;
  std::set<std::string> keys;
  for (const auto& r : {decsum_select(inst, model, &emb, cfg), random_select(inst, model, &emb, 1, 3),
                        lead_select(inst, model, &emb, 3), occlusion_select(inst, model, &emb, 3)}) {
    std::set<std::string> k;
    for (const auto& [key, _] : to_json(r).items()) k.insert(key);
    if (keys.empty()) keys = k;
    EXPECT_EQ(k, keys);
    EXPECT_EQ(r.selected.size(), 3u);
    EXPECT_EQ(r.f_full, model.score(inst.full_text));
  }
}
