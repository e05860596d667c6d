#include <gtest/gtest.h>

#include <atomic>
#include <cmath>

#include "decsum/losses.hpp"
#include "decsum/rng.hpp"
#include "oracles.hpp"

using namespace decsum;
using fixtures::brute_force_w1;

namespace {

std::vector<double> random_multiset(Rng& rng, std::size_t n) {
  std::vector<double> v;
  for (std::size_t i = 0; i < n; ++i) {
    // Mix of continuous values and a coarse lattice so ties occur.
    v.push_back(rng.uniform() < 0.5 ? rng.uniform(0.0, 5.0) : static_cast<double>(rng.below(11)) * 0.5);
  }
  return v;
}

class CountingModel final : public DecisionModel {
 public:
  double score(std::string_view t) const override {
    ++calls;
    return LexiconModel::fixture().score(t);
  }
  std::string model_id() const override { return "counting"; }
  mutable std::atomic<int> calls{0};
};

class CountingEmbedder final : public Embedder {
 public:
  std::vector<double> embed(std::string_view t) const override {
    ++calls;
    return embed_hashed(t);
  }
  std::size_t dimension() const override { return 4096; }
  std::string embedder_id() const override { return "counting"; }
  mutable std::atomic<int> calls{0};
};

}  // namespace

// --- Wasserstein-1 ------------------------------------------------------------------

TEST(Wasserstein, Examples) {
  using V = std::vector<double>;
  EXPECT_EQ(wasserstein_1d(V{3.0}, V{3.0}), 0.0);
  EXPECT_NEAR(wasserstein_1d(V{1, 2, 3}, V{2, 3, 4}), 1.0, 1e-15);
  EXPECT_NEAR(wasserstein_1d(V{0, 10}, V{5}), 5.0, 1e-15);
  EXPECT_NEAR(wasserstein_1d(V{0, 0, 10}, V{0}), 10.0 / 3.0, 1e-15);
}

TEST(Wasserstein, ExamplesAgreeWithTransportOracle) {
  EXPECT_NEAR(brute_force_w1({0, 10}, {5}), 5.0, 1e-12);
  EXPECT_NEAR(brute_force_w1({0, 0, 10}, {0}), 10.0 / 3.0, 1e-12);
  EXPECT_NEAR(brute_force_w1({3}, {5, 1, 3}), 4.0 / 3.0, 1e-12);
}

TEST(Wasserstein, EmptyOrNonFiniteIsDomainError) {
  using V = std::vector<double>;
  EXPECT_THROW(wasserstein_1d(V{}, V{1.0}), DomainError);
  EXPECT_THROW(wasserstein_1d(V{1.0}, V{}), DomainError);
  EXPECT_THROW(wasserstein_1d(V{NAN}, V{1.0}), DomainError);
  EXPECT_THROW(wasserstein_1d(V{1.0}, V{INFINITY}), DomainError);
}

TEST(Wasserstein, MatchesTransportOracle) {
  Rng rng(42);
  for (int trial = 0; trial < 200; ++trial) {
    const auto a = random_multiset(rng, 1 + rng.below(12));
    const auto b = random_multiset(rng, 1 + rng.below(12));
    ASSERT_NEAR(wasserstein_1d(a, b), brute_force_w1(a, b), 1e-9);
  }
}

TEST(Wasserstein, MetricProperties) {
  Rng rng(7);
  for (int trial = 0; trial < 300; ++trial) {
    const auto a = random_multiset(rng, 1 + rng.below(12));
    const auto b = random_multiset(rng, 1 + rng.below(12));
    const auto c = random_multiset(rng, 1 + rng.below(12));
    const double ab = wasserstein_1d(a, b);
    EXPECT_NEAR(ab, wasserstein_1d(b, a), 1e-12);
    EXPECT_GE(ab, 0.0);
    EXPECT_LE(ab, wasserstein_1d(a, c) + wasserstein_1d(c, b) + 1e-12);

    const double shift = rng.uniform(-3, 3), scale = rng.uniform(-2, 2);
    auto as = a, bs = b, ak = a, bk = b;
    for (auto& v : as) v += shift;
    for (auto& v : bs) v += shift;
    for (auto& v : ak) v *= scale;
    for (auto& v : bk) v *= scale;
    EXPECT_NEAR(wasserstein_1d(as, bs), ab, 1e-9);
    EXPECT_NEAR(wasserstein_1d(ak, bk), std::abs(scale) * ab, 1e-9);
  }
}

TEST(Wasserstein, OrderOfSamplesIrrelevant) {
  using V = std::vector<double>;
  EXPECT_EQ(wasserstein_1d(V{5, 1, 3}, V{2, 4}), wasserstein_1d(V{1, 3, 5}, V{4, 2}));
}

// --- L_F, L_R, L_D ---------------------------------------------------------------------

TEST(Faithfulness, Examples) {
  auto [z, zc] = loss_faithfulness(3.1, 3.1, 1e-6);
  EXPECT_NEAR(z, -13.815510557964274, 1e-9);
  EXPECT_TRUE(zc);
  auto [h, hc] = loss_faithfulness(3.0, 3.5, 1e-6);
  EXPECT_NEAR(h, -0.6931471805599453, 1e-12);
  EXPECT_FALSE(hc);
  EXPECT_NEAR(loss_faithfulness(1.0, 5.0, 1e-6).first, 1.3862943611198906, 1e-12);
}

TEST(Representativeness, Examples) {
  const ScoreDistribution full{{5, 1, 3}, DistributionSource::full};
  auto [same, c] = loss_representativeness({{1, 3, 5}, DistributionSource::summary}, full);
  EXPECT_DOUBLE_EQ(same, std::log(1e-6));
  EXPECT_TRUE(c);
  EXPECT_NEAR(loss_representativeness({{3}, DistributionSource::summary}, full).first, 0.28768207245178085, 1e-12);
  EXPECT_NEAR(loss_representativeness({{5}, DistributionSource::summary}, full).first, 0.6931471805599453, 1e-12);
}

TEST(Redundancy, Examples) {
  using E = std::vector<std::vector<double>>;
  EXPECT_EQ(loss_redundancy(E{{1, 0}}), 0.0);
  EXPECT_EQ(loss_redundancy(E{}), 0.0);
  EXPECT_NEAR(loss_redundancy(E{{1, 0}, {1, 0}}), 2.0, 1e-15);
  EXPECT_EQ(loss_redundancy(E{{1, 0}, {0, 1}}), 0.0);
  const double r = 1.0 / std::sqrt(2.0);
  EXPECT_NEAR(loss_redundancy(E{{1, 0}, {0, 1}, {r, r}}), 3.0 / std::sqrt(2.0), 1e-12);
}

TEST(Redundancy, ZeroVectorHasZeroCosine) {
  using E = std::vector<std::vector<double>>;
  EXPECT_EQ(cosine(std::vector<double>{0, 0}, std::vector<double>{1, 0}), 0.0);
  EXPECT_EQ(loss_redundancy(E{{0, 0}, {1, 0}}), 0.0);
  EXPECT_THROW(cosine(std::vector<double>{0, 0}, std::vector<double>{1}), ContractViolation);
}

TEST(Redundancy, BoundsAndPermutationInvariance) {
  Rng rng(5);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 1 + rng.below(7);
    std::vector<std::vector<double>> e(n, std::vector<double>(4));
    for (auto& v : e) {
      for (auto& x : v) x = rng.normal();
    }
    const double l = loss_redundancy(e);
    EXPECT_LE(std::abs(l), static_cast<double>(n) + 1e-12);
    auto p = e;
    rng.shuffle(p);
    EXPECT_NEAR(loss_redundancy(p), l, 1e-12);
  }
}

// --- combined -------------------------------------------------------------------------------

TEST(Combined, LexiconFixture) {
  const auto inst = fixtures::lexicon_fixture();
  const auto model = LexiconModel::fixture();
  const HashedEmbedder emb;
  const std::vector<std::size_t> sel = {2};  // "ok"
  const auto l = combined_loss(sel, inst, model, &emb, {1, 1, 1});
  EXPECT_NEAR(*l.l_f, std::log(0.5), 1e-12);
  EXPECT_NEAR(*l.l_r, std::log(4.0 / 3.0), 1e-12);
  EXPECT_EQ(*l.l_d, 0.0);
  EXPECT_NEAR(l.total, -0.405465108108164, 1e-12);
}

TEST(Combined, WeightSelection) {
  const auto inst = fixtures::lexicon_fixture();
  const auto model = LexiconModel::fixture();
  const HashedEmbedder emb;
  const std::vector<std::size_t> sel = {0, 2};
  const auto f = combined_loss(sel, inst, model, &emb, {1, 0, 0});
  EXPECT_EQ(f.total, *f.l_f);
  EXPECT_FALSE(f.l_r.has_value());
  EXPECT_FALSE(f.l_d.has_value());
  const auto none = combined_loss(sel, inst, model, &emb, {0, 0, 0});
  EXPECT_EQ(none.total, 0.0);
}

TEST(Combined, ZeroWeightsMakeNoCalls) {
  const auto inst = fixtures::lexicon_fixture();
  CountingModel model;
  CountingEmbedder emb;
  const std::vector<std::size_t> sel = {0, 1};
  combined_loss(sel, inst, model, &emb, {0, 0, 1});
  EXPECT_EQ(model.calls, 0);
  EXPECT_EQ(emb.calls, 3);
  emb.calls = 0;
  combined_loss(sel, inst, model, &emb, {0, 1, 0});
  EXPECT_EQ(model.calls, 3);
  EXPECT_EQ(emb.calls, 0);
  model.calls = 0;
  combined_loss(sel, inst, model, nullptr, {1, 0, 0});
  EXPECT_EQ(model.calls, 2);  // full text and summary
}

TEST(Combined, GammaWithoutEmbedderIsConfigError) {
  const auto inst = fixtures::lexicon_fixture();
  const std::vector<std::size_t> sel = {0};
  EXPECT_THROW(combined_loss(sel, inst, LexiconModel::fixture(), nullptr, {1, 1, 1}), ConfigError);
  EXPECT_THROW(combined_loss(sel, inst, LexiconModel::fixture(), nullptr, {-1, 1, 0}), ConfigError);
}

TEST(Combined, InvalidSelections) {
  const auto inst = fixtures::lexicon_fixture();
  const auto model = LexiconModel::fixture();
  const HashedEmbedder emb;
  EXPECT_THROW(combined_loss(std::vector<std::size_t>{}, inst, model, &emb, {1, 1, 1}), ContractViolation);
  EXPECT_THROW(combined_loss(std::vector<std::size_t>{0, 0}, inst, model, &emb, {1, 1, 1}), ContractViolation);
  EXPECT_THROW(combined_loss(std::vector<std::size_t>{3}, inst, model, &emb, {1, 1, 1}), ContractViolation);
}

TEST(Combined, DependsOnlyOnTheSet) {
  const auto insts = generate_synthetic(10, 2);
  FeaturizerSettings fs;
  const auto model = train_linear(insts, 0.01, fs);
  const HashedEmbedder emb;
  Rng rng(1);
  for (const auto& inst : insts) {
    std::vector<std::size_t> idx(inst.size());
    std::iota(idx.begin(), idx.end(), 0);
    rng.shuffle(idx);
    idx.resize(std::min<std::size_t>(4, idx.size()));
    const auto a = combined_loss(idx, inst, model, &emb, {1, 1, 1});
    rng.shuffle(idx);
    const auto b = combined_loss(idx, inst, model, &emb, {1, 1, 1});
    EXPECT_EQ(a.total, b.total);
  }
}

TEST(Combined, RedundancyMatchesDirectComputation) {
  const auto inst = generate_synthetic(1, 9).front();
  const HashedEmbedder emb;
  const auto model = LexiconModel::fixture();
  const std::vector<std::size_t> sel = {0, 2, 3, 5};
  std::vector<std::vector<double>> e;
  for (auto i : sel) e.push_back(embed_hashed(inst.sentences[i].text));
  double expect = 0;
  for (std::size_t i = 0; i < e.size(); ++i) {
    double best = -2;
    for (std::size_t j = 0; j < e.size(); ++j) {
      if (i == j) continue;
      double d = 0;
      for (std::size_t k = 0; k < e[i].size(); ++k) d += e[i][k] * e[j][k];
      best = std::max(best, d);
    }
    expect += best;
  }
  EXPECT_NEAR(*combined_loss(sel, inst, model, &emb, {0, 0, 1}).l_d, expect, 1e-12);
}

TEST(Combined, IncreasingAlphaIncreasesTotalWhenLfPositive) {
  const auto inst = fixtures::make_instance({"good", "bad bad", "bad"});  // full 2, summary 5
  const auto model = LexiconModel::fixture();
  const HashedEmbedder emb;
  const std::vector<std::size_t> sel = {0};
  const auto lo = combined_loss(sel, inst, model, &emb, {1, 1, 1});
  ASSERT_GT(*lo.l_f, 0.0);
  const auto hi = combined_loss(sel, inst, model, &emb, {2, 1, 1});
  EXPECT_GT(hi.total, lo.total);
  EXPECT_NEAR(hi.total - lo.total, *lo.l_f, 1e-12);
}
