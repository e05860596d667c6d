#pragma once

// Decision-model and sentence-embedder contracts, with the in-process
// implementations: a hashed n-gram linear regressor, a lexicon scorer, and a
// hashed bag-of-words embedder.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <json.hpp>

#include "decsum/corpus.hpp"
#include "decsum/errors.hpp"
#include "decsum/text.hpp"

namespace decsum {

/// Maps any text (including the empty string) to a real-valued decision score.
/// Implementations must be deterministic and safe to call concurrently.
class DecisionModel {
 public:
  virtual ~DecisionModel() = default;

  virtual double score(std::string_view text) const = 0;

  virtual std::vector<double> score_batch(std::span<const std::string> texts) const {
    std::vector<double> out;
    out.reserve(texts.size());
    for (const auto& t : texts) out.push_back(score(t));
    return out;
  }

  virtual std::string model_id() const = 0;
};

/// Maps text to a fixed-dimension vector. Deterministic; zero only for text
/// with no tokens.
class Embedder {
 public:
  virtual ~Embedder() = default;
  virtual std::vector<double> embed(std::string_view text) const = 0;
  virtual std::size_t dimension() const = 0;
  virtual std::string embedder_id() const = 0;
};

// ---------------------------------------------------------------------------
// Hashed n-gram featurizer

struct FeaturizerSettings {
  int ngram_max = 2;
  std::uint32_t dimension = 1u << 18;
  std::uint32_t hash_seed = 0x5f3759dfu;
};

/// Sparse feature vector, sorted by index.
using SparseVector = std::vector<std::pair<std::uint32_t, double>>;

inline std::uint32_t hash_term(std::string_view term, const FeaturizerSettings& s) {
  return text::murmur3_32(term, s.hash_seed) % s.dimension;
}

/// Calls fn(index) once per n-gram occurrence (n = 1..ngram_max).
template <class Fn>
void for_each_ngram_index(std::string_view txt, const FeaturizerSettings& s, Fn&& fn) {
  const auto toks = text::word_tokens(txt);
  std::string gram;
  for (std::size_t i = 0; i < toks.size(); ++i) {
    gram = toks[i];
    fn(hash_term(gram, s));
    for (int n = 2; n <= s.ngram_max && i + n <= toks.size(); ++n) {
      gram.push_back(' ');
      gram.append(toks[i + n - 1]);
      fn(hash_term(gram, s));
    }
  }
}

/// L1-normalized hashed n-gram counts. Empty text gives an empty vector.
inline SparseVector featurize(std::string_view txt, const FeaturizerSettings& s) {
  std::vector<std::uint32_t> idx;
  for_each_ngram_index(txt, s, [&](std::uint32_t i) { idx.push_back(i); });
  SparseVector out;
  if (idx.empty()) return out;
  std::sort(idx.begin(), idx.end());
  const double total = static_cast<double>(idx.size());
  for (std::size_t i = 0; i < idx.size();) {
    std::size_t j = i;
    while (j < idx.size() && idx[j] == idx[i]) ++j;
    out.emplace_back(idx[i], static_cast<double>(j - i) / total);
    i = j;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Linear model

/// score(text) = bias + <weights, featurize(text)>.
class LinearModel final : public DecisionModel {
 public:
  LinearModel(FeaturizerSettings settings, double bias, const std::map<std::uint32_t, double>& weights,
              std::string id = "linear")
      : settings_(settings), bias_(bias), dense_(settings.dimension, 0.0), id_(std::move(id)) {
    if (settings.dimension == 0) throw ConfigError("featurizer dimension must be positive");
    for (const auto& [i, w] : weights) {
      if (i >= settings.dimension) throw ConfigError("weight index " + std::to_string(i) + " exceeds dimension");
      dense_[i] = w;
    }
  }

  /// Weights given per term; each term is hashed into its feature slot.
  static LinearModel from_terms(FeaturizerSettings settings, double bias,
                                const std::map<std::string, double>& term_weights, std::string id = "linear") {
    std::map<std::uint32_t, double> w;
    for (const auto& [term, v] : term_weights) w[hash_term(term, settings)] += v;
    return LinearModel(settings, bias, w, std::move(id));
  }

  double score(std::string_view txt) const override {
    double acc = 0.0;
    std::size_t n = 0;
    for_each_ngram_index(txt, settings_, [&](std::uint32_t i) {
      acc += dense_[i];
      ++n;
    });
    return n == 0 ? bias_ : bias_ + acc / static_cast<double>(n);
  }

  std::string model_id() const override { return id_; }

  double bias() const { return bias_; }
  const FeaturizerSettings& settings() const { return settings_; }

  std::map<std::uint32_t, double> weights() const {
    std::map<std::uint32_t, double> out;
    for (std::uint32_t i = 0; i < dense_.size(); ++i) {
      if (dense_[i] != 0.0) out[i] = dense_[i];
    }
    return out;
  }

 private:
  FeaturizerSettings settings_;
  double bias_;
  std::vector<double> dense_;
  std::string id_;
};

/// Mean of per-word values (unknown words count as the default). Mirrors the
/// reference external scorer so pipelines can be checked end to end.
class LexiconModel final : public DecisionModel {
 public:
  explicit LexiconModel(std::map<std::string, double> values, double default_value = 3.0)
      : values_(std::move(values)), default_(default_value) {}

  static LexiconModel fixture() { return LexiconModel({{"good", 5.0}, {"bad", 1.0}, {"ok", 3.0}}); }

  static LexiconModel load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open lexicon " + path.string());
    const auto j = nlohmann::json::parse(in, nullptr, false);
    if (j.is_discarded() || !j.is_object()) throw ConfigError("lexicon " + path.string() + " is not a JSON object");
    std::map<std::string, double> values;
    for (const auto& [k, v] : j.items()) values[k] = v.get<double>();
    return LexiconModel(std::move(values));
  }

  double score(std::string_view txt) const override {
    const auto toks = text::word_tokens(txt);
    if (toks.empty()) return default_;
    double sum = 0.0;
    for (const auto& t : toks) {
      auto it = values_.find(t);
      sum += it == values_.end() ? default_ : it->second;
    }
    return sum / static_cast<double>(toks.size());
  }

  std::string model_id() const override { return "lexicon"; }

 private:
  std::map<std::string, double> values_;
  double default_;
};

// ---------------------------------------------------------------------------
// Ridge regression

struct RidgeFit {
  std::vector<double> weights;  // one per column
  double bias = 0.0;
};

/// Ridge-regularized least squares on sparse rows with `n_cols` columns. The
/// intercept (when fitted) is not penalized. Solves the primal normal
/// equations when columns <= rows and the equivalent dual system otherwise.
inline RidgeFit ridge_fit(const std::vector<SparseVector>& rows, std::span<const double> y, std::size_t n_cols,
                          double lambda, bool fit_intercept = true) {
  if (rows.size() != y.size()) throw ConfigError("ridge: row/target count mismatch");
  if (rows.size() < 2) throw ConfigError("ridge: need at least 2 training rows");
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw ConfigError("ridge: lambda must be a finite nonnegative number");
  const auto n = static_cast<Eigen::Index>(rows.size());
  const auto p = static_cast<Eigen::Index>(n_cols);

  std::vector<Eigen::Triplet<double>> trips;
  for (Eigen::Index r = 0; r < n; ++r) {
    for (const auto& [c, v] : rows[r]) {
      if (c >= n_cols) throw ConfigError("ridge: column index out of range");
      trips.emplace_back(r, static_cast<Eigen::Index>(c), v);
    }
  }
  Eigen::SparseMatrix<double> X(n, p);
  X.setFromTriplets(trips.begin(), trips.end());
  Eigen::VectorXd Y = Eigen::Map<const Eigen::VectorXd>(y.data(), n);

  Eigen::VectorXd xbar = Eigen::VectorXd::Zero(p);
  double ybar = 0.0;
  if (fit_intercept) {
    xbar = (X.transpose() * Eigen::VectorXd::Ones(n)) / static_cast<double>(n);
    ybar = Y.mean();
  }
  const Eigen::VectorXd Yc = Y.array() - ybar;

  // LDLT succeeds on semidefinite systems, so check the pivots directly.
  auto degenerate = [](const Eigen::LDLT<Eigen::MatrixXd>& f) {
    if (f.info() != Eigen::Success || !f.isPositive()) return true;
    const Eigen::VectorXd d = f.vectorD().cwiseAbs();
    return d.size() > 0 && (d.minCoeff() <= 1e-12 * d.maxCoeff() || f.rcond() < 1e-12);
  };
  auto singular = [&] {
    return ConfigError("ridge: normal equations are singular with lambda=" + std::to_string(lambda) +
                       "; use a positive ridge penalty (e.g. --lambda 1.0)");
  };

  Eigen::VectorXd w;
  if (p <= n) {
    Eigen::MatrixXd G = Eigen::MatrixXd(X.transpose() * X);
    if (fit_intercept) G -= static_cast<double>(n) * xbar * xbar.transpose();
    G.diagonal().array() += lambda;
    const Eigen::VectorXd rhs = X.transpose() * Yc;  // Xc^T Yc == X^T Yc since Yc sums to zero
    Eigen::LDLT<Eigen::MatrixXd> ldlt(G);
    if (degenerate(ldlt)) throw singular();
    w = ldlt.solve(rhs);
  } else {
    Eigen::MatrixXd K = Eigen::MatrixXd(X * X.transpose());
    if (fit_intercept) {
      const Eigen::VectorXd Xxbar = X * xbar;
      const double xx = xbar.squaredNorm();
      K.colwise() -= Xxbar;
      K.rowwise() -= Xxbar.transpose();
      K.array() += xx;
    }
    K.diagonal().array() += lambda;
    Eigen::LDLT<Eigen::MatrixXd> ldlt(K);
    if (degenerate(ldlt)) throw singular();
    const Eigen::VectorXd a = ldlt.solve(Yc);
    w = X.transpose() * a;
    if (fit_intercept) w -= xbar * a.sum();
  }

  RidgeFit out;
  out.weights.assign(w.data(), w.data() + w.size());
  out.bias = fit_intercept ? ybar - xbar.dot(w) : 0.0;
  return out;
}

/// Fits a LinearModel on full-text features against y_future.
inline LinearModel train_linear(const std::vector<TaskInstance>& train, double lambda = 1.0,
                                FeaturizerSettings settings = {}, std::string id = "linear") {
  if (train.size() < 2) throw ConfigError("train_linear: need at least 2 training instances");
  std::vector<SparseVector> raw;
  std::vector<double> y;
  std::vector<std::uint32_t> active;
  for (const auto& inst : train) {
    raw.push_back(featurize(inst.full_text, settings));
    y.push_back(inst.y_future);
    for (const auto& [i, _] : raw.back()) active.push_back(i);
  }
  std::sort(active.begin(), active.end());
  active.erase(std::unique(active.begin(), active.end()), active.end());

  // Compact the active hashed slots to dense column ids.
  std::vector<SparseVector> rows;
  for (const auto& r : raw) {
    SparseVector compact;
    for (const auto& [i, v] : r) {
      const auto col = std::lower_bound(active.begin(), active.end(), i) - active.begin();
      compact.emplace_back(static_cast<std::uint32_t>(col), v);
    }
    rows.push_back(std::move(compact));
  }
  const auto fit = ridge_fit(rows, y, active.size(), lambda, true);
  std::map<std::uint32_t, double> weights;
  for (std::size_t c = 0; c < active.size(); ++c) weights[active[c]] = fit.weights[c];
  return LinearModel(settings, fit.bias, weights, std::move(id));
}

// Model file: {"model_id","bias","dimension","hash_seed","ngram_max","weights":{"<index>":w}}

inline nlohmann::json to_json(const LinearModel& m) {
  nlohmann::json w = nlohmann::json::object();
  for (const auto& [i, v] : m.weights()) w[std::to_string(i)] = v;
  return {{"model_id", m.model_id()},
          {"bias", m.bias()},
          {"dimension", m.settings().dimension},
          {"hash_seed", m.settings().hash_seed},
          {"ngram_max", m.settings().ngram_max},
          {"weights", w}};
}

inline LinearModel linear_model_from_json(const nlohmann::json& j) {
  FeaturizerSettings s;
  s.dimension = j.at("dimension").get<std::uint32_t>();
  s.hash_seed = j.at("hash_seed").get<std::uint32_t>();
  s.ngram_max = j.value("ngram_max", 2);
  std::map<std::uint32_t, double> w;
  for (const auto& [k, v] : j.at("weights").items()) w[static_cast<std::uint32_t>(std::stoul(k))] = v.get<double>();
  return LinearModel(s, j.at("bias").get<double>(), w, j.value("model_id", std::string("linear")));
}

inline void save_model(const LinearModel& m, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write model file " + path.string());
  out << to_json(m).dump() << '\n';
}

inline LinearModel load_model(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open model file " + path.string());
  const auto j = nlohmann::json::parse(in, nullptr, false);
  if (j.is_discarded()) throw ConfigError("model file " + path.string() + " is not valid JSON");
  try {
    return linear_model_from_json(j);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("model file " + path.string() + ": " + e.what());
  }
}

// ---------------------------------------------------------------------------
// Embedder

struct EmbedderSettings {
  std::uint32_t dimension = 4096;
  std::uint32_t hash_seed = 0x9747b28cu;
};

/// L2-normalized hashed term frequencies over word unigrams.
class HashedEmbedder final : public Embedder {
 public:
  explicit HashedEmbedder(EmbedderSettings s = {}) : s_(s) {
    if (s_.dimension < 8) throw ConfigError("embedder dimension must be at least 8");
  }

  std::vector<double> embed(std::string_view txt) const override {
    std::vector<double> v(s_.dimension, 0.0);
    for (const auto& tok : text::word_tokens(txt)) v[text::murmur3_32(tok, s_.hash_seed) % s_.dimension] += 1.0;
    double norm = 0.0;
    for (double x : v) norm += x * x;
    if (norm > 0.0) {
      norm = std::sqrt(norm);
      for (double& x : v) x /= norm;
    }
    return v;
  }

  std::size_t dimension() const override { return s_.dimension; }
  std::string embedder_id() const override { return "hashed-tf-" + std::to_string(s_.dimension); }
  const EmbedderSettings& settings() const { return s_; }

 private:
  EmbedderSettings s_;
};

inline std::vector<double> embed_hashed(std::string_view txt, EmbedderSettings s = {}) {
  return HashedEmbedder(s).embed(txt);
}

// ---------------------------------------------------------------------------
// Score distributions

enum class DistributionSource { summary, full };

struct ScoreDistribution {
  std::vector<double> values;
  DistributionSource source = DistributionSource::full;
};

/// One model prediction per sentence of the instance.
inline ScoreDistribution sentence_distribution(const DecisionModel& model, const TaskInstance& inst) {
  if (inst.sentences.empty()) throw DomainError("sentence_distribution: instance " + inst.doc_id + " has no sentences");
  std::vector<std::string> texts;
  texts.reserve(inst.sentences.size());
  for (const auto& s : inst.sentences) texts.push_back(s.text);
  return {model.score_batch(texts), DistributionSource::full};
}

}  // namespace decsum
