#pragma once

// Review ingestion, sentence segmentation, task construction, splits, pairwise
// task instances and a synthetic corpus generator.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <tuple>
#include <unordered_set>
#include <vector>

#include <json.hpp>

#include "decsum/errors.hpp"
#include "decsum/rng.hpp"
#include "decsum/text.hpp"

namespace decsum {

struct Review {
  std::string review_id;
  std::string business_id;
  int stars = 0;
  std::string date;
  std::string text;
};

struct Sentence {
  std::string doc_id;
  std::size_t review_index = 0;
  std::size_t sent_index = 0;
  std::string text;
  std::size_t token_count = 0;
};

struct TaskInstance {
  std::string doc_id;
  std::string city;
  std::vector<Sentence> sentences;
  std::string full_text;
  double y_early = 0.0;
  double y_future = 0.0;
  int k = 0;
  int t = 0;

  std::size_t size() const { return sentences.size(); }
};

enum class Split { train, validation, test };

inline std::string_view to_string(Split s) {
  switch (s) {
    case Split::train: return "train";
    case Split::validation: return "validation";
    case Split::test: return "test";
  }
  return "?";
}

inline Split parse_split(std::string_view s) {
  if (s == "train") return Split::train;
  if (s == "validation") return Split::validation;
  if (s == "test") return Split::test;
  throw ConfigError("unknown split '" + std::string(s) + "' (expected train, validation or test)");
}

struct SplitAssignment {
  std::string doc_id;
  Split split = Split::train;

  bool operator==(const SplitAssignment&) const = default;
};

struct PairInstance {
  std::string doc_id_a;
  std::string doc_id_b;
  std::string city;
  double y_early_shared = 0.0;
  double y_future_a = 0.0;
  double y_future_b = 0.0;
  char winner = 'a';  // 'a' or 'b'
};

// ---------------------------------------------------------------------------
// Parsing

struct SkippedLine {
  std::size_t line_number = 0;
  std::string reason;
};

struct ParsedReviews {
  /// business_id -> reviews sorted by (date, review_id).
  std::map<std::string, std::vector<Review>> by_business;
  std::vector<SkippedLine> skipped;

  std::size_t skip_count() const { return skipped.size(); }
};

namespace detail {

/// Accepts "YYYY-MM-DD" optionally followed by " HH:MM:SS" or "THH:MM:SS".
inline std::optional<std::array<int, 6>> parse_iso_date(std::string_view s) {
  auto digits = [&](std::size_t pos, std::size_t n) -> std::optional<int> {
    if (pos + n > s.size()) return std::nullopt;
    int v = 0;
    for (std::size_t i = pos; i < pos + n; ++i) {
      if (s[i] < '0' || s[i] > '9') return std::nullopt;
      v = v * 10 + (s[i] - '0');
    }
    return v;
  };
  if (s.size() < 10 || s[4] != '-' || s[7] != '-') return std::nullopt;
  auto y = digits(0, 4), mo = digits(5, 2), d = digits(8, 2);
  if (!y || !mo || !d || *mo < 1 || *mo > 12 || *d < 1 || *d > 31) return std::nullopt;
  std::array<int, 6> out{*y, *mo, *d, 0, 0, 0};
  if (s.size() == 10) return out;
  if (s.size() != 19 || (s[10] != ' ' && s[10] != 'T') || s[13] != ':' || s[16] != ':') return std::nullopt;
  auto h = digits(11, 2), mi = digits(14, 2), se = digits(17, 2);
  if (!h || !mi || !se || *h > 23 || *mi > 59 || *se > 60) return std::nullopt;
  out[3] = *h;
  out[4] = *mi;
  out[5] = *se;
  return out;
}

inline std::optional<std::string> parse_review_line(const nlohmann::json& j, Review& r) {
  if (!j.is_object()) return "line is not a JSON object";
  for (const char* key : {"review_id", "business_id", "date", "text"}) {
    if (!j.contains(key)) return std::string("missing field '") + key + "'";
    if (!j[key].is_string()) return std::string("field '") + key + "' is not a string";
  }
  if (!j.contains("stars")) return "missing field 'stars'";
  const auto& st = j["stars"];
  if (!st.is_number()) return "field 'stars' is not a number";
  const double stars = st.get<double>();
  if (stars != std::floor(stars) || stars < 1 || stars > 5) return "field 'stars' is not an integer in [1,5]";
  r.review_id = j["review_id"].get<std::string>();
  r.business_id = j["business_id"].get<std::string>();
  r.date = j["date"].get<std::string>();
  r.text = j["text"].get<std::string>();
  r.stars = static_cast<int>(stars);
  if (!parse_iso_date(r.date)) return "unparseable date '" + r.date + "'";
  if (text::whitespace_token_count(r.text) == 0) return "empty text";
  return std::nullopt;
}

}  // namespace detail

/// Reads Yelp-style review JSONL. Malformed lines are skipped and reported; a
/// missing file is fatal.
inline ParsedReviews parse_reviews(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open reviews file " + path.string());
  ParsedReviews out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (text::whitespace_token_count(line) == 0) continue;
    const auto j = nlohmann::json::parse(line, nullptr, /*allow_exceptions=*/false);
    if (j.is_discarded()) {
      out.skipped.push_back({line_no, "invalid JSON"});
      continue;
    }
    Review r;
    if (auto err = detail::parse_review_line(j, r)) {
      out.skipped.push_back({line_no, *err});
      continue;
    }
    out.by_business[r.business_id].push_back(std::move(r));
  }
  for (auto& [_, reviews] : out.by_business) {
    std::stable_sort(reviews.begin(), reviews.end(), [](const Review& a, const Review& b) {
      const auto da = *detail::parse_iso_date(a.date);
      const auto db = *detail::parse_iso_date(b.date);
      return std::tie(da, a.review_id) < std::tie(db, b.review_id);
    });
  }
  return out;
}

/// business_id -> city. Lines that do not parse are ignored.
inline std::map<std::string, std::string> parse_business_cities(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open business file " + path.string());
  std::map<std::string, std::string> out;
  std::string line;
  while (std::getline(in, line)) {
    const auto j = nlohmann::json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.is_object()) continue;
    if (!j.contains("business_id") || !j.contains("city")) continue;
    if (!j["business_id"].is_string() || !j["city"].is_string()) continue;
    out[j["business_id"].get<std::string>()] = j["city"].get<std::string>();
  }
  return out;
}

// ---------------------------------------------------------------------------
// Segmentation

using Segmenter = std::function<std::vector<std::string>(std::string_view)>;

/// Tokens ending in '.' that never close a sentence. Compared lowercased.
inline constexpr std::array<std::string_view, 9> kAbbreviations = {
    "dr.", "mr.", "mrs.", "st.", "vs.", "etc.", "e.g.", "i.e.", "approx."};

namespace detail {

inline bool is_closing(char c) { return c == '"' || c == '\'' || c == ')' || c == ']'; }
inline bool is_opening(char c) { return c == '"' || c == '\'' || c == '(' || c == '['; }

inline bool is_abbreviation(std::string_view tok) {
  std::string lower;
  for (char c : tok) lower.push_back((c >= 'A' && c <= 'Z') ? static_cast<char>(c - 'A' + 'a') : c);
  return std::find(kAbbreviations.begin(), kAbbreviations.end(), lower) != kAbbreviations.end();
}

inline bool ends_sentence(std::string_view tok) {
  while (!tok.empty() && is_closing(tok.back())) tok.remove_suffix(1);
  if (tok.empty()) return false;
  const char last = tok.back();
  if (last == '!' || last == '?') return true;
  if (last != '.') return false;
  return !is_abbreviation(tok);
}

inline bool starts_sentence(std::string_view tok) {
  while (!tok.empty() && is_opening(tok.front())) tok.remove_prefix(1);
  if (tok.empty()) return false;
  const char c = tok.front();
  return (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9');
}

}  // namespace detail

/// Rule-based splitter: a boundary follows a token ending in '.', '!' or '?'
/// (closing quotes/brackets allowed) when the next token starts with a capital
/// letter or digit, unless the token is a listed abbreviation. Sentences are
/// the whitespace tokens re-joined with single spaces.
inline std::vector<std::string> segment_sentences(std::string_view s) {
  const auto toks = text::whitespace_tokens(s);
  std::vector<std::string> out;
  std::string cur;
  for (std::size_t i = 0; i < toks.size(); ++i) {
    if (!cur.empty()) cur.push_back(' ');
    cur.append(toks[i]);
    const bool last = i + 1 == toks.size();
    if (last || (detail::ends_sentence(toks[i]) && detail::starts_sentence(toks[i + 1]))) {
      out.push_back(std::move(cur));
      cur.clear();
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Task construction

/// Builds one instance per business with at least t reviews. Sentences come
/// from the first k reviews only. Output is sorted by doc_id.
inline std::vector<TaskInstance> build_task_instances(
    const std::map<std::string, std::vector<Review>>& by_business, int k, int t,
    const std::map<std::string, std::string>& cities = {}, const Segmenter& segmenter = segment_sentences) {
  if (k < 1) throw ConfigError("k must be at least 1");
  if (k >= t) throw ConfigError("k must be smaller than t (got k=" + std::to_string(k) + ", t=" + std::to_string(t) + ")");
  std::vector<TaskInstance> out;
  for (const auto& [business_id, reviews] : by_business) {
    if (reviews.size() < static_cast<std::size_t>(t)) continue;
    TaskInstance inst;
    inst.doc_id = business_id;
    if (auto it = cities.find(business_id); it != cities.end()) inst.city = it->second;
    inst.k = k;
    inst.t = t;
    long early = 0, future = 0;
    std::vector<std::string> texts;
    for (int i = 0; i < t; ++i) {
      future += reviews[i].stars;
      if (i >= k) continue;
      early += reviews[i].stars;
      texts.push_back(reviews[i].text);
      for (auto& s : segmenter(reviews[i].text)) {
        if (text::whitespace_token_count(s) == 0) continue;
        Sentence sent;
        sent.doc_id = business_id;
        sent.review_index = static_cast<std::size_t>(i);
        sent.sent_index = inst.sentences.size();
        sent.token_count = text::whitespace_token_count(s);
        sent.text = std::move(s);
        inst.sentences.push_back(std::move(sent));
      }
    }
    if (inst.sentences.empty()) continue;
    inst.full_text = text::normalize_whitespace(text::join(texts, " "));
    inst.y_early = static_cast<double>(early) / k;
    inst.y_future = static_cast<double>(future) / t;
    out.push_back(std::move(inst));
  }
  return out;
}

/// Sum of early stars recovered from the stored mean. Means of k integer
/// ratings are exact multiples of 1/k, so rounding recovers the integer sum.
inline long early_star_sum(const TaskInstance& inst) { return std::lround(inst.y_early * inst.k); }

// ---------------------------------------------------------------------------
// Splits

/// Largest-remainder apportionment of n items to the given ratios. Remainder
/// ties go to the earlier bucket.
inline std::array<std::size_t, 3> apportion(std::size_t n, const std::array<double, 3>& ratios) {
  std::array<std::size_t, 3> counts{};
  std::array<double, 3> frac{};
  std::size_t assigned = 0;
  for (std::size_t i = 0; i < 3; ++i) {
    const double exact = ratios[i] * static_cast<double>(n);
    counts[i] = static_cast<std::size_t>(std::floor(exact + 1e-9));
    frac[i] = exact - static_cast<double>(counts[i]);
    assigned += counts[i];
  }
  std::array<std::size_t, 3> order{0, 1, 2};
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return frac[a] > frac[b]; });
  for (std::size_t i = 0; assigned < n; ++i, ++assigned) counts[order[i % 3]] += 1;
  return counts;
}

/// Seeded random split; output sorted by doc_id.
inline std::vector<SplitAssignment> split_dataset(const std::vector<TaskInstance>& instances,
                                                  std::array<double, 3> ratios = {0.64, 0.16, 0.20},
                                                  std::uint64_t seed = 0) {
  const double sum = ratios[0] + ratios[1] + ratios[2];
  if (std::abs(sum - 1.0) > 1e-9) throw ConfigError("split ratios must sum to 1");
  for (double r : ratios) {
    if (r < 0) throw ConfigError("split ratios must be nonnegative");
  }
  std::vector<std::string> ids;
  ids.reserve(instances.size());
  for (const auto& inst : instances) ids.push_back(inst.doc_id);
  std::sort(ids.begin(), ids.end());
  Rng rng(seed);
  rng.shuffle(ids);
  const auto counts = apportion(ids.size(), ratios);
  std::vector<SplitAssignment> out;
  out.reserve(ids.size());
  for (std::size_t i = 0; i < ids.size(); ++i) {
    const Split s = i < counts[0] ? Split::train : i < counts[0] + counts[1] ? Split::validation : Split::test;
    out.push_back({ids[i], s});
  }
  std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.doc_id < b.doc_id; });
  return out;
}

// ---------------------------------------------------------------------------
// Pairwise task

struct PairBatch {
  std::vector<PairInstance> pairs;
  std::size_t eligible = 0;  // number of eligible pairs before sampling
  bool short_of_sample = false;
};

/// Pairs restaurants in the same city with identical early mean rating and a
/// future gap of at least one star. Sampling is seeded; no doc is reused and
/// each city contributes at most max_per_city pairs.
inline PairBatch build_pairs(const std::vector<TaskInstance>& instances, std::size_t max_per_city = 25,
                             std::size_t sample_n = 200, std::uint64_t seed = 0) {
  std::vector<const TaskInstance*> sorted;
  for (const auto& inst : instances) sorted.push_back(&inst);
  std::sort(sorted.begin(), sorted.end(), [](auto* a, auto* b) { return a->doc_id < b->doc_id; });

  std::map<std::tuple<std::string, int, long>, std::vector<const TaskInstance*>> groups;
  for (auto* inst : sorted) groups[{inst->city, inst->k, early_star_sum(*inst)}].push_back(inst);

  std::vector<PairInstance> eligible;
  for (const auto& [key, members] : groups) {
    for (std::size_t i = 0; i < members.size(); ++i) {
      for (std::size_t j = i + 1; j < members.size(); ++j) {
        const auto* a = members[i];
        const auto* b = members[j];
        if (std::abs(a->y_future - b->y_future) < 1.0) continue;
        PairInstance p;
        p.doc_id_a = a->doc_id;
        p.doc_id_b = b->doc_id;
        p.city = a->city;
        p.y_early_shared = a->y_early;
        p.y_future_a = a->y_future;
        p.y_future_b = b->y_future;
        p.winner = a->y_future > b->y_future ? 'a' : 'b';
        eligible.push_back(std::move(p));
      }
    }
  }

  PairBatch out;
  out.eligible = eligible.size();
  Rng rng(seed);
  rng.shuffle(eligible);
  std::unordered_set<std::string> used;
  std::map<std::string, std::size_t> per_city;
  for (auto& p : eligible) {
    if (out.pairs.size() >= sample_n) break;
    if (used.count(p.doc_id_a) || used.count(p.doc_id_b)) continue;
    if (per_city[p.city] >= max_per_city) continue;
    used.insert(p.doc_id_a);
    used.insert(p.doc_id_b);
    per_city[p.city] += 1;
    out.pairs.push_back(std::move(p));
  }
  out.short_of_sample = out.pairs.size() < sample_n;
  return out;
}

// ---------------------------------------------------------------------------
// Synthetic corpus

struct SyntheticConfig {
  int k = 10;
  int t = 50;
  std::size_t n_cities = 4;
  std::size_t min_sentences_per_review = 2;
  std::size_t max_sentences_per_review = 5;
  double star_noise = 1.0;        // sd of review stars around the latent quality
  double review_mood_noise = 0.5;  // sd of the per-review quality driving its text
  double future_noise = 0.15;      // sd of y_future around the latent quality
  std::optional<double> fixed_quality;  // pin q for every document
};

namespace synthetic {

inline const std::vector<std::string_view> kPositive = {
    "delicious", "amazing", "friendly", "great",   "fresh",    "excellent", "tasty",
    "wonderful", "perfect", "loved",    "cozy",    "generous", "attentive", "fantastic"};
inline const std::vector<std::string_view> kNegative = {
    "bland", "rude",  "cold",       "terrible", "dirty", "slow",  "awful",
    "stale", "soggy", "overpriced", "greasy",   "noisy", "burnt", "disappointing"};
inline const std::vector<std::string_view> kNeutral = {
    "menu",  "table", "lunch",   "dinner", "parking", "waiter", "chicken", "rice",   "portion",
    "drink", "order", "evening", "patio",  "counter", "sauce",  "bread",   "coffee", "weekend",
    "the",   "was",   "and",     "with",   "a",       "our",    "very",    "for",    "we"};
inline const std::vector<std::string_view> kStarters = {"The", "Our", "My", "This", "We", "Their", "I", "Every"};
inline const std::vector<std::string_view> kCities = {"Phoenix", "Toronto", "Las Vegas", "Pittsburgh",
                                                      "Charlotte", "Madison", "Cleveland", "Calgary"};

inline bool is_positive(std::string_view w) {
  return std::find(kPositive.begin(), kPositive.end(), w) != kPositive.end();
}

template <class Pool>
std::string_view pick(Rng& rng, const Pool& pool) {
  return pool[rng.below(pool.size())];
}

/// class: 0 negative, 1 neutral, 2 positive.
inline std::string make_sentence(Rng& rng, int cls) {
  std::vector<std::string> toks;
  toks.emplace_back(pick(rng, kStarters));
  const std::size_t len = 5 + rng.below(6);
  const std::size_t n_sentiment = cls == 1 ? 0 : 1 + rng.below(3);
  std::vector<bool> slot(len - 1, false);
  for (std::size_t i = 0; i < n_sentiment && i < slot.size(); ++i) slot[i] = true;
  rng.shuffle(slot);
  for (bool s : slot) {
    if (s) toks.emplace_back(cls == 2 ? pick(rng, kPositive) : pick(rng, kNegative));
    else toks.emplace_back(pick(rng, kNeutral));
  }
  toks.back() += (cls != 1 && rng.uniform() < 0.3) ? "!" : ".";
  return text::join(toks, " ");
}

}  // namespace synthetic

/// Synthetic restaurants: a latent quality q in [1,5] drives both the review
/// stars (noisily) and the sentiment mix of the review text, and y_future is q
/// plus small noise, so early text predicts the future rating.
inline std::vector<TaskInstance> generate_synthetic(std::size_t n_docs, std::uint64_t seed,
                                                    const SyntheticConfig& cfg = {}) {
  if (cfg.k < 1 || cfg.k >= cfg.t) throw ConfigError("synthetic corpus needs 1 <= k < t");
  if (cfg.n_cities == 0 || cfg.n_cities > synthetic::kCities.size()) throw ConfigError("n_cities out of range");
  std::vector<TaskInstance> out;
  out.reserve(n_docs);
  for (std::size_t d = 0; d < n_docs; ++d) {
    char id[32];
    std::snprintf(id, sizeof id, "syn-%06zu", d);
    Rng rng(seed, id);
    const double q = cfg.fixed_quality ? std::clamp(*cfg.fixed_quality, 1.0, 5.0) : rng.uniform(1.0, 5.0);

    std::map<std::string, std::vector<Review>> one;
    auto& reviews = one[id];
    for (int r = 0; r < cfg.t; ++r) {
      Review rev;
      rev.review_id = std::string(id) + "-r" + std::to_string(r);
      rev.business_id = id;
      rev.stars = static_cast<int>(std::clamp(std::lround(rng.normal(q, cfg.star_noise)), 1L, 5L));
      char date[32];
      std::snprintf(date, sizeof date, "%04d-%02d-%02d", 2015 + r / 336, 1 + (r / 28) % 12, 1 + r % 28);
      rev.date = date;
      if (r < cfg.k) {
        const double mood = rng.normal(q, cfg.review_mood_noise);
        const double u = std::clamp((mood - 1.0) / 4.0, 0.0, 1.0);
        const std::vector<double> mix = {0.05 + 0.8 * (1.0 - u), 0.25, 0.05 + 0.8 * u};
        const std::size_t span = cfg.max_sentences_per_review - cfg.min_sentences_per_review + 1;
        const std::size_t n_sent = cfg.min_sentences_per_review + rng.below(span);
        std::vector<std::string> sents;
        for (std::size_t s = 0; s < n_sent; ++s) sents.push_back(synthetic::make_sentence(rng, static_cast<int>(rng.categorical(mix))));
        rev.text = text::join(sents, " ");
      } else {
        rev.text = "later review";
      }
      reviews.push_back(std::move(rev));
    }
    const std::map<std::string, std::string> cities = {{id, std::string(synthetic::kCities[rng.below(cfg.n_cities)])}};
    auto built = build_task_instances(one, cfg.k, cfg.t, cities);
    auto& inst = built.front();
    inst.y_future = std::clamp(q + rng.normal(0.0, cfg.future_noise), 1.0, 5.0);
    out.push_back(std::move(inst));
  }
  return out;
}

// ---------------------------------------------------------------------------
// File formats

inline nlohmann::json to_json(const TaskInstance& inst) {
  nlohmann::json sents = nlohmann::json::array();
  for (const auto& s : inst.sentences) {
    sents.push_back({{"review_index", s.review_index}, {"sent_index", s.sent_index}, {"text", s.text}});
  }
  return {{"doc_id", inst.doc_id}, {"city", inst.city},         {"k", inst.k},
          {"t", inst.t},           {"y_early", inst.y_early},   {"y_future", inst.y_future},
          {"sentences", sents}};
}

inline TaskInstance instance_from_json(const nlohmann::json& j) {
  TaskInstance inst;
  inst.doc_id = j.at("doc_id").get<std::string>();
  inst.city = j.value("city", std::string{});
  inst.k = j.at("k").get<int>();
  inst.t = j.at("t").get<int>();
  inst.y_early = j.at("y_early").get<double>();
  inst.y_future = j.at("y_future").get<double>();
  std::vector<std::string> texts;
  for (const auto& s : j.at("sentences")) {
    Sentence sent;
    sent.doc_id = inst.doc_id;
    sent.review_index = s.at("review_index").get<std::size_t>();
    sent.sent_index = s.at("sent_index").get<std::size_t>();
    sent.text = s.at("text").get<std::string>();
    sent.token_count = text::whitespace_token_count(sent.text);
    texts.push_back(sent.text);
    inst.sentences.push_back(std::move(sent));
  }
  for (std::size_t i = 0; i < inst.sentences.size(); ++i) {
    if (inst.sentences[i].sent_index != i) throw ConfigError("instance " + inst.doc_id + ": sent_index out of order");
  }
  if (inst.sentences.empty()) throw ConfigError("instance " + inst.doc_id + " has no sentences");
  inst.full_text = text::normalize_whitespace(text::join(texts, " "));
  return inst;
}

inline void write_instances(std::ostream& os, const std::vector<TaskInstance>& instances) {
  for (const auto& inst : instances) os << to_json(inst).dump() << '\n';
}

inline std::vector<TaskInstance> read_instances(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open instances file " + path.string());
  std::vector<TaskInstance> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (text::whitespace_token_count(line) == 0) continue;
    try {
      out.push_back(instance_from_json(nlohmann::json::parse(line)));
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

inline void write_splits(std::ostream& os, const std::vector<SplitAssignment>& splits) {
  os << "doc_id,split\n";
  for (const auto& s : splits) os << s.doc_id << ',' << to_string(s.split) << '\n';
}

inline std::vector<SplitAssignment> read_splits(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open splits file " + path.string());
  std::vector<SplitAssignment> out;
  std::string line;
  bool header = true;
  while (std::getline(in, line)) {
    if (header) {
      header = false;
      continue;
    }
    if (line.empty()) continue;
    const auto comma = line.rfind(',');
    if (comma == std::string::npos) throw ConfigError("malformed splits line: " + line);
    out.push_back({line.substr(0, comma), parse_split(line.substr(comma + 1))});
  }
  return out;
}

inline nlohmann::json to_json(const PairInstance& p) {
  return {{"doc_id_a", p.doc_id_a},     {"doc_id_b", p.doc_id_b},     {"city", p.city},
          {"y_early_shared", p.y_early_shared}, {"y_future_a", p.y_future_a}, {"y_future_b", p.y_future_b},
          {"winner", std::string(1, p.winner)}};
}

inline PairInstance pair_from_json(const nlohmann::json& j) {
  PairInstance p;
  p.doc_id_a = j.at("doc_id_a").get<std::string>();
  p.doc_id_b = j.at("doc_id_b").get<std::string>();
  p.city = j.value("city", std::string{});
  p.y_early_shared = j.at("y_early_shared").get<double>();
  p.y_future_a = j.at("y_future_a").get<double>();
  p.y_future_b = j.at("y_future_b").get<double>();
  const auto w = j.at("winner").get<std::string>();
  if (w != "a" && w != "b") throw ConfigError("pair winner must be 'a' or 'b'");
  p.winner = w[0];
  return p;
}

inline std::vector<PairInstance> read_pairs(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open pairs file " + path.string());
  std::vector<PairInstance> out;
  std::string line;
  while (std::getline(in, line)) {
    if (text::whitespace_token_count(line) == 0) continue;
    try {
      out.push_back(pair_from_json(nlohmann::json::parse(line)));
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError(path.string() + ": " + e.what());
    }
  }
  return out;
}

}  // namespace decsum
