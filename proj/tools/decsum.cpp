// decsum: decision-focused extractive summarization from the command line.

#include <cstdlib>
#include <iostream>

#include <CLI11.hpp>

#include "decsum/cli.hpp"

namespace {

using namespace decsum;
using namespace decsum::cli;

void add_scorer_timeout(CLI::App* cmd, long long& timeout_ms) {
  cmd->add_option("--scorer-timeout-ms", timeout_ms, "Timeout for one external scorer response")->check(CLI::PositiveNumber);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Decision-focused extractive summarization"};
  app.set_config("--config", "", "TOML/INI config file; command-line flags take precedence");
  app.require_subcommand(1);
  app.fallthrough();

  std::uint64_t seed = 0;
  std::optional<std::size_t> workers;
  long long timeout_ms = 30000;
  app.add_option("--seed", seed, "Global seed")->capture_default_str();

  // ingest
  IngestOptions ingest;
  auto* c_ingest = app.add_subcommand("ingest", "Build task instances and splits from Yelp-style review JSONL");
  c_ingest->add_option("--reviews", ingest.reviews, "Review JSONL")->required();
  c_ingest->add_option("--business", ingest.business, "Business JSONL with city");
  c_ingest->add_option("--k", ingest.k, "Number of early reviews")->capture_default_str();
  c_ingest->add_option("--t", ingest.t, "Number of reviews defining the future rating")->capture_default_str();
  c_ingest->add_option("--out", ingest.out, "Output directory")->required();

  // synth
  SynthOptions synth;
  auto* c_synth = app.add_subcommand("synth", "Generate a synthetic corpus with splits");
  c_synth->add_option("--n-docs", synth.n_docs)->capture_default_str();
  c_synth->add_option("--cities", synth.config.n_cities)->capture_default_str();
  c_synth->add_option("--star-noise", synth.config.star_noise)->capture_default_str();
  c_synth->add_option("--k", synth.config.k)->capture_default_str();
  c_synth->add_option("--t", synth.config.t)->capture_default_str();
  c_synth->add_option("--out", synth.out, "Output directory")->required();

  // train
  TrainOptions train;
  auto* c_train = app.add_subcommand("train", "Fit the hashed n-gram ridge model");
  c_train->add_option("--instances", train.instances, "Instance directory")->required();
  c_train->add_option("--split", train.split)->capture_default_str();
  c_train->add_option("--lambda", train.lambda, "Ridge penalty")->capture_default_str();
  c_train->add_option("--dimension", train.featurizer.dimension, "Hashed feature dimension")->capture_default_str();
  c_train->add_option("--ngram-max", train.featurizer.ngram_max)->capture_default_str()->check(CLI::Range(1, 3));
  c_train->add_option("--out", train.out, "Model JSON")->required();

  // summarize
  SummarizeOptions summ;
  std::string order = "original";
  auto* c_summ = app.add_subcommand("summarize", "Select summaries for every instance of a split");
  c_summ->add_option("--instances", summ.instances, "Instance directory")->required();
  c_summ->add_option("--split", summ.split)->capture_default_str();
  c_summ->add_option("--method", summ.method, "decsum|random|lead|occlusion")->capture_default_str();
  c_summ->add_option("--alpha", summ.selection.weights.alpha)->capture_default_str();
  c_summ->add_option("--beta", summ.selection.weights.beta)->capture_default_str();
  c_summ->add_option("--gamma", summ.selection.weights.gamma)->capture_default_str();
  c_summ->add_option("--beam-size", summ.selection.beam_size)->capture_default_str();
  c_summ->add_option("--k-sentences", summ.selection.max_sentences)->capture_default_str();
  c_summ->add_option("--order", order, "original|selected")->capture_default_str();
  c_summ->add_option("--eps", summ.selection.eps)->capture_default_str();
  c_summ->add_option("--model", summ.model, "model.json | lexicon[:PATH] | exec:CMD | tcp:HOST:PORT")->required();
  c_summ->add_option("--embed-dim", summ.embedder.dimension)->capture_default_str();
  c_summ->add_option("--workers", workers, "Parallel instances (default: DECSUM_WORKERS or 1)");
  c_summ->add_option("--out", summ.out, "Summary JSONL")->required();
  add_scorer_timeout(c_summ, timeout_ms);

  // evaluate
  EvaluateOptions eval;
  auto* c_eval = app.add_subcommand("evaluate", "Metrics and density curves for summary files");
  c_eval->add_option("--summaries", eval.summaries, "Summary JSONL files")->required();
  c_eval->add_option("--instances", eval.instances, "Instance directory")->required();
  c_eval->add_option("--split", eval.split)->capture_default_str();
  c_eval->add_option("--model", eval.model)->required();
  c_eval->add_option("--budget", eval.budget, "Token budget")->capture_default_str();
  c_eval->add_option("--sweep", eval.sweep, "Comma-separated budgets")->delimiter(',');
  c_eval->add_option("--grid-size", eval.grid_size)->capture_default_str();
  c_eval->add_flag("--svg", eval.svg, "Also write one SVG per density curve");
  c_eval->add_option("--workers", workers);
  c_eval->add_option("--out", eval.out, "Output directory")->required();
  add_scorer_timeout(c_eval, timeout_ms);

  // pairs
  PairsOptions pairs;
  auto* c_pairs = app.add_subcommand("pairs", "Build pairwise-task instances");
  c_pairs->add_option("--instances", pairs.instances)->required();
  c_pairs->add_option("--split", pairs.split)->capture_default_str();
  c_pairs->add_option("--max-per-city", pairs.max_per_city)->capture_default_str();
  c_pairs->add_option("--sample", pairs.sample)->capture_default_str();
  c_pairs->add_option("--out", pairs.out)->required();

  // pairscore
  PairscoreOptions ps;
  auto* c_ps = app.add_subcommand("pairscore", "Pairwise accuracy of summaries");
  c_ps->add_option("--pairs", ps.pairs)->required();
  c_ps->add_option("--summaries", ps.summaries)->required();
  c_ps->add_option("--model", ps.model)->required();
  c_ps->add_option("--instances", ps.instances, "Also score the full text");
  c_ps->add_option("--split", ps.split)->capture_default_str();
  c_ps->add_option("--budget", ps.budget)->capture_default_str();
  c_ps->add_option("--out", ps.out, "Pairwise results JSONL")->required();
  c_ps->add_option("--report", ps.report, "Accuracy CSV (default: OUT.accuracy.csv)");
  add_scorer_timeout(c_ps, timeout_ms);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kUsage;
  }

  const ScorerOptions scorer{std::chrono::milliseconds(timeout_ms)};
  try {
    if (*c_ingest) {
      ingest.seed = seed;
      return cmd_ingest(ingest);
    }
    if (*c_synth) {
      synth.seed = seed;
      return cmd_synth(synth);
    }
    if (*c_train) return cmd_train(train);
    if (*c_summ) {
      summ.selection.seed = seed;
      summ.selection.order_mode = parse_order_mode(order);
      summ.workers = workers;
      summ.scorer = scorer;
      return cmd_summarize(summ);
    }
    if (*c_eval) {
      eval.workers = workers;
      eval.scorer = scorer;
      return cmd_evaluate(eval);
    }
    if (*c_pairs) {
      pairs.seed = seed;
      return cmd_pairs(pairs);
    }
    if (*c_ps) {
      ps.scorer = scorer;
      return cmd_pairscore(ps);
    }
  } catch (const TransportError& e) {
    log(std::string("scorer transport failure: ") + e.what());
    return kTransport;
  } catch (const ProtocolError& e) {
    log(std::string("scorer protocol failure: ") + e.what());
    return kTransport;
  } catch (const ConfigError& e) {
    log(std::string("error: ") + e.what());
    return kUsage;
  } catch (const std::filesystem::filesystem_error& e) {
    log(std::string("i/o error: ") + e.what());
    return kUsage;
  } catch (const std::exception& e) {
    log(std::string("error: ") + e.what());
    return 1;
  }
  return kUsage;
}
