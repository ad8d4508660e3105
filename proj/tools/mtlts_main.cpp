#include <deque>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "mtlts/commands.hpp"

namespace {

// Binds a config-file key to a command-line flag; a flag that was given on the
// command line overrides the file value.
struct KeyFlag {
  std::string key;
  std::string value;
  CLI::Option* opt = nullptr;
};

struct ConfiguredCommand {
  CLI::App* cmd = nullptr;
  std::string config_path;
  std::deque<KeyFlag> flags;

  void add(const std::string& flag, const std::string& key, const std::string& help) {
    flags.push_back({key, "", nullptr});
    flags.back().opt = cmd->add_option(flag, flags.back().value, help);
  }

  mtlts::KeyValueConfig resolve() const {
    mtlts::KeyValueConfig cfg;
    if (!config_path.empty()) cfg = mtlts::KeyValueConfig::from_file(config_path);
    for (const auto& f : flags)
      if (f.opt->count() > 0) cfg.set(f.key, f.value);
    return cfg;
  }
};

void add_training_knobs(ConfiguredCommand& c) {
  c.cmd->add_option("--config", c.config_path, "flat key=value config file");
  c.add("--mode", "mode", "STLV, STLS, STLS+STLV, or MTLTS");
  c.add("--lambda1", "lambda1", "stance loss weight");
  c.add("--lambda2", "lambda2", "summarizer loss weight in the joint objective");
  c.add("--kappa", "kappa", "summary score mix: kappa*Summ + (1-kappa)*Ver");
  c.add("--summary-length", "summary_length", "summary budget in words");
  c.add("--dl", "dl", "pseudo-document length in tweets");
  c.add("--seed", "seed", "master random seed");
  c.add("--encoder", "encoder_mode", "trainable or frozen");
  c.add("--solver", "solver", "exact or greedy tweet selection");
  c.add("--epochs", "epochs", "training epochs");
  c.add("--learning-rate", "learning_rate", "Adam learning rate");
  c.add("--weight-decay", "weight_decay", "L2 weight decay");
  c.add("--batch-size", "batch_size", "threads or documents per update");
  c.add("--threads", "threads", "worker threads (results identical for any value)");
  c.add("--val-fraction", "val_fraction", "validation share of each training event");
  c.add("--augment-threshold", "augment_threshold", "similarity threshold for label augmentation");
  c.add("--augment-ratio", "augment_ratio", "target in/out label ratio");
  c.add("--pretrained-cache", "pretrained_cache", "embedding cache file for frozen mode");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"credibility-aware microblog summarization pipeline"};
  app.require_subcommand(1);

  auto* ingest = app.add_subcommand("ingest", "read a PHEME tree into a corpus cache");
  std::string in_data, in_out = "corpus.json";
  ingest->add_option("--data", in_data, "PHEME root directory")->required();
  ingest->add_option("--out", in_out, "cache file to write");

  ConfiguredCommand train;
  train.cmd = app.add_subcommand("train", "train one leave-one-out split");
  std::string tr_cache, tr_event, tr_out = "runs/train";
  train.cmd->add_option("--cache", tr_cache, "corpus cache from ingest")->required();
  train.cmd->add_option("--test-event", tr_event, "event held out for testing")->required();
  train.cmd->add_option("--out", tr_out, "output directory");
  add_training_knobs(train);

  auto* summ = app.add_subcommand("summarize", "summarize a held-out event");
  std::string su_ckpt, su_cache, su_event, su_out = "runs/summary", su_solver = "greedy";
  double su_kappa = 0.5;
  int su_words = mtlts::kDefaultSummaryWords;
  summ->add_option("--checkpoint", su_ckpt, "trained checkpoint")->required();
  summ->add_option("--cache", su_cache, "corpus cache from ingest")->required();
  summ->add_option("--event", su_event, "event to summarize")->required();
  summ->add_option("--kappa", su_kappa, "summary score mix: kappa*Summ + (1-kappa)*Ver");
  summ->add_option("--summary-length", su_words, "summary budget in words");
  summ->add_option("--solver", su_solver, "exact or greedy tweet selection");
  summ->add_option("--out", su_out, "output directory");

  ConfiguredCommand loo;
  loo.cmd = app.add_subcommand("loo-run", "train and evaluate every leave-one-out split");
  std::string lo_cache, lo_out = "runs/loo";
  loo.cmd->add_option("--cache", lo_cache, "corpus cache from ingest")->required();
  loo.cmd->add_option("--out", lo_out, "output directory");
  add_training_knobs(loo);

  CLI11_PARSE(app, argc, argv);

  try {
    if (app.got_subcommand(ingest)) {
      mtlts::cmd_ingest(in_data, in_out);
    } else if (app.got_subcommand(train.cmd)) {
      mtlts::cmd_train(train.resolve(), tr_cache, tr_event, tr_out);
    } else if (app.got_subcommand(summ)) {
      mtlts::SolverKind solver;
      if (su_solver == "exact")
        solver = mtlts::SolverKind::kExact;
      else if (su_solver == "greedy")
        solver = mtlts::SolverKind::kGreedy;
      else
        mtlts::fail("unknown solver: " + su_solver + " (expected exact or greedy)");
      mtlts::cmd_summarize(su_ckpt, su_cache, su_event, su_kappa, su_words, solver, su_out);
    } else if (app.got_subcommand(loo.cmd)) {
      mtlts::cmd_loo_run(loo.resolve(), lo_cache, lo_out);
    }
  } catch (const mtlts::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
