#include "mtlts/commands.hpp"

#include <algorithm>
#include <cstdlib>
#include <iomanip>
#include <iostream>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "mtlts/checkpoint.hpp"
#include "mtlts/evaluation.hpp"

using nlohmann::json;

namespace mtlts {

namespace {

// The pretrained vector cache is optional equipment; a config key beats the
// environment variable.
std::optional<fs::path> pretrained_cache_path(const KeyValueConfig& config) {
  std::string p = config.get("pretrained_cache", std::string());
  if (p.empty())
    if (const char* env = std::getenv("MTLTS_PRETRAINED_CACHE")) p = env;
  if (p.empty()) return std::nullopt;
  return fs::path(p);
}

std::unique_ptr<EmbeddingCache> load_pretrained(const KeyValueConfig& config,
                                                bool required) {
  auto path = pretrained_cache_path(config);
  if (!path) {
    if (required)
      fail("frozen encoder mode needs pretrained_cache (config key or "
           "MTLTS_PRETRAINED_CACHE)");
    return nullptr;
  }
  return std::make_unique<EmbeddingCache>(EmbeddingCache::load(*path));
}

std::vector<Corpus> augmented_corpora(const KeyValueConfig& config,
                                      std::vector<Corpus> corpora) {
  const double threshold = config.get("augment_threshold", 0.75);
  const double ratio = config.get("augment_ratio", 1.0 / 9.0);
  for (auto& c : corpora) {
    TfidfSimilarity sim = TfidfSimilarity::fit(c);
    AugmentStats st;
    c = augment_summary_labels(std::move(c), threshold, ratio, sim, &st);
    std::cerr << "[augment] " << c.event_name << ": gold " << st.gold_in
              << ", relabeled " << st.relabeled << ", in/out ratio " << std::fixed
              << std::setprecision(3) << st.achieved_ratio << "\n";
  }
  return corpora;
}

std::vector<Split> prepare_splits(const KeyValueConfig& config,
                                  const std::vector<Corpus>& corpora) {
  const double val_fraction = config.get("val_fraction", 0.1);
  const auto seed =
      static_cast<std::uint64_t>(std::stoull(config.get("seed", std::string("7"))));
  return leave_one_out_splits(corpora, val_fraction, seed);
}

const Corpus& corpus_by_event(const std::vector<Corpus>& corpora, const std::string& event) {
  for (const auto& c : corpora)
    if (c.event_name == event) return c;
  std::string names;
  for (const auto& c : corpora) names += (names.empty() ? "" : ", ") + c.event_name;
  fail("unknown event " + event + " (cache has: " + names + ")");
}

std::string gold_summary_text(const Corpus& corpus) {
  std::vector<const Tweet*> tweets;
  for (const auto& id : corpus.gold_summary)
    tweets.push_back(&corpus.find_thread(id)->source().tweet);
  std::sort(tweets.begin(), tweets.end(), [](const Tweet* a, const Tweet* b) {
    if (a->timestamp != b->timestamp) return a->timestamp < b->timestamp;
    return a->id < b->id;
  });
  std::string out;
  for (const Tweet* t : tweets) {
    out += t->text;
    out += "\n";
  }
  return out;
}

TrainReport train_split(const KeyValueConfig& config, const Split& split,
                        const fs::path& out_dir, Checkpoint* out_ckpt) {
  TrainConfig cfg = TrainConfig::from_kv(config);
  auto cache = load_pretrained(config, cfg.encoder_mode == EncoderMode::kFrozen);
  fs::create_directories(out_dir);
  auto [ckpt, report] = train(cfg, split, out_dir / "train_log.jsonl", cache.get());
  save_checkpoint(out_dir / "checkpoint.mtlc", ckpt);

  json jr;
  jr["test_event"] = split.test_event;
  jr["best_epoch"] = report.best_epoch;
  jr["best_val_objective"] = report.best_val_objective;
  jr["diverged"] = report.diverged;
  jr["val_accuracy"] = report.val_ver.accuracy;
  jr["val_macro_f1"] = report.val_ver.macro_f1;
  jr["val_summ_bce"] = report.val_summ_bce;
  json epochs = json::array();
  for (const auto& e : report.epochs) {
    json je{{"epoch", e.epoch}, {"val_objective", e.val_objective}};
    if (e.l_ver) je["l_ver"] = *e.l_ver;
    if (e.l_summ) je["l_summ"] = *e.l_summ;
    if (e.l_mtlts) je["l_mtlts"] = *e.l_mtlts;
    epochs.push_back(std::move(je));
  }
  jr["epochs"] = std::move(epochs);
  write_file(out_dir / "report.json", jr.dump(2) + "\n");

  if (out_ckpt) *out_ckpt = std::move(ckpt);
  return report;
}

MetricsRow summarize_with(const Checkpoint& ckpt, const Corpus& corpus, double kappa,
                          int max_words, SolverKind solver, const fs::path& out_dir,
                          const EmbeddingCache* cache) {
  for (const auto& e : ckpt.train_events)
    if (e == corpus.event_name)
      fail("refusing to summarize " + corpus.event_name +
           ": the checkpoint saw this event during training");
  if (!ckpt.test_event.empty() && ckpt.test_event != corpus.event_name)
    std::cerr << "[summarize] checkpoint was held out on " << ckpt.test_event
              << ", summarizing " << corpus.event_name << "\n";
  if (kappa < 0.0 || kappa > 1.0) fail("kappa must be in [0, 1]");
  if (max_words <= 0) fail("summary length must be positive");

  Prediction pred = predict(ckpt, corpus.threads, cache);
  if (pred.summ_prob.empty())
    fail("checkpoint has no summarizer output for " + corpus.event_name +
         " (verifier-only mode, or too few threads for dl)");

  std::map<std::string, int> lengths;
  for (const auto& t : corpus.threads) lengths[t.source_id] = t.source().tweet.word_length;
  RelevanceTable table = build_relevance(pred.ver_prob, pred.summ_prob, lengths, kappa);
  if (table.rows.empty())
    fail("no candidates for " + corpus.event_name +
         ": no tweet passed both relevance filters");

  std::vector<Tweet> cand_tweets;
  for (const auto& row : table.rows)
    cand_tweets.push_back(corpus.find_thread(row.id)->source().tweet);
  TfidfSimilarity sim = TfidfSimilarity::fit(corpus);
  Eigen::MatrixXd sims = similarity_matrix(cand_tweets, sim);

  SummarySelection sel = solver == SolverKind::kExact ? solve_exact(table, sims, max_words)
                                                      : solve_greedy(table, sims, max_words);

  std::vector<Tweet> chosen_tweets;
  for (const auto& id : sel.chosen_ids)
    chosen_tweets.push_back(corpus.find_thread(id)->source().tweet);
  std::string summary = render_summary(chosen_tweets);

  fs::create_directories(out_dir);
  write_file(out_dir / "summary.txt", summary);

  json sidecar;
  sidecar["event"] = corpus.event_name;
  sidecar["kappa"] = kappa;
  sidecar["max_words"] = max_words;
  sidecar["solver"] = to_string(sel.solver);
  sidecar["objective"] = sel.objective_value;
  sidecar["chosen_ids"] = sel.chosen_ids;
  sidecar["total_words"] = sel.total_words;
  sidecar["candidates"] = table.rows.size();
  write_file(out_dir / "selection.json", sidecar.dump(2) + "\n");

  MetricsRow row;
  row.event = corpus.event_name;
  row.chosen = static_cast<int>(sel.chosen_ids.size());
  row.total_words = sel.total_words;

  std::map<std::string, VerLabel> ver_labels;
  for (const auto& t : corpus.threads)
    if (t.ver_label) ver_labels[t.source_id] = *t.ver_label;
  row.v_ratio = v_ratio(sel, ver_labels);
  row.rouge1_f1 = rouge1_f1(summary, gold_summary_text(corpus));

  if (!pred.ver_prob.empty()) {
    std::vector<int> preds, golds;
    for (const auto& t : corpus.threads) {
      if (!t.ver_label) continue;
      preds.push_back(pred.ver_prob.at(t.source_id) > 0.5 ? 1 : 0);
      golds.push_back(*t.ver_label == VerLabel::kVerified ? 1 : 0);
    }
    if (!preds.empty()) {
      ClassificationMetrics cm = classification_metrics(preds, golds, 2);
      row.accuracy = cm.accuracy;
      row.macro_f1 = cm.macro_f1;
    }
  }

  json jm;
  jm["event"] = row.event;
  jm["v_ratio"] = row.v_ratio;
  jm["rouge1_f1"] = row.rouge1_f1;
  jm["accuracy"] = row.accuracy;
  jm["macro_f1"] = row.macro_f1;
  jm["chosen"] = row.chosen;
  jm["total_words"] = row.total_words;
  write_file(out_dir / "metrics.json", jm.dump(2) + "\n");
  return row;
}

SolverKind solver_from_string(const std::string& s) {
  if (s == "exact") return SolverKind::kExact;
  if (s == "greedy") return SolverKind::kGreedy;
  fail("unknown solver: " + s + " (expected exact or greedy)");
}

void print_row(const MetricsRow& row) {
  std::cout << std::left << std::setw(18) << row.event << std::fixed << std::setprecision(4)
            << "  v_ratio " << row.v_ratio << "  rouge1_f1 " << row.rouge1_f1
            << "  accuracy " << row.accuracy << "  macro_f1 " << row.macro_f1 << "  ("
            << row.chosen << " tweets, " << row.total_words << " words)\n";
}

}  // namespace

std::vector<Corpus> load_cache(const fs::path& path) {
  json j = json::parse(read_file(path));
  if (!j.is_object() || !j.contains("events") || !j["events"].is_array())
    fail("corpus cache " + path.string() + ": expected {\"events\": [...]}");
  std::vector<Corpus> out;
  for (const auto& je : j["events"]) {
    out.push_back(corpus_from_json(je));
    out.back().validate();
  }
  if (out.empty()) fail("corpus cache " + path.string() + " holds no events");
  return out;
}

void write_manifest(const fs::path& out_dir, const std::string& command,
                    const KeyValueConfig& config, std::uint64_t seed,
                    const std::vector<fs::path>& inputs) {
  fs::create_directories(out_dir);
  json j;
  j["command"] = command;
  j["seed"] = seed;
  j["config"] = json::object();
  for (const auto& [k, v] : config.entries()) j["config"][k] = v;
  j["input_hash"] = hash_paths(inputs);
  json names = json::array();
  for (const auto& p : inputs) names.push_back(p.string());
  j["inputs"] = std::move(names);
  j["output_dir"] = out_dir.string();
  write_file(out_dir / "manifest.json", j.dump(2) + "\n");
}

void cmd_ingest(const fs::path& data_dir, const fs::path& out_path) {
  std::vector<Corpus> corpora = load_pheme(data_dir);
  json cache;
  cache["events"] = json::array();

  std::cout << std::left << std::setw(18) << "event" << std::right << std::setw(9)
            << "threads" << std::setw(9) << "tweets" << std::setw(10) << "verified"
            << std::setw(8) << "gold" << "\n";
  int total_threads = 0, total_tweets = 0, total_verified = 0, total_gold = 0;
  for (const auto& c : corpora) {
    c.validate();
    int tweets = 0, verified = 0;
    for (const auto& t : c.threads) {
      tweets += static_cast<int>(t.nodes.size());
      if (t.ver_label && *t.ver_label == VerLabel::kVerified) ++verified;
    }
    std::cout << std::left << std::setw(18) << c.event_name << std::right << std::setw(9)
              << c.threads.size() << std::setw(9) << tweets << std::setw(10) << verified
              << std::setw(8) << c.gold_summary.size() << "\n";
    total_threads += static_cast<int>(c.threads.size());
    total_tweets += tweets;
    total_verified += verified;
    total_gold += static_cast<int>(c.gold_summary.size());
    cache["events"].push_back(corpus_to_json(c));
  }
  std::cout << std::left << std::setw(18) << "Total" << std::right << std::setw(9)
            << total_threads << std::setw(9) << total_tweets << std::setw(10)
            << total_verified << std::setw(8) << total_gold << "\n";

  if (out_path.has_parent_path()) fs::create_directories(out_path.parent_path());
  write_file(out_path, cache.dump() + "\n");
  std::cout << "cache " << out_path.string() << " sha256 " << hash_file(out_path) << "\n";
}

TrainReport cmd_train(const KeyValueConfig& config, const fs::path& cache_path,
                      const std::string& test_event, const fs::path& out_dir) {
  auto corpora = augmented_corpora(config, load_cache(cache_path));
  auto splits = prepare_splits(config, corpora);
  const Split* split = nullptr;
  for (const auto& s : splits)
    if (s.test_event == test_event) split = &s;
  if (!split) corpus_by_event(corpora, test_event);  // reports the known events
  if (!split) fail("no split for event " + test_event);

  TrainReport report = train_split(config, *split, out_dir, nullptr);
  const auto seed =
      static_cast<std::uint64_t>(std::stoull(config.get("seed", std::string("7"))));
  std::vector<fs::path> inputs = {cache_path};
  if (auto p = pretrained_cache_path(config)) inputs.push_back(*p);
  write_manifest(out_dir, "train", config, seed, inputs);
  std::cout << "trained " << test_event << ": best epoch " << report.best_epoch
            << ", val objective " << std::setprecision(6) << report.best_val_objective
            << (report.diverged ? " (diverged)" : "") << "\n";
  return report;
}

MetricsRow cmd_summarize(const fs::path& ckpt_path, const fs::path& cache_path,
                         const std::string& event, double kappa, int max_words,
                         SolverKind solver, const fs::path& out_dir) {
  Checkpoint ckpt = load_checkpoint(ckpt_path);
  auto corpora = load_cache(cache_path);
  const Corpus& corpus = corpus_by_event(corpora, event);
  KeyValueConfig config = ckpt.config;
  auto cache = load_pretrained(
      config, config.get("encoder_mode", std::string("trainable")) == "frozen");

  MetricsRow row = summarize_with(ckpt, corpus, kappa, max_words, solver, out_dir, cache.get());
  const auto seed =
      static_cast<std::uint64_t>(std::stoull(config.get("seed", std::string("7"))));
  config.set("kappa", std::to_string(kappa));
  config.set("summary_length", std::to_string(max_words));
  config.set("solver", to_string(solver));
  write_manifest(out_dir, "summarize", config, seed, {ckpt_path, cache_path});
  print_row(row);
  return row;
}

void cmd_loo_run(const KeyValueConfig& config, const fs::path& cache_path,
                 const fs::path& out_dir) {
  auto corpora = augmented_corpora(config, load_cache(cache_path));
  auto splits = prepare_splits(config, corpora);
  const double kappa = config.get("kappa", 0.5);
  const int max_words = config.get("summary_length", kDefaultSummaryWords);
  const SolverKind solver =
      solver_from_string(config.get("solver", std::string("greedy")));
  auto cache = load_pretrained(
      config, config.get("encoder_mode", std::string("trainable")) == "frozen");

  std::vector<MetricsRow> rows;
  std::vector<std::string> failures;
  for (const auto& split : splits) {
    const fs::path split_dir = out_dir / split.test_event;
    try {
      Checkpoint ckpt;
      train_split(config, split, split_dir, &ckpt);
      const Corpus& corpus = corpus_by_event(corpora, split.test_event);
      rows.push_back(
          summarize_with(ckpt, corpus, kappa, max_words, solver, split_dir, cache.get()));
      print_row(rows.back());
    } catch (const Error& e) {
      failures.push_back(split.test_event + ": " + e.what());
      std::cerr << "[loo] split " << split.test_event << " failed: " << e.what() << "\n";
    }
  }

  json jr;
  jr["rows"] = json::array();
  for (const auto& r : rows)
    jr["rows"].push_back(json{{"event", r.event},
                              {"v_ratio", r.v_ratio},
                              {"rouge1_f1", r.rouge1_f1},
                              {"accuracy", r.accuracy},
                              {"macro_f1", r.macro_f1},
                              {"chosen", r.chosen},
                              {"total_words", r.total_words}});
  jr["failures"] = failures;
  jr["complete"] = failures.empty();
  if (!rows.empty()) {
    MetricsRow overall;
    overall.event = "overall";
    for (const auto& r : rows) {
      overall.v_ratio += r.v_ratio;
      overall.rouge1_f1 += r.rouge1_f1;
      overall.accuracy += r.accuracy;
      overall.macro_f1 += r.macro_f1;
    }
    const auto n = static_cast<double>(rows.size());
    overall.v_ratio /= n;
    overall.rouge1_f1 /= n;
    overall.accuracy /= n;
    overall.macro_f1 /= n;
    jr["overall"] = json{{"v_ratio", overall.v_ratio},
                         {"rouge1_f1", overall.rouge1_f1},
                         {"accuracy", overall.accuracy},
                         {"macro_f1", overall.macro_f1},
                         {"events", rows.size()}};
    print_row(overall);
  }
  fs::create_directories(out_dir);
  write_file(out_dir / "report.json", jr.dump(2) + "\n");

  const auto seed =
      static_cast<std::uint64_t>(std::stoull(config.get("seed", std::string("7"))));
  std::vector<fs::path> inputs = {cache_path};
  if (auto p = pretrained_cache_path(config)) inputs.push_back(*p);
  write_manifest(out_dir, "loo-run", config, seed, inputs);
  if (!failures.empty())
    std::cerr << "[loo] aggregate incomplete: " << failures.size() << " of "
              << splits.size() << " splits failed\n";
}

}  // namespace mtlts
