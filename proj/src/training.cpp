#include "mtlts/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iostream>
#include <memory>
#include <set>

#include <nlohmann/json.hpp>

#include "mtlts/evaluation.hpp"
#include "mtlts/parallel.hpp"

using nlohmann::json;

namespace mtlts {

const char* to_string(TrainMode m) {
  switch (m) {
    case TrainMode::kSTLV: return "STLV";
    case TrainMode::kSTLS: return "STLS";
    case TrainMode::kSTLSPlusSTLV: return "STLS+STLV";
    case TrainMode::kMTLTS: return "MTLTS";
  }
  return "?";
}

TrainMode train_mode_from_string(const std::string& s) {
  if (s == "STLV") return TrainMode::kSTLV;
  if (s == "STLS") return TrainMode::kSTLS;
  if (s == "STLS+STLV" || s == "STLS_PLUS_STLV") return TrainMode::kSTLSPlusSTLV;
  if (s == "MTLTS") return TrainMode::kMTLTS;
  fail("unknown training mode: " + s);
}

void TrainConfig::validate() const {
  if (lambda1 < 0.0 || lambda2 < 0.0) fail("train config: lambdas must be nonnegative");
  if (learning_rate <= 0.0) fail("train config: learning rate must be positive");
  if (weight_decay < 0.0) fail("train config: weight decay must be nonnegative");
  if (epochs <= 0) fail("train config: epochs must be positive");
  if (dl < 2) fail("train config: dl must be at least 2");
  if (batch_size <= 0) fail("train config: batch size must be positive");
  if (threads <= 0) fail("train config: threads must be positive");
  if (grad_clip <= 0.0) fail("train config: gradient clip must be positive");
  if (d_enc <= 0 || d_h <= 0 || d_g <= 0) fail("train config: dimensions must be positive");
  if (learning_rate < 1e-6 || learning_rate > 1e-4)
    std::cerr << "[train] learning rate " << learning_rate
              << " is outside the customary [1e-6, 1e-4] range\n";
  if (weight_decay < 0.001 || weight_decay > 0.1)
    std::cerr << "[train] weight decay " << weight_decay
              << " is outside the customary [0.001, 0.1] range\n";
  if (epochs < 5 || epochs > 20)
    std::cerr << "[train] epoch count " << epochs
              << " is outside the customary [5, 20] range\n";
}

TrainConfig TrainConfig::from_kv(const KeyValueConfig& kv) {
  TrainConfig cfg;
  cfg.mode = train_mode_from_string(kv.get("mode", std::string(to_string(cfg.mode))));
  cfg.lambda1 = kv.get("lambda1", cfg.lambda1);
  cfg.lambda2 = kv.get("lambda2", cfg.lambda2);
  cfg.learning_rate = kv.get("learning_rate", cfg.learning_rate);
  cfg.weight_decay = kv.get("weight_decay", cfg.weight_decay);
  cfg.epochs = kv.get("epochs", cfg.epochs);
  cfg.dl = kv.get("dl", cfg.dl);
  cfg.seed = static_cast<std::uint64_t>(
      std::stoull(kv.get("seed", std::to_string(cfg.seed))));
  std::string enc = kv.get("encoder_mode", std::string("trainable"));
  if (enc == "trainable")
    cfg.encoder_mode = EncoderMode::kTrainable;
  else if (enc == "frozen")
    cfg.encoder_mode = EncoderMode::kFrozen;
  else
    fail("train config: unknown encoder mode " + enc);
  cfg.d_enc = kv.get("d_enc", cfg.d_enc);
  cfg.d_h = kv.get("d_h", cfg.d_h);
  cfg.d_g = kv.get("d_g", cfg.d_g);
  cfg.batch_size = kv.get("batch_size", cfg.batch_size);
  cfg.threads = kv.get("threads", cfg.threads);
  cfg.use_tree = kv.get("use_tree", cfg.use_tree);
  cfg.downward_uses_parent_downward =
      kv.get("downward_uses_parent_downward", cfg.downward_uses_parent_downward);
  cfg.ver_prob_passthrough = kv.get("ver_prob_passthrough", cfg.ver_prob_passthrough);
  cfg.grad_clip = kv.get("grad_clip", cfg.grad_clip);
  return cfg;
}

KeyValueConfig TrainConfig::to_kv() const {
  KeyValueConfig kv;
  kv.set("mode", to_string(mode));
  kv.set("lambda1", std::to_string(lambda1));
  kv.set("lambda2", std::to_string(lambda2));
  kv.set("learning_rate", std::to_string(learning_rate));
  kv.set("weight_decay", std::to_string(weight_decay));
  kv.set("epochs", std::to_string(epochs));
  kv.set("dl", std::to_string(dl));
  kv.set("seed", std::to_string(seed));
  kv.set("encoder_mode", encoder_mode == EncoderMode::kTrainable ? "trainable" : "frozen");
  kv.set("d_enc", std::to_string(d_enc));
  kv.set("d_h", std::to_string(d_h));
  kv.set("d_g", std::to_string(d_g));
  kv.set("batch_size", std::to_string(batch_size));
  kv.set("threads", std::to_string(threads));
  kv.set("use_tree", use_tree ? "true" : "false");
  kv.set("downward_uses_parent_downward", downward_uses_parent_downward ? "true" : "false");
  kv.set("ver_prob_passthrough", ver_prob_passthrough ? "true" : "false");
  kv.set("grad_clip", std::to_string(grad_clip));
  return kv;
}

namespace {

bool wants_verifier(TrainMode m) { return m != TrainMode::kSTLS; }
bool wants_summarizer(TrainMode m) { return m != TrainMode::kSTLV; }

const EmbeddingCache* require_cache(const EmbeddingCache* cache) {
  if (!cache) fail("frozen encoder mode needs an embedding cache");
  return cache;
}

// Adam over a fixed subset of parameter tensors. Weight decay enters as an
// additive L2 gradient, then the subset's global norm is clipped.
class Adam {
 public:
  Adam(const ParamStore& ps, std::vector<int> ids, double lr, double wd, double clip)
      : ids_(std::move(ids)), lr_(lr), wd_(wd), clip_(clip) {
    m_.resize(static_cast<std::size_t>(ps.size()));
    v_.resize(static_cast<std::size_t>(ps.size()));
    for (int id : ids_) {
      const Mat& val = ps[id].value;
      m_[static_cast<std::size_t>(id)] = Mat::Zero(val.rows(), val.cols());
      v_[static_cast<std::size_t>(id)] = Mat::Zero(val.rows(), val.cols());
    }
  }

  void step(ParamStore& ps, GradStore& g) {
    for (int id : ids_) g[id] += wd_ * ps[id].value;
    double norm = 0.0;
    for (int id : ids_) norm += g[id].squaredNorm();
    norm = std::sqrt(norm);
    double scale = norm > clip_ ? clip_ / norm : 1.0;
    ++t_;
    const double bc1 = 1.0 - std::pow(kBeta1, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(kBeta2, static_cast<double>(t_));
    for (int id : ids_) {
      auto i = static_cast<std::size_t>(id);
      Mat grad = g[id] * scale;
      m_[i] = kBeta1 * m_[i] + (1.0 - kBeta1) * grad;
      v_[i] = kBeta2 * v_[i] + (1.0 - kBeta2) * grad.cwiseProduct(grad);
      Mat mhat = m_[i] / bc1;
      Mat vhat = v_[i] / bc2;
      ps[id].value.array() -= lr_ * mhat.array() / (vhat.array().sqrt() + kEps);
    }
  }

 private:
  static constexpr double kBeta1 = 0.9;
  static constexpr double kBeta2 = 0.999;
  static constexpr double kEps = 1e-8;
  std::vector<int> ids_;
  double lr_, wd_, clip_;
  long long t_ = 0;
  std::vector<Mat> m_, v_;
};

struct Models {
  TrainConfig cfg;
  ParamStore params;
  Vocabulary vocab;
  std::unique_ptr<Encoder> enc;   // verifier side, or the shared encoder
  std::unique_ptr<Encoder> enc2;  // summarizer side in STLS+STLV only
  std::unique_ptr<Verifier> verifier;
  std::unique_ptr<Summarizer> summarizer;

  const Encoder& summ_encoder() const { return enc2 ? *enc2 : *enc; }
};

Models make_models(const TrainConfig& cfg) {
  Models m;
  m.cfg = cfg;
  m.enc = std::make_unique<Encoder>(cfg.encoder_mode, cfg.d_enc, "enc");
  if (cfg.mode == TrainMode::kSTLSPlusSTLV)
    m.enc2 = std::make_unique<Encoder>(cfg.encoder_mode, cfg.d_enc, "enc2");
  if (wants_verifier(cfg.mode)) {
    VerifierConfig vc;
    vc.d_enc = cfg.d_enc;
    vc.d_h = cfg.d_h;
    vc.use_tree = cfg.use_tree;
    vc.downward_uses_parent_downward = cfg.downward_uses_parent_downward;
    m.verifier = std::make_unique<Verifier>(vc);
  }
  if (wants_summarizer(cfg.mode)) {
    SummarizerConfig sc;
    sc.d_enc = cfg.d_enc;
    sc.d_g = cfg.d_g;
    sc.dl = cfg.dl;
    m.summarizer = std::make_unique<Summarizer>(sc);
  }
  return m;
}

void init_models(Models& m, const Vocabulary& vocab, const EmbeddingCache* cache) {
  m.vocab = vocab;
  Rng rng(m.cfg.seed, "init");
  const bool trainable = m.cfg.encoder_mode == EncoderMode::kTrainable;
  if (trainable)
    m.enc->init_trainable(m.params, vocab, rng);
  else
    m.enc->attach_cache(require_cache(cache));
  if (m.verifier) m.verifier->init(m.params, rng);
  if (m.enc2) {
    if (trainable)
      m.enc2->init_trainable(m.params, vocab, rng);
    else
      m.enc2->attach_cache(require_cache(cache));
  }
  if (m.summarizer) m.summarizer->init(m.params, rng);
}

void attach_models(Models& m, const Checkpoint& ckpt, const EmbeddingCache* cache) {
  m.vocab = ckpt.vocab;
  m.params = ckpt.params;
  const bool trainable = m.cfg.encoder_mode == EncoderMode::kTrainable;
  if (trainable)
    m.enc->attach_trainable(m.params, m.vocab);
  else
    m.enc->attach_cache(require_cache(cache));
  if (m.verifier) m.verifier->attach(m.params);
  if (m.enc2) {
    if (trainable)
      m.enc2->attach_trainable(m.params, m.vocab);
    else
      m.enc2->attach_cache(require_cache(cache));
  }
  if (m.summarizer) m.summarizer->attach(m.params);
}

std::vector<int> ids_with_prefixes(const ParamStore& ps,
                                   const std::vector<std::string>& prefixes) {
  std::vector<int> ids;
  for (int i = 0; i < ps.size(); ++i)
    for (const auto& p : prefixes)
      if (ps[i].name.rfind(p, 0) == 0) {
        ids.push_back(i);
        break;
      }
  return ids;
}

// ----- forward helpers ------------------------------------------------------

Var thread_loss(Tape& tape, const Models& m, const Thread& t) {
  VerifierOutput out = m.verifier->run(tape, *m.enc, t);
  return m.verifier->loss(tape, out, t, m.cfg.lambda1);
}

Var doc_loss(Tape& tape, const Models& m, const PseudoDocument& doc,
             const std::map<std::string, const Thread*>& by_id,
             const std::map<std::string, double>* ver_snapshot) {
  std::vector<Var> xs, vps;
  xs.reserve(doc.tweet_ids.size());
  vps.reserve(doc.tweet_ids.size());
  for (const auto& id : doc.tweet_ids) {
    const Thread* t = by_id.at(id);
    xs.push_back(m.summ_encoder().encode(tape, t->source().tweet));
    if (m.cfg.ver_prob_passthrough && m.verifier) {
      VerifierOutput out = m.verifier->run(tape, *m.enc, *t);
      vps.push_back(out.ver_prob);
    } else {
      Mat v(1, 1);
      v(0, 0) = ver_snapshot ? ver_snapshot->at(id) : 1.0;
      vps.push_back(tape.constant(v));
    }
  }
  DocStates st = m.summarizer->run(tape, xs, vps);
  return m.summarizer->loss(tape, st, doc.membership_labels);
}

double ver_prob_of(const Models& m, const Thread& t) {
  Tape tape(&m.params, nullptr);
  VerifierOutput out = m.verifier->run(tape, *m.enc, t);
  return tape.scalar(out.ver_prob);
}

// ----- batching -------------------------------------------------------------

struct BatchAcc {
  GradStore g;
  double loss = 0.0;
};

// Runs loss_of over the batch items on per-block tapes, accumulating grads and
// the summed raw loss deterministically; grad_scale rescales the loss before
// backward (the lambda2 weighting) without touching the reported sum.
double run_update_batch(const std::vector<int>& items, int threads, double grad_scale,
                        Adam& opt, ParamStore& params,
                        const std::function<Var(Tape&, int)>& loss_of) {
  BatchAcc total = par::block_map_reduce<BatchAcc>(
      static_cast<int>(items.size()), threads,
      [&]() {
        BatchAcc acc;
        acc.g.init(params);
        return acc;
      },
      [&](BatchAcc& acc, int i) {
        Tape tape(&params, &acc.g);
        Var loss = loss_of(tape, items[static_cast<std::size_t>(i)]);
        acc.loss += tape.scalar(loss);
        tape.backward(grad_scale == 1.0 ? loss : tape.scale(loss, grad_scale));
      },
      [](BatchAcc& into, const BatchAcc& part) {
        into.g.add(part.g);
        into.loss += part.loss;
      });
  opt.step(params, total.g);
  return total.loss;
}

double sum_losses(const Models& m, const std::vector<int>& items, int threads,
                  const std::function<Var(Tape&, int)>& loss_of) {
  struct Acc {
    double loss = 0.0;
  };
  Acc total = par::block_map_reduce<Acc>(
      static_cast<int>(items.size()), threads, []() { return Acc{}; },
      [&](Acc& acc, int i) {
        Tape tape(&m.params, nullptr);
        acc.loss += tape.scalar(loss_of(tape, items[static_cast<std::size_t>(i)]));
      },
      [](Acc& into, const Acc& part) { into.loss += part.loss; });
  return total.loss;
}

std::vector<std::vector<int>> make_batches(int n, int batch_size, Rng& rng) {
  std::vector<int> order(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) order[static_cast<std::size_t>(i)] = i;
  rng.shuffle(order);
  std::vector<std::vector<int>> batches;
  for (int b = 0; b < n; b += batch_size) {
    std::vector<int> batch;
    for (int i = b; i < std::min(n, b + batch_size); ++i)
      batch.push_back(order[static_cast<std::size_t>(i)]);
    batches.push_back(std::move(batch));
  }
  return batches;
}

// ----- data prep ------------------------------------------------------------

std::vector<PseudoDocument> docs_for(const std::vector<Thread>& threads, int dl,
                                     std::uint64_t seed, const char* what) {
  std::map<std::string, std::vector<const Thread*>> by_event;
  for (const auto& t : threads) by_event[t.event].push_back(&t);
  std::vector<PseudoDocument> all;
  for (auto& [event, list] : by_event) {
    if (static_cast<int>(list.size()) < dl) {
      std::cerr << "[train] event " << event << " has " << list.size() << " " << what
                << " threads, fewer than dl=" << dl << "; no documents sampled\n";
      continue;
    }
    auto docs = sample_documents(list, event, dl, seed);
    for (auto& d : docs) {
      d.doc_id = static_cast<int>(all.size());
      all.push_back(std::move(d));
    }
  }
  return all;
}

std::map<std::string, const Thread*> index_threads(const std::vector<Thread>& threads) {
  std::map<std::string, const Thread*> by_id;
  for (const auto& t : threads) by_id[t.source_id] = &t;
  return by_id;
}

void assert_no_leakage(const Split& split, const std::vector<PseudoDocument>& train_docs) {
  std::set<std::string> test_ids;
  for (const auto& t : split.test) test_ids.insert(t.source_id);
  for (const auto& t : split.train)
    if (test_ids.count(t.source_id))
      fail("leakage: test thread " + t.source_id + " appears in the training set");
  for (const auto& t : split.val)
    if (test_ids.count(t.source_id))
      fail("leakage: test thread " + t.source_id + " appears in the validation set");
  std::set<std::string> train_ids;
  for (const auto& t : split.train) train_ids.insert(t.source_id);
  for (const auto& d : train_docs)
    for (const auto& id : d.tweet_ids)
      if (!train_ids.count(id))
        fail("leakage: document contains non-training tweet " + id);
}

Vocabulary build_vocab(const std::vector<Thread>& train_threads) {
  std::vector<TokenSequence> seqs;
  for (const auto& t : train_threads)
    for (const auto& id : t.ordered_ids())
      seqs.push_back(tokenize(t.node(id).tweet.text, id));
  return Vocabulary::build(seqs);
}

// ----- snapshots ------------------------------------------------------------

using Snapshot = std::vector<std::pair<int, Mat>>;

Snapshot take_snapshot(const ParamStore& ps, const std::vector<int>& ids) {
  Snapshot snap;
  snap.reserve(ids.size());
  for (int id : ids) snap.emplace_back(id, ps[id].value);
  return snap;
}

void restore_snapshot(ParamStore& ps, const Snapshot& snap) {
  for (const auto& [id, value] : snap) ps[id].value = value;
}

}  // namespace

std::pair<Checkpoint, TrainReport> train(const TrainConfig& cfg, const Split& split,
                                         const fs::path& log_path,
                                         const EmbeddingCache* cache) {
  cfg.validate();
  const TrainMode mode = cfg.mode;

  // Vocabulary statistics come from the training partition alone.
  Vocabulary vocab;
  if (cfg.encoder_mode == EncoderMode::kTrainable) vocab = build_vocab(split.train);

  Models m = make_models(cfg);
  init_models(m, vocab, cache);

  std::vector<int> ver_items;  // indices into split.train with a ver label
  if (wants_verifier(mode)) {
    for (std::size_t i = 0; i < split.train.size(); ++i) {
      if (split.train[i].ver_label)
        ver_items.push_back(static_cast<int>(i));
      else
        std::cerr << "[train] thread " << split.train[i].source_id
                  << " has no verification label, excluded from step 1\n";
    }
    if (ver_items.empty()) fail("train: no labeled threads for the verifier");
  }

  std::vector<PseudoDocument> train_docs, val_docs;
  if (wants_summarizer(mode)) {
    train_docs = docs_for(split.train, cfg.dl, cfg.seed, "train");
    val_docs = docs_for(split.val, cfg.dl, cfg.seed + 0x9e3779b9ULL, "val");
    if (train_docs.empty()) fail("train: no event has enough threads for dl");
    if (val_docs.empty())
      std::cerr << "[train] no validation documents; the summarizer validation term is zero\n";
  }
  assert_no_leakage(split, train_docs);

  auto train_by_id = index_threads(split.train);
  auto val_by_id = index_threads(split.val);

  std::vector<int> val_ver_items;
  for (std::size_t i = 0; i < split.val.size(); ++i)
    if (split.val[i].ver_label) val_ver_items.push_back(static_cast<int>(i));

  // Each phase owns its optimizer over the tensors that phase updates; the
  // shared encoder is stepped by both.
  std::unique_ptr<Adam> adam_ver, adam_summ;
  if (wants_verifier(mode))
    adam_ver = std::make_unique<Adam>(
        m.params, ids_with_prefixes(m.params, {"enc.", "ver."}), cfg.learning_rate,
        cfg.weight_decay, cfg.grad_clip);
  if (wants_summarizer(mode)) {
    std::vector<std::string> prefixes = {"summ."};
    prefixes.push_back(mode == TrainMode::kSTLSPlusSTLV ? "enc2." : "enc.");
    adam_summ = std::make_unique<Adam>(m.params, ids_with_prefixes(m.params, prefixes),
                                       cfg.learning_rate, cfg.weight_decay, cfg.grad_clip);
  }

  const std::vector<int> all_ids = [&] {
    std::vector<int> ids(static_cast<std::size_t>(m.params.size()));
    for (int i = 0; i < m.params.size(); ++i) ids[static_cast<std::size_t>(i)] = i;
    return ids;
  }();
  const std::vector<int> ver_part_ids = ids_with_prefixes(m.params, {"enc.", "ver."});
  const std::vector<int> summ_part_ids = ids_with_prefixes(
      m.params, {mode == TrainMode::kSTLSPlusSTLV ? "enc2." : "enc.", "summ."});

  std::ofstream log;
  if (!log_path.empty()) {
    if (log_path.has_parent_path()) fs::create_directories(log_path.parent_path());
    log.open(log_path, std::ios::trunc);
    if (!log) fail("cannot write training log: " + log_path.string());
  }
  auto log_record = [&](json rec) {
    if (log.is_open()) log << rec.dump() << "\n";
  };

  TrainReport report;
  // Maximize macro-F1 for STLV; minimize the loss objectives otherwise.
  const bool maximize = mode == TrainMode::kSTLV || mode == TrainMode::kSTLSPlusSTLV;
  double best = maximize ? -1.0 : std::numeric_limits<double>::infinity();
  double best_summ = std::numeric_limits<double>::infinity();  // STLS+STLV only
  Snapshot best_snap, best_summ_snap;
  int best_epoch = -1, best_summ_epoch = -1;
  ClassificationMetricsLite best_val_ver;
  double best_val_bce = 0.0;

  const auto t0 = std::chrono::steady_clock::now();
  auto wall_ms = [&] {
    return std::chrono::duration_cast<std::chrono::milliseconds>(
               std::chrono::steady_clock::now() - t0)
        .count();
  };

  bool diverged = false;
  for (int epoch = 1; epoch <= cfg.epochs && !diverged; ++epoch) {
    EpochLog elog;
    elog.epoch = epoch;

    if (wants_verifier(mode)) {
      Rng order_rng(cfg.seed, "ver_order:" + std::to_string(epoch));
      double epoch_loss = 0.0;
      for (const auto& batch : make_batches(static_cast<int>(ver_items.size()),
                                            cfg.batch_size, order_rng)) {
        double batch_loss = run_update_batch(
            batch, cfg.threads, 1.0, *adam_ver, m.params,
            [&](Tape& tape, int item) {
              return thread_loss(tape, m, split.train[static_cast<std::size_t>(ver_items[static_cast<std::size_t>(item)])]);
            });
        if (!std::isfinite(batch_loss)) {
          diverged = true;
          break;
        }
        epoch_loss += batch_loss;
      }
      elog.l_ver = epoch_loss;
      log_record(json{{"epoch", epoch}, {"step", "ver"}, {"l_ver", epoch_loss},
                      {"wall_ms", wall_ms()}});
    }

    // Verifier confidences are refreshed once per epoch, after step 1.
    std::map<std::string, double> ver_snapshot;
    const std::map<std::string, double>* snapshot_ptr = nullptr;
    if (!diverged && wants_summarizer(mode) && mode == TrainMode::kMTLTS) {
      std::vector<const Thread*> everyone;
      for (const auto& t : split.train) everyone.push_back(&t);
      for (const auto& t : split.val) everyone.push_back(&t);
      std::vector<double> probs(everyone.size(), 0.0);
      par::parallel_for(static_cast<int>(everyone.size()), cfg.threads, [&](int i) {
        probs[static_cast<std::size_t>(i)] =
            ver_prob_of(m, *everyone[static_cast<std::size_t>(i)]);
      });
      for (std::size_t i = 0; i < everyone.size(); ++i)
        ver_snapshot[everyone[i]->source_id] = probs[i];
      snapshot_ptr = &ver_snapshot;
    }

    if (!diverged && wants_summarizer(mode)) {
      Rng order_rng(cfg.seed, "summ_order:" + std::to_string(epoch));
      const double grad_scale = mode == TrainMode::kMTLTS ? cfg.lambda2 : 1.0;
      double epoch_loss = 0.0;
      for (const auto& batch : make_batches(static_cast<int>(train_docs.size()),
                                            cfg.batch_size, order_rng)) {
        double batch_loss = run_update_batch(
            batch, cfg.threads, grad_scale, *adam_summ, m.params,
            [&](Tape& tape, int item) {
              return doc_loss(tape, m, train_docs[static_cast<std::size_t>(item)],
                              train_by_id, snapshot_ptr);
            });
        if (!std::isfinite(batch_loss)) {
          diverged = true;
          break;
        }
        epoch_loss += batch_loss;
      }
      elog.l_summ = epoch_loss;
      json rec{{"epoch", epoch}, {"step", "summ"}, {"l_summ", epoch_loss},
               {"wall_ms", wall_ms()}};
      if (mode == TrainMode::kMTLTS && elog.l_ver) {
        elog.l_mtlts = *elog.l_ver + cfg.lambda2 * epoch_loss;
        rec["l_ver"] = *elog.l_ver;
        rec["l_mtlts"] = *elog.l_mtlts;
      }
      log_record(std::move(rec));
    }

    if (diverged) {
      report.epochs.push_back(elog);
      break;
    }

    // Validation pass and model selection.
    double val_ver_loss = 0.0, val_summ_loss = 0.0;
    ClassificationMetricsLite val_metrics;
    if (wants_verifier(mode) && !val_ver_items.empty()) {
      val_ver_loss = sum_losses(m, val_ver_items, cfg.threads, [&](Tape& tape, int item) {
        return thread_loss(tape, m, split.val[static_cast<std::size_t>(item)]);
      });
      std::vector<double> probs(val_ver_items.size(), 0.0);
      par::parallel_for(static_cast<int>(val_ver_items.size()), cfg.threads, [&](int i) {
        probs[static_cast<std::size_t>(i)] = ver_prob_of(
            m, split.val[static_cast<std::size_t>(val_ver_items[static_cast<std::size_t>(i)])]);
      });
      std::vector<int> preds, golds;
      for (std::size_t i = 0; i < val_ver_items.size(); ++i) {
        preds.push_back(probs[i] > 0.5 ? 1 : 0);
        golds.push_back(*split.val[static_cast<std::size_t>(val_ver_items[i])].ver_label ==
                                VerLabel::kVerified
                            ? 1
                            : 0);
      }
      ClassificationMetrics cm = classification_metrics(preds, golds, 2);
      val_metrics.accuracy = cm.accuracy;
      val_metrics.macro_f1 = cm.macro_f1;
    }
    if (wants_summarizer(mode) && !val_docs.empty()) {
      std::vector<int> doc_items(val_docs.size());
      for (std::size_t i = 0; i < val_docs.size(); ++i) doc_items[i] = static_cast<int>(i);
      val_summ_loss = sum_losses(m, doc_items, cfg.threads, [&](Tape& tape, int item) {
        return doc_loss(tape, m, val_docs[static_cast<std::size_t>(item)], val_by_id,
                        snapshot_ptr);
      });
    }

    double objective = 0.0;
    switch (mode) {
      case TrainMode::kSTLV:
      case TrainMode::kSTLSPlusSTLV:
        objective = val_metrics.macro_f1;
        break;
      case TrainMode::kSTLS:
        objective = val_summ_loss;
        break;
      case TrainMode::kMTLTS:
        objective = val_ver_loss + cfg.lambda2 * val_summ_loss;
        break;
    }
    elog.val_objective = objective;
    json val_rec{{"epoch", epoch}, {"step", "val"}, {"objective", objective},
                 {"wall_ms", wall_ms()}};
    if (wants_verifier(mode)) {
      val_rec["val_macro_f1"] = val_metrics.macro_f1;
      val_rec["val_accuracy"] = val_metrics.accuracy;
    }
    if (wants_summarizer(mode)) val_rec["val_summ_bce"] = val_summ_loss;
    log_record(std::move(val_rec));
    report.epochs.push_back(elog);

    const bool better = maximize ? objective > best : objective < best;
    if (better) {
      best = objective;
      best_epoch = epoch;
      best_val_ver = val_metrics;
      if (mode != TrainMode::kSTLSPlusSTLV) {
        best_snap = take_snapshot(m.params, all_ids);
        best_val_bce = val_summ_loss;
      } else {
        best_snap = take_snapshot(m.params, ver_part_ids);
      }
    }
    if (mode == TrainMode::kSTLSPlusSTLV && val_summ_loss < best_summ) {
      // The decoupled summarizer selects its own epoch on its own objective.
      best_summ = val_summ_loss;
      best_summ_epoch = epoch;
      best_summ_snap = take_snapshot(m.params, summ_part_ids);
      best_val_bce = val_summ_loss;
    }
  }

  if (best_epoch > 0) restore_snapshot(m.params, best_snap);
  if (mode == TrainMode::kSTLSPlusSTLV && best_summ_epoch > 0)
    restore_snapshot(m.params, best_summ_snap);
  if (diverged)
    std::cerr << "[train] loss became non-finite; keeping the best finite weights\n";

  report.best_epoch = best_epoch;
  report.best_val_objective = best;
  report.diverged = diverged;
  report.val_ver = best_val_ver;
  report.val_summ_bce = best_val_bce;

  Checkpoint ckpt;
  ckpt.config = cfg.to_kv();
  ckpt.vocab = m.vocab;
  std::set<std::string> events;
  for (const auto& t : split.train) events.insert(t.event);
  for (const auto& t : split.val) events.insert(t.event);
  ckpt.train_events.assign(events.begin(), events.end());
  ckpt.test_event = split.test_event;
  ckpt.params = m.params;
  return {std::move(ckpt), std::move(report)};
}

Prediction predict(const Checkpoint& ckpt, const std::vector<Thread>& threads,
                   const EmbeddingCache* cache) {
  TrainConfig cfg = TrainConfig::from_kv(ckpt.config);
  Models m = make_models(cfg);
  attach_models(m, ckpt, cache);

  Prediction pred;
  if (m.verifier) {
    std::vector<double> probs(threads.size(), 0.0);
    std::vector<std::map<std::string, std::array<double, 4>>> stances(threads.size());
    par::parallel_for(static_cast<int>(threads.size()), cfg.threads, [&](int i) {
      const Thread& t = threads[static_cast<std::size_t>(i)];
      Tape tape(&m.params, nullptr);
      VerifierOutput out = m.verifier->run(tape, *m.enc, t);
      probs[static_cast<std::size_t>(i)] = tape.scalar(out.ver_prob);
      for (const auto& [id, log_probs] : out.stance_log_probs) {
        const Mat& lp = tape.value(log_probs);
        std::array<double, 4> dist{};
        for (int c = 0; c < kStanceClasses; ++c) dist[static_cast<std::size_t>(c)] = std::exp(lp(c, 0));
        stances[static_cast<std::size_t>(i)][id] = dist;
      }
    });
    for (std::size_t i = 0; i < threads.size(); ++i) {
      pred.ver_prob[threads[i].source_id] = probs[i];
      for (auto& [id, dist] : stances[i]) pred.stance_dist[id] = dist;
    }
  }

  if (m.summarizer) {
    auto docs = docs_for(threads, cfg.dl, cfg.seed, "predict");
    auto by_id = index_threads(threads);
    // The summarizer consumes its training-time verifier signal: live
    // confidences under MTLTS, the constant 1.0 otherwise.
    std::map<std::string, double> ver_snapshot;
    const std::map<std::string, double>* snapshot_ptr = nullptr;
    if (cfg.mode == TrainMode::kMTLTS && m.verifier) {
      for (const auto& [id, p] : pred.ver_prob) ver_snapshot[id] = p;
      snapshot_ptr = &ver_snapshot;
    }
    std::vector<std::vector<double>> p(docs.size());
    par::parallel_for(static_cast<int>(docs.size()), cfg.threads, [&](int d) {
      const PseudoDocument& doc = docs[static_cast<std::size_t>(d)];
      Tape tape(&m.params, nullptr);
      std::vector<Var> xs, vps;
      for (const auto& id : doc.tweet_ids) {
        const Thread* t = by_id.at(id);
        xs.push_back(m.summ_encoder().encode(tape, t->source().tweet));
        Mat v(1, 1);
        v(0, 0) = snapshot_ptr ? snapshot_ptr->at(id) : 1.0;
        vps.push_back(tape.constant(v));
      }
      DocStates st = m.summarizer->run(tape, xs, vps);
      auto& row = p[static_cast<std::size_t>(d)];
      row.reserve(st.p.size());
      for (const Var& v : st.p) row.push_back(tape.scalar(v));
    });
    pred.summ_prob = aggregate_summ_prob(docs, p);
  }
  return pred;
}

}  // namespace mtlts
