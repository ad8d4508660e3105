#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mtlts/training.hpp"
#include "support/fixtures.hpp"

using namespace mtlts;
using mtlts::testing::make_corpus;
using nlohmann::json;

namespace {

fs::path temp_dir() {
  fs::path dir = fs::temp_directory_path() / "mtlts_train_test";
  fs::create_directories(dir);
  return dir;
}

TrainConfig small_config(TrainMode mode) {
  TrainConfig cfg;
  cfg.mode = mode;
  cfg.learning_rate = 1e-4;
  cfg.epochs = 5;
  cfg.dl = 3;
  cfg.seed = 7;
  cfg.d_enc = 6;
  cfg.d_h = 4;
  cfg.d_g = 4;
  cfg.batch_size = 4;
  return cfg;
}

Split small_split() {
  Split split;
  split.test_event = "gamma";
  split.train = make_corpus("alpha", 14, 1).threads;
  split.val = make_corpus("beta", 10, 2).threads;
  split.test = make_corpus("gamma", 8, 3).threads;
  return split;
}

// The training log with the timing field removed, one canonical line per
// record.
std::vector<std::string> normalized_log(const fs::path& path) {
  std::vector<std::string> out;
  for (const auto& line : split_lines(read_file(path))) {
    if (line.empty()) continue;
    json rec = json::parse(line);
    rec.erase("wall_ms");
    out.push_back(rec.dump());
  }
  return out;
}

}  // namespace

TEST_CASE("training modes round-trip through their names") {
  for (TrainMode m : {TrainMode::kSTLV, TrainMode::kSTLS, TrainMode::kSTLSPlusSTLV,
                      TrainMode::kMTLTS})
    CHECK(train_mode_from_string(to_string(m)) == m);
  CHECK(train_mode_from_string("STLS_PLUS_STLV") == TrainMode::kSTLSPlusSTLV);
  CHECK_THROWS_WITH_AS((void)train_mode_from_string("mtlts"), doctest::Contains("mode"),
                       Error);
}

TEST_CASE("train config round-trips through key-value form") {
  TrainConfig cfg;
  cfg.mode = TrainMode::kSTLSPlusSTLV;
  cfg.lambda1 = 0.25;
  cfg.lambda2 = 1.5;
  cfg.learning_rate = 5e-5;
  cfg.weight_decay = 0.05;
  cfg.epochs = 12;
  cfg.dl = 5;
  cfg.seed = 1234567890123456789ULL;
  cfg.encoder_mode = EncoderMode::kFrozen;
  cfg.d_enc = 16;
  cfg.d_h = 8;
  cfg.d_g = 8;
  cfg.batch_size = 2;
  cfg.threads = 3;
  cfg.use_tree = false;
  cfg.downward_uses_parent_downward = true;
  cfg.ver_prob_passthrough = true;
  cfg.grad_clip = 2.5;

  TrainConfig back = TrainConfig::from_kv(cfg.to_kv());
  CHECK(back.mode == cfg.mode);
  CHECK(back.lambda1 == cfg.lambda1);
  CHECK(back.lambda2 == cfg.lambda2);
  CHECK(back.learning_rate == cfg.learning_rate);
  CHECK(back.weight_decay == cfg.weight_decay);
  CHECK(back.epochs == cfg.epochs);
  CHECK(back.dl == cfg.dl);
  CHECK(back.seed == cfg.seed);
  CHECK(back.encoder_mode == cfg.encoder_mode);
  CHECK(back.d_enc == cfg.d_enc);
  CHECK(back.d_h == cfg.d_h);
  CHECK(back.d_g == cfg.d_g);
  CHECK(back.batch_size == cfg.batch_size);
  CHECK(back.threads == cfg.threads);
  CHECK(back.use_tree == cfg.use_tree);
  CHECK(back.downward_uses_parent_downward == cfg.downward_uses_parent_downward);
  CHECK(back.ver_prob_passthrough == cfg.ver_prob_passthrough);
  CHECK(back.grad_clip == cfg.grad_clip);

  KeyValueConfig bad;
  bad.set("encoder_mode", "quantum");
  CHECK_THROWS_WITH_AS((void)TrainConfig::from_kv(bad), doctest::Contains("encoder mode"),
                       Error);
}

TEST_CASE("train config rejects nonsense values") {
  auto broken = [](auto mutate) {
    TrainConfig cfg;
    mutate(cfg);
    return cfg;
  };
  CHECK_THROWS_AS(broken([](TrainConfig& c) { c.lambda1 = -0.1; }).validate(), Error);
  CHECK_THROWS_AS(broken([](TrainConfig& c) { c.lambda2 = -1.0; }).validate(), Error);
  CHECK_THROWS_AS(broken([](TrainConfig& c) { c.learning_rate = 0.0; }).validate(), Error);
  CHECK_THROWS_AS(broken([](TrainConfig& c) { c.weight_decay = -0.01; }).validate(), Error);
  CHECK_THROWS_AS(broken([](TrainConfig& c) { c.epochs = 0; }).validate(), Error);
  CHECK_THROWS_AS(broken([](TrainConfig& c) { c.dl = 1; }).validate(), Error);
  CHECK_THROWS_AS(broken([](TrainConfig& c) { c.batch_size = 0; }).validate(), Error);
  CHECK_THROWS_AS(broken([](TrainConfig& c) { c.threads = 0; }).validate(), Error);
  CHECK_THROWS_AS(broken([](TrainConfig& c) { c.grad_clip = 0.0; }).validate(), Error);
  CHECK_THROWS_AS(broken([](TrainConfig& c) { c.d_enc = 0; }).validate(), Error);
}

TEST_CASE("joint training logs a recomputable combined loss and picks a best epoch") {
  TrainConfig cfg = small_config(TrainMode::kMTLTS);
  cfg.lambda2 = 0.5;
  Split split = small_split();
  fs::path log_path = temp_dir() / "mtlts.jsonl";
  auto [ckpt, report] = train(cfg, split, log_path);

  REQUIRE(report.epochs.size() == 5);
  CHECK(!report.diverged);
  CHECK(report.best_epoch >= 1);
  CHECK(report.best_epoch <= 5);
  for (const auto& e : report.epochs) {
    REQUIRE(e.l_ver.has_value());
    REQUIRE(e.l_summ.has_value());
    REQUIRE(e.l_mtlts.has_value());
    CHECK(std::isfinite(*e.l_ver));
    CHECK(*e.l_mtlts ==
          doctest::Approx(*e.l_ver + cfg.lambda2 * *e.l_summ).epsilon(1e-12));
  }
  CHECK(report.val_ver.accuracy >= 0.0);
  CHECK(report.val_ver.accuracy <= 1.0);
  CHECK(report.val_summ_bce > 0.0);

  // Three records per epoch: verifier step, summarizer step, validation.
  std::vector<std::string> lines = normalized_log(log_path);
  CHECK(lines.size() == 15);
  json first = json::parse(lines[0]);
  CHECK(first.at("epoch") == 1);
  CHECK(first.at("step") == "ver");

  CHECK(ckpt.test_event == "gamma");
  CHECK(ckpt.train_events == std::vector<std::string>{"alpha", "beta"});
  CHECK(ckpt.params.id_of("ver.rum.w") >= 0);
  CHECK(ckpt.params.id_of("summ.wv") >= 0);
  CHECK(ckpt.params.id_of("enc.emb") >= 0);
  CHECK(ckpt.params.id_of("enc2.emb") < 0);
  CHECK(ckpt.config.get("mode", std::string()) == "MTLTS");
}

TEST_CASE("identical seeds give bit-identical logs and checkpoints at any worker count") {
  TrainConfig cfg = small_config(TrainMode::kMTLTS);
  Split split = small_split();
  fs::path dir = temp_dir();

  auto run = [&](int threads, const std::string& tag) {
    TrainConfig c = cfg;
    c.threads = threads;
    fs::path log_path = dir / ("det_" + tag + ".jsonl");
    auto [ckpt, report] = train(c, split, log_path);
    fs::path ckpt_path = dir / ("det_" + tag + ".mtlc");
    // The worker count is config echo, not model state; blank it so the
    // checkpoint bytes can be compared whole.
    ckpt.config.set("threads", "1");
    save_checkpoint(ckpt_path, ckpt);
    return std::pair{normalized_log(log_path), read_file(ckpt_path)};
  };

  auto [log_a, bytes_a] = run(1, "a");
  auto [log_b, bytes_b] = run(1, "b");
  auto [log_c, bytes_c] = run(4, "c");

  CHECK(log_a == log_b);
  CHECK(bytes_a == bytes_b);
  // Oversubscribed workers fold batches in the same order.
  CHECK(log_a == log_c);
  CHECK(bytes_a == bytes_c);
}

TEST_CASE("a zero summary weight leaves the summarizer at its initialization") {
  TrainConfig cfg = small_config(TrainMode::kMTLTS);
  cfg.lambda2 = 0.0;
  cfg.weight_decay = 0.0;  // decay would move parameters without a gradient
  Split split = small_split();
  auto [ckpt, report] = train(cfg, split);

  // Rebuild the initialization: the parameter layout contract is one rng
  // stream consumed in creation order encoder, verifier, summarizer.
  std::vector<TokenSequence> seqs;
  for (const auto& t : split.train)
    for (const auto& id : t.ordered_ids()) seqs.push_back(tokenize(t.node(id).tweet.text, id));
  Vocabulary vocab = Vocabulary::build(seqs);
  ParamStore fresh;
  Rng rng(cfg.seed, "init");
  Encoder enc(EncoderMode::kTrainable, cfg.d_enc, "enc");
  enc.init_trainable(fresh, vocab, rng);
  Verifier ver(VerifierConfig{cfg.d_enc, cfg.d_h, true, false});
  ver.init(fresh, rng);
  Summarizer summ(SummarizerConfig{cfg.d_enc, cfg.d_g, cfg.dl});
  summ.init(fresh, rng);

  REQUIRE(ckpt.params.size() == fresh.size());
  bool encoder_moved = false;
  for (int i = 0; i < fresh.size(); ++i) {
    REQUIRE(ckpt.params[i].name == fresh[i].name);
    double diff = (ckpt.params[i].value - fresh[i].value).cwiseAbs().maxCoeff();
    if (fresh[i].name.rfind("summ.", 0) == 0) {
      CHECK(diff == 0.0);
    } else if (diff > 0.0) {
      encoder_moved = true;
    }
  }
  // The verifier phase still trains.
  CHECK(encoder_moved);
}

TEST_CASE("single-task summary training scores documents without a verifier") {
  TrainConfig cfg = small_config(TrainMode::kSTLS);
  Split split = small_split();
  auto [ckpt, report] = train(cfg, split);

  CHECK(ckpt.params.id_of("summ.wv") >= 0);
  CHECK(ckpt.params.id_of("ver.rum.w") < 0);
  CHECK(report.val_summ_bce > 0.0);
  for (const auto& e : report.epochs) {
    CHECK(!e.l_ver.has_value());
    REQUIRE(e.l_summ.has_value());
  }

  Prediction pred = predict(ckpt, split.test);
  CHECK(pred.ver_prob.empty());
  CHECK(pred.stance_dist.empty());
  REQUIRE(!pred.summ_prob.empty());
  for (const auto& [id, p] : pred.summ_prob) {
    CHECK(id.rfind("gamma_t", 0) == 0);
    CHECK(p > 0.0);
    CHECK(p < 1.0);
  }
}

TEST_CASE("single-task verification trains without documents") {
  TrainConfig cfg = small_config(TrainMode::kSTLV);
  Split split = small_split();
  auto [ckpt, report] = train(cfg, split);

  CHECK(ckpt.params.id_of("ver.rum.w") >= 0);
  CHECK(ckpt.params.id_of("summ.wv") < 0);
  for (const auto& e : report.epochs) {
    REQUIRE(e.l_ver.has_value());
    CHECK(!e.l_summ.has_value());
  }

  Prediction pred = predict(ckpt, split.test);
  CHECK(pred.summ_prob.empty());
  CHECK(pred.ver_prob.size() == split.test.size());
  REQUIRE(!pred.stance_dist.empty());
  for (const auto& [id, dist] : pred.stance_dist) {
    double sum = dist[0] + dist[1] + dist[2] + dist[3];
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-9));
  }
}

TEST_CASE("decoupled dual training keeps two encoders and two selections") {
  TrainConfig cfg = small_config(TrainMode::kSTLSPlusSTLV);
  Split split = small_split();
  auto [ckpt, report] = train(cfg, split);

  CHECK(ckpt.params.id_of("enc.emb") >= 0);
  CHECK(ckpt.params.id_of("enc2.emb") >= 0);
  CHECK(ckpt.params.id_of("ver.rum.w") >= 0);
  CHECK(ckpt.params.id_of("summ.wv") >= 0);
  CHECK(report.val_summ_bce > 0.0);

  Prediction pred = predict(ckpt, split.test);
  CHECK(pred.ver_prob.size() == split.test.size());
  CHECK(!pred.summ_prob.empty());
}

TEST_CASE("prediction is deterministic and complete over the test event") {
  TrainConfig cfg = small_config(TrainMode::kMTLTS);
  Split split = small_split();
  auto [ckpt, report] = train(cfg, split);

  Prediction a = predict(ckpt, split.test);
  Prediction b = predict(ckpt, split.test);
  CHECK(a.ver_prob == b.ver_prob);
  CHECK(a.summ_prob == b.summ_prob);
  CHECK(a.stance_dist == b.stance_dist);

  CHECK(a.ver_prob.size() == split.test.size());
  // Document sampling covers every source at least once.
  CHECK(a.summ_prob.size() == split.test.size());
  for (const auto& [id, p] : a.ver_prob) {
    CHECK(p > 0.0);
    CHECK(p < 1.0);
  }
}

TEST_CASE("checkpoints survive disk round-trips into prediction") {
  TrainConfig cfg = small_config(TrainMode::kMTLTS);
  Split split = small_split();
  auto [ckpt, report] = train(cfg, split);

  fs::path path = temp_dir() / "roundtrip_predict.mtlc";
  save_checkpoint(path, ckpt);
  Checkpoint loaded = load_checkpoint(path);
  Prediction direct = predict(ckpt, split.test);
  Prediction from_disk = predict(loaded, split.test);
  CHECK(direct.ver_prob == from_disk.ver_prob);
  CHECK(direct.summ_prob == from_disk.summ_prob);
}

TEST_CASE("training refuses unusable splits") {
  TrainConfig cfg = small_config(TrainMode::kSTLV);
  Split split = small_split();
  for (auto& t : split.train) t.ver_label.reset();
  CHECK_THROWS_WITH_AS((void)train(cfg, split), doctest::Contains("no labeled threads"),
                       Error);

  // A test thread sitting in the training partition is data leakage.
  Split leaky = small_split();
  leaky.train.push_back(leaky.test.front());
  CHECK_THROWS_WITH_AS((void)train(small_config(TrainMode::kSTLV), leaky),
                       doctest::Contains("leakage"), Error);

  // No event with at least dl threads means no documents.
  Split tiny = small_split();
  tiny.train = make_corpus("alpha", 2, 1).threads;
  CHECK_THROWS_WITH_AS((void)train(small_config(TrainMode::kSTLS), tiny),
                       doctest::Contains("enough threads"), Error);
}

TEST_CASE("frozen encoder mode replays cached embeddings end to end") {
  TrainConfig cfg = small_config(TrainMode::kMTLTS);
  cfg.encoder_mode = EncoderMode::kFrozen;
  cfg.epochs = 5;
  Split split = small_split();

  EmbeddingCache cache(cfg.d_enc);
  Rng rng(33, "cache");
  auto put_all = [&](const std::vector<Thread>& threads) {
    for (const auto& t : threads)
      for (const auto& [id, node] : t.nodes) {
        std::vector<float> v(static_cast<std::size_t>(cfg.d_enc));
        for (auto& f : v) f = static_cast<float>(rng.normal(0.0, 0.5));
        cache.put(id, std::move(v));
      }
  };
  put_all(split.train);
  put_all(split.val);
  put_all(split.test);

  CHECK_THROWS_WITH_AS((void)train(cfg, split), doctest::Contains("cache"), Error);

  auto [ckpt, report] = train(cfg, split, {}, &cache);
  CHECK(!report.diverged);
  // Nothing of the encoder trains in frozen mode.
  CHECK(ckpt.params.id_of("enc.emb") < 0);
  CHECK(ckpt.params.id_of("ver.rum.w") >= 0);

  CHECK_THROWS_WITH_AS((void)predict(ckpt, split.test), doctest::Contains("cache"), Error);
  Prediction pred = predict(ckpt, split.test, &cache);
  CHECK(pred.ver_prob.size() == split.test.size());
  CHECK(!pred.summ_prob.empty());
}
