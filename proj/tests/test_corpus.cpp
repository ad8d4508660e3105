#include <doctest.h>

#include <map>
#include <set>

#include "mtlts/corpus.hpp"
#include "mtlts/encoder.hpp"
#include "support/fixtures.hpp"

using namespace mtlts;
using mtlts::testing::make_corpus;
using mtlts::testing::make_thread;
using mtlts::testing::write_pheme_fixture;

namespace {

fs::path fixture_root() {
  static fs::path root = write_pheme_fixture(fs::temp_directory_path() / "mtlts_pheme_fixture");
  return root;
}

}  // namespace

TEST_CASE("pheme loader builds both events with labels and cascades") {
  auto corpora = load_pheme(fixture_root());
  REQUIRE(corpora.size() == 2);
  const Corpus& alpha = corpora[0];
  const Corpus& beta = corpora[1];
  CHECK(alpha.event_name == "alpha");
  CHECK(beta.event_name == "beta");
  CHECK(alpha.threads.size() == 5);
  CHECK(beta.threads.size() == 2);

  const Thread* t100 = alpha.find_thread("100");
  REQUIRE(t100);
  CHECK(*t100->ver_label == VerLabel::kVerified);
  CHECK(t100->nodes.size() == 4);
  CHECK(t100->node("103").depth == 2);
  CHECK(*t100->node("103").parent_id == "101");
  CHECK(*t100->node("101").stance_label == Stance::kSupport);
  CHECK(*t100->node("102").stance_label == Stance::kDeny);

  const Thread* t120 = alpha.find_thread("120");
  REQUIRE(t120);
  CHECK(*t120->ver_label == VerLabel::kUnverified);
}

TEST_CASE("replies beyond the depth cap and unreachable reactions are dropped") {
  auto corpora = load_pheme(fixture_root());
  const Thread* chain = corpora[0].find_thread("140");
  REQUIRE(chain);
  // 140 plus replies at depths 1..5; 146 and 147 exceed the cap.
  CHECK(chain->nodes.size() == 6);
  CHECK(chain->nodes.count("145") == 1);
  CHECK(chain->nodes.count("146") == 0);
  CHECK(chain->nodes.count("147") == 0);

  const Thread* t120 = corpora[0].find_thread("120");
  CHECK(t120->nodes.count("999") == 0);  // orphan reaction file
  const Thread* t110 = corpora[0].find_thread("110");
  CHECK(t110->nodes.count("112") == 0);  // listed in structure, no tweet file
}

TEST_CASE("gold summary accepts ids and verbatim text, deduplicated") {
  auto corpora = load_pheme(fixture_root());
  // alpha/summary.txt lists thread 100 once by id and once by its text.
  CHECK(corpora[0].gold_summary == std::vector<std::string>{"100"});
  CHECK(*corpora[0].find_thread("100")->gold_summ_label == SummLabel::kInSummary);
  CHECK(*corpora[0].find_thread("110")->gold_summ_label == SummLabel::kOutOfSummary);
  CHECK(corpora[1].gold_summary == std::vector<std::string>{"200"});
}

TEST_CASE("missing structure.json or source tweet is an error naming the thread") {
  fs::path root = fs::temp_directory_path() / "mtlts_pheme_broken";
  fs::remove_all(root);
  fs::path dir = root / "ev" / "rumours" / "300";
  fs::create_directories(dir / "source-tweets");
  write_file(dir / "source-tweets" / "300.json",
             R"({"id_str":"300","text":"hello world","timestamp":1})");
  CHECK_THROWS_WITH_AS((void)load_pheme_event(root / "ev"),
                       doctest::Contains("300"), Error);

  fs::remove(dir / "source-tweets" / "300.json");
  write_file(dir / "structure.json", R"({"300":{}})");
  CHECK_THROWS_WITH_AS((void)load_pheme_event(root / "ev"),
                       doctest::Contains("source"), Error);
  fs::remove_all(root);
}

TEST_CASE("corpus json round-trips exactly") {
  auto corpora = load_pheme(fixture_root());
  for (const auto& c : corpora) {
    auto j = corpus_to_json(c);
    Corpus back = corpus_from_json(j);
    back.validate();
    CHECK(corpus_to_json(back) == j);
    CHECK(back.threads.size() == c.threads.size());
    CHECK(back.gold_summary == c.gold_summary);
  }
}

TEST_CASE("thread validation rejects structural corruption") {
  Thread t = make_thread("e", "s", "some words here", 2);
  SUBCASE("dangling parent") {
    t.nodes["s_r0"].parent_id = "nope";
    CHECK_THROWS_AS(t.validate(), Error);
  }
  SUBCASE("depth mismatch") {
    t.nodes["s_r1"].depth = 3;
    CHECK_THROWS_AS(t.validate(), Error);
  }
  SUBCASE("stance on the source") {
    t.nodes["s"].stance_label = Stance::kComment;
    CHECK_THROWS_AS(t.validate(), Error);
  }
}

TEST_CASE("augmentation relabels by similarity until the target ratio") {
  // Toy: gold = {t1}; sim(t2, t1) = 0.9, sim(t3, t1) = 0.1.
  Corpus c;
  c.event_name = "toy";
  for (int i = 1; i <= 3; ++i) {
    Thread t = make_thread("toy", "t" + std::to_string(i), "text number " + std::to_string(i));
    t.ver_label = VerLabel::kVerified;
    c.threads.push_back(std::move(t));
  }
  c.gold_summary = {"t1"};
  for (auto& t : c.threads) {
    t.gold_summ_label = t.source_id == "t1" ? SummLabel::kInSummary : SummLabel::kOutOfSummary;
    t.summ_label = t.gold_summ_label;
  }
  FixedSimilarity sim;
  sim.set("t1", "t2", 0.9);
  sim.set("t1", "t3", 0.1);

  SUBCASE("threshold 0.75 relabels only the similar tweet") {
    AugmentStats st;
    Corpus out = augment_summary_labels(c, 0.75, 10.0, sim, &st);
    CHECK(*out.find_thread("t2")->summ_label == SummLabel::kInSummary);
    CHECK(*out.find_thread("t3")->summ_label == SummLabel::kOutOfSummary);
    CHECK(st.relabeled == 1);
    CHECK(*out.find_thread("t2")->gold_summ_label == SummLabel::kOutOfSummary);
  }
  SUBCASE("threshold 1.0 relabels nothing") {
    AugmentStats st;
    Corpus out = augment_summary_labels(c, 1.0, 10.0, sim, &st);
    CHECK(st.relabeled == 0);
    CHECK(*out.find_thread("t2")->summ_label == SummLabel::kOutOfSummary);
  }
  SUBCASE("a reached target ratio stops relabeling") {
    // Already 1 in / 2 out; target 0.5 is met, so nothing moves.
    AugmentStats st;
    Corpus out = augment_summary_labels(c, 0.05, 0.5, sim, &st);
    CHECK(st.relabeled == 0);
    (void)out;
  }
}

TEST_CASE("augmentation is monotone in the threshold") {
  Corpus c = make_corpus("mono", 40, 5);
  TfidfSimilarity sim = TfidfSimilarity::fit(c);
  int prev = std::numeric_limits<int>::max();
  for (double th : {0.1, 0.3, 0.5, 0.7, 0.9, 1.0}) {
    AugmentStats st;
    (void)augment_summary_labels(c, th, 100.0, sim, &st);
    CHECK(st.relabeled <= prev);
    prev = st.relabeled;
  }
}

TEST_CASE("augmentation requires a gold summary") {
  Corpus c = make_corpus("nogold", 6, 1);
  c.gold_summary.clear();
  FixedSimilarity sim;
  CHECK_THROWS_AS((void)augment_summary_labels(c, 0.5, 0.1, sim, nullptr), Error);
}

TEST_CASE("document sampling meets the coverage bound with exact shapes") {
  Corpus c = make_corpus("cov", 100, 3);
  auto docs = sample_documents(c, 20, 99);
  // 100 threads at dl 20: m = 5 rounds of 5 documents each.
  CHECK(docs.size() == 25);
  std::map<std::string, int> seen;
  for (const auto& d : docs) {
    CHECK(d.tweet_ids.size() == 20);
    CHECK(d.membership_labels.size() == 20);
    std::set<std::string> uniq(d.tweet_ids.begin(), d.tweet_ids.end());
    CHECK(uniq.size() == 20);
    for (const auto& id : d.tweet_ids) ++seen[id];
    for (std::size_t i = 1; i < d.tweet_ids.size(); ++i) {
      const Tweet& prev = c.find_thread(d.tweet_ids[i - 1])->source().tweet;
      const Tweet& cur = c.find_thread(d.tweet_ids[i])->source().tweet;
      CHECK(prev.timestamp <= cur.timestamp);
    }
  }
  CHECK(seen.size() == 100);
  for (const auto& [id, n] : seen) CHECK(n >= 5);
}

TEST_CASE("document sampling pads the short block and stays deterministic") {
  Corpus c = make_corpus("pad", 23, 4);
  auto a = sample_documents(c, 10, 7);
  auto b = sample_documents(c, 10, 7);
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].tweet_ids == b[i].tweet_ids);
    CHECK(a[i].membership_labels == b[i].membership_labels);
    CHECK(a[i].tweet_ids.size() == 10);
    std::set<std::string> uniq(a[i].tweet_ids.begin(), a[i].tweet_ids.end());
    CHECK(uniq.size() == 10);
  }
  auto other = sample_documents(c, 10, 8);
  bool any_diff = false;
  for (std::size_t i = 0; i < a.size(); ++i) any_diff = any_diff || a[i].tweet_ids != other[i].tweet_ids;
  CHECK(any_diff);
}

TEST_CASE("rounds override raises the round count") {
  Corpus c = make_corpus("rounds", 12, 2);
  auto docs = sample_documents(c, 6, 1, 4);
  CHECK(docs.size() == 8);  // 4 rounds x 2 blocks
}

TEST_CASE("document length outside [2, n] is rejected") {
  Corpus c = make_corpus("bounds", 5, 6);
  CHECK_THROWS_AS((void)sample_documents(c, 1, 1), Error);
  CHECK_THROWS_AS((void)sample_documents(c, 6, 1), Error);
}

TEST_CASE("leave-one-out splits partition events without leakage") {
  std::vector<Corpus> corpora = {make_corpus("e1", 24, 1), make_corpus("e2", 30, 2),
                                 make_corpus("e3", 28, 3)};
  auto splits = leave_one_out_splits(corpora, 0.2, 17);
  REQUIRE(splits.size() == 3);
  for (const auto& s : splits) {
    std::set<std::string> test_events;
    for (const auto& t : s.test) test_events.insert(t.event);
    CHECK(test_events == std::set<std::string>{s.test_event});

    const Corpus* held = nullptr;
    for (const auto& c : corpora)
      if (c.event_name == s.test_event) held = &c;
    REQUIRE(held);
    CHECK(s.test.size() == held->threads.size());

    std::size_t pool = 0;
    for (const auto& c : corpora)
      if (c.event_name != s.test_event) pool += c.threads.size();
    CHECK(s.train.size() + s.val.size() == pool);

    std::set<std::string> train_ids, val_ids;
    for (const auto& t : s.train) {
      CHECK(t.event != s.test_event);
      train_ids.insert(t.source_id);
    }
    for (const auto& t : s.val) {
      CHECK(t.event != s.test_event);
      CHECK(train_ids.count(t.source_id) == 0);
      val_ids.insert(t.source_id);
    }
    CHECK(val_ids.size() == s.val.size());
    CHECK(s.val.size() == static_cast<std::size_t>(std::llround(0.2 * static_cast<double>(pool))));
  }
}

TEST_CASE("validation split is stratified when every stratum is populated") {
  // 40 threads, 10 in each joint (ver, summ) stratum; a quarter goes to val.
  std::vector<Corpus> corpora;
  for (int e = 0; e < 2; ++e) {
    Corpus c;
    c.event_name = "ev" + std::to_string(e);
    for (int i = 0; i < 20; ++i) {
      Thread t = make_thread(c.event_name, c.event_name + "_t" + std::to_string(i),
                             "tweet number " + std::to_string(i));
      t.ver_label = i % 2 ? VerLabel::kVerified : VerLabel::kUnverified;
      t.summ_label = (i / 2) % 2 ? SummLabel::kInSummary : SummLabel::kOutOfSummary;
      t.gold_summ_label = t.summ_label;
      c.threads.push_back(std::move(t));
    }
    for (const auto& t : c.threads)
      if (*t.ver_label == VerLabel::kVerified && *t.summ_label == SummLabel::kInSummary)
        c.gold_summary.push_back(t.source_id);
    corpora.push_back(std::move(c));
  }
  auto splits = leave_one_out_splits(corpora, 0.25, 3);
  const Split& s = splits[0];
  CHECK(s.val.size() == 5);
  std::map<std::pair<int, int>, int> val_strata;
  for (const auto& t : s.val)
    ++val_strata[{static_cast<int>(*t.ver_label), static_cast<int>(*t.summ_label)}];
  // 20 pool threads, 5 in each stratum, fraction 0.25: one or two per stratum.
  for (const auto& [k, n] : val_strata) CHECK(n <= 2);
  CHECK(val_strata.size() >= 3);
}

TEST_CASE("splits need at least two events") {
  std::vector<Corpus> one = {make_corpus("solo", 8, 1)};
  CHECK_THROWS_AS((void)leave_one_out_splits(one, 0.2, 1), Error);
}
