#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <utility>

#include "mtlts/verifier.hpp"
#include "support/fixtures.hpp"

using namespace mtlts;
using mtlts::testing::make_thread;
using mtlts::testing::make_tweet;

namespace {

struct Rig {
  ParamStore ps;
  Vocabulary vocab;
  Encoder enc{EncoderMode::kTrainable, 6};
  Verifier ver;

  explicit Rig(const std::vector<Thread>& threads, VerifierConfig cfg = {6, 5, true, false})
      : ver(cfg) {
    std::vector<TokenSequence> seqs;
    for (const auto& t : threads)
      for (const auto& id : t.ordered_ids()) seqs.push_back(tokenize(t.node(id).tweet.text, id));
    vocab = Vocabulary::build(seqs);
    Rng rng(21, "init");
    enc.init_trainable(ps, vocab, rng);
    ver.init(ps, rng);
  }
};

// Same tweets, children attached to the source in the opposite order.
Thread permuted_children_thread(bool flip) {
  Thread t;
  t.event = "e";
  t.source_id = "s";
  CascadeNode src;
  src.tweet = make_tweet("s", "source claim about the fire", 10);
  src.depth = 0;
  t.nodes["s"] = src;
  std::vector<std::string> ids = {"a", "b", "c"};
  if (flip) std::swap(ids[0], ids[2]);
  const char* texts[] = {"i support this", "this is false", "is this real"};
  for (int k = 0; k < 3; ++k) {
    CascadeNode n;
    n.tweet = make_tweet(ids[static_cast<std::size_t>(k)], texts[k], 20 + k);
    n.parent_id = "s";
    n.depth = 1;
    n.stance_label = static_cast<Stance>((k + 1) % 4);
    t.nodes[ids[static_cast<std::size_t>(k)]] = n;
    t.nodes["s"].children.push_back(ids[static_cast<std::size_t>(k)]);
  }
  std::sort(t.nodes["s"].children.begin(), t.nodes["s"].children.end());
  t.ver_label = VerLabel::kUnverified;
  t.validate();
  return t;
}

}  // namespace

TEST_CASE("verifier output shapes and probability range") {
  Thread t = make_thread("e", "s", "crash reported near the airport", 3);
  t.ver_label = VerLabel::kVerified;
  Rig rig({t});
  Tape tape(&rig.ps, nullptr);
  VerifierOutput out = rig.ver.run(tape, rig.enc, t);

  double p = tape.scalar(out.ver_prob);
  CHECK(p > 0.0);
  CHECK(p < 1.0);
  CHECK(tape.value(out.ver_logit).size() == 1);
  CHECK(out.stance_log_probs.size() == 3);
  for (const auto& [id, lp] : out.stance_log_probs) {
    const Mat& v = tape.value(lp);
    REQUIRE(v.rows() == 4);
    double sum = 0.0;
    for (int i = 0; i < 4; ++i) sum += std::exp(v(i, 0));
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-9));  // stance simplex
  }
  CHECK(out.states.h_up.size() == t.nodes.size());
  CHECK(out.states.h_down.size() == t.nodes.size());
}

TEST_CASE("child-sum upward pass ignores sibling order") {
  Thread a = permuted_children_thread(false);
  Thread b = permuted_children_thread(true);
  // Same node set, so one rig serves both shapes.
  Rig rig({a});
  Tape ta(&rig.ps, nullptr), tb(&rig.ps, nullptr);
  double pa = ta.scalar(rig.ver.run(ta, rig.enc, a).ver_prob);
  double pb = tb.scalar(rig.ver.run(tb, rig.enc, b).ver_prob);
  CHECK(pa == doctest::Approx(pb).epsilon(1e-6));
}

TEST_CASE("root-only thread feeds its own downward state to the rumour head") {
  Thread t = make_thread("e", "s", "single tweet no replies", 0);
  t.ver_label = VerLabel::kUnverified;
  Rig rig({t});
  Tape tape(&rig.ps, nullptr);
  VerifierOutput out = rig.ver.run(tape, rig.enc, t);
  // Root downward state is a copy of the upward state.
  Mat diff = tape.value(out.states.h_down.at("s")) - tape.value(out.states.h_up.at("s"));
  CHECK(diff.cwiseAbs().maxCoeff() == 0.0);
  CHECK(out.stance_log_probs.empty());
  double p = tape.scalar(out.ver_prob);
  CHECK(p > 0.0);
  CHECK(p < 1.0);
}

TEST_CASE("tree ablation scores the source embedding alone") {
  Thread with_replies = make_thread("e", "s", "claim with replies", 3);
  with_replies.ver_label = VerLabel::kVerified;
  Thread bare = make_thread("e", "s", "claim with replies", 0);
  bare.ver_label = VerLabel::kVerified;
  Rig rig({with_replies}, VerifierConfig{6, 5, false, false});
  Tape t1(&rig.ps, nullptr), t2(&rig.ps, nullptr);
  VerifierOutput o1 = rig.ver.run(t1, rig.enc, with_replies);
  VerifierOutput o2 = rig.ver.run(t2, rig.enc, bare);
  // Replies cannot influence the flat score, and no stance head runs.
  CHECK(t1.scalar(o1.ver_prob) == t2.scalar(o2.ver_prob));
  CHECK(o1.stance_log_probs.empty());
}

TEST_CASE("reply content reaches the verification probability") {
  Thread support = make_thread("e", "s", "official statement released", 0);
  {
    CascadeNode n;
    n.tweet = make_tweet("s_r0", "yes this is confirmed true", 5);
    n.parent_id = "s";
    n.depth = 1;
    n.stance_label = Stance::kSupport;
    support.nodes["s_r0"] = n;
    support.nodes["s"].children.push_back("s_r0");
  }
  Thread deny = support;
  deny.nodes["s_r0"].tweet.text = "no this is completely fake";
  support.ver_label = VerLabel::kVerified;
  deny.ver_label = VerLabel::kVerified;
  Rig rig({support, deny});
  Tape t1(&rig.ps, nullptr), t2(&rig.ps, nullptr);
  double ps = t1.scalar(rig.ver.run(t1, rig.enc, support).ver_prob);
  double pd = t2.scalar(rig.ver.run(t2, rig.enc, deny).ver_prob);
  CHECK(ps != pd);
}

TEST_CASE("downward recurrence flag changes deep-node states only") {
  Thread t = make_thread("e", "s", "chain head tweet", 1);
  CascadeNode deep;
  deep.tweet = make_tweet("d", "nested answer text", 9);
  deep.parent_id = "s_r0";
  deep.depth = 2;
  deep.stance_label = Stance::kQuery;
  t.nodes["d"] = deep;
  t.nodes["s_r0"].children.push_back("d");
  t.ver_label = VerLabel::kUnverified;
  t.validate();

  Rig rig({t});
  Verifier alt(VerifierConfig{6, 5, true, true});
  ParamStore ps2;
  Encoder enc2(EncoderMode::kTrainable, 6);
  Rng rng(21, "init");
  enc2.init_trainable(ps2, rig.vocab, rng);
  alt.init(ps2, rng);  // identical weights: same seed, same creation order

  Tape ta(&rig.ps, nullptr), tb(&ps2, nullptr);
  VerifierOutput oa = rig.ver.run(ta, rig.enc, t);
  VerifierOutput ob = alt.run(tb, enc2, t);
  // Depth-1 nodes recur over the root state either way (its downward state is
  // a copy of the upward one); the depth-2 node differs.
  Mat shallow_diff =
      ta.value(oa.states.h_down.at("s_r0")) - tb.value(ob.states.h_down.at("s_r0"));
  Mat deep_diff = ta.value(oa.states.h_down.at("d")) - tb.value(ob.states.h_down.at("d"));
  CHECK(shallow_diff.cwiseAbs().maxCoeff() == 0.0);
  CHECK(deep_diff.cwiseAbs().maxCoeff() > 0.0);
}

TEST_CASE("loss masks unlabeled replies and lambda1 scales only the stance term") {
  Thread t = make_thread("e", "s", "masking test tweet", 3);
  t.ver_label = VerLabel::kVerified;
  Rig rig({t});

  auto loss_at = [&](double lambda1, const Thread& th) {
    Tape tape(&rig.ps, nullptr);
    VerifierOutput out = rig.ver.run(tape, rig.enc, th);
    return tape.scalar(rig.ver.loss(tape, out, th, lambda1));
  };

  double base = loss_at(0.0, t);
  double with_stance = loss_at(1.0, t);
  double doubled = loss_at(2.0, t);
  CHECK(with_stance > base);
  CHECK(doubled - base == doctest::Approx(2.0 * (with_stance - base)).epsilon(1e-12));

  Thread unlabeled = t;
  for (auto& [id, n] : unlabeled.nodes)
    if (id != "s") n.stance_label.reset();
  // No labeled reply leaves only the verification term, at any lambda1.
  CHECK(loss_at(5.0, unlabeled) == loss_at(0.0, t));

  Thread partial = t;
  partial.nodes["s_r1"].stance_label.reset();
  double partial_loss = loss_at(1.0, partial);
  CHECK(partial_loss > base);
  CHECK(partial_loss < with_stance);

  Thread flipped = t;
  flipped.nodes["s_r0"].stance_label = Stance::kDeny;  // was kSupport
  CHECK(loss_at(1.0, flipped) != with_stance);
}

TEST_CASE("verifier loss gradient matches finite differences") {
  Thread t = make_thread("e", "s", "gradient check tweet", 2);
  t.ver_label = VerLabel::kUnverified;
  Rig rig({t});
  GradStore g;
  g.init(rig.ps);
  Tape tape(&rig.ps, &g);
  VerifierOutput out = rig.ver.run(tape, rig.enc, t);
  tape.backward(rig.ver.loss(tape, out, t, 1.0));
  double err = testing::max_rel_grad_error(rig.ps, g, [&] {
    Tape t2(&rig.ps, nullptr);
    VerifierOutput o2 = rig.ver.run(t2, rig.enc, t);
    return t2.scalar(rig.ver.loss(t2, o2, t, 1.0));
  });
  CHECK(err <= 1e-4);
}

TEST_CASE("loss requires a verification label") {
  Thread t = make_thread("e", "s", "unlabeled thread", 1);
  Rig rig({t});
  Tape tape(&rig.ps, nullptr);
  VerifierOutput out = rig.ver.run(tape, rig.enc, t);
  CHECK_THROWS_AS((void)rig.ver.loss(tape, out, t, 1.0), Error);
}
