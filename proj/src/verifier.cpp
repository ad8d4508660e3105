#include "mtlts/verifier.hpp"

#include <algorithm>

#include "mtlts/common.hpp"

namespace mtlts {

namespace {
const char* kGateNames[4] = {"i", "f", "o", "u"};
}

Verifier::Verifier(VerifierConfig cfg) : cfg_(cfg) {
  if (cfg_.d_enc <= 0 || cfg_.d_h <= 0) fail("verifier: dimensions must be positive");
}

void Verifier::init(ParamStore& params, Rng& rng) {
  auto mk = [&](const std::string& name, int rows, int cols, bool glorot) {
    int id = params.add(name, rows, cols);
    if (glorot) init_glorot(params[id].value, rng);
    return id;
  };
  if (cfg_.use_tree) {
    for (int g = 0; g < 4; ++g) {
      std::string gate = kGateNames[g];
      up_w_[g] = mk("ver.up.W" + gate, cfg_.d_h, cfg_.d_enc, true);
      up_u_[g] = mk("ver.up.U" + gate, cfg_.d_h, cfg_.d_h, true);
      up_b_[g] = mk("ver.up.b" + gate, cfg_.d_h, 1, false);
      down_w_[g] = mk("ver.down.W" + gate, cfg_.d_h, cfg_.d_enc, true);
      down_u_[g] = mk("ver.down.U" + gate, cfg_.d_h, cfg_.d_h, true);
      down_b_[g] = mk("ver.down.b" + gate, cfg_.d_h, 1, false);
    }
    stance_w_ = mk("ver.stance.W", kStanceClasses, 2 * cfg_.d_h, true);
    stance_b_ = mk("ver.stance.b", kStanceClasses, 1, false);
    rum_w_ = mk("ver.rum.w", 1, 2 * cfg_.d_h + cfg_.d_enc, true);
    rum_b_ = mk("ver.rum.b", 1, 1, false);
  } else {
    flat_w_ = mk("ver.flat.w", 1, cfg_.d_enc, true);
    flat_b_ = mk("ver.flat.b", 1, 1, false);
  }
}

void Verifier::attach(const ParamStore& params) {
  auto need = [&](const std::string& name) {
    int id = params.id_of(name);
    if (id < 0) fail("verifier: parameter store is missing " + name);
    return id;
  };
  if (cfg_.use_tree) {
    for (int g = 0; g < 4; ++g) {
      std::string gate = kGateNames[g];
      up_w_[g] = need("ver.up.W" + gate);
      up_u_[g] = need("ver.up.U" + gate);
      up_b_[g] = need("ver.up.b" + gate);
      down_w_[g] = need("ver.down.W" + gate);
      down_u_[g] = need("ver.down.U" + gate);
      down_b_[g] = need("ver.down.b" + gate);
    }
    stance_w_ = need("ver.stance.W");
    stance_b_ = need("ver.stance.b");
    rum_w_ = need("ver.rum.w");
    rum_b_ = need("ver.rum.b");
  } else {
    flat_w_ = need("ver.flat.w");
    flat_b_ = need("ver.flat.b");
  }
}

Var Verifier::cell_lines(Tape& tape, int w, int u, int b, Var x, Var h) const {
  return tape.add(tape.add(tape.matmul(tape.param(w), x), tape.matmul(tape.param(u), h)),
                  tape.param(b));
}

TreeStates Verifier::upward_pass(Tape& tape, const Encoder& encoder, const Thread& thread) const {
  TreeStates st;
  std::vector<std::string> order = thread.ordered_ids();
  for (const auto& id : order) st.x[id] = encoder.encode(tape, thread.node(id).tweet);
  if (!cfg_.use_tree) return st;

  // Deepest nodes first so every child state exists before its parent's cell.
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    const CascadeNode& node = thread.node(*it);
    Var x = st.x[*it];
    Var hsum = tape.zeros(cfg_.d_h);
    if (!node.children.empty()) {
      std::vector<Var> child_h;
      for (const auto& c : node.children) child_h.push_back(st.h_up.at(c));
      hsum = tape.sum_of(child_h);
    }
    Var i = tape.sigmoid(cell_lines(tape, up_w_[kI], up_u_[kI], up_b_[kI], x, hsum));
    Var o = tape.sigmoid(cell_lines(tape, up_w_[kO], up_u_[kO], up_b_[kO], x, hsum));
    Var u = tape.tanh_v(cell_lines(tape, up_w_[kU], up_u_[kU], up_b_[kU], x, hsum));
    Var c = tape.cmul(i, u);
    for (const auto& cid : node.children) {
      Var f = tape.sigmoid(
          cell_lines(tape, up_w_[kF], up_u_[kF], up_b_[kF], x, st.h_up.at(cid)));
      c = tape.add(c, tape.cmul(f, st.c_up.at(cid)));
    }
    st.c_up[*it] = c;
    st.h_up[*it] = tape.cmul(o, tape.tanh_v(c));
  }
  return st;
}

void Verifier::downward_pass(Tape& tape, const Thread& thread, TreeStates& st) const {
  if (!cfg_.use_tree) fail("verifier: downward pass in tree-free mode");
  if (!st.h_up.count(thread.source_id)) fail("verifier: downward pass before upward pass");
  // The root has no parent; its downward state is its upward state.
  st.h_down[thread.source_id] = st.h_up.at(thread.source_id);
  st.c_down[thread.source_id] = st.c_up.at(thread.source_id);
  for (const auto& id : thread.ordered_ids()) {
    const CascadeNode& node = thread.node(id);
    if (!node.parent_id) continue;
    Var x = st.x.at(id);
    Var hp, cp;
    if (cfg_.downward_uses_parent_downward) {
      hp = st.h_down.at(*node.parent_id);
      cp = st.c_down.at(*node.parent_id);
    } else {
      hp = st.h_up.at(*node.parent_id);
      cp = st.c_up.at(*node.parent_id);
    }
    Var i = tape.sigmoid(cell_lines(tape, down_w_[kI], down_u_[kI], down_b_[kI], x, hp));
    Var f = tape.sigmoid(cell_lines(tape, down_w_[kF], down_u_[kF], down_b_[kF], x, hp));
    Var o = tape.sigmoid(cell_lines(tape, down_w_[kO], down_u_[kO], down_b_[kO], x, hp));
    Var u = tape.tanh_v(cell_lines(tape, down_w_[kU], down_u_[kU], down_b_[kU], x, hp));
    Var c = tape.add(tape.cmul(f, cp), tape.cmul(i, u));
    st.c_down[id] = c;
    st.h_down[id] = tape.cmul(o, tape.tanh_v(c));
  }
}

Var Verifier::stance_logits(Tape& tape, const TreeStates& st, const Thread& thread,
                            const std::string& node_id) const {
  if (node_id == thread.source_id) fail("stance head: called on the source node");
  Var feat = tape.concat({st.h_up.at(node_id), st.h_down.at(node_id)});
  return tape.add(tape.matmul(tape.param(stance_w_), feat), tape.param(stance_b_));
}

Var Verifier::rumour_logit(Tape& tape, const TreeStates& st, const Thread& thread) const {
  std::vector<Var> leaf_h;
  for (const auto& [id, node] : thread.nodes)
    if (node.children.empty()) leaf_h.push_back(st.h_down.at(id));
  if (leaf_h.empty()) fail("rumour head: thread has no leaves");
  Var leaf_avg = tape.mean_of(leaf_h);
  Var feat = tape.concat({st.h_up.at(thread.source_id), leaf_avg, st.x.at(thread.source_id)});
  return tape.add(tape.matmul(tape.param(rum_w_), feat), tape.param(rum_b_));
}

Var Verifier::no_tree_logit(Tape& tape, Var x_root) const {
  return tape.add(tape.matmul(tape.param(flat_w_), x_root), tape.param(flat_b_));
}

VerifierOutput Verifier::run(Tape& tape, const Encoder& encoder, const Thread& thread) const {
  VerifierOutput out;
  out.states = upward_pass(tape, encoder, thread);
  if (cfg_.use_tree) {
    downward_pass(tape, thread, out.states);
    out.ver_logit = rumour_logit(tape, out.states, thread);
    for (const auto& id : thread.ordered_ids()) {
      if (id == thread.source_id) continue;
      out.stance_log_probs[id] =
          tape.log_softmax(stance_logits(tape, out.states, thread, id));
    }
  } else {
    out.ver_logit = no_tree_logit(tape, out.states.x.at(thread.source_id));
  }
  out.ver_prob = tape.sigmoid(out.ver_logit);
  return out;
}

Var Verifier::loss(Tape& tape, const VerifierOutput& out, const Thread& thread,
                   double lambda1) const {
  if (!thread.ver_label) fail("verifier loss: thread " + thread.source_id + " has no label");
  if (lambda1 < 0.0) fail("verifier loss: lambda1 must be nonnegative");
  double y = *thread.ver_label == VerLabel::kVerified ? 1.0 : 0.0;
  Var total = tape.bce_with_logit(out.ver_logit, y);
  std::vector<Var> stance_terms;
  for (const auto& [id, log_probs] : out.stance_log_probs) {
    const auto& label = thread.node(id).stance_label;
    if (!label) continue;  // unlabeled replies are masked out
    stance_terms.push_back(tape.neg(tape.pick(log_probs, static_cast<int>(*label))));
  }
  if (!stance_terms.empty() && lambda1 != 0.0)
    total = tape.add(total, tape.scale(tape.sum_of(stance_terms), lambda1));
  return total;
}

}  // namespace mtlts
