#pragma once

#include <map>
#include <string>
#include <vector>

#include "mtlts/corpus.hpp"
#include "mtlts/encoder.hpp"
#include "mtlts/tape.hpp"

namespace mtlts {

struct VerifierConfig {
  int d_enc = 768;
  int d_h = 128;
  // false runs the tree-free ablation: a sigmoid head on the source embedding
  // alone, no stance supervision.
  bool use_tree = true;
  // The downward cell's recurrent state is the parent's upward state; this
  // flag switches it to the parent's downward state.
  bool downward_uses_parent_downward = false;
};

// Per-node tape variables for one thread. h_up/c_up come from the leaf-to-root
// child-sum pass; h_down/c_down from the root-to-leaf pass. x holds the
// encoder outputs so both passes reuse one embedding per node.
struct TreeStates {
  std::map<std::string, Var> x;
  std::map<std::string, Var> h_up;
  std::map<std::string, Var> c_up;
  std::map<std::string, Var> h_down;
  std::map<std::string, Var> c_down;
};

struct VerifierOutput {
  Var ver_logit;                                  // 1x1
  Var ver_prob;                                   // sigmoid(ver_logit)
  std::map<std::string, Var> stance_log_probs;    // reply nodes only, 4x1
  TreeStates states;
};

class Verifier {
 public:
  explicit Verifier(VerifierConfig cfg);

  void init(ParamStore& params, Rng& rng);
  void attach(const ParamStore& params);

  VerifierOutput run(Tape& tape, const Encoder& encoder, const Thread& thread) const;

  // BCE on the source label plus lambda1 times the summed stance NLL over
  // labeled reply nodes. Requires thread.ver_label.
  Var loss(Tape& tape, const VerifierOutput& out, const Thread& thread, double lambda1) const;

  // Pieces of run(), exposed so their contracts can be tested in isolation.
  TreeStates upward_pass(Tape& tape, const Encoder& encoder, const Thread& thread) const;
  void downward_pass(Tape& tape, const Thread& thread, TreeStates& states) const;
  Var stance_logits(Tape& tape, const TreeStates& states, const Thread& thread,
                    const std::string& node_id) const;
  Var rumour_logit(Tape& tape, const TreeStates& states, const Thread& thread) const;
  Var no_tree_logit(Tape& tape, Var x_root) const;

  const VerifierConfig& config() const { return cfg_; }

 private:
  enum Gate { kI = 0, kF = 1, kO = 2, kU = 3 };
  Var cell_lines(Tape& tape, int w, int u, int b, Var x, Var h) const;

  VerifierConfig cfg_;
  int up_w_[4] = {-1, -1, -1, -1};
  int up_u_[4] = {-1, -1, -1, -1};
  int up_b_[4] = {-1, -1, -1, -1};
  int down_w_[4] = {-1, -1, -1, -1};
  int down_u_[4] = {-1, -1, -1, -1};
  int down_b_[4] = {-1, -1, -1, -1};
  int stance_w_ = -1;
  int stance_b_ = -1;
  int rum_w_ = -1;
  int rum_b_ = -1;
  int flat_w_ = -1;
  int flat_b_ = -1;
};

}  // namespace mtlts
