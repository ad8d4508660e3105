#pragma once

#include <map>
#include <string>
#include <vector>

#include "mtlts/corpus.hpp"
#include "mtlts/tape.hpp"

namespace mtlts {

struct SummarizerConfig {
  int d_enc = 768;
  int d_g = 128;  // per direction; hidden states are 2*d_g
  int dl = 20;    // document length, also the span of the position table
};

// Tape variables for one document forward: bidirectional recurrence over the
// time-sorted embeddings, document representation, and the sequential scoring
// pass. summary_state[i] is the accumulated sum over positions j < i.
struct DocStates {
  std::vector<Var> h;              // 2*d_g x 1 per position
  Var doc_repr;                    // 2*d_g x 1
  std::vector<Var> summary_state;  // 2*d_g x 1 per position
  std::vector<Var> logits;         // 1x1 per position
  std::vector<Var> p;              // sigmoid(logit) per position
};

class Summarizer {
 public:
  explicit Summarizer(SummarizerConfig cfg);

  void init(ParamStore& params, Rng& rng);
  void attach(const ParamStore& params);

  // x and ver_probs are per-position (time order); ver_probs are 1x1 and enter
  // the logit through a learned weight. Both must have length dl.
  DocStates run(Tape& tape, const std::vector<Var>& x, const std::vector<Var>& ver_probs) const;

  // Sum of per-position BCE against the membership labels.
  Var loss(Tape& tape, const DocStates& states, const std::vector<SummLabel>& labels) const;

  const SummarizerConfig& config() const { return cfg_; }

 private:
  Var gru_cell(Tape& tape, const int* w, const int* u, const int* b, Var x, Var h) const;

  SummarizerConfig cfg_;
  // Gate order: update, reset, candidate.
  int fw_w_[3] = {-1, -1, -1};
  int fw_u_[3] = {-1, -1, -1};
  int fw_b_[3] = {-1, -1, -1};
  int bw_w_[3] = {-1, -1, -1};
  int bw_u_[3] = {-1, -1, -1};
  int bw_b_[3] = {-1, -1, -1};
  int wd_ = -1;
  int bd_ = -1;
  int wc_ = -1;    // content
  int wsal_ = -1;  // salience bilinear
  int wnov_ = -1;  // novelty bilinear
  int pos_ = -1;   // per-position learned term
  int wv_ = -1;    // verifier-signal weight
  int bias_ = -1;
};

// Mean of per-document membership probabilities per tweet id. p[d] aligns with
// docs[d].tweet_ids. Occurrences are folded in doc_id order, so the result is
// bit-identical under any enumeration order of the documents.
std::map<std::string, double> aggregate_summ_prob(const std::vector<PseudoDocument>& docs,
                                                  const std::vector<std::vector<double>>& p);

}  // namespace mtlts
