#include "mtlts/summarizer.hpp"

#include <algorithm>

#include "mtlts/common.hpp"

namespace mtlts {

namespace {
const char* kGateNames[3] = {"z", "r", "n"};
}

Summarizer::Summarizer(SummarizerConfig cfg) : cfg_(cfg) {
  if (cfg_.d_enc <= 0 || cfg_.d_g <= 0) fail("summarizer: dimensions must be positive");
  if (cfg_.dl < 2) fail("summarizer: document length must be at least 2");
}

void Summarizer::init(ParamStore& params, Rng& rng) {
  auto mk = [&](const std::string& name, int rows, int cols, bool glorot) {
    int id = params.add(name, rows, cols);
    if (glorot) init_glorot(params[id].value, rng);
    return id;
  };
  for (int g = 0; g < 3; ++g) {
    std::string gate = kGateNames[g];
    fw_w_[g] = mk("summ.fw.W" + gate, cfg_.d_g, cfg_.d_enc, true);
    fw_u_[g] = mk("summ.fw.U" + gate, cfg_.d_g, cfg_.d_g, true);
    fw_b_[g] = mk("summ.fw.b" + gate, cfg_.d_g, 1, false);
    bw_w_[g] = mk("summ.bw.W" + gate, cfg_.d_g, cfg_.d_enc, true);
    bw_u_[g] = mk("summ.bw.U" + gate, cfg_.d_g, cfg_.d_g, true);
    bw_b_[g] = mk("summ.bw.b" + gate, cfg_.d_g, 1, false);
  }
  const int dh = 2 * cfg_.d_g;
  wd_ = mk("summ.Wd", dh, dh, true);
  bd_ = mk("summ.bd", dh, 1, false);
  wc_ = mk("summ.wc", 1, dh, true);
  wsal_ = mk("summ.Wsal", dh, dh, true);
  wnov_ = mk("summ.Wnov", dh, dh, true);
  pos_ = mk("summ.pos", cfg_.dl, 1, false);
  wv_ = mk("summ.wv", 1, 1, false);
  bias_ = mk("summ.bias", 1, 1, false);
  // A dead-zero verifier weight would hide the signal from early training.
  params[wv_].value(0, 0) = 1.0;
}

void Summarizer::attach(const ParamStore& params) {
  auto need = [&](const std::string& name) {
    int id = params.id_of(name);
    if (id < 0) fail("summarizer: parameter store is missing " + name);
    return id;
  };
  for (int g = 0; g < 3; ++g) {
    std::string gate = kGateNames[g];
    fw_w_[g] = need("summ.fw.W" + gate);
    fw_u_[g] = need("summ.fw.U" + gate);
    fw_b_[g] = need("summ.fw.b" + gate);
    bw_w_[g] = need("summ.bw.W" + gate);
    bw_u_[g] = need("summ.bw.U" + gate);
    bw_b_[g] = need("summ.bw.b" + gate);
  }
  wd_ = need("summ.Wd");
  bd_ = need("summ.bd");
  wc_ = need("summ.wc");
  wsal_ = need("summ.Wsal");
  wnov_ = need("summ.Wnov");
  pos_ = need("summ.pos");
  if (params[pos_].value.rows() != cfg_.dl)
    fail("summarizer: position table does not match the document length");
  wv_ = need("summ.wv");
  bias_ = need("summ.bias");
}

Var Summarizer::gru_cell(Tape& tape, const int* w, const int* u, const int* b, Var x,
                         Var h) const {
  auto lines = [&](int g, Var hh) {
    return tape.add(
        tape.add(tape.matmul(tape.param(w[g]), x), tape.matmul(tape.param(u[g]), hh)),
        tape.param(b[g]));
  };
  Var z = tape.sigmoid(lines(0, h));
  Var r = tape.sigmoid(lines(1, h));
  Var n = tape.tanh_v(lines(2, tape.cmul(r, h)));
  // h' = (1 - z) * n + z * h
  return tape.add(tape.sub(n, tape.cmul(z, n)), tape.cmul(z, h));
}

DocStates Summarizer::run(Tape& tape, const std::vector<Var>& x,
                          const std::vector<Var>& ver_probs) const {
  const int dl = cfg_.dl;
  if (static_cast<int>(x.size()) != dl) fail("summarizer: document length mismatch");
  if (ver_probs.size() != x.size()) fail("summarizer: ver_probs length mismatch");

  std::vector<Var> fw(dl), bw(dl);
  Var h = tape.zeros(cfg_.d_g);
  for (int i = 0; i < dl; ++i) {
    h = gru_cell(tape, fw_w_, fw_u_, fw_b_, x[i], h);
    fw[i] = h;
  }
  h = tape.zeros(cfg_.d_g);
  for (int i = dl - 1; i >= 0; --i) {
    h = gru_cell(tape, bw_w_, bw_u_, bw_b_, x[i], h);
    bw[i] = h;
  }

  DocStates st;
  st.h.resize(dl);
  for (int i = 0; i < dl; ++i) st.h[i] = tape.concat({fw[i], bw[i]});
  st.doc_repr = tape.tanh_v(
      tape.add(tape.matmul(tape.param(wd_), tape.mean_of(st.h)), tape.param(bd_)));

  st.summary_state.resize(dl);
  st.logits.resize(dl);
  st.p.resize(dl);
  Var running = tape.zeros(2 * cfg_.d_g);
  for (int i = 0; i < dl; ++i) {
    st.summary_state[i] = running;
    Var content = tape.matmul(tape.param(wc_), st.h[i]);
    Var salience = tape.dot(st.h[i], tape.matmul(tape.param(wsal_), st.doc_repr));
    Var novelty = tape.dot(st.h[i], tape.matmul(tape.param(wnov_), tape.tanh_v(running)));
    Var position = tape.pick(tape.param(pos_), i);
    Var ver_term = tape.cmul(tape.param(wv_), ver_probs[i]);
    Var logit = tape.add(content, salience);
    logit = tape.sub(logit, novelty);
    logit = tape.add(logit, position);
    logit = tape.add(logit, ver_term);
    logit = tape.add(logit, tape.param(bias_));
    st.logits[i] = logit;
    st.p[i] = tape.sigmoid(logit);
    running = tape.add(running, tape.scale_by(st.h[i], st.p[i]));
  }
  return st;
}

Var Summarizer::loss(Tape& tape, const DocStates& st, const std::vector<SummLabel>& labels) const {
  if (labels.size() != st.logits.size()) fail("summarizer loss: label length mismatch");
  std::vector<Var> terms;
  terms.reserve(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) {
    double y = labels[i] == SummLabel::kInSummary ? 1.0 : 0.0;
    terms.push_back(tape.bce_with_logit(st.logits[i], y));
  }
  return tape.sum_of(terms);
}

std::map<std::string, double> aggregate_summ_prob(const std::vector<PseudoDocument>& docs,
                                                  const std::vector<std::vector<double>>& p) {
  if (docs.size() != p.size()) fail("aggregate: probability rows do not match documents");
  std::map<std::string, std::vector<std::pair<int, double>>> hits;
  for (std::size_t d = 0; d < docs.size(); ++d) {
    if (docs[d].tweet_ids.size() != p[d].size())
      fail("aggregate: probability row length mismatch in document " +
           std::to_string(docs[d].doc_id));
    for (std::size_t i = 0; i < p[d].size(); ++i)
      hits[docs[d].tweet_ids[i]].emplace_back(docs[d].doc_id, p[d][i]);
  }
  std::map<std::string, double> out;
  for (auto& [id, entries] : hits) {
    std::sort(entries.begin(), entries.end());
    double sum = 0.0;
    for (const auto& [doc_id, prob] : entries) sum += prob;
    out[id] = sum / static_cast<double>(entries.size());
  }
  return out;
}

}  // namespace mtlts
