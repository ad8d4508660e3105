#include "mtlts/encoder.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "mtlts/common.hpp"

namespace mtlts {

Vocabulary::Vocabulary() {
  tokens_.push_back(kUnkToken);
  index_[kUnkToken] = 0;
}

Vocabulary Vocabulary::build(const std::vector<TokenSequence>& sequences, int min_count) {
  std::map<std::string, int> counts;
  for (const auto& seq : sequences)
    for (const auto& tok : seq.tokens) ++counts[tok];
  Vocabulary v;
  for (const auto& [tok, n] : counts) {
    if (tok == kUnkToken || n < min_count) continue;
    v.index_[tok] = static_cast<int>(v.tokens_.size());
    v.tokens_.push_back(tok);
  }
  return v;
}

int Vocabulary::index_of(const std::string& token) const {
  auto it = index_.find(token);
  return it == index_.end() ? 0 : it->second;
}

bool Vocabulary::contains(const std::string& token) const {
  return index_.count(token) != 0;
}

nlohmann::json Vocabulary::to_json() const { return nlohmann::json(tokens_); }

Vocabulary Vocabulary::from_json(const nlohmann::json& j) {
  if (!j.is_array() || j.empty() || j[0].get<std::string>() != kUnkToken)
    fail("vocabulary json: expected array starting with <unk>");
  Vocabulary v;
  v.tokens_.clear();
  v.index_.clear();
  for (const auto& item : j) {
    std::string tok = item.get<std::string>();
    if (v.index_.count(tok)) fail("vocabulary json: duplicate token " + tok);
    v.index_[tok] = static_cast<int>(v.tokens_.size());
    v.tokens_.push_back(tok);
  }
  return v;
}

bool EmbeddingCache::contains(const std::string& id) const {
  return vectors_.count(id) != 0;
}

const std::vector<float>& EmbeddingCache::at(const std::string& id) const {
  auto it = vectors_.find(id);
  if (it == vectors_.end()) fail("embedding cache: no vector for id " + id);
  return it->second;
}

void EmbeddingCache::put(const std::string& id, std::vector<float> v) {
  if (static_cast<int>(v.size()) != d_enc_)
    fail("embedding cache: vector for " + id + " has wrong dimension");
  vectors_[id] = std::move(v);
}

void EmbeddingCache::save(const std::filesystem::path& path) const {
  std::string buf;
  put_u32(buf, static_cast<std::uint32_t>(d_enc_));
  put_u64(buf, vectors_.size());
  for (const auto& [id, vec] : vectors_) {
    put_u32(buf, static_cast<std::uint32_t>(id.size()));
    buf += id;
    for (float x : vec) put_f32(buf, x);
  }
  write_file(path, buf);
}

EmbeddingCache EmbeddingCache::load(const std::filesystem::path& path) {
  std::string buf = read_file(path);
  std::size_t off = 0;
  EmbeddingCache cache(static_cast<int>(get_u32(buf, off)));
  std::uint64_t count = get_u64(buf, off);
  for (std::uint64_t i = 0; i < count; ++i) {
    std::uint32_t len = get_u32(buf, off);
    if (off + len > buf.size()) fail("embedding cache: truncated file " + path.string());
    std::string id = buf.substr(off, len);
    off += len;
    std::vector<float> vec(cache.d_enc_);
    for (int k = 0; k < cache.d_enc_; ++k) vec[k] = get_f32(buf, off);
    cache.vectors_[id] = std::move(vec);
  }
  if (off != buf.size()) fail("embedding cache: trailing bytes in " + path.string());
  return cache;
}

Encoder::Encoder(EncoderMode mode, int d_enc, std::string prefix)
    : mode_(mode), d_enc_(d_enc), prefix_(std::move(prefix)) {
  if (d_enc <= 0) fail("encoder: d_enc must be positive");
  if (prefix_.empty()) fail("encoder: empty parameter prefix");
}

void Encoder::init_trainable(ParamStore& params, const Vocabulary& vocab, Rng& rng) {
  if (mode_ != EncoderMode::kTrainable) fail("encoder: not in trainable mode");
  vocab_ = vocab;
  emb_id_ = params.add(prefix_ + ".emb", vocab_.size(), d_enc_);
  wp_id_ = params.add(prefix_ + ".Wp", d_enc_, d_enc_);
  bp_id_ = params.add(prefix_ + ".bp", d_enc_, 1);
  init_normal(params[emb_id_].value, rng, 0.1);
  init_glorot(params[wp_id_].value, rng);
}

void Encoder::attach_trainable(const ParamStore& params, const Vocabulary& vocab) {
  if (mode_ != EncoderMode::kTrainable) fail("encoder: not in trainable mode");
  vocab_ = vocab;
  emb_id_ = params.id_of(prefix_ + ".emb");
  wp_id_ = params.id_of(prefix_ + ".Wp");
  bp_id_ = params.id_of(prefix_ + ".bp");
  if (emb_id_ < 0 || wp_id_ < 0 || bp_id_ < 0)
    fail("encoder: parameter store has no encoder tensors");
  if (params[emb_id_].value.rows() != vocab_.size())
    fail("encoder: embedding table does not match the vocabulary");
}

void Encoder::attach_cache(const EmbeddingCache* cache) {
  if (mode_ != EncoderMode::kFrozen) fail("encoder: not in frozen mode");
  if (cache->d_enc() != d_enc_) fail("encoder: cache dimension mismatch");
  cache_ = cache;
}

Var Encoder::encode(Tape& tape, const Tweet& tweet) const {
  if (mode_ == EncoderMode::kFrozen) {
    if (!cache_) fail("encoder: no cache attached");
    const auto& vec = cache_->at(tweet.id);
    Mat m(d_enc_, 1);
    for (int i = 0; i < d_enc_; ++i) m(i, 0) = static_cast<double>(vec[i]);
    return tape.constant(m);
  }
  if (emb_id_ < 0) fail("encoder: parameters not attached");
  TokenSequence seq = tokenize(tweet.text, tweet.id);
  std::vector<int> rows;
  rows.reserve(seq.tokens.size());
  for (const auto& tok : seq.tokens) rows.push_back(vocab_.index_of(tok));
  Var mean = tape.rows_mean(emb_id_, rows);  // d_enc x 1
  return tape.tanh_v(tape.add(tape.matmul(tape.param(wp_id_), mean), tape.param(bp_id_)));
}

double cosine(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) fail("cosine: dimension mismatch");
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  if (na == 0.0 || nb == 0.0) return 0.0;
  return dot / (std::sqrt(na) * std::sqrt(nb));
}

namespace {

std::vector<std::string> content_tokens(const std::string& text) {
  std::vector<std::string> out;
  for (auto& tok : tokenize(text).tokens)
    if (tok != kUrlToken && tok != kUserToken) out.push_back(std::move(tok));
  return out;
}

}  // namespace

TfidfSimilarity TfidfSimilarity::fit(const std::vector<const Corpus*>& corpora) {
  std::map<std::string, int> df;
  int n_docs = 0;
  for (const Corpus* c : corpora) {
    for (const Thread& t : c->threads) {
      ++n_docs;
      std::map<std::string, bool> seen;
      for (const auto& tok : content_tokens(t.source().tweet.text)) seen[tok] = true;
      for (const auto& [tok, _] : seen) ++df[tok];
    }
  }
  TfidfSimilarity sim;
  sim.default_idf_ = std::log((1.0 + n_docs) / 1.0) + 1.0;
  for (const auto& [tok, d] : df)
    sim.idf_[tok] = std::log((1.0 + n_docs) / (1.0 + d)) + 1.0;
  return sim;
}

TfidfSimilarity TfidfSimilarity::fit(const Corpus& corpus) {
  return fit(std::vector<const Corpus*>{&corpus});
}

std::map<std::string, double> TfidfSimilarity::weights(const Tweet& t) const {
  std::map<std::string, double> tf;
  for (const auto& tok : content_tokens(t.text)) tf[tok] += 1.0;
  for (auto& [tok, w] : tf) {
    auto it = idf_.find(tok);
    w *= (it == idf_.end() ? default_idf_ : it->second);
  }
  return tf;
}

double TfidfSimilarity::score(const Tweet& a, const Tweet& b) const {
  auto wa = weights(a);
  auto wb = weights(b);
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (const auto& [tok, w] : wa) {
    na += w * w;
    auto it = wb.find(tok);
    if (it != wb.end()) dot += w * it->second;
  }
  for (const auto& [tok, w] : wb) nb += w * w;
  if (na == 0.0 || nb == 0.0) return 0.0;
  if (wa == wb) return 1.0;
  return std::min(dot / (std::sqrt(na) * std::sqrt(nb)), 1.0);
}

double CachedSimilarity::score(const Tweet& a, const Tweet& b) const {
  const auto& va = cache_->at(a.id);
  const auto& vb = cache_->at(b.id);
  std::vector<double> da(va.begin(), va.end());
  std::vector<double> db(vb.begin(), vb.end());
  if (a.id == b.id || da == db) {
    double n = 0.0;
    for (double x : da) n += x * x;
    return n > 0.0 ? 1.0 : 0.0;
  }
  return cosine(da, db);
}

void FixedSimilarity::set(const std::string& a, const std::string& b, double value) {
  values_[std::minmax(a, b)] = value;
}

double FixedSimilarity::score(const Tweet& a, const Tweet& b) const {
  auto it = values_.find(std::minmax(a.id, b.id));
  if (it != values_.end()) return it->second;
  return a.id == b.id ? 1.0 : 0.0;
}

}  // namespace mtlts
