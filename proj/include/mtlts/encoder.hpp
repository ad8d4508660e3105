#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "mtlts/corpus.hpp"
#include "mtlts/tape.hpp"
#include "mtlts/tokenize.hpp"

namespace mtlts {

// Token index table. Index 0 is always <unk>; unseen tokens map there.
class Vocabulary {
 public:
  Vocabulary();
  static Vocabulary build(const std::vector<TokenSequence>& sequences, int min_count = 1);

  int index_of(const std::string& token) const;
  bool contains(const std::string& token) const;
  int size() const { return static_cast<int>(tokens_.size()); }
  const std::vector<std::string>& tokens() const { return tokens_; }

  nlohmann::json to_json() const;
  static Vocabulary from_json(const nlohmann::json& j);

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, int> index_;
};

enum class EncoderMode { kTrainable = 0, kFrozen = 1 };

// Map from tweet id to a fixed d_enc vector, stored as little-endian f32 on
// disk: u32 d_enc, u64 count, then per entry u32 id length, id bytes, d_enc
// floats. Lookups are bit-stable across runs.
class EmbeddingCache {
 public:
  EmbeddingCache() = default;
  explicit EmbeddingCache(int d_enc) : d_enc_(d_enc) {}

  int d_enc() const { return d_enc_; }
  std::size_t size() const { return vectors_.size(); }
  bool contains(const std::string& id) const;
  const std::vector<float>& at(const std::string& id) const;
  void put(const std::string& id, std::vector<float> v);

  void save(const std::filesystem::path& path) const;
  static EmbeddingCache load(const std::filesystem::path& path);

 private:
  int d_enc_ = 0;
  std::map<std::string, std::vector<float>> vectors_;
};

// Text encoder shared by the verifier and the summarizer. Trainable mode owns
// an embedding table plus a tanh projection and runs on the tape; frozen mode
// replays vectors from an EmbeddingCache as constants.
class Encoder {
 public:
  // The prefix names this encoder's tensors (<prefix>.emb and so on), letting
  // two independent encoders coexist in one parameter store.
  Encoder(EncoderMode mode, int d_enc, std::string prefix = "enc");

  void init_trainable(ParamStore& params, const Vocabulary& vocab, Rng& rng);
  void attach_trainable(const ParamStore& params, const Vocabulary& vocab);
  void attach_cache(const EmbeddingCache* cache);

  // d_enc x 1 column. Trainable: tanh(Wp * mean(emb rows) + bp).
  Var encode(Tape& tape, const Tweet& tweet) const;

  EncoderMode mode() const { return mode_; }
  int d_enc() const { return d_enc_; }
  const Vocabulary& vocab() const { return vocab_; }

 private:
  EncoderMode mode_;
  int d_enc_ = 0;
  std::string prefix_;
  Vocabulary vocab_;
  int emb_id_ = -1;
  int wp_id_ = -1;
  int bp_id_ = -1;
  const EmbeddingCache* cache_ = nullptr;
};

// --- Sentence similarity ----------------------------------------------------

double cosine(const std::vector<double>& a, const std::vector<double>& b);

// Symmetric similarity between two tweets' texts. Providers report raw cosine
// (so [-1, 1]); consumers that need [0, 1] clamp on their side.
class SentenceSimilarity {
 public:
  virtual ~SentenceSimilarity() = default;
  virtual double score(const Tweet& a, const Tweet& b) const = 0;
};

// Cosine over tf-idf unigram vectors, fitted on the corpus source texts.
// Sentinel tokens are dropped before counting. Stands in for an embedding
// similarity when no cache is available.
class TfidfSimilarity : public SentenceSimilarity {
 public:
  static TfidfSimilarity fit(const std::vector<const Corpus*>& corpora);
  static TfidfSimilarity fit(const Corpus& corpus);

  double score(const Tweet& a, const Tweet& b) const override;

 private:
  std::unordered_map<std::string, double> idf_;
  double default_idf_ = 0.0;
  std::map<std::string, double> weights(const Tweet& t) const;
};

// Cosine over cached embedding vectors; ids absent from the cache are errors.
class CachedSimilarity : public SentenceSimilarity {
 public:
  explicit CachedSimilarity(const EmbeddingCache* cache) : cache_(cache) {}
  double score(const Tweet& a, const Tweet& b) const override;

 private:
  const EmbeddingCache* cache_;
};

// Test helper with values pinned per unordered id pair.
class FixedSimilarity : public SentenceSimilarity {
 public:
  void set(const std::string& a, const std::string& b, double value);
  double score(const Tweet& a, const Tweet& b) const override;

 private:
  std::map<std::pair<std::string, std::string>, double> values_;
};

}  // namespace mtlts
