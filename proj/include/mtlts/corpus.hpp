#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace mtlts {

class SentenceSimilarity;

enum class Stance { kSupport = 0, kDeny = 1, kQuery = 2, kComment = 3 };
enum class VerLabel { kUnverified = 0, kVerified = 1 };
enum class SummLabel { kOutOfSummary = 0, kInSummary = 1 };

const char* to_string(Stance s);
const char* to_string(VerLabel v);
const char* to_string(SummLabel s);
Stance stance_from_string(const std::string& s);

inline constexpr int kMaxCascadeDepth = 5;
inline constexpr int kStanceClasses = 4;

struct Tweet {
  std::string id;
  std::string text;
  std::int64_t timestamp = 0;
  int word_length = 0;  // whitespace tokens of the raw text
};

struct CascadeNode {
  Tweet tweet;
  std::optional<std::string> parent_id;  // absent on the source node
  std::vector<std::string> children;     // ids, ascending
  int depth = 0;                         // source node is depth 0
  std::optional<Stance> stance_label;    // never set on the source node
};

// One source tweet plus its reply cascade. Node ids are unique, every
// non-source node's parent is present, and children lists mirror parent_id.
struct Thread {
  std::string event;
  std::string source_id;
  std::map<std::string, CascadeNode> nodes;
  std::optional<VerLabel> ver_label;
  std::optional<SummLabel> summ_label;       // training label, may be augmented
  std::optional<SummLabel> gold_summ_label;  // as loaded, never touched after

  const CascadeNode& source() const;
  const CascadeNode& node(const std::string& id) const;
  int reply_count() const { return static_cast<int>(nodes.size()) - 1; }
  // Source first, then breadth-first by depth with ids ascending inside a level.
  std::vector<std::string> ordered_ids() const;
  void validate() const;
};

struct Corpus {
  std::string event_name;
  std::vector<Thread> threads;               // source ids unique
  std::vector<std::string> gold_summary;     // source ids, subset of threads

  const Thread* find_thread(const std::string& source_id) const;
  void validate() const;
};

// A fixed-size bag of source tweets drawn from one event, time-ordered.
struct PseudoDocument {
  int doc_id = 0;
  std::string event;
  std::vector<std::string> tweet_ids;
  std::vector<SummLabel> membership_labels;
};

// --- PHEME-layout loading ---------------------------------------------------

// Reads one event directory (rumours/ + non-rumours/ thread folders, each with
// source-tweets/, reactions/, structure.json). Replies below depth 5 and
// reactions missing from structure.json are skipped with a log line; a missing
// structure.json or source tweet is an error naming the thread.
Corpus load_pheme_event(const std::filesystem::path& event_dir,
                        const std::map<std::string, Stance>* stance_labels = nullptr);

// All event directories under root, sorted by name. Empty root is an error.
std::vector<Corpus> load_pheme(const std::filesystem::path& root);

// Flat {tweet_id: stance string} JSON file.
std::map<std::string, Stance> load_stance_file(const std::filesystem::path& path);

nlohmann::json corpus_to_json(const Corpus& corpus);
Corpus corpus_from_json(const nlohmann::json& j);

// --- Label augmentation -----------------------------------------------------

struct AugmentStats {
  int gold_in = 0;
  int relabeled = 0;
  double achieved_ratio = 0.0;  // in-summary count over out-of-summary count
};

// Marks verified threads as in-summary when their source text is similar
// enough to a gold summary tweet, stopping once the in/out ratio reaches the
// target. Candidates are visited by descending best similarity. gold_summ_label
// is left untouched; only summ_label changes.
Corpus augment_summary_labels(Corpus corpus, double threshold, double target_ratio,
                              const SentenceSimilarity& sim, AugmentStats* stats = nullptr);

// --- Pseudo-document sampling -----------------------------------------------

// m = max(1, |threads| / dl) rounds; each round partitions a fresh uniform
// permutation into documents of exactly dl sources (the last block is padded
// with distinct earlier entries of the same permutation), so every source
// appears in at least m documents. Requires 2 <= dl <= |threads|.
std::vector<PseudoDocument> sample_documents(const Corpus& corpus, int dl,
                                             std::uint64_t seed, int rounds_override = 0);
std::vector<PseudoDocument> sample_documents(const std::vector<const Thread*>& threads,
                                             const std::string& event, int dl,
                                             std::uint64_t seed, int rounds_override = 0);

// --- Leave-one-out splits ---------------------------------------------------

struct Split {
  std::string test_event;
  std::vector<Thread> train;
  std::vector<Thread> val;
  std::vector<Thread> test;
};

// One split per event: that event's threads become the test set, the rest are
// divided into train/val. Validation is stratified on the joint
// (ver_label, summ_label) stratum; when a stratum is empty the fallback is a
// seeded random split, announced on the log.
std::vector<Split> leave_one_out_splits(const std::vector<Corpus>& corpora,
                                        double val_fraction, std::uint64_t seed);

}  // namespace mtlts
