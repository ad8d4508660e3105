#include "mtlts/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iostream>
#include <limits>
#include <set>

#include "mtlts/common.hpp"
#include "mtlts/encoder.hpp"
#include "mtlts/tokenize.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace mtlts {

const char* to_string(Stance s) {
  switch (s) {
    case Stance::kSupport: return "support";
    case Stance::kDeny: return "deny";
    case Stance::kQuery: return "query";
    case Stance::kComment: return "comment";
  }
  return "?";
}

const char* to_string(VerLabel v) {
  return v == VerLabel::kVerified ? "verified" : "unverified";
}

const char* to_string(SummLabel s) {
  return s == SummLabel::kInSummary ? "in_summary" : "out_of_summary";
}

Stance stance_from_string(const std::string& s) {
  std::string t = lower_ascii(trim(s));
  if (t == "support" || t == "supporting") return Stance::kSupport;
  if (t == "deny" || t == "denying") return Stance::kDeny;
  if (t == "query" || t == "appeal-for-more-information" || t == "underspecified")
    return Stance::kQuery;
  if (t == "comment" || t == "commenting") return Stance::kComment;
  fail("unknown stance label: " + s);
}

const CascadeNode& Thread::source() const { return node(source_id); }

const CascadeNode& Thread::node(const std::string& id) const {
  auto it = nodes.find(id);
  if (it == nodes.end()) fail("thread " + source_id + ": no node " + id);
  return it->second;
}

std::vector<std::string> Thread::ordered_ids() const {
  std::vector<std::pair<int, std::string>> keyed;
  keyed.reserve(nodes.size());
  for (const auto& [id, n] : nodes) keyed.emplace_back(n.depth, id);
  std::sort(keyed.begin(), keyed.end());
  std::vector<std::string> out;
  out.reserve(keyed.size());
  for (auto& [d, id] : keyed) out.push_back(std::move(id));
  return out;
}

void Thread::validate() const {
  if (source_id.empty()) fail("thread: empty source id");
  auto root_it = nodes.find(source_id);
  if (root_it == nodes.end()) fail("thread " + source_id + ": source node missing");
  if (root_it->second.parent_id) fail("thread " + source_id + ": source has a parent");
  if (root_it->second.depth != 0) fail("thread " + source_id + ": source depth not zero");
  if (root_it->second.stance_label) fail("thread " + source_id + ": stance on source node");
  for (const auto& [id, n] : nodes) {
    if (n.tweet.id != id) fail("thread " + source_id + ": node key mismatch at " + id);
    if (n.tweet.word_length <= 0) fail("thread " + source_id + ": node " + id + " has no words");
    if (n.depth < 0 || n.depth > kMaxCascadeDepth)
      fail("thread " + source_id + ": node " + id + " depth out of range");
    if (id != source_id) {
      if (!n.parent_id) fail("thread " + source_id + ": node " + id + " has no parent");
      auto pit = nodes.find(*n.parent_id);
      if (pit == nodes.end()) fail("thread " + source_id + ": node " + id + " parent missing");
      if (n.depth != pit->second.depth + 1)
        fail("thread " + source_id + ": node " + id + " depth inconsistent");
      const auto& sib = pit->second.children;
      if (std::find(sib.begin(), sib.end(), id) == sib.end())
        fail("thread " + source_id + ": node " + id + " not listed by parent");
    }
    for (const auto& c : n.children) {
      auto cit = nodes.find(c);
      if (cit == nodes.end()) fail("thread " + source_id + ": child " + c + " missing");
      if (!cit->second.parent_id || *cit->second.parent_id != id)
        fail("thread " + source_id + ": child " + c + " does not point back");
    }
    if (!std::is_sorted(n.children.begin(), n.children.end()))
      fail("thread " + source_id + ": children of " + id + " not sorted");
  }
}

const Thread* Corpus::find_thread(const std::string& source_id) const {
  for (const auto& t : threads)
    if (t.source_id == source_id) return &t;
  return nullptr;
}

void Corpus::validate() const {
  if (event_name.empty()) fail("corpus: empty event name");
  std::set<std::string> ids;
  for (const auto& t : threads) {
    if (t.event != event_name) fail("corpus " + event_name + ": thread from wrong event");
    if (!ids.insert(t.source_id).second)
      fail("corpus " + event_name + ": duplicate thread " + t.source_id);
    t.validate();
  }
  std::set<std::string> gold;
  for (const auto& id : gold_summary) {
    if (!gold.insert(id).second)
      fail("corpus " + event_name + ": duplicate gold id " + id);
    const Thread* t = find_thread(id);
    if (!t) fail("corpus " + event_name + ": gold id " + id + " has no thread");
    if (!t->ver_label || *t->ver_label != VerLabel::kVerified)
      fail("corpus " + event_name + ": gold thread " + id + " is not verified");
  }
}

// --- created_at parsing -----------------------------------------------------

namespace {

std::int64_t days_from_civil(int y, int m, int d) {
  y -= m <= 2;
  const std::int64_t era = (y >= 0 ? y : y - 399) / 400;
  const int yoe = static_cast<int>(y - era * 400);
  const int doy = (153 * (m + (m > 2 ? -3 : 9)) + 2) / 5 + d - 1;
  const int doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
  return era * 146097 + doe - 719468;
}

int month_index(const std::string& m) {
  static const char* names[] = {"Jan", "Feb", "Mar", "Apr", "May", "Jun",
                                "Jul", "Aug", "Sep", "Oct", "Nov", "Dec"};
  for (int i = 0; i < 12; ++i)
    if (m == names[i]) return i + 1;
  fail("created_at: unknown month " + m);
}

// Twitter format: "Wed Jan 07 11:06:08 +0000 2015".
std::int64_t parse_created_at(const std::string& s) {
  auto parts = split_ws(s);
  if (parts.size() != 6) fail("created_at: malformed timestamp " + s);
  int mon = month_index(parts[1]);
  int day = std::stoi(parts[2]);
  int hh = std::stoi(parts[3].substr(0, 2));
  int mm = std::stoi(parts[3].substr(3, 2));
  int ss = std::stoi(parts[3].substr(6, 2));
  const std::string& off = parts[4];
  if (off.size() != 5 || (off[0] != '+' && off[0] != '-'))
    fail("created_at: malformed offset in " + s);
  int off_s = (std::stoi(off.substr(1, 2)) * 60 + std::stoi(off.substr(3, 2))) * 60;
  if (off[0] == '-') off_s = -off_s;
  int year = std::stoi(parts[5]);
  std::int64_t days = days_from_civil(year, mon, day);
  return days * 86400 + hh * 3600 + mm * 60 + ss - off_s;
}

struct RawTweet {
  Tweet tweet;
  bool empty_text = false;
};

RawTweet parse_tweet_json(const json& j, const fs::path& origin) {
  RawTweet out;
  if (j.contains("id_str"))
    out.tweet.id = j.at("id_str").get<std::string>();
  else if (j.contains("id")) {
    const auto& id = j.at("id");
    out.tweet.id = id.is_string() ? id.get<std::string>() : std::to_string(id.get<std::int64_t>());
  } else {
    fail("tweet json " + origin.string() + ": no id");
  }
  std::string text;
  if (j.contains("text"))
    text = j.at("text").get<std::string>();
  else if (j.contains("full_text"))
    text = j.at("full_text").get<std::string>();
  out.tweet.text = text;
  out.tweet.word_length = count_words(text);
  out.empty_text = out.tweet.word_length == 0;
  if (j.contains("created_at"))
    out.tweet.timestamp = parse_created_at(j.at("created_at").get<std::string>());
  else if (j.contains("timestamp"))
    out.tweet.timestamp = j.at("timestamp").get<std::int64_t>();
  else
    fail("tweet json " + origin.string() + ": no created_at");
  return out;
}

json load_json_file(const fs::path& p) {
  std::ifstream in(p);
  if (!in) fail("cannot open " + p.string());
  json j;
  try {
    in >> j;
  } catch (const std::exception& e) {
    fail("invalid json in " + p.string() + ": " + e.what());
  }
  return j;
}

std::vector<fs::path> sorted_entries(const fs::path& dir, bool dirs_only) {
  std::vector<fs::path> out;
  if (!fs::exists(dir)) return out;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (dirs_only && !e.is_directory()) continue;
    if (!dirs_only && !e.is_regular_file()) continue;
    out.push_back(e.path());
  }
  std::sort(out.begin(), out.end());
  return out;
}

// Walks structure.json breadth-first, keeping reachable nodes whose tweet file
// was loaded and whose depth stays within the cap.
void walk_structure(const json& tree, const std::string& parent_id, int parent_depth,
                    const std::map<std::string, RawTweet>& reactions, Thread& thread,
                    const std::string& label) {
  if (!tree.is_object()) return;
  std::vector<std::string> keys;
  for (auto it = tree.begin(); it != tree.end(); ++it) keys.push_back(it.key());
  std::sort(keys.begin(), keys.end());
  for (const auto& id : keys) {
    int depth = parent_depth + 1;
    if (depth > kMaxCascadeDepth) {
      std::cerr << "[corpus] " << label << ": reply " << id << " beyond depth "
                << kMaxCascadeDepth << ", skipped\n";
      continue;
    }
    if (thread.nodes.count(id)) {
      std::cerr << "[corpus] " << label << ": reply " << id << " listed twice, skipped\n";
      continue;
    }
    auto rit = reactions.find(id);
    if (rit == reactions.end()) {
      std::cerr << "[corpus] " << label << ": reply " << id << " has no tweet file, skipped\n";
      continue;
    }
    if (rit->second.empty_text) {
      std::cerr << "[corpus] " << label << ": reply " << id << " has empty text, skipped\n";
      continue;
    }
    CascadeNode node;
    node.tweet = rit->second.tweet;
    node.tweet.id = id;
    node.parent_id = parent_id;
    node.depth = depth;
    thread.nodes[id] = std::move(node);
    thread.nodes[parent_id].children.push_back(id);
    walk_structure(tree.at(id), id, depth, reactions, thread, label);
  }
}

Thread load_thread_dir(const fs::path& thread_dir, const std::string& event, VerLabel ver,
                       const std::map<std::string, Stance>* stance_labels) {
  const std::string tid = thread_dir.filename().string();
  const std::string label = event + "/" + tid;

  fs::path src_path = thread_dir / "source-tweets" / (tid + ".json");
  if (!fs::exists(src_path)) fail("thread " + label + ": missing source tweet file");
  RawTweet src = parse_tweet_json(load_json_file(src_path), src_path);
  if (src.empty_text) fail("thread " + label + ": source tweet has empty text");

  fs::path struct_path = thread_dir / "structure.json";
  if (!fs::exists(struct_path)) fail("thread " + label + ": missing structure.json");
  json structure = load_json_file(struct_path);
  if (!structure.is_object() || !structure.contains(tid))
    fail("thread " + label + ": structure.json does not start at the source tweet");

  std::map<std::string, RawTweet> reactions;
  for (const auto& p : sorted_entries(thread_dir / "reactions", false)) {
    if (p.extension() != ".json") continue;
    RawTweet r = parse_tweet_json(load_json_file(p), p);
    std::string id = p.stem().string();
    r.tweet.id = id;
    reactions[id] = std::move(r);
  }

  Thread thread;
  thread.event = event;
  thread.source_id = tid;
  thread.ver_label = ver;
  CascadeNode root;
  root.tweet = src.tweet;
  root.tweet.id = tid;
  root.depth = 0;
  thread.nodes[tid] = std::move(root);
  walk_structure(structure.at(tid), tid, 0, reactions, thread, label);

  for (const auto& [id, r] : reactions) {
    if (!thread.nodes.count(id))
      std::cerr << "[corpus] " << label << ": reply " << id
                << " not reachable from the source, skipped\n";
  }
  for (auto& [id, n] : thread.nodes) {
    std::sort(n.children.begin(), n.children.end());
    if (id != thread.source_id && stance_labels) {
      auto sit = stance_labels->find(id);
      if (sit != stance_labels->end()) n.stance_label = sit->second;
    }
  }
  return thread;
}

}  // namespace

Corpus load_pheme_event(const fs::path& event_dir,
                        const std::map<std::string, Stance>* stance_labels) {
  Corpus corpus;
  corpus.event_name = event_dir.filename().string();
  bool saw_class_dir = false;
  const std::pair<const char*, VerLabel> classes[] = {
      {"non-rumours", VerLabel::kVerified}, {"rumours", VerLabel::kUnverified}};
  for (const auto& [dir_name, ver] : classes) {
    fs::path class_dir = event_dir / dir_name;
    if (!fs::exists(class_dir)) continue;
    saw_class_dir = true;
    for (const auto& thread_dir : sorted_entries(class_dir, true))
      corpus.threads.push_back(load_thread_dir(thread_dir, corpus.event_name, ver, stance_labels));
  }
  if (!saw_class_dir) fail("not a PHEME event directory: " + event_dir.string());
  std::sort(corpus.threads.begin(), corpus.threads.end(),
            [](const Thread& a, const Thread& b) { return a.source_id < b.source_id; });

  fs::path summary_path = event_dir / "summary.txt";
  if (fs::exists(summary_path)) {
    // Lines are source-tweet ids, or verbatim source text as a fallback.
    std::map<std::string, std::string> by_text;
    for (const auto& t : corpus.threads)
      by_text.emplace(trim(t.source().tweet.text), t.source_id);
    std::set<std::string> seen;
    for (std::string line : split_lines(read_file(summary_path))) {
      line = trim(line);
      if (line.empty() || line[0] == '#') continue;
      std::string id = line;
      if (!corpus.find_thread(id)) {
        auto it = by_text.find(line);
        if (it == by_text.end()) {
          std::cerr << "[corpus] " << corpus.event_name << ": gold summary line matches no thread, skipped: "
                    << line << "\n";
          continue;
        }
        id = it->second;
      }
      if (seen.insert(id).second) corpus.gold_summary.push_back(id);
    }
  }
  for (auto& t : corpus.threads) {
    bool in_gold = std::find(corpus.gold_summary.begin(), corpus.gold_summary.end(),
                             t.source_id) != corpus.gold_summary.end();
    if (!corpus.gold_summary.empty() || in_gold) {
      t.gold_summ_label = in_gold ? SummLabel::kInSummary : SummLabel::kOutOfSummary;
      t.summ_label = t.gold_summ_label;
    }
  }
  corpus.validate();
  return corpus;
}

std::vector<Corpus> load_pheme(const fs::path& root) {
  if (!fs::exists(root)) fail("dataset root does not exist: " + root.string());
  std::map<std::string, Stance> stance;
  fs::path stance_path = root / "stance.json";
  if (fs::exists(stance_path)) stance = load_stance_file(stance_path);

  std::vector<Corpus> out;
  for (const auto& dir : sorted_entries(root, true)) {
    if (!fs::exists(dir / "rumours") && !fs::exists(dir / "non-rumours")) continue;
    std::map<std::string, Stance> merged = stance;
    fs::path local = dir / "stance.json";
    if (fs::exists(local))
      for (const auto& [id, s] : load_stance_file(local)) merged[id] = s;
    out.push_back(load_pheme_event(dir, merged.empty() ? nullptr : &merged));
  }
  if (out.empty()) fail("no PHEME event directories under " + root.string());
  return out;
}

std::map<std::string, Stance> load_stance_file(const fs::path& path) {
  json j = load_json_file(path);
  if (!j.is_object()) fail("stance file " + path.string() + ": expected an object");
  std::map<std::string, Stance> out;
  for (auto it = j.begin(); it != j.end(); ++it)
    out[it.key()] = stance_from_string(it.value().get<std::string>());
  return out;
}

// --- cache serialization ----------------------------------------------------

namespace {

json optional_label(const std::optional<VerLabel>& v) {
  return v ? json(to_string(*v)) : json(nullptr);
}
json optional_label(const std::optional<SummLabel>& v) {
  return v ? json(to_string(*v)) : json(nullptr);
}

std::optional<VerLabel> ver_from_json(const json& j) {
  if (j.is_null()) return std::nullopt;
  std::string s = j.get<std::string>();
  if (s == "verified") return VerLabel::kVerified;
  if (s == "unverified") return VerLabel::kUnverified;
  fail("corpus json: bad ver label " + s);
}

std::optional<SummLabel> summ_from_json(const json& j) {
  if (j.is_null()) return std::nullopt;
  std::string s = j.get<std::string>();
  if (s == "in_summary") return SummLabel::kInSummary;
  if (s == "out_of_summary") return SummLabel::kOutOfSummary;
  fail("corpus json: bad summary label " + s);
}

}  // namespace

json corpus_to_json(const Corpus& corpus) {
  json threads = json::array();
  for (const auto& t : corpus.threads) {
    json nodes = json::array();
    for (const auto& id : t.ordered_ids()) {
      const CascadeNode& n = t.node(id);
      json node{{"id", n.tweet.id},
                {"text", n.tweet.text},
                {"timestamp", n.tweet.timestamp},
                {"parent", n.parent_id ? json(*n.parent_id) : json(nullptr)},
                {"stance", n.stance_label ? json(to_string(*n.stance_label)) : json(nullptr)}};
      nodes.push_back(std::move(node));
    }
    threads.push_back(json{{"source_id", t.source_id},
                           {"ver_label", optional_label(t.ver_label)},
                           {"summ_label", optional_label(t.summ_label)},
                           {"gold_summ_label", optional_label(t.gold_summ_label)},
                           {"nodes", std::move(nodes)}});
  }
  return json{{"event", corpus.event_name},
              {"gold_summary", corpus.gold_summary},
              {"threads", std::move(threads)}};
}

Corpus corpus_from_json(const json& j) {
  Corpus corpus;
  corpus.event_name = j.at("event").get<std::string>();
  corpus.gold_summary = j.at("gold_summary").get<std::vector<std::string>>();
  for (const auto& tj : j.at("threads")) {
    Thread t;
    t.event = corpus.event_name;
    t.source_id = tj.at("source_id").get<std::string>();
    t.ver_label = ver_from_json(tj.at("ver_label"));
    t.summ_label = summ_from_json(tj.at("summ_label"));
    t.gold_summ_label = summ_from_json(tj.at("gold_summ_label"));
    for (const auto& nj : tj.at("nodes")) {
      CascadeNode n;
      n.tweet.id = nj.at("id").get<std::string>();
      n.tweet.text = nj.at("text").get<std::string>();
      n.tweet.timestamp = nj.at("timestamp").get<std::int64_t>();
      n.tweet.word_length = count_words(n.tweet.text);
      if (!nj.at("parent").is_null()) n.parent_id = nj.at("parent").get<std::string>();
      if (!nj.at("stance").is_null())
        n.stance_label = stance_from_string(nj.at("stance").get<std::string>());
      t.nodes[n.tweet.id] = std::move(n);
    }
    for (auto& [id, n] : t.nodes) {
      if (!n.parent_id) continue;
      auto pit = t.nodes.find(*n.parent_id);
      if (pit == t.nodes.end()) fail("corpus json: node " + id + " parent missing");
      pit->second.children.push_back(id);
    }
    // Depths are not serialized; recompute from parent links to a fixpoint.
    bool changed = true;
    while (changed) {
      changed = false;
      for (auto& [id, n] : t.nodes) {
        if (!n.parent_id) continue;
        int want = t.nodes.at(*n.parent_id).depth + 1;
        if (n.depth != want) {
          n.depth = want;
          changed = true;
        }
      }
    }
    for (auto& [id, n] : t.nodes) std::sort(n.children.begin(), n.children.end());
    corpus.threads.push_back(std::move(t));
  }
  corpus.validate();
  return corpus;
}

// --- label augmentation -----------------------------------------------------

Corpus augment_summary_labels(Corpus corpus, double threshold, double target_ratio,
                              const SentenceSimilarity& sim, AugmentStats* stats) {
  if (threshold < 0.0 || threshold > 1.0) fail("augment: threshold must be in [0, 1]");
  if (target_ratio <= 0.0) fail("augment: target ratio must be positive");
  if (corpus.gold_summary.empty())
    fail("augment: corpus " + corpus.event_name + " has no gold summary");
  AugmentStats st;
  std::set<std::string> gold(corpus.gold_summary.begin(), corpus.gold_summary.end());
  int in_count = 0, out_count = 0;
  for (auto& t : corpus.threads) {
    if (gold.count(t.source_id)) {
      t.summ_label = SummLabel::kInSummary;
      ++in_count;
    } else {
      if (t.summ_label != SummLabel::kInSummary) t.summ_label = SummLabel::kOutOfSummary;
      if (*t.summ_label == SummLabel::kInSummary)
        ++in_count;
      else
        ++out_count;
    }
  }
  st.gold_in = static_cast<int>(gold.size());

  struct Candidate {
    double best_sim;
    std::string id;
  };
  std::vector<Candidate> cands;
  for (const auto& t : corpus.threads) {
    if (!t.ver_label || *t.ver_label != VerLabel::kVerified) continue;
    if (*t.summ_label == SummLabel::kInSummary) continue;
    double best = 0.0;
    for (const auto& gid : corpus.gold_summary)
      best = std::max(best, sim.score(t.source().tweet, corpus.find_thread(gid)->source().tweet));
    if (best >= threshold) cands.push_back({best, t.source_id});
  }
  std::sort(cands.begin(), cands.end(), [](const Candidate& a, const Candidate& b) {
    if (a.best_sim != b.best_sim) return a.best_sim > b.best_sim;
    return a.id < b.id;
  });

  auto ratio = [&]() {
    return out_count == 0 ? std::numeric_limits<double>::infinity()
                          : static_cast<double>(in_count) / out_count;
  };
  std::map<std::string, Thread*> by_id;
  for (auto& t : corpus.threads) by_id[t.source_id] = &t;
  for (const auto& c : cands) {
    if (ratio() >= target_ratio) break;
    by_id[c.id]->summ_label = SummLabel::kInSummary;
    ++in_count;
    --out_count;
    ++st.relabeled;
  }
  st.achieved_ratio = ratio();
  if (stats) *stats = st;
  return corpus;
}

// --- pseudo-document sampling -----------------------------------------------

std::vector<PseudoDocument> sample_documents(const std::vector<const Thread*>& threads,
                                             const std::string& event, int dl,
                                             std::uint64_t seed, int rounds_override) {
  const int n = static_cast<int>(threads.size());
  if (dl < 2) fail("sample_documents: document length must be at least 2");
  if (dl > n) fail("sample_documents: document length exceeds thread count");
  const int m = rounds_override > 0 ? rounds_override : std::max(1, n / dl);
  const int blocks = (n + dl - 1) / dl;
  Rng rng(seed, "docs:" + event);

  std::vector<PseudoDocument> docs;
  docs.reserve(static_cast<std::size_t>(m) * blocks);
  std::vector<int> perm(n);
  for (int r = 0; r < m; ++r) {
    for (int i = 0; i < n; ++i) perm[i] = i;
    rng.shuffle(perm);
    for (int b = 0; b < blocks; ++b) {
      std::vector<int> chosen;
      chosen.reserve(dl);
      for (int k = b * dl; k < std::min(n, (b + 1) * dl); ++k) chosen.push_back(perm[k]);
      // Short trailing block: pad with the head of the same permutation, which
      // cannot repeat the tail because dl <= n.
      for (int k = 0; static_cast<int>(chosen.size()) < dl; ++k) chosen.push_back(perm[k]);
      std::sort(chosen.begin(), chosen.end(), [&](int a, int c) {
        const Tweet& ta = threads[a]->source().tweet;
        const Tweet& tc = threads[c]->source().tweet;
        if (ta.timestamp != tc.timestamp) return ta.timestamp < tc.timestamp;
        return ta.id < tc.id;
      });
      PseudoDocument doc;
      doc.doc_id = static_cast<int>(docs.size());
      doc.event = event;
      for (int idx : chosen) {
        const Thread* t = threads[idx];
        doc.tweet_ids.push_back(t->source_id);
        doc.membership_labels.push_back(t->summ_label.value_or(SummLabel::kOutOfSummary));
      }
      docs.push_back(std::move(doc));
    }
  }
  return docs;
}

std::vector<PseudoDocument> sample_documents(const Corpus& corpus, int dl, std::uint64_t seed,
                                             int rounds_override) {
  std::vector<const Thread*> ptrs;
  ptrs.reserve(corpus.threads.size());
  for (const auto& t : corpus.threads) ptrs.push_back(&t);
  return sample_documents(ptrs, corpus.event_name, dl, seed, rounds_override);
}

// --- leave-one-out splits ---------------------------------------------------

std::vector<Split> leave_one_out_splits(const std::vector<Corpus>& corpora,
                                        double val_fraction, std::uint64_t seed) {
  if (corpora.size() < 2) fail("splits: need at least two events");
  if (!(val_fraction > 0.0 && val_fraction < 1.0)) fail("splits: val fraction must be in (0, 1)");

  std::vector<Split> out;
  for (std::size_t e = 0; e < corpora.size(); ++e) {
    Split split;
    split.test_event = corpora[e].event_name;
    split.test = corpora[e].threads;

    std::vector<const Thread*> pool;
    for (std::size_t o = 0; o < corpora.size(); ++o) {
      if (o == e) continue;
      for (const auto& t : corpora[o].threads) pool.push_back(&t);
    }
    const int n = static_cast<int>(pool.size());
    if (n < 2) fail("splits: not enough threads outside event " + split.test_event);
    int k = static_cast<int>(std::llround(val_fraction * n));
    k = std::clamp(k, 1, n - 1);

    auto stratum = [](const Thread& t) {
      std::string key = t.ver_label ? to_string(*t.ver_label) : "na";
      key += '|';
      key += to_string(t.summ_label.value_or(SummLabel::kOutOfSummary));
      return key;
    };
    bool have[4] = {false, false, false, false};
    for (const Thread* t : pool) {
      if (t->ver_label)
        have[*t->ver_label == VerLabel::kVerified ? 0 : 1] = true;
      have[t->summ_label.value_or(SummLabel::kOutOfSummary) == SummLabel::kInSummary ? 2 : 3] =
          true;
    }
    bool stratified = have[0] && have[1] && have[2] && have[3];

    std::vector<int> order(n);
    for (int i = 0; i < n; ++i) order[i] = i;
    Rng rng(seed, "split:" + split.test_event);
    rng.shuffle(order);

    std::vector<char> in_val(n, 0);
    if (!stratified) {
      std::cerr << "[splits] " << split.test_event
                << ": a label class is absent, falling back to a random split\n";
      for (int i = 0; i < k; ++i) in_val[order[i]] = 1;
    } else {
      std::map<std::string, std::vector<int>> groups;
      for (int idx : order) groups[stratum(*pool[idx])].push_back(idx);
      std::vector<std::pair<std::string, std::vector<int>>> glist(groups.begin(), groups.end());
      std::vector<int> quota(glist.size(), 0);
      std::vector<std::pair<double, std::size_t>> rema;
      int assigned = 0;
      for (std::size_t g = 0; g < glist.size(); ++g) {
        double ideal = static_cast<double>(k) * glist[g].second.size() / n;
        quota[g] = static_cast<int>(ideal);
        assigned += quota[g];
        rema.emplace_back(ideal - quota[g], g);
      }
      std::sort(rema.begin(), rema.end(), [](const auto& a, const auto& b) {
        if (a.first != b.first) return a.first > b.first;
        return a.second < b.second;
      });
      for (std::size_t r = 0; assigned < k && r < rema.size(); ++r) {
        std::size_t g = rema[r].second;
        if (quota[g] < static_cast<int>(glist[g].second.size())) {
          ++quota[g];
          ++assigned;
        }
      }
      // Tiny strata can leave quota unfilled; top up from the shuffled order.
      for (std::size_t g = 0; g < glist.size(); ++g)
        for (int i = 0; i < quota[g]; ++i) in_val[glist[g].second[i]] = 1;
      for (int i = 0; assigned < k && i < n; ++i) {
        if (!in_val[order[i]]) {
          in_val[order[i]] = 1;
          ++assigned;
        }
      }
    }
    for (int i = 0; i < n; ++i)
      (in_val[i] ? split.val : split.train).push_back(*pool[i]);
    out.push_back(std::move(split));
  }
  return out;
}

}  // namespace mtlts
