#include "support/fixtures.hpp"

#include <nlohmann/json.hpp>

#include "mtlts/common.hpp"
#include "mtlts/tokenize.hpp"

using nlohmann::json;

namespace mtlts::testing {

Tweet make_tweet(const std::string& id, const std::string& text, std::int64_t ts) {
  return {id, text, ts, count_words(text)};
}

Thread make_thread(const std::string& event, const std::string& source_id,
                   const std::string& text, int replies, std::int64_t ts) {
  Thread t;
  t.event = event;
  t.source_id = source_id;
  CascadeNode src;
  src.tweet = make_tweet(source_id, text, ts);
  src.depth = 0;
  t.nodes[source_id] = src;
  for (int r = 0; r < replies; ++r) {
    CascadeNode node;
    std::string id = source_id + "_r" + std::to_string(r);
    node.tweet = make_tweet(id, "reply " + std::to_string(r) + " to " + text, ts + r + 1);
    node.parent_id = source_id;
    node.depth = 1;
    node.stance_label = static_cast<Stance>(r % 4);
    t.nodes[id] = node;
    t.nodes[source_id].children.push_back(id);
  }
  t.validate();
  return t;
}

Corpus make_corpus(const std::string& event, int n, std::uint64_t seed) {
  static const char* pool[] = {"fire", "crash", "police", "confirm", "report",
                              "breaking", "video", "rescue", "injured", "airport"};
  Rng rng(seed, "fixture:" + event);
  Corpus c;
  c.event_name = event;
  for (int i = 0; i < n; ++i) {
    std::string text;
    int words = rng.uniform_int(3, 7);
    for (int w = 0; w < words; ++w) {
      if (w) text += ' ';
      text += pool[rng.uniform_int(0, 9)];
    }
    Thread t = make_thread(event, event + "_t" + std::to_string(i), text,
                           rng.uniform_int(0, 3), 1000 * (i + 1));
    t.ver_label = i % 3 == 0 ? VerLabel::kUnverified : VerLabel::kVerified;
    c.threads.push_back(std::move(t));
  }
  for (int i = 0, taken = 0; i < n && taken < std::max(1, n / 8); ++i) {
    if (*c.threads[static_cast<std::size_t>(i)].ver_label != VerLabel::kVerified) continue;
    c.gold_summary.push_back(c.threads[static_cast<std::size_t>(i)].source_id);
    ++taken;
  }
  for (auto& t : c.threads) {
    bool in_gold = std::find(c.gold_summary.begin(), c.gold_summary.end(), t.source_id) !=
                   c.gold_summary.end();
    t.gold_summ_label = in_gold ? SummLabel::kInSummary : SummLabel::kOutOfSummary;
    t.summ_label = t.gold_summ_label;
  }
  c.validate();
  return c;
}

namespace {

void write_json(const fs::path& p, const json& j) {
  fs::create_directories(p.parent_path());
  write_file(p, j.dump(2) + "\n");
}

json tweet_json(const std::string& id, const std::string& text, long ts) {
  return json{{"id_str", id}, {"text", text}, {"timestamp", ts}};
}

// One thread directory with the given reply edges (parent -> children).
void write_thread(const fs::path& class_dir, const std::string& tid, const std::string& text,
                  const std::vector<std::pair<std::string, std::vector<std::string>>>& edges,
                  long ts) {
  fs::path dir = class_dir / tid;
  write_json(dir / "source-tweets" / (tid + ".json"), tweet_json(tid, text, ts));
  json structure = json::object();
  std::function<json(const std::string&)> subtree = [&](const std::string& id) {
    json node = json::object();
    for (const auto& [parent, children] : edges)
      if (parent == id)
        for (const auto& c : children) node[c] = subtree(c);
    return node;
  };
  structure[tid] = subtree(tid);
  write_json(dir / "structure.json", structure);
  long reply_ts = ts;
  for (const auto& [parent, children] : edges)
    for (const auto& c : children)
      write_json(dir / "reactions" / (c + ".json"),
                 tweet_json(c, "reply " + c + " about " + text, ++reply_ts));
}

}  // namespace

fs::path write_pheme_fixture(const fs::path& root) {
  fs::remove_all(root);

  // Event alpha: two non-rumours (one with a nested cascade), two rumours.
  fs::path alpha = root / "alpha";
  write_thread(alpha / "non-rumours", "100", "plane landed safely at the airport",
               {{"100", {"101", "102"}}, {"101", {"103"}}}, 1000);
  write_thread(alpha / "non-rumours", "110", "police confirm the road is closed",
               {{"110", {"111"}}}, 2000);
  write_thread(alpha / "rumours", "120", "unconfirmed report of a second crash",
               {{"120", {"121", "122"}}}, 3000);
  write_thread(alpha / "rumours", "130", "rumour of casualties spreading online", {}, 4000);
  write_file(alpha / "summary.txt", "100\nplane landed safely at the airport\n");

  // Thread with a chain deeper than the cap: replies 141..147 nest one level
  // each, so 146 and 147 sit at depths 6 and 7 and must be dropped.
  write_thread(alpha / "rumours", "140", "breaking long chain of replies",
               {{"140", {"141"}},
                {"141", {"142"}},
                {"142", {"143"}},
                {"143", {"144"}},
                {"144", {"145"}},
                {"145", {"146"}},
                {"146", {"147"}}},
               5000);

  // Orphan reaction: file exists, structure.json never references it.
  fs::path orphan_dir = alpha / "rumours" / "120" / "reactions";
  write_json(orphan_dir / "999.json", tweet_json("999", "orphan reply", 3500));

  // Reaction listed in structure.json with no tweet file: 112.
  fs::path s110 = alpha / "non-rumours" / "110" / "structure.json";
  json structure = json::parse(read_file(s110));
  structure["110"]["112"] = json::object();
  write_json(s110, structure);

  // Event beta: smaller, with stance labels supplied at the root.
  fs::path beta = root / "beta";
  write_thread(beta / "non-rumours", "200", "rescue teams reach the village",
               {{"200", {"201", "202"}}}, 6000);
  write_thread(beta / "rumours", "210", "video said to show the incident",
               {{"210", {"211"}}}, 7000);
  write_file(beta / "summary.txt", "200\n");

  write_file(root / "stance.json",
             json{{"101", "support"}, {"102", "deny"}, {"103", "query"},
                  {"111", "comment"}, {"121", "support"}, {"122", "deny"},
                  {"201", "support"}, {"202", "comment"}, {"211", "query"}}
                     .dump(2) +
                 "\n");
  return root;
}

double max_rel_grad_error(ParamStore& params, const GradStore& analytic,
                          const std::function<double()>& loss_value) {
  double worst = 0.0;
  for (int id = 0; id < params.size(); ++id) {
    Mat& value = params[id].value;
    for (Eigen::Index r = 0; r < value.rows(); ++r) {
      for (Eigen::Index c = 0; c < value.cols(); ++c) {
        const double saved = value(r, c);
        const double eps = 1e-5 * std::max(1.0, std::abs(saved));
        value(r, c) = saved + eps;
        const double up = loss_value();
        value(r, c) = saved - eps;
        const double down = loss_value();
        value(r, c) = saved;
        const double fd = (up - down) / (2.0 * eps);
        const double an = analytic[id](r, c);
        const double err =
            std::abs(an - fd) / std::max({std::abs(an), std::abs(fd), 1e-5});
        worst = std::max(worst, err);
      }
    }
  }
  return worst;
}

}  // namespace mtlts::testing
