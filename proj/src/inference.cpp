#include "mtlts/inference.hpp"

#include <algorithm>
#include <cmath>

#include "mtlts/common.hpp"

namespace mtlts {

const char* to_string(SolverKind k) {
  return k == SolverKind::kExact ? "exact" : "greedy";
}

RelevanceTable build_relevance(const std::map<std::string, double>& ver_probs,
                               const std::map<std::string, double>& summ_probs,
                               const std::map<std::string, int>& word_lengths, double kappa) {
  if (kappa < 0.0 || kappa > 1.0) fail("build_relevance: kappa must be in [0, 1]");
  for (const auto& [id, p] : summ_probs)
    if (!ver_probs.count(id)) fail("build_relevance: no ver_prob for " + id);
  RelevanceTable table;
  table.kappa = kappa;
  for (const auto& [id, ver] : ver_probs) {
    auto sit = summ_probs.find(id);
    if (sit == summ_probs.end()) fail("build_relevance: no summ_prob for " + id);
    double summ = sit->second;
    if (!(ver > 0.5 && summ > 0.5)) continue;
    auto lit = word_lengths.find(id);
    if (lit == word_lengths.end()) fail("build_relevance: no word length for " + id);
    RelevanceRow row;
    row.id = id;
    row.ver_prob = ver;
    row.summ_prob = summ;
    row.score = kappa * summ + (1.0 - kappa) * ver;
    row.length = lit->second;
    table.rows.push_back(std::move(row));
  }
  return table;  // map iteration already yields ascending ids
}

Eigen::MatrixXd similarity_matrix(const std::vector<Tweet>& tweets,
                                  const SentenceSimilarity& sim) {
  const int n = static_cast<int>(tweets.size());
  Eigen::MatrixXd m = Eigen::MatrixXd::Identity(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) {
      double s = std::clamp(sim.score(tweets[i], tweets[j]), 0.0, 1.0);
      m(i, j) = s;
      m(j, i) = s;
    }
  return m;
}

double selection_objective(const RelevanceTable& table, const Eigen::MatrixXd& sims,
                           const std::vector<int>& chosen) {
  double value = 0.0;
  for (int idx : chosen) value += table.rows[static_cast<std::size_t>(idx)].score;
  for (std::size_t a = 0; a < chosen.size(); ++a)
    for (std::size_t b = a + 1; b < chosen.size(); ++b)
      value -= sims(chosen[a], chosen[b]);
  return value;
}

namespace {

void check_instance(const RelevanceTable& table, const Eigen::MatrixXd& sims, int max_words) {
  const int n = static_cast<int>(table.rows.size());
  if (sims.rows() != n || sims.cols() != n)
    fail("solver: similarity matrix does not match the table");
  if (max_words < 0) fail("solver: word budget must be nonnegative");
  for (const auto& row : table.rows)
    if (row.length <= 0) fail("solver: nonpositive length for " + row.id);
}

SummarySelection finish(const RelevanceTable& table, const Eigen::MatrixXd& sims,
                        const std::vector<int>& chosen, SolverKind kind) {
  SummarySelection sel;
  sel.solver = kind;
  for (int idx : chosen) {
    sel.chosen_ids.push_back(table.rows[static_cast<std::size_t>(idx)].id);
    sel.total_words += table.rows[static_cast<std::size_t>(idx)].length;
  }
  sel.objective_value = selection_objective(table, sims, chosen);
  return sel;
}

struct ExactSearch {
  const RelevanceTable& table;
  const Eigen::MatrixXd& sims;
  int max_words;
  int n;
  std::vector<double> suffix_pos;  // sum of positive scores from index k on
  std::vector<int> current;
  std::vector<int> best;
  double best_value;
  bool have_best = false;

  void dfs(int k, double value, int words) {
    // Loose slack keeps branches alive whose incremental value drifted from
    // the canonical fold by rounding; leaves are re-scored canonically.
    if (have_best && value + suffix_pos[static_cast<std::size_t>(k)] < best_value - 1e-9)
      return;
    if (k == n) {
      double canonical = selection_objective(table, sims, current);
      if (!have_best || canonical > best_value ||
          (canonical == best_value && ids_of(current) < ids_of(best))) {
        best = current;
        best_value = canonical;
        have_best = true;
      }
      return;
    }
    const RelevanceRow& row = table.rows[static_cast<std::size_t>(k)];
    if (words + row.length <= max_words) {
      double delta = row.score;
      for (int idx : current) delta -= sims(idx, k);
      current.push_back(k);
      dfs(k + 1, value + delta, words + row.length);
      current.pop_back();
    }
    dfs(k + 1, value, words);
  }

  std::vector<std::string> ids_of(const std::vector<int>& idxs) const {
    std::vector<std::string> ids;
    ids.reserve(idxs.size());
    for (int i : idxs) ids.push_back(table.rows[static_cast<std::size_t>(i)].id);
    return ids;
  }
};

}  // namespace

SummarySelection solve_exact(const RelevanceTable& table, const Eigen::MatrixXd& sims,
                             int max_words) {
  check_instance(table, sims, max_words);
  const int n = static_cast<int>(table.rows.size());
  if (n > kExactSolverCap)
    fail("exact solver: " + std::to_string(n) + " candidates exceed the cap of " +
         std::to_string(kExactSolverCap) + "; use the greedy solver");
  ExactSearch search{table, sims, max_words, n, {}, {}, {}, 0.0, false};
  search.suffix_pos.assign(static_cast<std::size_t>(n) + 1, 0.0);
  for (int k = n - 1; k >= 0; --k)
    search.suffix_pos[static_cast<std::size_t>(k)] =
        search.suffix_pos[static_cast<std::size_t>(k) + 1] +
        std::max(0.0, table.rows[static_cast<std::size_t>(k)].score);
  search.dfs(0, 0.0, 0);
  return finish(table, sims, search.best, SolverKind::kExact);
}

SummarySelection solve_greedy(const RelevanceTable& table, const Eigen::MatrixXd& sims,
                              int max_words) {
  check_instance(table, sims, max_words);
  const int n = static_cast<int>(table.rows.size());
  std::vector<char> taken(static_cast<std::size_t>(n), 0);
  std::vector<int> chosen;
  int words = 0;
  while (true) {
    int pick = -1;
    double pick_gain = 0.0;
    for (int k = 0; k < n; ++k) {
      if (taken[static_cast<std::size_t>(k)]) continue;
      const RelevanceRow& row = table.rows[static_cast<std::size_t>(k)];
      if (words + row.length > max_words) continue;
      double gain = row.score;
      for (int idx : chosen) gain -= sims(idx, k);
      // Strict improvement over a floor of zero: only positive gains qualify,
      // and the lowest qualifying index wins ties.
      if (gain > pick_gain) {
        pick = k;
        pick_gain = gain;
      }
    }
    if (pick < 0) break;
    taken[static_cast<std::size_t>(pick)] = 1;
    chosen.push_back(pick);
    words += table.rows[static_cast<std::size_t>(pick)].length;
  }
  std::sort(chosen.begin(), chosen.end());
  return finish(table, sims, chosen, SolverKind::kGreedy);
}

std::string render_summary(std::vector<Tweet> chosen) {
  std::sort(chosen.begin(), chosen.end(), [](const Tweet& a, const Tweet& b) {
    if (a.timestamp != b.timestamp) return a.timestamp < b.timestamp;
    return a.id < b.id;
  });
  std::string out;
  for (const auto& t : chosen) {
    out += t.text;
    out += '\n';
  }
  return out;
}

}  // namespace mtlts
