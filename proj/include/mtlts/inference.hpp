#pragma once

#include <Eigen/Dense>

#include <map>
#include <string>
#include <vector>

#include "mtlts/corpus.hpp"
#include "mtlts/encoder.hpp"

namespace mtlts {

inline constexpr int kExactSolverCap = 24;
inline constexpr int kDefaultSummaryWords = 250;

struct RelevanceRow {
  std::string id;
  double ver_prob = 0.0;
  double summ_prob = 0.0;
  double score = 0.0;
  int length = 0;  // words of the raw tweet text
};

// Candidates surviving the double filter (both probabilities > 0.5), scored by
// kappa * Summ_prob + (1 - kappa) * Ver_prob, rows ascending by id.
struct RelevanceTable {
  double kappa = 0.5;
  std::vector<RelevanceRow> rows;
};

RelevanceTable build_relevance(const std::map<std::string, double>& ver_probs,
                               const std::map<std::string, double>& summ_probs,
                               const std::map<std::string, int>& word_lengths, double kappa);

// Symmetric, unit diagonal, entries clamped to [0, 1]; row order follows the
// tweet list.
Eigen::MatrixXd similarity_matrix(const std::vector<Tweet>& tweets,
                                  const SentenceSimilarity& sim);

enum class SolverKind { kExact = 0, kGreedy = 1 };
const char* to_string(SolverKind k);

struct SummarySelection {
  std::vector<std::string> chosen_ids;  // ascending
  int total_words = 0;
  double objective_value = 0.0;
  SolverKind solver = SolverKind::kExact;
};

// Objective of a candidate subset (ascending row indices): scores summed in
// index order minus sims over index pairs i < j in that order. Every solver
// reports objectives through this one fold, so equal sets compare bit-equal.
double selection_objective(const RelevanceTable& table, const Eigen::MatrixXd& sims,
                           const std::vector<int>& chosen);

// Branch and bound over inclusion bitvectors; admissible bound is the sum of
// remaining positive scores. Optimal for n <= kExactSolverCap; ties resolve to
// the lexicographically smallest chosen-id list.
SummarySelection solve_exact(const RelevanceTable& table, const Eigen::MatrixXd& sims,
                             int max_words);

// Adds the feasible candidate with the largest positive marginal gain
// (score minus similarities to already-chosen) until none remains.
SummarySelection solve_greedy(const RelevanceTable& table, const Eigen::MatrixXd& sims,
                              int max_words);

// One tweet text per line, ascending posting time (ties by id).
std::string render_summary(std::vector<Tweet> chosen);

}  // namespace mtlts
