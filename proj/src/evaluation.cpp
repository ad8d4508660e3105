#include "mtlts/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "mtlts/common.hpp"
#include "mtlts/tokenize.hpp"

namespace mtlts {

double v_ratio(const std::vector<bool>& verified_flags) {
  if (verified_flags.empty()) fail("v_ratio: empty selection");
  int verified = 0;
  for (bool f : verified_flags) verified += f ? 1 : 0;
  return static_cast<double>(verified) / static_cast<double>(verified_flags.size());
}

double v_ratio(const SummarySelection& selection, const std::map<std::string, VerLabel>& labels) {
  if (selection.chosen_ids.empty()) fail("v_ratio: empty selection");
  std::vector<bool> flags;
  flags.reserve(selection.chosen_ids.size());
  for (const auto& id : selection.chosen_ids) {
    auto it = labels.find(id);
    if (it == labels.end()) fail("v_ratio: no label for chosen tweet " + id);
    flags.push_back(it->second == VerLabel::kVerified);
  }
  return v_ratio(flags);
}

namespace {

const std::set<std::string>& stopwords() {
  static const std::set<std::string> words = {
      "a",    "an",  "and", "are", "as",  "at",   "be",   "by",   "for", "from",
      "has",  "he",  "in",  "is",  "it",  "its",  "of",   "on",   "or",  "she",
      "that", "the", "to",  "was", "were", "will", "with", "this", "they"};
  return words;
}

std::map<std::string, int> unigram_counts(const std::string& text, bool drop_stopwords) {
  std::map<std::string, int> counts;
  for (const auto& tok : tokenize(text).tokens) {
    if (tok == kUrlToken || tok == kUserToken) continue;
    if (drop_stopwords && stopwords().count(tok)) continue;
    ++counts[tok];
  }
  return counts;
}

}  // namespace

double rouge1_f1(const std::string& candidate, const std::string& gold, bool drop_stopwords) {
  if (trim(gold).empty()) fail("rouge1_f1: empty gold text");
  if (trim(candidate).empty()) fail("rouge1_f1: empty candidate text");
  auto cand = unigram_counts(candidate, drop_stopwords);
  auto ref = unigram_counts(gold, drop_stopwords);
  long long cand_total = 0, ref_total = 0, overlap = 0;
  for (const auto& [tok, n] : cand) cand_total += n;
  for (const auto& [tok, n] : ref) ref_total += n;
  for (const auto& [tok, n] : cand) {
    auto it = ref.find(tok);
    if (it != ref.end()) overlap += std::min(n, it->second);
  }
  if (cand_total + ref_total == 0) return 0.0;
  return 2.0 * static_cast<double>(overlap) /
         static_cast<double>(cand_total + ref_total);
}

ClassificationMetrics classification_metrics(const std::vector<int>& preds,
                                             const std::vector<int>& labels, int n_classes) {
  if (preds.size() != labels.size()) fail("classification_metrics: length mismatch");
  if (preds.empty()) fail("classification_metrics: empty input");
  if (n_classes < 2) fail("classification_metrics: need at least two classes");
  std::vector<long long> tp(static_cast<std::size_t>(n_classes), 0);
  std::vector<long long> fp(static_cast<std::size_t>(n_classes), 0);
  std::vector<long long> fn(static_cast<std::size_t>(n_classes), 0);
  long long correct = 0;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    int p = preds[i], y = labels[i];
    if (p < 0 || p >= n_classes || y < 0 || y >= n_classes)
      fail("classification_metrics: class index out of range");
    if (p == y) {
      ++correct;
      ++tp[static_cast<std::size_t>(p)];
    } else {
      ++fp[static_cast<std::size_t>(p)];
      ++fn[static_cast<std::size_t>(y)];
    }
  }
  ClassificationMetrics m;
  m.accuracy = static_cast<double>(correct) / static_cast<double>(preds.size());
  for (int c = 0; c < n_classes; ++c) {
    auto ci = static_cast<std::size_t>(c);
    double prec = tp[ci] + fp[ci] > 0
                      ? static_cast<double>(tp[ci]) / static_cast<double>(tp[ci] + fp[ci])
                      : 0.0;
    double rec = tp[ci] + fn[ci] > 0
                     ? static_cast<double>(tp[ci]) / static_cast<double>(tp[ci] + fn[ci])
                     : 0.0;
    long long denom = 2 * tp[ci] + fp[ci] + fn[ci];
    double f1 = denom > 0 ? 2.0 * static_cast<double>(tp[ci]) / static_cast<double>(denom) : 0.0;
    m.macro_precision += prec;
    m.macro_recall += rec;
    m.macro_f1 += f1;
  }
  m.macro_precision /= n_classes;
  m.macro_recall /= n_classes;
  m.macro_f1 /= n_classes;
  return m;
}

MannWhitneyResult mann_whitney_u(const std::vector<double>& a, const std::vector<double>& b) {
  const std::size_t n1 = a.size(), n2 = b.size();
  if (n1 < 2 || n2 < 2) fail("mann_whitney_u: need at least two values per sample");
  struct Entry {
    double value;
    int group;
  };
  std::vector<Entry> pooled;
  pooled.reserve(n1 + n2);
  for (double v : a) pooled.push_back({v, 0});
  for (double v : b) pooled.push_back({v, 1});
  std::sort(pooled.begin(), pooled.end(),
            [](const Entry& x, const Entry& y) { return x.value < y.value; });

  const std::size_t n = n1 + n2;
  std::vector<double> ranks(n, 0.0);
  double tie_term = 0.0;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j < n && pooled[j].value == pooled[i].value) ++j;
    double avg_rank = (static_cast<double>(i + 1) + static_cast<double>(j)) / 2.0;
    for (std::size_t k = i; k < j; ++k) ranks[k] = avg_rank;
    double t = static_cast<double>(j - i);
    tie_term += t * t * t - t;
    i = j;
  }
  double r1 = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    if (pooled[i].group == 0) r1 += ranks[i];

  const double dn1 = static_cast<double>(n1), dn2 = static_cast<double>(n2),
               dn = static_cast<double>(n);
  double u1 = r1 - dn1 * (dn1 + 1.0) / 2.0;
  double u2 = dn1 * dn2 - u1;
  MannWhitneyResult res;
  res.u = std::min(u1, u2);

  double variance = dn1 * dn2 / 12.0 * ((dn + 1.0) - tie_term / (dn * (dn - 1.0)));
  if (variance <= 0.0) {
    res.p = 1.0;  // every pooled value tied
    return res;
  }
  double mu = dn1 * dn2 / 2.0;
  double z = (res.u - mu + 0.5) / std::sqrt(variance);  // continuity correction
  // two-sided p = 2 * Phi(z) for z <= 0, and Phi(z) = erfc(-z / sqrt 2) / 2
  res.p = std::clamp(std::erfc(-z / std::sqrt(2.0)), 0.0, 1.0);
  return res;
}

}  // namespace mtlts
