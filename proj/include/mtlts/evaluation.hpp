#pragma once

#include <map>
#include <string>
#include <vector>

#include "mtlts/corpus.hpp"
#include "mtlts/inference.hpp"

namespace mtlts {

// Fraction of chosen tweets whose label is verified. Empty input is an error.
double v_ratio(const std::vector<bool>& verified_flags);
double v_ratio(const SummarySelection& selection,
               const std::map<std::string, VerLabel>& labels);

// Unigram F1 with clipped counts over the shared tokenizer's output, sentinel
// tokens dropped. Computed as 2*overlap/(|cand| + |gold|), which equals
// 2PR/(P+R) and stays exact on integer counts. Stopwords are kept unless
// drop_stopwords is set.
double rouge1_f1(const std::string& candidate, const std::string& gold,
                 bool drop_stopwords = false);

struct ClassificationMetrics {
  double accuracy = 0.0;
  double macro_f1 = 0.0;
  double macro_precision = 0.0;
  double macro_recall = 0.0;
};

// Single-label metrics over classes 0..n_classes-1. A class with no support
// and no predictions contributes zero to every macro average.
ClassificationMetrics classification_metrics(const std::vector<int>& preds,
                                             const std::vector<int>& labels, int n_classes);

struct MannWhitneyResult {
  double u = 0.0;  // min(U1, U2)
  double p = 1.0;  // two-sided, normal approximation with tie correction
};

MannWhitneyResult mann_whitney_u(const std::vector<double>& a, const std::vector<double>& b);

}  // namespace mtlts
