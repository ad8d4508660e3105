#pragma once

#include <array>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "mtlts/checkpoint.hpp"
#include "mtlts/common.hpp"
#include "mtlts/corpus.hpp"
#include "mtlts/encoder.hpp"
#include "mtlts/summarizer.hpp"
#include "mtlts/verifier.hpp"

namespace mtlts {

enum class TrainMode { kSTLV = 0, kSTLS = 1, kSTLSPlusSTLV = 2, kMTLTS = 3 };
const char* to_string(TrainMode m);
TrainMode train_mode_from_string(const std::string& s);

struct TrainConfig {
  TrainMode mode = TrainMode::kMTLTS;
  double lambda1 = 1.0;
  double lambda2 = 1.0;
  double learning_rate = 1e-4;
  double weight_decay = 0.01;
  int epochs = 10;
  int dl = 20;
  std::uint64_t seed = 7;
  EncoderMode encoder_mode = EncoderMode::kTrainable;
  int d_enc = 768;
  int d_h = 128;
  int d_g = 128;
  int batch_size = 8;
  int threads = 1;     // worker threads for batch forwards; results identical for any value
  bool use_tree = true;
  bool downward_uses_parent_downward = false;
  // Lets gradients of the summarizer loss flow back through Ver_prob instead
  // of treating it as a refreshed constant.
  bool ver_prob_passthrough = false;
  double grad_clip = 5.0;

  // Errors on nonsense, warns when outside the customary ranges.
  void validate() const;
  static TrainConfig from_kv(const KeyValueConfig& kv);
  KeyValueConfig to_kv() const;
};

struct EpochLog {
  int epoch = 0;
  std::optional<double> l_ver;     // training sum after step 1
  std::optional<double> l_summ;    // training sum after step 2
  std::optional<double> l_mtlts;   // l_ver + lambda2 * l_summ
  double val_objective = 0.0;
};

// A two-field mirror of the evaluation module's metrics struct keeps the
// layering one-way (evaluation depends on inference, not on training).
struct ClassificationMetricsLite {
  double accuracy = 0.0;
  double macro_f1 = 0.0;
};

struct TrainReport {
  std::vector<EpochLog> epochs;
  int best_epoch = -1;  // 1-based; the checkpoint carries this epoch's weights
  double best_val_objective = 0.0;
  bool diverged = false;
  ClassificationMetricsLite val_ver;  // at the selected epoch, when a verifier trains
  double val_summ_bce = 0.0;          // at the selected epoch, when a summarizer trains
};

// Trains per config on the split, logging one JSONL record per epoch step to
// log_path (skipped when empty). The returned checkpoint holds the
// best-validation weights. cache is required in frozen encoder mode.
std::pair<Checkpoint, TrainReport> train(const TrainConfig& cfg, const Split& split,
                                         const fs::path& log_path = {},
                                         const EmbeddingCache* cache = nullptr);

struct Prediction {
  std::map<std::string, double> ver_prob;                       // per source id
  std::map<std::string, std::array<double, 4>> stance_dist;     // per reply id
  std::map<std::string, double> summ_prob;                      // per source id
};

// Deterministic forward pass of a trained checkpoint over whole threads.
Prediction predict(const Checkpoint& ckpt, const std::vector<Thread>& threads,
                   const EmbeddingCache* cache = nullptr);

}  // namespace mtlts
