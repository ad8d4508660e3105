#pragma once

#include <string>
#include <vector>

#include "mtlts/common.hpp"
#include "mtlts/corpus.hpp"
#include "mtlts/inference.hpp"
#include "mtlts/training.hpp"

namespace mtlts {

// One event's summary quality plus the verifier on the held-out threads.
// loo-run averages rows with equal weight per event.
struct MetricsRow {
  std::string event;
  double v_ratio = 0.0;
  double rouge1_f1 = 0.0;
  double accuracy = 0.0;
  double macro_f1 = 0.0;
  int chosen = 0;
  int total_words = 0;
};

std::vector<Corpus> load_cache(const fs::path& path);

// Provenance record written next to every command's outputs: the command, its
// effective config, the seed, and a content hash of the inputs.
void write_manifest(const fs::path& out_dir, const std::string& command,
                    const KeyValueConfig& config, std::uint64_t seed,
                    const std::vector<fs::path>& inputs);

// PHEME tree to validated JSON cache, plus a per-event statistics table on
// stdout. Re-running on unchanged input reproduces the cache byte for byte.
void cmd_ingest(const fs::path& data_dir, const fs::path& out_path);

// Trains one leave-one-out split from the cache. Writes checkpoint.mtlc,
// train_log.jsonl, report.json, and manifest.json under out_dir.
TrainReport cmd_train(const KeyValueConfig& config, const fs::path& cache_path,
                      const std::string& test_event, const fs::path& out_dir);

// Runs a trained checkpoint over one event and writes summary.txt,
// selection.json, metrics.json. Refuses events seen during training.
MetricsRow cmd_summarize(const fs::path& ckpt_path, const fs::path& cache_path,
                         const std::string& event, double kappa, int max_words,
                         SolverKind solver, const fs::path& out_dir);

// The full protocol: train and summarize once per event, then aggregate.
// report.json holds per-event rows plus an unweighted-mean overall row;
// split failures are recorded and mark the aggregate incomplete.
void cmd_loo_run(const KeyValueConfig& config, const fs::path& cache_path,
                 const fs::path& out_dir);

}  // namespace mtlts
