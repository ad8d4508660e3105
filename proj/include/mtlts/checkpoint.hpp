#pragma once

#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mtlts/common.hpp"
#include "mtlts/encoder.hpp"
#include "mtlts/tape.hpp"

namespace mtlts {

// Self-describing model snapshot: a JSON header (config echo, vocabulary,
// tensor directory, split provenance) followed by raw little-endian f64
// tensor payloads in directory order.
struct Checkpoint {
  KeyValueConfig config;
  Vocabulary vocab;
  std::vector<std::string> train_events;
  std::string test_event;
  ParamStore params;
};

void save_checkpoint(const fs::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const fs::path& path);

}  // namespace mtlts
