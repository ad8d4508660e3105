#pragma once

#include <functional>
#include <string>
#include <vector>

#include "mtlts/corpus.hpp"
#include "mtlts/tape.hpp"

namespace mtlts::testing {

Tweet make_tweet(const std::string& id, const std::string& text, std::int64_t ts = 0);

// Source plus optional flat replies; reply stances cycle support, deny, query,
// comment so stance terms are always exercised.
Thread make_thread(const std::string& event, const std::string& source_id,
                   const std::string& text, int replies = 0,
                   std::int64_t ts = 0);

// Synthetic labeled corpus: n threads, every third verified, first quarter of
// the verified ones in the gold summary. Texts draw from a small pool so
// tf-idf similarities are nondegenerate.
Corpus make_corpus(const std::string& event, int n, std::uint64_t seed);

// Writes a PHEME-layout directory: two events with regular threads plus the
// edge cases (deep reply chain, orphan reaction, reaction file missing from
// structure.json). Returns the root.
fs::path write_pheme_fixture(const fs::path& root);

// Central-difference check of every tensor in the store against analytic
// grads. loss_value must recompute the loss from the current parameter
// values. Returns the largest per-entry relative error; denominators floor at
// 1e-5 so near-zero gradients compare on an absolute scale.
double max_rel_grad_error(ParamStore& params, const GradStore& analytic,
                          const std::function<double()>& loss_value);

}  // namespace mtlts::testing
