#pragma once

#include <string>
#include <vector>

namespace mtlts {

inline constexpr const char* kUrlToken = "<url>";
inline constexpr const char* kUserToken = "<user>";
inline constexpr const char* kUnkToken = "<unk>";

struct TokenSequence {
  std::vector<std::string> tokens;
  std::string source_id;
};

// Lowercase, URL -> <url>, @mention -> <user>, leading/trailing punctuation
// split off as separate tokens. Sentinel tokens are atomic, so the pass is
// idempotent. Empty (after trimming) input is an error.
TokenSequence tokenize(const std::string& text, const std::string& source_id = "");

std::string join_tokens(const std::vector<std::string>& tokens);

// Whitespace token count of the raw text, before any normalization.
int count_words(const std::string& text);

}  // namespace mtlts
