#include "mtlts/tokenize.hpp"

#include <cctype>

#include "mtlts/common.hpp"

namespace mtlts {
namespace {

bool is_sentinel(const std::string& tok) {
  return tok == kUrlToken || tok == kUserToken || tok == kUnkToken;
}

bool is_url(const std::string& tok) {
  return tok.rfind("http://", 0) == 0 || tok.rfind("https://", 0) == 0 ||
         tok.rfind("www.", 0) == 0;
}

bool is_mention(const std::string& tok) {
  if (tok.size() < 2 || tok[0] != '@') return false;
  for (std::size_t i = 1; i < tok.size(); ++i) {
    unsigned char c = static_cast<unsigned char>(tok[i]);
    if (!std::isalnum(c) && c != '_') return false;
  }
  return true;
}

bool is_punct(char ch) {
  return std::ispunct(static_cast<unsigned char>(ch)) != 0;
}

}  // namespace

TokenSequence tokenize(const std::string& text, const std::string& source_id) {
  TokenSequence seq;
  seq.source_id = source_id;
  for (const std::string& raw : split_ws(text)) {
    std::string tok = lower_ascii(raw);
    if (is_sentinel(tok)) {
      seq.tokens.push_back(tok);
      continue;
    }
    if (is_url(tok)) {
      seq.tokens.push_back(kUrlToken);
      continue;
    }
    if (is_mention(tok)) {
      seq.tokens.push_back(kUserToken);
      continue;
    }
    // Trailing punctuation peels before the url/mention test so "@name!" and
    // "@name" agree; the leading "@" or scheme must stay attached for that
    // test to see it.
    std::size_t e = tok.size();
    std::vector<std::string> trail;
    while (e > 0 && is_punct(tok[e - 1])) trail.push_back(std::string(1, tok[--e]));
    std::string head = tok.substr(0, e);
    if (is_url(head)) {
      seq.tokens.push_back(kUrlToken);
    } else if (is_mention(head)) {
      seq.tokens.push_back(kUserToken);
    } else {
      std::size_t b = 0;
      while (b < e && is_punct(tok[b])) seq.tokens.push_back(std::string(1, tok[b++]));
      if (e > b) seq.tokens.push_back(tok.substr(b, e - b));
    }
    for (auto it = trail.rbegin(); it != trail.rend(); ++it) seq.tokens.push_back(std::move(*it));
  }
  if (seq.tokens.empty()) fail("tokenize: text has no tokens");
  return seq;
}

std::string join_tokens(const std::vector<std::string>& tokens) {
  std::string out;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i) out += ' ';
    out += tokens[i];
  }
  return out;
}

int count_words(const std::string& text) {
  return static_cast<int>(split_ws(text).size());
}

}  // namespace mtlts
