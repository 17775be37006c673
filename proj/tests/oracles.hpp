#pragma once

// Brute-force oracles used by tests only. They re-derive expected values
// through routes independent of the library implementation.

#include <algorithm>
#include <map>
#include <string>
#include <vector>

namespace oracle {

using TokenList = std::vector<std::string>;

// LCS by exhaustive subsequence search (lists up to ~12 tokens): enumerate
// every subsequence of `a` from longest down and test it against `b`.
inline bool is_subsequence(const TokenList& sub, const TokenList& b) {
  std::size_t at = 0;
  for (const auto& tok : sub) {
    while (at < b.size() && b[at] != tok) ++at;
    if (at == b.size()) return false;
    ++at;
  }
  return true;
}

inline int lcs_brute(const TokenList& a, const TokenList& b) {
  const std::size_t n = a.size();
  for (std::size_t len = n; len > 0; --len) {
    // bitmask enumeration of subsequences with popcount == len
    for (std::size_t mask = 0; mask < (std::size_t{1} << n); ++mask) {
      if (static_cast<std::size_t>(__builtin_popcountll(mask)) != len) continue;
      TokenList sub;
      for (std::size_t i = 0; i < n; ++i) {
        if (mask & (std::size_t{1} << i)) sub.push_back(a[i]);
      }
      if (is_subsequence(sub, b)) return static_cast<int>(len);
    }
  }
  return 0;
}

// Direct multiset counting of shared n-grams (joined with a separator that
// cannot collide because oracle tokens are alphanumeric).
inline std::map<std::string, int> ngrams_brute(const TokenList& toks, int n) {
  std::map<std::string, int> out;
  if (static_cast<int>(toks.size()) < n) return out;
  for (std::size_t i = 0; i + static_cast<std::size_t>(n) <= toks.size(); ++i) {
    std::string key;
    for (int k = 0; k < n; ++k) key += toks[i + static_cast<std::size_t>(k)] + "|";
    out[key]++;
  }
  return out;
}

inline int clipped_matches_brute(const TokenList& cand, const TokenList& ref, int n) {
  const auto c = ngrams_brute(cand, n);
  const auto r = ngrams_brute(ref, n);
  int match = 0;
  for (const auto& [g, cnt] : c) {
    auto it = r.find(g);
    if (it != r.end()) match += std::min(cnt, it->second);
  }
  return match;
}

inline int total_ngrams_brute(const TokenList& toks, int n) {
  int total = 0;
  for (const auto& [g, cnt] : ngrams_brute(toks, n)) total += cnt;
  return total;
}

}  // namespace oracle
