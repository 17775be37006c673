#pragma once

#include <filesystem>
#include <string>
#include <unordered_map>
#include <vector>

#include "rrg/corpus.hpp"

namespace rrg {

// Word-level vocabulary with fixed special ids PAD=0, BOS=1, EOS=2, UNK=3.
class Vocab {
 public:
  static constexpr int kPad = 0;
  static constexpr int kBos = 1;
  static constexpr int kEos = 2;
  static constexpr int kUnk = 3;

  explicit Vocab(std::vector<std::string> tokens);  // tokens[0..3] must be the specials

  int size() const { return static_cast<int>(tokens_.size()); }
  int id_of(const std::string& token) const;  // kUnk when absent
  const std::string& token_of(int id) const;  // throws on out-of-range
  bool contains(const std::string& token) const { return ids_.count(token) > 0; }
  const std::vector<std::string>& tokens() const { return tokens_; }

  // One token per line, line number = id; specials occupy lines 0-3.
  void save(const std::filesystem::path& file) const;
  static Vocab load(const std::filesystem::path& file);

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, int> ids_;
};

// Fixed-length integer encoding of a report. ids[0] is BOS, ids[true_length-1]
// is EOS and everything after is PAD.
struct TokenSequence {
  std::vector<int> ids;
  int true_length = 0;
  int max_len() const { return static_cast<int>(ids.size()); }
};

// Vocabulary over the training split under the shared word tokenization,
// ordered by descending frequency then lexicographically.
Vocab build_vocab(const CorpusManifest& manifest, int min_freq);

TokenSequence encode(const std::string& text, const Vocab& vocab, int max_len);

std::string decode(const std::vector<int>& ids, const Vocab& vocab);

}  // namespace rrg
