#include "rrg/vocab.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <stdexcept>

#include "rrg/text.hpp"

namespace rrg {

static const char* kSpecials[4] = {"<pad>", "<bos>", "<eos>", "<unk>"};

Vocab::Vocab(std::vector<std::string> tokens) : tokens_(std::move(tokens)) {
  if (tokens_.size() < 4) throw std::invalid_argument("vocab needs the 4 special tokens");
  for (int i = 0; i < 4; ++i) {
    if (tokens_[i] != kSpecials[i]) {
      throw std::invalid_argument("vocab line " + std::to_string(i) + " must be " +
                                  kSpecials[i]);
    }
  }
  for (int i = 0; i < static_cast<int>(tokens_.size()); ++i) {
    if (!ids_.emplace(tokens_[i], i).second) {
      throw std::invalid_argument("duplicate vocab token '" + tokens_[i] + "'");
    }
  }
}

int Vocab::id_of(const std::string& token) const {
  auto it = ids_.find(token);
  return it == ids_.end() ? kUnk : it->second;
}

const std::string& Vocab::token_of(int id) const {
  if (id < 0 || id >= size()) {
    throw std::out_of_range("token id " + std::to_string(id) + " out of range");
  }
  return tokens_[static_cast<std::size_t>(id)];
}

void Vocab::save(const std::filesystem::path& file) const {
  std::ofstream out(file);
  if (!out) throw std::runtime_error("cannot write vocab file: " + file.string());
  for (const auto& t : tokens_) out << t << '\n';
}

Vocab Vocab::load(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw std::runtime_error("cannot open vocab file: " + file.string());
  std::vector<std::string> tokens;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    tokens.push_back(line);
  }
  return Vocab(std::move(tokens));
}

Vocab build_vocab(const CorpusManifest& manifest, int min_freq) {
  if (min_freq < 1) throw std::invalid_argument("build_vocab: min_freq must be >= 1");
  auto train = manifest.split_records(Split::train);
  if (train.empty()) throw std::runtime_error("build_vocab: empty training split");

  std::map<std::string, std::size_t> freq;
  for (const auto* r : train) {
    for (auto& w : tokenize_words(r->report_text)) freq[w]++;
  }
  std::vector<std::pair<std::string, std::size_t>> kept;
  for (auto& [w, c] : freq) {
    if (c >= static_cast<std::size_t>(min_freq)) kept.emplace_back(w, c);
  }
  std::sort(kept.begin(), kept.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });

  std::vector<std::string> tokens(std::begin(kSpecials), std::end(kSpecials));
  for (auto& [w, c] : kept) tokens.push_back(w);
  return Vocab(std::move(tokens));
}

TokenSequence encode(const std::string& text, const Vocab& vocab, int max_len) {
  if (max_len < 3) throw std::invalid_argument("encode: max_len must be >= 3");
  const auto words = tokenize_words(text);
  const int content = std::min(static_cast<int>(words.size()), max_len - 2);

  TokenSequence seq;
  seq.ids.assign(static_cast<std::size_t>(max_len), Vocab::kPad);
  seq.ids[0] = Vocab::kBos;
  for (int i = 0; i < content; ++i) seq.ids[static_cast<std::size_t>(i + 1)] = vocab.id_of(words[static_cast<std::size_t>(i)]);
  seq.ids[static_cast<std::size_t>(content + 1)] = Vocab::kEos;
  seq.true_length = content + 2;
  return seq;
}

std::string decode(const std::vector<int>& ids, const Vocab& vocab) {
  std::vector<std::string> words;
  for (int id : ids) {
    if (id == Vocab::kPad || id == Vocab::kBos || id == Vocab::kEos) continue;
    words.push_back(id >= 0 && id < vocab.size() ? vocab.token_of(id)
                                                 : vocab.token_of(Vocab::kUnk));
  }
  return join(words, " ");
}

}  // namespace rrg
