#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace rrg {

using TokenList = std::vector<std::string>;

struct PRF {
  double precision = 0, recall = 0, f1 = 0;
};

// Row of the comparison tables: ROUGE-1..4 F1, ROUGE-L F1, corpus BLEU and
// BERTScore precision/recall/F1, all in [0,1].
struct MetricRow {
  double rouge1 = 0, rouge2 = 0, rouge3 = 0, rouge4 = 0, rouge_l = 0;
  double bleu = 0;
  double bert_precision = 0, bert_recall = 0, bert_f1 = 0;
};

struct MetricReport {
  std::vector<std::pair<std::string, MetricRow>> rows;  // model name -> scores
  std::string rouge_bleu_csv() const;
  std::string bertscore_csv() const;
  std::string rouge_bleu_table() const;
  std::string bertscore_table() const;
};

// Token list -> one fixed-dimension vector per token.
class Embedder {
 public:
  virtual ~Embedder() = default;
  virtual int dim() const = 0;
  virtual Eigen::MatrixXd embed(const TokenList& tokens) const = 0;
};

// Deterministic test backend: each token hashes to a fixed nonnegative unit
// vector, so identical tokens match with cosine exactly 1 and similarities
// stay in [0,1].
class HashEmbedder : public Embedder {
 public:
  explicit HashEmbedder(int dim = 64, std::uint64_t seed = 0x5eed);
  int dim() const override { return dim_; }
  Eigen::MatrixXd embed(const TokenList& tokens) const override;

 private:
  int dim_;
  std::uint64_t seed_;
};

std::map<std::string, std::size_t> ngram_multiset(const TokenList& tokens, int n);

PRF rouge_n(const TokenList& candidate, const TokenList& reference, int n);

int lcs_length(const TokenList& a, const TokenList& b);

PRF rouge_l(const TokenList& candidate, const TokenList& reference);

// Corpus-level BLEU: clipped n-gram counts aggregated over the corpus,
// uniform-weight geometric mean for n = 1..max_n, brevity penalty
// exp(1 - r/c) when c <= r. Zero precisions are floored at 1e-9.
double bleu(const std::vector<TokenList>& candidates,
            const std::vector<TokenList>& references, int max_n = 4);

PRF bertscore(const TokenList& candidate, const TokenList& reference,
              const Embedder& embedder);

// Sentence-level ROUGE and BERTScore macro-averaged over ids; BLEU corpus
// level. Texts are tokenized with the shared word rule. A pair whose
// candidate or reference tokenizes to nothing scores zero.
MetricRow evaluate_corpus(const std::map<std::string, std::string>& predictions,
                          const std::map<std::string, std::string>& references,
                          const Embedder& embedder);

}  // namespace rrg
