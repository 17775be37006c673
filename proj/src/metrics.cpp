#include "rrg/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <numbers>
#include <sstream>
#include <stdexcept>

#include "rrg/text.hpp"

namespace rrg {

static double harmonic_f1(double p, double r) {
  return p + r > 0 ? 2.0 * p * r / (p + r) : 0.0;
}

std::map<std::string, std::size_t> ngram_multiset(const TokenList& tokens, int n) {
  if (n < 1) throw std::invalid_argument("ngram_multiset: n must be >= 1");
  std::map<std::string, std::size_t> grams;
  if (tokens.size() < static_cast<std::size_t>(n)) return grams;
  for (std::size_t i = 0; i + n <= tokens.size(); ++i) {
    std::string key = tokens[i];
    for (int k = 1; k < n; ++k) {
      key.push_back('\x1f');  // unit separator; cannot appear in a token
      key += tokens[i + k];
    }
    grams[key]++;
  }
  return grams;
}

PRF rouge_n(const TokenList& candidate, const TokenList& reference, int n) {
  const auto cand = ngram_multiset(candidate, n);
  const auto ref = ngram_multiset(reference, n);
  std::size_t match = 0, cand_total = 0, ref_total = 0;
  for (const auto& [g, c] : cand) {
    cand_total += c;
    auto it = ref.find(g);
    if (it != ref.end()) match += std::min(c, it->second);
  }
  for (const auto& [g, c] : ref) ref_total += c;
  PRF out;
  out.precision = cand_total ? static_cast<double>(match) / static_cast<double>(cand_total) : 0.0;
  out.recall = ref_total ? static_cast<double>(match) / static_cast<double>(ref_total) : 0.0;
  out.f1 = harmonic_f1(out.precision, out.recall);
  return out;
}

int lcs_length(const TokenList& a, const TokenList& b) {
  const std::size_t n = a.size(), m = b.size();
  if (n == 0 || m == 0) return 0;
  std::vector<int> prev(m + 1, 0), cur(m + 1, 0);
  for (std::size_t i = 1; i <= n; ++i) {
    for (std::size_t j = 1; j <= m; ++j) {
      cur[j] = a[i - 1] == b[j - 1] ? prev[j - 1] + 1 : std::max(prev[j], cur[j - 1]);
    }
    std::swap(prev, cur);
  }
  return prev[m];
}

PRF rouge_l(const TokenList& candidate, const TokenList& reference) {
  PRF out;
  if (candidate.empty() || reference.empty()) return out;
  const double l = lcs_length(candidate, reference);
  out.precision = l / static_cast<double>(candidate.size());
  out.recall = l / static_cast<double>(reference.size());
  out.f1 = harmonic_f1(out.precision, out.recall);
  return out;
}

double bleu(const std::vector<TokenList>& candidates,
            const std::vector<TokenList>& references, int max_n) {
  if (candidates.empty()) throw std::invalid_argument("bleu: empty candidate list");
  if (candidates.size() != references.size()) {
    throw std::invalid_argument("bleu: candidate/reference count mismatch");
  }
  std::size_t cand_len = 0, ref_len = 0;
  std::vector<std::size_t> clipped(max_n + 1, 0), totals(max_n + 1, 0);
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    cand_len += candidates[i].size();
    ref_len += references[i].size();
    for (int n = 1; n <= max_n; ++n) {
      const auto cand = ngram_multiset(candidates[i], n);
      const auto ref = ngram_multiset(references[i], n);
      for (const auto& [g, c] : cand) {
        totals[n] += c;
        auto it = ref.find(g);
        if (it != ref.end()) clipped[n] += std::min(c, it->second);
      }
    }
  }
  if (cand_len == 0) return 0.0;
  constexpr double kFloor = 1e-9;
  double log_sum = 0;
  for (int n = 1; n <= max_n; ++n) {
    double p = totals[n] ? static_cast<double>(clipped[n]) / static_cast<double>(totals[n]) : 0.0;
    log_sum += std::log(std::max(p, kFloor));
  }
  const double geo_mean = std::exp(log_sum / max_n);
  const double bp = cand_len > ref_len ? 1.0
                                       : std::exp(1.0 - static_cast<double>(ref_len) /
                                                            static_cast<double>(cand_len));
  return bp * geo_mean;
}

PRF bertscore(const TokenList& candidate, const TokenList& reference,
              const Embedder& embedder) {
  if (candidate.empty() || reference.empty()) {
    throw std::invalid_argument("bertscore: empty token list");
  }
  Eigen::MatrixXd c = embedder.embed(candidate);
  Eigen::MatrixXd r = embedder.embed(reference);
  for (const auto* m : {&c, &r}) {
    if (!m->allFinite()) throw std::runtime_error("bertscore: non-finite embedding");
    for (Eigen::Index i = 0; i < m->rows(); ++i) {
      if (m->row(i).norm() == 0.0) throw std::runtime_error("bertscore: zero-norm embedding");
    }
  }
  for (Eigen::Index i = 0; i < c.rows(); ++i) c.row(i).normalize();
  for (Eigen::Index i = 0; i < r.rows(); ++i) r.row(i).normalize();
  // Similarities below zero count as no match so scores stay in [0,1]; the
  // upper clamp absorbs round-off on identical vectors.
  const Eigen::MatrixXd sim = (c * r.transpose()).cwiseMax(0.0).cwiseMin(1.0);
  PRF out;
  out.precision = sim.rowwise().maxCoeff().mean();
  out.recall = sim.colwise().maxCoeff().mean();
  out.f1 = harmonic_f1(out.precision, out.recall);
  return out;
}

// -- deterministic test embedder ---------------------------------------------

static std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

HashEmbedder::HashEmbedder(int dim, std::uint64_t seed) : dim_(dim), seed_(seed) {
  if (dim < 1) throw std::invalid_argument("HashEmbedder: dim must be >= 1");
}

Eigen::MatrixXd HashEmbedder::embed(const TokenList& tokens) const {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(tokens.size()), dim_);
  for (std::size_t t = 0; t < tokens.size(); ++t) {
    std::uint64_t h = seed_;
    for (unsigned char ch : tokens[t]) h = splitmix64(h ^ ch);
    double norm_sq = 0;
    for (int d = 0; d < dim_; ++d) {
      h = splitmix64(h);
      // folded-normal component via Box-Muller on two uniform draws
      const double u1 = static_cast<double>(h >> 11) * 0x1.0p-53;
      h = splitmix64(h);
      const double u2 = static_cast<double>(h >> 11) * 0x1.0p-53;
      const double z = std::sqrt(-2.0 * std::log(1.0 - u1)) *
                       std::cos(2.0 * std::numbers::pi * u2);
      const double v = std::abs(z) + 1e-6;
      out(static_cast<Eigen::Index>(t), d) = v;
      norm_sq += v * v;
    }
    out.row(static_cast<Eigen::Index>(t)) /= std::sqrt(norm_sq);
  }
  return out;
}

// -- corpus aggregation -------------------------------------------------------

MetricRow evaluate_corpus(const std::map<std::string, std::string>& predictions,
                          const std::map<std::string, std::string>& references,
                          const Embedder& embedder) {
  if (predictions.size() != references.size() ||
      !std::equal(predictions.begin(), predictions.end(), references.begin(),
                  [](const auto& a, const auto& b) { return a.first == b.first; })) {
    std::ostringstream os;
    os << "evaluate_corpus: id mismatch;";
    for (const auto& [id, _] : predictions)
      if (!references.count(id)) os << " +pred:" << id;
    for (const auto& [id, _] : references)
      if (!predictions.count(id)) os << " +ref:" << id;
    throw std::invalid_argument(os.str());
  }
  if (predictions.empty()) throw std::invalid_argument("evaluate_corpus: empty corpus");

  MetricRow row;
  std::vector<TokenList> cands, refs;
  const double n = static_cast<double>(predictions.size());
  for (const auto& [id, pred_text] : predictions) {
    TokenList cand = tokenize_words(pred_text);
    TokenList ref = tokenize_words(references.at(id));
    if (!cand.empty() && !ref.empty()) {
      row.rouge1 += rouge_n(cand, ref, 1).f1;
      row.rouge2 += rouge_n(cand, ref, 2).f1;
      row.rouge3 += rouge_n(cand, ref, 3).f1;
      row.rouge4 += rouge_n(cand, ref, 4).f1;
      row.rouge_l += rouge_l(cand, ref).f1;
      const PRF bert = bertscore(cand, ref, embedder);
      row.bert_precision += bert.precision;
      row.bert_recall += bert.recall;
      row.bert_f1 += bert.f1;
    }
    cands.push_back(std::move(cand));
    refs.push_back(std::move(ref));
  }
  row.rouge1 /= n;
  row.rouge2 /= n;
  row.rouge3 /= n;
  row.rouge4 /= n;
  row.rouge_l /= n;
  row.bert_precision /= n;
  row.bert_recall /= n;
  row.bert_f1 /= n;
  row.bleu = bleu(cands, refs);
  return row;
}

// -- table emission -----------------------------------------------------------

// Column headers match the comparison tables verbatim.
static const char* kRougeBleuHeader[] = {"Model",     "ROUGE1 F1", "ROUGE2 F1",
                                         "ROUGE3 F1", "ROUGE4 F1", "ROUGEL F1",
                                         "BLEU"};
static const char* kBertHeader[] = {"Model", "BERTScore Precision", "BERTScore Recall",
                                    "BERTScore F1"};

std::string MetricReport::rouge_bleu_csv() const {
  std::ostringstream os;
  for (int i = 0; i < 7; ++i) os << (i ? "," : "") << kRougeBleuHeader[i];
  os << '\n';
  for (const auto& [name, r] : rows) {
    os << name << ',' << format_double(r.rouge1) << ',' << format_double(r.rouge2)
       << ',' << format_double(r.rouge3) << ',' << format_double(r.rouge4) << ','
       << format_double(r.rouge_l) << ',' << format_double(r.bleu) << '\n';
  }
  return os.str();
}

std::string MetricReport::bertscore_csv() const {
  std::ostringstream os;
  for (int i = 0; i < 4; ++i) os << (i ? "," : "") << kBertHeader[i];
  os << '\n';
  for (const auto& [name, r] : rows) {
    os << name << ',' << format_double(r.bert_precision) << ','
       << format_double(r.bert_recall) << ',' << format_double(r.bert_f1) << '\n';
  }
  return os.str();
}

static std::string aligned_table(const std::vector<std::vector<std::string>>& cells) {
  std::vector<std::size_t> width;
  for (const auto& row : cells) {
    if (width.size() < row.size()) width.resize(row.size(), 0);
    for (std::size_t i = 0; i < row.size(); ++i) width[i] = std::max(width[i], row[i].size());
  }
  std::ostringstream os;
  for (const auto& row : cells) {
    for (std::size_t i = 0; i < row.size(); ++i) {
      if (i) os << "  ";
      os << (i ? std::right : std::left) << std::setw(static_cast<int>(width[i])) << row[i];
    }
    os << '\n';
  }
  return os.str();
}

static std::string fmt4(double v) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(4) << v;
  return os.str();
}

std::string MetricReport::rouge_bleu_table() const {
  std::vector<std::vector<std::string>> cells;
  cells.emplace_back(std::begin(kRougeBleuHeader), std::end(kRougeBleuHeader));
  for (const auto& [name, r] : rows) {
    cells.push_back({name, fmt4(r.rouge1), fmt4(r.rouge2), fmt4(r.rouge3),
                     fmt4(r.rouge4), fmt4(r.rouge_l), fmt4(r.bleu)});
  }
  return aligned_table(cells);
}

std::string MetricReport::bertscore_table() const {
  std::vector<std::vector<std::string>> cells;
  cells.emplace_back(std::begin(kBertHeader), std::end(kBertHeader));
  for (const auto& [name, r] : rows) {
    cells.push_back({name, fmt4(r.bert_precision), fmt4(r.bert_recall), fmt4(r.bert_f1)});
  }
  return aligned_table(cells);
}

}  // namespace rrg
