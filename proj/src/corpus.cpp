#include "rrg/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>
#include <stdexcept>

#include "rrg/text.hpp"

namespace rrg {

const char* split_name(Split s) {
  switch (s) {
    case Split::train: return "train";
    case Split::test: return "test";
    case Split::validation: return "validation";
  }
  return "?";
}

Split parse_split(std::string_view name) {
  if (name == "train") return Split::train;
  if (name == "test") return Split::test;
  if (name == "validation") return Split::validation;
  throw std::runtime_error("unknown split '" + std::string(name) +
                           "' (expected train, test or validation)");
}

std::vector<const StudyRecord*> CorpusManifest::split_records(Split s) const {
  std::vector<const StudyRecord*> out;
  for (const auto& r : records)
    if (r.split == s) out.push_back(&r);
  return out;
}

std::filesystem::path CorpusManifest::image_path(const StudyRecord& r) const {
  return root / r.image_ref;
}

static std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  for (char c : line) {
    if (c == '\t') {
      fields.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  fields.push_back(cur);
  return fields;
}

static const char* kManifestHeader = "study_id\timage_relpath\tsplit\treport_text";

CorpusManifest load_manifest(const std::filesystem::path& root,
                             const std::filesystem::path& manifest_file) {
  std::ifstream in(manifest_file);
  if (!in) {
    throw std::runtime_error("cannot open manifest file: " + manifest_file.string());
  }
  CorpusManifest manifest;
  manifest.root = root;

  std::string line;
  std::size_t line_no = 0;
  std::set<std::string> seen_ids;
  bool header_seen = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line_no == 1) {
      if (line != kManifestHeader) {
        throw std::runtime_error(manifest_file.string() +
                                 ": line 1: expected header '" +
                                 std::string(kManifestHeader) + "'");
      }
      header_seen = true;
      continue;
    }
    if (line.empty()) continue;
    auto fields = split_fields(line);
    if (fields.size() != 4) {
      throw std::runtime_error(manifest_file.string() + ": line " +
                               std::to_string(line_no) + ": expected 4 fields, got " +
                               std::to_string(fields.size()));
    }
    StudyRecord rec;
    rec.study_id = fields[0];
    rec.image_ref = fields[1];
    try {
      rec.split = parse_split(fields[2]);
    } catch (const std::exception& e) {
      throw std::runtime_error(manifest_file.string() + ": line " +
                               std::to_string(line_no) + ": " + e.what());
    }
    rec.report_text = unescape_tsv(fields[3]);
    if (rec.study_id.empty()) {
      throw std::runtime_error(manifest_file.string() + ": line " +
                               std::to_string(line_no) + ": empty study_id");
    }
    if (!seen_ids.insert(rec.study_id).second) {
      throw std::runtime_error("duplicate study_id '" + rec.study_id + "' at line " +
                               std::to_string(line_no));
    }
    manifest.records.push_back(std::move(rec));
  }
  if (!header_seen || manifest.records.empty()) {
    throw std::runtime_error(manifest_file.string() + ": no records");
  }
  return manifest;
}

void save_manifest(const CorpusManifest& manifest,
                   const std::filesystem::path& manifest_file) {
  std::ofstream out(manifest_file);
  if (!out) {
    throw std::runtime_error("cannot write manifest file: " + manifest_file.string());
  }
  out << kManifestHeader << '\n';
  for (const auto& r : manifest.records) {
    out << r.study_id << '\t' << r.image_ref << '\t' << split_name(r.split) << '\t'
        << escape_tsv(r.report_text) << '\n';
  }
}

static bool is_blank(const std::string& s) {
  for (unsigned char c : s)
    if (c >= 0x80 || !std::isspace(c)) return false;
  return true;
}

ValidationReport validate_manifest(const CorpusManifest& manifest) {
  ValidationReport rep;
  rep.total = manifest.records.size();
  rep.split_counts = {{Split::train, 0}, {Split::test, 0}, {Split::validation, 0}};
  for (const auto& r : manifest.records) {
    rep.split_counts[r.split]++;
    if (is_blank(r.report_text)) rep.empty_reports.push_back(r.study_id);
    std::error_code ec;
    auto path = manifest.image_path(r);
    if (!std::filesystem::is_regular_file(path, ec)) {
      rep.missing_files.push_back(path.string());
    }
  }
  if (rep.total > 0) {
    const double expected[3] = {70.0, 20.0, 10.0};
    const Split order[3] = {Split::train, Split::test, Split::validation};
    rep.split_ratio_ok = true;
    for (int i = 0; i < 3; ++i) {
      double pct = 100.0 * static_cast<double>(rep.split_counts[order[i]]) /
                   static_cast<double>(rep.total);
      if (std::abs(pct - expected[i]) > 2.0) rep.split_ratio_ok = false;
    }
  }
  return rep;
}

std::string ValidationReport::to_text() const {
  std::ostringstream os;
  os << "records: " << total << "\n";
  for (auto s : {Split::train, Split::test, Split::validation}) {
    auto it = split_counts.find(s);
    os << "  " << split_name(s) << ": " << (it == split_counts.end() ? 0 : it->second)
       << "\n";
  }
  os << "split ratio 70:20:10 (+-2pp): " << (split_ratio_ok ? "pass" : "fail") << "\n";
  os << "missing image files: " << missing_files.size() << "\n";
  for (const auto& f : missing_files) os << "  " << f << "\n";
  os << "empty reports: " << empty_reports.size() << "\n";
  for (const auto& id : empty_reports) os << "  " << id << "\n";
  return os.str();
}

// Linear-interpolation quantile on sorted data (numpy/pandas default).
static double quantile(const std::vector<std::size_t>& sorted, double p) {
  if (sorted.empty()) return 0;
  const double h = p * static_cast<double>(sorted.size() - 1);
  const std::size_t lo = static_cast<std::size_t>(h);
  const double frac = h - static_cast<double>(lo);
  double v = static_cast<double>(sorted[lo]);
  if (lo + 1 < sorted.size()) {
    v += frac * (static_cast<double>(sorted[lo + 1]) - v);
  }
  return v;
}

static std::vector<const StudyRecord*> select_records(const CorpusManifest& manifest,
                                                      const std::string& split_sel) {
  std::vector<const StudyRecord*> recs;
  if (split_sel == "all") {
    for (const auto& r : manifest.records) recs.push_back(&r);
  } else {
    recs = manifest.split_records(parse_split(split_sel));
  }
  return recs;
}

ReportLengthStats report_length_stats(const CorpusManifest& manifest,
                                      const std::string& split_sel, CountRule rule,
                                      StdMode std_mode) {
  auto recs = select_records(manifest, split_sel);
  if (recs.empty()) {
    throw std::runtime_error("split '" + split_sel + "' has no records");
  }
  std::vector<std::size_t> counts;
  counts.reserve(recs.size());
  for (const auto* r : recs) {
    const auto words = rule == CountRule::words ? tokenize_words(r->report_text)
                                                : split_whitespace(r->report_text);
    counts.push_back(words.size());
  }
  std::sort(counts.begin(), counts.end());

  ReportLengthStats st;
  st.count = counts.size();
  st.min = counts.front();
  st.max = counts.back();
  double sum = 0;
  for (auto c : counts) sum += static_cast<double>(c);
  st.mean = sum / static_cast<double>(st.count);
  double sq = 0;
  for (auto c : counts) {
    const double d = static_cast<double>(c) - st.mean;
    sq += d * d;
  }
  if (st.count > 1) {
    const double denom = std_mode == StdMode::sample
                             ? static_cast<double>(st.count - 1)
                             : static_cast<double>(st.count);
    st.stddev = std::sqrt(sq / denom);
  }
  st.q25 = quantile(counts, 0.25);
  st.q50 = quantile(counts, 0.50);
  st.q75 = quantile(counts, 0.75);
  return st;
}

std::string strip_stopwords(const std::string& text,
                            const std::set<std::string>& stopwords) {
  const auto tokens = split_whitespace(text);
  std::vector<std::string> kept;
  for (const auto& tok : tokens) {
    const auto norm = tokenize_words(tok);
    const bool drop = norm.size() == 1 && stopwords.count(norm[0]) > 0;
    if (!drop) kept.push_back(tok);
  }
  return join(kept, " ");
}

std::size_t WordFrequencyTable::total() const {
  std::size_t n = 0;
  for (const auto& [w, c] : entries) n += c;
  return n;
}

WordFrequencyTable word_frequencies(const CorpusManifest& manifest,
                                    const std::string& split_sel,
                                    bool remove_stopwords,
                                    const std::set<std::string>& stopwords) {
  auto recs = select_records(manifest, split_sel);
  if (recs.empty()) {
    throw std::runtime_error("split '" + split_sel + "' has no records");
  }
  WordFrequencyTable table;
  table.stopwords_removed = remove_stopwords;
  for (const auto* r : recs) {
    for (auto& w : tokenize_words(r->report_text)) {
      if (remove_stopwords && stopwords.count(w)) continue;
      table.entries[w]++;
    }
  }
  return table;
}

std::set<std::string> load_stopwords(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw std::runtime_error("cannot open stopword file: " + file.string());
  std::set<std::string> words;
  std::string line;
  while (std::getline(in, line)) {
    for (auto& w : tokenize_words(line)) words.insert(w);
  }
  return words;
}

std::string stats_csv(const std::vector<std::pair<std::string, ReportLengthStats>>& rows) {
  std::ostringstream os;
  os << "split,count,mean,std,min,max,q25,q50,q75\n";
  for (const auto& [name, st] : rows) {
    os << name << ',' << st.count << ',' << format_double(st.mean) << ','
       << format_double(st.stddev) << ',' << st.min << ',' << st.max << ','
       << format_double(st.q25) << ',' << format_double(st.q50) << ','
       << format_double(st.q75) << '\n';
  }
  return os.str();
}

std::string stats_table(const std::vector<std::pair<std::string, ReportLengthStats>>& rows) {
  std::ostringstream os;
  os << std::left << std::setw(12) << "Split" << std::right << std::setw(8) << "Count"
     << std::setw(10) << "Mean" << std::setw(10) << "Std" << std::setw(7) << "Min"
     << std::setw(7) << "Max" << std::setw(8) << "25%" << std::setw(8) << "50%"
     << std::setw(8) << "75%" << '\n';
  os << std::fixed << std::setprecision(3);
  for (const auto& [name, st] : rows) {
    os << std::left << std::setw(12) << name << std::right << std::setw(8) << st.count
       << std::setw(10) << st.mean << std::setw(10) << st.stddev << std::setw(7)
       << st.min << std::setw(7) << st.max << std::setw(8) << st.q25 << std::setw(8)
       << st.q50 << std::setw(8) << st.q75 << '\n';
  }
  return os.str();
}

std::string frequency_csv(const WordFrequencyTable& table, std::size_t top_n) {
  std::vector<std::pair<std::string, std::size_t>> sorted(table.entries.begin(),
                                                          table.entries.end());
  std::stable_sort(sorted.begin(), sorted.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  if (top_n > 0 && sorted.size() > top_n) sorted.resize(top_n);
  std::ostringstream os;
  os << "word,count\n";
  for (const auto& [w, c] : sorted) os << w << ',' << c << '\n';
  return os.str();
}

}  // namespace rrg
