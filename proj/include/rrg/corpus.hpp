#pragma once

#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <vector>

namespace rrg {

enum class Split { train, test, validation };

const char* split_name(Split s);
Split parse_split(std::string_view name);  // throws on unknown name

// One image-report pair with its split assignment.
struct StudyRecord {
  std::string study_id;
  std::string image_ref;  // path relative to the manifest root
  std::string report_text;
  Split split = Split::train;
};

struct CorpusManifest {
  std::filesystem::path root;
  std::vector<StudyRecord> records;

  std::vector<const StudyRecord*> split_records(Split s) const;
  std::filesystem::path image_path(const StudyRecord& r) const;
};

struct ValidationReport {
  std::size_t total = 0;
  std::map<Split, std::size_t> split_counts;
  std::vector<std::string> missing_files;   // image paths that do not resolve
  std::vector<std::string> empty_reports;   // study ids with blank report text
  bool split_ratio_ok = false;              // within +-2pp of 70:20:10
  bool ok() const { return missing_files.empty() && empty_reports.empty(); }
  std::string to_text() const;
};

struct ReportLengthStats {
  std::size_t count = 0;
  double mean = 0, stddev = 0;
  std::size_t min = 0, max = 0;
  double q25 = 0, q50 = 0, q75 = 0;
};

struct WordFrequencyTable {
  std::map<std::string, std::size_t> entries;
  bool stopwords_removed = false;
  std::size_t total() const;
};

// Word-count rule for report-length statistics. `words` is the shared
// lowercase/punctuation-stripped tokenization; `whitespace` counts raw
// whitespace-separated fields.
enum class CountRule { words, whitespace };
enum class StdMode { sample, population };

// Manifest file format: UTF-8, first line is a header, then one record per
// line as study_id<TAB>image_relpath<TAB>split<TAB>report_text with
// tabs/newlines/backslashes in report_text escaped \t \n \\.
CorpusManifest load_manifest(const std::filesystem::path& root,
                             const std::filesystem::path& manifest_file);
void save_manifest(const CorpusManifest& manifest,
                   const std::filesystem::path& manifest_file);

ValidationReport validate_manifest(const CorpusManifest& manifest);

// split_sel is a split name or "all".
ReportLengthStats report_length_stats(const CorpusManifest& manifest,
                                      const std::string& split_sel,
                                      CountRule rule = CountRule::words,
                                      StdMode std_mode = StdMode::sample);

std::string strip_stopwords(const std::string& text,
                            const std::set<std::string>& stopwords);

WordFrequencyTable word_frequencies(const CorpusManifest& manifest,
                                    const std::string& split_sel,
                                    bool remove_stopwords,
                                    const std::set<std::string>& stopwords);

// Versioned English stopword list shipped with the repo.
extern const char* const kStopwordsVersion;
const std::set<std::string>& english_stopwords();
std::set<std::string> load_stopwords(const std::filesystem::path& file);

std::string stats_csv(const std::vector<std::pair<std::string, ReportLengthStats>>& rows);
std::string stats_table(const std::vector<std::pair<std::string, ReportLengthStats>>& rows);
std::string frequency_csv(const WordFrequencyTable& table, std::size_t top_n = 0);

}  // namespace rrg
