#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "ghostmark/lexicon.hpp"

namespace ghostmark {

enum class Source { Email, SocialMedia, News, Other };

std::string_view to_string(Source s);
std::optional<Source> source_from_string(std::string_view s);

/// One corpus text. `text` is stored normalized (NFC, whitespace-collapsed)
/// and is non-empty.
struct TextRecord {
  std::string id;
  std::string text;
  Variety variety = Variety::AmericanEnglish;
  Source source = Source::Other;
  std::string register_tag;
};

/// Immutable after ingest; share freely across threads.
class Corpus {
 public:
  Corpus() = default;
  Corpus(std::vector<TextRecord> records, std::vector<std::string> provenance);

  const std::vector<TextRecord>& records() const { return records_; }
  const std::vector<std::string>& provenance() const { return provenance_; }
  std::size_t size() const { return records_.size(); }
  const TextRecord* find(std::string_view id) const;

  /// JSONL, one record per line, sorted by id.
  std::string serialize() const;

 private:
  std::vector<TextRecord> records_;
  std::vector<std::string> provenance_;
};

/// Parses a JSONL corpus file: one {"id","text","variety","source",
/// "register"} object per line. Records are normalized, then deduplicated by
/// casefolded normalized text (first occurrence kept). Parse and validation
/// errors carry the 1-based line number.
Corpus ingest(const std::filesystem::path& path);
Corpus parse_corpus(std::string_view jsonl, const std::string& origin);
void save_corpus(const Corpus& corpus, const std::filesystem::path& path);

/// Keeps a non-baseline record iff detect() finds at least one marker of the
/// record's own variety; AmericanEnglish baseline records always pass.
/// Idempotent.
Corpus filter_marked(const Corpus& corpus, const Lexicon& lexicon);

/// Exhaustive, disjoint split by variety. Sizes sum to corpus size.
std::map<Variety, Corpus> partition(const Corpus& corpus);

}  // namespace ghostmark
