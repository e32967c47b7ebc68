#include "ghostmark/corpus.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "ghostmark/detector.hpp"
#include "ghostmark/errors.hpp"
#include "ghostmark/text_norm.hpp"

namespace ghostmark {

namespace {

using nlohmann::json;

std::string line_prefix(const std::string& origin, std::size_t line_no) {
  return origin + ":" + std::to_string(line_no) + ": ";
}

}  // namespace

std::string_view to_string(Source s) {
  switch (s) {
    case Source::Email: return "Email";
    case Source::SocialMedia: return "SocialMedia";
    case Source::News: return "News";
    case Source::Other: return "Other";
  }
  return "?";
}

std::optional<Source> source_from_string(std::string_view s) {
  if (s == "Email") return Source::Email;
  if (s == "SocialMedia") return Source::SocialMedia;
  if (s == "News") return Source::News;
  if (s == "Other") return Source::Other;
  return std::nullopt;
}

Corpus::Corpus(std::vector<TextRecord> records, std::vector<std::string> provenance)
    : records_(std::move(records)), provenance_(std::move(provenance)) {}

const TextRecord* Corpus::find(std::string_view id) const {
  for (const TextRecord& r : records_) {
    if (r.id == id) return &r;
  }
  return nullptr;
}

std::string Corpus::serialize() const {
  std::vector<const TextRecord*> sorted;
  sorted.reserve(records_.size());
  for (const TextRecord& r : records_) sorted.push_back(&r);
  std::sort(sorted.begin(), sorted.end(),
            [](const TextRecord* a, const TextRecord* b) { return a->id < b->id; });

  std::string out;
  for (const TextRecord* r : sorted) {
    json line = {
        {"id", r->id},
        {"text", r->text},
        {"variety", to_string(r->variety)},
        {"source", to_string(r->source)},
        {"register", r->register_tag},
    };
    out += line.dump();
    out += '\n';
  }
  return out;
}

Corpus parse_corpus(std::string_view jsonl, const std::string& origin) {
  std::vector<TextRecord> records;
  std::set<std::string> seen_ids;
  std::set<std::string> seen_texts;  // dedup key: casefolded normalized text

  std::istringstream stream{std::string(jsonl)};
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(stream, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;

    json entry;
    try {
      entry = json::parse(line);
    } catch (const json::parse_error& e) {
      throw ParseError(line_prefix(origin, line_no) + e.what());
    }
    if (!entry.is_object()) {
      throw ParseError(line_prefix(origin, line_no) + "record must be an object");
    }
    for (const char* field : {"id", "text", "variety", "source", "register"}) {
      if (!entry.contains(field) || !entry[field].is_string()) {
        throw ParseError(line_prefix(origin, line_no) + "missing required field \"" +
                         field + "\"");
      }
    }

    TextRecord r;
    r.id = entry["id"].get<std::string>();
    r.text = normalize_text(entry["text"].get<std::string>());
    if (r.text.empty()) {
      throw ValidationError(line_prefix(origin, line_no) +
                            "text empty after normalization (id \"" + r.id + "\")");
    }
    auto variety = variety_from_string(entry["variety"].get<std::string>());
    if (!variety) {
      throw ParseError(line_prefix(origin, line_no) + "unknown variety \"" +
                       entry["variety"].get<std::string>() + "\"");
    }
    r.variety = *variety;
    auto source = source_from_string(entry["source"].get<std::string>());
    if (!source) {
      throw ParseError(line_prefix(origin, line_no) + "unknown source \"" +
                       entry["source"].get<std::string>() + "\"");
    }
    r.source = *source;
    r.register_tag = entry["register"].get<std::string>();

    if (!seen_texts.insert(normalize_casefold(r.text)).second) {
      continue;  // duplicate text, first occurrence kept
    }
    if (!seen_ids.insert(r.id).second) {
      throw ValidationError(line_prefix(origin, line_no) + "duplicate record id \"" +
                            r.id + "\"");
    }
    records.push_back(std::move(r));
  }
  return Corpus(std::move(records), {origin});
}

Corpus ingest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw ParseError("cannot open corpus file: " + path.string());
  }
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return parse_corpus(buffer.str(), path.string());
}

void save_corpus(const Corpus& corpus, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) {
    throw Error("cannot write corpus file: " + path.string());
  }
  out << corpus.serialize();
}

Corpus filter_marked(const Corpus& corpus, const Lexicon& lexicon) {
  std::vector<TextRecord> kept;
  for (const TextRecord& r : corpus.records()) {
    if (r.variety == Variety::AmericanEnglish) {
      kept.push_back(r);
      continue;
    }
    DetectionResult d = detect(r.text, lexicon, VarietyFilter{{r.variety}});
    if (!d.occurrences.empty()) {
      kept.push_back(r);
    }
  }
  return Corpus(std::move(kept), corpus.provenance());
}

std::map<Variety, Corpus> partition(const Corpus& corpus) {
  std::map<Variety, std::vector<TextRecord>> buckets;
  for (Variety v : {Variety::IndianEnglish, Variety::SingaporeanEnglish,
                    Variety::NigerianEnglish, Variety::AmericanEnglish}) {
    buckets[v] = {};
  }
  for (const TextRecord& r : corpus.records()) {
    buckets[r.variety].push_back(r);
  }
  std::map<Variety, Corpus> out;
  for (auto& [variety, records] : buckets) {
    out.emplace(variety, Corpus(std::move(records), corpus.provenance()));
  }
  return out;
}

}  // namespace ghostmark
