#include "ghostmark/lexicon.hpp"

#include <fstream>
#include <set>
#include <sstream>
#include <utility>

#include <nlohmann/json.hpp>

#include "ghostmark/errors.hpp"
#include "ghostmark/text_norm.hpp"

namespace ghostmark {

namespace {

using nlohmann::json;

std::size_t variety_index(Variety v) {
  return static_cast<std::size_t>(v);
}

std::size_t category_index(Category c) {
  return static_cast<std::size_t>(c);
}

void reject_unknown_fields(const json& object, const std::set<std::string>& allowed,
                           const std::string& where) {
  for (const auto& [key, _] : object.items()) {
    if (!allowed.contains(key)) {
      throw ParseError("unknown field \"" + key + "\" in " + where);
    }
  }
}

}  // namespace

bool is_marker_variety(Variety v) {
  return v != Variety::AmericanEnglish;
}

std::string_view to_string(Variety v) {
  switch (v) {
    case Variety::IndianEnglish: return "IndianEnglish";
    case Variety::SingaporeanEnglish: return "SingaporeanEnglish";
    case Variety::NigerianEnglish: return "NigerianEnglish";
    case Variety::AmericanEnglish: return "AmericanEnglish";
  }
  return "?";
}

std::string_view to_string(Category c) {
  switch (c) {
    case Category::Lexical: return "Lexical";
    case Category::Pragmatic: return "Pragmatic";
    case Category::Syntactic: return "Syntactic";
  }
  return "?";
}

std::optional<Variety> variety_from_string(std::string_view s) {
  if (s == "IndianEnglish") return Variety::IndianEnglish;
  if (s == "SingaporeanEnglish") return Variety::SingaporeanEnglish;
  if (s == "NigerianEnglish") return Variety::NigerianEnglish;
  if (s == "AmericanEnglish") return Variety::AmericanEnglish;
  return std::nullopt;
}

std::optional<Category> category_from_string(std::string_view s) {
  if (s == "Lexical") return Category::Lexical;
  if (s == "Pragmatic") return Category::Pragmatic;
  if (s == "Syntactic") return Category::Syntactic;
  return std::nullopt;
}

long& Tally::at(Variety v, Category c) {
  return counts_[variety_index(v)][category_index(c)];
}

long Tally::at(Variety v, Category c) const {
  return counts_[variety_index(v)][category_index(c)];
}

long Tally::variety_total(Variety v) const {
  long sum = 0;
  for (Category c : kAllCategories) sum += at(v, c);
  return sum;
}

long Tally::category_total(Category c) const {
  long sum = 0;
  for (Variety v : kMarkerVarieties) sum += at(v, c);
  return sum;
}

long Tally::total() const {
  long sum = 0;
  for (Variety v : kMarkerVarieties) sum += variety_total(v);
  return sum;
}

Tally reference_tally() {
  Tally t;
  t.at(Variety::IndianEnglish, Category::Lexical) = 18;
  t.at(Variety::IndianEnglish, Category::Pragmatic) = 16;
  t.at(Variety::IndianEnglish, Category::Syntactic) = 18;
  t.at(Variety::SingaporeanEnglish, Category::Lexical) = 16;
  t.at(Variety::SingaporeanEnglish, Category::Pragmatic) = 9;
  t.at(Variety::SingaporeanEnglish, Category::Syntactic) = 7;
  t.at(Variety::NigerianEnglish, Category::Lexical) = 10;
  t.at(Variety::NigerianEnglish, Category::Pragmatic) = 8;
  t.at(Variety::NigerianEnglish, Category::Syntactic) = 6;
  return t;
}

Lexicon Lexicon::from_markers(std::vector<Marker> markers, std::string version) {
  std::set<std::string> seen_ids;
  std::set<std::pair<std::string, Variety>> seen_patterns;

  for (Marker& m : markers) {
    if (m.id.empty()) {
      throw ValidationError("marker with empty id");
    }
    if (!is_marker_variety(m.variety)) {
      throw ValidationError("marker \"" + m.id + "\": variety " +
                            std::string(to_string(m.variety)) +
                            " cannot carry markers");
    }
    m.pattern = normalize_text(m.pattern);
    if (m.pattern.empty()) {
      throw ValidationError("marker \"" + m.id + "\": empty pattern");
    }
    if (!seen_ids.insert(m.id).second) {
      throw ValidationError("duplicate marker id \"" + m.id + "\"");
    }
    std::string key = normalize_casefold(m.pattern);
    if (!seen_patterns.insert({key, m.variety}).second) {
      throw ValidationError("marker \"" + m.id + "\": duplicate (pattern, variety) \"" +
                            m.pattern + "\"");
    }
    for (std::string& eq : m.standard_equivalents) {
      eq = normalize_text(eq);
      if (eq.empty()) {
        throw ValidationError("marker \"" + m.id + "\": empty standard equivalent");
      }
      if (normalize_casefold(eq) == key) {
        throw ValidationError("marker \"" + m.id +
                              "\": standard_equivalents contains the pattern itself");
      }
    }
  }

  Lexicon lexicon;
  lexicon.markers_ = std::move(markers);
  lexicon.version_ = std::move(version);
  for (const Marker& m : lexicon.markers_) {
    ++lexicon.tally_.at(m.variety, m.category);
  }
  return lexicon;
}

const Marker* Lexicon::find(std::string_view id) const {
  for (const Marker& m : markers_) {
    if (m.id == id) return &m;
  }
  return nullptr;
}

std::string Lexicon::serialize() const {
  json markers = json::array();
  for (const Marker& m : markers_) {
    markers.push_back({
        {"id", m.id},
        {"pattern", m.pattern},
        {"variety", to_string(m.variety)},
        {"category", to_string(m.category)},
        {"standard_equivalents", m.standard_equivalents},
        {"notes", m.notes},
    });
  }
  json doc = {{"version", version_}, {"markers", markers}};
  return doc.dump(2) + "\n";
}

Lexicon parse_lexicon(std::string_view json_text) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("lexicon: ") + e.what());
  }
  if (!doc.is_object()) {
    throw ParseError("lexicon: top level must be an object");
  }
  reject_unknown_fields(doc, {"version", "markers"}, "lexicon");
  if (!doc.contains("version") || !doc["version"].is_string()) {
    throw ParseError("lexicon: missing string field \"version\"");
  }
  if (!doc.contains("markers") || !doc["markers"].is_array()) {
    throw ParseError("lexicon: missing array field \"markers\"");
  }

  std::vector<Marker> markers;
  for (const json& entry : doc["markers"]) {
    if (!entry.is_object()) {
      throw ParseError("lexicon: marker entries must be objects");
    }
    std::string id = entry.value("id", "");
    const std::string where = "marker \"" + id + "\"";
    reject_unknown_fields(
        entry, {"id", "pattern", "variety", "category", "standard_equivalents", "notes"},
        where);
    for (const char* field : {"id", "pattern", "variety", "category"}) {
      if (!entry.contains(field) || !entry[field].is_string()) {
        throw ParseError(where + ": missing string field \"" + field + "\"");
      }
    }
    Marker m;
    m.id = entry["id"].get<std::string>();
    m.pattern = entry["pattern"].get<std::string>();
    auto variety = variety_from_string(entry["variety"].get<std::string>());
    if (!variety || !is_marker_variety(*variety)) {
      throw ParseError(where + ": unknown variety \"" +
                       entry["variety"].get<std::string>() + "\"");
    }
    m.variety = *variety;
    auto category = category_from_string(entry["category"].get<std::string>());
    if (!category) {
      throw ParseError(where + ": unknown category \"" +
                       entry["category"].get<std::string>() + "\"");
    }
    m.category = *category;
    if (entry.contains("standard_equivalents")) {
      if (!entry["standard_equivalents"].is_array()) {
        throw ParseError(where + ": standard_equivalents must be an array");
      }
      for (const json& eq : entry["standard_equivalents"]) {
        if (!eq.is_string()) {
          throw ParseError(where + ": standard_equivalents entries must be strings");
        }
        m.standard_equivalents.push_back(eq.get<std::string>());
      }
    }
    m.notes = entry.value("notes", "");
    markers.push_back(std::move(m));
  }
  return Lexicon::from_markers(std::move(markers), doc["version"].get<std::string>());
}

Lexicon load_lexicon(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw ParseError("cannot open lexicon file: " + path.string());
  }
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return parse_lexicon(buffer.str());
}

void save_lexicon(const Lexicon& lexicon, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) {
    throw Error("cannot write lexicon file: " + path.string());
  }
  out << lexicon.serialize();
}

TallyComparison validate_counts(const Lexicon& lexicon, const Tally& expected) {
  TallyComparison cmp;
  cmp.all_match = true;
  for (Variety v : kMarkerVarieties) {
    for (Category c : kAllCategories) {
      TallyComparison::Entry e;
      e.variety = v;
      e.category = c;
      e.actual = lexicon.tally().at(v, c);
      e.expected = expected.at(v, c);
      e.match = e.actual == e.expected;
      cmp.all_match = cmp.all_match && e.match;
      cmp.entries.push_back(e);
    }
  }
  return cmp;
}

}  // namespace ghostmark
