#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace ghostmark {

// Varieties appear in two roles: markers belong to one of the first three,
// corpus texts may additionally be the AmericanEnglish baseline.
enum class Variety { IndianEnglish, SingaporeanEnglish, NigerianEnglish, AmericanEnglish };
enum class Category { Lexical, Pragmatic, Syntactic };

inline constexpr std::array<Variety, 3> kMarkerVarieties = {
    Variety::IndianEnglish, Variety::SingaporeanEnglish, Variety::NigerianEnglish};
inline constexpr std::array<Category, 3> kAllCategories = {
    Category::Lexical, Category::Pragmatic, Category::Syntactic};

bool is_marker_variety(Variety v);
std::string_view to_string(Variety v);
std::string_view to_string(Category c);
std::optional<Variety> variety_from_string(std::string_view s);
std::optional<Category> category_from_string(std::string_view s);

/// One lexicon entry. `pattern` is a literal phrase of one or more tokens,
/// matched case-insensitively at word boundaries; it is stored in normalized
/// form (NFC, single-spaced).
struct Marker {
  std::string id;
  std::string pattern;
  Variety variety = Variety::IndianEnglish;
  Category category = Category::Lexical;
  std::vector<std::string> standard_equivalents;
  std::string notes;
};

/// Counts keyed by (marker variety, category).
class Tally {
 public:
  long& at(Variety v, Category c);
  long at(Variety v, Category c) const;
  long variety_total(Variety v) const;
  long category_total(Category c) const;
  long total() const;
  bool operator==(const Tally&) const = default;

 private:
  std::array<std::array<long, 3>, 3> counts_{};
};

/// Target composition of the full 108-marker inventory this project's seed
/// lexicon extends toward: Indian 52 (18 lexical / 16 pragmatic / 18
/// syntactic), Singaporean 32 (16/9/7), Nigerian 24 (10/8/6).
Tally reference_tally();

/// Validated, immutable marker collection. Safe to share across threads
/// after construction.
class Lexicon {
 public:
  /// Validates all Marker invariants; throws ValidationError naming the
  /// offending entry on the first violation.
  static Lexicon from_markers(std::vector<Marker> markers, std::string version);

  const std::vector<Marker>& markers() const { return markers_; }
  const std::string& version() const { return version_; }
  const Tally& tally() const { return tally_; }
  std::size_t size() const { return markers_.size(); }
  const Marker* find(std::string_view id) const;

  /// Canonical JSON (stable key order, 2-space indent, trailing newline).
  std::string serialize() const;

 private:
  Lexicon() = default;
  std::vector<Marker> markers_;
  std::string version_;
  Tally tally_;
};

Lexicon parse_lexicon(std::string_view json_text);
Lexicon load_lexicon(const std::filesystem::path& path);
void save_lexicon(const Lexicon& lexicon, const std::filesystem::path& path);

/// Per-(variety, category) comparison of a lexicon's derived tally against
/// an expected one. Never mutates; reports every cell.
struct TallyComparison {
  struct Entry {
    Variety variety;
    Category category;
    long actual = 0;
    long expected = 0;
    bool match = false;
  };
  std::vector<Entry> entries;
  bool all_match = false;
};

TallyComparison validate_counts(const Lexicon& lexicon, const Tally& expected);

}  // namespace ghostmark
