#pragma once

#include <cstddef>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "ghostmark/lexicon.hpp"

namespace ghostmark {

/// One matched marker span. Offsets are byte offsets into the normalized
/// text (see DetectionResult::normalized_text); `surface` is exactly the
/// slice normalized_text[start, end).
struct MarkerOccurrence {
  std::string marker_id;
  std::size_t start = 0;
  std::size_t end = 0;
  std::string surface;
};

struct DetectionResult {
  std::string text_id;
  std::string normalized_text;
  std::vector<MarkerOccurrence> occurrences;  // non-overlapping, sorted by start
  Tally count_by_category;
};

using VarietyFilter = std::optional<std::set<Variety>>;

/// Finds all marker occurrences in `text`.
///
/// Matching rules:
///  - text and patterns are NFC-normalized and whitespace-collapsed first;
///    comparison is case-insensitive (simple case folding)
///  - a match is valid iff the characters immediately before and after it
///    are absent or non-word (word = Unicode letter, digit, apostrophe)
///  - multi-token patterns match across exactly one whitespace run
///  - overlaps resolve leftmost-longest, ties by lexicon order
///
/// Deterministic for fixed inputs. When `variety_filter` is given, only
/// markers of those varieties participate.
DetectionResult detect(std::string_view text, const Lexicon& lexicon,
                       const VarietyFilter& variety_filter = std::nullopt);

/// Marker instances (not types) in a result.
std::size_t count_markers(const DetectionResult& result);

/// Cohen's kappa over two parallel label sequences drawn from the same
/// alphabet. Returns 1.0 for degenerate perfect agreement (p_e = p_o = 1).
double agreement_kappa(std::span<const int> labels_a, std::span<const int> labels_b);

}  // namespace ghostmark
