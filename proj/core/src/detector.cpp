#include "ghostmark/detector.hpp"

#include <algorithm>
#include <map>
#include <unordered_map>

#include "ghostmark/errors.hpp"
#include "ghostmark/text_norm.hpp"

namespace ghostmark {

namespace {

struct CompiledPattern {
  std::vector<char32_t> folded;  // normalized, case-folded codepoints
  std::size_t lexicon_index = 0;
};

struct RawMatch {
  std::size_t start = 0;   // codepoint index
  std::size_t length = 0;  // codepoint count
  std::size_t lexicon_index = 0;
};

// Candidate patterns are bucketed by first folded codepoint so a text
// position only probes patterns that can possibly start there.
class PatternIndex {
 public:
  PatternIndex(const Lexicon& lexicon, const VarietyFilter& filter) {
    const auto& markers = lexicon.markers();
    for (std::size_t i = 0; i < markers.size(); ++i) {
      if (filter && !filter->contains(markers[i].variety)) continue;
      CompiledPattern p;
      CodepointMap map = decode_utf8(markers[i].pattern);
      p.folded.reserve(map.size());
      for (char32_t cp : map.codepoints) p.folded.push_back(fold_codepoint(cp));
      if (p.folded.empty()) continue;
      p.lexicon_index = i;
      buckets_[p.folded.front()].push_back(std::move(p));
    }
  }

  const std::vector<CompiledPattern>* bucket(char32_t first) const {
    auto it = buckets_.find(first);
    return it == buckets_.end() ? nullptr : &it->second;
  }

 private:
  std::unordered_map<char32_t, std::vector<CompiledPattern>> buckets_;
};

bool boundary_ok(const std::vector<char32_t>& text, std::size_t start, std::size_t end) {
  if (start > 0 && is_word_char(text[start - 1])) return false;
  if (end < text.size() && is_word_char(text[end])) return false;
  return true;
}

// Leftmost-longest, ties by lexicon order: sort candidates so that a single
// greedy pass keeps exactly the winning non-overlapping set.
std::vector<RawMatch> resolve_overlaps(std::vector<RawMatch> matches) {
  std::sort(matches.begin(), matches.end(), [](const RawMatch& a, const RawMatch& b) {
    if (a.start != b.start) return a.start < b.start;
    if (a.length != b.length) return a.length > b.length;
    return a.lexicon_index < b.lexicon_index;
  });
  std::vector<RawMatch> kept;
  std::size_t next_free = 0;
  for (const RawMatch& m : matches) {
    if (kept.empty() || m.start >= next_free) {
      kept.push_back(m);
      next_free = m.start + m.length;
    }
  }
  return kept;
}

}  // namespace

DetectionResult detect(std::string_view text, const Lexicon& lexicon,
                       const VarietyFilter& variety_filter) {
  DetectionResult result;
  result.normalized_text = normalize_text(text);
  if (result.normalized_text.empty()) return result;

  CodepointMap map = decode_utf8(result.normalized_text);
  std::vector<char32_t> folded(map.codepoints);
  for (char32_t& cp : folded) cp = fold_codepoint(cp);

  PatternIndex index(lexicon, variety_filter);

  std::vector<RawMatch> candidates;
  for (std::size_t pos = 0; pos < folded.size(); ++pos) {
    const auto* bucket = index.bucket(folded[pos]);
    if (bucket == nullptr) continue;
    for (const CompiledPattern& p : *bucket) {
      std::size_t n = p.folded.size();
      if (pos + n > folded.size()) continue;
      if (!std::equal(p.folded.begin(), p.folded.end(), folded.begin() + pos)) continue;
      if (!boundary_ok(folded, pos, pos + n)) continue;
      candidates.push_back({pos, n, p.lexicon_index});
    }
  }

  const auto& markers = lexicon.markers();
  for (const RawMatch& m : resolve_overlaps(std::move(candidates))) {
    MarkerOccurrence occ;
    occ.marker_id = markers[m.lexicon_index].id;
    occ.start = map.byte_offset[m.start];
    occ.end = map.byte_offset[m.start + m.length];
    occ.surface = result.normalized_text.substr(occ.start, occ.end - occ.start);
    result.occurrences.push_back(std::move(occ));
    ++result.count_by_category.at(markers[m.lexicon_index].variety,
                                  markers[m.lexicon_index].category);
  }
  return result;
}

std::size_t count_markers(const DetectionResult& result) {
  return result.occurrences.size();
}

double agreement_kappa(std::span<const int> labels_a, std::span<const int> labels_b) {
  if (labels_a.size() != labels_b.size()) {
    throw ValidationError("agreement_kappa: label lists differ in length");
  }
  const std::size_t n = labels_a.size();
  if (n == 0) {
    throw ValidationError("agreement_kappa: empty label lists");
  }

  std::map<int, long> marginal_a, marginal_b;
  long observed = 0;
  for (std::size_t i = 0; i < n; ++i) {
    ++marginal_a[labels_a[i]];
    ++marginal_b[labels_b[i]];
    if (labels_a[i] == labels_b[i]) ++observed;
  }

  const double p_o = static_cast<double>(observed) / static_cast<double>(n);
  double p_e = 0.0;
  for (const auto& [label, count_a] : marginal_a) {
    auto it = marginal_b.find(label);
    if (it == marginal_b.end()) continue;
    p_e += (static_cast<double>(count_a) / n) * (static_cast<double>(it->second) / n);
  }

  if (std::abs(1.0 - p_e) < 1e-12) {
    // Both annotators used one identical label throughout.
    return 1.0;
  }
  return (p_o - p_e) / (1.0 - p_e);
}

}  // namespace ghostmark
