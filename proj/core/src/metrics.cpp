#include "ghostmark/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>

#include "ghostmark/errors.hpp"
#include "ghostmark/text_norm.hpp"

namespace ghostmark {

namespace {

// FNV-1a over the UTF-8 bytes of one 3-gram, seeded so the mapping is pinned
// independently of any library default.
constexpr std::uint64_t kHashSeed = 0x9e3779b97f4a7c15ull;

std::uint64_t fnv1a(std::string_view bytes, std::uint64_t seed) {
  std::uint64_t h = 14695981039346656037ull ^ seed;
  for (unsigned char b : bytes) {
    h ^= b;
    h *= 1099511628211ull;
  }
  return h;
}

double dot(const std::vector<double>& a, const std::vector<double>& b) {
  double sum = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) sum += a[i] * b[i];
  return sum;
}

}  // namespace

std::string_view to_string(GhostingMode m) {
  switch (m) {
    case GhostingMode::SurfacePreserved: return "SurfacePreserved";
    case GhostingMode::ParaphrasticAssimilation: return "ParaphrasticAssimilation";
    case GhostingMode::DirectRemoval: return "DirectRemoval";
  }
  return "?";
}

std::optional<GhostingMode> ghosting_mode_from_string(std::string_view s) {
  if (s == "SurfacePreserved") return GhostingMode::SurfacePreserved;
  if (s == "ParaphrasticAssimilation") return GhostingMode::ParaphrasticAssimilation;
  if (s == "DirectRemoval") return GhostingMode::DirectRemoval;
  return std::nullopt;
}

const std::string& NgramHashProvider::id() const {
  static const std::string id = "ngram-hash-512";
  return id;
}

std::vector<double> NgramHashProvider::embed(std::string_view text) {
  std::vector<double> vec(kDimension, 0.0);
  CodepointMap map = decode_utf8(normalize_casefold(text));
  if (map.size() == 0) return vec;

  // Sentinels so that texts shorter than three characters still produce
  // at least one gram.
  std::vector<char32_t> padded;
  padded.reserve(map.size() + 2);
  padded.push_back(U'\x02');
  padded.insert(padded.end(), map.codepoints.begin(), map.codepoints.end());
  padded.push_back(U'\x03');

  for (std::size_t i = 0; i + 3 <= padded.size(); ++i) {
    std::string gram = encode_utf8({padded[i], padded[i + 1], padded[i + 2]});
    std::uint64_t h = fnv1a(gram, kHashSeed);
    vec[h % kDimension] += 1.0;
  }

  double norm = std::sqrt(dot(vec, vec));
  if (norm > 0.0) {
    for (double& v : vec) v /= norm;
  }
  return vec;
}

IerValue compute_ier(long m_original, long m_output) {
  IerValue ier;
  ier.raw_delta = m_original - m_output;
  if (m_original > 0) {
    double raw = static_cast<double>(ier.raw_delta) / static_cast<double>(m_original);
    ier.value = std::max(0.0, raw);
  }
  return ier;
}

SpsValue compute_sps(std::string_view original, std::string_view output,
                     EmbeddingProvider& provider) {
  if (original.empty() || output.empty()) {
    throw ValidationError("compute_sps: texts must be non-empty");
  }
  std::vector<double> e_orig = provider.embed(original);
  std::vector<double> e_out = provider.embed(output);
  if (e_orig.size() != e_out.size() ||
      e_orig.size() != static_cast<std::size_t>(provider.dimension())) {
    throw ValidationError("compute_sps: provider \"" + provider.id() +
                          "\" returned vectors of unexpected dimension");
  }
  double norm_orig = std::sqrt(dot(e_orig, e_orig));
  double norm_out = std::sqrt(dot(e_out, e_out));
  if (norm_orig == 0.0 || norm_out == 0.0) {
    throw ValidationError("compute_sps: provider \"" + provider.id() +
                          "\" returned a zero vector for non-empty text");
  }
  SpsValue sps;
  // Clamp: accumulated rounding can push identical vectors past 1.
  sps.value = std::clamp(dot(e_orig, e_out) / (norm_orig * norm_out), -1.0, 1.0);
  sps.provider_id = provider.id();
  sps.dimension = provider.dimension();
  return sps;
}

std::vector<ModeAssignment> classify_modes(
    const std::vector<MarkerOccurrence>& original_occurrences,
    std::string_view /*original_text*/, std::string_view output_text,
    const Lexicon& lexicon) {
  std::vector<ModeAssignment> out;
  out.reserve(original_occurrences.size());

  for (const MarkerOccurrence& occ : original_occurrences) {
    const Marker* marker = lexicon.find(occ.marker_id);
    if (marker == nullptr) {
      throw ValidationError("classify_modes: occurrence references unknown marker \"" +
                            occ.marker_id + "\"");
    }

    ModeAssignment assignment;
    assignment.occurrence = occ;

    Marker probe = *marker;
    probe.standard_equivalents.clear();
    Lexicon single = Lexicon::from_markers({probe}, "probe");
    if (!detect(output_text, single).occurrences.empty()) {
      assignment.mode = GhostingMode::SurfacePreserved;
      out.push_back(std::move(assignment));
      continue;
    }

    assignment.mode = GhostingMode::DirectRemoval;
    for (const std::string& equivalent : marker->standard_equivalents) {
      Marker eq_probe;
      eq_probe.id = "equivalent";
      eq_probe.pattern = equivalent;
      eq_probe.variety = marker->variety;
      eq_probe.category = marker->category;
      Lexicon eq_lexicon = Lexicon::from_markers({eq_probe}, "probe");
      if (!detect(output_text, eq_lexicon).occurrences.empty()) {
        assignment.mode = GhostingMode::ParaphrasticAssimilation;
        break;
      }
    }
    out.push_back(std::move(assignment));
  }
  return out;
}

OlsFit regress_sps_on_ier(std::span<const std::pair<double, double>> cells) {
  if (cells.size() < 2) {
    throw ValidationError("regress_sps_on_ier: need at least two cells");
  }
  double mean_x = 0.0, mean_y = 0.0;
  for (const auto& [x, y] : cells) {
    mean_x += x;
    mean_y += y;
  }
  mean_x /= static_cast<double>(cells.size());
  mean_y /= static_cast<double>(cells.size());

  double sxx = 0.0, syy = 0.0, sxy = 0.0;
  for (const auto& [x, y] : cells) {
    sxx += (x - mean_x) * (x - mean_x);
    syy += (y - mean_y) * (y - mean_y);
    sxy += (x - mean_x) * (y - mean_y);
  }
  if (sxx == 0.0) {
    throw ValidationError("regress_sps_on_ier: constant predictor");
  }

  OlsFit fit;
  fit.beta = sxy / sxx;
  fit.intercept = mean_y - fit.beta * mean_x;
  fit.r_squared = syy == 0.0 ? 1.0 : (sxy * sxy) / (sxx * syy);
  return fit;
}

}  // namespace ghostmark
