#pragma once

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "ghostmark/detector.hpp"
#include "ghostmark/lexicon.hpp"

namespace ghostmark {

/// Identity erasure rate for one cell. `value` is absent when the original
/// had no markers (the rate is undefined, never coerced to 0); when present
/// it is clamped to [0, 1]. `raw_delta` keeps the unclamped
/// m_original - m_output so marker gains are not silently lost.
struct IerValue {
  std::optional<double> value;
  long raw_delta = 0;
};

struct SpsValue {
  double value = 0.0;
  std::string provider_id;
  int dimension = 0;
};

/// Fate of one original marker occurrence in a rewrite. The replaced-surface
/// mode requires a configured standard equivalent to be recognizable; a
/// retained surface whose pragmatic force was flattened still reports
/// SurfacePreserved, since surface evidence alone cannot distinguish the two.
enum class GhostingMode { SurfacePreserved, ParaphrasticAssimilation, DirectRemoval };

std::string_view to_string(GhostingMode m);
std::optional<GhostingMode> ghosting_mode_from_string(std::string_view s);

/// Sentence-embedding backend. Implementations must be deterministic (same
/// text, same vector), must never return a zero vector for non-empty text,
/// and must either be safe for concurrent embed() calls or serialize
/// internally.
class EmbeddingProvider {
 public:
  virtual ~EmbeddingProvider() = default;
  virtual const std::string& id() const = 0;
  virtual int dimension() const = 0;
  virtual std::vector<double> embed(std::string_view text) = 0;
};

/// Offline default provider: hashed character 3-gram term frequencies over
/// the casefolded normalized text, fixed dimension and hash seed,
/// L2-normalized. Deterministic and network-free.
class NgramHashProvider final : public EmbeddingProvider {
 public:
  static constexpr int kDimension = 512;

  const std::string& id() const override;
  int dimension() const override { return kDimension; }
  std::vector<double> embed(std::string_view text) override;
};

IerValue compute_ier(long m_original, long m_output);

/// Cosine similarity of the two texts' embeddings. Both texts must be
/// non-empty; provider failures propagate.
SpsValue compute_sps(std::string_view original, std::string_view output,
                     EmbeddingProvider& provider);

struct ModeAssignment {
  MarkerOccurrence occurrence;
  GhostingMode mode = GhostingMode::DirectRemoval;
};

/// Classifies every original occurrence: SurfacePreserved if the marker's
/// pattern still matches the output under detector rules, else
/// ParaphrasticAssimilation if any configured standard equivalent matches,
/// else DirectRemoval. Exactly one mode per occurrence.
std::vector<ModeAssignment> classify_modes(
    const std::vector<MarkerOccurrence>& original_occurrences,
    std::string_view original_text, std::string_view output_text,
    const Lexicon& lexicon);

struct OlsFit {
  double beta = 0.0;
  double intercept = 0.0;
  double r_squared = 0.0;
};

/// Ordinary least squares of SPS on IER over (ier, sps) pairs. Requires at
/// least two cells and a non-constant predictor.
OlsFit regress_sps_on_ier(std::span<const std::pair<double, double>> cells);

}  // namespace ghostmark
