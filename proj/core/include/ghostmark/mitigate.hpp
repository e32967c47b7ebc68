#pragma once

#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "ghostmark/corpus.hpp"
#include "ghostmark/detector.hpp"
#include "ghostmark/genclient.hpp"
#include "ghostmark/lexicon.hpp"
#include "ghostmark/metrics.hpp"

namespace ghostmark {

/// Marker patterns a rewrite must keep. Derived from the original text's
/// detection result: one (marker_id, pattern) entry per distinct marker, in
/// first-occurrence order. Empty iff the original had no markers.
struct ConstraintSet {
  std::vector<std::pair<std::string, std::string>> required_spans;

  bool empty() const { return required_spans.empty(); }
};

ConstraintSet derive_constraints(const DetectionResult& original, const Lexicon& lexicon);

struct ConstraintCheck {
  bool satisfied = true;
  std::vector<std::string> missing;  // marker ids whose pattern no longer matches
};

/// True iff every required pattern still matches `candidate` under detector
/// rules (each pattern probed independently, so overlap resolution cannot
/// shadow a kept span). An empty set is satisfied by any candidate.
ConstraintCheck check_constraints(std::string_view candidate, const ConstraintSet& constraints);

/// One candidate scored against the original. `combined` is
/// sps - weight x ier; an undefined IER (markerless original) contributes 0
/// and is visible as ier.value being absent.
struct RankedCandidate {
  std::string text;
  std::size_t source_index = 0;  // position in the input candidate list
  SpsValue sps;
  IerValue ier;
  double combined = 0.0;
  bool satisfies_constraints = false;
};

inline constexpr double kDefaultIerWeight = 0.3;

/// Scores every candidate against the original (own-variety detection for
/// IER, `provider` for SPS) and returns them best-first: combined
/// descending, ties broken by lower source index. Requires at least one
/// candidate.
std::vector<RankedCandidate> rerank(std::span<const std::string> candidates,
                                    const TextRecord& original, const Lexicon& lexicon,
                                    EmbeddingProvider& provider,
                                    double ier_weight = kDefaultIerWeight);

struct CandidateAudit {
  int round = 0;  // 1-based
  std::size_t index_in_round = 0;
  std::string text;
  bool satisfies = false;
  std::vector<std::string> missing;
};

struct ConstrainedOutcome {
  RankedCandidate chosen;
  bool fallback = false;  // no candidate satisfied the constraints
  int rounds_used = 0;
  std::vector<CandidateAudit> audit;  // every candidate, in generation order
};

/// Constraint-enforcing rewrite. Each round sends the condition prompt with
/// an appended instruction to retain the required patterns verbatim, asks
/// for params.k_candidates candidates (seed varies per round), and accepts
/// the first candidate that satisfies the constraints. After max_rounds
/// without a satisfying candidate, falls back to the highest combined score
/// across everything generated. The audit trail records every candidate and
/// its verdict.
ConstrainedOutcome constrained_generate(const TextRecord& text, PromptCondition condition,
                                        const GenerationParams& params,
                                        const GenerationClient& client,
                                        const std::string& model_id, const Lexicon& lexicon,
                                        EmbeddingProvider& provider, int max_rounds = 3,
                                        double ier_weight = kDefaultIerWeight);

}  // namespace ghostmark
