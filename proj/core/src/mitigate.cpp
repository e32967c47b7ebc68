#include "ghostmark/mitigate.hpp"

#include <algorithm>
#include <set>

#include "ghostmark/errors.hpp"

namespace ghostmark {

namespace {

/// Does `pattern` match anywhere in `text` under detector rules? Probed with
/// a single-marker lexicon so other patterns cannot shadow it.
bool pattern_matches(std::string_view text, const std::string& pattern) {
  Marker probe;
  probe.id = "probe";
  probe.pattern = pattern;
  probe.variety = Variety::IndianEnglish;
  probe.category = Category::Lexical;
  Lexicon one = Lexicon::from_markers({probe}, "probe");
  return !detect(text, one).occurrences.empty();
}

std::string retention_instruction(const ConstraintSet& constraints) {
  if (constraints.empty()) {
    return {};
  }
  std::string out = "Retain the following expressions verbatim in your rewrite: ";
  for (std::size_t i = 0; i < constraints.required_spans.size(); ++i) {
    if (i > 0) {
      out += ", ";
    }
    out += '"';
    out += constraints.required_spans[i].second;
    out += '"';
  }
  out += '.';
  return out;
}

RankedCandidate score_candidate(const std::string& candidate, std::size_t index,
                                const TextRecord& original, const DetectionResult& orig_det,
                                const Lexicon& lexicon, EmbeddingProvider& provider,
                                const ConstraintSet& constraints, double ier_weight) {
  RankedCandidate rc;
  rc.text = candidate;
  rc.source_index = index;
  DetectionResult cand_det = detect(candidate, lexicon, VarietyFilter{{original.variety}});
  rc.ier = compute_ier(static_cast<long>(orig_det.occurrences.size()),
                       static_cast<long>(cand_det.occurrences.size()));
  rc.sps = compute_sps(original.text, candidate, provider);
  rc.combined = rc.sps.value - ier_weight * rc.ier.value.value_or(0.0);
  rc.satisfies_constraints = check_constraints(candidate, constraints).satisfied;
  return rc;
}

}  // namespace

ConstraintSet derive_constraints(const DetectionResult& original, const Lexicon& lexicon) {
  ConstraintSet cs;
  std::set<std::string> seen;
  for (const MarkerOccurrence& occ : original.occurrences) {
    if (!seen.insert(occ.marker_id).second) {
      continue;
    }
    const Marker* m = lexicon.find(occ.marker_id);
    if (m == nullptr) {
      throw ValidationError("constraints: unknown marker id \"" + occ.marker_id + "\"");
    }
    cs.required_spans.emplace_back(m->id, m->pattern);
  }
  return cs;
}

ConstraintCheck check_constraints(std::string_view candidate, const ConstraintSet& constraints) {
  ConstraintCheck result;
  for (const auto& [marker_id, pattern] : constraints.required_spans) {
    if (!pattern_matches(candidate, pattern)) {
      result.missing.push_back(marker_id);
    }
  }
  result.satisfied = result.missing.empty();
  return result;
}

std::vector<RankedCandidate> rerank(std::span<const std::string> candidates,
                                    const TextRecord& original, const Lexicon& lexicon,
                                    EmbeddingProvider& provider, double ier_weight) {
  if (candidates.empty()) {
    throw ValidationError("rerank: empty candidate list");
  }
  DetectionResult orig_det = detect(original.text, lexicon, VarietyFilter{{original.variety}});
  ConstraintSet constraints = derive_constraints(orig_det, lexicon);
  std::vector<RankedCandidate> ranked;
  ranked.reserve(candidates.size());
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    ranked.push_back(score_candidate(candidates[i], i, original, orig_det, lexicon, provider,
                                     constraints, ier_weight));
  }
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const RankedCandidate& a, const RankedCandidate& b) {
                     if (a.combined != b.combined) {
                       return a.combined > b.combined;
                     }
                     return a.source_index < b.source_index;
                   });
  return ranked;
}

ConstrainedOutcome constrained_generate(const TextRecord& text, PromptCondition condition,
                                        const GenerationParams& params,
                                        const GenerationClient& client,
                                        const std::string& model_id, const Lexicon& lexicon,
                                        EmbeddingProvider& provider, int max_rounds,
                                        double ier_weight) {
  if (max_rounds < 1) {
    throw ValidationError("constrained_generate: max_rounds must be >= 1");
  }
  DetectionResult orig_det = detect(text.text, lexicon, VarietyFilter{{text.variety}});
  ConstraintSet constraints = derive_constraints(orig_det, lexicon);
  std::string extra = retention_instruction(constraints);

  ConstrainedOutcome outcome;
  std::vector<std::string> all_candidates;

  for (int round = 1; round <= max_rounds; ++round) {
    GenerationParams round_params = params;
    round_params.seed = params.seed + (round - 1);
    WireRequest req = build_request(text, condition, round_params, model_id, extra);
    GenerationRecord rec = client.generate(req);
    if (rec.outputs.empty()) {
      throw RemoteError("constrained_generate: model returned zero candidates");
    }
    outcome.rounds_used = round;

    std::optional<std::size_t> winner;
    for (std::size_t i = 0; i < rec.outputs.size(); ++i) {
      ConstraintCheck check = check_constraints(rec.outputs[i], constraints);
      CandidateAudit audit;
      audit.round = round;
      audit.index_in_round = i;
      audit.text = rec.outputs[i];
      audit.satisfies = check.satisfied;
      audit.missing = check.missing;
      outcome.audit.push_back(std::move(audit));
      all_candidates.push_back(rec.outputs[i]);
      if (check.satisfied && !winner) {
        winner = all_candidates.size() - 1;
      }
    }
    if (winner) {
      outcome.chosen = score_candidate(all_candidates[*winner], *winner, text, orig_det,
                                       lexicon, provider, constraints, ier_weight);
      return outcome;
    }
  }

  // Nothing satisfied the constraints: best combined score wins.
  outcome.fallback = true;
  std::vector<RankedCandidate> ranked =
      rerank(all_candidates, text, lexicon, provider, ier_weight);
  outcome.chosen = std::move(ranked.front());
  return outcome;
}

}  // namespace ghostmark
