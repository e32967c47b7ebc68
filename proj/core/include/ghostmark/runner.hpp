#pragma once

#include <compare>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "ghostmark/corpus.hpp"
#include "ghostmark/genclient.hpp"
#include "ghostmark/lexicon.hpp"
#include "ghostmark/metrics.hpp"

namespace ghostmark {

struct ModelEndpoint {
  std::string id;
  std::string base_url;
};

/// Experiment configuration file contents. See the README for the schema;
/// unknown fields are rejected.
struct ExperimentConfig {
  std::filesystem::path corpus_path;
  std::filesystem::path lexicon_path;
  std::vector<ModelEndpoint> models;
  std::vector<PromptCondition> conditions;
  GenerationParams params;
  int concurrency = 8;
  std::filesystem::path cache_dir;
  std::filesystem::path output_dir;
  std::string api_key_env = "GHOSTMARK_API_KEY";
  RetryPolicy retry;
  std::optional<ModelEndpoint> embedding;  // absent: offline ngram provider
  std::optional<int> embedding_dimension;
  std::optional<ModelEndpoint> judge;  // absent: no judge labels

  static ExperimentConfig parse(std::string_view json_text);
  static ExperimentConfig load(const std::filesystem::path& path);

  /// Canonical JSON used for the config hash.
  std::string canonical_json() const;
};

struct CellKey {
  std::string text_id;
  std::string model_id;
  PromptCondition condition = PromptCondition::Baseline;

  auto operator<=>(const CellKey&) const = default;
};

enum class CellStatus { Pending, Completed, Failed };

std::string_view to_string(CellStatus s);

struct CellState {
  CellKey key;
  CellStatus status = CellStatus::Pending;
  std::string error;
};

/// Deterministic enumeration of the full factorial design, plus the hashes
/// that tie outputs back to their exact inputs. All hashes are hex SHA-256
/// of canonical serializations.
struct ExperimentManifest {
  std::string config_hash;
  std::string corpus_hash;
  std::string lexicon_version;
  std::vector<std::string> model_ids;
  std::vector<PromptCondition> conditions;
  std::vector<CellState> cells;  // sorted by key

  std::size_t expected() const { return cells.size(); }
  std::size_t count(CellStatus s) const;

  std::string serialize() const;
  static ExperimentManifest parse(std::string_view json_text);
};

struct JudgeLabel {
  enum class Verdict { Preserved, Erased };
  Verdict verdict = Verdict::Preserved;
  std::string rationale;
};

std::string_view to_string(JudgeLabel::Verdict v);

/// One generation scored: detection counts, IER, SPS, per-marker fates and
/// the optional judge label. modes is parallel to the original text's
/// occurrence list (modes.size() == m_original).
struct ScoredCell {
  std::string text_id;
  std::string model_id;
  PromptCondition condition = PromptCondition::Baseline;
  std::string output_text;
  long m_original = 0;
  long m_output = 0;
  IerValue ier;
  SpsValue sps;
  std::vector<std::pair<std::string, GhostingMode>> modes;  // (marker_id, mode)
  std::optional<JudgeLabel> judge;

  CellKey key() const { return {text_id, model_id, condition}; }
  std::string to_json_line() const;
  static ScoredCell from_json_line(std::string_view line);
};

std::vector<ScoredCell> load_scored_cells(const std::filesystem::path& path);

/// Enumerates cells for the marked corpus: |corpus| x |models| x
/// |conditions|, sorted by (text_id, model_id, condition).
ExperimentManifest plan_experiment(const Corpus& marked_corpus, const Lexicon& lexicon,
                                   const ExperimentConfig& config);

/// Asks the judge model whether the rewrite preserves the original's
/// culturally specific phrasing. The reply must contain a
/// "VERDICT: PRESERVED" or "VERDICT: ERASED" line; anything else is a parse
/// error, never a silent default.
JudgeLabel judge_preservation(const std::string& original, const std::string& output,
                              const GenerationClient& judge_client,
                              const std::string& judge_model,
                              const GenerationParams& params = {});

struct AgreementReport {
  std::size_t n = 0;
  std::size_t agreements = 0;
  double percent = 0.0;
};

/// Percent agreement between judge labels and the detector-derived label
/// (Erased iff IER > 0) over cells that carry both.
AgreementReport judge_agreement(std::span<const ScoredCell> cells);

/// Drives the experiment end to end: ingest + filter the corpus, plan,
/// execute pending cells under bounded concurrency, score, and write
/// cells.jsonl + manifest.json into the configured output directory.
///
/// Completed cells are journaled as they finish, so an interrupted run
/// resumes where it stopped; re-running a finished experiment re-executes
/// nothing. Cell failures are isolated and recorded; only config-level
/// problems abort the run. Output files are sorted by cell key, making
/// byte-identical reruns possible once the response cache is warm.
class ExperimentRunner {
 public:
  explicit ExperimentRunner(ExperimentConfig config);

  const Lexicon& lexicon() const { return lexicon_; }
  const Corpus& marked_corpus() const { return marked_; }

  ExperimentManifest plan() const;

  struct Outcome {
    ExperimentManifest manifest;
    std::size_t newly_completed = 0;
    std::size_t resumed = 0;  // cells already done before this run
    std::size_t failed = 0;
    std::filesystem::path cells_path;
    std::filesystem::path manifest_path;
  };

  Outcome execute();

 private:
  ExperimentConfig config_;
  Lexicon lexicon_;
  Corpus marked_;
  std::map<std::string, DetectionResult> original_detections_;
};

}  // namespace ghostmark
