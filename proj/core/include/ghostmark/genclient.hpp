#pragma once

#include <array>
#include <filesystem>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "ghostmark/corpus.hpp"
#include "ghostmark/metrics.hpp"

namespace ghostmark {

enum class PromptCondition { Baseline, Neutral, Preservation };

inline constexpr std::array<PromptCondition, 3> kAllConditions = {
    PromptCondition::Baseline, PromptCondition::Neutral, PromptCondition::Preservation};

std::string_view to_string(PromptCondition c);
std::optional<PromptCondition> condition_from_string(std::string_view s);

/// The three rewrite instructions. Byte-exact constants; everything
/// downstream (fingerprints, cached runs) depends on them not drifting.
std::string_view instruction_for(PromptCondition c);

struct GenerationParams {
  double temperature = 0.7;
  double top_p = 0.9;
  long seed = 42;
  int max_tokens = 512;
  int k_candidates = 1;
};

void validate_params(const GenerationParams& params);

/// One chat-completions request: exactly one system message carrying the
/// condition's instruction (plus any appended lines) and one user message
/// carrying the raw text.
struct WireRequest {
  std::string model_id;
  PromptCondition condition = PromptCondition::Baseline;
  std::string instruction;
  std::string user_text;
  GenerationParams params;

  /// OpenAI-compatible request body.
  std::string body() const;

  /// Stable hex SHA-256 over the canonical serialization of
  /// (model_id, condition, instruction, normalized input text, params).
  std::string fingerprint() const;
};

WireRequest build_request(const TextRecord& text, PromptCondition condition,
                          const GenerationParams& params, const std::string& model_id,
                          std::string_view extra_instruction = {});

struct GenerationRecord {
  std::string text_id;
  std::string model_id;
  PromptCondition condition = PromptCondition::Baseline;
  GenerationParams params;
  std::vector<std::string> outputs;
  std::string request_fingerprint;
  std::string timestamp;  // of the original fetch; stable across cache hits
  bool cache_hit = false;
  bool truncated = false;
  int attempts = 0;
};

/// Content-addressed on-disk store: one JSON file per fingerprint holding
/// the raw response body, so a cache hit replays the byte-identical payload.
/// Writes go through a temp file + rename; readers never see partial
/// entries.
class ResponseCache {
 public:
  ResponseCache() = default;  // disabled
  explicit ResponseCache(std::filesystem::path dir);

  bool enabled() const { return !dir_.empty(); }
  std::filesystem::path entry_path(const std::string& fingerprint) const;

  struct Entry {
    std::string response_body;
    std::string timestamp;
  };
  std::optional<Entry> lookup(const std::string& fingerprint) const;
  void store(const std::string& fingerprint, std::string_view request_body,
             std::string_view response_body, const std::string& timestamp) const;

 private:
  std::filesystem::path dir_;
};

struct RetryPolicy {
  int max_attempts = 3;
  int initial_backoff_ms = 250;  // doubles per retry
};

/// Chat-completions client. Retries transport errors, 429 and 5xx with
/// exponential backoff; other 4xx fail immediately (401/403 as AuthError).
/// Safe for concurrent generate() calls.
class GenerationClient {
 public:
  explicit GenerationClient(std::string base_url, std::string api_key = "",
                            RetryPolicy retry = {}, const ResponseCache* cache = nullptr);

  GenerationRecord generate(const WireRequest& request) const;

  const std::string& base_url() const { return base_url_; }

 private:
  std::string base_url_;
  std::string api_key_;
  RetryPolicy retry_;
  const ResponseCache* cache_ = nullptr;
};

/// Embeddings client with the same retry and cache behavior.
class EmbeddingClient {
 public:
  explicit EmbeddingClient(std::string base_url, std::string model_id,
                           std::string api_key = "", RetryPolicy retry = {},
                           const ResponseCache* cache = nullptr);

  /// Rejects empty text before any network traffic.
  std::vector<double> embed_remote(std::string_view text) const;

  const std::string& model_id() const { return model_id_; }

 private:
  std::string base_url_;
  std::string model_id_;
  std::string api_key_;
  RetryPolicy retry_;
  const ResponseCache* cache_ = nullptr;
};

/// EmbeddingProvider backed by a remote endpoint. The dimension is taken
/// from the first response (or the configured value) and enforced
/// afterwards. Concurrent embed() calls are safe; dimension tracking is
/// internally locked.
class RemoteEmbeddingProvider final : public EmbeddingProvider {
 public:
  RemoteEmbeddingProvider(EmbeddingClient client,
                          std::optional<int> expected_dimension = std::nullopt);

  const std::string& id() const override { return id_; }
  int dimension() const override;
  std::vector<double> embed(std::string_view text) override;

 private:
  EmbeddingClient client_;
  std::string id_;
  mutable std::mutex mutex_;
  mutable std::optional<int> dimension_;
};

}  // namespace ghostmark
