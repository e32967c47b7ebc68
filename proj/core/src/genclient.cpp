#include "ghostmark/genclient.hpp"

#include <chrono>
#include <ctime>
#include <fstream>
#include <sstream>
#include <thread>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "ghostmark/errors.hpp"
#include "ghostmark/hashing.hpp"
#include "ghostmark/text_norm.hpp"

namespace ghostmark {

namespace {

using nlohmann::json;

std::string utc_timestamp() {
  auto now = std::chrono::system_clock::now();
  std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

// base_url may carry a path prefix ("http://host:8080/v1"); httplib wants
// scheme://host:port separately from the path.
struct SplitUrl {
  std::string scheme_host_port;
  std::string path_prefix;
};

SplitUrl split_base_url(const std::string& base_url) {
  auto scheme_end = base_url.find("://");
  if (scheme_end == std::string::npos) {
    throw ValidationError("base_url must start with http:// or https://: " + base_url);
  }
  auto path_start = base_url.find('/', scheme_end + 3);
  if (path_start == std::string::npos) {
    return {base_url, ""};
  }
  std::string prefix = base_url.substr(path_start);
  while (!prefix.empty() && prefix.back() == '/') prefix.pop_back();
  return {base_url.substr(0, path_start), prefix};
}

bool is_transient_status(int status) {
  return status == 429 || (status >= 500 && status < 600);
}

// Shared POST with retry/backoff; returns the raw response body.
std::string post_with_retries(const std::string& base_url, const std::string& api_key,
                              const RetryPolicy& retry, const std::string& endpoint,
                              const std::string& body, int* attempts_out) {
  SplitUrl url = split_base_url(base_url);
  int max_attempts = std::max(1, retry.max_attempts);
  std::string last_error;

  for (int attempt = 1; attempt <= max_attempts; ++attempt) {
    if (attempts_out != nullptr) *attempts_out = attempt;
    if (attempt > 1) {
      auto delay = std::chrono::milliseconds(
          static_cast<long>(retry.initial_backoff_ms) * (1L << (attempt - 2)));
      std::this_thread::sleep_for(delay);
    }

    httplib::Client client(url.scheme_host_port);
    client.set_connection_timeout(10, 0);
    client.set_read_timeout(300, 0);
    httplib::Headers headers;
    if (!api_key.empty()) {
      headers.emplace("Authorization", "Bearer " + api_key);
    }

    auto result = client.Post(url.path_prefix + endpoint, headers, body, "application/json");
    if (!result) {
      last_error = "transport error: " + httplib::to_string(result.error());
      continue;
    }
    if (result->status == 200) {
      return result->body;
    }
    if (result->status == 401 || result->status == 403) {
      throw AuthError("auth failure (HTTP " + std::to_string(result->status) + ") from " +
                      base_url + endpoint);
    }
    if (!is_transient_status(result->status)) {
      throw RemoteError("HTTP " + std::to_string(result->status) + " from " + base_url +
                        endpoint + ": " + result->body.substr(0, 200));
    }
    last_error = "HTTP " + std::to_string(result->status);
  }
  throw RemoteError("endpoint unreachable after " + std::to_string(max_attempts) +
                    " attempts (" + base_url + endpoint + "): " + last_error);
}

json params_to_json(const GenerationParams& p) {
  return {{"temperature", p.temperature},
          {"top_p", p.top_p},
          {"seed", p.seed},
          {"max_tokens", p.max_tokens},
          {"k_candidates", p.k_candidates}};
}

}  // namespace

std::string_view to_string(PromptCondition c) {
  switch (c) {
    case PromptCondition::Baseline: return "Baseline";
    case PromptCondition::Neutral: return "Neutral";
    case PromptCondition::Preservation: return "Preservation";
  }
  return "?";
}

std::optional<PromptCondition> condition_from_string(std::string_view s) {
  if (s == "Baseline") return PromptCondition::Baseline;
  if (s == "Neutral") return PromptCondition::Neutral;
  if (s == "Preservation") return PromptCondition::Preservation;
  return std::nullopt;
}

std::string_view instruction_for(PromptCondition c) {
  switch (c) {
    case PromptCondition::Baseline:
      return "Make this text more professional & grammatically correct";
    case PromptCondition::Neutral:
      return "Improve the clarity & grammar of this text";
    case PromptCondition::Preservation:
      return "Improve clarity & grammar while preserving cultural voice & regional expressions";
  }
  return "";
}

void validate_params(const GenerationParams& params) {
  if (params.temperature < 0.0) {
    throw ValidationError("params: temperature must be >= 0");
  }
  if (params.top_p <= 0.0 || params.top_p > 1.0) {
    throw ValidationError("params: top_p must be in (0, 1]");
  }
  if (params.max_tokens <= 0) {
    throw ValidationError("params: max_tokens must be positive");
  }
  if (params.k_candidates <= 0) {
    throw ValidationError("params: k_candidates must be positive");
  }
}

std::string WireRequest::body() const {
  json messages = json::array();
  messages.push_back({{"role", "system"}, {"content", instruction}});
  messages.push_back({{"role", "user"}, {"content", user_text}});
  json body = {{"model", model_id},
               {"messages", messages},
               {"temperature", params.temperature},
               {"top_p", params.top_p},
               {"seed", params.seed},
               {"max_tokens", params.max_tokens},
               {"n", params.k_candidates}};
  return body.dump();
}

std::string WireRequest::fingerprint() const {
  // nlohmann objects serialize with sorted keys, so this dump is canonical
  // regardless of construction order.
  json identity = {{"model_id", model_id},
                   {"condition", to_string(condition)},
                   {"instruction", instruction},
                   {"input", normalize_text(user_text)},
                   {"params", params_to_json(params)}};
  return sha256_hex(identity.dump());
}

WireRequest build_request(const TextRecord& text, PromptCondition condition,
                          const GenerationParams& params, const std::string& model_id,
                          std::string_view extra_instruction) {
  validate_params(params);
  WireRequest request;
  request.model_id = model_id;
  request.condition = condition;
  request.instruction = std::string(instruction_for(condition));
  if (!extra_instruction.empty()) {
    request.instruction += "\n";
    request.instruction += extra_instruction;
  }
  request.user_text = text.text;
  request.params = params;
  return request;
}

ResponseCache::ResponseCache(std::filesystem::path dir) : dir_(std::move(dir)) {
  if (!dir_.empty()) {
    std::filesystem::create_directories(dir_);
  }
}

std::filesystem::path ResponseCache::entry_path(const std::string& fingerprint) const {
  return dir_ / (fingerprint + ".json");
}

std::optional<ResponseCache::Entry> ResponseCache::lookup(
    const std::string& fingerprint) const {
  if (!enabled()) return std::nullopt;
  std::ifstream in(entry_path(fingerprint));
  if (!in) return std::nullopt;
  std::ostringstream buffer;
  buffer << in.rdbuf();
  try {
    json doc = json::parse(buffer.str());
    Entry entry;
    entry.response_body = doc.at("response_body").get<std::string>();
    entry.timestamp = doc.value("timestamp", "");
    return entry;
  } catch (const json::exception&) {
    return std::nullopt;  // treat a corrupt entry as a miss
  }
}

void ResponseCache::store(const std::string& fingerprint, std::string_view request_body,
                          std::string_view response_body,
                          const std::string& timestamp) const {
  if (!enabled()) return;
  json doc = {{"fingerprint", fingerprint},
              {"request_body", std::string(request_body)},
              {"response_body", std::string(response_body)},
              {"timestamp", timestamp}};
  std::filesystem::path final_path = entry_path(fingerprint);
  std::filesystem::path tmp_path = final_path;
  tmp_path += "." + std::to_string(
      std::hash<std::thread::id>{}(std::this_thread::get_id())) + ".tmp";
  {
    std::ofstream out(tmp_path);
    if (!out) {
      throw Error("cannot write cache entry: " + tmp_path.string());
    }
    out << doc.dump(2) << "\n";
  }
  std::filesystem::rename(tmp_path, final_path);
}

GenerationClient::GenerationClient(std::string base_url, std::string api_key,
                                   RetryPolicy retry, const ResponseCache* cache)
    : base_url_(std::move(base_url)),
      api_key_(std::move(api_key)),
      retry_(retry),
      cache_(cache) {}

namespace {

void parse_chat_response(const std::string& body, GenerationRecord& record) {
  json doc;
  try {
    doc = json::parse(body);
  } catch (const json::parse_error& e) {
    throw RemoteError(std::string("malformed response body: ") + e.what());
  }
  if (!doc.contains("choices") || !doc["choices"].is_array() || doc["choices"].empty()) {
    throw RemoteError("malformed response: missing choices");
  }
  for (const json& choice : doc["choices"]) {
    if (!choice.contains("message") || !choice["message"].contains("content") ||
        !choice["message"]["content"].is_string()) {
      throw RemoteError("malformed response: choice without message content");
    }
    record.outputs.push_back(choice["message"]["content"].get<std::string>());
    if (choice.value("finish_reason", "") == "length") {
      record.truncated = true;
    }
  }
}

}  // namespace

GenerationRecord GenerationClient::generate(const WireRequest& request) const {
  GenerationRecord record;
  record.model_id = request.model_id;
  record.condition = request.condition;
  record.params = request.params;
  record.request_fingerprint = request.fingerprint();

  if (cache_ != nullptr) {
    if (auto hit = cache_->lookup(record.request_fingerprint)) {
      record.cache_hit = true;
      record.timestamp = hit->timestamp;
      parse_chat_response(hit->response_body, record);
      return record;
    }
  }

  std::string body = request.body();
  std::string response = post_with_retries(base_url_, api_key_, retry_,
                                           "/chat/completions", body, &record.attempts);
  record.timestamp = utc_timestamp();
  parse_chat_response(response, record);
  if (cache_ != nullptr) {
    cache_->store(record.request_fingerprint, body, response, record.timestamp);
  }
  return record;
}

EmbeddingClient::EmbeddingClient(std::string base_url, std::string model_id,
                                 std::string api_key, RetryPolicy retry,
                                 const ResponseCache* cache)
    : base_url_(std::move(base_url)),
      model_id_(std::move(model_id)),
      api_key_(std::move(api_key)),
      retry_(retry),
      cache_(cache) {}

std::vector<double> EmbeddingClient::embed_remote(std::string_view text) const {
  if (text.empty()) {
    throw ValidationError("embed_remote: empty text rejected");
  }
  json identity = {{"kind", "embedding"},
                   {"model_id", model_id_},
                   {"input", std::string(text)}};
  std::string fingerprint = sha256_hex(identity.dump());

  std::string response;
  if (cache_ != nullptr) {
    if (auto hit = cache_->lookup(fingerprint)) {
      response = hit->response_body;
    }
  }
  std::string body;
  if (response.empty()) {
    body = json{{"model", model_id_}, {"input", std::string(text)}}.dump();
    response = post_with_retries(base_url_, api_key_, retry_, "/embeddings", body, nullptr);
    if (cache_ != nullptr) {
      cache_->store(fingerprint, body, response, utc_timestamp());
    }
  }

  json doc;
  try {
    doc = json::parse(response);
  } catch (const json::parse_error& e) {
    throw RemoteError(std::string("malformed embeddings response: ") + e.what());
  }
  if (!doc.contains("data") || !doc["data"].is_array() || doc["data"].empty() ||
      !doc["data"][0].contains("embedding") || !doc["data"][0]["embedding"].is_array()) {
    throw RemoteError("malformed embeddings response: missing data[0].embedding");
  }
  std::vector<double> vec;
  for (const json& v : doc["data"][0]["embedding"]) {
    vec.push_back(v.get<double>());
  }
  return vec;
}

RemoteEmbeddingProvider::RemoteEmbeddingProvider(EmbeddingClient client,
                                                 std::optional<int> expected_dimension)
    : client_(std::move(client)),
      id_("remote:" + client_.model_id()),
      dimension_(expected_dimension) {}

int RemoteEmbeddingProvider::dimension() const {
  std::lock_guard lock(mutex_);
  if (!dimension_) {
    throw ValidationError("remote embedding dimension unknown before first embed call");
  }
  return *dimension_;
}

std::vector<double> RemoteEmbeddingProvider::embed(std::string_view text) {
  std::vector<double> vec = client_.embed_remote(text);
  std::lock_guard lock(mutex_);
  if (!dimension_) {
    dimension_ = static_cast<int>(vec.size());
  } else if (vec.size() != static_cast<std::size_t>(*dimension_)) {
    throw RemoteError("embedding dimension changed between calls (" +
                      std::to_string(vec.size()) + " vs " + std::to_string(*dimension_) +
                      ")");
  }
  return vec;
}

}  // namespace ghostmark
