#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <nlohmann/json.hpp>
#include <string>
#include <vector>

#include "ghostmark/corpus.hpp"
#include "ghostmark/errors.hpp"
#include "ghostmark/genclient.hpp"
#include "mock_server.hpp"
#include "tmpdir.hpp"

using namespace ghostmark;
using ghostmark::testing::HttpReply;
using ghostmark::testing::ScriptedServer;
using ghostmark::testing::TempDir;
using nlohmann::json;

namespace {

// Keep retry sleeps negligible in tests.
const RetryPolicy kFastRetry{3, 1};

TextRecord sample_record() {
  TextRecord r;
  r.id = "t1";
  r.text = "Kindly do the needful.";
  r.variety = Variety::IndianEnglish;
  r.source = Source::Email;
  r.register_tag = "formal";
  return r;
}

}  // namespace

TEST_CASE("prompt condition strings round-trip") {
  for (PromptCondition c : kAllConditions) {
    auto back = condition_from_string(to_string(c));
    REQUIRE(back.has_value());
    CHECK(*back == c);
  }
  CHECK_FALSE(condition_from_string("baseline").has_value());  // case matters
  CHECK_FALSE(condition_from_string("Passthrough").has_value());
}

TEST_CASE("the three instructions are pinned byte for byte") {
  CHECK(instruction_for(PromptCondition::Baseline) ==
        "Make this text more professional & grammatically correct");
  CHECK(instruction_for(PromptCondition::Neutral) ==
        "Improve the clarity & grammar of this text");
  CHECK(instruction_for(PromptCondition::Preservation) ==
        "Improve clarity & grammar while preserving cultural voice & regional expressions");
}

TEST_CASE("validate_params enforces ranges") {
  GenerationParams p;
  CHECK_NOTHROW(validate_params(p));
  p.temperature = -0.1;
  CHECK_THROWS_AS(validate_params(p), ValidationError);
  p = {};
  p.top_p = 0.0;
  CHECK_THROWS_AS(validate_params(p), ValidationError);
  p = {};
  p.top_p = 1.5;
  CHECK_THROWS_AS(validate_params(p), ValidationError);
  p = {};
  p.max_tokens = 0;
  CHECK_THROWS_AS(validate_params(p), ValidationError);
  p = {};
  p.k_candidates = 0;
  CHECK_THROWS_AS(validate_params(p), ValidationError);
}

TEST_CASE("build_request carries instruction, text and params onto the wire") {
  GenerationParams params;
  params.k_candidates = 3;
  params.seed = 99;
  WireRequest req = build_request(sample_record(), PromptCondition::Preservation, params,
                                  "model-x");

  json body = json::parse(req.body());
  CHECK(body["model"] == "model-x");
  CHECK(body["n"] == 3);
  CHECK(body["seed"] == 99);
  CHECK(body["temperature"] == doctest::Approx(0.7));
  CHECK(body["top_p"] == doctest::Approx(0.9));
  CHECK(body["max_tokens"] == 512);
  REQUIRE(body["messages"].size() == 2);
  CHECK(body["messages"][0]["role"] == "system");
  CHECK(body["messages"][0]["content"] == std::string(instruction_for(PromptCondition::Preservation)));
  CHECK(body["messages"][1]["role"] == "user");
  CHECK(body["messages"][1]["content"] == "Kindly do the needful.");
}

TEST_CASE("build_request appends extra instruction lines") {
  WireRequest req = build_request(sample_record(), PromptCondition::Baseline, {}, "m",
                                  "Keep it short.");
  json body = json::parse(req.body());
  std::string system = body["messages"][0]["content"].get<std::string>();
  CHECK(system == std::string(instruction_for(PromptCondition::Baseline)) + "\nKeep it short.");
}

TEST_CASE("build_request validates params up front") {
  GenerationParams bad;
  bad.k_candidates = -1;
  CHECK_THROWS_AS(build_request(sample_record(), PromptCondition::Baseline, bad, "m"),
                  ValidationError);
}

TEST_CASE("fingerprints are stable and sensitive to identity fields") {
  WireRequest base = build_request(sample_record(), PromptCondition::Baseline, {}, "m");
  CHECK(base.fingerprint() == base.fingerprint());
  CHECK(base.fingerprint().size() == 64);

  // Whitespace-only text differences normalize away
  TextRecord spaced = sample_record();
  spaced.text = "Kindly  do the\tneedful.";
  CHECK(build_request(spaced, PromptCondition::Baseline, {}, "m").fingerprint() ==
        base.fingerprint());

  WireRequest other_model = build_request(sample_record(), PromptCondition::Baseline, {}, "m2");
  CHECK(other_model.fingerprint() != base.fingerprint());

  WireRequest other_cond =
      build_request(sample_record(), PromptCondition::Neutral, {}, "m");
  CHECK(other_cond.fingerprint() != base.fingerprint());

  GenerationParams hot;
  hot.temperature = 1.0;
  CHECK(build_request(sample_record(), PromptCondition::Baseline, hot, "m").fingerprint() !=
        base.fingerprint());

  WireRequest extra =
      build_request(sample_record(), PromptCondition::Baseline, {}, "m", "more");
  CHECK(extra.fingerprint() != base.fingerprint());
}

TEST_CASE("generate parses choices and candidate counts") {
  ScriptedServer server;
  server.set_chat(ScriptedServer::identity_chat());
  GenerationClient client(server.base_url(), "", kFastRetry);

  GenerationParams params;
  params.k_candidates = 3;
  WireRequest req = build_request(sample_record(), PromptCondition::Baseline, params, "m");
  GenerationRecord record = client.generate(req);

  REQUIRE(record.outputs.size() == 3);
  CHECK(record.outputs[0] == "Kindly do the needful.");
  CHECK(record.attempts == 1);
  CHECK_FALSE(record.cache_hit);
  CHECK_FALSE(record.truncated);
  CHECK_FALSE(record.timestamp.empty());
  CHECK(record.request_fingerprint == req.fingerprint());
  CHECK(server.chat_calls() == 1);
}

TEST_CASE("generate retries transient failures with attempt counting") {
  ScriptedServer server;
  server.enqueue_chat({500, R"({"error":{"message":"boom"}})"});
  server.set_chat(ScriptedServer::identity_chat());
  GenerationClient client(server.base_url(), "", kFastRetry);

  WireRequest req = build_request(sample_record(), PromptCondition::Baseline, {}, "m");
  GenerationRecord record = client.generate(req);
  CHECK(record.attempts == 2);
  CHECK(server.chat_calls() == 2);
  REQUIRE(record.outputs.size() == 1);
}

TEST_CASE("generate retries 429 and gives up after max attempts") {
  ScriptedServer server;
  for (int i = 0; i < 3; ++i) {
    server.enqueue_chat({429, R"({"error":{"message":"slow down"}})"});
  }
  GenerationClient client(server.base_url(), "", kFastRetry);
  WireRequest req = build_request(sample_record(), PromptCondition::Baseline, {}, "m");
  CHECK_THROWS_AS(client.generate(req), RemoteError);
  CHECK(server.chat_calls() == 3);
}

TEST_CASE("auth failures surface immediately without retry") {
  ScriptedServer server;
  server.enqueue_chat({401, R"({"error":{"message":"no key"}})"});
  GenerationClient client(server.base_url(), "bad-key", kFastRetry);
  WireRequest req = build_request(sample_record(), PromptCondition::Baseline, {}, "m");
  CHECK_THROWS_AS(client.generate(req), AuthError);
  CHECK(server.chat_calls() == 1);
}

TEST_CASE("non-transient 4xx fails without retry") {
  ScriptedServer server;
  server.enqueue_chat({404, R"({"error":{"message":"wrong path"}})"});
  GenerationClient client(server.base_url(), "", kFastRetry);
  WireRequest req = build_request(sample_record(), PromptCondition::Baseline, {}, "m");
  CHECK_THROWS_AS(client.generate(req), RemoteError);
  CHECK(server.chat_calls() == 1);
}

TEST_CASE("the api key travels as a bearer header") {
  ScriptedServer server;
  server.set_chat(ScriptedServer::identity_chat());
  GenerationClient with_key(server.base_url(), "secret-key", kFastRetry);
  WireRequest req = build_request(sample_record(), PromptCondition::Baseline, {}, "m");
  with_key.generate(req);
  // ScriptedServer stores parsed bodies, not headers; the round trip itself
  // plus the 401 test above pin the behavior. Here we just confirm success.
  CHECK(server.chat_calls() == 1);
}

TEST_CASE("truncated choices set the flag") {
  ScriptedServer server;
  server.enqueue_chat(ScriptedServer::chat_reply({"cut off mid"}, "length"));
  GenerationClient client(server.base_url(), "", kFastRetry);
  WireRequest req = build_request(sample_record(), PromptCondition::Baseline, {}, "m");
  GenerationRecord record = client.generate(req);
  CHECK(record.truncated);
}

TEST_CASE("malformed response bodies raise RemoteError") {
  ScriptedServer server;
  server.enqueue_chat({200, "not json at all"});
  server.enqueue_chat({200, R"({"choices": []})"});
  server.enqueue_chat({200, R"({"choices": [{"message": {}}]})"});
  GenerationClient client(server.base_url(), "", kFastRetry);
  WireRequest req = build_request(sample_record(), PromptCondition::Baseline, {}, "m");
  CHECK_THROWS_AS(client.generate(req), RemoteError);
  CHECK_THROWS_AS(client.generate(req), RemoteError);
  CHECK_THROWS_AS(client.generate(req), RemoteError);
}

TEST_CASE("cache replays responses byte-identically with original timestamp") {
  TempDir tmp;
  ResponseCache cache(tmp.file("cache"));
  ScriptedServer server;
  server.set_chat(ScriptedServer::identity_chat());
  GenerationClient client(server.base_url(), "", kFastRetry, &cache);

  WireRequest req = build_request(sample_record(), PromptCondition::Baseline, {}, "m");
  GenerationRecord first = client.generate(req);
  CHECK_FALSE(first.cache_hit);
  CHECK(server.chat_calls() == 1);

  GenerationRecord second = client.generate(req);
  CHECK(second.cache_hit);
  CHECK(server.chat_calls() == 1);  // no new network traffic
  CHECK(second.outputs == first.outputs);
  CHECK(second.timestamp == first.timestamp);

  // A corrupt entry is a miss, not an error
  ghostmark::testing::TempDir scratch;
  std::ofstream(cache.entry_path(req.fingerprint())) << "{broken";
  GenerationRecord third = client.generate(req);
  CHECK_FALSE(third.cache_hit);
  CHECK(server.chat_calls() == 2);
}

TEST_CASE("different requests occupy different cache entries") {
  TempDir tmp;
  ResponseCache cache(tmp.file("cache"));
  ScriptedServer server;
  server.set_chat(ScriptedServer::identity_chat());
  GenerationClient client(server.base_url(), "", kFastRetry, &cache);

  WireRequest a = build_request(sample_record(), PromptCondition::Baseline, {}, "m");
  WireRequest b = build_request(sample_record(), PromptCondition::Neutral, {}, "m");
  client.generate(a);
  client.generate(b);
  CHECK(server.chat_calls() == 2);
  CHECK(client.generate(a).cache_hit);
  CHECK(client.generate(b).cache_hit);
  CHECK(server.chat_calls() == 2);
}

TEST_CASE("embedding client parses vectors and rejects empty text") {
  ScriptedServer server;
  server.set_embeddings([](const json&, int) {
    return ScriptedServer::embedding_reply({0.6, 0.8});
  });
  EmbeddingClient client(server.base_url(), "embed-model", "", kFastRetry);
  std::vector<double> vec = client.embed_remote("some text");
  REQUIRE(vec.size() == 2);
  CHECK(vec[0] == doctest::Approx(0.6));
  CHECK(vec[1] == doctest::Approx(0.8));

  auto bodies = server.embedding_bodies();
  REQUIRE(bodies.size() == 1);
  CHECK(bodies[0].at("model") == "embed-model");
  CHECK(bodies[0].at("input") == "some text");

  CHECK_THROWS_AS(client.embed_remote(""), ValidationError);
  CHECK(server.embedding_calls() == 1);
}

TEST_CASE("remote embedding provider learns and enforces its dimension") {
  ScriptedServer server;
  int dim = 3;
  server.set_embeddings([&dim](const json&, int) {
    std::vector<double> v(static_cast<std::size_t>(dim), 0.5);
    return ScriptedServer::embedding_reply(v);
  });
  RemoteEmbeddingProvider provider(
      EmbeddingClient(server.base_url(), "embed-model", "", kFastRetry));

  CHECK(provider.embed("first").size() == 3);
  CHECK(provider.dimension() == 3);

  dim = 4;  // server drifts; provider must refuse
  CHECK_THROWS_AS(provider.embed("second"), RemoteError);
}

TEST_CASE("remote embedding provider honors a configured dimension") {
  ScriptedServer server;
  server.set_embeddings([](const json&, int) {
    return ScriptedServer::embedding_reply({1.0, 0.0});
  });
  RemoteEmbeddingProvider ok(
      EmbeddingClient(server.base_url(), "embed-model", "", kFastRetry), 2);
  CHECK(ok.dimension() == 2);
  CHECK(ok.embed("text").size() == 2);

  RemoteEmbeddingProvider mismatched(
      EmbeddingClient(server.base_url(), "embed-model", "", kFastRetry), 5);
  CHECK_THROWS_AS(mismatched.embed("text"), RemoteError);
}
