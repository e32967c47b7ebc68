#pragma once

#include <chrono>
#include <string>
#include <thread>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "ghostmark/metrics.hpp"

namespace ghostmark::tools {

/// In-process OpenAI-compatible endpoint for offline runs. Chat completions
/// echo the user text back unchanged (an identity rewrite); judge-style
/// prompts (detected by the VERDICT contract in the system message) get a
/// literal comparison verdict; embeddings come from the offline ngram
/// provider. Deterministic and network-free.
class MockEndpoint {
 public:
  explicit MockEndpoint(int latency_ms = 0) : latency_ms_(latency_ms) {
    server_.Post("/chat/completions", [this](const httplib::Request& req,
                                             httplib::Response& res) {
      delay();
      handle_chat(req, res);
    });
    server_.Post("/embeddings",
                 [this](const httplib::Request& req, httplib::Response& res) {
                   delay();
                   handle_embeddings(req, res);
                 });
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }

  MockEndpoint(const MockEndpoint&) = delete;
  MockEndpoint& operator=(const MockEndpoint&) = delete;

  ~MockEndpoint() {
    server_.stop();
    if (thread_.joinable()) {
      thread_.join();
    }
  }

  std::string base_url() const { return "http://127.0.0.1:" + std::to_string(port_); }

 private:
  void delay() const {
    if (latency_ms_ > 0) {
      std::this_thread::sleep_for(std::chrono::milliseconds(latency_ms_));
    }
  }

  static void handle_chat(const httplib::Request& req, httplib::Response& res) {
    nlohmann::json body = nlohmann::json::parse(req.body, nullptr, false);
    if (body.is_discarded() || !body.contains("messages")) {
      res.status = 400;
      res.set_content(R"({"error":{"message":"bad request"}})", "application/json");
      return;
    }
    std::string system_text;
    std::string user_text;
    for (const nlohmann::json& m : body["messages"]) {
      std::string role = m.value("role", "");
      if (role == "system") {
        system_text = m.value("content", "");
      } else if (role == "user") {
        user_text = m.value("content", "");
      }
    }
    std::string content;
    if (system_text.find("VERDICT:") != std::string::npos) {
      content = judge_reply(user_text);
    } else {
      content = user_text;  // identity rewrite
    }
    int n = body.value("n", 1);
    nlohmann::json choices = nlohmann::json::array();
    for (int i = 0; i < n; ++i) {
      choices.push_back({{"index", i},
                         {"finish_reason", "stop"},
                         {"message", {{"role", "assistant"}, {"content", content}}}});
    }
    nlohmann::json reply = {{"object", "chat.completion"},
                            {"model", body.value("model", "mock")},
                            {"choices", std::move(choices)}};
    res.set_content(reply.dump(), "application/json");
  }

  static std::string judge_reply(const std::string& user_text) {
    const std::string orig_tag = "ORIGINAL:\n";
    const std::string rewrite_tag = "\n\nREWRITE:\n";
    std::size_t o = user_text.find(orig_tag);
    std::size_t r = user_text.find(rewrite_tag);
    if (o == std::string::npos || r == std::string::npos || r < o) {
      return "VERDICT: PRESERVED\nNo comparable sections found.";
    }
    std::string original = user_text.substr(o + orig_tag.size(), r - o - orig_tag.size());
    std::string rewrite = user_text.substr(r + rewrite_tag.size());
    if (original == rewrite) {
      return "VERDICT: PRESERVED\nThe rewrite is byte-identical to the original.";
    }
    return "VERDICT: ERASED\nThe rewrite differs from the original.";
  }

  static void handle_embeddings(const httplib::Request& req, httplib::Response& res) {
    nlohmann::json body = nlohmann::json::parse(req.body, nullptr, false);
    if (body.is_discarded() || !body.contains("input") || !body["input"].is_string()) {
      res.status = 400;
      res.set_content(R"({"error":{"message":"bad request"}})", "application/json");
      return;
    }
    NgramHashProvider provider;
    std::vector<double> vec = provider.embed(body["input"].get<std::string>());
    nlohmann::json reply = {
        {"object", "list"},
        {"model", body.value("model", "mock")},
        {"data", nlohmann::json::array(
                     {{{"object", "embedding"}, {"index", 0}, {"embedding", vec}}})}};
    res.set_content(reply.dump(), "application/json");
  }

  httplib::Server server_;
  std::thread thread_;
  int port_ = 0;
  int latency_ms_ = 0;
};

}  // namespace ghostmark::tools
