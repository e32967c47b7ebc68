#pragma once

// Scriptable in-process HTTP endpoint for client, runner and mitigation
// tests. Each route can be given a handler that sees the parsed request
// body and a zero-based call index; one-shot canned replies can be queued
// ahead of the handler. Captured request bodies are kept for assertions.

#include <httplib.h>

#include <deque>
#include <functional>
#include <mutex>
#include <nlohmann/json.hpp>
#include <string>
#include <thread>
#include <utility>
#include <vector>

namespace ghostmark::testing {

struct HttpReply {
  int status = 200;
  std::string body;
};

class ScriptedServer {
 public:
  using Handler = std::function<HttpReply(const nlohmann::json& body, int call_index)>;

  ScriptedServer() {
    server_.Post("/chat/completions", [this](const httplib::Request& req, httplib::Response& res) {
      dispatch(chat_, req, res);
    });
    server_.Post("/embeddings", [this](const httplib::Request& req, httplib::Response& res) {
      dispatch(embeddings_, req, res);
    });
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }

  ScriptedServer(const ScriptedServer&) = delete;
  ScriptedServer& operator=(const ScriptedServer&) = delete;

  ~ScriptedServer() {
    server_.stop();
    if (thread_.joinable()) thread_.join();
  }

  std::string base_url() const { return "http://127.0.0.1:" + std::to_string(port_); }

  void set_chat(Handler h) {
    std::lock_guard lock(mutex_);
    chat_.handler = std::move(h);
  }

  void set_embeddings(Handler h) {
    std::lock_guard lock(mutex_);
    embeddings_.handler = std::move(h);
  }

  // Reply consumed by the next chat call before the handler is consulted.
  void enqueue_chat(HttpReply reply) {
    std::lock_guard lock(mutex_);
    chat_.canned.push_back(std::move(reply));
  }

  int chat_calls() const {
    std::lock_guard lock(mutex_);
    return chat_.calls;
  }

  int embedding_calls() const {
    std::lock_guard lock(mutex_);
    return embeddings_.calls;
  }

  std::vector<nlohmann::json> chat_bodies() const {
    std::lock_guard lock(mutex_);
    return chat_.bodies;
  }

  std::vector<nlohmann::json> embedding_bodies() const {
    std::lock_guard lock(mutex_);
    return embeddings_.bodies;
  }

  // Canonical chat-completions payload with one choice per text.
  static HttpReply chat_reply(const std::vector<std::string>& texts,
                              const std::string& finish_reason = "stop") {
    nlohmann::json choices = nlohmann::json::array();
    for (std::size_t i = 0; i < texts.size(); ++i) {
      choices.push_back({{"index", i},
                         {"message", {{"role", "assistant"}, {"content", texts[i]}}},
                         {"finish_reason", finish_reason}});
    }
    nlohmann::json body = {{"object", "chat.completion"}, {"choices", choices}};
    return {200, body.dump()};
  }

  static HttpReply embedding_reply(const std::vector<double>& vec) {
    nlohmann::json body = {
        {"object", "list"},
        {"data", nlohmann::json::array(
                     {{{"object", "embedding"}, {"index", 0}, {"embedding", vec}}})}};
    return {200, body.dump()};
  }

  // Identity handler: echoes the last user message back n times, where n
  // comes from the request.
  static Handler identity_chat() {
    return [](const nlohmann::json& body, int) {
      std::string user;
      for (const auto& msg : body.at("messages")) {
        if (msg.at("role").get<std::string>() == "user") {
          user = msg.at("content").get<std::string>();
        }
      }
      int n = body.value("n", 1);
      return chat_reply(std::vector<std::string>(static_cast<std::size_t>(n), user));
    };
  }

 private:
  struct Route {
    Handler handler;
    std::deque<HttpReply> canned;
    std::vector<nlohmann::json> bodies;
    int calls = 0;
  };

  void dispatch(Route& route, const httplib::Request& req, httplib::Response& res) {
    HttpReply reply{500, R"({"error":{"message":"no handler scripted"}})"};
    nlohmann::json body = nlohmann::json::parse(req.body, nullptr, false);
    Handler handler;
    int index = 0;
    bool canned = false;
    {
      std::lock_guard lock(mutex_);
      index = route.calls++;
      route.bodies.push_back(body);
      if (!route.canned.empty()) {
        reply = std::move(route.canned.front());
        route.canned.pop_front();
        canned = true;
      } else {
        handler = route.handler;
      }
    }
    if (!canned && handler) reply = handler(body, index);
    res.status = reply.status;
    res.set_content(reply.body, "application/json");
  }

  httplib::Server server_;
  std::thread thread_;
  int port_ = 0;
  mutable std::mutex mutex_;
  Route chat_;
  Route embeddings_;
};

}  // namespace ghostmark::testing
