#include <atomic>
#include <mutex>
#include <thread>

#include "dseg/llm.hpp"
#include "httplib.h"

namespace dseg {

using nlohmann::json;

CannedResponses CannedResponses::from_json(const json& j) {
  if (!j.is_object()) throw ParseError("canned response file must be a JSON object");
  CannedResponses c;
  if (j.contains("rules")) {
    for (const auto& r : j["rules"]) {
      Rule rule;
      rule.match = r.value("match", std::string{});
      if (!r.contains("responses") || !r["responses"].is_array() || r["responses"].empty()) {
        throw ParseError("canned rule '" + rule.match + "' needs a non-empty 'responses' array");
      }
      for (const auto& x : r["responses"]) rule.responses.push_back(x);
      c.rules.push_back(std::move(rule));
    }
  }
  if (j.contains("fallback")) c.fallback = j["fallback"];
  return c;
}

struct MockChatServer::Impl {
  CannedResponses canned;
  httplib::Server server;
  std::thread thread;
  std::mutex mu;
  std::vector<std::size_t> served;  // per rule
  std::atomic<std::size_t> requests{0};
  std::string host;
  int port = 0;

  void reply(const json& canned_response, httplib::Response& res) {
    if (canned_response.is_object() && canned_response.contains("status")) {
      res.status = canned_response["status"].get<int>();
      res.set_content(canned_response.value("body", std::string{}), "text/plain");
      return;
    }
    std::string content = canned_response.is_string() ? canned_response.get<std::string>() : canned_response.dump();
    json body{{"object", "chat.completion"},
              {"choices", json::array({{{"index", 0},
                                        {"message", {{"role", "assistant"}, {"content", content}}},
                                        {"finish_reason", "stop"}}})}};
    res.status = 200;
    res.set_content(body.dump(), "application/json");
  }

  void handle(const httplib::Request& req, httplib::Response& res) {
    ++requests;
    auto body = json::parse(req.body, nullptr, false);
    if (body.is_discarded() || !body.contains("messages") || !body["messages"].is_array()) {
      res.status = 400;
      res.set_content("expected a chat-completion request", "text/plain");
      return;
    }
    std::string text;
    for (const auto& m : body["messages"]) {
      if (m.contains("content") && m["content"].is_string()) text += m["content"].get<std::string>() + "\n";
    }
    json chosen;
    bool found = false;
    {
      std::lock_guard lock(mu);
      for (std::size_t r = 0; r < canned.rules.size(); ++r) {
        const auto& rule = canned.rules[r];
        if (text.find(rule.match) == std::string::npos) continue;
        std::size_t i = std::min(served[r], rule.responses.size() - 1);
        ++served[r];
        chosen = rule.responses[i];
        found = true;
        break;
      }
    }
    if (!found) {
      if (!canned.fallback) {
        res.status = 404;
        res.set_content("no canned response matches this request", "text/plain");
        return;
      }
      chosen = *canned.fallback;
    }
    reply(chosen, res);
  }
};

MockChatServer::MockChatServer(CannedResponses canned) : impl_(std::make_unique<Impl>()) {
  impl_->canned = std::move(canned);
  impl_->served.assign(impl_->canned.rules.size(), 0);
  impl_->server.Post(R"(.*)", [this](const httplib::Request& req, httplib::Response& res) { impl_->handle(req, res); });
}

MockChatServer::~MockChatServer() { stop(); }

int MockChatServer::start(const std::string& host, int port) {
  impl_->host = host;
  if (port == 0) {
    impl_->port = impl_->server.bind_to_any_port(host);
  } else {
    impl_->port = impl_->server.bind_to_port(host, port) ? port : -1;
  }
  if (impl_->port < 0) throw TransportError("mock server could not bind " + host);
  impl_->thread = std::thread([this] { impl_->server.listen_after_bind(); });
  impl_->server.wait_until_ready();
  return impl_->port;
}

void MockChatServer::listen(const std::string& host, int port) {
  impl_->host = host;
  impl_->port = port;
  if (!impl_->server.listen(host, port)) throw TransportError("mock server could not listen on " + host);
}

void MockChatServer::stop() {
  if (!impl_) return;
  impl_->server.stop();
  if (impl_->thread.joinable()) impl_->thread.join();
}

std::string MockChatServer::endpoint() const {
  return "http://" + impl_->host + ":" + std::to_string(impl_->port) + "/v1/chat/completions";
}

std::size_t MockChatServer::request_count() const { return impl_->requests.load(); }

}  // namespace dseg
