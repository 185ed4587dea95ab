#include <algorithm>
#include <cstdlib>
#include <deque>
#include <mutex>

#include "doctest.h"
#include "dseg/errors.hpp"
#include "dseg/llm.hpp"
#include "helpers.hpp"

using namespace dseg;
using Kind = LlmResponseError::Kind;

namespace {

class ScriptedClient : public ChatClient {
 public:
  explicit ScriptedClient(std::deque<std::string> replies) : replies_(std::move(replies)) {}
  std::string complete(const ChatRequest& request) override {
    std::lock_guard lock(mu_);
    ++calls;
    prompts.push_back(request.messages.at(0).content + "\n\n" + request.messages.at(1).content);
    if (replies_.empty()) throw TransportError("script exhausted");
    auto r = replies_.front();
    if (replies_.size() > 1) replies_.pop_front();
    if (r == "!transport") throw TransportError("connection refused");
    return r;
  }
  int calls = 0;
  std::vector<std::string> prompts;

 private:
  std::mutex mu_;
  std::deque<std::string> replies_;
};

Kind kind_of(std::string_view text, std::size_t t, bool strict = false) {
  try {
    parse_boundary_response(text, t, strict);
  } catch (const LlmResponseError& e) {
    CHECK(e.raw() == text);
    return e.kind();
  }
  FAIL("expected LlmResponseError");
  return Kind::kNoJsonObject;
}

Codebook talk_codebook() {
  Codebook cb;
  cb.name = "TalkMoves";
  cb.moves = {{"Restating", "Repeating a student's words verbatim.", {"So you said four."}},
              {"Revoicing", "Rephrasing a student's idea.", {}},
              {"Pressing", "Asking for reasoning.", {}},
              {"Marking", "Highlighting an important idea.", {}}};
  return cb;
}

}  // namespace

TEST_SUITE("llm") {
  TEST_CASE("generic prompt is the bundled template plus the turn listing") {
    auto d = testing::make_dialogue(3);
    auto p = build_segmentation_prompt(d, PromptMode::kGeneric, nullptr);
    CHECK(p.rendered_text.find("Return ONLY a JSON object") != std::string::npos);
    CHECK(p.rendered_text.find("{\"boundary_indices\":[integer, integer, ...]}") != std::string::npos);
    CHECK(p.rendered_text.find("Always include the final turn index as the last boundary.") != std::string::npos);
    CHECK(p.rendered_text.find("construct definitions") == std::string::npos);
    CHECK(p.user_text == "Dialogue turns (0-indexed):\n[0] turn 0\n[1] turn 1\n[2] turn 2\n");
    CHECK(p.rendered_text.find("T: ") == std::string::npos);
    auto again = build_segmentation_prompt(d, PromptMode::kGeneric, nullptr);
    CHECK(again.rendered_text == p.rendered_text);
    CHECK(again.dialogue_digest == p.dialogue_digest);
    PromptOptions speakers;
    speakers.include_speakers = true;
    CHECK(build_segmentation_prompt(d, PromptMode::kGeneric, nullptr, speakers).user_text.find("[1] S: turn 1") !=
          std::string::npos);
    auto cb = talk_codebook();
    CHECK_THROWS_AS(build_segmentation_prompt(d, PromptMode::kGeneric, &cb), ConfigError);
  }

  TEST_CASE("DA-aware prompt lists every definition in codebook order") {
    auto d = testing::make_dialogue(2);
    auto cb = talk_codebook();
    auto p = build_segmentation_prompt(d, PromptMode::kDaAware, &cb);
    std::size_t last = 0;
    for (const auto& m : cb.moves) {
      auto pos = p.system_text.find("- " + m.name + ": " + m.definition);
      REQUIRE(pos != std::string::npos);
      CHECK(pos > last);
      last = pos;
    }
    CHECK(p.system_text.find("use them only to guide segmentation") != std::string::npos);
    CHECK(p.system_text.find("{{") == std::string::npos);
    CHECK(p.system_text.find("Output format") > last);
    CHECK_THROWS_AS(build_segmentation_prompt(d, PromptMode::kDaAware, nullptr), ConfigError);
    CHECK_THROWS_AS(prompt_template("nope"), ConfigError);
  }

  TEST_CASE("boundary responses") {
    CHECK(parse_boundary_response("{\"boundary_indices\":[3,7,12]}", 13).indices() ==
          std::vector<std::size_t>{3, 7});
    CHECK(parse_boundary_response("```json\n{\"boundary_indices\":[4]}\n```", 5).empty());
    CHECK(parse_boundary_response("Here you go: {\"note\":\"}\", \"boundary_indices\":[1, 4]} done", 5).indices() ==
          std::vector<std::size_t>{1});
    CHECK(kind_of("Sure! [3, 9]", 13) == Kind::kNoJsonObject);
    CHECK(kind_of("{\"segments\":[1]}", 13) == Kind::kMissingField);
    CHECK(kind_of("{\"boundary_indices\":[\"3\"]}", 13) == Kind::kNonInteger);
    CHECK(kind_of("{\"boundary_indices\":[2.5]}", 13) == Kind::kNonInteger);
    CHECK(kind_of("{\"boundary_indices\":[2.0]}", 13) == Kind::kNonInteger);
    CHECK(kind_of("{\"boundary_indices\":[20]}", 13) == Kind::kOutOfRange);
    CHECK(kind_of("{\"boundary_indices\":[-1]}", 13) == Kind::kOutOfRange);
    CHECK(kind_of("{\"boundary_indices\":[18446744073709551615]}", 13) == Kind::kOutOfRange);
    CHECK(kind_of("ok {\"boundary_indices\":[3]}", 13, true) == Kind::kNoJsonObject);
    CHECK(parse_boundary_response("  {\"boundary_indices\":[3]}\n", 13, true).indices() ==
          std::vector<std::size_t>{3});
  }

  TEST_CASE("annotation responses") {
    auto d = testing::make_dialogue(3);
    auto cb = talk_codebook();
    auto r = parse_annotation_response(
        "{\"records\":[{\"id\":\"u0\",\"move\":\"Restating\"},{\"id\":\"u1\",\"move\":null}]}", d, cb, "ai");
    CHECK(r.labels.size() == 1);
    CHECK(r.labels.at(0) == "Restating");
    CHECK(parse_annotation_response("{\"records\":[]}", d, cb, "ai").labels.empty());
    try {
      parse_annotation_response("{\"records\":[{\"id\":\"u0\",\"move\":\"Dancing\"}]}", d, cb, "ai");
      FAIL("expected error");
    } catch (const LlmResponseError& e) {
      CHECK(e.kind() == Kind::kUnknownMove);
      CHECK(std::string(e.what()).find("Dancing") != std::string::npos);
    }
    try {
      parse_annotation_response("{\"records\":[{\"id\":\"u9\",\"move\":\"Marking\"}]}", d, cb, "ai");
      FAIL("expected error");
    } catch (const LlmResponseError& e) {
      CHECK(e.kind() == Kind::kUnknownId);
      CHECK(std::string(e.what()).find("u9") != std::string::npos);
    }
  }

  TEST_CASE("annotation prompt") {
    auto d = testing::make_dialogue(2);
    auto cb = talk_codebook();
    auto p = build_annotation_prompt(d, cb);
    CHECK(p.system_text.find("'records'") != std::string::npos);
    CHECK(p.system_text.find("- Pressing: Asking for reasoning.") != std::string::npos);
    CHECK(p.system_text.find("TalkMoves") != std::string::npos);
    CHECK(p.user_text.find("\"id\":\"u1\"") != std::string::npos);
    CHECK_THROWS_AS(build_annotation_prompt(d, cb, "label things"), ConfigError);
  }

  TEST_CASE("retry harness") {
    auto d = testing::make_dialogue(6, "sx");
    LlmClientConfig cfg;
    cfg.model = "m1";
    cfg.max_retries = 3;
    ScriptedClient client({"garbage", "!transport", "{\"boundary_indices\":[2,5]}"});
    AuditLog audit;
    auto seg = segment_llm(d, client, cfg, PromptMode::kGeneric, nullptr, &audit);
    CHECK(seg.boundaries.indices() == std::vector<std::size_t>{2});
    CHECK(seg.method.rfind("llm-generic model=m1 attempts=3 response=", 0) == 0);
    CHECK(client.calls == 3);
    CHECK(client.prompts[0] == client.prompts[2]);
    auto records = audit.records();
    REQUIRE(records.size() == 3);
    CHECK(records[0].outcome.rfind("parse error", 0) == 0);
    CHECK(records[1].outcome.rfind("transport error", 0) == 0);
    CHECK(records[1].response_hash.empty());
    CHECK(records[2].outcome == "ok");

    ScriptedClient broken({"nope"});
    cfg.max_retries = 2;
    try {
      segment_llm(d, broken, cfg, PromptMode::kGeneric, nullptr);
      FAIL("expected SegmentationFailed");
    } catch (const SegmentationFailed& e) {
      CHECK(e.attempts() == 3);
    }
    CHECK(broken.calls == 3);
  }

  TEST_CASE("config keeps credentials out") {
    LlmClientConfig c;
    auto j = c.to_json();
    CHECK_FALSE(j.contains("api_key"));
    j["api_key"] = "secret";
    CHECK_THROWS_AS(LlmClientConfig::from_json(j), ConfigError);
    nlohmann::json bad{{"endpoint", "ftp://x"}};
    CHECK_THROWS_AS(LlmClientConfig::from_json(bad), ConfigError);
    nlohmann::json zero{{"max_concurrency", 0}};
    CHECK_THROWS_AS(LlmClientConfig::from_json(zero), ConfigError);
  }

  TEST_CASE("HTTP client against the mock server") {
    CannedResponses canned = CannedResponses::from_json(nlohmann::json::parse(R"({
      "rules": [
        {"match": "[0] alpha", "responses": [{"status": 500, "body": "boom"}, "{\"boundary_indices\":[1,3]}"]},
        {"match": "[0] beta", "responses": ["```json\n{\"boundary_indices\":[0,2]}\n```"]}
      ]})"));
    MockChatServer server(std::move(canned));
    server.start();
    LlmClientConfig cfg;
    cfg.endpoint = server.endpoint();
    cfg.timeout_seconds = 5;
    cfg.api_key_env = "DSEG_TEST_TOKEN";
    ::setenv("DSEG_TEST_TOKEN", "t0ken", 1);
    HttpChatClient client(cfg);

    Dialogue a = testing::make_dialogue(4, "a");
    a.utterances[0].text = "alpha";
    Dialogue b = testing::make_dialogue(3, "b");
    b.utterances[0].text = "beta";
    AuditLog audit;
    auto sa = segment_llm(a, client, cfg, PromptMode::kGeneric, nullptr, &audit);
    CHECK(sa.boundaries.indices() == std::vector<std::size_t>{1});
    CHECK(sa.method.find("attempts=2") != std::string::npos);
    auto sb = segment_llm(b, client, cfg, PromptMode::kGeneric, nullptr, &audit);
    CHECK(sb.boundaries.indices() == std::vector<std::size_t>{0});
    CHECK(server.request_count() == 3);

    Dialogue c = testing::make_dialogue(3, "c");
    ChatRequest req{"m", {{"user", "nothing matches"}}, 0.0, 10};
    CHECK_THROWS_AS(client.complete(req), TransportError);
    server.stop();

    LlmClientConfig dead = cfg;
    dead.endpoint = "http://127.0.0.1:1/v1/chat/completions";
    dead.timeout_seconds = 1;
    HttpChatClient offline(dead);
    CHECK_THROWS_AS(offline.complete(req), TransportError);
    auto log = audit.to_jsonl();
    CHECK(std::count(log.begin(), log.end(), '\n') == 3);
  }
}
