#pragma once

#include <cstddef>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "dseg/core.hpp"
#include "dseg/errors.hpp"
#include "json.hpp"

namespace dseg {

enum class PromptMode { kGeneric, kDaAware, kAnnotate };

const char* to_string(PromptMode mode);

struct PromptOptions {
  bool include_speakers = false;  // turn listing shows "T: text" instead of "text"
};

struct PromptSpec {
  PromptMode mode = PromptMode::kGeneric;
  std::optional<Codebook> codebook;
  std::string template_name;  // e.g. "segment_generic.v1"
  std::string system_text;
  std::string user_text;
  std::string rendered_text;  // system + blank line + user
  std::string dialogue_digest;
};

// Bundled template text by name ("segment_generic.v1", "segment_da_aware.v1",
// "annotate.v1"). Throws ConfigError for unknown names.
std::string_view prompt_template(std::string_view name);

// Generic mode forbids a codebook, DA-aware mode requires one. The user
// message lists turns as "[i] text" with 0-based i.
PromptSpec build_segmentation_prompt(const Dialogue& dialogue, PromptMode mode, const Codebook* codebook,
                                     const PromptOptions& options = {});

// `template_text` must mention the 'records' envelope and the id/move fields.
PromptSpec build_annotation_prompt(const Dialogue& dialogue, const Codebook& codebook,
                                   std::string_view template_text = prompt_template("annotate.v1"));

// Malformed model output. Keeps the raw response for auditing.
class LlmResponseError : public ParseError {
 public:
  enum class Kind { kNoJsonObject, kMissingField, kNonInteger, kOutOfRange, kUnknownId, kUnknownMove };

  LlmResponseError(Kind kind, const std::string& message, std::string raw)
      : ParseError(message), kind_(kind), raw_(std::move(raw)) {}
  Kind kind() const { return kind_; }
  const std::string& raw() const { return raw_; }

 private:
  Kind kind_;
  std::string raw_;
};

// First balanced {...} in `text` that parses as a JSON object. Skips string
// contents when matching braces, so prose and code fences are tolerated.
std::optional<nlohmann::json> extract_json_object(std::string_view text);

// Reads {"boundary_indices":[...]} and normalizes it with the final-turn
// sentinel stripped. In strict mode the whole trimmed text must be the object.
BoundarySet parse_boundary_response(std::string_view text, std::size_t length, bool strict = false);

// Reads {"records":[{"id":...,"move":...|null}, ...]}. A move of null or
// "None" leaves the utterance unlabeled.
RaterLabels parse_annotation_response(std::string_view text, const Dialogue& dialogue, const Codebook& codebook,
                                      const std::string& rater_id);

struct LlmClientConfig {
  std::string endpoint = "http://127.0.0.1:8080/v1/chat/completions";
  std::string model = "default";
  double timeout_seconds = 120.0;
  std::size_t max_retries = 2;
  std::size_t max_concurrency = 4;
  double temperature = 0.0;
  std::size_t max_tokens = 4096;
  // Name of the environment variable holding the bearer token.
  std::string api_key_env = "DSEG_LLM_API_KEY";
  bool strict_json = false;
  bool include_speakers = false;

  void validate() const;
  nlohmann::json to_json() const;
  static LlmClientConfig from_json(const nlohmann::json& j);
};

struct ChatMessage {
  std::string role;
  std::string content;
};

struct ChatRequest {
  std::string model;
  std::vector<ChatMessage> messages;
  double temperature = 0.0;
  std::size_t max_tokens = 0;

  nlohmann::json to_json() const;
};

class TransportError : public Error {
 public:
  using Error::Error;
};

// Shareable across threads; complete() may be called concurrently.
class ChatClient {
 public:
  virtual ~ChatClient() = default;
  // Content of the first choice. Throws TransportError.
  virtual std::string complete(const ChatRequest& request) = 0;
};

class HttpChatClient : public ChatClient {
 public:
  explicit HttpChatClient(LlmClientConfig config);
  std::string complete(const ChatRequest& request) override;

 private:
  LlmClientConfig config_;
  std::string scheme_host_port_;
  std::string path_;
  std::string token_;
};

struct AuditRecord {
  std::string session_id;
  std::string purpose;  // "segment" or "annotate"
  std::size_t attempt = 0;
  std::string prompt_hash;
  std::string response_hash;  // empty when no response arrived
  std::string outcome;        // "ok" or the error message
};

class AuditLog {
 public:
  void append(AuditRecord record);
  std::vector<AuditRecord> records() const;
  // Sorted by (session, purpose, attempt) so the log is schedule independent.
  std::string to_jsonl() const;

 private:
  mutable std::mutex mu_;
  std::vector<AuditRecord> records_;
};

class SegmentationFailed : public Error {
 public:
  SegmentationFailed(const std::string& session_id, std::size_t attempts, const std::string& last_error)
      : Error("session '" + session_id + "' failed after " + std::to_string(attempts) +
              " attempts: " + last_error),
        attempts_(attempts) {}
  std::size_t attempts() const { return attempts_; }

 private:
  std::size_t attempts_;
};

// Prompt, complete, parse; on any failure retries the identical prompt up to
// max_retries more times. The method descriptor records the model id, the
// attempt count and the hash of the accepted response.
Segmentation segment_llm(const Dialogue& dialogue, ChatClient& client, const LlmClientConfig& config,
                         PromptMode mode, const Codebook* codebook, AuditLog* audit = nullptr);

RaterLabels annotate_llm(const Dialogue& dialogue, ChatClient& client, const LlmClientConfig& config,
                         const Codebook& codebook, std::string_view template_text, const std::string& rater_id,
                         AuditLog* audit = nullptr);

// Offline stand-in for a chat-completion endpoint. Each rule answers requests
// whose messages contain `match`, walking its response list and repeating the
// last entry once exhausted. A response is either message content (string)
// or {"status": code, "body": text} for a raw HTTP reply.
struct CannedResponses {
  struct Rule {
    std::string match;
    std::vector<nlohmann::json> responses;
  };
  std::vector<Rule> rules;
  std::optional<nlohmann::json> fallback;

  static CannedResponses from_json(const nlohmann::json& j);
};

class MockChatServer {
 public:
  explicit MockChatServer(CannedResponses canned);
  ~MockChatServer();
  MockChatServer(const MockChatServer&) = delete;
  MockChatServer& operator=(const MockChatServer&) = delete;

  // Binds (port 0 picks a free port) and serves on a background thread.
  int start(const std::string& host = "127.0.0.1", int port = 0);
  // Blocks serving on the calling thread.
  void listen(const std::string& host, int port);
  void stop();
  std::string endpoint() const;
  std::size_t request_count() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace dseg
