#include <algorithm>
#include <cstdlib>
#include <tuple>

#include "dseg/llm.hpp"
#include "dseg/util.hpp"
#include "httplib.h"

namespace dseg {

using nlohmann::json;

void LlmClientConfig::validate() const {
  if (endpoint.rfind("http://", 0) != 0 && endpoint.rfind("https://", 0) != 0) {
    throw ConfigError("LLM endpoint must be an http:// or https:// URL: " + endpoint);
  }
  if (max_concurrency < 1) throw ConfigError("max_concurrency must be at least 1");
  if (!(timeout_seconds > 0.0)) throw ConfigError("timeout must be positive");
  if (model.empty()) throw ConfigError("model identifier must not be empty");
}

json LlmClientConfig::to_json() const {
  return {{"endpoint", endpoint},
          {"model", model},
          {"timeout_seconds", timeout_seconds},
          {"max_retries", max_retries},
          {"max_concurrency", max_concurrency},
          {"temperature", temperature},
          {"max_tokens", max_tokens},
          {"api_key_env", api_key_env},
          {"strict_json", strict_json},
          {"include_speakers", include_speakers}};
}

LlmClientConfig LlmClientConfig::from_json(const json& j) {
  LlmClientConfig c;
  if (!j.is_object()) return c;
  if (j.contains("api_key") || j.contains("token")) {
    throw ConfigError("LLM credentials are read from the environment only; remove api_key/token from the config");
  }
  c.endpoint = j.value("endpoint", c.endpoint);
  c.model = j.value("model", c.model);
  c.timeout_seconds = j.value("timeout_seconds", c.timeout_seconds);
  c.max_retries = j.value("max_retries", c.max_retries);
  c.max_concurrency = j.value("max_concurrency", c.max_concurrency);
  c.temperature = j.value("temperature", c.temperature);
  c.max_tokens = j.value("max_tokens", c.max_tokens);
  c.api_key_env = j.value("api_key_env", c.api_key_env);
  c.strict_json = j.value("strict_json", c.strict_json);
  c.include_speakers = j.value("include_speakers", c.include_speakers);
  c.validate();
  return c;
}

json ChatRequest::to_json() const {
  json msgs = json::array();
  for (const auto& m : messages) msgs.push_back({{"role", m.role}, {"content", m.content}});
  return {{"model", model}, {"messages", msgs}, {"temperature", temperature}, {"max_tokens", max_tokens}};
}

HttpChatClient::HttpChatClient(LlmClientConfig config) : config_(std::move(config)) {
  config_.validate();
  auto scheme_end = config_.endpoint.find("://") + 3;
  auto path_start = config_.endpoint.find('/', scheme_end);
  scheme_host_port_ = config_.endpoint.substr(0, path_start);
  path_ = path_start == std::string::npos ? "/" : config_.endpoint.substr(path_start);
  if (!config_.api_key_env.empty()) {
    if (const char* token = std::getenv(config_.api_key_env.c_str())) token_ = token;
  }
}

std::string HttpChatClient::complete(const ChatRequest& request) {
  httplib::Client cli(scheme_host_port_);
  if (!cli.is_valid()) throw TransportError("unsupported endpoint: " + config_.endpoint);
  const auto secs = static_cast<time_t>(config_.timeout_seconds);
  const auto usecs = static_cast<time_t>((config_.timeout_seconds - static_cast<double>(secs)) * 1e6);
  cli.set_connection_timeout(secs, usecs);
  cli.set_read_timeout(secs, usecs);
  cli.set_write_timeout(secs, usecs);
  if (!token_.empty()) cli.set_bearer_token_auth(token_);
  auto res = cli.Post(path_, request.to_json().dump(), "application/json");
  if (!res) throw TransportError("request to " + config_.endpoint + " failed: " + httplib::to_string(res.error()));
  if (res->status != 200) {
    throw TransportError("endpoint returned HTTP " + std::to_string(res->status) + ": " + res->body.substr(0, 200));
  }
  auto body = json::parse(res->body, nullptr, false);
  if (body.is_discarded() || !body.is_object()) throw TransportError("endpoint returned a non-JSON body");
  try {
    const auto& content = body.at("choices").at(0).at("message").at("content");
    if (!content.is_string()) throw TransportError("first choice has no string content");
    return content.get<std::string>();
  } catch (const json::exception&) {
    throw TransportError("response lacks choices[0].message.content");
  }
}

void AuditLog::append(AuditRecord record) {
  std::lock_guard lock(mu_);
  records_.push_back(std::move(record));
}

std::vector<AuditRecord> AuditLog::records() const {
  std::lock_guard lock(mu_);
  return records_;
}

std::string AuditLog::to_jsonl() const {
  auto recs = records();
  std::sort(recs.begin(), recs.end(), [](const AuditRecord& a, const AuditRecord& b) {
    return std::tie(a.session_id, a.purpose, a.attempt) < std::tie(b.session_id, b.purpose, b.attempt);
  });
  std::string out;
  for (const auto& r : recs) {
    out += json{{"session_id", r.session_id},
                {"purpose", r.purpose},
                {"attempt", r.attempt},
                {"prompt_hash", r.prompt_hash},
                {"response_hash", r.response_hash},
                {"outcome", r.outcome}}
               .dump() +
           "\n";
  }
  return out;
}

namespace {

// Runs the prompt until `parse` accepts a response or attempts run out.
template <typename Parse>
auto with_retries(const std::string& session_id, const std::string& purpose, const PromptSpec& prompt,
                  ChatClient& client, const LlmClientConfig& config, AuditLog* audit, Parse&& parse,
                  std::size_t& attempts_out, std::string& response_hash_out) {
  ChatRequest request;
  request.model = config.model;
  request.messages = {{"system", prompt.system_text}, {"user", prompt.user_text}};
  request.temperature = config.temperature;
  request.max_tokens = config.max_tokens;
  const auto prompt_hash = hex_digest(prompt.rendered_text);
  std::string last_error = "no attempt made";
  const std::size_t max_attempts = config.max_retries + 1;
  for (std::size_t attempt = 1; attempt <= max_attempts; ++attempt) {
    AuditRecord rec{session_id, purpose, attempt, prompt_hash, "", ""};
    std::string response;
    try {
      response = client.complete(request);
    } catch (const Error& e) {
      last_error = e.what();
      rec.outcome = std::string("transport error: ") + e.what();
      if (audit) audit->append(std::move(rec));
      continue;
    }
    rec.response_hash = hex_digest(response);
    try {
      auto parsed = parse(response);
      rec.outcome = "ok";
      attempts_out = attempt;
      response_hash_out = rec.response_hash;
      if (audit) audit->append(std::move(rec));
      return parsed;
    } catch (const Error& e) {
      last_error = e.what();
      rec.outcome = std::string("parse error: ") + e.what();
      if (audit) audit->append(std::move(rec));
    }
  }
  throw SegmentationFailed(session_id, max_attempts, last_error);
}

}  // namespace

Segmentation segment_llm(const Dialogue& dialogue, ChatClient& client, const LlmClientConfig& config,
                         PromptMode mode, const Codebook* codebook, AuditLog* audit) {
  PromptOptions options;
  options.include_speakers = config.include_speakers;
  auto prompt = build_segmentation_prompt(dialogue, mode, codebook, options);
  std::size_t attempts = 0;
  std::string response_hash;
  auto boundaries = with_retries(
      dialogue.session_id, "segment", prompt, client, config, audit,
      [&](const std::string& response) { return parse_boundary_response(response, dialogue.size(), config.strict_json); },
      attempts, response_hash);
  const std::string family = mode == PromptMode::kGeneric ? "llm-generic" : "llm-da";
  json fp{{"template", prompt.template_name},
          {"model", config.model},
          {"temperature", config.temperature},
          {"max_tokens", config.max_tokens},
          {"strict_json", config.strict_json},
          {"include_speakers", config.include_speakers},
          {"system_prompt", hex_digest(prompt.system_text)}};
  Segmentation s;
  s.session_id = dialogue.session_id;
  s.boundaries = std::move(boundaries);
  s.method = family + " model=" + config.model + " attempts=" + std::to_string(attempts) +
             " response=" + response_hash;
  s.params_fingerprint = hex_digest(fp.dump());
  return s;
}

RaterLabels annotate_llm(const Dialogue& dialogue, ChatClient& client, const LlmClientConfig& config,
                         const Codebook& codebook, std::string_view template_text, const std::string& rater_id,
                         AuditLog* audit) {
  auto prompt = build_annotation_prompt(dialogue, codebook, template_text);
  std::size_t attempts = 0;
  std::string response_hash;
  return with_retries(
      dialogue.session_id, "annotate", prompt, client, config, audit,
      [&](const std::string& response) {
        return parse_annotation_response(response, dialogue, codebook, rater_id);
      },
      attempts, response_hash);
}

}  // namespace dseg
