#include <algorithm>
#include <utility>

#include "dseg/llm.hpp"
#include "dseg/util.hpp"

namespace dseg {

namespace detail {
extern const std::pair<std::string_view, std::string_view> kPromptAssets[];
extern const std::size_t kPromptAssetCount;
}  // namespace detail

namespace {

void replace_all(std::string& text, std::string_view key, const std::string& value) {
  for (auto pos = text.find(key); pos != std::string::npos; pos = text.find(key, pos + value.size())) {
    text.replace(pos, key.size(), value);
  }
}

std::string trim_trailing_newlines(std::string_view s) {
  while (!s.empty() && (s.back() == '\n' || s.back() == '\r')) s.remove_suffix(1);
  return std::string(s);
}

std::string move_definitions(const Codebook& codebook) {
  std::string out;
  for (const auto& m : codebook.moves) {
    if (!out.empty()) out += "\n";
    out += "- " + m.name + ": " + m.definition;
  }
  return out;
}

std::string turn_listing(const Dialogue& dialogue, const PromptOptions& options) {
  std::string out = "Dialogue turns (0-indexed):\n";
  for (const auto& u : dialogue.utterances) {
    out += "[" + std::to_string(u.index) + "] ";
    if (options.include_speakers) out += u.speaker + ": ";
    out += u.text + "\n";
  }
  return out;
}

PromptSpec finish(PromptSpec spec) {
  spec.rendered_text = spec.system_text + "\n\n" + spec.user_text;
  spec.dialogue_digest = hex_digest(spec.user_text);
  return spec;
}

}  // namespace

const char* to_string(PromptMode mode) {
  switch (mode) {
    case PromptMode::kGeneric: return "generic";
    case PromptMode::kDaAware: return "da_aware";
    case PromptMode::kAnnotate: return "annotate";
  }
  return "?";
}

std::string_view prompt_template(std::string_view name) {
  for (std::size_t i = 0; i < detail::kPromptAssetCount; ++i) {
    if (detail::kPromptAssets[i].first == name) return detail::kPromptAssets[i].second;
  }
  throw ConfigError("unknown prompt template '" + std::string(name) + "'");
}

PromptSpec build_segmentation_prompt(const Dialogue& dialogue, PromptMode mode, const Codebook* codebook,
                                     const PromptOptions& options) {
  PromptSpec spec;
  spec.mode = mode;
  switch (mode) {
    case PromptMode::kGeneric:
      if (codebook) throw ConfigError("generic segmentation prompt takes no codebook");
      spec.template_name = "segment_generic.v1";
      spec.system_text = trim_trailing_newlines(prompt_template(spec.template_name));
      break;
    case PromptMode::kDaAware: {
      if (!codebook) throw ConfigError("DA-aware segmentation prompt requires a codebook");
      spec.codebook = *codebook;
      spec.template_name = "segment_da_aware.v1";
      std::string text = trim_trailing_newlines(prompt_template(spec.template_name));
      replace_all(text, "{{MOVE_DEFINITIONS}}", move_definitions(*codebook));
      spec.system_text = std::move(text);
      break;
    }
    case PromptMode::kAnnotate:
      throw ConfigError("use build_annotation_prompt for annotation prompts");
  }
  spec.user_text = turn_listing(dialogue, options);
  return finish(std::move(spec));
}

PromptSpec build_annotation_prompt(const Dialogue& dialogue, const Codebook& codebook,
                                   std::string_view template_text) {
  for (std::string_view needle : {"records", "id", "move"}) {
    if (template_text.find(needle) == std::string_view::npos) {
      throw ConfigError("annotation template must describe the 'records' envelope with id and move fields");
    }
  }
  PromptSpec spec;
  spec.mode = PromptMode::kAnnotate;
  spec.codebook = codebook;
  spec.template_name = "annotate";
  std::string text = trim_trailing_newlines(template_text);
  std::string allowed;
  std::string examples;
  for (const auto& m : codebook.moves) {
    allowed += (allowed.empty() ? "" : "\n") + std::string("- ") + m.name;
    examples += (examples.empty() ? "" : "\n") + std::string("- ") + m.name + ": " +
                nlohmann::json(m.examples).dump();
  }
  replace_all(text, "{{CODEBOOK_NAME}}", codebook.name);
  replace_all(text, "{{ALLOWED_MOVES}}", allowed);
  replace_all(text, "{{MOVE_DEFINITIONS}}", move_definitions(codebook));
  replace_all(text, "{{MOVE_EXAMPLES}}", examples);
  spec.system_text = std::move(text);
  std::string user = "Utterances:\n";
  for (const auto& u : dialogue.utterances) {
    user += nlohmann::json{{"id", u.id}, {"speaker", u.speaker}, {"text", u.text}}.dump() + "\n";
  }
  spec.user_text = std::move(user);
  return finish(std::move(spec));
}

}  // namespace dseg
