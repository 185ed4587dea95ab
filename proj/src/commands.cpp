#include "dseg/commands.hpp"

#include <algorithm>
#include <cstdlib>
#include <memory>
#include <mutex>
#include <set>

#include "dseg/errors.hpp"
#include "dseg/util.hpp"

namespace dseg {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

std::string interpolate_string(const std::string& s) {
  std::string out;
  for (std::size_t i = 0; i < s.size();) {
    if (s.compare(i, 3, "$${") == 0) {
      out += "${";
      i += 3;
    } else if (s.compare(i, 2, "${") == 0) {
      auto close = s.find('}', i + 2);
      if (close == std::string::npos) throw ConfigError("unterminated ${ in config value: " + s);
      auto name = s.substr(i + 2, close - i - 2);
      const char* value = name.empty() ? nullptr : std::getenv(name.c_str());
      if (!value) throw ConfigError("config references unset environment variable '" + name + "'");
      out += value;
      i = close + 1;
    } else {
      out += s[i++];
    }
  }
  return out;
}

std::string relative_label(const fs::path& p, const fs::path& base) {
  auto rel = p.lexically_normal().lexically_relative(base.lexically_normal());
  if (rel.empty() || *rel.begin() == "..") return p.lexically_normal().generic_string();
  return rel.generic_string();
}

json run_header(const std::string& command) { return {{"format_version", kFormatVersion}, {"command", command}}; }

void write_json(const fs::path& path, const json& j) { write_file_atomic(path, j.dump(2) + "\n"); }

// Runs `body` and maps library errors to exit code 1.
template <typename F>
int guarded(std::ostream& err, F&& body) {
  try {
    return body();
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
  } catch (const json::exception& e) {
    err << "error: invalid configuration value: " << e.what() << "\n";
  } catch (const fs::filesystem_error& e) {
    err << "error: " << e.what() << "\n";
  }
  return kExitInvalid;
}

struct Failure {
  std::string session_id;
  std::string message;
};

json failures_json(const std::vector<Failure>& failures) {
  json arr = json::array();
  for (const auto& f : failures) arr.push_back({{"session_id", f.session_id}, {"error", f.message}});
  return arr;
}

}  // namespace

json interpolate_env(const json& config) {
  if (config.is_string()) return interpolate_string(config.get<std::string>());
  if (config.is_object()) {
    json out = json::object();
    for (const auto& [k, v] : config.items()) out[k] = interpolate_env(v);
    return out;
  }
  if (config.is_array()) {
    json out = json::array();
    for (const auto& v : config) out.push_back(interpolate_env(v));
    return out;
  }
  return config;
}

json load_run_config(const fs::path& path) {
  auto j = json::parse(read_file(path), nullptr, false);
  if (j.is_discarded() || !j.is_object()) throw ConfigError("config file " + path.string() + " is not a JSON object");
  if (j.value("format_version", kFormatVersion) != kFormatVersion) {
    throw ConfigError("unsupported config format_version " + j["format_version"].dump());
  }
  return interpolate_env(j);
}

json input_digests(const fs::path& manifest_path, bool with_embeddings) {
  const auto manifest = load_manifest(manifest_path);
  const auto base = manifest_path.parent_path();
  json files = json::object();
  auto add = [&](const fs::path& p) { files[relative_label(p, base)] = hex_digest(read_file(p)); };
  add(manifest_path);
  add(manifest.codebook_path);
  for (const auto& s : manifest.sessions) {
    add(s.transcript_path);
    if (with_embeddings && s.embedding_path) add(*s.embedding_path);
  }
  for (const auto& l : manifest.label_files) add(l.path);
  return files;
}

int cmd_validate(const ValidateOptions& options, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const auto manifest = load_manifest(options.manifest);
    const auto report = validate_corpus(manifest, options.jobs);
    out << "session\tutterances\tlabeled\tembeddings\n";
    for (const auto& row : report.rows) {
      std::string labeled;
      for (const auto& [rater, n] : row.labeled) {
        if (!labeled.empty()) labeled += ",";
        labeled += rater + "=" + std::to_string(n);
      }
      out << row.session_id << "\t" << row.utterances << "\t" << (labeled.empty() ? "-" : labeled) << "\t"
          << (row.has_embeddings ? "yes" : "no") << "\n";
    }
    out << report.rows.size() << " sessions, " << report.errors.size() << " errors\n";
    for (const auto& e : report.errors) {
      err << "error: " << (e.session_id.empty() ? "" : "[" + e.session_id + "] ") << e.message << "\n";
    }
    return report.ok() ? kExitOk : kExitInvalid;
  });
}

const char* to_string(SegmentMethod method) {
  switch (method) {
    case SegmentMethod::kCoherence: return "coherence";
    case SegmentMethod::kCoherenceFused: return "coherence-fused";
    case SegmentMethod::kLlmGeneric: return "llm-generic";
    case SegmentMethod::kLlmDa: return "llm-da";
  }
  return "?";
}

SegmentMethod parse_segment_method(const std::string& text) {
  for (auto m : {SegmentMethod::kCoherence, SegmentMethod::kCoherenceFused, SegmentMethod::kLlmGeneric,
                 SegmentMethod::kLlmDa}) {
    if (text == to_string(m)) return m;
  }
  throw ConfigError("unknown segmentation method '" + text +
                    "' (expected coherence, coherence-fused, llm-generic or llm-da)");
}

int cmd_segment(const SegmentOptions& options, std::ostream& out, std::ostream& err) {
  return guarded(err, [&]() -> int {
    const bool is_llm = options.method == SegmentMethod::kLlmGeneric || options.method == SegmentMethod::kLlmDa;
    const bool is_fused = options.method == SegmentMethod::kCoherenceFused;
    if (options.out_dir.empty()) throw ConfigError("an output directory is required");
    options.decode.validate();
    if (is_fused) options.fusion.validate();
    if (is_llm) options.llm.validate();

    const auto manifest = load_manifest(options.manifest);
    if (!is_llm) {
      for (const auto& s : manifest.sessions) {
        if (!s.embedding_path) {
          throw ConfigError(std::string(to_string(options.method)) + " needs embeddings but session '" +
                            s.session_id + "' has none in the manifest");
        }
      }
    }
    const auto corpus = load_corpus(manifest, !is_llm, options.jobs);

    json config = run_header("segment");
    config["manifest"] = options.manifest.generic_string();
    config["method"] = to_string(options.method);
    config["jobs"] = options.jobs;
    config["allow_partial"] = options.allow_partial;
    if (!is_llm) config["decode"] = options.decode.to_json();
    if (is_fused) {
      config["fusion"] = options.fusion.to_json();
      config["memory_rater"] = options.memory_rater;
    }
    if (is_llm) config["llm"] = options.llm.to_json();

    MemoryBank bank;
    MoveEmbeddingTable table;
    std::string fused_fingerprint;
    if (is_fused) {
      if (!corpus.has_rater(options.memory_rater)) {
        throw ConfigError("memory rater '" + options.memory_rater + "' has no label file in the corpus");
      }
      bank = build_memory(corpus, options.memory_rater);
      table = build_move_table(corpus.codebook, bank, options.fusion.table_mode, options.fusion.seed);
      const auto bank_bytes = serialize_memory_bank(bank, ContainerEncoding::kBinary);
      const auto table_bytes = serialize_move_table(table, ContainerEncoding::kBinary);
      write_file_atomic(options.out_dir / "run" / "memory_bank.emb", bank_bytes);
      write_file_atomic(options.out_dir / "run" / "move_table.emb", table_bytes);
      fused_fingerprint = hex_digest(json{{"decode", options.decode.to_json()},
                                          {"fusion", options.fusion.to_json()},
                                          {"memory", hex_digest(bank_bytes)},
                                          {"table", hex_digest(table_bytes)}}
                                         .dump());
    }

    std::unique_ptr<ChatClient> owned_client;
    ChatClient* client = options.client;
    if (is_llm && !client) {
      owned_client = std::make_unique<HttpChatClient>(options.llm);
      client = owned_client.get();
    }

    write_json(options.out_dir / "run" / "config.json", config);
    write_json(options.out_dir / "run" / "inputs.json", input_digests(options.manifest, !is_llm));

    AuditLog audit;
    std::mutex mu;
    std::vector<Failure> failures;
    FusionDiagnostics diag_total;
    std::size_t workers = is_llm ? std::min(options.jobs, options.llm.max_concurrency) : options.jobs;
    parallel_for(corpus.sessions.size(), std::max<std::size_t>(workers, 1), [&](std::size_t i) {
      const auto& session = corpus.sessions[i];
      const auto& sid = session.dialogue.session_id;
      try {
        Segmentation seg;
        switch (options.method) {
          case SegmentMethod::kCoherence:
            seg = segment_coherence(session.dialogue, *session.embeddings, options.decode);
            break;
          case SegmentMethod::kCoherenceFused: {
            FusionDiagnostics diag;
            auto fused = fused_embeddings(*session.embeddings, bank, table, options.fusion, &diag);
            if (options.fusion.alpha_fuse == 0.0) {
              // The fused sequence is the input itself, so the output is the baseline's.
              seg = segment_coherence(session.dialogue, fused, options.decode);
            } else {
              seg = segment_coherence(session.dialogue, fused, options.decode, "coherence-fused");
              seg.params_fingerprint = fused_fingerprint;
            }
            std::lock_guard lock(mu);
            diag_total.clamped_queries += diag.clamped_queries;
            diag_total.degenerate += diag.degenerate;
            break;
          }
          case SegmentMethod::kLlmGeneric:
            seg = segment_llm(session.dialogue, *client, options.llm, PromptMode::kGeneric, nullptr, &audit);
            break;
          case SegmentMethod::kLlmDa:
            seg = segment_llm(session.dialogue, *client, options.llm, PromptMode::kDaAware, &corpus.codebook, &audit);
            break;
        }
        write_file_atomic(options.out_dir / (sid + ".json"), serialize_segmentation(seg));
      } catch (const Error& e) {
        std::lock_guard lock(mu);
        failures.push_back({sid, e.what()});
      }
    });
    std::sort(failures.begin(), failures.end(),
              [](const Failure& a, const Failure& b) { return a.session_id < b.session_id; });

    const int code = failures.empty() || options.allow_partial ? kExitOk : kExitPartial;
    json summary = run_header("segment");
    summary["method"] = to_string(options.method);
    summary["sessions"] = corpus.sessions.size();
    summary["succeeded"] = corpus.sessions.size() - failures.size();
    summary["failed"] = failures_json(failures);
    summary["exit_code"] = code;
    if (is_fused) {
      summary["fusion"] = {{"memory_entries", bank.size()},
                           {"clamped_queries", diag_total.clamped_queries},
                           {"degenerate", diag_total.degenerate}};
    }
    write_json(options.out_dir / "run" / "summary.json", summary);
    if (is_llm) write_file_atomic(options.out_dir / "run" / "audit.jsonl", audit.to_jsonl());

    out << to_string(options.method) << ": " << (corpus.sessions.size() - failures.size()) << "/"
        << corpus.sessions.size() << " sessions segmented into " << options.out_dir.generic_string() << "\n";
    for (const auto& f : failures) err << "failed: [" << f.session_id << "] " << f.message << "\n";
    return code;
  });
}

int cmd_evaluate(const EvaluateOptions& options, std::ostream& out, std::ostream& err) {
  return guarded(err, [&]() -> int {
    if (options.inputs.empty()) throw ConfigError("at least one segmentation directory is required");
    if (options.out_dir.empty()) throw ConfigError("an output directory is required");
    const auto manifest = load_manifest(options.manifest);
    const auto corpus = load_corpus(manifest, false, options.metrics.jobs);
    for (const auto* rater : {&options.metrics.human_rater, &options.metrics.ai_rater}) {
      if (!corpus.has_rater(*rater)) throw ConfigError("rater '" + *rater + "' has no label file in the corpus");
    }

    std::vector<MetricsReport> reports;
    json missing_all = json::object();
    for (const auto& input : options.inputs) {
      std::vector<Segmentation> segs;
      std::vector<std::string> missing;
      for (const auto& session : corpus.sessions) {
        const auto& sid = session.dialogue.session_id;
        const auto path = input.dir / (sid + ".json");
        if (!fs::exists(path)) {
          missing.push_back(sid);
          continue;
        }
        auto seg = parse_segmentation(read_file(path), session.dialogue.size());
        if (seg.session_id != sid) {
          throw ValidationError(path.generic_string() + " names session '" + seg.session_id + "'");
        }
        segs.push_back(std::move(seg));
      }
      if (!missing.empty()) {
        std::string list;
        for (const auto& m : missing) list += (list.empty() ? "" : ", ") + m;
        if (!options.allow_partial) {
          throw ValidationError(input.dir.generic_string() + " lacks segmentations for " +
                                std::to_string(missing.size()) + " sessions: " + list);
        }
        err << "warning: " << input.dir.generic_string() << " lacks " << missing.size() << " sessions: " << list
            << "\n";
        missing_all[input.dir.generic_string()] = missing;
      }
      if (segs.empty()) throw ValidationError(input.dir.generic_string() + " contains no segmentations");
      std::string name = input.name;
      if (name.empty()) name = segs.front().method.substr(0, segs.front().method.find(' '));
      if (name.empty()) name = input.dir.filename().generic_string();
      reports.push_back(evaluate_corpus(corpus, segs, options.metrics, name));
    }

    json config = run_header("evaluate");
    config["manifest"] = options.manifest.generic_string();
    json inputs = json::array();
    for (const auto& in : options.inputs) inputs.push_back({{"name", in.name}, {"dir", in.dir.generic_string()}});
    config["inputs"] = inputs;
    config["metrics"] = {{"human_rater", options.metrics.human_rater},
                         {"ai_rater", options.metrics.ai_rater},
                         {"unlabeled", to_string(options.metrics.unlabeled)},
                         {"normalized_adjacent_js", options.metrics.normalized_adjacent_js},
                         {"ci_level", options.metrics.ci_level},
                         {"bootstrap_iterations", options.metrics.bootstrap_iterations},
                         {"seed", options.metrics.seed}};
    config["table_rater"] = options.table_rater == ReportRater::kHuman ? "human" : "ai";
    config["allow_partial"] = options.allow_partial;

    json segment_digests = json::object();
    for (const auto& in : options.inputs) {
      for (const auto& session : corpus.sessions) {
        const auto path = in.dir / (session.dialogue.session_id + ".json");
        if (fs::exists(path)) segment_digests[path.generic_string()] = hex_digest(read_file(path));
      }
    }
    json digests{{"corpus", input_digests(options.manifest, false)}, {"segmentations", segment_digests}};

    const auto markdown = render_markdown(reports, options.table_rater);
    json report_json = run_header("evaluate");
    report_json["reports"] = json::array();
    for (const auto& r : reports) report_json["reports"].push_back(report_to_json(r));

    write_json(options.out_dir / "run" / "config.json", config);
    write_json(options.out_dir / "run" / "inputs.json", digests);
    write_file_atomic(options.out_dir / "report.md", markdown);
    write_file_atomic(options.out_dir / "summary.csv", render_summary_csv(reports));
    write_file_atomic(options.out_dir / "sessions.csv", render_sessions_csv(reports));
    write_json(options.out_dir / "report.json", report_json);
    json summary = run_header("evaluate");
    summary["reports"] = reports.size();
    summary["missing"] = missing_all;
    summary["exit_code"] = kExitOk;
    write_json(options.out_dir / "run" / "summary.json", summary);

    out << markdown;
    return kExitOk;
  });
}

int cmd_synth(const SynthOptions& options, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    if (options.out_dir.empty()) throw ConfigError("an output directory is required");
    const auto corpus = generate(options.spec);
    const auto manifest = write_synth_corpus(corpus, options.out_dir, options.encoding);
    json config = run_header("synth");
    config["synth"] = options.spec.to_json();
    config["embedding_encoding"] = options.encoding == ContainerEncoding::kBinary ? "binary" : "json";
    write_json(options.out_dir / "run" / "config.json", config);
    std::size_t utterances = 0;
    for (const auto& s : corpus.sessions) utterances += s.dialogue.size();
    json summary = run_header("synth");
    summary["sessions"] = corpus.sessions.size();
    summary["utterances"] = utterances;
    summary["manifest"] = "manifest.json";
    summary["exit_code"] = kExitOk;
    write_json(options.out_dir / "run" / "summary.json", summary);
    out << "wrote " << corpus.sessions.size() << " sessions (" << utterances << " utterances) to "
        << manifest.generic_string() << "\n";
    return kExitOk;
  });
}

int cmd_annotate(const AnnotateOptions& options, std::ostream& out, std::ostream& err) {
  return guarded(err, [&]() -> int {
    if (options.out_file.empty()) throw ConfigError("an output label file is required");
    options.llm.validate();
    const std::string template_text = options.template_path.empty()
                                          ? std::string(prompt_template("annotate.v1"))
                                          : read_file(options.template_path);
    const auto manifest = load_manifest(options.manifest);
    const auto corpus = load_corpus(manifest, false, options.jobs);
    std::unique_ptr<ChatClient> owned_client;
    ChatClient* client = options.client;
    if (!client) {
      owned_client = std::make_unique<HttpChatClient>(options.llm);
      client = owned_client.get();
    }

    AuditLog audit;
    std::mutex mu;
    std::vector<Failure> failures;
    std::map<std::string, RaterLabels> labels;
    parallel_for(corpus.sessions.size(), std::max<std::size_t>(std::min(options.jobs, options.llm.max_concurrency), 1),
                 [&](std::size_t i) {
                   const auto& d = corpus.sessions[i].dialogue;
                   try {
                     auto l = annotate_llm(d, *client, options.llm, corpus.codebook, template_text, options.rater_id,
                                           &audit);
                     std::lock_guard lock(mu);
                     labels[d.session_id] = std::move(l);
                   } catch (const Error& e) {
                     std::lock_guard lock(mu);
                     failures.push_back({d.session_id, e.what()});
                   }
                 });
    std::sort(failures.begin(), failures.end(),
              [](const Failure& a, const Failure& b) { return a.session_id < b.session_id; });
    const auto dialogues = corpus.dialogues();
    write_file_atomic(options.out_file, serialize_labels(options.rater_id, labels, dialogues));
    auto side = [&](const std::string& suffix) {
      auto p = options.out_file;
      p += suffix;
      return p;
    };
    const int code = failures.empty() || options.allow_partial ? kExitOk : kExitPartial;
    json summary = run_header("annotate");
    summary["rater_id"] = options.rater_id;
    summary["template"] = hex_digest(template_text);
    summary["llm"] = options.llm.to_json();
    summary["sessions"] = corpus.sessions.size();
    summary["failed"] = failures_json(failures);
    summary["exit_code"] = code;
    write_json(side(".summary.json"), summary);
    write_file_atomic(side(".audit.jsonl"), audit.to_jsonl());
    out << "labeled " << labels.size() << "/" << corpus.sessions.size() << " sessions into "
        << options.out_file.generic_string() << "\n";
    for (const auto& f : failures) err << "failed: [" << f.session_id << "] " << f.message << "\n";
    return code;
  });
}

}  // namespace dseg
