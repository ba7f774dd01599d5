// threer: run the retrieval-refinement-ranking pipeline and its individual
// stages against mock or HTTP model backends.

#include <cstdlib>
#include <iomanip>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "threer/http_clients.hpp"
#include "threer/threer.hpp"

namespace {

using namespace threer;
namespace fs = std::filesystem;

constexpr int kExitOk = 0;
constexpr int kExitValidation = 1;
constexpr int kExitBackend = 2;
constexpr int kExitInternal = 3;

std::string env_or(const char* name, const std::string& fallback) {
  const char* v = std::getenv(name);
  return (v && *v) ? v : fallback;
}

struct CommonOpts {
  std::string runs_dir = env_or("THREER_RUNS_DIR", "runs");
  std::string cache_dir = env_or("THREER_CACHE_DIR", "cache");
  std::string templates_dir;  // empty: builtin set
  std::string backend = "mock";
  bool json_output = false;
};

void add_common(CLI::App* cmd, CommonOpts& opts, bool with_backend = true) {
  cmd->add_option("--runs-dir", opts.runs_dir, "Run directory root (env THREER_RUNS_DIR)");
  cmd->add_option("--cache-dir", opts.cache_dir, "Cache directory root (env THREER_CACHE_DIR)");
  cmd->add_option("--templates", opts.templates_dir,
                  "Prompt template directory (default: built-in v1 set)");
  if (with_backend) {
    cmd->add_option("--backend", opts.backend,
                    "Model backends: mock | mock-yes | mock-no | http:<adapter.json>");
  }
  cmd->add_flag("--json", opts.json_output, "Emit a machine-readable JSON summary");
}

Backends build_backends(const std::string& spec, std::int64_t seed) {
  if (spec == "mock") return make_mock_backends(static_cast<std::uint64_t>(seed));
  if (spec == "mock-yes" || spec == "mock-no") {
    Backends b = make_mock_backends(static_cast<std::uint64_t>(seed));
    b.vqa = spec == "mock-yes" ? ScriptedVqaClient::all_yes() : ScriptedVqaClient::all_no();
    return b;
  }
  if (spec.rfind("http:", 0) == 0)
    return make_http_backends(HttpAdapterConfig::from_file(spec.substr(5)));
  throw ValidationError("unknown backend spec: " + spec +
                        " (expected mock, mock-yes, mock-no, or http:<adapter.json>)");
}

TemplateSet load_templates(const CommonOpts& opts) {
  return opts.templates_dir.empty() ? TemplateSet::builtin()
                                    : TemplateSet::load_dir(opts.templates_dir);
}

json load_config_file(const std::string& path) {
  if (path.empty()) return json();
  auto text = read_text_file(path);
  if (!text) throw ValidationError("cannot open config file: " + path);
  json j = json::parse(*text, nullptr, false);
  if (j.is_discarded()) throw ValidationError("config file is not valid JSON: " + path);
  return j;
}

/// Flags that mirror PipelineConfig fields. Only flags the user actually set
/// enter the flag layer, preserving flag > file > default precedence.
struct ConfigFlags {
  double tau = 0.5;
  int top_k = 3;
  int max_scenes = 8;
  int candidates = 4;
  int target_frames = 61;
  int parallelism = 4;
  std::int64_t seed = 0;
  bool critique = false;

  CLI::Option* tau_opt = nullptr;
  CLI::Option* top_k_opt = nullptr;
  CLI::Option* max_scenes_opt = nullptr;
  CLI::Option* candidates_opt = nullptr;
  CLI::Option* target_frames_opt = nullptr;
  CLI::Option* parallelism_opt = nullptr;
  CLI::Option* seed_opt = nullptr;
  CLI::Option* critique_opt = nullptr;

  void attach(CLI::App* cmd) {
    tau_opt = cmd->add_option("--tau", tau, "Cosine similarity threshold");
    top_k_opt = cmd->add_option("--top-k", top_k, "Modifiers per category per scene");
    max_scenes_opt = cmd->add_option("--max-scenes", max_scenes, "Retrieved scene cap");
    candidates_opt = cmd->add_option("--candidates", candidates, "Refined prompt variants (N)");
    target_frames_opt =
        cmd->add_option("--target-frames", target_frames, "Frame count after enhancement");
    parallelism_opt = cmd->add_option("--parallelism", parallelism, "Fan-out bound");
    seed_opt = cmd->add_option("--seed", seed, "Base seed for generation and mocks");
    critique_opt = cmd->add_flag("--critique", critique, "Enable the VLM critique loop");
  }

  json layer() const {
    json j = json::object();
    if (tau_opt->count()) j["tau"] = tau;
    if (top_k_opt->count()) j["top_k"] = top_k;
    if (max_scenes_opt->count()) j["max_scenes"] = max_scenes;
    if (candidates_opt->count()) j["n_candidates"] = candidates;
    if (target_frames_opt->count()) j["target_frames"] = target_frames;
    if (parallelism_opt->count()) j["parallelism"] = parallelism;
    if (seed_opt->count()) j["seed"] = seed;
    if (critique_opt->count()) j["critique"] = json{{"enabled", critique}};
    return j;
  }
};

json run_summary(const PipelineResult& result) {
  json summary = result.record.summary;
  summary["final"] = json{{"artifact_id", result.final_video.id},
                          {"frame_count", result.final_video.frame_count},
                          {"path", (result.run_dir / "final.bin").string()}};
  return summary;
}

void print_run_result(const PipelineResult& result, bool as_json) {
  if (as_json) {
    std::cout << canonical_dump(run_summary(result)) << "\n";
    return;
  }
  const json& s = result.record.summary;
  std::cout << "run_id: " << result.record.run_id << "\n";
  std::cout << "winner: candidate " << s.at("winner_index").get<int>();
  if (s.at("tie_broken").get<bool>()) std::cout << " (tie broken toward lowest index)";
  std::cout << "\n";
  std::cout << "weighted totals:";
  for (const auto& t : s.at("weighted_totals")) std::cout << " " << t.get<double>();
  std::cout << "\n";
  std::cout << "final: " << (result.run_dir / "final.bin").string() << " ("
            << result.final_video.frame_count << " frames, id "
            << short_hash(result.final_video.id) << ")\n";
}

int cmd_run(const CommonOpts& opts, const std::string& prompt, const std::string& db_path,
            const std::string& bank_path, const std::string& config_path,
            const ConfigFlags& flags, bool resume_id_given, const std::string& resume_id) {
  auto [cfg, provenance] = PipelineConfig::from_layers(load_config_file(config_path), flags.layer());

  TemplateSet templates = load_templates(opts);
  QuestionBank bank = QuestionBank::load_file(bank_path);
  auto cache = std::make_shared<CacheStore>(opts.cache_dir);
  Backends backends = build_backends(opts.backend, cfg.seed);
  RelationDatabase db = RelationDatabase::load_file(
      db_path, backends.embedder ? std::optional<std::size_t>(backends.embedder->dim())
                                 : std::nullopt);

  ClientSession session(std::move(backends), cfg.retry, cache);
  PipelineResult result =
      resume_id_given
          ? resume_run(resume_id, db, session, templates, bank, opts.runs_dir)
          : run_pipeline(prompt, db, cfg, session, templates, bank, opts.runs_dir, provenance);
  print_run_result(result, opts.json_output);
  return kExitOk;
}

int cmd_retrieve(const CommonOpts& opts, const std::string& prompt, const std::string& db_path,
                 const ConfigFlags& flags) {
  auto [cfg, provenance] = PipelineConfig::from_layers(json(), flags.layer());
  (void)provenance;
  Backends backends = build_backends(opts.backend, cfg.seed);
  RelationDatabase db = RelationDatabase::load_file(
      db_path, backends.embedder ? std::optional<std::size_t>(backends.embedder->dim())
                                 : std::nullopt);
  ClientSession session(std::move(backends), cfg.retry);
  RetrievalConfig rcfg{cfg.tau, cfg.top_k, cfg.max_scenes};
  RetrievedContext ctx = retrieve(prompt, db, rcfg, session);

  if (opts.json_output) {
    std::cout << canonical_dump(ctx.to_json()) << "\n";
    return kExitOk;
  }
  std::cout << ctx.matches.size() << " scene(s) above tau=" << rcfg.tau << "\n";
  for (const auto& m : ctx.matches) {
    std::cout << "  [" << m.scene_index << "] sim=" << std::fixed << std::setprecision(6)
              << m.similarity << " " << db.scene(m.scene_index).scene_text << "\n";
    for (const auto& mod : m.selected_modifiers)
      std::cout << "      - (" << to_string(mod.category) << ") " << mod.text << "\n";
  }
  return kExitOk;
}

int cmd_score(const CommonOpts& opts, const std::string& video_path, const std::string& prompt,
              const std::string& bank_path, std::int64_t seed) {
  QuestionBank bank = QuestionBank::load_file(bank_path);
  auto cache = std::make_shared<CacheStore>(opts.cache_dir);
  ClientSession session(build_backends(opts.backend, seed), RetryPolicy{}, cache);

  auto bytes = read_text_file(video_path);
  if (!bytes) throw ValidationError("cannot open video file: " + video_path);
  VideoArtifact video;
  if (auto meta = read_text_file(video_path + ".json")) {
    json mj = json::parse(*meta, nullptr, false);
    if (mj.is_discarded()) throw ValidationError("corrupt video meta: " + video_path + ".json");
    video = VideoArtifact::from_json(mj);
  } else {
    video.frame_count = 16;
    video.fps = 8.0;
  }
  video.id = sha256_hex(*bytes);
  video.storage_ref = "file:" + video_path;

  ScoreReport report = score_video(session, video, prompt, bank);
  if (opts.json_output) {
    std::cout << canonical_dump(report.to_json()) << "\n";
    return kExitOk;
  }
  std::cout << "video " << short_hash(video.id) << " against \"" << prompt << "\"\n";
  for (std::size_t i = 0; i < report.answers.size(); ++i) {
    const auto& entry = bank.entry(i);
    std::cout << "  q" << std::setw(2) << i << " w=" << std::setw(7) << entry.weight
              << " score=" << report.answers[i].score << "  "
              << entry.question.substr(0, 60) << "\n";
  }
  std::cout << "weighted total: " << std::setprecision(10) << report.weighted_total << "\n";
  return kExitOk;
}

int cmd_inspect(const CommonOpts& opts, const std::string& run_id) {
  auto text = read_text_file(fs::path(opts.runs_dir) / run_id / "record.json");
  if (!text) throw ValidationError("unknown run id: " + run_id);
  json j = json::parse(*text, nullptr, false);
  if (j.is_discarded()) throw ValidationError("corrupt run record for: " + run_id);
  RunRecord record = RunRecord::from_json(j);

  if (opts.json_output) {
    std::cout << canonical_dump(record.to_json()) << "\n";
    return kExitOk;
  }
  std::cout << "run " << record.run_id << (record.resumed ? " (resumed)" : "") << "\n";
  std::cout << "intent: " << record.intent << "\n";
  std::cout << "config " << short_hash(record.config_hash) << ", bank "
            << short_hash(record.bank_id) << ", db " << short_hash(record.db_hash) << "\n";
  for (const auto& s : record.stages) {
    std::cout << "  " << std::left << std::setw(10) << s.name << std::setw(9) << s.source
              << " in=" << short_hash(s.input_hash) << " out=" << short_hash(s.output_hash)
              << " calls=" << s.calls.size() << " " << std::fixed << std::setprecision(1)
              << s.wall_ms << "ms\n";
  }
  if (!record.summary.is_null()) {
    std::cout << "winner: candidate " << record.summary.at("winner_index").get<int>() << "\n";
  }
  if (const StageRecord* critique = record.find_stage("critique")) {
    const json& transcript = critique->payload.at("transcript");
    for (const auto& [key, value] : transcript.items()) {
      if (key.rfind("Iterations_", 0) != 0) continue;
      std::cout << "  " << key << ": metric " << value.at("metrics").at("metric").get<std::string>()
                << " score " << value.at("metrics").at("score").get<int>() << "\n";
    }
  }
  if (record.complete()) {
    std::cout << "final: " << record.final_info.at("artifact").at("id").get<std::string>().substr(0, 12)
              << " (" << record.final_info.at("artifact").at("frame_count").get<int>()
              << " frames)\n";
  } else {
    std::cout << "final: incomplete run\n";
  }
  return kExitOk;
}

int cmd_resume(const CommonOpts& opts, const std::string& run_id, const std::string& db_path,
               const std::string& bank_path) {
  auto text = read_text_file(fs::path(opts.runs_dir) / run_id / "record.json");
  if (!text) throw ValidationError("unknown run id: " + run_id);
  json j = json::parse(*text, nullptr, false);
  if (j.is_discarded()) throw ValidationError("corrupt run record for: " + run_id);
  PipelineConfig cfg = PipelineConfig::from_json(RunRecord::from_json(j).config);

  TemplateSet templates = load_templates(opts);
  QuestionBank bank = QuestionBank::load_file(bank_path);
  auto cache = std::make_shared<CacheStore>(opts.cache_dir);
  Backends backends = build_backends(opts.backend, cfg.seed);
  RelationDatabase db = RelationDatabase::load_file(
      db_path, backends.embedder ? std::optional<std::size_t>(backends.embedder->dim())
                                 : std::nullopt);
  ClientSession session(std::move(backends), cfg.retry, cache);
  PipelineResult result = resume_run(run_id, db, session, templates, bank, opts.runs_dir);
  print_run_result(result, opts.json_output);
  return kExitOk;
}

int cmd_validate(const std::string& db_path, const std::string& bank_path,
                 const std::string& templates_dir) {
  if (db_path.empty() && bank_path.empty() && templates_dir.empty())
    throw ValidationError("nothing to validate: pass --db, --bank, or --templates");
  if (!db_path.empty()) {
    RelationDatabase db = RelationDatabase::load_file(db_path);
    std::size_t modifiers = 0;
    for (const auto& s : db.scenes()) modifiers += s.modifier_count();
    std::cout << "db ok: " << db.size() << " scene(s), " << modifiers << " modifier(s), hash "
              << short_hash(db.content_hash()) << "\n";
  }
  if (!bank_path.empty()) {
    QuestionBank bank = QuestionBank::load_file(bank_path);
    std::cout << "bank ok: 29 questions, id " << short_hash(bank.bank_id()) << "\n";
  }
  if (!templates_dir.empty()) {
    TemplateSet set = TemplateSet::load_dir(templates_dir);
    std::cout << "templates ok: version " << set.version << ", refine "
              << short_hash(set.refine_user.sha256) << ", merge "
              << short_hash(set.merge_user.sha256) << ", critique "
              << short_hash(set.critique_user.sha256) << "\n";
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"3R retrieval-refinement-ranking pipeline for text-to-video prompts"};
  app.require_subcommand(1);

  // run
  CommonOpts run_opts;
  std::string run_prompt, run_db, run_bank, run_config;
  ConfigFlags run_flags;
  CLI::App* run = app.add_subcommand("run", "Execute the full pipeline");
  run->add_option("--prompt", run_prompt, "User intent")->required();
  run->add_option("--db", run_db, "Relation database (JSON Lines)")->required();
  run->add_option("--bank", run_bank, "Question bank (JSON, 29 entries)")->required();
  run->add_option("--config", run_config, "Pipeline config file (JSON)");
  run_flags.attach(run);
  add_common(run, run_opts);

  // retrieve
  CommonOpts retrieve_opts;
  std::string retrieve_prompt, retrieve_db;
  ConfigFlags retrieve_flags;
  CLI::App* retrieve_cmd = app.add_subcommand("retrieve", "Run the retrieval stage alone");
  retrieve_cmd->add_option("--prompt", retrieve_prompt, "User intent")->required();
  retrieve_cmd->add_option("--db", retrieve_db, "Relation database (JSON Lines)")->required();
  retrieve_flags.attach(retrieve_cmd);
  add_common(retrieve_cmd, retrieve_opts);

  // score
  CommonOpts score_opts;
  std::string score_video_path, score_prompt, score_bank;
  std::int64_t score_seed = 0;
  CLI::App* score_cmd = app.add_subcommand("score", "Score one video with the question bank");
  score_cmd->add_option("--video", score_video_path, "Video artifact file")->required();
  score_cmd->add_option("--prompt", score_prompt, "Prompt substituted into [prompt] questions")
      ->required();
  score_cmd->add_option("--bank", score_bank, "Question bank (JSON, 29 entries)")->required();
  score_cmd->add_option("--seed", score_seed, "Mock backend seed");
  add_common(score_cmd, score_opts);

  // inspect
  CommonOpts inspect_opts;
  std::string inspect_id;
  CLI::App* inspect_cmd = app.add_subcommand("inspect", "Render a run record");
  inspect_cmd->add_option("run_id", inspect_id, "Run id")->required();
  add_common(inspect_cmd, inspect_opts, /*with_backend=*/false);

  // resume
  CommonOpts resume_opts;
  std::string resume_id, resume_db, resume_bank;
  CLI::App* resume_cmd = app.add_subcommand("resume", "Continue an interrupted run");
  resume_cmd->add_option("run_id", resume_id, "Run id")->required();
  resume_cmd->add_option("--db", resume_db, "Relation database (JSON Lines)")->required();
  resume_cmd->add_option("--bank", resume_bank, "Question bank (JSON, 29 entries)")->required();
  add_common(resume_cmd, resume_opts);

  // validate
  std::string validate_db, validate_bank, validate_templates;
  CLI::App* validate_cmd = app.add_subcommand("validate", "Check databases, banks, templates");
  validate_cmd->add_option("--db", validate_db, "Relation database (JSON Lines)");
  validate_cmd->add_option("--bank", validate_bank, "Question bank (JSON)");
  validate_cmd->add_option("--templates", validate_templates, "Template directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << e.what() << "\n\n" << app.help() << "\n";
    return kExitValidation;
  }

  try {
    if (run->parsed())
      return cmd_run(run_opts, run_prompt, run_db, run_bank, run_config, run_flags, false, "");
    if (retrieve_cmd->parsed())
      return cmd_retrieve(retrieve_opts, retrieve_prompt, retrieve_db, retrieve_flags);
    if (score_cmd->parsed())
      return cmd_score(score_opts, score_video_path, score_prompt, score_bank, score_seed);
    if (inspect_cmd->parsed()) return cmd_inspect(inspect_opts, inspect_id);
    if (resume_cmd->parsed()) return cmd_resume(resume_opts, resume_id, resume_db, resume_bank);
    if (validate_cmd->parsed())
      return cmd_validate(validate_db, validate_bank, validate_templates);
    std::cerr << app.help() << "\n";
    return kExitValidation;
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const BackendError& e) {
    std::cerr << "backend error: " << e.what() << "\n";
    return kExitBackend;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return kExitInternal;
  }
}
