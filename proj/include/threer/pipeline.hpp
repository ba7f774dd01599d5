#pragma once

#include <atomic>
#include <chrono>
#include <cstdint>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <functional>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "threer/clients.hpp"
#include "threer/critique.hpp"
#include "threer/prompt_pipeline.hpp"
#include "threer/question_bank.hpp"
#include "threer/ranking.hpp"
#include "threer/relation_db.hpp"
#include "threer/retrieval.hpp"
#include "threer/run_record.hpp"
#include "threer/templates.hpp"

namespace threer {

/// Full configuration of one pipeline run. Serializes canonically; its hash
/// is part of the run identity and every stage-cache key chain.
struct PipelineConfig {
  double tau = 0.5;
  int top_k = 3;
  int max_scenes = 8;
  int n_candidates = 4;
  int target_frames = 61;
  double merge_temperature = 0.2;
  double refine_temperature = 0.8;
  int repair_attempts = 2;
  int max_tokens = 1024;
  int parallelism = 4;
  std::int64_t seed = 0;
  CritiqueLoopConfig critique;
  RetryPolicy retry;

  void validate() const {
    if (tau < -1.0 || tau > 1.0) throw ValidationError("tau must be in [-1, 1]");
    if (top_k < 1) throw ValidationError("top_k must be >= 1");
    if (max_scenes < 1) throw ValidationError("max_scenes must be >= 1");
    if (n_candidates < 1) throw ValidationError("n_candidates must be >= 1");
    if (target_frames < 1) throw ValidationError("target_frames must be >= 1");
    if (merge_temperature < 0.0 || refine_temperature < 0.0)
      throw ValidationError("temperatures must be >= 0");
    if (repair_attempts < 0) throw ValidationError("repair_attempts must be >= 0");
    if (max_tokens < 1) throw ValidationError("max_tokens must be >= 1");
    if (parallelism < 1) throw ValidationError("parallelism must be >= 1");
    critique.validate();
    retry.validate();
  }

  json to_json() const {
    return json{{"tau", tau},
                {"top_k", top_k},
                {"max_scenes", max_scenes},
                {"n_candidates", n_candidates},
                {"target_frames", target_frames},
                {"merge_temperature", merge_temperature},
                {"refine_temperature", refine_temperature},
                {"repair_attempts", repair_attempts},
                {"max_tokens", max_tokens},
                {"parallelism", parallelism},
                {"seed", seed},
                {"critique", critique.to_json()},
                {"retry", retry.to_json()}};
  }

  std::string hash() const { return hash_json(to_json()); }

  static PipelineConfig from_json(const json& j) {
    if (!j.is_object()) throw ValidationError("pipeline config must be a JSON object");
    const json defaults = PipelineConfig{}.to_json();
    for (const auto& [key, value] : j.items()) {
      if (!defaults.contains(key)) throw ValidationError("unknown config key: " + key);
      if (defaults.at(key).is_object()) {
        if (!value.is_object()) throw ValidationError("config key " + key + " must be an object");
        for (const auto& [inner, _] : value.items()) {
          if (!defaults.at(key).contains(inner))
            throw ValidationError("unknown config key: " + key + "." + inner);
        }
      }
    }
    PipelineConfig cfg;
    cfg.tau = j.value("tau", cfg.tau);
    cfg.top_k = j.value("top_k", cfg.top_k);
    cfg.max_scenes = j.value("max_scenes", cfg.max_scenes);
    cfg.n_candidates = j.value("n_candidates", cfg.n_candidates);
    cfg.target_frames = j.value("target_frames", cfg.target_frames);
    cfg.merge_temperature = j.value("merge_temperature", cfg.merge_temperature);
    cfg.refine_temperature = j.value("refine_temperature", cfg.refine_temperature);
    cfg.repair_attempts = j.value("repair_attempts", cfg.repair_attempts);
    cfg.max_tokens = j.value("max_tokens", cfg.max_tokens);
    cfg.parallelism = j.value("parallelism", cfg.parallelism);
    cfg.seed = j.value("seed", cfg.seed);
    if (j.contains("critique")) cfg.critique = CritiqueLoopConfig::from_json(j["critique"]);
    if (j.contains("retry")) cfg.retry = RetryPolicy::from_json(j["retry"]);
    cfg.validate();
    return cfg;
  }

  /// Layered assembly with flag > file > default precedence. Returns the
  /// config plus a {key: "flag"|"file"|"default"} provenance map that goes
  /// into the run record.
  static std::pair<PipelineConfig, json> from_layers(const json& file_layer,
                                                     const json& flag_layer) {
    json merged = PipelineConfig{}.to_json();
    json provenance = json::object();
    for (const auto& [key, _] : merged.items()) provenance[key] = "default";

    auto apply = [&](const json& layer, const char* source) {
      if (layer.is_null()) return;
      if (!layer.is_object()) throw ValidationError("config layer must be a JSON object");
      for (const auto& [key, value] : layer.items()) {
        if (!merged.contains(key)) throw ValidationError("unknown config key: " + key);
        if (merged[key].is_object() && value.is_object()) {
          for (const auto& [inner, iv] : value.items()) {
            if (!merged[key].contains(inner))
              throw ValidationError("unknown config key: " + key + "." + inner);
            merged[key][inner] = iv;
          }
        } else {
          merged[key] = value;
        }
        provenance[key] = source;
      }
    };
    apply(file_layer, "file");
    apply(flag_layer, "flag");
    return {from_json(merged), provenance};
  }
};

namespace detail {

template <typename Fn>
void parallel_for(std::size_t n, int parallelism, Fn&& fn) {
  const std::size_t workers = std::min<std::size_t>(std::max(parallelism, 1), n);
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::mutex err_mu;
  std::size_t err_index = static_cast<std::size_t>(-1);
  std::exception_ptr err;
  std::vector<std::thread> threads;
  threads.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    threads.emplace_back([&] {
      while (true) {
        std::size_t i = next.fetch_add(1);
        if (i >= n) break;
        {
          std::lock_guard<std::mutex> lock(err_mu);
          if (err) continue;  // drain remaining work after a failure
        }
        try {
          fn(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(err_mu);
          if (i < err_index) {
            err_index = i;
            err = std::current_exception();
          }
        }
      }
    });
  }
  for (auto& t : threads) t.join();
  if (err) std::rethrow_exception(err);
}

}  // namespace detail

/// Removes location- and timing-dependent fields so stage output hashes are
/// identical across store layouts and machines.
inline json strip_volatile(const json& j) {
  if (j.is_object()) {
    json out = json::object();
    for (const auto& [key, value] : j.items()) {
      if (key == "storage_ref" || key == "origin_url" || key == "latencies_ms") continue;
      out[key] = strip_volatile(value);
    }
    return out;
  }
  if (j.is_array()) {
    json out = json::array();
    for (const auto& value : j) out.push_back(strip_volatile(value));
    return out;
  }
  return j;
}

/// Content-addressed stage cache: one namespace per stage, keyed by the
/// stage input hash (which chains config, templates, backends, and seeds).
class StageCache {
 public:
  explicit StageCache(std::shared_ptr<CacheStore> store) : store_(std::move(store)) {}

  std::optional<json> lookup(const std::string& stage, const std::string& input_hash) {
    if (!store_) return std::nullopt;
    return store_->get("stages/" + stage, input_hash);
  }

  void store(const std::string& stage, const std::string& input_hash, const json& payload) {
    if (store_) store_->put("stages/" + stage, input_hash, payload);
  }

 private:
  std::shared_ptr<CacheStore> store_;
};

inline void write_text_file(const std::filesystem::path& p, std::string_view bytes) {
  std::filesystem::create_directories(p.parent_path());
  std::filesystem::path tmp = p;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  }
  std::filesystem::rename(tmp, p);
}

inline std::optional<std::string> read_text_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) return std::nullopt;
  return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

inline std::string now_iso8601() {
  std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

struct PipelineResult {
  VideoArtifact final_video;
  RunRecord record;
  std::filesystem::path run_dir;
};

namespace detail {

/// Executes the five-step pipeline as a sequence of cached, resumable
/// stages. One instance per run.
class PipelineRun {
 public:
  PipelineRun(std::string intent, const RelationDatabase& db, PipelineConfig cfg,
              ClientSession& session, const TemplateSet& templates, const QuestionBank& bank,
              std::filesystem::path runs_dir, json provenance)
      : intent_(std::move(intent)),
        db_(db),
        cfg_(std::move(cfg)),
        session_(session),
        templates_(templates),
        bank_(bank),
        runs_dir_(std::move(runs_dir)),
        provenance_(std::move(provenance)),
        stage_cache_(session.cache()) {}

  json run_key() const {
    return json{{"intent", intent_},          {"config", cfg_.to_json()},
                {"db", db_.content_hash()},   {"bank", bank_.bank_id()},
                {"templates", templates_.hashes()}, {"backends", session_.backend_ids()}};
  }

  std::string run_id() const { return "r" + short_hash(hash_json(run_key()), 16); }

  PipelineResult execute() {
    cfg_.validate();
    if (trim_copy(intent_).empty()) throw PreconditionViolation("intent must be non-empty");

    const std::string id = run_id();
    run_dir_ = runs_dir_ / id;
    std::filesystem::create_directories(run_dir_ / "videos");
    std::filesystem::create_directories(run_dir_ / "scores");

    load_prior(id);
    if (prior_ && prior_->complete()) {
      VideoArtifact final_video =
          ensure_artifact(prior_->final_info.at("artifact"), {run_dir_ / "final.bin"});
      return PipelineResult{final_video, *prior_, run_dir_};
    }

    init_record(id);

    // Step 1: retrieval
    RetrievalConfig rcfg{cfg_.tau, cfg_.top_k, cfg_.max_scenes};
    const json retrieval_payload = stage(
        "retrieval",
        json{{"stage", "retrieval"},
             {"intent", intent_},
             {"db", db_.content_hash()},
             {"cfg", rcfg.to_json()},
             {"embed", backend_id("embed")}},
        [&] {
          RetrievedContext ctx = retrieve(intent_, db_, rcfg, session_, "retrieval");
          json queue = json::array();
          for (const auto& m : flatten_modifiers(ctx)) queue.push_back(m.to_json());
          return json{{"context", ctx.to_json()}, {"queue", queue}};
        },
        nullptr,
        [&](const json& p) {
          write_text_file(run_dir_ / "retrieval.json", canonical_dump(p.at("context")));
        });
    std::vector<Modifier> queue;
    for (const auto& mj : retrieval_payload.at("queue")) queue.push_back(Modifier::from_json(mj));

    // Step 2: iterative merge
    const json merge_payload = stage(
        "merge",
        json{{"stage", "merge"},
             {"upstream", last_output_hash()},
             {"templates",
              {{"system", templates_.merge_system.sha256}, {"user", templates_.merge_user.sha256}}},
             {"chat", backend_id("chat")},
             {"temperature", cfg_.merge_temperature},
             {"seed", cfg_.seed},
             {"max_tokens", cfg_.max_tokens}},
        [&] {
          MergeOptions opts;
          opts.temperature = cfg_.merge_temperature;
          opts.seed = cfg_.seed;
          opts.max_tokens = cfg_.max_tokens;
          return merge_modifiers(session_, templates_, intent_, queue, opts).to_json();
        },
        nullptr,
        [&](const json& p) {
          write_text_file(run_dir_ / "merged.txt", p.at("merged").get<std::string>());
        });
    const std::string merged = merge_payload.at("merged").get<std::string>();
    const std::string retrieval_hash = record_.stages.front().output_hash;

    // Step 2b: N refined variants
    const json refine_payload = stage(
        "refine",
        json{{"stage", "refine"},
             {"upstream", last_output_hash()},
             {"templates",
              {{"system", templates_.refine_system.sha256},
               {"user", templates_.refine_user.sha256}}},
             {"chat", backend_id("chat")},
             {"n", cfg_.n_candidates},
             {"temperature", cfg_.refine_temperature},
             {"seed", cfg_.seed},
             {"repair_attempts", cfg_.repair_attempts},
             {"max_tokens", cfg_.max_tokens}},
        [&] {
          RefineOptions opts;
          opts.temperature = cfg_.refine_temperature;
          opts.seed = cfg_.seed;
          opts.max_tokens = cfg_.max_tokens;
          opts.repair_attempts = cfg_.repair_attempts;
          PromptCandidateSet set =
              refine(session_, templates_, intent_, merged, cfg_.n_candidates, opts);
          set.retrieval_hash = retrieval_hash;
          return set.to_json();
        },
        nullptr,
        [&](const json& p) { write_text_file(run_dir_ / "candidates.json", canonical_dump(p)); });
    const PromptCandidateSet candidates = PromptCandidateSet::from_json(refine_payload);
    const std::size_t n = candidates.candidates.size();

    // Step 3: fan out N generations; per-candidate seed = seed xor index
    const json gen_payload = stage(
        "generate",
        json{{"stage", "generate"},
             {"upstream", last_output_hash()},
             {"t2v", backend_id("t2v")},
             {"seed", cfg_.seed}},
        [&] {
          std::vector<VideoArtifact> artifacts(n);
          detail::parallel_for(n, cfg_.parallelism, [&](std::size_t i) {
            GenParams params;
            params.seed = cfg_.seed ^ static_cast<std::int64_t>(i);
            artifacts[i] = session_.generate_video(candidates.candidates[i], params, "generate");
          });
          json videos = json::array();
          for (const auto& a : artifacts) videos.push_back(a.to_json());
          return json{{"videos", videos}};
        },
        [&](const json& p) {
          const auto& videos = p.at("videos");
          for (std::size_t i = 0; i < videos.size(); ++i)
            ensure_artifact(videos[i], {video_path(i)});
        },
        [&](const json& p) { write_video_files(p.at("videos")); });
    std::vector<VideoArtifact> videos;
    for (std::size_t i = 0; i < gen_payload.at("videos").size(); ++i)
      videos.push_back(ensure_artifact(gen_payload.at("videos")[i], {video_path(i)}));

    // Step 4a: 29 weighted questions per candidate
    const json score_payload = stage(
        "score",
        json{{"stage", "score"},
             {"upstream", last_output_hash()},
             {"bank", bank_.bank_id()},
             {"vqa", backend_id("vqa")},
             {"prompt", intent_}},
        [&] {
          std::vector<ScoreReport> reports(n);
          detail::parallel_for(n, cfg_.parallelism, [&](std::size_t i) {
            reports[i] =
                score_video(session_, videos[i], intent_, bank_, static_cast<int>(i), "score");
          });
          json arr = json::array();
          for (const auto& r : reports) arr.push_back(r.to_json());
          return json{{"reports", arr}};
        },
        nullptr,
        [&](const json& p) {
          const auto& reports = p.at("reports");
          for (std::size_t i = 0; i < reports.size(); ++i) {
            write_text_file(run_dir_ / "scores" / (std::to_string(i) + ".json"),
                            canonical_dump(reports[i]));
          }
        });
    std::vector<ScoreReport> reports;
    for (const auto& rj : score_payload.at("reports")) reports.push_back(ScoreReport::from_json(rj));

    // Step 4b: argmax selection
    const json select_payload = stage(
        "select", json{{"stage", "select"}, {"upstream", last_output_hash()}},
        [&] { return select_best(reports).to_json(); }, nullptr,
        [&](const json& p) { write_text_file(run_dir_ / "selection.json", canonical_dump(p)); });
    const SelectionResult selection = SelectionResult::from_json(select_payload);

    VideoArtifact current = videos.at(static_cast<std::size_t>(selection.winner_index));
    ScoreReport current_report = reports.at(static_cast<std::size_t>(selection.winner_index));
    const std::string winner_prompt =
        candidates.candidates.at(static_cast<std::size_t>(selection.winner_index));

    // Optional critique loop between selection and enhancement
    if (cfg_.critique.enabled) {
      const json critique_payload = stage(
          "critique",
          json{{"stage", "critique"},
               {"upstream", last_output_hash()},
               {"templates",
                {{"system", templates_.critique_system.sha256},
                 {"user", templates_.critique_user.sha256}}},
               {"chat", backend_id("chat")},
               {"t2v", backend_id("t2v")},
               {"vqa", backend_id("vqa")},
               {"bank", bank_.bank_id()},
               {"cfg", cfg_.critique.to_json()},
               {"seed", cfg_.seed},
               {"max_tokens", cfg_.max_tokens}},
          [&] {
            CritiqueDeps deps{templates_, bank_, cfg_.seed, cfg_.max_tokens, "critique"};
            CritiqueOutcome outcome = critique_iterate(session_, deps, current, current_report,
                                                       intent_, winner_prompt, cfg_.critique);
            return outcome.to_json(intent_);
          },
          [&](const json& p) { ensure_artifact(p.at("final_video"), all_video_paths(n)); },
          [&](const json& p) {
            write_text_file(run_dir_ / "critique.json", canonical_dump(p.at("transcript")));
            // The surviving video may be a regeneration that exists nowhere
            // else; materialize it so the run can resume.
            VideoArtifact live = ensure_artifact(p.at("final_video"), all_video_paths(n));
            const std::filesystem::path bin = run_dir_ / "videos" / "critique.bin";
            if (!std::filesystem::exists(bin))
              write_text_file(bin, session_.artifacts().load_bytes(live));
            write_text_file(bin.string() + ".json", canonical_dump(p.at("final_video")));
          });
      current = ensure_artifact(critique_payload.at("final_video"), all_video_paths(n));
      current_report = ScoreReport::from_json(critique_payload.at("final_report"));
    }

    // Step 5: temporal enhancement of the winner only
    const json enhance_payload = stage(
        "enhance",
        json{{"stage", "enhance"},
             {"upstream", last_output_hash()},
             {"winner", current.id},
             {"enhance", backend_id("enhance")},
             {"target_frames", cfg_.target_frames},
             {"intent", intent_}},
        [&] {
          VideoArtifact final_video =
              session_.enhance_video(current, intent_, cfg_.target_frames, "enhance");
          return json{{"final", final_video.to_json()}};
        },
        [&](const json& p) { ensure_artifact(p.at("final"), {run_dir_ / "final.bin"}); },
        [&](const json& p) { write_final_files(p.at("final")); });
    VideoArtifact final_video = ensure_artifact(enhance_payload.at("final"), {run_dir_ / "final.bin"});

    json totals = json::array();
    for (const auto& r : reports) totals.push_back(r.weighted_total);
    record_.summary = json{{"run_id", record_.run_id},
                           {"winner_index", selection.winner_index},
                           {"weighted_totals", totals},
                           {"tie_broken", selection.tie_broken},
                           {"padded_candidates", candidates.padded_count()},
                           {"critique_enabled", cfg_.critique.enabled},
                           {"final_total", current_report.weighted_total}};
    record_.final_info = json{{"artifact", final_video.to_json()}, {"path", "final.bin"}};
    persist_record();
    return PipelineResult{final_video, record_, run_dir_};
  }

 private:
  std::string backend_id(const std::string& key) const {
    return session_.backend_ids().value(key, "");
  }

  std::filesystem::path video_path(std::size_t i) const {
    return run_dir_ / "videos" / (std::to_string(i) + ".bin");
  }

  std::vector<std::filesystem::path> all_video_paths(std::size_t n) const {
    std::vector<std::filesystem::path> paths;
    for (std::size_t i = 0; i < n; ++i) paths.push_back(video_path(i));
    paths.push_back(run_dir_ / "videos" / "critique.bin");
    paths.push_back(run_dir_ / "final.bin");
    return paths;
  }

  void load_prior(const std::string& id) {
    auto text = read_text_file(run_dir_ / "record.json");
    if (!text) return;
    json j = json::parse(*text, nullptr, false);
    if (j.is_discarded()) {
      std::error_code ec;
      std::filesystem::rename(run_dir_ / "record.json", run_dir_ / "record.json.corrupt", ec);
      return;
    }
    RunRecord rec = RunRecord::from_json(j);
    if (rec.run_id == id) prior_ = std::move(rec);
  }

  void init_record(const std::string& id) {
    record_ = RunRecord{};
    record_.run_id = id;
    record_.created_at = now_iso8601();
    record_.intent = intent_;
    record_.config = cfg_.to_json();
    record_.config_hash = hash_json(record_.config);
    record_.config_provenance = provenance_;
    record_.db_hash = db_.content_hash();
    record_.bank_id = bank_.bank_id();
    record_.template_hashes = templates_.hashes();
    record_.backend_ids = session_.backend_ids();
    record_.resumed = prior_.has_value() && !prior_->stages.empty();

    write_text_file(run_dir_ / "config.json",
                    canonical_dump(json{{"run_id", id},
                                        {"intent", intent_},
                                        {"config", record_.config},
                                        {"config_hash", record_.config_hash},
                                        {"config_provenance", provenance_},
                                        {"db_hash", record_.db_hash},
                                        {"bank_id", record_.bank_id},
                                        {"template_hashes", record_.template_hashes},
                                        {"backend_ids", record_.backend_ids}}));
  }

  std::string last_output_hash() const {
    return record_.stages.empty() ? "" : record_.stages.back().output_hash;
  }

  /// Resolution order for one stage: restore from a prior partial record,
  /// then the content-addressed stage cache, then execution. Restored and
  /// cached payloads must have their video bytes still reachable; a cache
  /// entry that lost its blobs degrades to a miss, a prior record that lost
  /// an intermediate raises MissingArtifact.
  json stage(const std::string& name, const json& input_desc, const std::function<json()>& execute,
             const std::function<void(const json&)>& ensure_usable,
             const std::function<void(const json&)>& write_files) {
    const std::string input_hash = hash_json(input_desc);
    StageRecord rec;
    rec.name = name;
    rec.input_hash = input_hash;

    if (prior_) {
      if (const StageRecord* p = prior_->find_stage(name); p && p->input_hash == input_hash) {
        if (ensure_usable) ensure_usable(p->payload);
        rec = *p;
        rec.source = "restored";
        finish_stage(rec, write_files);
        return rec.payload;
      }
    }

    if (auto hit = stage_cache_.lookup(name, input_hash)) {
      bool usable = true;
      if (ensure_usable) {
        try {
          ensure_usable(*hit);
        } catch (const MissingArtifact&) {
          usable = false;
        }
      }
      if (usable) {
        rec.payload = *hit;
        rec.source = "cache";
        finish_stage(rec, write_files);
        return rec.payload;
      }
    }

    const std::size_t call_begin = session_.transcript().size();
    const auto start = std::chrono::steady_clock::now();
    rec.payload = execute();
    rec.wall_ms =
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
    rec.source = "executed";
    rec.calls = transcript_slice(call_begin);
    stage_cache_.store(name, input_hash, rec.payload);
    finish_stage(rec, write_files);
    return rec.payload;
  }

  void finish_stage(StageRecord& rec, const std::function<void(const json&)>& write_files) {
    rec.output_hash = hash_json(strip_volatile(rec.payload));
    if (write_files) write_files(rec.payload);
    record_.stages.push_back(rec);
    persist_record();
  }

  /// Stage call slice in a deterministic order, independent of fan-out
  /// interleaving.
  json transcript_slice(std::size_t begin) const {
    std::vector<CallRecord> all = session_.transcript().snapshot();
    std::vector<const CallRecord*> slice;
    for (std::size_t i = begin; i < all.size(); ++i) slice.push_back(&all[i]);
    std::sort(slice.begin(), slice.end(), [](const CallRecord* a, const CallRecord* b) {
      if (a->op != b->op) return a->op < b->op;
      const std::string ar = canonical_dump(a->request);
      const std::string br = canonical_dump(b->request);
      if (ar != br) return ar < br;
      return a->attempt < b->attempt;
    });
    json out = json::array();
    for (const CallRecord* r : slice) out.push_back(r->to_json());
    return out;
  }

  void persist_record() {
    write_text_file(run_dir_ / "record.json", canonical_dump(record_.to_json()));
  }

  /// Makes a recorded artifact usable again: bytes from the live store, or
  /// re-registered from one of the candidate files whose content still
  /// hashes to the recorded id.
  VideoArtifact ensure_artifact(const json& meta_json,
                                const std::vector<std::filesystem::path>& candidate_files) {
    VideoArtifact meta = VideoArtifact::from_json(meta_json);
    ArtifactStore& store = session_.artifacts();
    if (store.contains(meta.id)) {
      meta.storage_ref = store.ref_for(meta.id);
      return meta;
    }
    for (const auto& path : candidate_files) {
      auto bytes = read_text_file(path);
      if (!bytes || sha256_hex(*bytes) != meta.id) continue;
      return store.put_existing(*bytes, meta, meta.id);
    }
    throw MissingArtifact("video " + short_hash(meta.id) + " has no stored bytes");
  }

  void write_video_files(const json& videos) {
    for (std::size_t i = 0; i < videos.size(); ++i) {
      VideoArtifact meta = VideoArtifact::from_json(videos[i]);
      const std::filesystem::path bin = video_path(i);
      if (!std::filesystem::exists(bin)) {
        VideoArtifact live = ensure_artifact(videos[i], {});
        write_text_file(bin, session_.artifacts().load_bytes(live));
      }
      write_text_file(bin.string() + ".json", canonical_dump(videos[i]));
    }
  }

  void write_final_files(const json& final_meta) {
    VideoArtifact live = ensure_artifact(final_meta, {run_dir_ / "final.bin"});
    const std::filesystem::path bin = run_dir_ / "final.bin";
    if (!std::filesystem::exists(bin))
      write_text_file(bin, session_.artifacts().load_bytes(live));
    write_text_file(run_dir_ / "final.bin.json", canonical_dump(final_meta));
  }

  std::string intent_;
  const RelationDatabase& db_;
  PipelineConfig cfg_;
  ClientSession& session_;
  const TemplateSet& templates_;
  const QuestionBank& bank_;
  std::filesystem::path runs_dir_;
  json provenance_;
  StageCache stage_cache_;
  std::filesystem::path run_dir_;
  std::optional<RunRecord> prior_;
  RunRecord record_;
};

}  // namespace detail

/// Executes retrieval, merge, refinement, generation, scoring, selection,
/// optional critique, and enhancement, persisting every intermediate under
/// runs/<run_id>/. The run id is a hash of all inputs, so re-running a
/// completed run returns the stored result without touching any backend,
/// and an interrupted run resumes from its first incomplete stage.
inline PipelineResult run_pipeline(const std::string& intent, const RelationDatabase& db,
                                   const PipelineConfig& cfg, ClientSession& session,
                                   const TemplateSet& templates, const QuestionBank& bank,
                                   const std::filesystem::path& runs_dir,
                                   const json& config_provenance = json::object()) {
  detail::PipelineRun run(intent, db, cfg, session, templates, bank, runs_dir, config_provenance);
  return run.execute();
}

/// Continues the identified run with the same inputs. The caller supplies
/// the database, bank, templates, and backends again; they must hash to the
/// recorded run identity.
inline PipelineResult resume_run(const std::string& run_id, const RelationDatabase& db,
                                 ClientSession& session, const TemplateSet& templates,
                                 const QuestionBank& bank,
                                 const std::filesystem::path& runs_dir) {
  auto text = read_text_file(runs_dir / run_id / "record.json");
  if (!text) throw ValidationError("unknown run id: " + run_id);
  json j = json::parse(*text, nullptr, false);
  if (j.is_discarded()) throw ValidationError("run record is corrupt for run id: " + run_id);
  RunRecord prior = RunRecord::from_json(j);
  PipelineConfig cfg = PipelineConfig::from_json(prior.config);

  detail::PipelineRun run(prior.intent, db, cfg, session, templates, bank, runs_dir,
                          prior.config_provenance);
  if (run.run_id() != run_id)
    throw ValidationError("resume inputs (database, bank, templates, or backends) do not match run " +
                          run_id);
  return run.execute();
}

}  // namespace threer
