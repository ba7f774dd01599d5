#include "threer/pipeline.hpp"

#include <catch2/catch_amalgamated.hpp>
#include <atomic>
#include <filesystem>
#include <thread>

#include "threer/mock_clients.hpp"

using namespace threer;
namespace fs = std::filesystem;
using namespace std::chrono_literals;

namespace {

const char* kPipelineDb =
    R"({"scene": "A tranquil tableau of barn.", "subjects": ["a barn", "appears to be a farmer"], "actions": ["opening the door of a barn", "dancing in a barn"], "environments": ["in a barn", "inside a barn"]}
{"scene": "city skyline at dusk", "subjects": ["skyscrapers"], "actions": ["lights turning on"], "environments": ["downtown"]}
{"scene": "a whale in the ocean", "subjects": ["a whale"], "actions": ["breaching"], "environments": ["open sea"]}
)";

const std::string kIntent = "A tranquil tableau of barn.";

struct TempDirs {
  fs::path root;

  explicit TempDirs(const std::string& tag) {
    root = fs::temp_directory_path() /
           ("threer-test-" + tag + "-" + std::to_string(::getpid()) + "-" +
            std::to_string(counter()++));
    fs::remove_all(root);
    fs::create_directories(root);
  }
  ~TempDirs() {
    std::error_code ec;
    fs::remove_all(root, ec);
  }

  fs::path runs() const { return root / "runs"; }
  fs::path cache() const { return root / "cache"; }

  static std::atomic<int>& counter() {
    static std::atomic<int> c{0};
    return c;
  }
};

ClientSession make_session(std::uint64_t seed, std::shared_ptr<CacheStore> cache = nullptr,
                           Backends backends = {}) {
  if (!backends.chat) backends = make_mock_backends(seed);
  return ClientSession(std::move(backends), RetryPolicy{}, std::move(cache));
}

PipelineConfig default_config() {
  PipelineConfig cfg;
  cfg.seed = 7;
  return cfg;
}

RelationDatabase test_db() { return RelationDatabase::load_string(kPipelineDb); }

std::size_t merge_queue_length(const RunRecord& record) {
  return record.find_stage("retrieval")->payload.at("queue").size();
}

struct ProbeT2v : TextToVideoClient {
  std::shared_ptr<TextToVideoClient> inner;
  std::atomic<int> in_flight{0};
  std::atomic<int> max_in_flight{0};

  explicit ProbeT2v(std::shared_ptr<TextToVideoClient> wrapped) : inner(std::move(wrapped)) {}

  std::string id() const override { return inner->id(); }

  VideoPayload generate(const std::string& prompt, const GenParams& params) override {
    int current = ++in_flight;
    int seen = max_in_flight.load();
    while (current > seen && !max_in_flight.compare_exchange_weak(seen, current)) {
    }
    std::this_thread::sleep_for(15ms);
    VideoPayload out = inner->generate(prompt, params);
    --in_flight;
    return out;
  }
};

struct FailOnceVqa : VqaClient {
  std::shared_ptr<VqaClient> inner;
  std::atomic<bool> tripped{false};

  explicit FailOnceVqa(std::shared_ptr<VqaClient> wrapped) : inner(std::move(wrapped)) {}

  std::string id() const override { return inner->id(); }

  double answer(const VideoArtifact& video, const std::string& question) override {
    if (!tripped.exchange(true))
      throw ClientError(ErrorKind::kSchemaViolation, "simulated crash during scoring");
    return inner->answer(video, question);
  }
};

}  // namespace

TEST_CASE("a full mock run walks the five steps in order and lands at 61 frames") {
  TempDirs dirs("full");
  RelationDatabase db = test_db();
  ClientSession session = make_session(7);
  PipelineResult result = run_pipeline(kIntent, db, default_config(), session,
                                       TemplateSet::builtin(), QuestionBank::default_bank(),
                                       dirs.runs());

  CHECK(result.record.stage_names() ==
        std::vector<std::string>{"retrieval", "merge", "refine", "generate", "score", "select",
                                 "enhance"});
  CHECK(result.final_video.frame_count == 61);

  const std::size_t queue_len = merge_queue_length(result.record);
  CHECK(session.transcript().count_stage_op("merge", "chat") == queue_len);
  CHECK(session.transcript().count_stage_op("refine", "chat") >= 1);
  CHECK(session.transcript().count_op("t2v") == 4);
  CHECK(session.transcript().count_op("vqa") == 4 * 29);
  CHECK(session.transcript().count_op("enhance") == 1);
  CHECK(session.transcript().count_stage_op("critique", "chat") == 0);

  // run directory layout
  const fs::path dir = result.run_dir;
  for (const char* name : {"config.json", "record.json", "retrieval.json", "merged.txt",
                           "candidates.json", "selection.json", "final.bin", "final.bin.json"}) {
    INFO(name);
    CHECK(fs::exists(dir / name));
  }
  for (int i = 0; i < 4; ++i) {
    CHECK(fs::exists(dir / "videos" / (std::to_string(i) + ".bin")));
    CHECK(fs::exists(dir / "scores" / (std::to_string(i) + ".json")));
  }
  CHECK_FALSE(fs::exists(dir / "critique.json"));
}

TEST_CASE("identical seeds reproduce identical artifact ids and stage hashes") {
  RelationDatabase db = test_db();
  auto run_once = [&](const std::string& tag) {
    TempDirs dirs(tag);
    ClientSession session = make_session(7);
    PipelineResult r = run_pipeline(kIntent, db, default_config(), session,
                                    TemplateSet::builtin(), QuestionBank::default_bank(),
                                    dirs.runs());
    std::vector<std::string> hashes;
    for (const auto& s : r.record.stages) hashes.push_back(s.output_hash);
    return std::make_pair(r.final_video.id, hashes);
  };
  auto [id1, hashes1] = run_once("det1");
  auto [id2, hashes2] = run_once("det2");
  CHECK(id1 == id2);
  CHECK(hashes1 == hashes2);

  PipelineConfig other = default_config();
  other.seed = 8;
  TempDirs dirs("det3");
  ClientSession session = make_session(7);
  PipelineResult r3 = run_pipeline(kIntent, db, other, session, TemplateSet::builtin(),
                                   QuestionBank::default_bank(), dirs.runs());
  CHECK(r3.final_video.id != id1);
}

TEST_CASE("per-candidate seeds differentiate the four generations") {
  TempDirs dirs("seeds");
  RelationDatabase db = test_db();
  ClientSession session = make_session(7);
  PipelineResult r = run_pipeline(kIntent, db, default_config(), session, TemplateSet::builtin(),
                                  QuestionBank::default_bank(), dirs.runs());
  const json& videos = r.record.find_stage("generate")->payload.at("videos");
  std::set<std::string> ids;
  for (const auto& v : videos) ids.insert(v.at("id").get<std::string>());
  CHECK(ids.size() == videos.size());
}

TEST_CASE("rerunning a completed run performs zero backend calls") {
  TempDirs dirs("idem");
  RelationDatabase db = test_db();
  {
    ClientSession first = make_session(7);
    run_pipeline(kIntent, db, default_config(), first, TemplateSet::builtin(),
                 QuestionBank::default_bank(), dirs.runs());
  }
  ClientSession second = make_session(7);
  PipelineResult again = run_pipeline(kIntent, db, default_config(), second,
                                      TemplateSet::builtin(), QuestionBank::default_bank(),
                                      dirs.runs());
  CHECK(second.transcript().size() == 0);
  CHECK(again.final_video.frame_count == 61);
  CHECK(again.record.complete());
}

TEST_CASE("a shared stage cache satisfies a fresh run with zero backend calls") {
  TempDirs dirs("cache");
  RelationDatabase db = test_db();
  auto cache = std::make_shared<CacheStore>(dirs.cache());
  std::string first_id;
  {
    ClientSession first = make_session(7, cache);
    first_id = run_pipeline(kIntent, db, default_config(), first, TemplateSet::builtin(),
                            QuestionBank::default_bank(), dirs.root / "runsA")
                   .final_video.id;
  }
  ClientSession second = make_session(7, cache);
  PipelineResult again = run_pipeline(kIntent, db, default_config(), second,
                                      TemplateSet::builtin(), QuestionBank::default_bank(),
                                      dirs.root / "runsB");
  CHECK(second.transcript().size() == 0);
  CHECK(again.final_video.id == first_id);
  for (const auto& s : again.record.stages) CHECK(s.source == "cache");
}

TEST_CASE("changing tau invalidates retrieval and everything downstream") {
  TempDirs dirs("tau");
  RelationDatabase db = test_db();
  auto cache = std::make_shared<CacheStore>(dirs.cache());
  {
    ClientSession first = make_session(7, cache);
    run_pipeline(kIntent, db, default_config(), first, TemplateSet::builtin(),
                 QuestionBank::default_bank(), dirs.runs());
  }
  PipelineConfig changed = default_config();
  changed.tau = 0.25;
  ClientSession second = make_session(7, cache);
  PipelineResult r = run_pipeline(kIntent, db, changed, second, TemplateSet::builtin(),
                                  QuestionBank::default_bank(), dirs.runs());
  for (const auto& s : r.record.stages) CHECK(s.source == "executed");
  CHECK(second.transcript().count_op("t2v") == 4);
  CHECK(second.transcript().count_op("vqa") == 4 * 29);
}

TEST_CASE("changing only target_frames re-runs only the enhancement stage") {
  TempDirs dirs("frames");
  RelationDatabase db = test_db();
  auto cache = std::make_shared<CacheStore>(dirs.cache());
  {
    ClientSession first = make_session(7, cache);
    run_pipeline(kIntent, db, default_config(), first, TemplateSet::builtin(),
                 QuestionBank::default_bank(), dirs.runs());
  }
  PipelineConfig changed = default_config();
  changed.target_frames = 81;
  ClientSession second = make_session(7, cache);
  PipelineResult r = run_pipeline(kIntent, db, changed, second, TemplateSet::builtin(),
                                  QuestionBank::default_bank(), dirs.runs());

  CHECK(second.transcript().count_op("chat") == 0);
  CHECK(second.transcript().count_op("t2v") == 0);
  CHECK(second.transcript().count_op("vqa") == 0);
  CHECK(second.transcript().count_op("embed") == 0);
  CHECK(second.transcript().count_op("enhance") == 1);
  CHECK(r.final_video.frame_count == 81);
  for (const auto& s : r.record.stages) {
    if (s.name == "enhance") CHECK(s.source == "executed");
    else CHECK(s.source == "cache");
  }
}

TEST_CASE("a run killed during scoring resumes with only ranking and enhancement") {
  TempDirs dirs("resume");
  RelationDatabase db = test_db();
  auto cache = std::make_shared<CacheStore>(dirs.cache());
  PipelineConfig cfg = default_config();
  cfg.parallelism = 1;

  std::string run_id;
  {
    Backends b = make_mock_backends(7);
    b.vqa = std::make_shared<FailOnceVqa>(b.vqa);
    ClientSession crashing(std::move(b), RetryPolicy{}, cache);
    try {
      run_pipeline(kIntent, db, cfg, crashing, TemplateSet::builtin(),
                   QuestionBank::default_bank(), dirs.runs());
      FAIL("expected the scoring stage to fail");
    } catch (const ClientError&) {
    }
    // the partial record stops after generation
    for (const auto& entry : fs::directory_iterator(dirs.runs())) {
      run_id = entry.path().filename().string();
    }
    RunRecord partial = RunRecord::from_json(
        json::parse(*read_text_file(dirs.runs() / run_id / "record.json")));
    CHECK(partial.stage_names() ==
          std::vector<std::string>{"retrieval", "merge", "refine", "generate"});
    CHECK_FALSE(partial.complete());
  }

  ClientSession session = make_session(7, cache);
  PipelineResult r = resume_run(run_id, db, session, TemplateSet::builtin(),
                                QuestionBank::default_bank(), dirs.runs());

  CHECK(session.transcript().count_op("embed") == 0);
  CHECK(session.transcript().count_op("chat") == 0);
  CHECK(session.transcript().count_op("t2v") == 0);
  CHECK(session.transcript().count_op("vqa") == 4 * 29);
  CHECK(session.transcript().count_op("enhance") == 1);

  CHECK(r.record.resumed);
  for (const auto& s : r.record.stages) {
    if (s.name == "retrieval" || s.name == "merge" || s.name == "refine" || s.name == "generate")
      CHECK(s.source == "restored");
    else
      CHECK(s.source == "executed");
  }
  CHECK(r.final_video.frame_count == 61);
}

TEST_CASE("resuming a completed run returns the stored result without calls") {
  TempDirs dirs("resume-done");
  RelationDatabase db = test_db();
  std::string run_id, final_id;
  {
    ClientSession first = make_session(7);
    PipelineResult r = run_pipeline(kIntent, db, default_config(), first, TemplateSet::builtin(),
                                    QuestionBank::default_bank(), dirs.runs());
    run_id = r.record.run_id;
    final_id = r.final_video.id;
  }
  ClientSession session = make_session(7);
  PipelineResult r = resume_run(run_id, db, session, TemplateSet::builtin(),
                                QuestionBank::default_bank(), dirs.runs());
  CHECK(session.transcript().size() == 0);
  CHECK(r.final_video.id == final_id);
}

TEST_CASE("resume rejects unknown run ids and changed inputs") {
  TempDirs dirs("resume-bad");
  RelationDatabase db = test_db();
  ClientSession session = make_session(7);
  CHECK_THROWS_AS(resume_run("r0000000000000000", db, session, TemplateSet::builtin(),
                             QuestionBank::default_bank(), dirs.runs()),
                  ValidationError);

  std::string run_id;
  {
    ClientSession first = make_session(7);
    run_id = run_pipeline(kIntent, db, default_config(), first, TemplateSet::builtin(),
                          QuestionBank::default_bank(), dirs.runs())
                 .record.run_id;
  }
  RelationDatabase other_db = RelationDatabase::load_string(
      "{\"scene\": \"something else\", \"subjects\": [\"s\"]}\n");
  ClientSession session2 = make_session(7);
  CHECK_THROWS_AS(resume_run(run_id, other_db, session2, TemplateSet::builtin(),
                             QuestionBank::default_bank(), dirs.runs()),
                  ValidationError);
}

TEST_CASE("a deleted intermediate surfaces as MissingArtifact on resume") {
  TempDirs dirs("missing");
  RelationDatabase db = test_db();
  PipelineConfig cfg = default_config();
  cfg.parallelism = 1;
  std::string run_id;
  {
    Backends b = make_mock_backends(7);
    b.vqa = std::make_shared<FailOnceVqa>(b.vqa);
    ClientSession crashing(std::move(b));  // no cache: run dir is the only byte store
    try {
      run_pipeline(kIntent, db, cfg, crashing, TemplateSet::builtin(),
                   QuestionBank::default_bank(), dirs.runs());
    } catch (const ClientError&) {
    }
    for (const auto& entry : fs::directory_iterator(dirs.runs()))
      run_id = entry.path().filename().string();
  }
  fs::remove(dirs.runs() / run_id / "videos" / "1.bin");
  ClientSession session = make_session(7);
  CHECK_THROWS_AS(resume_run(run_id, db, session, TemplateSet::builtin(),
                             QuestionBank::default_bank(), dirs.runs()),
                  MissingArtifact);
}

TEST_CASE("in-flight generation never exceeds the configured parallelism") {
  TempDirs dirs("fanout");
  RelationDatabase db = test_db();
  Backends b = make_mock_backends(7);
  auto probe = std::make_shared<ProbeT2v>(b.t2v);
  b.t2v = probe;
  ClientSession session(std::move(b));
  PipelineConfig cfg = default_config();
  cfg.parallelism = 2;
  run_pipeline(kIntent, db, cfg, session, TemplateSet::builtin(), QuestionBank::default_bank(),
               dirs.runs());
  CHECK(probe->max_in_flight.load() <= 2);
  CHECK(probe->max_in_flight.load() >= 1);
}

TEST_CASE("the enhanced artifact is exactly the selection winner") {
  TempDirs dirs("winner");
  RelationDatabase db = test_db();
  ClientSession session = make_session(7);
  PipelineResult r = run_pipeline(kIntent, db, default_config(), session, TemplateSet::builtin(),
                                  QuestionBank::default_bank(), dirs.runs());

  const int winner = r.record.find_stage("select")->payload.at("winner_index").get<int>();
  const std::string winner_id = r.record.find_stage("generate")
                                    ->payload.at("videos")[static_cast<std::size_t>(winner)]
                                    .at("id")
                                    .get<std::string>();
  bool saw_enhance_call = false;
  for (const auto& rec : session.transcript().snapshot()) {
    if (rec.op == "enhance") {
      saw_enhance_call = true;
      CHECK(rec.request.at("video_id").get<std::string>() == winner_id);
    }
  }
  CHECK(saw_enhance_call);
  CHECK(r.record.summary.at("winner_index").get<int>() == winner);
}

TEST_CASE("an enabled critique loop records its stage and transcript file") {
  TempDirs dirs("critique");
  RelationDatabase db = test_db();
  ClientSession session = make_session(7);
  PipelineConfig cfg = default_config();
  cfg.critique.enabled = true;
  PipelineResult r = run_pipeline(kIntent, db, cfg, session, TemplateSet::builtin(),
                                  QuestionBank::default_bank(), dirs.runs());

  CHECK(r.record.stage_names() ==
        std::vector<std::string>{"retrieval", "merge", "refine", "generate", "score", "select",
                                 "critique", "enhance"});
  CHECK(session.transcript().count_stage_op("critique", "chat") >= 1);
  REQUIRE(fs::exists(r.run_dir / "critique.json"));
  json transcript = json::parse(*read_text_file(r.run_dir / "critique.json"));
  CHECK(transcript.contains("user_prompt"));
  CHECK(transcript.contains("Iterations_1"));
  CHECK(r.final_video.frame_count == 61);
}

TEST_CASE("pipeline config layers flags over file over defaults with provenance") {
  json file_layer = json{{"tau", 0.3}, {"n_candidates", 2}};
  json flag_layer = json{{"tau", 0.6}, {"seed", 42}};
  auto [cfg, provenance] = PipelineConfig::from_layers(file_layer, flag_layer);
  CHECK(cfg.tau == 0.6);
  CHECK(cfg.n_candidates == 2);
  CHECK(cfg.seed == 42);
  CHECK(cfg.top_k == 3);
  CHECK(provenance.at("tau") == "flag");
  CHECK(provenance.at("n_candidates") == "file");
  CHECK(provenance.at("top_k") == "default");

  CHECK_THROWS_AS(PipelineConfig::from_layers(json{{"bogus", 1}}, json::object()),
                  ValidationError);
  CHECK_THROWS_AS(PipelineConfig::from_json(json{{"tau", 3.0}}), ValidationError);
  CHECK_THROWS_AS(PipelineConfig::from_json(json{{"critique", {{"nope", 1}}}}), ValidationError);
}

TEST_CASE("stage cache quarantines corrupt entries and treats them as misses") {
  TempDirs dirs("corrupt");
  auto cache = std::make_shared<CacheStore>(dirs.cache());
  StageCache stage_cache(cache);
  stage_cache.store("retrieval", "abc", json{{"x", 1}});
  REQUIRE(stage_cache.lookup("retrieval", "abc").has_value());

  // clobber the entry on disk
  const fs::path entry = dirs.cache() / "stages" / "retrieval" / "abc.json";
  REQUIRE(fs::exists(entry));
  write_text_file(entry, "{not json");
  CHECK_FALSE(stage_cache.lookup("retrieval", "abc").has_value());
  CHECK(fs::exists(entry.string() + ".corrupt"));
}
