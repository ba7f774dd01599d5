#include "threer/critique.hpp"

#include <catch2/catch_amalgamated.hpp>

#include "threer/mock_clients.hpp"
#include "threer/pipeline.hpp"

using namespace threer;

namespace {

std::string read_file(const std::string& path) {
  auto text = read_text_file(path);
  REQUIRE(text.has_value());
  return *text;
}

std::string strict_critique_json(int score, const std::string& p_new = "a better prompt",
                                 const std::string& metric = "A_TV") {
  return json{{"prompt_analysis",
               {{"user_prompt_intent", "the intent"},
                {"bottleneck_flaw_metrics",
                 {{"metric", metric}, {"score", score}, {"observation", "obs"}}},
                {"diagnosis", {{"root_cause", "cause"}}}}},
              {"prescription", {{"P_new", p_new}, {"meta_instruction", "meta"}}}}
      .dump();
}

struct LoopHarness {
  std::shared_ptr<ScriptedChatClient> chat = std::make_shared<ScriptedChatClient>();
  std::shared_ptr<ScriptedVqaClient> vqa;
  Backends backends;

  explicit LoopHarness(ScriptedVqaClient::Responder vqa_fn) {
    vqa = std::make_shared<ScriptedVqaClient>(std::move(vqa_fn));
    backends = make_mock_backends(1);
    backends.chat = chat;
    backends.vqa = vqa;
  }
};

}  // namespace

TEST_CASE("the rendered critique prompt carries the protocol anchors") {
  RenderedPrompt p = render_critique_prompt(TemplateSet::builtin(), "the intent", "the old prompt");
  CHECK(p.user.find("PHASE 2: ROOT CAUSE DIAGNOSIS") != std::string::npos);
  CHECK(p.user.find("\"metric\": \"A_TV\" | \"C_T\" | \"F_C\" | \"Q_V\",") != std::string::npos);
  CHECK(p.user.find("STRICT JSON OUTPUT SCHEMA") != std::string::npos);
  CHECK(p.user.find("{USER_PROMPT_INTENT}") == std::string::npos);
  CHECK(p.user.find("{DESCRIPTION_PROMPT_OLD}") == std::string::npos);
  CHECK(p.user.find("\"the intent\"") != std::string::npos);
  CHECK(p.user.find("\"the old prompt\"") != std::string::npos);
  CHECK(p.system.find("Expert Text-to-Video (T2V) Alignment") != std::string::npos);
}

TEST_CASE("rendered critique output byte-matches the golden files") {
  json teddy = json::parse(read_file("tests/fixtures/critique_transcript_teddy.json"));
  RenderedPrompt p = render_critique_prompt(
      TemplateSet::builtin(), teddy.at("user_prompt").get<std::string>(),
      teddy.at("Iterations_1").at("description_prompt_old").get<std::string>());
  CHECK(p.system == read_file("tests/golden/critique_system.golden.txt"));
  CHECK(p.user == read_file("tests/golden/critique_user_rendered.golden.txt"));
}

TEST_CASE("parse_critique reads the strict output schema") {
  CritiqueReport r = parse_critique(strict_critique_json(4));
  CHECK(r.metric == CritiqueMetric::kATv);
  CHECK(r.score == 4);
  CHECK(r.observation == "obs");
  CHECK(r.root_cause == "cause");
  CHECK(r.p_new == "a better prompt");
  CHECK(r.meta_instruction == "meta");
  CHECK(r.user_prompt_intent == "the intent");
}

TEST_CASE("parse_critique strips code fences") {
  CritiqueReport r = parse_critique("```json\n" + strict_critique_json(9) + "\n```");
  CHECK(r.score == 9);
}

TEST_CASE("the teddy-bear transcript parses with metric A_TV and scores 2 then 0") {
  json doc = json::parse(read_file("tests/fixtures/critique_transcript_teddy.json"));
  CritiqueReport first = parse_critique(doc.at("Iterations_1").dump());
  CHECK(first.metric == CritiqueMetric::kATv);
  CHECK(first.score == 2);
  CHECK(first.p_new.rfind("A forest clearing with a single teddy bear", 0) == 0);

  CritiqueReport second = parse_critique(doc.at("Iterations_2").dump());
  CHECK(second.metric == CritiqueMetric::kATv);
  CHECK(second.score == 0);
}

TEST_CASE("the bird transcript parses with scores 6 then 2") {
  json doc = json::parse(read_file("tests/fixtures/critique_transcript_bird.json"));
  CHECK(parse_critique(doc.at("Iterations_1").dump()).score == 6);
  CHECK(parse_critique(doc.at("Iterations_2").dump()).score == 2);
}

TEST_CASE("schema violations raise CritiqueSchemaError") {
  CHECK_THROWS_AS(parse_critique("not json at all"), CritiqueSchemaError);
  CHECK_THROWS_AS(parse_critique("[1,2,3]"), CritiqueSchemaError);
  CHECK_THROWS_AS(parse_critique(strict_critique_json(2, "p", "X_Y")), CritiqueSchemaError);
  CHECK_THROWS_AS(parse_critique(strict_critique_json(11)), CritiqueSchemaError);
  CHECK_THROWS_AS(parse_critique(strict_critique_json(-1)), CritiqueSchemaError);
  CHECK_THROWS_AS(parse_critique(strict_critique_json(5, "")), CritiqueSchemaError);

  json no_score = json::parse(strict_critique_json(5));
  no_score["prompt_analysis"]["bottleneck_flaw_metrics"].erase("score");
  CHECK_THROWS_AS(parse_critique(no_score.dump()), CritiqueSchemaError);

  json float_score = json::parse(strict_critique_json(5));
  float_score["prompt_analysis"]["bottleneck_flaw_metrics"]["score"] = 2.5;
  CHECK_THROWS_AS(parse_critique(float_score.dump()), CritiqueSchemaError);
}

TEST_CASE("a passing first critique stops the loop with zero regenerations") {
  LoopHarness h(ScriptedVqaClient::all_yes());
  h.chat->push_response(strict_critique_json(8));

  ClientSession session(h.backends);
  VideoArtifact winner = session.generate_video("the winner prompt");
  ScoreReport winner_report = score_video(session, winner, "intent", QuestionBank::default_bank());

  CritiqueLoopConfig cfg;
  cfg.enabled = true;
  cfg.accept_threshold = 7;
  CritiqueDeps deps{TemplateSet::builtin(), QuestionBank::default_bank(), 0, 1024, "critique"};
  std::size_t t2v_before = session.transcript().count_op("t2v");
  CritiqueOutcome out =
      critique_iterate(session, deps, winner, winner_report, "intent", "the winner prompt", cfg);

  CHECK(out.iterations.size() == 1);
  CHECK_FALSE(out.iterations[0].regenerated);
  CHECK(out.final_video.id == winner.id);
  CHECK(session.transcript().count_op("t2v") == t2v_before);
}

TEST_CASE("the rescore guard keeps the incumbent when regenerations score lower") {
  // First video answered all-yes; every regeneration answered all-no.
  std::string first_id;
  LoopHarness h([&first_id](const VideoArtifact& v, const std::string&) {
    return v.id == first_id ? 1.0 : 0.0;
  });
  h.chat->push_response(strict_critique_json(2, "regen prompt one"));
  h.chat->push_response(strict_critique_json(3, "regen prompt two"));

  ClientSession session(h.backends);
  VideoArtifact winner = session.generate_video("the winner prompt");
  first_id = winner.id;
  ScoreReport winner_report = score_video(session, winner, "intent", QuestionBank::default_bank());

  CritiqueLoopConfig cfg;
  cfg.enabled = true;
  cfg.max_iterations = 2;
  CritiqueDeps deps{TemplateSet::builtin(), QuestionBank::default_bank(), 0, 1024, "critique"};
  CritiqueOutcome out =
      critique_iterate(session, deps, winner, winner_report, "intent", "the winner prompt", cfg);

  REQUIRE(out.iterations.size() == 2);
  CHECK(out.iterations[0].regenerated);
  CHECK_FALSE(out.iterations[0].kept_regenerated);
  CHECK(out.iterations[1].regenerated);
  CHECK_FALSE(out.iterations[1].kept_regenerated);
  CHECK(out.final_video.id == winner.id);
  CHECK(out.final_report.weighted_total == winner_report.weighted_total);
  // the second round critiques the first round's new prompt, as in the
  // recorded transcripts
  CHECK(out.iterations[1].description_prompt_old == "regen prompt one");
}

TEST_CASE("a strictly better regeneration replaces the incumbent") {
  std::string first_id;
  LoopHarness h([&first_id](const VideoArtifact& v, const std::string&) {
    return v.id == first_id ? 0.0 : 1.0;
  });
  h.chat->push_response(strict_critique_json(2, "much better prompt"));
  h.chat->push_response(strict_critique_json(9));  // second round passes

  ClientSession session(h.backends);
  VideoArtifact winner = session.generate_video("the winner prompt");
  first_id = winner.id;
  ScoreReport winner_report = score_video(session, winner, "intent", QuestionBank::default_bank());

  CritiqueLoopConfig cfg;
  cfg.enabled = true;
  cfg.max_iterations = 2;
  CritiqueDeps deps{TemplateSet::builtin(), QuestionBank::default_bank(), 0, 1024, "critique"};
  CritiqueOutcome out =
      critique_iterate(session, deps, winner, winner_report, "intent", "the winner prompt", cfg);

  CHECK(out.iterations[0].kept_regenerated);
  CHECK(out.final_video.id != winner.id);
  CHECK(out.final_report.weighted_total > winner_report.weighted_total);
}

TEST_CASE("disabling the rescore guard reproduces unguarded replacement") {
  std::string first_id;
  LoopHarness h([&first_id](const VideoArtifact& v, const std::string&) {
    return v.id == first_id ? 1.0 : 0.0;  // regenerations score worse
  });
  h.chat->push_response(strict_critique_json(2, "worse prompt"));

  ClientSession session(h.backends);
  VideoArtifact winner = session.generate_video("the winner prompt");
  first_id = winner.id;
  ScoreReport winner_report = score_video(session, winner, "intent", QuestionBank::default_bank());

  CritiqueLoopConfig cfg;
  cfg.enabled = true;
  cfg.max_iterations = 1;
  cfg.rescore_guard = false;
  CritiqueDeps deps{TemplateSet::builtin(), QuestionBank::default_bank(), 0, 1024, "critique"};
  CritiqueOutcome out =
      critique_iterate(session, deps, winner, winner_report, "intent", "the winner prompt", cfg);

  CHECK(out.iterations[0].kept_regenerated);
  CHECK(out.final_video.id != winner.id);
  CHECK(out.final_report.weighted_total < winner_report.weighted_total);
}

TEST_CASE("two failing critiques stop after exactly max_iterations") {
  LoopHarness h(ScriptedVqaClient::all_no());
  h.chat->push_response(strict_critique_json(1, "try one"));
  h.chat->push_response(strict_critique_json(1, "try two"));
  h.chat->push_response(strict_critique_json(1, "never used"));

  ClientSession session(h.backends);
  VideoArtifact winner = session.generate_video("w");
  ScoreReport report = score_video(session, winner, "intent", QuestionBank::default_bank());

  CritiqueLoopConfig cfg;
  cfg.enabled = true;
  cfg.max_iterations = 2;
  CritiqueDeps deps{TemplateSet::builtin(), QuestionBank::default_bank(), 0, 1024, "critique"};
  CritiqueOutcome out = critique_iterate(session, deps, winner, report, "intent", "w", cfg);

  CHECK(out.iterations.size() == 2);
  CHECK(h.chat->call_count() == 2);
  CHECK(session.transcript().count_stage_op("critique", "t2v") == 2);
}

TEST_CASE("a malformed critique ends the loop and keeps the incumbent") {
  LoopHarness h(ScriptedVqaClient::all_no());
  h.chat->push_response("ガ garbage, not a json object");

  ClientSession session(h.backends);
  VideoArtifact winner = session.generate_video("w");
  ScoreReport report = score_video(session, winner, "intent", QuestionBank::default_bank());

  CritiqueLoopConfig cfg;
  cfg.enabled = true;
  CritiqueDeps deps{TemplateSet::builtin(), QuestionBank::default_bank(), 0, 1024, "critique"};
  CritiqueOutcome out = critique_iterate(session, deps, winner, report, "intent", "w", cfg);
  CHECK(out.aborted);
  CHECK(out.final_video.id == winner.id);
  CHECK(out.iterations.empty());
}

TEST_CASE("critique_iterate refuses to run while disabled") {
  ClientSession session(make_mock_backends(1));
  VideoArtifact winner = session.generate_video("w");
  ScoreReport report = score_video(session, winner, "intent", QuestionBank::default_bank());
  CritiqueLoopConfig cfg;  // enabled = false
  CritiqueDeps deps{TemplateSet::builtin(), QuestionBank::default_bank(), 0, 1024, "critique"};
  CHECK_THROWS_AS(critique_iterate(session, deps, winner, report, "intent", "w", cfg),
                  PreconditionViolation);
}

TEST_CASE("the outcome serializes iterations in the transcript shape") {
  LoopHarness h(ScriptedVqaClient::all_no());
  h.chat->push_response(strict_critique_json(1, "try one"));
  h.chat->push_response(strict_critique_json(1, "try two"));

  ClientSession session(h.backends);
  VideoArtifact winner = session.generate_video("w");
  ScoreReport report = score_video(session, winner, "intent", QuestionBank::default_bank());

  CritiqueLoopConfig cfg;
  cfg.enabled = true;
  cfg.max_iterations = 2;
  CritiqueDeps deps{TemplateSet::builtin(), QuestionBank::default_bank(), 0, 1024, "critique"};
  CritiqueOutcome out = critique_iterate(session, deps, winner, report, "the intent", "w", cfg);

  json t = out.transcript_json("the intent");
  CHECK(t.at("user_prompt") == "the intent");
  REQUIRE(t.contains("Iterations_1"));
  REQUIRE(t.contains("Iterations_2"));
  CHECK(t["Iterations_1"].at("description_prompt_old") == "w");
  CHECK(t["Iterations_1"].at("metrics").at("metric") == "A_TV");
  CHECK(t["Iterations_1"].at("prompt_new") == "try one");
  CHECK(t["Iterations_2"].at("description_prompt_old") == "try one");
}
