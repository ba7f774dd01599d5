#include "threer/relation_db.hpp"

#include <catch2/catch_amalgamated.hpp>
#include <sstream>

using namespace threer;

namespace {

const char* kThreeScenes =
    R"({"scene": "a dog in a park", "subjects": ["a dog"], "actions": ["running"], "environments": ["in a park"]}
{"scene": "a cat on a sofa", "subjects": ["a cat"], "actions": [], "environments": ["on a sofa"]}
{"scene": "a boat at sea", "subjects": ["a boat"], "actions": ["sailing"], "environments": ["at sea"]}
)";

}  // namespace

TEST_CASE("a three-line file loads three scenes in file order") {
  RelationDatabase db = RelationDatabase::load_string(kThreeScenes);
  REQUIRE(db.size() == 3);
  CHECK(db.scene(0).scene_text == "a dog in a park");
  CHECK(db.scene(1).scene_text == "a cat on a sofa");
  CHECK(db.scene(2).scene_text == "a boat at sea");
  CHECK(db.scene(1).actions.empty());
  CHECK(db.scene(1).modifier_count() == 2);
}

TEST_CASE("blank lines are skipped") {
  RelationDatabase db = RelationDatabase::load_string(
      "\n{\"scene\": \"x\", \"subjects\": [\"s\"]}\n\n");
  CHECK(db.size() == 1);
}

TEST_CASE("an empty scene_text is a malformed record with its line number") {
  const std::string text =
      "{\"scene\": \"ok\", \"subjects\": [\"s\"]}\n{\"scene\": \"  \", \"subjects\": [\"s\"]}\n";
  try {
    RelationDatabase::load_string(text);
    FAIL("expected MalformedRecord");
  } catch (const MalformedRecord& e) {
    CHECK(e.line_no() == 2);
    CHECK(e.reason() == "empty scene_text");
  }
}

TEST_CASE("invalid JSON lines are rejected") {
  CHECK_THROWS_AS(RelationDatabase::load_string("not json\n"), MalformedRecord);
}

TEST_CASE("unknown keys are rejected") {
  CHECK_THROWS_AS(
      RelationDatabase::load_string("{\"scene\": \"x\", \"subjects\": [\"s\"], \"extra\": 1}\n"),
      MalformedRecord);
}

TEST_CASE("a scene with no modifiers in any category is rejected") {
  CHECK_THROWS_AS(RelationDatabase::load_string(
                      "{\"scene\": \"x\", \"subjects\": [], \"actions\": [], \"environments\": []}\n"),
                  MalformedRecord);
}

TEST_CASE("empty modifier strings are rejected") {
  CHECK_THROWS_AS(RelationDatabase::load_string("{\"scene\": \"x\", \"subjects\": [\" \"]}\n"),
                  MalformedRecord);
}

TEST_CASE("a file with zero valid entries is an empty database") {
  std::istringstream empty("\n\n");
  CHECK_THROWS_AS(RelationDatabase::load(empty), EmptyDatabase);
}

TEST_CASE("the barn fixture carries 14 modifiers across categories") {
  RelationDatabase db = RelationDatabase::load_file("tests/fixtures/barn_scene.jsonl");
  REQUIRE(db.size() == 1);
  CHECK(db.scene(0).scene_text == "A tranquil tableau of barn.");
  CHECK(db.scene(0).modifier_count() == 14);
}

TEST_CASE("precomputed embeddings are validated against the backend dimension") {
  const std::string good = "{\"scene\": \"x\", \"subjects\": [\"s\"], \"embedding\": [1.0, 0.0]}\n";
  RelationDatabase db = RelationDatabase::load_string(good, 2);
  REQUIRE(db.scene(0).embedding.has_value());
  CHECK(db.scene(0).embedding->dim() == 2);

  CHECK_THROWS_AS(RelationDatabase::load_string(good, 3), MalformedRecord);
  CHECK_THROWS_AS(
      RelationDatabase::load_string("{\"scene\": \"x\", \"subjects\": [\"s\"], \"embedding\": [0.0, 0.0]}\n"),
      MalformedRecord);
}

TEST_CASE("content hash ignores whether embeddings were precomputed") {
  const std::string with =
      "{\"scene\": \"x\", \"subjects\": [\"s\"], \"embedding\": [1.0, 0.0]}\n";
  const std::string without = "{\"scene\": \"x\", \"subjects\": [\"s\"]}\n";
  CHECK(RelationDatabase::load_string(with).content_hash() ==
        RelationDatabase::load_string(without).content_hash());
}
